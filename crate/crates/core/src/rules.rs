//! Rewrite rules, propensities and rule execution.

use std::collections::BTreeMap;

use rustc_hash::FxHashMap as HashMap;
use std::ops::Bound as RangeBound;

use rand::Rng;
use thiserror::Error;

use crate::pattern::{
    count_at, count_loop, info_matches, match_at, match_at_within, substitute, Counted, Exponent, InfoPattern, LoopPattern, Match, Pattern,
    PatternAtom, PatternError,
};
use crate::ssa::EventList;
use crate::term::{resolve, CompartmentAddress, EnvInfo, Loop, NonParallel, Term, TermError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RuleError {
    #[error("right-hand side uses {0}, which the left-hand side does not bind")]
    UnboundRhsVariable(String),
    #[error("left-hand side may only use literal or variable exponents")]
    NotLeftForm,
    #[error("variable {0} occurs more than once on the left-hand side")]
    NonLinear(String),
    #[error("variable #{0} is not a natural-number variable of the left-hand side")]
    UnknownNatVar(String),
    #[error("no loop on the left-hand side has information variable @{0}")]
    BadTarget(String),
    #[error("duplicate rule id {0}")]
    DuplicateRule(String),
    #[error("parameter {0} is not defined")]
    UnknownParam(String),
    #[error("rate {rate} of rule {rule}: {message}")]
    Rate { rule: String, rate: String, message: String },
    #[error("propensity table is stale for rule {rule} at {site}")]
    StaleTable { rule: String, site: CompartmentAddress },
    #[error("match is not part of the current state")]
    StaleMatch,
    #[error("rule {rule} has no applicable match at {site}")]
    NoMatch { rule: String, site: CompartmentAddress },
    #[error(transparent)]
    Pattern(#[from] PatternError),
    #[error(transparent)]
    Term(#[from] TermError),
}

/// Rate function of a rule, evaluated on the compartment a match is
/// attributed to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateFn {
    Const(f64),
    /// Immature transition (1..=6) or death (16..=21).
    Immature(u8),
    /// Blood sucking (7), oviposition (8..=15) or adult death (22..=29).
    Adult(u8),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Bound {
    Lit(u64),
    Param(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Guard {
    Always,
    /// The bound natural-number variable exceeds the bound.
    Greater { var: String, bound: Bound },
}

/// How one match is chosen when a rule fires.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Selection {
    /// Proportionally to combinatorial weight.
    Weighted,
    MinNat(String),
    MaxNat(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewriteRule {
    pub id: String,
    pub guard: Guard,
    pub left: Pattern,
    pub right: Pattern,
    pub rate: RateFn,
    pub selection: Selection,
    /// Information variable of a destination loop: it must exist for the
    /// rule to apply, is chosen uniformly when firing, and does not multiply
    /// the propensity.
    pub target: Option<String>,
    wall: Option<Term>,
    split: Option<Split>,
}

/// Shape `{w}<I>[$Y | L | T?]` with one consumed loop `L` and an optional
/// target loop `T`: the weight at a site is a sum over its children.
#[derive(Debug, Clone, PartialEq)]
struct Split {
    info: InfoPattern,
    item: LoopPattern,
    target: Option<LoopPattern>,
}

impl Split {
    fn of(left: &Pattern, target: Option<&str>) -> Option<Split> {
        let anchor = left.anchor()?;
        anchor.content.rest.as_ref()?;
        let mut item = None;
        let mut tgt = None;
        for it in &anchor.content.items {
            let PatternAtom::Loop(lp) = &it.atom else { return None };
            if it.exp != Exponent::Lit(1) {
                return None;
            }
            if target.is_some() && lp.info.rest.as_deref() == target {
                if tgt.replace(lp.as_ref().clone()).is_some() {
                    return None;
                }
            } else if item.replace(lp.as_ref().clone()).is_some() {
                return None;
            }
        }
        let item = item?;
        if let Some(t) = &tgt {
            let tp = Pattern {
                items: vec![crate::pattern::PatternItem {
                    atom: PatternAtom::Loop(Box::new(t.clone())),
                    exp: Exponent::Lit(1),
                }],
                rest: None,
            };
            if !tp.vars().nats.is_empty() {
                return None;
            }
        }
        Some(Split {
            info: anchor.info.clone(),
            item,
            target: tgt,
        })
    }
}

impl RewriteRule {
    pub fn new(
        id: impl Into<String>,
        guard: Guard,
        left: Pattern,
        right: Pattern,
        rate: RateFn,
        selection: Selection,
        target: Option<String>,
    ) -> Result<Self, RuleError> {
        if !left.is_left_form() {
            return Err(RuleError::NotLeftForm);
        }
        let lv = left.vars();
        if let Some(v) = lv.contains(&right.vars()) {
            return Err(RuleError::UnboundRhsVariable(v));
        }
        if let Some(v) = left.repeated_vars().into_iter().next() {
            return Err(RuleError::NonLinear(v));
        }
        let nat_ok = |q: &String| {
            if lv.nats.contains(q) {
                Ok(())
            } else {
                Err(RuleError::UnknownNatVar(q.clone()))
            }
        };
        if let Guard::Greater { var, .. } = &guard {
            nat_ok(var)?;
        }
        if let Selection::MinNat(q) | Selection::MaxNat(q) = &selection {
            nat_ok(q)?;
        }
        if let Some(y) = &target {
            if left.find_by_info_var(y).is_none() {
                return Err(RuleError::BadTarget(y.clone()));
            }
        }
        let wall = left.anchor().map(|lp| lp.wall.clone());
        let split = Split::of(&left, target.as_deref());
        Ok(RewriteRule {
            id: id.into(),
            guard,
            left,
            right,
            rate,
            selection,
            target,
            wall,
            split,
        })
    }

    /// Whether matches of this rule can be attributed to `site`.
    fn may_apply_at(&self, term: &Term, site: &CompartmentAddress) -> bool {
        match &self.wall {
            None => true,
            Some(w) => match term.group_at(&site.0) {
                Some((NonParallel::Loop(l), _)) => &l.wall == w,
                _ => false,
            },
        }
    }

    fn guard_passes(&self, nats: &BTreeMap<String, u64>, model: &dyn RateModel) -> Result<bool, RuleError> {
        match &self.guard {
            Guard::Always => Ok(true),
            Guard::Greater { var, bound } => {
                let b = match bound {
                    Bound::Lit(n) => *n,
                    Bound::Param(p) => model.param(p).ok_or_else(|| RuleError::UnknownParam(p.clone()))?,
                };
                Ok(nats.get(var).is_some_and(|q| *q > b))
            }
        }
    }
}

/// A guard-free rule with a constant rate.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantRateRule {
    pub left: Pattern,
    pub k: f64,
    pub right: Pattern,
}

impl ConstantRateRule {
    pub fn into_rule(self, id: impl Into<String>) -> Result<RewriteRule, RuleError> {
        RewriteRule::new(
            id,
            Guard::Always,
            self.left,
            self.right,
            RateFn::Const(self.k),
            Selection::Weighted,
            None,
        )
    }
}

/// Evaluates rate functions and named guard parameters.
pub trait RateModel {
    /// Rate of `f` for a match attributed to a compartment with the given
    /// information and content.
    fn rate(&self, f: &RateFn, info: &EnvInfo, content: &Term) -> Result<f64, String>;
    fn param(&self, name: &str) -> Option<u64>;
}

/// Rate model supporting only constant rates and literal parameters.
#[derive(Debug, Clone, Default)]
pub struct ConstRates {
    pub params: BTreeMap<String, u64>,
}

impl RateModel for ConstRates {
    fn rate(&self, f: &RateFn, _info: &EnvInfo, _content: &Term) -> Result<f64, String> {
        match f {
            RateFn::Const(k) => Ok(*k),
            other => Err(format!("{other} needs a model with stage tables")),
        }
    }

    fn param(&self, name: &str) -> Option<u64> {
        self.params.get(name).copied()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ecosystem {
    pub initial: Term,
    pub rules: Vec<RewriteRule>,
    pub events: EventList,
}

impl Ecosystem {
    pub fn new(initial: Term, rules: Vec<RewriteRule>, events: EventList) -> Result<Self, RuleError> {
        for (i, r) in rules.iter().enumerate() {
            if rules[..i].iter().any(|x| x.id == r.id) {
                return Err(RuleError::DuplicateRule(r.id.clone()));
            }
        }
        Ok(Ecosystem { initial, rules, events })
    }
}

/// Propensity of `rule` for matches attributed to `site`.
pub fn propensity(
    rule: &RewriteRule,
    term: &Term,
    site: &CompartmentAddress,
    model: &dyn RateModel,
) -> Result<f64, RuleError> {
    if !rule.may_apply_at(term, site) {
        return Ok(0.0);
    }
    let mut h: u64 = 0;
    for c in count_at(&rule.left, term, site, rule.target.as_deref())? {
        if rule.guard_passes(&c.nats, model)? {
            h = h.saturating_add(c.weight);
        }
    }
    rated(rule, term, site, model, h)
}

fn rated(
    rule: &RewriteRule,
    term: &Term,
    site: &CompartmentAddress,
    model: &dyn RateModel,
    h: u64,
) -> Result<f64, RuleError> {
    if h == 0 {
        return Ok(0.0);
    }
    let (info, content) = resolve(term, site)?;
    let k = model.rate(&rule.rate, info, content).map_err(|message| RuleError::Rate {
        rule: rule.id.clone(),
        rate: rule.rate.to_string(),
        message,
    })?;
    if !(k >= 0.0 && k.is_finite()) {
        return Err(RuleError::Rate {
            rule: rule.id.clone(),
            rate: rule.rate.to_string(),
            message: format!("evaluated to {k}"),
        });
    }
    Ok(h as f64 * k)
}

const MEMO_LIMIT: usize = 1 << 14;

/// Same value as [`propensity`], summing cached per-child weights when the
/// rule has the split shape.
fn propensity_cached(
    rule: &RewriteRule,
    term: &Term,
    site: &CompartmentAddress,
    model: &dyn RateModel,
    memo: &mut HashMap<Loop, u64>,
) -> Result<f64, RuleError> {
    let Some(split) = &rule.split else {
        return propensity(rule, term, site, model);
    };
    let Some((NonParallel::Loop(l), _)) = term.group_at(&site.0) else {
        return Ok(0.0);
    };
    if Some(&l.wall) != rule.wall.as_ref() || !info_matches(&split.info, &l.info) {
        return Ok(0.0);
    }
    let is_target = |c: &Loop| {
        split.target.as_ref().is_some_and(|tp| {
            c.wall == tp.wall
                && if tp.content.items.is_empty() && tp.content.rest.is_some() {
                    info_matches(&tp.info, &c.info)
                } else {
                    !count_loop(tp, c).is_empty()
                }
        })
    };
    let targets: u64 = if split.target.is_some() {
        l.content
            .items()
            .iter()
            .filter_map(|(np, m)| np.as_loop().filter(|c| is_target(c)).map(|_| *m))
            .sum()
    } else {
        0
    };
    if split.target.is_some() && targets == 0 {
        return Ok(0.0);
    }
    if memo.len() > MEMO_LIMIT {
        memo.clear();
    }
    let mut h: u128 = 0;
    for (np, m) in l.content.items() {
        let Some(c) = np.as_loop() else { continue };
        if c.wall != split.item.wall {
            continue;
        }
        let w = match memo.get(c) {
            Some(w) => *w,
            None => {
                let mut w: u64 = 0;
                for k in count_loop(&split.item, c) {
                    if rule.guard_passes(&k.nats, model)? {
                        w = w.saturating_add(k.weight);
                    }
                }
                memo.insert(c.clone(), w);
                w
            }
        };
        if w == 0 || (split.target.is_some() && is_target(c) && targets < 2) {
            continue;
        }
        h += *m as u128 * w as u128;
    }
    let copies = term.copies(&site.0).unwrap_or(1) as u128;
    let h = u64::try_from(h.saturating_mul(copies)).unwrap_or(u64::MAX);
    rated(rule, term, site, model, h)
}

/// Compartments changed between two states.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Changes {
    /// Subtrees whose addresses or loops changed: every entry at or below
    /// them is recomputed.
    pub subtrees: Vec<CompartmentAddress>,
    /// Compartments whose content changed below an unchanged loop.
    pub nodes: Vec<CompartmentAddress>,
}

impl Changes {
    pub fn is_empty(&self) -> bool {
        self.subtrees.is_empty() && self.nodes.is_empty()
    }

    /// Structural difference of two states.
    pub fn between(old: &Term, new: &Term) -> Changes {
        let mut c = Changes::default();
        if old != new {
            c.nodes.push(CompartmentAddress::root());
            diff(old, new, &mut Vec::new(), &mut c);
        }
        c
    }

    /// Every compartment of `term`, for changes that touch the whole state.
    pub fn everything() -> Changes {
        Changes {
            subtrees: Vec::new(),
            nodes: Vec::new(),
        }
        .with_root_subtree()
    }

    fn with_root_subtree(mut self) -> Self {
        self.subtrees.push(CompartmentAddress::root());
        self
    }
}

fn diff(old: &Term, new: &Term, prefix: &mut Vec<u32>, out: &mut Changes) {
    let (a, b) = (old.items(), new.items());
    let common = a.len().min(b.len());
    let mut first_shift = common;
    if a.len() != b.len() {
        first_shift = a.iter().zip(b).position(|(x, y)| x != y).unwrap_or(common);
    }
    for i in 0..first_shift {
        let ((npa, ma), (npb, mb)) = (&a[i], &b[i]);
        if npa == npb && ma == mb {
            continue;
        }
        prefix.push(i as u32);
        match (npa, npb) {
            (NonParallel::Loop(la), NonParallel::Loop(lb)) if ma == mb && la.wall == lb.wall && la.info == lb.info => {
                out.nodes.push(CompartmentAddress(prefix.clone()));
                diff(&la.content, &lb.content, prefix, out);
            }
            _ => out.subtrees.push(CompartmentAddress(prefix.clone())),
        }
        prefix.pop();
    }
    for i in first_shift..a.len().max(b.len()) {
        let is_loop = |items: &[(NonParallel, u64)]| items.get(i).is_some_and(|(np, _)| np.as_loop().is_some());
        if is_loop(a) || is_loop(b) {
            prefix.push(i as u32);
            out.subtrees.push(CompartmentAddress(prefix.clone()));
            prefix.pop();
        }
    }
}

/// Sites at or below `addr` in `term`, in pre-order.
fn sites_under(term: &Term, addr: &CompartmentAddress) -> Vec<CompartmentAddress> {
    if addr.is_root() {
        return term.sites();
    }
    match term.group_at(&addr.0) {
        Some((NonParallel::Loop(l), _)) => {
            let mut out = vec![addr.clone()];
            l.content.collect_sites(&mut addr.0.clone(), &mut out);
            out
        }
        _ => Vec::new(),
    }
}

/// Per-rule, per-compartment propensities with their sums.
#[derive(Debug, Clone)]
pub struct PropensityTable {
    entries: Vec<BTreeMap<CompartmentAddress, f64>>,
    rule_totals: Vec<f64>,
    total: f64,
    memo: Vec<HashMap<Loop, u64>>,
}

impl PartialEq for PropensityTable {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries && self.rule_totals == other.rule_totals && self.total == other.total
    }
}

impl PropensityTable {
    pub fn rebuild(term: &Term, rules: &[RewriteRule], model: &dyn RateModel) -> Result<Self, RuleError> {
        let sites = term.sites();
        let mut entries = Vec::with_capacity(rules.len());
        let mut memo = vec![HashMap::default(); rules.len()];
        for (j, rule) in rules.iter().enumerate() {
            let mut m = BTreeMap::new();
            for s in &sites {
                let a = propensity_cached(rule, term, s, model, &mut memo[j])?;
                if a > 0.0 {
                    m.insert(s.clone(), a);
                }
            }
            entries.push(m);
        }
        let mut t = PropensityTable {
            entries,
            rule_totals: vec![0.0; rules.len()],
            total: 0.0,
            memo,
        };
        t.resum_all();
        Ok(t)
    }

    fn resum_rule(&mut self, j: usize) {
        self.rule_totals[j] = self.entries[j].values().sum();
    }

    fn resum_all(&mut self) {
        for j in 0..self.entries.len() {
            self.resum_rule(j);
        }
        self.total = self.rule_totals.iter().sum();
    }

    /// Recomputes the entries touched by `changes` on the new state `term`.
    pub fn update(
        &mut self,
        term: &Term,
        changes: &Changes,
        rules: &[RewriteRule],
        model: &dyn RateModel,
    ) -> Result<(), RuleError> {
        if changes.is_empty() {
            return Ok(());
        }
        let mut fresh: Vec<CompartmentAddress> = Vec::new();
        for s in &changes.subtrees {
            fresh.extend(sites_under(term, s));
        }
        for n in &changes.nodes {
            if n.is_root() || term.group_at(&n.0).is_some() {
                fresh.push(n.clone());
            }
        }
        for (j, rule) in rules.iter().enumerate() {
            let map = &mut self.entries[j];
            for s in &changes.subtrees {
                if s.is_root() {
                    map.clear();
                    continue;
                }
                let doomed: Vec<CompartmentAddress> = map
                    .range((RangeBound::Included(s), RangeBound::Unbounded))
                    .map(|(k, _)| k)
                    .take_while(|k| k.starts_with(s))
                    .cloned()
                    .collect();
                for k in doomed {
                    map.remove(&k);
                }
            }
            for s in &fresh {
                let a = propensity_cached(rule, term, s, model, &mut self.memo[j])?;
                if a > 0.0 {
                    map.insert(s.clone(), a);
                } else {
                    map.remove(s);
                }
            }
            self.resum_rule(j);
        }
        self.total = self.rule_totals.iter().sum();
        Ok(())
    }

    /// Compares against a full recomputation.
    pub fn verify(&self, term: &Term, rules: &[RewriteRule], model: &dyn RateModel) -> Result<(), RuleError> {
        let fresh = PropensityTable::rebuild(term, rules, model)?;
        if fresh == *self {
            return Ok(());
        }
        for (j, rule) in rules.iter().enumerate() {
            let (a, b) = (&self.entries[j], &fresh.entries[j]);
            let site = a
                .iter()
                .find(|(k, v)| b.get(*k) != Some(*v))
                .or_else(|| b.iter().find(|(k, v)| a.get(*k) != Some(*v)))
                .map(|(k, _)| k.clone());
            if let Some(site) = site {
                return Err(RuleError::StaleTable {
                    rule: rule.id.clone(),
                    site,
                });
            }
        }
        Err(RuleError::StaleTable {
            rule: String::new(),
            site: CompartmentAddress::root(),
        })
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn rule_total(&self, j: usize) -> f64 {
        self.rule_totals[j]
    }

    pub fn get(&self, j: usize, site: &CompartmentAddress) -> f64 {
        self.entries[j].get(site).copied().unwrap_or(0.0)
    }

    /// Nonzero entries of rule `j` in address order.
    pub fn entries(&self, j: usize) -> impl Iterator<Item = (&CompartmentAddress, f64)> {
        self.entries[j].iter().map(|(k, v)| (k, *v))
    }

    pub fn num_rules(&self) -> usize {
        self.entries.len()
    }

    /// The (rule, compartment) pair bracketing `target` in the cumulative sum
    /// over rules, then compartments. `target` lies in `(0, total]`.
    pub fn locate(&self, target: f64) -> Option<(usize, CompartmentAddress)> {
        let mut acc = 0.0;
        let mut last = None;
        for (j, map) in self.entries.iter().enumerate() {
            if self.rule_totals[j] <= 0.0 {
                continue;
            }
            if acc + self.rule_totals[j] < target {
                acc += self.rule_totals[j];
                last = map.keys().next_back().map(|k| (j, k.clone()));
                continue;
            }
            let mut inner = acc;
            for (site, a) in map {
                inner += a;
                if inner >= target {
                    return Some((j, site.clone()));
                }
            }
            last = map.keys().next_back().map(|k| (j, k.clone()));
            acc += self.rule_totals[j];
        }
        last
    }
}

/// Guard-passing full matches of `rule` attributed to `site`.
pub fn applicable_matches(
    rule: &RewriteRule,
    term: &Term,
    site: &CompartmentAddress,
    model: &dyn RateModel,
) -> Result<Vec<Match>, RuleError> {
    let mut out = Vec::new();
    for m in match_at(&rule.left, term, site)? {
        if rule.guard_passes(&m.binding.nats, model)? {
            out.push(m);
        }
    }
    Ok(out)
}

fn pick_weighted<R: Rng + ?Sized>(cands: Vec<Match>, rng: &mut R) -> Option<Match> {
    let total: u128 = cands.iter().map(|m| m.weight as u128).sum();
    if total == 0 {
        return None;
    }
    let mut r = rng.gen_range(0..total);
    for m in cands {
        if r < m.weight as u128 {
            return Some(m);
        }
        r -= m.weight as u128;
    }
    None
}

/// Applies the rule's selection strategy to its candidate matches.
pub fn choose_match<R: Rng + ?Sized>(rule: &RewriteRule, mut cands: Vec<Match>, rng: &mut R) -> Option<Match> {
    if let Some(y) = &rule.target {
        let mut dests: Vec<&EnvInfo> = cands.iter().filter_map(|m| m.binding.infos.get(y)).collect();
        dests.sort();
        dests.dedup();
        if !dests.is_empty() {
            let chosen = dests[rng.gen_range(0..dests.len())].clone();
            cands.retain(|m| m.binding.infos.get(y) == Some(&chosen));
        }
    }
    restrict_extreme(&rule.selection, &mut cands, |m, q| m.binding.nat(q));
    pick_weighted(cands, rng)
}

fn restrict_extreme<T>(sel: &Selection, cands: &mut Vec<T>, nat: impl Fn(&T, &str) -> Option<u64>) {
    let extreme = match sel {
        Selection::Weighted => None,
        Selection::MinNat(q) => cands.iter().filter_map(|c| nat(c, q)).min().map(|v| (q, v)),
        Selection::MaxNat(q) => cands.iter().filter_map(|c| nat(c, q)).max().map(|v| (q, v)),
    };
    if let Some((q, v)) = extreme {
        cands.retain(|c| nat(c, q) == Some(v));
    }
}

/// Same distribution as `choose_match` over all matches at `site`, but only
/// builds full matches for the groups that can still be chosen.
fn fire_split<R: Rng + ?Sized>(
    rule: &RewriteRule,
    split: &Split,
    term: &Term,
    site: &CompartmentAddress,
    model: &dyn RateModel,
    rng: &mut R,
) -> Result<Option<Match>, RuleError> {
    let Some((NonParallel::Loop(l), _)) = term.group_at(&site.0) else {
        return Ok(None);
    };
    let items = l.content.items();
    let mut tuples: Vec<(usize, Counted)> = Vec::new();
    for (g, (np, _)) in items.iter().enumerate() {
        let Some(c) = np.as_loop() else { continue };
        if c.wall != split.item.wall {
            continue;
        }
        for k in count_loop(&split.item, c) {
            if rule.guard_passes(&k.nats, model)? {
                tuples.push((g, k));
            }
        }
    }
    if tuples.is_empty() {
        return Ok(None);
    }
    let mut allowed = vec![false; items.len()];
    let mut chosen_dest = None;
    if let (Some(tp), Some(y)) = (&split.target, &rule.target) {
        let dest_info = |info: &EnvInfo| {
            EnvInfo(
                info.0
                    .iter()
                    .filter(|(k, _)| !tp.info.literal.0.contains_key(*k))
                    .map(|(k, v)| (k.clone(), v.clone()))
                    .collect(),
            )
        };
        let mut dests: Vec<(EnvInfo, usize)> = Vec::new();
        for (t, (np, m)) in items.iter().enumerate() {
            let Some(c) = np.as_loop() else { continue };
            if c.wall != tp.wall || count_loop(tp, c).is_empty() {
                continue;
            }
            if tuples.iter().any(|(g, _)| *g != t || *m >= 2) {
                dests.push((dest_info(&c.info), t));
            }
        }
        let mut infos: Vec<&EnvInfo> = dests.iter().map(|(i, _)| i).collect();
        infos.sort();
        infos.dedup();
        if infos.is_empty() {
            return Ok(None);
        }
        let pick = infos[rng.gen_range(0..infos.len())].clone();
        for (info, t) in &dests {
            if *info == pick {
                allowed[*t] = true;
            }
        }
        for (g, _) in &tuples {
            allowed[*g] = true;
        }
        chosen_dest = Some((y, pick));
    } else {
        restrict_extreme(&rule.selection, &mut tuples, |(_, k), q| k.nats.get(q).copied());
        let total: u128 = tuples.iter().map(|(g, k)| items[*g].1 as u128 * k.weight as u128).sum();
        if total == 0 {
            return Ok(None);
        }
        let mut r = rng.gen_range(0..total);
        for (g, k) in &tuples {
            let w = items[*g].1 as u128 * k.weight as u128;
            if r < w {
                allowed[*g] = true;
                break;
            }
            r -= w;
        }
    }
    let mut cands = Vec::new();
    for m in match_at_within(&rule.left, term, site, &allowed)? {
        if rule.guard_passes(&m.binding.nats, model)? {
            cands.push(m);
        }
    }
    if let Some((y, pick)) = chosen_dest {
        cands.retain(|m| m.binding.infos.get(y) == Some(&pick));
    }
    restrict_extreme(&rule.selection, &mut cands, |m, q| m.binding.nat(q));
    Ok(pick_weighted(cands, rng))
}

/// Replaces the consumed part of `m` by the instantiated right-hand side.
pub fn execute(rule: &RewriteRule, m: &Match, term: &Term) -> Result<Term, RuleError> {
    let produced = substitute(&rule.right, &m.binding)?;
    let mut stale = false;
    let out = term.map_at(&m.locus.0, true, |_, content| {
        match content.subtract(&m.consumed) {
            Some(rest) => *content = rest.parallel(&produced),
            None => stale = true,
        }
        Ok(())
    })?;
    if stale {
        return Err(RuleError::StaleMatch);
    }
    Ok(out)
}

/// Chooses a match of `rule` at `site` and fires it.
pub fn fire<R: Rng + ?Sized>(
    rule: &RewriteRule,
    term: &Term,
    site: &CompartmentAddress,
    model: &dyn RateModel,
    rng: &mut R,
) -> Result<(Term, Match), RuleError> {
    let chosen = match &rule.split {
        Some(split) => fire_split(rule, split, term, site, model, rng)?,
        None => {
            let cands = applicable_matches(rule, term, site, model)?;
            choose_match(rule, cands, rng)
        }
    };
    let m = chosen.ok_or_else(|| RuleError::NoMatch {
        rule: rule.id.clone(),
        site: site.clone(),
    })?;
    let next = execute(rule, &m, term)?;
    Ok((next, m))
}
