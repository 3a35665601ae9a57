//! Patterns over terms, matching, and substitution.
//!
//! Matching is associative-commutative at every parallel level. A pattern
//! level lists component patterns (each with an exponent) plus an optional
//! term variable that binds the unconsumed residue. A natural-number variable
//! used as an exponent absorbs the full multiplicity of its component, so
//! `Blood^#q` against `Blood^2` binds `q = 2` and never a smaller split.
//!
//! Every match carries a combinatorial weight: the number of distinct
//! concrete reactant combinations it stands for once multiplicities are
//! unrolled. Choosing `k` copies out of a group of `m` identical components
//! contributes `C(m, k)`, and compartments nested inside groups of identical
//! loops multiply by the number of copies along the path.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::term::{canonicalize, resolve, CompartmentAddress, EnvInfo, Loop, NonParallel, Sequence, Term};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PatternError {
    #[error("variable {0} is not bound")]
    UnboundVariable(String),
    #[error("information variable {0} clashes with literal bindings")]
    InfoClash(String),
    #[error("exponent function {name}({arg}) is undefined")]
    BadExponent { name: String, arg: u64 },
    #[error("compartment {0} does not exist")]
    InvalidSite(CompartmentAddress),
}

/// Function usable as an exponent on the right-hand side of a rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExponentFn {
    /// Eggs laid at a gonotrophic cycle.
    Eggs,
}

impl ExponentFn {
    pub fn name(self) -> &'static str {
        match self {
            ExponentFn::Eggs => "eggs",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "eggs" => Some(ExponentFn::Eggs),
            _ => None,
        }
    }

    pub fn eval(self, arg: u64) -> Result<u64, PatternError> {
        match self {
            ExponentFn::Eggs => u8::try_from(arg)
                .ok()
                .and_then(|j| crate::aedes::eggs(j).ok())
                .map(u64::from)
                .ok_or(PatternError::BadExponent {
                    name: self.name().into(),
                    arg,
                }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Exponent {
    Lit(u64),
    Var(String),
    /// `#q + k`, right-hand sides only.
    VarPlus(String, u64),
    /// A registry function applied to a constant, right-hand sides only.
    Call(ExponentFn, u64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InfoPattern {
    pub literal: EnvInfo,
    pub rest: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoopPattern {
    pub wall: Term,
    pub info: InfoPattern,
    pub content: Pattern,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PatternAtom {
    Seq(Sequence),
    Loop(Box<LoopPattern>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternItem {
    pub atom: PatternAtom,
    pub exp: Exponent,
}

/// One parallel level: component patterns plus an optional residue variable.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Pattern {
    pub items: Vec<PatternItem>,
    pub rest: Option<String>,
}

/// Variables of a pattern, split by sort.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VarSet {
    pub terms: Vec<String>,
    pub infos: Vec<String>,
    pub nats: Vec<String>,
}

impl VarSet {
    pub fn contains(&self, other: &VarSet) -> Option<String> {
        let missing = |mine: &[String], theirs: &[String]| theirs.iter().find(|v| !mine.contains(v)).cloned();
        missing(&self.terms, &other.terms)
            .map(|v| format!("${v}"))
            .or_else(|| missing(&self.infos, &other.infos).map(|v| format!("@{v}")))
            .or_else(|| missing(&self.nats, &other.nats).map(|v| format!("#{v}")))
    }
}

impl Pattern {
    pub fn ground(t: &Term) -> Pattern {
        Pattern {
            items: t
                .items()
                .iter()
                .map(|(np, m)| PatternItem {
                    atom: match np {
                        NonParallel::Seq(s) => PatternAtom::Seq(s.clone()),
                        NonParallel::Loop(l) => PatternAtom::Loop(Box::new(LoopPattern {
                            wall: l.wall.clone(),
                            info: InfoPattern {
                                literal: l.info.clone(),
                                rest: None,
                            },
                            content: Pattern::ground(&l.content),
                        })),
                    },
                    exp: Exponent::Lit(*m),
                })
                .collect(),
            rest: None,
        }
    }

    pub fn var(name: &str) -> Pattern {
        Pattern {
            items: Vec::new(),
            rest: Some(name.to_string()),
        }
    }

    /// The single loop pattern this pattern consists of, if any. Matches of
    /// such a pattern are located at the loop they consume.
    pub fn anchor(&self) -> Option<&LoopPattern> {
        match (self.items.as_slice(), &self.rest) {
            ([PatternItem {
                atom: PatternAtom::Loop(lp),
                exp: Exponent::Lit(1),
            }], None) => Some(lp),
            _ => None,
        }
    }

    /// All variables, in order of first occurrence. Repeated occurrences of
    /// term and information variables are reported through `repeated`.
    pub fn vars(&self) -> VarSet {
        let mut vs = VarSet::default();
        let mut repeated = Vec::new();
        self.collect_vars(&mut vs, &mut repeated);
        vs
    }

    /// Term or information variables occurring more than once.
    pub fn repeated_vars(&self) -> Vec<String> {
        let mut vs = VarSet::default();
        let mut repeated = Vec::new();
        self.collect_vars(&mut vs, &mut repeated);
        repeated
    }

    fn collect_vars(&self, vs: &mut VarSet, repeated: &mut Vec<String>) {
        fn add(list: &mut Vec<String>, v: &str, repeated: Option<&mut Vec<String>>, sigil: char) {
            if list.iter().any(|x| x == v) {
                if let Some(r) = repeated {
                    r.push(format!("{sigil}{v}"));
                }
            } else {
                list.push(v.to_string());
            }
        }
        for item in &self.items {
            match &item.exp {
                Exponent::Var(q) | Exponent::VarPlus(q, _) => add(&mut vs.nats, q, None, '#'),
                _ => {}
            }
            if let PatternAtom::Loop(lp) = &item.atom {
                if let Some(x) = &lp.info.rest {
                    add(&mut vs.infos, x, Some(repeated), '@');
                }
                lp.content.collect_vars(vs, repeated);
            }
        }
        if let Some(x) = &self.rest {
            add(&mut vs.terms, x, Some(repeated), '$');
        }
    }

    /// True when every exponent is a literal or a plain variable.
    pub fn is_left_form(&self) -> bool {
        self.items.iter().all(|it| {
            matches!(it.exp, Exponent::Lit(_) | Exponent::Var(_))
                && match &it.atom {
                    PatternAtom::Loop(lp) => lp.content.is_left_form(),
                    PatternAtom::Seq(_) => true,
                }
        })
    }

    /// Finds the loop pattern whose information rest variable is `info_var`.
    pub fn find_by_info_var(&self, info_var: &str) -> Option<&LoopPattern> {
        self.items.iter().find_map(|it| match &it.atom {
            PatternAtom::Loop(lp) => {
                if lp.info.rest.as_deref() == Some(info_var) {
                    Some(lp.as_ref())
                } else {
                    lp.content.find_by_info_var(info_var)
                }
            }
            PatternAtom::Seq(_) => None,
        })
    }
}

/// A binding of variables to terms, informations and naturals.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct Instantiation {
    pub terms: BTreeMap<String, Term>,
    pub infos: BTreeMap<String, EnvInfo>,
    pub nats: BTreeMap<String, u64>,
}

impl Instantiation {
    pub fn nat(&self, name: &str) -> Option<u64> {
        self.nats.get(name).copied()
    }
}

/// One way a pattern occurs in a term.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Match {
    pub binding: Instantiation,
    /// Compartment whose content holds the consumed components.
    pub locus: CompartmentAddress,
    /// Compartment the match is attributed to: the consumed loop for
    /// single-loop patterns, otherwise the locus.
    pub site: CompartmentAddress,
    /// Ground instance of the pattern, removed from the locus on rewrite.
    pub consumed: Term,
    pub weight: u64,
}

/// Reduced match used for propensity computation: only natural-number
/// bindings are kept.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Counted {
    pub nats: BTreeMap<String, u64>,
    pub weight: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    Full,
    Count,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Sig(Vec<(u32, u64, Sig)>);

struct Partial {
    binding: Instantiation,
    sig: Sig,
    weight: u128,
}

struct Matcher<'a> {
    mode: Mode,
    /// Information variable naming a target component that is required to
    /// exist but is neither consumed nor counted.
    exclude: Option<&'a str>,
    /// Groups of the outermost level that loop items may use.
    allowed: Option<&'a [bool]>,
}

fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

impl<'a> Matcher<'a> {
    fn is_excluded(&self, item: &PatternItem) -> bool {
        match (&item.atom, self.exclude) {
            (PatternAtom::Loop(lp), Some(x)) => lp.info.rest.as_deref() == Some(x),
            _ => false,
        }
    }

    fn match_info(&self, ip: &InfoPattern, info: &EnvInfo, binding: &mut Instantiation) -> bool {
        for (k, v) in &ip.literal.0 {
            if info.0.get(k) != Some(v) {
                return false;
            }
        }
        match &ip.rest {
            None => info.0.len() == ip.literal.0.len(),
            Some(x) => {
                if self.mode == Mode::Count {
                    return true;
                }
                let rest = EnvInfo(
                    info.0
                        .iter()
                        .filter(|(k, _)| !ip.literal.0.contains_key(*k))
                        .map(|(k, v)| (k.clone(), v.clone()))
                        .collect(),
                );
                match binding.infos.get(x) {
                    Some(bound) => *bound == rest,
                    None => {
                        binding.infos.insert(x.clone(), rest);
                        true
                    }
                }
            }
        }
    }

    fn match_loop(&self, lp: &LoopPattern, l: &Loop, binding: &Instantiation) -> Vec<Partial> {
        if lp.wall != l.wall {
            return Vec::new();
        }
        let mut b = binding.clone();
        if !self.match_info(&lp.info, &l.info, &mut b) {
            return Vec::new();
        }
        self.match_level(&lp.content, &l.content, false, &b)
    }

    fn match_level(&self, p: &Pattern, t: &Term, context: bool, binding: &Instantiation) -> Vec<Partial> {
        let mut out = Vec::new();
        let mut used = vec![0u64; t.items().len()];
        let mut sig = Vec::new();
        self.search(p, t, context, 0, binding.clone(), &mut used, &mut sig, 1, &mut out);
        out.sort_by(|a, b| a.sig.cmp(&b.sig));
        out.dedup_by(|a, b| a.sig == b.sig);
        out
    }

    #[allow(clippy::too_many_arguments)]
    fn search(
        &self,
        p: &Pattern,
        t: &Term,
        context: bool,
        k: usize,
        binding: Instantiation,
        used: &mut Vec<u64>,
        sig: &mut Vec<(u32, u64, Sig)>,
        inner_weight: u128,
        out: &mut Vec<Partial>,
    ) {
        let Some(item) = p.items.get(k) else {
            self.finish(p, t, context, binding, used, sig, inner_weight, out);
            return;
        };
        if self.is_excluded(item) {
            self.search(p, t, context, k + 1, binding, used, sig, inner_weight, out);
            return;
        }
        let items = t.items();
        match (&item.atom, &item.exp) {
            (_, Exponent::Lit(0)) => self.search(p, t, context, k + 1, binding, used, sig, inner_weight, out),
            (PatternAtom::Seq(s), Exponent::Lit(n)) => {
                let np = NonParallel::Seq(s.clone());
                if let Ok(g) = items.binary_search_by(|(x, _)| x.cmp(&np)) {
                    if items[g].1 - used[g] >= *n {
                        used[g] += n;
                        sig.push((g as u32, *n, Sig(Vec::new())));
                        self.search(p, t, context, k + 1, binding, used, sig, inner_weight, out);
                        sig.pop();
                        used[g] -= n;
                    }
                }
            }
            (PatternAtom::Seq(s), Exponent::Var(q)) => {
                let np = NonParallel::Seq(s.clone());
                let g = items.binary_search_by(|(x, _)| x.cmp(&np)).ok();
                let avail = g.map(|g| items[g].1 - used[g]).unwrap_or(0);
                let mut b = binding;
                match b.nats.get(q) {
                    Some(v) if *v != avail => return,
                    Some(_) => {}
                    None => {
                        b.nats.insert(q.clone(), avail);
                    }
                }
                match g {
                    Some(g) if avail > 0 => {
                        used[g] += avail;
                        sig.push((g as u32, avail, Sig(Vec::new())));
                        self.search(p, t, context, k + 1, b, used, sig, inner_weight, out);
                        sig.pop();
                        used[g] -= avail;
                    }
                    _ => self.search(p, t, context, k + 1, b, used, sig, inner_weight, out),
                }
            }
            (PatternAtom::Loop(lp), exp @ (Exponent::Lit(_) | Exponent::Var(_))) => {
                let inner_matcher = Matcher {
                    mode: self.mode,
                    exclude: self.exclude,
                    allowed: None,
                };
                for (g, (np, m)) in items.iter().enumerate() {
                    let NonParallel::Loop(l) = np else { continue };
                    if self.allowed.is_some_and(|a| !a.get(g).copied().unwrap_or(false)) {
                        continue;
                    }
                    let avail = m - used[g];
                    let take = match exp {
                        Exponent::Lit(n) => *n,
                        _ => avail,
                    };
                    if avail == 0 || take > avail {
                        continue;
                    }
                    for inner in inner_matcher.match_loop(lp, l, &binding) {
                        let mut b = inner.binding;
                        if let Exponent::Var(q) = exp {
                            match b.nats.get(q) {
                                Some(v) if *v != take => continue,
                                Some(_) => {}
                                None => {
                                    b.nats.insert(q.clone(), take);
                                }
                            }
                        }
                        let w = (0..take).fold(inner_weight, |acc, _| acc.saturating_mul(inner.weight));
                        used[g] += take;
                        sig.push((g as u32, take, inner.sig));
                        self.search(p, t, context, k + 1, b, used, sig, w, out);
                        sig.pop();
                        used[g] -= take;
                    }
                }
            }
            // Right-hand-side exponents never match.
            _ => {}
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        &self,
        p: &Pattern,
        t: &Term,
        context: bool,
        mut binding: Instantiation,
        used: &[u64],
        sig: &[(u32, u64, Sig)],
        inner_weight: u128,
        out: &mut Vec<Partial>,
    ) {
        let items = t.items();
        let residue_empty = items.iter().zip(used).all(|((_, m), u)| m == u);
        if p.rest.is_none() && !context && !residue_empty {
            return;
        }
        let residue = if p.rest.is_some() && self.mode == Mode::Full {
            canonicalize(
                items
                    .iter()
                    .zip(used)
                    .filter(|((_, m), u)| m > *u)
                    .map(|((np, m), u)| (np.clone(), m - u)),
            )
        } else {
            Term::empty()
        };
        for it in p.items.iter().filter(|it| self.is_excluded(it)) {
            let PatternAtom::Loop(lp) = &it.atom else { continue };
            let probe = Matcher {
                mode: Mode::Count,
                exclude: None,
                allowed: None,
            };
            let found = items.iter().zip(used).any(|((np, m), u)| {
                m > u
                    && np
                        .as_loop()
                        .map(|l| !probe.match_loop(lp, l, &binding).is_empty())
                        .unwrap_or(false)
            });
            if !found {
                return;
            }
        }
        if let (Some(x), Mode::Full) = (&p.rest, self.mode) {
            match binding.terms.get(x) {
                Some(bound) if *bound != residue => return,
                Some(_) => {}
                None => {
                    binding.terms.insert(x.clone(), residue);
                }
            }
        }
        let mut weight = inner_weight;
        for (g, u) in used.iter().enumerate() {
            if *u > 0 {
                weight = weight.saturating_mul(binomial(items[g].1, *u));
            }
        }
        let mut s = sig.to_vec();
        s.sort();
        out.push(Partial {
            binding,
            sig: Sig(s),
            weight,
        });
    }
}

fn clamp_weight(w: u128) -> u64 {
    u64::try_from(w).unwrap_or(u64::MAX)
}

fn site_partials(
    m: &Matcher<'_>,
    p: &Pattern,
    t: &Term,
    site: &CompartmentAddress,
) -> Result<Vec<(Partial, CompartmentAddress)>, PatternError> {
    let copies = t
        .copies(&site.0)
        .or(if site.is_root() { Some(1) } else { None })
        .ok_or_else(|| PatternError::InvalidSite(site.clone()))?;
    let copies = copies as u128;
    if let Some(lp) = p.anchor() {
        if site.is_root() {
            return Ok(Vec::new());
        }
        let Some((NonParallel::Loop(l), _)) = t.group_at(&site.0) else {
            return Err(PatternError::InvalidSite(site.clone()));
        };
        let locus = CompartmentAddress(site.0[..site.0.len() - 1].to_vec());
        Ok(m
            .match_loop(lp, l, &Instantiation::default())
            .into_iter()
            .map(|mut part| {
                part.weight = part.weight.saturating_mul(copies);
                (part, locus.clone())
            })
            .collect())
    } else {
        let (_, content) = resolve(t, site).map_err(|_| PatternError::InvalidSite(site.clone()))?;
        Ok(m
            .match_level(p, content, true, &Instantiation::default())
            .into_iter()
            .map(|mut part| {
                part.weight = part.weight.saturating_mul(copies);
                (part, site.clone())
            })
            .collect())
    }
}

/// Full matches of `p` attributed to one compartment.
pub fn match_at(p: &Pattern, t: &Term, site: &CompartmentAddress) -> Result<Vec<Match>, PatternError> {
    let m = Matcher {
        mode: Mode::Full,
        exclude: None,
        allowed: None,
    };
    site_partials(&m, p, t, site)?
        .into_iter()
        .map(|(part, locus)| {
            let consumed = substitute(p, &part.binding)?;
            Ok(Match {
                binding: part.binding,
                locus,
                site: site.clone(),
                consumed,
                weight: clamp_weight(part.weight),
            })
        })
        .collect()
}

/// Full matches of an anchored pattern at `site` whose loop items use only
/// the groups of the site's content flagged in `allowed`.
pub fn match_at_within(
    p: &Pattern,
    t: &Term,
    site: &CompartmentAddress,
    allowed: &[bool],
) -> Result<Vec<Match>, PatternError> {
    let m = Matcher {
        mode: Mode::Full,
        exclude: None,
        allowed: Some(allowed),
    };
    site_partials(&m, p, t, site)?
        .into_iter()
        .map(|(part, locus)| {
            let consumed = substitute(p, &part.binding)?;
            Ok(Match {
                binding: part.binding,
                locus,
                site: site.clone(),
                consumed,
                weight: clamp_weight(part.weight),
            })
        })
        .collect()
}

/// Reduced matches at one compartment. The loop pattern whose information
/// variable is `target` must be present but is not consumed or counted.
pub fn count_at(
    p: &Pattern,
    t: &Term,
    site: &CompartmentAddress,
    target: Option<&str>,
) -> Result<Vec<Counted>, PatternError> {
    let m = Matcher {
        mode: Mode::Count,
        exclude: target,
        allowed: None,
    };
    Ok(site_partials(&m, p, t, site)?
        .into_iter()
        .map(|(part, _)| Counted {
            nats: part.binding.nats,
            weight: clamp_weight(part.weight),
        })
        .collect())
}

/// Reduced matches of a single loop pattern against one loop.
pub fn count_loop(lp: &LoopPattern, l: &Loop) -> Vec<Counted> {
    let m = Matcher {
        mode: Mode::Count,
        exclude: None,
        allowed: None,
    };
    m.match_loop(lp, l, &Instantiation::default())
        .into_iter()
        .map(|part| Counted {
            nats: part.binding.nats,
            weight: clamp_weight(part.weight),
        })
        .collect()
}

/// Whether the literal part of `ip` holds in `info` (a rest variable
/// accepts anything else).
pub fn info_matches(ip: &InfoPattern, info: &EnvInfo) -> bool {
    let m = Matcher {
        mode: Mode::Count,
        exclude: None,
        allowed: None,
    };
    m.match_info(ip, info, &mut Instantiation::default())
}

/// Every distinct match of `p` in `t`, over all compartments in pre-order.
pub fn match_all(p: &Pattern, t: &Term) -> Vec<Match> {
    t.sites()
        .iter()
        .flat_map(|site| match_at(p, t, site).unwrap_or_default())
        .collect()
}

/// Number of reactant combinations of `matches` attributed to `site`.
pub fn weight(matches: &[Match], site: &CompartmentAddress) -> u64 {
    matches
        .iter()
        .filter(|m| &m.site == site)
        .map(|m| m.weight)
        .fold(0u64, u64::saturating_add)
}

fn eval_exponent(exp: &Exponent, s: &Instantiation) -> Result<u64, PatternError> {
    let nat = |q: &str| s.nat(q).ok_or_else(|| PatternError::UnboundVariable(format!("#{q}")));
    match exp {
        Exponent::Lit(n) => Ok(*n),
        Exponent::Var(q) => nat(q),
        Exponent::VarPlus(q, k) => Ok(nat(q)? + k),
        Exponent::Call(f, arg) => f.eval(*arg),
    }
}

/// Replaces every variable of `p` by its binding in `s`.
pub fn substitute(p: &Pattern, s: &Instantiation) -> Result<Term, PatternError> {
    let mut items = Vec::with_capacity(p.items.len() + 1);
    for item in &p.items {
        let mult = eval_exponent(&item.exp, s)?;
        let np = match &item.atom {
            PatternAtom::Seq(seq) => NonParallel::Seq(seq.clone()),
            PatternAtom::Loop(lp) => {
                let info = match &lp.info.rest {
                    None => lp.info.literal.clone(),
                    Some(x) => {
                        let bound = s.infos.get(x).ok_or_else(|| PatternError::UnboundVariable(format!("@{x}")))?;
                        lp.info
                            .literal
                            .concat(bound)
                            .ok_or_else(|| PatternError::InfoClash(format!("@{x}")))?
                    }
                };
                NonParallel::looping(lp.wall.clone(), info, substitute(&lp.content, s)?)
            }
        };
        items.push((np, mult));
    }
    let mut t = canonicalize(items);
    if let Some(x) = &p.rest {
        let bound = s.terms.get(x).ok_or_else(|| PatternError::UnboundVariable(format!("${x}")))?;
        t = t.parallel(bound);
    }
    Ok(t)
}
