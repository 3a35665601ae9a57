use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use scls_core::aedes::bundled_rules;
use scls_core::dsl::{parse_pattern, parse_term};
use scls_core::pattern::{match_at, weight, Exponent, InfoPattern, Pattern, PatternAtom};
use scls_core::rules::{propensity, Bound, Guard, RateFn, RateModel, RewriteRule};
use scls_core::term::{CompartmentAddress, EnvInfo, NonParallel, Sequence, Term};

struct Unit;

impl RateModel for Unit {
    fn rate(&self, _: &RateFn, _: &EnvInfo, _: &Term) -> Result<f64, String> {
        Ok(1.0)
    }

    fn param(&self, name: &str) -> Option<u64> {
        (name == "phi").then_some(2)
    }
}

const IMMATURE: [&str; 6] = ["Egg", "Larva | 1", "Larva | 2", "Larva | 3", "Larva | 4", "Pupa"];

struct State {
    daylight: bool,
    /// (cycle, blood, count)
    adults: Vec<(u8, u64, u64)>,
    /// per container, count of each immature phase
    containers: Vec<[u64; 6]>,
}

impl State {
    fn random(rng: &mut ChaCha8Rng) -> State {
        let mut adults = Vec::new();
        let mut seen = BTreeSet::new();
        for _ in 0..rng.gen_range(0..5) {
            let c = rng.gen_range(1..=8u8);
            let b = rng.gen_range(0..5u64);
            if seen.insert((c, b)) {
                adults.push((c, b, rng.gen_range(1..3)));
            }
        }
        let containers = (0..rng.gen_range(0..3))
            .map(|_| {
                let mut v = [0u64; 6];
                for x in v.iter_mut() {
                    if rng.gen_bool(0.5) {
                        *x = rng.gen_range(1..4);
                    }
                }
                v
            })
            .collect();
        State {
            daylight: rng.gen_bool(0.5),
            adults,
            containers,
        }
    }

    fn to_dsl(&self) -> String {
        let mut parts = Vec::new();
        for (c, b, n) in &self.adults {
            let blood = if *b > 0 { format!(" | Blood^{b}") } else { String::new() };
            parts.push(format!("{{a}}<>[Adult | {c}{blood}]^{n}"));
        }
        for (i, cont) in self.containers.iter().enumerate() {
            let inner: Vec<String> = cont
                .iter()
                .zip(IMMATURE)
                .filter(|(n, _)| **n > 0)
                .map(|(n, s)| format!("{{a}}<>[{s}]^{n}"))
                .collect();
            let inner = if inner.is_empty() { "0".to_string() } else { inner.join(" | ") };
            parts.push(format!(
                "{{C}}<ind:{}; Temp:5.0; Vol:full; p1:10; p2:20; p3:30; DTime:2.0>[{inner}]",
                i + 1
            ));
        }
        let content = if parts.is_empty() { "0".to_string() } else { parts.join(" | ") };
        format!("{{En}}<Daylight:{}; Temp:5.0>[{content}]", self.daylight)
    }

    /// Expected number of reactant combinations of rule `r` (1-based) at
    /// the environment and at each container.
    fn expected(&self, r: usize) -> (u64, Vec<u64>) {
        let adults = |pred: &dyn Fn(u8, u64) -> bool| -> u64 {
            self.adults.iter().filter(|(c, b, _)| pred(*c, *b)).map(|(_, _, n)| n).sum()
        };
        let per_container = |stage: usize| self.containers.iter().map(|c| c[stage]).collect();
        let zeros = vec![0; self.containers.len()];
        match r {
            1..=6 => (0, per_container(r - 1)),
            16..=21 => (0, per_container(r - 16)),
            7 => (if self.daylight { adults(&|_, _| true) } else { 0 }, zeros),
            8..=15 => {
                let c = (r - 7) as u8;
                let h = if self.containers.is_empty() { 0 } else { adults(&|cc, b| cc == c && b > 2) };
                (h, zeros)
            }
            22..=29 => {
                let c = (r - 21) as u8;
                (adults(&|cc, _| cc == c), zeros)
            }
            _ => unreachable!(),
        }
    }
}

fn container_site(term: &Term, ind: usize) -> CompartmentAddress {
    let en = term.items()[0].0.as_loop().unwrap();
    let pos = en
        .content
        .items()
        .iter()
        .position(|(np, _)| {
            np.as_loop()
                .and_then(|l| l.info.get("ind"))
                .and_then(|v| v.as_i64())
                == Some(ind as i64 + 1)
        })
        .unwrap();
    CompartmentAddress(vec![0, pos as u32])
}

/// Propensities of the 29 rules equal the population counts they select.
pub fn model_rule_weights_match_population_counts(terms: usize, seed: u64) {
    let rules = bundled_rules().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..terms {
        let st = State::random(&mut rng);
        let term = parse_term(&st.to_dsl()).unwrap();
        for (k, rule) in rules.iter().enumerate() {
            let (env, conts) = st.expected(k + 1);
            let got = propensity(rule, &term, &CompartmentAddress(vec![0]), &Unit).unwrap();
            assert_eq!(got, env as f64, "rule {} at environment of {}", rule.id, st.to_dsl());
            for (i, want) in conts.iter().enumerate() {
                let site = container_site(&term, i);
                let got = propensity(rule, &term, &site, &Unit).unwrap();
                assert_eq!(got, *want as f64, "rule {} at container {} of {}", rule.id, i + 1, st.to_dsl());
            }
            for site in term.sites() {
                if site.0.len() > 2 {
                    assert_eq!(propensity(rule, &term, &site, &Unit).unwrap(), 0.0);
                }
            }
        }
    }
}

/// A term with every copy of every component given its own identity.
#[derive(Debug, Clone)]
enum Ex {
    Seq(Sequence, usize),
    Loop { wall: Term, info: EnvInfo, content: Vec<Ex>, id: usize },
}

fn expand(t: &Term, next: &mut usize) -> Vec<Ex> {
    let mut out = Vec::new();
    for (np, m) in t.items() {
        for _ in 0..*m {
            *next += 1;
            let id = *next;
            out.push(match np {
                NonParallel::Seq(s) => Ex::Seq(s.clone(), id),
                NonParallel::Loop(l) => Ex::Loop {
                    wall: l.wall.clone(),
                    info: l.info.clone(),
                    content: expand(&l.content, next),
                    id,
                },
            });
        }
    }
    out
}

/// Consumed identities, natural bindings and term bindings (as structure).
type Found = (Vec<usize>, BTreeMap<String, u64>, BTreeMap<String, String>);

fn shape(x: &Ex) -> String {
    match x {
        Ex::Seq(s, _) => s.to_string(),
        Ex::Loop { wall, info, content, .. } => format!("{{{wall}}}<{info}>[{}]", residue(content.iter())),
    }
}

fn residue<'a>(xs: impl Iterator<Item = &'a Ex>) -> String {
    let mut v: Vec<String> = xs.map(shape).collect();
    v.sort();
    v.join(" | ")
}

fn merge_terms(a: &BTreeMap<String, String>, b: &BTreeMap<String, String>) -> Option<BTreeMap<String, String>> {
    let mut out = a.clone();
    for (k, v) in b {
        if out.entry(k.clone()).or_insert_with(|| v.clone()) != v {
            return None;
        }
    }
    Some(out)
}

fn info_ok(ip: &InfoPattern, info: &EnvInfo) -> bool {
    ip.literal.0.iter().all(|(k, v)| info.0.get(k) == Some(v)) && (ip.rest.is_some() || info.0.len() == ip.literal.0.len())
}

fn merge(a: &BTreeMap<String, u64>, b: &BTreeMap<String, u64>) -> Option<BTreeMap<String, u64>> {
    let mut out = a.clone();
    for (k, v) in b {
        if *out.entry(k.clone()).or_insert(*v) != *v {
            return None;
        }
    }
    Some(out)
}

fn loop_matches(lp_wall: &Term, ip: &InfoPattern, content: &Pattern, x: &Ex, exclude: Option<&str>) -> Vec<Found> {
    let Ex::Loop { wall, info, content: inner, id } = x else { return Vec::new() };
    if wall != lp_wall || !info_ok(ip, info) {
        return Vec::new();
    }
    brute_level(content, inner, false, exclude)
        .into_iter()
        .map(|(mut ids, nats, terms)| {
            ids.push(*id);
            (ids, nats, terms)
        })
        .collect()
}

/// Every way `p` consumes individuals of `inds`. Loop items whose
/// information rest is `exclude` must be present but are not consumed.
fn brute_level(p: &Pattern, inds: &[Ex], context: bool, exclude: Option<&str>) -> Vec<Found> {
    fn go(
        p: &Pattern,
        inds: &[Ex],
        context: bool,
        exclude: Option<&str>,
        k: usize,
        taken: &mut Vec<bool>,
        acc: Found,
        out: &mut Vec<Found>,
    ) {
        let Some(item) = p.items.get(k) else {
            if p.rest.is_none() && !context && taken.iter().any(|t| !t) {
                return;
            }
            let mut acc = acc;
            if let Some(x) = &p.rest {
                let r = residue(inds.iter().zip(taken.iter()).filter(|(_, t)| !**t).map(|(x, _)| x));
                match merge_terms(&acc.2, &BTreeMap::from([(x.clone(), r)])) {
                    Some(t) => acc.2 = t,
                    None => return,
                }
            }
            for it in &p.items {
                let PatternAtom::Loop(lp) = &it.atom else { continue };
                if exclude.is_none() || lp.info.rest.as_deref() != exclude {
                    continue;
                }
                let present = inds
                    .iter()
                    .enumerate()
                    .any(|(i, x)| !taken[i] && !loop_matches(&lp.wall, &lp.info, &lp.content, x, None).is_empty());
                if !present {
                    return;
                }
            }
            out.push(acc);
            return;
        };
        match (&item.atom, &item.exp) {
            (PatternAtom::Loop(lp), _) if exclude.is_some() && lp.info.rest.as_deref() == exclude => {
                go(p, inds, context, exclude, k + 1, taken, acc, out)
            }
            (PatternAtom::Seq(s), Exponent::Lit(n)) => {
                let pool: Vec<usize> = (0..inds.len())
                    .filter(|i| !taken[*i] && matches!(&inds[*i], Ex::Seq(x, _) if x == s))
                    .collect();
                for pick in subsets(&pool, *n as usize) {
                    let mut a = acc.clone();
                    for i in &pick {
                        taken[*i] = true;
                        if let Ex::Seq(_, id) = &inds[*i] {
                            a.0.push(*id);
                        }
                    }
                    go(p, inds, context, exclude, k + 1, taken, a, out);
                    for i in &pick {
                        taken[*i] = false;
                    }
                }
            }
            (PatternAtom::Seq(s), Exponent::Var(q)) => {
                let pool: Vec<usize> = (0..inds.len())
                    .filter(|i| !taken[*i] && matches!(&inds[*i], Ex::Seq(x, _) if x == s))
                    .collect();
                let Some(nats) = merge(&acc.1, &BTreeMap::from([(q.clone(), pool.len() as u64)])) else { return };
                let mut a = (acc.0.clone(), nats, acc.2.clone());
                for i in &pool {
                    taken[*i] = true;
                    if let Ex::Seq(_, id) = &inds[*i] {
                        a.0.push(*id);
                    }
                }
                go(p, inds, context, exclude, k + 1, taken, a, out);
                for i in &pool {
                    taken[*i] = false;
                }
            }
            (PatternAtom::Loop(lp), Exponent::Lit(n)) => {
                pick_loops(p, inds, context, exclude, k, taken, acc, out, lp, *n as usize, 0);
            }
            other => panic!("unsupported pattern item {other:?}"),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn pick_loops(
        p: &Pattern,
        inds: &[Ex],
        context: bool,
        exclude: Option<&str>,
        k: usize,
        taken: &mut Vec<bool>,
        acc: Found,
        out: &mut Vec<Found>,
        lp: &scls_core::pattern::LoopPattern,
        left: usize,
        from: usize,
    ) {
        if left == 0 {
            go(p, inds, context, exclude, k + 1, taken, acc, out);
            return;
        }
        for i in from..inds.len() {
            if taken[i] {
                continue;
            }
            for (ids, nats, terms) in loop_matches(&lp.wall, &lp.info, &lp.content, &inds[i], exclude) {
                let Some(nats) = merge(&acc.1, &nats) else { continue };
                let Some(terms) = merge_terms(&acc.2, &terms) else { continue };
                let mut a = (acc.0.clone(), nats, terms);
                a.0.extend(ids);
                taken[i] = true;
                pick_loops(p, inds, context, exclude, k, taken, a, out, lp, left - 1, i + 1);
                taken[i] = false;
            }
        }
    }

    let mut out = Vec::new();
    let mut taken = vec![false; inds.len()];
    go(p, inds, context, exclude, 0, &mut taken, (Vec::new(), BTreeMap::new(), BTreeMap::new()), &mut out);
    out
}

fn subsets(pool: &[usize], k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for (i, x) in pool.iter().enumerate() {
        for mut rest in subsets(&pool[i + 1..], k - 1) {
            rest.insert(0, *x);
            out.push(rest);
        }
    }
    out
}

/// Number of distinct consumed sets of individuals passing the guard.
fn distinct(found: Vec<Found>, guard: &Guard) -> u64 {
    let ok = |nats: &BTreeMap<String, u64>| match guard {
        Guard::Always => true,
        Guard::Greater { var, bound } => {
            let b = match bound {
                Bound::Lit(n) => *n,
                Bound::Param(_) => 2,
            };
            nats.get(var).is_some_and(|q| *q > b)
        }
    };
    let sets: BTreeSet<Vec<usize>> = found
        .into_iter()
        .filter(|(_, n, _)| ok(n))
        .map(|(mut ids, _, _)| {
            ids.sort();
            ids
        })
        .collect();
    sets.len() as u64
}

/// Brute-force reactant combinations of an anchored rule at `site`.
fn brute_rule(rule: &RewriteRule, term: &Term, site: &CompartmentAddress) -> u64 {
    let (np, m) = term.group_at(&site.0).unwrap();
    let mut next = 0;
    let copy = expand(&Term::single(np.clone(), 1), &mut next);
    m * distinct(brute_level(&rule.left, &copy, true, rule.target.as_deref()), &rule.guard)
}

/// Rule weights equal brute-force enumeration on the expanded term.
pub fn model_rule_weights_match_brute_force(terms: usize, seed: u64) {
    let rules = bundled_rules().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..terms {
        let st = State::random(&mut rng);
        let term = parse_term(&st.to_dsl()).unwrap();
        assert!(term.total_loops() <= 50);
        for rule in &rules {
            for site in term.sites() {
                if site.is_root() {
                    continue;
                }
                let got = propensity(rule, &term, &site, &Unit).unwrap();
                assert_eq!(got, brute_rule(rule, &term, &site) as f64, "rule {} at {site:?} of {}", rule.id, st.to_dsl());
            }
        }
    }
}

/// Generic multi-reactant patterns against brute-force enumeration.
pub fn multi_reactant_weights_match_brute_force(terms: usize, seed: u64) {
    let cases = [
        "a | $X",
        "a^2 | $X",
        "a^2 | b | $X",
        "a | {m}<>[a | $Z] | $X",
        "b^3 | c | {m}<>[a | $Z] | $X",
        "{m}<>[a | $Z]^2 | $X",
        "a^2 | b^2",
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..terms {
        let mut parts = Vec::new();
        for s in ["a", "b", "c"] {
            let m = rng.gen_range(0..6);
            if m > 0 {
                parts.push(format!("{s}^{m}"));
            }
        }
        for inner in ["0", "a", "a^3", "a^2 | b"] {
            let m = rng.gen_range(0..3);
            if m > 0 {
                parts.push(format!("{{m}}<>[{inner}]^{m}"));
            }
        }
        let text = if parts.is_empty() { "0".to_string() } else { parts.join(" | ") };
        let term = parse_term(&text).unwrap();
        let mut next = 0;
        let inds = expand(&term, &mut next);
        assert!(next <= 50);
        for p in cases {
            let pat = parse_pattern(p).unwrap();
            let root = CompartmentAddress::root();
            let ms = match_at(&pat, &term, &root).unwrap();
            let want = distinct(brute_level(&pat, &inds, true, None), &Guard::Always);
            assert_eq!(weight(&ms, &root), want, "{p} against {text}");
        }
    }
}
