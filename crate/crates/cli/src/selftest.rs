//! Statistical checks of the simulator against analytic oracles.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use scls_core::dsl::{parse_rule, parse_term};
use scls_core::rules::{ConstRates, Ecosystem, PropensityTable};
use scls_core::ssa::{select_rule_and_compartment, EventList, NoEvents, SimState, StepOutcome};
use scls_core::term::{resolve, NonParallel, Symbol, Term};

use crate::CliError;

pub const EXP_SAMPLES: usize = 100_000;
pub const SELECTION_DRAWS: usize = 100_000;
pub const CTMC_RUNS: usize = 50_000;
pub const DEATH_REPLICATES: usize = 1000;

/// √(−ln(0.005) / 2): asymptotic Kolmogorov critical value at α = 0.01.
const KS_01: f64 = 1.627_6;
/// Two-sided 99% normal quantile.
const Z_99: f64 = 2.575_829;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    ExpTimes,
    Selection,
    CtmcOracle,
    DeathDecay,
}

impl Suite {
    pub const ALL: [Suite; 4] = [Suite::ExpTimes, Suite::Selection, Suite::CtmcOracle, Suite::DeathDecay];

    pub fn token(self) -> &'static str {
        match self {
            Suite::ExpTimes => "exp-times",
            Suite::Selection => "selection",
            Suite::CtmcOracle => "ctmc-oracle",
            Suite::DeathDecay => "death-decay",
        }
    }
}

impl FromStr for Suite {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Suite::ALL
            .into_iter()
            .find(|x| x.token() == s)
            .ok_or_else(|| CliError::UnknownSuite(s.to_string()))
    }
}

#[derive(Debug, Clone)]
pub struct Report {
    pub suite: Suite,
    pub passed: bool,
    pub lines: Vec<String>,
}

impl Report {
    fn new(suite: Suite) -> Self {
        Report {
            suite,
            passed: true,
            lines: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, line: String) {
        self.passed &= ok;
        self.lines.push(format!("{} {line}", if ok { "ok  " } else { "FAIL" }));
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.lines {
            writeln!(f, "  {l}")?;
        }
        write!(f, "{}: {}", self.suite.token(), if self.passed { "PASS" } else { "FAIL" })
    }
}

pub fn run(suite: Suite, seed: u64) -> Result<Report, CliError> {
    match suite {
        Suite::ExpTimes => exp_times(seed),
        Suite::Selection => selection(seed),
        Suite::CtmcOracle => ctmc_oracle(seed),
        Suite::DeathDecay => death_decay(seed),
    }
}

fn system(term: &str, rules: &[&str]) -> Result<Ecosystem, CliError> {
    let rules = rules
        .iter()
        .map(|r| parse_rule(r).map_err(|e| CliError::Model(e.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    let term = parse_term(term).map_err(|e| CliError::Model(e.to_string()))?;
    Ok(Ecosystem::new(term, rules, EventList::new())?)
}

fn count(t: &Term, name: &str) -> u64 {
    t.multiplicity(&NonParallel::symbol(&Symbol::new(name).expect("valid symbol")))
}

/// Largest distance between the empirical CDF of `xs` and `cdf`.
pub fn ks_statistic(xs: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter().enumerate().fold(0.0, |d, (i, x)| {
        let f = cdf(*x);
        d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n)
    })
}

/// Waiting times of a system whose only reaction leaves the state unchanged.
pub fn exp_times(seed: u64) -> Result<Report, CliError> {
    let mut rep = Report::new(Suite::ExpTimes);
    for (k, a0) in [0.5, 4.0].into_iter().enumerate() {
        let eco = system("a", &[&format!("rule E a => a @ {a0:?};")])?;
        let mut sim = SimState::new(eco, ConstRates::default(), seed.wrapping_add(k as u64))?;
        let mut xs = Vec::with_capacity(EXP_SAMPLES);
        let mut last = 0.0;
        while xs.len() < EXP_SAMPLES {
            sim.step(f64::INFINITY, &mut NoEvents)?;
            xs.push(sim.clock() - last);
            last = sim.clock();
        }
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let d = ks_statistic(&mut xs, |x| 1.0 - (-a0 * x).exp());
        let crit = KS_01 / (EXP_SAMPLES as f64).sqrt();
        rep.check(d < crit, format!("a0={a0}: KS D={d:.5} < {crit:.5} (n={EXP_SAMPLES})"));
        let rel = (mean * a0 - 1.0).abs();
        rep.check(rel <= 0.03, format!("a0={a0}: mean {mean:.5} vs {:.5} (rel. error {rel:.4})", 1.0 / a0));
    }
    Ok(rep)
}

fn selection_frequencies(
    rep: &mut Report,
    label: &str,
    eco: &Ecosystem,
    expected: &BTreeMap<(String, String), f64>,
    seed: u64,
) -> Result<(), CliError> {
    let table = PropensityTable::rebuild(&eco.initial, &eco.rules, &ConstRates::default())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits: BTreeMap<(String, String), usize> = BTreeMap::new();
    for _ in 0..SELECTION_DRAWS {
        let (j, site) = select_rule_and_compartment(&table, &mut rng)?;
        let (info, _) = resolve(&eco.initial, &site)?;
        let cell = (eco.rules[j].id.clone(), info.to_string());
        *hits.entry(cell).or_default() += 1;
    }
    let n = SELECTION_DRAWS as f64;
    let mut worst: f64 = 0.0;
    let mut ok = hits.keys().all(|k| expected.contains_key(k));
    for (cell, p) in expected {
        let f = hits.get(cell).copied().unwrap_or(0) as f64 / n;
        let z = (f - p).abs() / (p * (1.0 - p) / n).sqrt();
        worst = worst.max(z);
        ok &= z <= 3.0;
    }
    rep.check(ok, format!("{label}: {} cells, largest deviation {worst:.2} sigma (n={SELECTION_DRAWS})", expected.len()));
    Ok(())
}

/// Frequencies of the chosen (rule, compartment) pairs against a_j^i / a0.
pub fn selection(seed: u64) -> Result<Report, CliError> {
    let mut rep = Report::new(Suite::Selection);
    let eco = system("a | b", &["rule A a => a @ 3.0;", "rule B b => b @ 1.0;"])?;
    let expected = BTreeMap::from([
        (("A".to_string(), String::new()), 0.75),
        (("B".to_string(), String::new()), 0.25),
    ]);
    selection_frequencies(&mut rep, "a=(3,1)", &eco, &expected, seed)?;

    let k = [1.0, 2.0, 0.5];
    let counts: [[u64; 3]; 3] = [[1, 2, 3], [2, 3, 1], [3, 1, 4]];
    let term = (0..3)
        .map(|i| format!("{{m}}<k:{}>[a^{} | b^{} | c^{}]", i + 1, counts[i][0], counts[i][1], counts[i][2]))
        .collect::<Vec<_>>()
        .join(" | ");
    let eco = system(&term, &["rule A a => a @ 1.0;", "rule B b => b @ 2.0;", "rule C c => c @ 0.5;"])?;
    let a0: f64 = (0..3).flat_map(|i| (0..3).map(move |j| k[j] * counts[i][j] as f64)).sum();
    let mut expected = BTreeMap::new();
    for (i, row) in counts.iter().enumerate() {
        for (j, id) in ["A", "B", "C"].into_iter().enumerate() {
            expected.insert((id.to_string(), format!("k:{}", i + 1)), k[j] * row[j] as f64 / a0);
        }
    }
    selection_frequencies(&mut rep, "3 rules x 3 compartments", &eco, &expected, seed.wrapping_add(1))?;
    Ok(rep)
}

/// States (x, y, z) with x + y + 2z = 3.
fn ctmc_states() -> Vec<[u64; 3]> {
    let mut s = Vec::new();
    for z in 0..=1u64 {
        for y in 0..=(3 - 2 * z) {
            s.push([3 - 2 * z - y, y, z]);
        }
    }
    s
}

/// Generator of x -> y (1.0), y -> x (0.5), y + y -> z (0.8), z -> y + y (0.3).
fn ctmc_generator(states: &[[u64; 3]]) -> DMatrix<f64> {
    let n = states.len();
    let idx = |s: [u64; 3]| states.iter().position(|x| *x == s).expect("closed state space");
    let mut q = DMatrix::zeros(n, n);
    for (i, &[x, y, z]) in states.iter().enumerate() {
        let mut moves = Vec::new();
        if x > 0 {
            moves.push(([x - 1, y + 1, z], 1.0 * x as f64));
        }
        if y > 0 {
            moves.push(([x + 1, y - 1, z], 0.5 * y as f64));
        }
        if y > 1 {
            moves.push(([x, y - 2, z + 1], 0.8 * (y * (y - 1) / 2) as f64));
        }
        if z > 0 {
            moves.push(([x, y + 2, z - 1], 0.3 * z as f64));
        }
        for (to, rate) in moves {
            q[(i, idx(to))] += rate;
            q[(i, i)] -= rate;
        }
    }
    q
}

/// End-state distribution at t = 1 against the matrix exponential of the
/// generator.
pub fn ctmc_oracle(seed: u64) -> Result<Report, CliError> {
    let mut rep = Report::new(Suite::CtmcOracle);
    let states = ctmc_states();
    let p = {
        let p_t = ctmc_generator(&states).exp();
        let mut e0 = DVector::zeros(states.len());
        e0[states.iter().position(|s| *s == [3, 0, 0]).expect("initial state")] = 1.0;
        p_t.transpose() * e0
    };
    let eco = system(
        "{m}<>[x^3]",
        &[
            "rule F x => y @ 1.0;",
            "rule B y => x @ 0.5;",
            "rule D y | y => z @ 0.8;",
            "rule S z => y | y @ 0.3;",
        ],
    )?;
    let mut hits = vec![0usize; states.len()];
    for r in 0..CTMC_RUNS {
        let mut sim = SimState::new(eco.clone(), ConstRates::default(), seed.wrapping_add(r as u64))?;
        while !matches!(sim.step(1.0, &mut NoEvents)?, StepOutcome::Terminated(_)) {}
        let (_, content) = resolve(sim.term(), &scls_core::term::CompartmentAddress(vec![0]))?;
        let s = [count(content, "x"), count(content, "y"), count(content, "z")];
        let i = states
            .iter()
            .position(|x| *x == s)
            .ok_or_else(|| CliError::Model(format!("unreachable state {s:?}")))?;
        hits[i] += 1;
    }
    let tv: f64 = 0.5
        * hits
            .iter()
            .zip(p.iter())
            .map(|(h, p)| (*h as f64 / CTMC_RUNS as f64 - p).abs())
            .sum::<f64>();
    rep.lines.push(format!("  {} states, exact p = {:?}", states.len(), p.iter().map(|x| (x * 1e4).round() / 1e4).collect::<Vec<_>>()));
    rep.check(tv < 0.02, format!("total variation {tv:.5} < 0.02 (n={CTMC_RUNS})"));
    Ok(rep)
}

/// N0 = 100, per-capita death rate 0.1/day; population at t = 10.
pub fn death_decay(seed: u64) -> Result<Report, CliError> {
    let mut rep = Report::new(Suite::DeathDecay);
    let eco = system("a^100", &["rule D a => 0 @ 0.1;"])?;
    let mut finals = Vec::with_capacity(DEATH_REPLICATES);
    let mut monotone = true;
    for r in 0..DEATH_REPLICATES {
        let mut sim = SimState::new(eco.clone(), ConstRates::default(), seed.wrapping_add(r as u64))?;
        let samples = sim.run(10.0, 0.5, &mut NoEvents, |_, t| count(t, "a"))?;
        monotone &= samples.windows(2).all(|w| w[1] <= w[0]);
        finals.push(*samples.last().expect("sample at t = 10") as f64);
    }
    let n = finals.len() as f64;
    let mean = finals.iter().sum::<f64>() / n;
    let sd = (finals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let half = Z_99 * sd / n.sqrt();
    let exact = 100.0 * (-1.0f64).exp();
    rep.check(monotone, "samples are nonincreasing in every replicate".into());
    rep.check(
        (mean - exact).abs() <= half,
        format!("mean at t=10 {mean:.3}, 99% CI [{:.3}, {:.3}] contains {exact:.3}", mean - half, mean + half),
    );
    Ok(rep)
}
