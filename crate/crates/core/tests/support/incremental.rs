use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use scls_core::aedes::{
    build_ecosystem, bundled_rules, census, AedesHandler, ClimateSchedule, ContainerSpec, InitialPopulation,
    StageTables,
};
use scls_core::dsl::parse_term;
use scls_core::rules::{applicable_matches, choose_match, fire, propensity, PropensityTable};
use scls_core::ssa::{SimState, StepOutcome};
use scls_core::term::Term;

fn small_specs() -> Vec<ContainerSpec> {
    ContainerSpec::field_defaults().into_iter().take(3).collect()
}

fn all_specs() -> Vec<ContainerSpec> {
    ContainerSpec::field_defaults()
}

/// The incrementally maintained table equals a full rebuild after `n` steps,
/// with per-step verification enabled.
pub fn incremental_table_equals_rebuild(n: usize, seed: u64) {
    let tables = StageTables::illustrative();
    let climate = ClimateSchedule::synthetic_season(190);
    let eco = build_ecosystem(&all_specs(), &tables, &climate, &InitialPopulation::field_survey()).unwrap();
    let mut sim = SimState::new(eco, tables, seed).unwrap().with_verification(true);
    let mut steps = 0;
    let mut events = 0;
    while steps < n {
        match sim.step(190.0, &mut AedesHandler).unwrap() {
            StepOutcome::Terminated(_) => break,
            StepOutcome::EventHandled(_) => events += 1,
            StepOutcome::ReactionFired { .. } => {}
        }
        steps += 1;
    }
    assert_eq!(steps, n);
    assert!(events > 0);
    let fresh = PropensityTable::rebuild(sim.term(), sim.rules(), sim.model()).unwrap();
    assert_eq!(sim.table(), &fresh);
}

pub fn cached_table_equals_generic_propensity() {
    let tables = StageTables::illustrative();
    let climate = ClimateSchedule::synthetic_season(40);
    let eco = build_ecosystem(&small_specs(), &tables, &climate, &InitialPopulation::field_survey()).unwrap();
    let mut sim = SimState::new(eco, tables, 9).unwrap();
    for round in 0..30 {
        for _ in 0..150 {
            if let StepOutcome::Terminated(_) = sim.step(40.0, &mut AedesHandler).unwrap() {
                break;
            }
        }
        let term = sim.term();
        for (j, rule) in sim.rules().iter().enumerate() {
            for site in term.sites() {
                let want = propensity(rule, term, &site, sim.model()).unwrap();
                assert_eq!(sim.table().get(j, &site), want, "round {round} rule {} at {site:?}", rule.id);
            }
        }
    }
}

fn key(t: &Term) -> String {
    t.to_string()
}

/// Outcome frequencies of `fire` against choosing among all applicable
/// matches directly.
pub fn split_firing_has_the_generic_distribution(n: usize) {
    let rules = bundled_rules().unwrap();
    let tables = StageTables::illustrative();
    let term = parse_term(
        "{En}<Daylight:true; Temp:5.0>[{a}<>[Adult | 1 | Blood^3]^2 | {a}<>[Adult | 1 | Blood^4] \
         | {a}<>[Adult | 1]^3 | {a}<>[Adult | 2 | Blood^5]^2 | {a}<>[Adult | 1 | Blood]^2 \
         | {C}<ind:1; Temp:5.0; Vol:full; p1:10; p2:20; p3:30; DTime:2.0>[{a}<>[Egg]] \
         | {C}<ind:2; Temp:5.0; Vol:half-full; p1:10; p2:20; p3:30; DTime:3.0>[0]]",
    )
    .unwrap();
    let site = scls_core::term::CompartmentAddress(vec![0]);
    for id in ["R7", "R8", "R22"] {
        let rule = rules.iter().find(|r| r.id == id).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut a: BTreeMap<String, f64> = BTreeMap::new();
        let mut b: BTreeMap<String, f64> = BTreeMap::new();
        for _ in 0..n {
            let (next, _) = fire(rule, &term, &site, &tables, &mut rng).unwrap();
            *a.entry(key(&next)).or_default() += 1.0;
            let cands = applicable_matches(rule, &term, &site, &tables).unwrap();
            let m = choose_match(rule, cands, &mut rng).unwrap();
            let next = scls_core::rules::execute(rule, &m, &term).unwrap();
            *b.entry(key(&next)).or_default() += 1.0;
        }
        let keys: Vec<&String> = a.keys().chain(b.keys()).collect();
        assert!(keys.len() > 1 || id == "R7");
        for k in keys {
            let pa = a.get(k).copied().unwrap_or(0.0) / n as f64;
            let pb = b.get(k).copied().unwrap_or(0.0) / n as f64;
            let p = (pa + pb) / 2.0;
            let sd = (2.0 * p * (1.0 - p) / n as f64).sqrt();
            assert!((pa - pb).abs() <= 5.0 * sd + 1e-9, "{id}: {pa} vs {pb} for {k}");
        }
    }
}

/// Each rule class changes the census by exactly its stated amount.
pub fn rule_classes_conserve_individuals() {
    let rules = bundled_rules().unwrap();
    let tables = StageTables::illustrative();
    let adults: Vec<String> = (1..=8).map(|c| format!("{{a}}<>[Adult | {c} | Blood^3]^2")).collect();
    let stages = "{a}<>[Egg]^3 | {a}<>[Larva | 1]^2 | {a}<>[Larva | 2] | {a}<>[Larva | 3]^2 | {a}<>[Larva | 4] | {a}<>[Pupa]^2";
    let term = parse_term(&format!(
        "{{En}}<Daylight:true; Temp:5.0>[{} \
         | {{C}}<ind:1; Temp:5.0; Vol:full; p1:10; p2:20; p3:30; DTime:2.0>[{stages}] \
         | {{C}}<ind:2; Temp:5.0; Vol:half-full; p1:10; p2:20; p3:30; DTime:3.0>[{stages}]]",
        adults.join(" | ")
    ))
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for (j, rule) in rules.iter().enumerate() {
        let mut fired = 0;
        for site in term.sites() {
            if propensity(rule, &term, &site, &tables).unwrap() <= 0.0 {
                continue;
            }
            for _ in 0..20 {
                let (next, _) = fire(rule, &term, &site, &tables, &mut rng).unwrap();
                let (before, after) = (census(&term), census(&next));
                let (nb, na) = (
                    before.adults_total() + before.immature_total(),
                    after.adults_total() + after.immature_total(),
                );
                let r = j + 1;
                match r {
                    1..=5 => {
                        assert_eq!(na, nb);
                        assert_eq!(after.adults_total(), before.adults_total());
                        assert_eq!(after.volumes, before.volumes);
                    }
                    6 => {
                        assert_eq!(na, nb);
                        assert_eq!(after.adults_total(), before.adults_total() + 1);
                        assert_eq!(after.adults[0], before.adults[0] + 1);
                    }
                    7 => {
                        assert_eq!(na, nb);
                        assert_eq!(after.adults, before.adults);
                    }
                    8..=14 => {
                        let eggs = scls_core::aedes::eggs((r - 7) as u8).unwrap() as u64;
                        assert_eq!(after.adults_total(), before.adults_total());
                        assert_eq!(after.adults[r - 8] + 1, before.adults[r - 8]);
                        assert_eq!(after.eggs, before.eggs + eggs);
                    }
                    15 => {
                        assert_eq!(after.adults_total() + 1, before.adults_total());
                        assert_eq!(after.eggs, before.eggs + 22);
                    }
                    16..=29 => assert_eq!(na + 1, nb),
                    _ => unreachable!(),
                }
                fired += 1;
            }
        }
        assert!(fired > 0, "{} never applicable", rule.id);
    }
}
