use scls_core::aedes::{
    build_ecosystem, census, AedesHandler, ClimateSchedule, ContainerSpec, InitialPopulation, MosquitoPhase,
    StageTables, Volume,
};
use scls_core::rules::Ecosystem;
use scls_core::ssa::{SimState, StepOutcome};
use scls_core::term::resolve;

fn constant_climate(days: usize, temp_c: f64) -> ClimateSchedule {
    ClimateSchedule {
        daily_temps: vec![temp_c; days],
        ..ClimateSchedule::synthetic_season(0)
    }
}

fn dry_ecosystem(tables: &StageTables) -> Ecosystem {
    let specs: Vec<ContainerSpec> = ContainerSpec::field_defaults()
        .into_iter()
        .map(|c| ContainerSpec {
            initial_vol: Volume::Empty,
            ..c
        })
        .collect();
    build_ecosystem(&specs, tables, &constant_climate(200, 18.8), &InitialPopulation::field_survey()).unwrap()
}

/// Without water no immature develops; all of them die within the run.
pub fn dry_containers_lose_immatures(replicates: u64, maxtime: f64) {
    let tables = StageTables::illustrative();
    let development = ["R1", "R2", "R3", "R4", "R5", "R6"];
    for seed in 0..replicates {
        let mut sim = SimState::new(dry_ecosystem(&tables), tables.clone(), seed).unwrap();
        loop {
            let before = sim.term().clone();
            match sim.step(maxtime, &mut AedesHandler).unwrap() {
                StepOutcome::Terminated(_) => break,
                StepOutcome::ReactionFired { rule, site } if development.contains(&rule.as_str()) => {
                    let (info, _) = resolve(&before, &site).unwrap();
                    let vol = info.get("Vol").and_then(|v| v.as_token()).unwrap();
                    assert_ne!(vol, "empty", "{rule} fired in a dry container at {}", sim.clock());
                }
                _ => {}
            }
        }
        let c = census(sim.term());
        assert!(c.volumes.iter().all(|(_, v)| *v == Volume::Empty));
        assert_eq!(c.immature_total(), 0, "replicate {seed} still has immatures at {maxtime}");
    }
}

/// Checks after every step that blood meals have no propensity at night.
/// Returns how many night-time states were inspected.
pub fn no_blood_meals_at_night(steps: usize, seed: u64) -> usize {
    let tables = StageTables::illustrative();
    let eco = build_ecosystem(
        &ContainerSpec::field_defaults(),
        &tables,
        &ClimateSchedule::synthetic_season(120),
        &InitialPopulation::field_survey(),
    )
    .unwrap();
    let r7 = eco.rules.iter().position(|r| r.id == "R7").unwrap();
    let mut sim = SimState::new(eco, tables, seed).unwrap();
    let mut nights = 0;
    for _ in 0..steps {
        if let StepOutcome::Terminated(_) = sim.step(120.0, &mut AedesHandler).unwrap() {
            break;
        }
        if !census(sim.term()).daylight {
            nights += 1;
            assert_eq!(sim.table().rule_total(r7), 0.0, "R7 active at night, t = {}", sim.clock());
        }
    }
    nights
}

fn emergence_time(offset: f64, seed: u64) -> f64 {
    let mut tables = StageTables::illustrative();
    for b in &mut tables.bdr[..6] {
        *b = 0.0;
    }
    let spec = ContainerSpec {
        ind: 1,
        phi: [100, 250, 300],
        dtime: 1.0e6,
        initial_vol: Volume::Full,
        initial_temp: offset,
    };
    let pop = InitialPopulation {
        adults: 0,
        per_container: vec![(MosquitoPhase::Egg, 1)],
    };
    let climate = constant_climate(1000, tables.mtd + offset);
    let eco = build_ecosystem(&[spec], &tables, &climate, &pop).unwrap();
    let mut sim = SimState::new(eco, tables, seed).unwrap();
    loop {
        match sim.step(1000.0, &mut AedesHandler).unwrap() {
            StepOutcome::ReactionFired { rule, .. } if rule == "R6" => return sim.clock(),
            StepOutcome::Terminated(t) => panic!("no emergence: {t:?}"),
            _ => {}
        }
    }
}

/// Mean egg-to-adult times at offsets `offset` and `2 * offset` over
/// `replicates` runs each.
pub fn mean_emergence_times(offset: f64, replicates: u64) -> (f64, f64) {
    let mean = |o: f64, base: u64| (0..replicates).map(|k| emergence_time(o, base + k)).sum::<f64>() / replicates as f64;
    (mean(offset, 0), mean(2.0 * offset, 1_000_000))
}
