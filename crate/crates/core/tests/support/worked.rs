use scls_core::aedes::{census, eggs, handle_event, StageTables, Volume};
use scls_core::dsl::{parse_events, parse_term};
use scls_core::term::Term;

pub fn egg_table() {
    let v: Vec<u32> = (1..=8).map(|j| eggs(j).unwrap()).collect();
    assert_eq!(v, [40, 37, 35, 32, 30, 27, 25, 22]);
    assert!(eggs(0).is_err() && eggs(9).is_err());
}

/// Every branch of the density-dependent death rate, with thresholds
/// 100/250/300, including the doubled count of half-full containers.
pub fn death_rate_table() {
    let mut t = StageTables::illustrative();
    t.bdr[0] = 0.1;
    let b = 0.1;
    let phi = [100, 250, 300];
    let cases: [(u64, Volume, f64); 17] = [
        (0, Volume::Empty, 1.0),
        (7, Volume::Empty, 1.0),
        (400, Volume::Empty, 1.0),
        (300, Volume::Full, 1.0),
        (301, Volume::Full, 1.0),
        (299, Volume::Full, 1.2 * b),
        (250, Volume::Full, 1.2 * b),
        (249, Volume::Full, b),
        (100, Volume::Full, b),
        (99, Volume::Full, 0.8 * b),
        (0, Volume::Full, 0.8 * b),
        (150, Volume::HalfFull, 1.0),
        (149, Volume::HalfFull, 1.2 * b),
        (125, Volume::HalfFull, 1.2 * b),
        (124, Volume::HalfFull, b),
        (50, Volume::HalfFull, b),
        (49, Volume::HalfFull, 0.8 * b),
    ];
    for (n, vol, want) in cases {
        assert_eq!(t.death_rate(1, n, vol, phi).unwrap(), want, "n={n} {vol}");
    }
}

fn two_containers() -> Term {
    parse_term(
        "{En}<Daylight:true; Temp:10.0>[{C}<ind:1; Temp:10.0; Vol:empty; p1:100; p2:250; p3:300; DTime:2.0>[0] \
         | {C}<ind:2; Temp:10.0; Vol:full; p1:50; p2:125; p3:150; DTime:1.5>[0]]",
    )
    .unwrap()
}

pub fn desiccation_example() {
    let mut events = parse_events("(Desic, 2, 1.0)").unwrap();
    let e = events.pop().unwrap();
    let next = handle_event(&e, &two_containers(), &mut events).unwrap();
    assert_eq!(
        next.to_string(),
        "{En}<Daylight:true; Temp:10.0>[{C}<DTime:1.5; Temp:10.0; Vol:half-full; ind:2; p1:50; p2:125; p3:150>[0] \
         | {C}<DTime:2.0; Temp:10.0; Vol:empty; ind:1; p1:100; p2:250; p3:300>[0]]"
    );
    assert_eq!(events.to_string(), "(Desic, 2, 2.5)\n");
}

pub fn rain_example() {
    let mut events = parse_events("(Desic, 2, 1.0)").unwrap();
    let e = events.pop().unwrap();
    let t = handle_event(&e, &two_containers(), &mut events).unwrap();
    let mut events = parse_events("(Rain, light, 1.25) (Desic, 2, 1.5) (Desic, 1, 2.0)").unwrap();
    let e = events.pop().unwrap();
    let t = handle_event(&e, &t, &mut events).unwrap();
    assert_eq!(
        t.to_string(),
        "{En}<Daylight:true; Temp:10.0>[{C}<DTime:1.5; Temp:10.0; Vol:full; ind:2; p1:50; p2:125; p3:150>[0] \
         | {C}<DTime:2.0; Temp:10.0; Vol:half-full; ind:1; p1:100; p2:250; p3:300>[0]]"
    );
    assert_eq!(events.to_string(), "(Desic, 2, 2.75)\n(Desic, 1, 3.25)\n");
    assert_eq!(census(&t).volumes, [(1, Volume::HalfFull), (2, Volume::Full)]);
}
