//! The *Aedes albopictus* population model: stage tables, rate functions,
//! the bundled rule set, initial state construction and the handler for
//! light, temperature, desiccation and rain events.

use std::fmt;

use thiserror::Error;

use crate::dsl::{parse_model, DslError};
use crate::rules::{Ecosystem, RateFn, RateModel, RewriteRule, RuleError};
use crate::ssa::{EventHandler, EventList, ExternalEvent, SimError};
use crate::term::{canonicalize, count_individuals, EnvInfo, Loop, NonParallel, PhaseFilter, Symbol, Term, TermError, Value};

/// The 29 rules, in rule-number order.
pub const MODEL: &str = include_str!("../models/aedes.cls");

/// Event names in the order they are handled when scheduled at equal times.
pub const EVENT_PRIORITY: [&str; 4] = ["Temp", "Light", "Rain", "Desic"];

/// Trap captures as (days after 8 May, count), 8 May to 14 October.
pub const TRAP_COUNTS: [(u32, u64); 13] = [
    (0, 4),
    (7, 25),
    (11, 81),
    (28, 33),
    (41, 167),
    (56, 360),
    (67, 561),
    (82, 381),
    (103, 486),
    (118, 471),
    (134, 276),
    (138, 292),
    (159, 398),
];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AedesError {
    #[error("{what} index {index} is out of range")]
    OutOfRange { what: &'static str, index: i64 },
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
    #[error("unknown event {0}")]
    UnknownEvent(String),
    #[error("no container with index {0}")]
    UnknownContainer(i64),
    #[error("event {event} cannot take value {value}")]
    BadValue { event: String, value: String },
    #[error("compartment lacks information {0}")]
    MissingInfo(String),
    #[error("state has no environment loop")]
    NoEnvironment,
    #[error(transparent)]
    Dsl(#[from] DslError),
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error(transparent)]
    Term(#[from] TermError),
}

/// Eggs laid by one female at gonotrophic cycle `j`.
pub fn eggs(j: u8) -> Result<u32, AedesError> {
    const EGGS: [u32; 8] = [40, 37, 35, 32, 30, 27, 25, 22];
    match j {
        1..=8 => Ok(EGGS[j as usize - 1]),
        _ => Err(AedesError::OutOfRange {
            what: "gonotrophic cycle",
            index: j as i64,
        }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Volume {
    Empty,
    HalfFull,
    Full,
}

impl Volume {
    pub fn token(self) -> &'static str {
        match self {
            Volume::Empty => "empty",
            Volume::HalfFull => "half-full",
            Volume::Full => "full",
        }
    }

    pub fn from_token(s: &str) -> Option<Volume> {
        match s {
            "empty" => Some(Volume::Empty),
            "half-full" => Some(Volume::HalfFull),
            "full" => Some(Volume::Full),
            _ => None,
        }
    }

    pub fn lower(self) -> Volume {
        match self {
            Volume::Full => Volume::HalfFull,
            _ => Volume::Empty,
        }
    }

    pub fn raise(self) -> Volume {
        match self {
            Volume::Empty => Volume::HalfFull,
            _ => Volume::Full,
        }
    }

    /// 0 for empty, 1 for half-full, 2 for full.
    pub fn level(self) -> u8 {
        self as u8
    }

    fn value(self) -> Value {
        Value::Token(self.token().to_string())
    }
}

impl fmt::Display for Volume {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RainLevel {
    Light,
    Heavy,
}

impl RainLevel {
    pub fn token(self) -> &'static str {
        match self {
            RainLevel::Light => "light",
            RainLevel::Heavy => "heavy",
        }
    }
}

/// Stage-specific durations and death rates.
///
/// Stages: 1 egg, 2..=5 instars, 6 pupa, 7..=14 gonotrophic cycles 1..=8.
#[derive(Debug, Clone, PartialEq)]
pub struct StageTables {
    /// Degree-days of stages 1..=6.
    pub dd: [f64; 6],
    /// Baseline death rate of stages 1..=14.
    pub bdr: [f64; 14],
    /// Mean days between blood meals, d(7).
    pub d_blood: f64,
    /// Days spent in each gonotrophic cycle, d(8)..=d(15).
    pub d_cycle: [f64; 8],
    /// Blood meals a female must exceed before ovipositing.
    pub phi: u64,
    /// Minimum temperature for development, °C.
    pub mtd: f64,
}

impl StageTables {
    /// Non-normative values for demonstrations; they are not field estimates.
    pub fn illustrative() -> Self {
        StageTables {
            dd: [45.0, 30.0, 30.0, 30.0, 40.0, 30.0],
            bdr: [0.4, 0.4, 0.4, 0.4, 0.4, 0.4, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5],
            d_blood: 0.5,
            d_cycle: [4.0; 8],
            phi: 2,
            mtd: 8.8,
        }
    }

    pub fn validate(&self) -> Result<(), AedesError> {
        let positive = |x: f64| x > 0.0 && x.is_finite();
        if !self.dd.iter().copied().all(positive)
            || !positive(self.d_blood)
            || !self.d_cycle.iter().copied().all(positive)
        {
            return Err(AedesError::InvalidSpec("durations must be positive and finite".into()));
        }
        if !self.bdr.iter().all(|b| (0.0..1.0).contains(b)) {
            return Err(AedesError::InvalidSpec("baseline death rates must lie in [0, 1)".into()));
        }
        if !self.mtd.is_finite() {
            return Err(AedesError::InvalidSpec("MTD must be finite".into()));
        }
        Ok(())
    }

    /// Death rate of immature stage `j` among `n` immatures.
    pub fn death_rate(&self, j: u8, n: u64, vol: Volume, phi: [u64; 3]) -> Result<f64, AedesError> {
        if !(1..=6).contains(&j) {
            return Err(AedesError::OutOfRange {
                what: "immature stage",
                index: j as i64,
            });
        }
        let b = self.bdr[j as usize - 1];
        Ok(match vol {
            Volume::Empty => 1.0,
            Volume::HalfFull => return self.death_rate(j, n.saturating_mul(2), Volume::Full, phi),
            Volume::Full if n >= phi[2] => 1.0,
            Volume::Full if n >= phi[1] => 1.2 * b,
            Volume::Full if n >= phi[0] => b,
            Volume::Full => 0.8 * b,
        })
    }

    /// Rate of immature rule `i` (1..=6 development, 16..=21 death) in a
    /// container at temperature offset `temp` holding `n` immatures.
    pub fn immature_rate(&self, i: u8, temp: f64, vol: Volume, phi: [u64; 3], n: u64) -> Result<f64, AedesError> {
        match i {
            1..=6 => Ok(temp * (1.0 - self.death_rate(i, n, vol, phi)?) / self.dd[i as usize - 1]),
            16..=21 => Ok(temp * self.death_rate(i - 15, n, vol, phi)? / self.dd[i as usize - 16]),
            _ => Err(AedesError::OutOfRange {
                what: "immature rule",
                index: i as i64,
            }),
        }
    }

    /// Rate of adult rule `i` (7, 8..=15 oviposition, 22..=29 death).
    pub fn adult_rate(&self, i: u8) -> Result<f64, AedesError> {
        match i {
            7 => Ok(1.0 / self.d_blood),
            8..=15 => {
                let c = (i - 8) as usize;
                Ok((1.0 - self.bdr[6 + c]) / self.d_cycle[c])
            }
            22..=29 => {
                let c = (i - 22) as usize;
                Ok(self.bdr[6 + c] / self.d_cycle[c])
            }
            _ => Err(AedesError::OutOfRange {
                what: "adult rule",
                index: i as i64,
            }),
        }
    }
}

fn info_f64(info: &EnvInfo, name: &str) -> Result<f64, AedesError> {
    info.get(name)
        .and_then(Value::as_f64)
        .ok_or_else(|| AedesError::MissingInfo(name.to_string()))
}

fn info_u64(info: &EnvInfo, name: &str) -> Result<u64, AedesError> {
    info.get(name)
        .and_then(Value::as_i64)
        .and_then(|v| u64::try_from(v).ok())
        .ok_or_else(|| AedesError::MissingInfo(name.to_string()))
}

fn info_volume(info: &EnvInfo) -> Result<Volume, AedesError> {
    info.get("Vol")
        .and_then(Value::as_token)
        .and_then(Volume::from_token)
        .ok_or_else(|| AedesError::MissingInfo("Vol".to_string()))
}

impl RateModel for StageTables {
    fn rate(&self, f: &RateFn, info: &EnvInfo, content: &Term) -> Result<f64, String> {
        let r = match f {
            RateFn::Const(k) => Ok(*k),
            RateFn::Adult(i) => self.adult_rate(*i),
            RateFn::Immature(i) => (|| {
                let temp = info_f64(info, "Temp")?;
                let vol = info_volume(info)?;
                let phi = [info_u64(info, "p1")?, info_u64(info, "p2")?, info_u64(info, "p3")?];
                let n = count_individuals(content, &PhaseFilter::immature());
                self.immature_rate(*i, temp, vol, phi, n)
            })(),
        };
        r.map_err(|e| e.to_string())
    }

    fn param(&self, name: &str) -> Option<u64> {
        (name == "phi").then_some(self.phi)
    }
}

/// Life stage of one individual.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MosquitoPhase {
    Egg,
    Larva(u8),
    Pupa,
    Adult { cycle: u8, blood: u64 },
}

impl MosquitoPhase {
    /// The `{a}<>[...]` loop representing one individual.
    pub fn individual(self) -> NonParallel {
        let sym = |s: &str| (NonParallel::symbol(&Symbol::new(s).expect("valid symbol")), 1);
        let content = match self {
            MosquitoPhase::Egg => canonicalize([sym("Egg")]),
            MosquitoPhase::Larva(k) => canonicalize([sym("Larva"), sym(&k.to_string())]),
            MosquitoPhase::Pupa => canonicalize([sym("Pupa")]),
            MosquitoPhase::Adult { cycle, blood } => canonicalize([
                sym("Adult"),
                sym(&cycle.to_string()),
                (NonParallel::symbol(&Symbol::new("Blood").expect("valid symbol")), blood),
            ]),
        };
        NonParallel::looping(Term::symbol(&Symbol::new("a").expect("valid symbol")), EnvInfo::new(), content)
    }

    pub fn from_loop(l: &Loop) -> Option<MosquitoPhase> {
        if l.wall.to_string() != "a" {
            return None;
        }
        let mut kind = None;
        let mut number = None;
        let mut blood = 0;
        for (np, m) in l.content.items() {
            let NonParallel::Seq(s) = np else { return None };
            let [sym] = s.0.as_slice() else { return None };
            match sym.as_str() {
                "Egg" | "Larva" | "Pupa" | "Adult" if *m == 1 => kind = Some(sym.as_str()),
                "Blood" => blood = *m,
                other => number = other.parse::<u8>().ok(),
            }
        }
        match (kind?, number) {
            ("Egg", None) => Some(MosquitoPhase::Egg),
            ("Larva", Some(k @ 1..=4)) => Some(MosquitoPhase::Larva(k)),
            ("Pupa", None) => Some(MosquitoPhase::Pupa),
            ("Adult", Some(c @ 1..=8)) => Some(MosquitoPhase::Adult { cycle: c, blood }),
            _ => None,
        }
    }

    pub fn is_immature(self) -> bool {
        !matches!(self, MosquitoPhase::Adult { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContainerSpec {
    pub ind: u32,
    /// Density thresholds φ1 < φ2 < φ3.
    pub phi: [u64; 3],
    /// Days for the water to drop one level.
    pub dtime: f64,
    pub initial_vol: Volume,
    /// Temperature offset above MTD.
    pub initial_temp: f64,
}

impl ContainerSpec {
    /// Eleven half-full containers with carrying capacities from 100 to 250
    /// and desiccation times from 4.5 to 9.0 days.
    pub fn field_defaults() -> Vec<ContainerSpec> {
        (0..11u32)
            .map(|k| {
                let cap = 100 + 15 * k as u64;
                ContainerSpec {
                    ind: k + 1,
                    phi: [cap * 2 / 5, cap * 4 / 5, cap],
                    dtime: 4.5 + 0.45 * k as f64,
                    initial_vol: Volume::HalfFull,
                    initial_temp: 0.0,
                }
            })
            .collect()
    }

    fn info(&self) -> EnvInfo {
        let mut i = EnvInfo::new();
        let mut put = |k: &str, v: Value| {
            i.0.insert(Symbol::new(k).expect("valid name"), v);
        };
        put("ind", Value::Int(self.ind as i64));
        put("Temp", Value::Real(self.initial_temp));
        put("Vol", self.initial_vol.value());
        put("p1", Value::Int(self.phi[0] as i64));
        put("p2", Value::Int(self.phi[1] as i64));
        put("p3", Value::Int(self.phi[2] as i64));
        put("DTime", Value::Real(self.dtime));
        i
    }
}

/// Daily weather driving the external events.
#[derive(Debug, Clone, PartialEq)]
pub struct ClimateSchedule {
    /// Mean temperature (°C) of day `k` at index `k`.
    pub daily_temps: Vec<f64>,
    pub rainfalls: Vec<(f64, RainLevel)>,
    /// Fractions of the day.
    pub sunrise: f64,
    pub sunset: f64,
}

impl ClimateSchedule {
    pub fn empty() -> Self {
        ClimateSchedule {
            daily_temps: Vec::new(),
            rainfalls: Vec::new(),
            sunrise: 0.25,
            sunset: 0.75,
        }
    }
}

impl ClimateSchedule {
    /// A smooth summer season starting on 8 May: mean temperatures rise from
    /// about 18 °C to 27 °C in late July and fall to about 12 °C by mid
    /// November; rain is frequent in spring and autumn and sparse in July.
    /// It only mimics the shape of a Mediterranean coastal season.
    pub fn synthetic_season(days: usize) -> Self {
        let daily_temps = (0..days)
            .map(|d| {
                let x = 2.0 * std::f64::consts::PI * (d as f64 - 80.0) / 365.0;
                ((16.0 + 11.0 * x.cos()) * 10.0).round() / 10.0
            })
            .collect();
        let mut rainfalls = Vec::new();
        let mut d = 2;
        while d < days {
            let (gap, heavy) = match d {
                0..=50 => (4, d % 12 == 2),
                51..=100 => (7, false),
                _ => (5, d % 15 == 0),
            };
            let level = if heavy { RainLevel::Heavy } else { RainLevel::Light };
            rainfalls.push((d as f64 + 0.5, level));
            d += gap;
        }
        ClimateSchedule {
            daily_temps,
            rainfalls,
            sunrise: 0.25,
            sunset: 0.8,
        }
    }
}

/// Temperature offset above `mtd`, clamped at zero and rounded to 1e-9.
pub fn temp_offset(temp_c: f64, mtd: f64) -> f64 {
    ((temp_c - mtd).max(0.0) * 1e9).round() / 1e9
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialPopulation {
    /// Adults at cycle 1 without blood meals.
    pub adults: u64,
    /// Occupants of every container.
    pub per_container: Vec<(MosquitoPhase, u64)>,
}

impl InitialPopulation {
    /// 4 adults; 6 eggs, 2 first, 1 second and 1 third instar per container.
    pub fn field_survey() -> Self {
        InitialPopulation {
            adults: 4,
            per_container: vec![
                (MosquitoPhase::Egg, 6),
                (MosquitoPhase::Larva(1), 2),
                (MosquitoPhase::Larva(2), 1),
                (MosquitoPhase::Larva(3), 1),
            ],
        }
    }

    pub fn none() -> Self {
        InitialPopulation {
            adults: 0,
            per_container: Vec::new(),
        }
    }
}

pub fn bundled_rules() -> Result<Vec<RewriteRule>, AedesError> {
    Ok(parse_model(MODEL)?)
}

fn sym_term(s: &str) -> Term {
    Term::symbol(&Symbol::new(s).expect("valid symbol"))
}

/// Initial state: `{En}<Daylight; Temp>[adults | containers]`.
pub fn initial_term(specs: &[ContainerSpec], pop: &InitialPopulation, env_temp: f64) -> Term {
    let mut items = Vec::new();
    if pop.adults > 0 {
        items.push((MosquitoPhase::Adult { cycle: 1, blood: 0 }.individual(), pop.adults));
    }
    let content = canonicalize(pop.per_container.iter().map(|(p, n)| (p.individual(), *n)));
    for s in specs {
        items.push((NonParallel::looping(sym_term("C"), s.info(), content.clone()), 1));
    }
    let info = EnvInfo::new()
        .with("Daylight", Value::Bool(false))
        .and_then(|i| i.with("Temp", Value::Real(env_temp)))
        .expect("valid names");
    Term::single(NonParallel::looping(sym_term("En"), info, canonicalize(items)), 1)
}

fn validate_specs(specs: &[ContainerSpec]) -> Result<(), AedesError> {
    let n = specs.len() as u32;
    for (k, s) in specs.iter().enumerate() {
        if s.ind == 0 || s.ind > n || specs[..k].iter().any(|o| o.ind == s.ind) {
            return Err(AedesError::InvalidSpec(format!("container index {} must be unique in 1..={n}", s.ind)));
        }
        if !(s.phi[0] < s.phi[1] && s.phi[1] < s.phi[2]) || s.phi[0] == 0 {
            return Err(AedesError::InvalidSpec(format!("container {}: thresholds must satisfy 0 < p1 < p2 < p3", s.ind)));
        }
        if !(s.dtime > 0.0 && s.dtime.is_finite()) {
            return Err(AedesError::InvalidSpec(format!("container {}: DTime must be positive", s.ind)));
        }
        if !(s.initial_temp >= 0.0 && s.initial_temp.is_finite()) {
            return Err(AedesError::InvalidSpec(format!("container {}: temperature offset must be nonnegative", s.ind)));
        }
    }
    Ok(())
}

/// Builds the complete model: initial state, the 29 rules and the event list
/// (daily temperatures at midnight, sunrise and sunset, rainfalls, and one
/// desiccation per container at its DTime).
pub fn build_ecosystem(
    specs: &[ContainerSpec],
    tables: &StageTables,
    climate: &ClimateSchedule,
    pop: &InitialPopulation,
) -> Result<Ecosystem, AedesError> {
    tables.validate()?;
    validate_specs(specs)?;
    if !(0.0 < climate.sunrise && climate.sunrise < climate.sunset && climate.sunset < 1.0) {
        return Err(AedesError::InvalidSpec("need 0 < sunrise < sunset < 1".into()));
    }
    let mut events = EventList::new().with_priority(&EVENT_PRIORITY);
    let token = |s: &str| Value::Token(s.to_string());
    for (day, t) in climate.daily_temps.iter().enumerate() {
        if !t.is_finite() {
            return Err(AedesError::InvalidSpec(format!("temperature of day {day} is not finite")));
        }
        let d = day as f64;
        events.schedule(ExternalEvent::new("Temp", Value::Real(temp_offset(*t, tables.mtd)), d));
        events.schedule(ExternalEvent::new("Light", token("sunrise"), d + climate.sunrise));
        events.schedule(ExternalEvent::new("Light", token("sunset"), d + climate.sunset));
    }
    for (t, level) in &climate.rainfalls {
        if !(*t >= 0.0 && t.is_finite()) {
            return Err(AedesError::InvalidSpec(format!("rain time {t} is invalid")));
        }
        events.schedule(ExternalEvent::new("Rain", token(level.token()), *t));
    }
    for s in specs {
        events.schedule(ExternalEvent::new("Desic", Value::Int(s.ind as i64), s.dtime));
    }
    let env_temp = specs.first().map(|s| s.initial_temp).unwrap_or(0.0);
    let term = initial_term(specs, pop, env_temp);
    Ok(Ecosystem::new(term, bundled_rules()?, events)?)
}

fn env_index(term: &Term) -> Result<usize, AedesError> {
    term.items()
        .iter()
        .position(|(np, _)| np.as_loop().is_some_and(|l| l.wall == sym_term("En")))
        .ok_or(AedesError::NoEnvironment)
}

/// Rebuilds the environment loop after `f` edits its information and the
/// information of its containers.
fn edit_env<F>(term: &Term, f: F) -> Result<Term, AedesError>
where
    F: FnOnce(&mut EnvInfo, &mut [(EnvInfo, &Term)]) -> Result<(), AedesError>,
{
    let idx = env_index(term)?;
    let mut items = term.items().to_vec();
    let NonParallel::Loop(env) = &items[idx].0 else { unreachable!() };
    let c_wall = sym_term("C");
    let mut others = Vec::new();
    let mut containers: Vec<(EnvInfo, &Term, u64)> = Vec::new();
    for (np, m) in env.content.items() {
        match np.as_loop() {
            Some(l) if l.wall == c_wall => containers.push((l.info.clone(), &l.content, *m)),
            _ => others.push((np.clone(), *m)),
        }
    }
    let mut info = env.info.clone();
    let mut view: Vec<(EnvInfo, &Term)> = containers.iter().map(|(i, c, _)| (i.clone(), *c)).collect();
    f(&mut info, &mut view)?;
    for ((i, c), (_, _, m)) in view.into_iter().zip(&containers) {
        others.push((NonParallel::looping(c_wall.clone(), i, c.clone()), *m));
    }
    let wall = env.wall.clone();
    items[idx].0 = NonParallel::looping(wall, info, canonicalize(others));
    Ok(canonicalize(items))
}

fn set(info: &mut EnvInfo, name: &str, v: Value) {
    info.0.insert(Symbol::new(name).expect("valid name"), v);
}

fn bad_value(e: &ExternalEvent) -> AedesError {
    AedesError::BadValue {
        event: e.name.clone(),
        value: e.value.to_string(),
    }
}

/// Applies one external event to the state and the pending events.
pub fn handle_event(e: &ExternalEvent, term: &Term, events: &mut EventList) -> Result<Term, AedesError> {
    let now = e.time;
    match e.name.as_str() {
        "Light" => {
            let day = match e.value.as_token() {
                Some("sunrise") => true,
                Some("sunset") => false,
                _ => return Err(bad_value(e)),
            };
            edit_env(term, |env, _| {
                set(env, "Daylight", Value::Bool(day));
                Ok(())
            })
        }
        "Temp" => {
            let t = e.value.as_f64().filter(|t| t.is_finite()).ok_or_else(|| bad_value(e))?;
            edit_env(term, |env, cs| {
                set(env, "Temp", Value::Real(t));
                for (info, _) in cs.iter_mut() {
                    set(info, "Temp", Value::Real(t));
                }
                Ok(())
            })
        }
        "Desic" => {
            let i = e.value.as_i64().ok_or_else(|| bad_value(e))?;
            edit_env(term, |_, cs| {
                let (info, _) = cs
                    .iter_mut()
                    .find(|(info, _)| info.get("ind").and_then(Value::as_i64) == Some(i))
                    .ok_or(AedesError::UnknownContainer(i))?;
                let vol = info_volume(info)?;
                if vol == Volume::Empty {
                    return Ok(());
                }
                let lowered = vol.lower();
                set(info, "Vol", lowered.value());
                if lowered != Volume::Empty {
                    let dt = info_f64(info, "DTime")?;
                    events.schedule(ExternalEvent::new("Desic", Value::Int(i), now + dt));
                }
                Ok(())
            })
        }
        "Rain" => {
            let heavy = match e.value.as_token() {
                Some("heavy") => true,
                Some("light") => false,
                _ => return Err(bad_value(e)),
            };
            edit_env(term, |_, cs| {
                events.cancel(|x| x.name == "Desic");
                let mut resched = Vec::new();
                for (info, _) in cs.iter_mut() {
                    let vol = info_volume(info)?;
                    let v = if heavy { Volume::Full } else { vol.raise() };
                    set(info, "Vol", v.value());
                    let ind = info.get("ind").and_then(Value::as_i64).ok_or(AedesError::MissingInfo("ind".into()))?;
                    resched.push((ind, info_f64(info, "DTime")?));
                }
                resched.sort_by_key(|(ind, _)| *ind);
                for (ind, dt) in resched {
                    events.schedule(ExternalEvent::new("Desic", Value::Int(ind), now + dt));
                }
                Ok(())
            })
        }
        other => Err(AedesError::UnknownEvent(other.to_string())),
    }
}

/// Event handler for the mosquito model.
#[derive(Debug, Clone, Copy, Default)]
pub struct AedesHandler;

impl EventHandler for AedesHandler {
    fn handle(&mut self, e: &ExternalEvent, term: &Term, events: &mut EventList) -> Result<Term, SimError> {
        handle_event(e, term, events).map_err(|err| SimError::Handler {
            name: e.name.clone(),
            time: e.time,
            message: err.to_string(),
        })
    }
}

/// Counts of individuals by phase, and container volumes by index.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Census {
    pub eggs: u64,
    pub larvae: [u64; 4],
    pub pupae: u64,
    pub adults: [u64; 8],
    pub volumes: Vec<(i64, Volume)>,
    pub temp: f64,
    pub daylight: bool,
}

impl Census {
    pub fn adults_total(&self) -> u64 {
        self.adults.iter().sum()
    }

    pub fn immature_total(&self) -> u64 {
        self.eggs + self.larvae.iter().sum::<u64>() + self.pupae
    }

    fn add(&mut self, p: MosquitoPhase, m: u64) {
        match p {
            MosquitoPhase::Egg => self.eggs += m,
            MosquitoPhase::Larva(k) => self.larvae[k as usize - 1] += m,
            MosquitoPhase::Pupa => self.pupae += m,
            MosquitoPhase::Adult { cycle, .. } => self.adults[cycle as usize - 1] += m,
        }
    }
}

pub fn census(term: &Term) -> Census {
    let mut c = Census::default();
    let Ok(idx) = env_index(term) else { return c };
    let env = term.items()[idx].0.as_loop().expect("environment loop");
    c.temp = env.info.get("Temp").and_then(Value::as_f64).unwrap_or(0.0);
    c.daylight = env.info.get("Daylight").and_then(Value::as_bool).unwrap_or(false);
    for (np, m) in env.content.items() {
        let Some(l) = np.as_loop() else { continue };
        if let Some(p) = MosquitoPhase::from_loop(l) {
            c.add(p, *m);
        } else if l.wall == sym_term("C") {
            for (inner, k) in l.content.items() {
                if let Some(p) = inner.as_loop().and_then(MosquitoPhase::from_loop) {
                    c.add(p, k * m);
                }
            }
            let ind = l.info.get("ind").and_then(Value::as_i64).unwrap_or(0);
            if let Ok(v) = info_volume(&l.info) {
                c.volumes.push((ind, v));
            }
        }
    }
    c.volumes.sort();
    c
}
