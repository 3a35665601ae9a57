//! Direct-method stochastic simulation with scheduled external events.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::rules::{fire, Changes, Ecosystem, PropensityTable, RateModel, RewriteRule, RuleError};
use crate::term::{CompartmentAddress, Term, Value};

pub type SimRng = ChaCha8Rng;

/// Identifier of the generator recorded in run metadata.
pub const RNG_ID: &str = "ChaCha8Rng/rand_chacha-0.3/seed_from_u64";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("total propensity must be positive, got {0}")]
    NonPositiveA0(f64),
    #[error("event {name} at {time}: {message}")]
    Handler { name: String, time: f64, message: String },
    #[error(transparent)]
    Rule(#[from] RuleError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExternalEvent {
    pub name: String,
    pub value: Value,
    /// Days; the fractional part is the time of day.
    pub time: f64,
}

impl ExternalEvent {
    pub fn new(name: impl Into<String>, value: Value, time: f64) -> Self {
        ExternalEvent {
            name: name.into(),
            value,
            time,
        }
    }
}

/// Events ordered by time, then by name priority, then by insertion.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventList {
    events: VecDeque<(ExternalEvent, u64)>,
    priority: Vec<String>,
    next_seq: u64,
}

impl EventList {
    pub fn new() -> Self {
        EventList::default()
    }

    /// Sorted copy of `events`, keeping input order among equal times.
    pub fn from_events(events: Vec<ExternalEvent>) -> Self {
        let mut l = EventList::new();
        for e in events {
            l.schedule(e);
        }
        l
    }

    /// Events with equal times are ordered by the position of their name in
    /// `order`; unlisted names come last.
    pub fn with_priority(mut self, order: &[&str]) -> Self {
        self.priority = order.iter().map(|s| s.to_string()).collect();
        let mut v: Vec<_> = self.events.drain(..).collect();
        v.sort_by(|a, b| self.key(&a.0, a.1).partial_cmp(&self.key(&b.0, b.1)).unwrap());
        self.events = v.into();
        self
    }

    fn rank(&self, name: &str) -> usize {
        self.priority.iter().position(|p| p == name).unwrap_or(self.priority.len())
    }

    fn key(&self, e: &ExternalEvent, seq: u64) -> (f64, usize, u64) {
        (e.time, self.rank(&e.name), seq)
    }

    pub fn schedule(&mut self, e: ExternalEvent) {
        let seq = self.next_seq;
        self.next_seq += 1;
        let k = self.key(&e, seq);
        let at = self.events.partition_point(|(x, s)| self.key(x, *s) < k);
        self.events.insert(at, (e, seq));
    }

    /// Removes every event satisfying `pred`.
    pub fn cancel<F: FnMut(&ExternalEvent) -> bool>(&mut self, mut pred: F) {
        self.events.retain(|(e, _)| !pred(e));
    }

    pub fn peek(&self) -> Option<&ExternalEvent> {
        self.events.front().map(|(e, _)| e)
    }

    pub fn pop(&mut self) -> Option<ExternalEvent> {
        self.events.pop_front().map(|(e, _)| e)
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ExternalEvent> {
        self.events.iter().map(|(e, _)| e)
    }
}

/// Reacts to an external event by returning the new state; it may schedule
/// or cancel further events.
pub trait EventHandler {
    fn handle(&mut self, e: &ExternalEvent, term: &Term, events: &mut EventList) -> Result<Term, SimError>;
}

/// Handler for models without external events: any event is an error.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoEvents;

impl EventHandler for NoEvents {
    fn handle(&mut self, e: &ExternalEvent, _term: &Term, _events: &mut EventList) -> Result<Term, SimError> {
        Err(SimError::Handler {
            name: e.name.clone(),
            time: e.time,
            message: "no handler for external events".into(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    MaxTime,
    Extinction,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StepOutcome {
    ReactionFired { rule: String, site: CompartmentAddress },
    EventHandled(ExternalEvent),
    Terminated(Termination),
}

/// Waiting time `ln(1/r1) / a0`.
pub fn tau_from(a0: f64, r1: f64) -> Result<f64, SimError> {
    if !(a0 > 0.0) {
        return Err(SimError::NonPositiveA0(a0));
    }
    Ok((1.0 / r1).ln() / a0)
}

/// Uniform draw on (0, 1].
pub fn unit_open_closed<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.gen::<f64>()
}

pub fn sample_tau<R: Rng + ?Sized>(a0: f64, rng: &mut R) -> Result<f64, SimError> {
    if !(a0 > 0.0) {
        return Err(SimError::NonPositiveA0(a0));
    }
    tau_from(a0, unit_open_closed(rng))
}

pub fn select_rule_and_compartment<R: Rng + ?Sized>(
    table: &PropensityTable,
    rng: &mut R,
) -> Result<(usize, CompartmentAddress), SimError> {
    let a0 = table.total();
    if !(a0 > 0.0) {
        return Err(SimError::NonPositiveA0(a0));
    }
    let target = unit_open_closed(rng) * a0;
    table.locate(target).ok_or(SimError::NonPositiveA0(a0))
}

/// State of one simulation run.
pub struct SimState<M> {
    rules: Vec<RewriteRule>,
    model: M,
    term: Term,
    clock: f64,
    events: EventList,
    rng: SimRng,
    table: PropensityTable,
    verify: bool,
    reactions: u64,
}

impl<M: RateModel> SimState<M> {
    pub fn new(eco: Ecosystem, model: M, seed: u64) -> Result<Self, SimError> {
        let table = PropensityTable::rebuild(&eco.initial, &eco.rules, &model)?;
        Ok(SimState {
            rules: eco.rules,
            model,
            term: eco.initial,
            clock: 0.0,
            events: eco.events,
            rng: SimRng::seed_from_u64(seed),
            table,
            verify: false,
            reactions: 0,
        })
    }

    /// Cross-check the table against a full rebuild after every change.
    pub fn with_verification(mut self, on: bool) -> Self {
        self.verify = on;
        self
    }

    pub fn term(&self) -> &Term {
        &self.term
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn events(&self) -> &EventList {
        &self.events
    }

    pub fn table(&self) -> &PropensityTable {
        &self.table
    }

    pub fn rules(&self) -> &[RewriteRule] {
        &self.rules
    }

    pub fn model(&self) -> &M {
        &self.model
    }

    pub fn reactions(&self) -> u64 {
        self.reactions
    }

    fn replace_term(&mut self, next: Term) -> Result<(), SimError> {
        let changes = Changes::between(&self.term, &next);
        self.table.update(&next, &changes, &self.rules, &self.model)?;
        self.term = next;
        if self.verify {
            self.table.verify(&self.term, &self.rules, &self.model)?;
        }
        Ok(())
    }

    pub fn step(&mut self, maxtime: f64, handler: &mut dyn EventHandler) -> Result<StepOutcome, SimError> {
        self.advance(maxtime, handler, &mut |_, _| {})
    }

    /// One step; `before_jump` sees the time of the coming change and the
    /// state that held until then.
    fn advance(
        &mut self,
        maxtime: f64,
        handler: &mut dyn EventHandler,
        before_jump: &mut dyn FnMut(f64, &Term),
    ) -> Result<StepOutcome, SimError> {
        let a0 = self.table.total();
        if a0 <= 0.0 && self.events.is_empty() {
            return Ok(StepOutcome::Terminated(Termination::Extinction));
        }
        let tau = if a0 > 0.0 {
            sample_tau(a0, &mut self.rng)?
        } else {
            f64::INFINITY
        };
        let next_event = self.events.peek().map(|e| e.time);
        if let Some(te) = next_event.filter(|te| *te < self.clock + tau) {
            if te > maxtime {
                self.clock = self.clock.max(maxtime);
                return Ok(StepOutcome::Terminated(Termination::MaxTime));
            }
            let e = self.events.pop().expect("peeked event");
            self.clock = self.clock.max(te);
            before_jump(self.clock, &self.term);
            let next = handler.handle(&e, &self.term, &mut self.events)?;
            self.replace_term(next)?;
            return Ok(StepOutcome::EventHandled(e));
        }
        let t = self.clock + tau;
        if t > maxtime {
            self.clock = self.clock.max(maxtime);
            return Ok(StepOutcome::Terminated(Termination::MaxTime));
        }
        self.clock = t;
        let (j, site) = select_rule_and_compartment(&self.table, &mut self.rng)?;
        before_jump(self.clock, &self.term);
        let (next, _) = fire(&self.rules[j], &self.term, &site, &self.model, &mut self.rng)?;
        self.replace_term(next)?;
        self.reactions += 1;
        Ok(StepOutcome::ReactionFired {
            rule: self.rules[j].id.clone(),
            site,
        })
    }

    /// Runs to termination, calling `sampler` at every multiple of
    /// `interval` up to `maxtime` with the state holding at that instant.
    pub fn run<T, F>(
        &mut self,
        maxtime: f64,
        interval: f64,
        handler: &mut dyn EventHandler,
        mut sampler: F,
    ) -> Result<Vec<T>, SimError>
    where
        F: FnMut(f64, &Term) -> T,
    {
        assert!(interval > 0.0, "sample interval must be positive");
        let mut out = Vec::new();
        let mut k: u64 = 0;
        let grid = |k: u64| k as f64 * interval;
        while grid(k) < self.clock {
            k += 1;
        }
        loop {
            let outcome = self.advance(maxtime, handler, &mut |s, old| {
                while grid(k) < s && grid(k) <= maxtime {
                    out.push(sampler(grid(k), old));
                    k += 1;
                }
            })?;
            if let StepOutcome::Terminated(_) = outcome {
                while grid(k) <= maxtime {
                    out.push(sampler(grid(k), &self.term));
                    k += 1;
                }
                return Ok(out);
            }
        }
    }
}
