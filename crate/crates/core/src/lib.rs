//! Stochastic simulation of compartmentalized looping-sequence terms.
//!
//! Terms are canonical multisets of sequences and loops ([`term`]); rules
//! rewrite them through associative-commutative pattern matching
//! ([`pattern`], [`rules`]); [`ssa`] runs Gillespie's direct method with
//! scheduled external events, and [`aedes`] packages a complete mosquito
//! population model. [`dsl`] reads and writes all of these as text.

pub mod aedes;
pub mod dsl;
pub mod pattern;
pub mod rules;
pub mod ssa;
pub mod term;
