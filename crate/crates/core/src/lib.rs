//! Temporal abductive fault correlation.
//!
//! A functional model of units, ports and fault states ([`model`]) compiles
//! to covering rules with propagation delays ([`theory`]). Observed symptom
//! times are explained by cost-bounded label propagation ([`engine`],
//! [`explain`]) over interval constraints ([`temporal`]) under a pluggable
//! belief calculus ([`calculi`]). [`sim`] provides a seeded forward
//! simulator and an exhaustive reference oracle; [`cli`] the model language
//! and command-line driver.

pub mod calculi;
pub mod cli;
pub mod engine;
pub mod explain;
pub mod model;
pub mod sim;
pub mod temporal;
pub mod theory;
