//! Cost functions over assumption sets.
//!
//! Every calculus maps an environment (a *set* of assumptions) to a totally
//! ordered cost that never decreases when assumptions are added. Lower cost
//! means a more plausible explanation.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Uncertainty degrees attached to a cause fault mode or a causation event.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Belief {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probability: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub necessity: Option<f64>,
    /// Parsed and kept, never used for ranking.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub possibility: Option<f64>,
}

impl Belief {
    pub fn probability(p: f64) -> Self {
        Belief { probability: Some(p), ..Belief::default() }
    }

    pub fn necessity(n: f64) -> Self {
        Belief { necessity: Some(n), ..Belief::default() }
    }

    pub fn both(p: f64, n: f64) -> Self {
        Belief { probability: Some(p), necessity: Some(n), possibility: None }
    }

    pub fn certain() -> Self {
        Belief::both(1.0, 1.0)
    }

    /// Degrees of the complementary event: `P[~a] = 1 - P[a]` and
    /// `N[~a] = 1 - Π[a]` (with `Π[a] = 1` when undeclared).
    pub fn negated(&self) -> Belief {
        Belief {
            probability: self.probability.map(|p| 1.0 - p),
            necessity: self.necessity.map(|_| 1.0 - self.possibility.unwrap_or(1.0)),
            possibility: self.necessity.map(|n| 1.0 - n),
        }
    }
}

/// Whether an assumption counts as a not-working cause or as a causation
/// event (including negated causation events).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AtomKind {
    Cause,
    Causation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostAtom {
    pub kind: AtomKind,
    pub belief: Belief,
}

/// Totally ordered cost value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Cost(pub f64);

impl Cost {
    pub const ZERO: Cost = Cost(0.0);
    pub const INFINITY: Cost = Cost(f64::INFINITY);

    pub fn value(self) -> f64 {
        self.0
    }
}

impl Eq for Cost {}

impl PartialOrd for Cost {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Cost {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl fmt::Display for Cost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CostError {
    #[error("assumption has no necessity degree")]
    MissingNecessity,
    #[error("assumption has no prior probability")]
    MissingProbability,
    #[error("probability {0} is outside (0, 1]")]
    ImpossibleProbability(f64),
    #[error("necessity {0} is outside [0, 1]")]
    BadNecessity(f64),
    #[error("unknown calculus `{0}` (expected possibilistic, probabilistic or cardinality)")]
    UnknownCalculus(String),
}

/// Contract the label engine relies on: `evaluate` is monotone under set
/// inclusion and the empty set costs `identity()`.
pub trait CostFunction {
    fn name(&self) -> &'static str;

    /// Rejects atoms this calculus cannot price.
    fn check(&self, atom: &CostAtom) -> Result<(), CostError>;

    fn identity(&self) -> Cost;

    fn evaluate(&self, atoms: &[CostAtom]) -> Cost;

    /// Degree of belief reported for an explanation, when the calculus has one.
    fn belief(&self, atoms: &[CostAtom]) -> Option<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Calculus {
    Possibilistic,
    Probabilistic,
    Cardinality,
}

impl Calculus {
    pub const ALL: [Calculus; 3] = [Calculus::Possibilistic, Calculus::Probabilistic, Calculus::Cardinality];
}

impl FromStr for Calculus {
    type Err = CostError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "possibilistic" => Ok(Calculus::Possibilistic),
            "probabilistic" => Ok(Calculus::Probabilistic),
            "cardinality" => Ok(Calculus::Cardinality),
            other => Err(CostError::UnknownCalculus(other.to_string())),
        }
    }
}

impl fmt::Display for Calculus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn necessity_of(atom: &CostAtom) -> f64 {
    atom.belief.necessity.unwrap_or(0.0)
}

fn probability_of(atom: &CostAtom) -> f64 {
    atom.belief.probability.unwrap_or(0.0)
}

/// `1 - min N`; the empty environment costs 0.
pub fn possibilistic_cost(atoms: &[CostAtom]) -> Cost {
    Cost(atoms.iter().map(|a| 1.0 - necessity_of(a)).fold(0.0, f64::max))
}

/// `sum(-ln p)`, added in ascending order so the result does not depend on
/// the order of the atoms.
pub fn probabilistic_cost(atoms: &[CostAtom]) -> Cost {
    let mut terms: Vec<f64> = atoms.iter().map(|a| 0.0 - probability_of(a).ln()).collect();
    terms.sort_by(f64::total_cmp);
    Cost(terms.into_iter().sum::<f64>().max(0.0))
}

/// Number of cause assumptions; causation events are free.
pub fn cardinality_cost(atoms: &[CostAtom]) -> Cost {
    Cost(atoms.iter().filter(|a| a.kind == AtomKind::Cause).count() as f64)
}

impl CostFunction for Calculus {
    fn name(&self) -> &'static str {
        match self {
            Calculus::Possibilistic => "possibilistic",
            Calculus::Probabilistic => "probabilistic",
            Calculus::Cardinality => "cardinality",
        }
    }

    fn check(&self, atom: &CostAtom) -> Result<(), CostError> {
        match self {
            Calculus::Possibilistic => match atom.belief.necessity {
                None => Err(CostError::MissingNecessity),
                Some(n) if !(0.0..=1.0).contains(&n) => Err(CostError::BadNecessity(n)),
                Some(_) => Ok(()),
            },
            Calculus::Probabilistic => match atom.belief.probability {
                None => Err(CostError::MissingProbability),
                Some(p) if !(p > 0.0 && p <= 1.0) => Err(CostError::ImpossibleProbability(p)),
                Some(_) => Ok(()),
            },
            Calculus::Cardinality => Ok(()),
        }
    }

    fn identity(&self) -> Cost {
        Cost::ZERO
    }

    fn evaluate(&self, atoms: &[CostAtom]) -> Cost {
        match self {
            Calculus::Possibilistic => possibilistic_cost(atoms),
            Calculus::Probabilistic => probabilistic_cost(atoms),
            Calculus::Cardinality => cardinality_cost(atoms),
        }
    }

    fn belief(&self, atoms: &[CostAtom]) -> Option<f64> {
        match self {
            Calculus::Possibilistic => Some(atoms.iter().map(necessity_of).fold(1.0, f64::min)),
            // exact product, independent of the log-domain cost
            Calculus::Probabilistic => Some(atoms.iter().map(probability_of).product()),
            Calculus::Cardinality => None,
        }
    }
}
