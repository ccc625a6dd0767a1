//! Query-generating attackers.
//!
//! Attackers see the test features and the evaluator's scalar reports, never
//! the training data or the hidden labels.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::evaluators::Oracle;
use crate::rng::StreamRng;
use crate::types::LabelVector;

pub mod boost;
pub mod likelihood;
pub mod posterior;
pub mod postboost;
pub mod wboost;

pub use boost::{Boost, InformativeSet};
pub use likelihood::{recommendation_likelihood, FactorGraph, RsModel};
pub use posterior::{approximate_posterior, cluster_test_set, exact_posterior, PosteriorModel};
pub use postboost::PostBoost;
pub use wboost::WBoost;

/// One query and the report it received.
#[derive(Debug, Clone, PartialEq)]
pub struct Submission {
    pub query: LabelVector,
    pub reported: f64,
}

pub trait Attacker: Send {
    fn kind(&self) -> AttackerKind;

    /// Builds the next query, submits it and learns from the report.
    fn step(&mut self, oracle: &mut dyn Oracle, rng: &mut StreamRng) -> Result<Submission>;

    /// The attacker's current best guess of the hidden labels. `rng` is only
    /// drawn from when the attacker has nothing to go on yet.
    fn prediction(&self, rng: &mut StreamRng) -> LabelVector;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AttackerKind {
    Boost,
    WBoost,
    PostBoost,
    PostBoostApprox,
}

impl AttackerKind {
    pub const ALL: [AttackerKind; 4] = [
        AttackerKind::Boost,
        AttackerKind::WBoost,
        AttackerKind::PostBoost,
        AttackerKind::PostBoostApprox,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AttackerKind::Boost => "boost",
            AttackerKind::WBoost => "wboost",
            AttackerKind::PostBoost => "postboost",
            AttackerKind::PostBoostApprox => "postboost-approx",
        }
    }
}

impl fmt::Display for AttackerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AttackerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown attacker {s:?}")))
    }
}
