//! The classic boosting attack: submit uniform random vectors, keep the ones
//! that beat both chance and every earlier report, majority-vote the keepers.

use rand::Rng;

use super::{Attacker, AttackerKind, Submission};
use crate::error::Result;
use crate::evaluators::Oracle;
use crate::risk::majority_of_counts;
use crate::rng::StreamRng;
use crate::types::LabelVector;

/// Chance-level risk on a balanced test set.
pub const CHANCE: f64 = 0.5;

/// Informative vectors and their running per-position vote counts.
#[derive(Debug, Clone, PartialEq)]
pub struct InformativeSet {
    ones: Vec<usize>,
    size: usize,
    best: f64,
}

impl InformativeSet {
    pub fn new(n_test: usize) -> Self {
        Self {
            ones: vec![0; n_test],
            size: 0,
            best: f64::INFINITY,
        }
    }

    /// Adds `query` when `reported` is below chance and strictly below every
    /// earlier report. Returns whether it was added.
    pub fn consider(&mut self, query: &LabelVector, reported: f64) -> bool {
        let informative = reported < CHANCE && reported < self.best;
        self.best = self.best.min(reported);
        if informative {
            for (c, b) in self.ones.iter_mut().zip(query.iter()) {
                *c += b as usize;
            }
            self.size += 1;
        }
        informative
    }

    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    pub fn best_seen(&self) -> f64 {
        self.best
    }

    /// Elementwise majority of the informative vectors, or `None` if empty.
    pub fn majority(&self) -> Option<LabelVector> {
        (self.size > 0).then(|| {
            self.ones
                .iter()
                .map(|&c| majority_of_counts(c, self.size))
                .collect()
        })
    }
}

pub fn uniform_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> LabelVector {
    (0..n).map(|_| rng.gen::<bool>()).collect()
}

#[derive(Debug, Clone)]
pub struct Boost {
    n_test: usize,
    informative: InformativeSet,
}

impl Boost {
    pub fn new(n_test: usize) -> Self {
        Self {
            n_test,
            informative: InformativeSet::new(n_test),
        }
    }

    pub fn informative(&self) -> &InformativeSet {
        &self.informative
    }
}

impl Attacker for Boost {
    fn kind(&self) -> AttackerKind {
        AttackerKind::Boost
    }

    fn step(&mut self, oracle: &mut dyn Oracle, rng: &mut StreamRng) -> Result<Submission> {
        let query = uniform_vector(self.n_test, rng);
        let reported = oracle.submit(&query)?;
        self.informative.consider(&query, reported);
        Ok(Submission { query, reported })
    }

    /// Majority of the informative set; a fresh uniform vector while it is empty.
    fn prediction(&self, rng: &mut StreamRng) -> LabelVector {
        self.informative
            .majority()
            .unwrap_or_else(|| uniform_vector(self.n_test, rng))
    }
}
