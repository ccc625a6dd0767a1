//! Posterior boosting: the boosting attack with queries drawn from the
//! posterior over test labels instead of the uniform distribution.

use super::boost::InformativeSet;
use super::posterior::PosteriorModel;
use super::{Attacker, AttackerKind, Submission};
use crate::error::Result;
use crate::evaluators::Oracle;
use crate::rng::StreamRng;
use crate::types::LabelVector;

#[derive(Debug, Clone)]
pub struct PostBoost {
    kind: AttackerKind,
    posterior: PosteriorModel,
    informative: InformativeSet,
}

impl PostBoost {
    pub fn new(posterior: PosteriorModel, approximate: bool) -> Self {
        let n = posterior.n_test();
        Self {
            kind: if approximate {
                AttackerKind::PostBoostApprox
            } else {
                AttackerKind::PostBoost
            },
            posterior,
            informative: InformativeSet::new(n),
        }
    }

    pub fn posterior(&self) -> &PosteriorModel {
        &self.posterior
    }

    pub fn informative(&self) -> &InformativeSet {
        &self.informative
    }
}

impl Attacker for PostBoost {
    fn kind(&self) -> AttackerKind {
        self.kind
    }

    fn step(&mut self, oracle: &mut dyn Oracle, rng: &mut StreamRng) -> Result<Submission> {
        let query = self.posterior.sample(rng);
        let reported = oracle.submit(&query)?;
        self.informative.consider(&query, reported);
        Ok(Submission { query, reported })
    }

    /// Majority of the informative set; a posterior draw while it is empty.
    fn prediction(&self, rng: &mut StreamRng) -> LabelVector {
        self.informative
            .majority()
            .unwrap_or_else(|| self.posterior.sample(rng))
    }
}
