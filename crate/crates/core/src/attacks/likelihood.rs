//! Likelihood of the observed recommendation order under a hypothesised
//! label vector, for an assumed k-NN logging recommender.
//!
//! Which earlier test positions feed each recommendation does not depend on
//! the labels, so the neighbor sets are computed once per test set and each
//! likelihood evaluation reduces to majority votes over bit masks.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::recsys::{k_nearest, pair_distance, TopK};
use crate::risk::majority_of_counts;
use crate::types::{LabelVector, TestFeatures};

/// The attacker's picture of the logging recommender.
#[derive(Debug, Clone, PartialEq)]
pub struct RsModel {
    pub k: usize,
    pub exploration: f64,
    pub catalog: Vec<Vec<f64>>,
}

impl RsModel {
    pub fn new(k: usize, exploration: f64, catalog: Vec<Vec<f64>>) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("assumed k must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&exploration) {
            return Err(Error::InvalidArgument(format!(
                "assumed exploration {exploration} outside [0, 1]"
            )));
        }
        if catalog.is_empty() {
            return Err(Error::InvalidArgument("empty catalog".into()));
        }
        Ok(Self {
            k,
            exploration,
            catalog,
        })
    }
}

/// A set of earlier positions whose majority label decides one prediction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoteGroup {
    pub positions: Vec<usize>,
    /// Catalog items whose prediction is decided by this group.
    pub count: usize,
}

/// One recommendation's likelihood factor.
#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    pub position: usize,
    /// Fewer than k earlier test positions: the recommendation was uniform.
    pub cold: bool,
    /// Neighbors of the recommended pair itself.
    pub target: Vec<usize>,
    /// Neighbor sets of every catalog item for this user, deduplicated.
    pub groups: Vec<VoteGroup>,
    /// Sorted union of every position the factor reads.
    pub scope: Vec<usize>,
}

fn vote(labels: &[bool], positions: &[usize]) -> bool {
    let ones = positions.iter().filter(|&&p| labels[p]).count();
    majority_of_counts(ones, positions.len())
}

impl Factor {
    /// Selection probability: weight 1 or `exploration`, over the weighted size of
    /// the predicted-positive and predicted-negative item sets.
    pub fn likelihood(&self, model: &RsModel, labels: &[bool]) -> f64 {
        let n_items = model.catalog.len();
        if self.cold {
            return 1.0 / n_items as f64;
        }
        let n_plus: usize = self
            .groups
            .iter()
            .filter(|g| vote(labels, &g.positions))
            .map(|g| g.count)
            .sum();
        selection_likelihood(model.exploration, n_items, n_plus as f64, vote(labels, &self.target))
    }
}

/// Probability of picking one particular item given the expected number of
/// predicted positives and that item's own prediction. Falls back to uniform
/// when no item carries weight.
#[inline]
pub(crate) fn selection_likelihood(exploration: f64, n_items: usize, n_plus: f64, target_positive: bool) -> f64 {
    let n_minus = n_items as f64 - n_plus;
    let total = exploration * n_minus + n_plus;
    if total <= 0.0 {
        return 1.0 / n_items as f64;
    }
    if target_positive {
        1.0 / total
    } else {
        exploration / total
    }
}

/// Label-independent neighbor structure of a whole test set.
#[derive(Debug, Clone)]
pub struct FactorGraph {
    pub model: RsModel,
    pub factors: Vec<Factor>,
}

impl FactorGraph {
    pub fn build(model: &RsModel, x: &TestFeatures) -> Result<Self> {
        let factors = (0..x.len()).map(|p| build_factor(model, x, p)).collect::<Result<_>>()?;
        Ok(Self {
            model: model.clone(),
            factors,
        })
    }

    pub fn n(&self) -> usize {
        self.factors.len()
    }

    /// Product of every factor under `labels`.
    pub fn joint_likelihood(&self, labels: &[bool]) -> f64 {
        self.factors
            .iter()
            .map(|f| f.likelihood(&self.model, labels))
            .product()
    }
}

fn build_factor(model: &RsModel, x: &TestFeatures, p: usize) -> Result<Factor> {
    let (u, i) = (&x.users[p], &x.items[p]);
    if p < model.k {
        return Ok(Factor {
            position: p,
            cold: true,
            target: Vec::new(),
            groups: Vec::new(),
            scope: Vec::new(),
        });
    }
    let earlier = |q: usize| (q, x.users[q].as_slice(), x.items[q].as_slice());
    let target = k_nearest(model.k, u, i, (0..p).map(earlier));

    // Neighbor sets of each catalog item for this user. The user part of the
    // distance is shared across items.
    let user_dist: Vec<f64> = (0..p)
        .map(|q| pair_distance(u, &[], &x.users[q], &[]))
        .collect();
    let mut groups: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
    for item in &model.catalog {
        let mut top = TopK::new(model.k);
        for q in 0..p {
            top.offer(user_dist[q] + pair_distance(&[], item, &[], &x.items[q]), q);
        }
        let mut set = top.into_ids();
        set.sort_unstable();
        *groups.entry(set).or_default() += 1;
    }
    let groups: Vec<VoteGroup> = groups
        .into_iter()
        .map(|(positions, count)| VoteGroup { positions, count })
        .collect();
    let mut scope: Vec<usize> = target
        .iter()
        .copied()
        .chain(groups.iter().flat_map(|g| g.positions.iter().copied()))
        .collect();
    scope.sort_unstable();
    scope.dedup();
    Ok(Factor {
        position: p,
        cold: false,
        target,
        groups,
        scope,
    })
}

/// Likelihood that the recommendation at test position `position` (0 is the
/// earliest) was made, given hypothesised labels for the earlier positions.
pub fn recommendation_likelihood(
    model: &RsModel,
    x: &TestFeatures,
    labels: &LabelVector,
    position: usize,
) -> Result<f64> {
    if labels.len() != x.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            actual: labels.len(),
        });
    }
    if position >= x.len() {
        return Err(Error::InvalidArgument(format!("position {position} out of range")));
    }
    let f = build_factor(model, x, position)?;
    Ok(f.likelihood(model, labels.as_slice()))
}
