//! The k-NN logging recommender.
//!
//! The recommender predicts like/dislike for a (user, item) pair by majority
//! vote over the k nearest previously observed pairs, then samples an item so
//! that predicted-negative items are weighted by `exploration` relative to
//! predicted-positive ones.

use std::collections::HashSet;

use rand::Rng;

use crate::error::{Error, Result};
use crate::risk::majority_of_counts;
use crate::types::Interaction;

/// Squared distance between two (user, item) pairs: user part plus item part.
#[inline]
pub fn pair_distance(u: &[f64], i: &[f64], u2: &[f64], i2: &[f64]) -> f64 {
    sq_norm_diff(u, u2) + sq_norm_diff(i, i2)
}

#[inline]
pub fn sq_norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Keeps the `k` smallest `(distance, id)` pairs seen so far, ordered by
/// distance then id.
#[derive(Debug, Clone)]
pub struct TopK {
    k: usize,
    best: Vec<(f64, usize)>,
}

impl TopK {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            best: Vec::with_capacity(k + 1),
        }
    }

    #[inline]
    pub fn offer(&mut self, dist: f64, id: usize) {
        if self.best.len() == self.k {
            let (worst_d, worst_id) = self.best[self.k - 1];
            if dist > worst_d || (dist == worst_d && id >= worst_id) {
                return;
            }
            self.best.pop();
        }
        let pos = self
            .best
            .iter()
            .position(|&(d, j)| dist < d || (dist == d && id < j))
            .unwrap_or(self.best.len());
        self.best.insert(pos, (dist, id));
    }

    pub fn len(&self) -> usize {
        self.best.len()
    }

    pub fn is_empty(&self) -> bool {
        self.best.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.best.iter().map(|&(_, id)| id)
    }

    pub fn into_ids(self) -> Vec<usize> {
        self.best.into_iter().map(|(_, id)| id).collect()
    }
}

/// Ids of the `k` points nearest to `(u, i)`, nearest first. Equal distances
/// go to the smaller id. Returns fewer than `k` ids if there are fewer points.
pub fn k_nearest<'a, P>(k: usize, u: &[f64], i: &[f64], points: P) -> Vec<usize>
where
    P: IntoIterator<Item = (usize, &'a [f64], &'a [f64])>,
{
    let mut top = TopK::new(k);
    for (id, pu, pi) in points {
        top.offer(pair_distance(u, i, pu, pi), id);
    }
    top.into_ids()
}

/// Per-item selection probabilities for a catalog split into predicted
/// positives (`positive[j] == true`) and negatives.
///
/// Positives get weight 1 and negatives weight `exploration`; if every
/// weight is zero the distribution falls back to uniform.
pub fn selection_probabilities(positive: &[bool], exploration: f64) -> Vec<f64> {
    let n_plus = positive.iter().filter(|&&p| p).count();
    let n_minus = positive.len() - n_plus;
    let total = exploration * n_minus as f64 + n_plus as f64;
    if total <= 0.0 {
        let p = 1.0 / positive.len() as f64;
        return vec![p; positive.len()];
    }
    positive
        .iter()
        .map(|&p| if p { 1.0 / total } else { exploration / total })
        .collect()
}

#[derive(Debug, Clone)]
pub struct KnnRecommender {
    k: usize,
    exploration: f64,
    catalog: Vec<Vec<f64>>,
    history: Vec<Interaction>,
    /// `item_dist[h][j]`: squared item distance from history entry `h` to catalog item `j`.
    item_dist: Vec<Vec<f64>>,
    no_repeat: bool,
    shown: HashSet<(Vec<u64>, usize)>,
}

impl KnnRecommender {
    pub fn new(k: usize, exploration: f64, catalog: Vec<Vec<f64>>) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&exploration) {
            return Err(Error::InvalidArgument(format!(
                "exploration {exploration} outside [0, 1]"
            )));
        }
        if catalog.is_empty() {
            return Err(Error::InvalidArgument("empty item catalog".into()));
        }
        Ok(Self {
            k,
            exploration,
            catalog,
            history: Vec::new(),
            item_dist: Vec::new(),
            no_repeat: false,
            shown: HashSet::new(),
        })
    }

    /// Never recommend the same catalog item twice to the same user vector.
    pub fn with_no_repeat(mut self, on: bool) -> Self {
        self.no_repeat = on;
        self
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn exploration(&self) -> f64 {
        self.exploration
    }

    pub fn catalog(&self) -> &[Vec<f64>] {
        &self.catalog
    }

    pub fn history(&self) -> &[Interaction] {
        &self.history
    }

    /// Number of history entries observed strictly before time `m`.
    fn prior_count(&self, m: u64) -> usize {
        self.history.partition_point(|x| x.time < m)
    }

    /// Time stamps of the `k` nearest observations made before time `m`,
    /// or `None` when fewer than `k` exist (cold start).
    pub fn neighbors(&self, u: &[f64], i: &[f64], m: u64) -> Option<Vec<u64>> {
        let prior = &self.history[..self.prior_count(m)];
        if prior.len() < self.k {
            return None;
        }
        let ids = k_nearest(
            self.k,
            u,
            i,
            prior
                .iter()
                .enumerate()
                .map(|(h, x)| (h, x.user.as_slice(), x.item.as_slice())),
        );
        Some(ids.into_iter().map(|h| prior[h].time).collect())
    }

    /// Majority label of the neighbors of `(u, i)` at time `m`; `None` on cold start.
    pub fn classify(&self, u: &[f64], i: &[f64], m: u64) -> Option<bool> {
        let prior = &self.history[..self.prior_count(m)];
        if prior.len() < self.k {
            return None;
        }
        let mut top = TopK::new(self.k);
        for (h, x) in prior.iter().enumerate() {
            top.offer(pair_distance(u, i, &x.user, &x.item), h);
        }
        let ones = top.ids().filter(|&h| prior[h].label).count();
        Some(majority_of_counts(ones, self.k))
    }

    /// Predicted label of every catalog item for user `u` at time `m`.
    pub fn classify_catalog(&self, u: &[f64], m: u64) -> Option<Vec<bool>> {
        let n_prior = self.prior_count(m);
        if n_prior < self.k {
            return None;
        }
        let user_dist: Vec<f64> = self.history[..n_prior]
            .iter()
            .map(|x| sq_norm_diff(u, &x.user))
            .collect();
        let mut out = Vec::with_capacity(self.catalog.len());
        for j in 0..self.catalog.len() {
            let ones = if self.k == 1 {
                let mut best = (f64::INFINITY, 0usize);
                for (h, du) in user_dist.iter().enumerate() {
                    let d = du + self.item_dist[h][j];
                    if d < best.0 {
                        best = (d, h);
                    }
                }
                self.history[best.1].label as usize
            } else {
                let mut top = TopK::new(self.k);
                for (h, du) in user_dist.iter().enumerate() {
                    top.offer(du + self.item_dist[h][j], h);
                }
                top.ids().filter(|&h| self.history[h].label).count()
            };
            out.push(majority_of_counts(ones, self.k));
        }
        Some(out)
    }

    /// Probability of recommending each catalog item to `u` at time `m`.
    pub fn item_probabilities(&self, u: &[f64], m: u64) -> Vec<f64> {
        let n = self.catalog.len();
        let mut probs = match self.classify_catalog(u, m) {
            Some(positive) => selection_probabilities(&positive, self.exploration),
            None => vec![1.0 / n as f64; n],
        };
        if self.no_repeat {
            let key = user_key(u);
            let blocked: Vec<bool> = (0..n)
                .map(|j| self.shown.contains(&(key.clone(), j)))
                .collect();
            let kept: f64 = probs
                .iter()
                .zip(&blocked)
                .filter(|(_, &b)| !b)
                .map(|(p, _)| p)
                .sum();
            if kept > 0.0 {
                for (p, b) in probs.iter_mut().zip(&blocked) {
                    *p = if *b { 0.0 } else { *p / kept };
                }
            }
        }
        probs
    }

    /// Samples a catalog index for user `u` at time `m`.
    pub fn recommend<R: Rng + ?Sized>(&mut self, u: &[f64], m: u64, rng: &mut R) -> usize {
        let probs = self.item_probabilities(u, m);
        let j = sample_index(&probs, rng);
        if self.no_repeat {
            self.shown.insert((user_key(u), j));
        }
        j
    }

    /// Appends an observation. Its time must exceed every earlier time.
    pub fn observe(&mut self, x: Interaction) -> Result<()> {
        if let Some(last) = self.history.last() {
            if x.time <= last.time {
                return Err(Error::InvalidArgument(format!(
                    "observation at time {} does not follow time {}",
                    x.time, last.time
                )));
            }
        }
        self.item_dist.push(
            self.catalog
                .iter()
                .map(|c| sq_norm_diff(&x.item, c))
                .collect(),
        );
        self.history.push(x);
        Ok(())
    }
}

fn user_key(u: &[f64]) -> Vec<u64> {
    u.iter().map(|x| x.to_bits()).collect()
}

/// Inverse-CDF draw from a discrete distribution.
pub fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let total: f64 = probs.iter().sum();
    let target = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    for (j, p) in probs.iter().enumerate() {
        acc += p;
        if target < acc {
            return j;
        }
    }
    // Rounding can leave `target` at the very top; take the last nonzero entry.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}
