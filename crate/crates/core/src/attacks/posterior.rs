//! Posterior over hidden test labels given the recommendation order.
//!
//! With a uniform prior the posterior is proportional to the product of the
//! per-recommendation likelihood factors. Small test sets are enumerated
//! exactly. Larger ones are split into clusters of at most `z` positions; each
//! cluster gets its own joint table in which labels outside the cluster are
//! marginalised under independent fair-coin priors.

use rand::seq::index::sample;
use rand::Rng;

use super::likelihood::{selection_likelihood, Factor, FactorGraph, RsModel};
use crate::error::{Error, Result};
use crate::recsys::{k_nearest, sample_index};
use crate::types::{LabelVector, TestFeatures};

/// Largest number of labels enumerated jointly.
pub const MAX_ENUMERATION: usize = 20;

/// A factor is marginalised exactly when it reads at most this many labels
/// outside the cluster; otherwise the predicted-positive count is replaced by
/// its conditional expectation.
pub const EXACT_OUTSIDE_LIMIT: usize = 10;

/// Joint distribution over the labels of one cluster. Bit `j` of a table
/// index is the label of `members[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterTable {
    pub members: Vec<usize>,
    pub probs: Vec<f64>,
}

impl ClusterTable {
    /// Probability that each member is labeled 1.
    pub fn marginals(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.members.len()];
        for (a, p) in self.probs.iter().enumerate() {
            for (j, m) in out.iter_mut().enumerate() {
                if a >> j & 1 == 1 {
                    *m += p;
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorModel {
    n_test: usize,
    clusters: Vec<ClusterTable>,
}

impl PosteriorModel {
    pub fn new(n_test: usize, clusters: Vec<ClusterTable>) -> Result<Self> {
        let mut seen = vec![false; n_test];
        for c in &clusters {
            if c.probs.len() != 1usize << c.members.len() {
                return Err(Error::InvalidArgument("cluster table has the wrong size".into()));
            }
            for &m in &c.members {
                if m >= n_test || std::mem::replace(&mut seen[m], true) {
                    return Err(Error::InvalidArgument(format!("position {m} is not in exactly one cluster")));
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidArgument("clusters do not cover every position".into()));
        }
        Ok(Self { n_test, clusters })
    }

    /// Every label independent and fair.
    pub fn uniform(n_test: usize) -> Self {
        let clusters = (0..n_test)
            .map(|m| ClusterTable {
                members: vec![m],
                probs: vec![0.5, 0.5],
            })
            .collect();
        Self { n_test, clusters }
    }

    pub fn n_test(&self) -> usize {
        self.n_test
    }

    pub fn clusters(&self) -> &[ClusterTable] {
        &self.clusters
    }

    /// Probability that each position is labeled 1.
    pub fn marginals(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_test];
        for c in &self.clusters {
            for (m, p) in c.members.iter().zip(c.marginals()) {
                out[*m] = p;
            }
        }
        out
    }

    /// Draws a label vector, clusters independently.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> LabelVector {
        let mut v = vec![false; self.n_test];
        for c in &self.clusters {
            let a = sample_index(&c.probs, rng);
            for (j, &m) in c.members.iter().enumerate() {
                v[m] = a >> j & 1 == 1;
            }
        }
        v.into()
    }
}

fn normalize(weights: &mut [f64]) {
    let total: f64 = weights.iter().sum();
    if total > 0.0 && total.is_finite() {
        weights.iter_mut().for_each(|w| *w /= total);
    } else {
        // Every hypothesis ruled out: the assumed model cannot explain the
        // order at all, so fall back to the prior.
        let p = 1.0 / weights.len() as f64;
        weights.iter_mut().for_each(|w| *w = p);
    }
}

/// Exact posterior over all `2^n_test` label vectors.
pub fn exact_posterior(model: &RsModel, x: &TestFeatures) -> Result<PosteriorModel> {
    if x.len() > MAX_ENUMERATION {
        return Err(Error::EnumerationTooLarge {
            n_test: x.len(),
            limit: MAX_ENUMERATION,
        });
    }
    let graph = FactorGraph::build(model, x)?;
    exact_from_graph(&graph)
}

pub fn exact_from_graph(graph: &FactorGraph) -> Result<PosteriorModel> {
    let n = graph.n();
    if n > MAX_ENUMERATION {
        return Err(Error::EnumerationTooLarge {
            n_test: n,
            limit: MAX_ENUMERATION,
        });
    }
    let members: Vec<usize> = (0..n).collect();
    let probs = cluster_table(graph, &members);
    PosteriorModel::new(n, vec![ClusterTable { members, probs }])
}

/// Splits the test positions into groups of `z`, seeding each group with a
/// random remaining position and filling it with that position's nearest
/// earlier neighbors (`neighbor_k` of them) that are still unassigned, then
/// with random unassigned positions if the neighbors run short.
pub fn cluster_test_set<R: Rng + ?Sized>(
    x: &TestFeatures,
    z: usize,
    neighbor_k: usize,
    rng: &mut R,
) -> Result<Vec<Vec<usize>>> {
    if z == 0 {
        return Err(Error::InvalidArgument("cluster size must be at least 1".into()));
    }
    let n = x.len();
    let mut pool: Vec<usize> = (0..n).collect();
    let mut in_pool = vec![true; n];
    let mut clusters = Vec::with_capacity(n.div_ceil(z));
    let take = |pool: &mut Vec<usize>, in_pool: &mut [bool], m: usize| {
        let at = pool.iter().position(|&q| q == m).expect("member of pool");
        pool.swap_remove(at);
        in_pool[m] = false;
    };
    while !pool.is_empty() {
        let seed = pool[rng.gen_range(0..pool.len())];
        take(&mut pool, &mut in_pool, seed);
        let mut cluster = vec![seed];
        let candidates: Vec<usize> = k_nearest(
            neighbor_k,
            &x.users[seed],
            &x.items[seed],
            (0..seed).map(|q| (q, x.users[q].as_slice(), x.items[q].as_slice())),
        )
        .into_iter()
        .filter(|&q| in_pool[q])
        .collect();
        let wanted = (z - 1).min(candidates.len());
        for s in sample(rng, candidates.len(), wanted) {
            cluster.push(candidates[s]);
        }
        for &q in &cluster[1..] {
            take(&mut pool, &mut in_pool, q);
        }
        while cluster.len() < z && !pool.is_empty() {
            let q = pool[rng.gen_range(0..pool.len())];
            take(&mut pool, &mut in_pool, q);
            cluster.push(q);
        }
        cluster.sort_unstable();
        clusters.push(cluster);
    }
    Ok(clusters)
}

/// Posterior as a product of independent per-cluster tables.
pub fn approximate_posterior<R: Rng + ?Sized>(
    model: &RsModel,
    x: &TestFeatures,
    z: usize,
    neighbor_k: usize,
    rng: &mut R,
) -> Result<PosteriorModel> {
    if z == 0 || z > MAX_ENUMERATION {
        return Err(Error::InvalidArgument(format!(
            "cluster size {z} must be in 1..={MAX_ENUMERATION}"
        )));
    }
    let graph = FactorGraph::build(model, x)?;
    let clusters = cluster_test_set(x, z, neighbor_k, rng)?;
    posterior_for_clusters(&graph, clusters)
}

pub fn posterior_for_clusters(graph: &FactorGraph, clusters: Vec<Vec<usize>>) -> Result<PosteriorModel> {
    let tables = clusters
        .into_iter()
        .map(|members| {
            let probs = cluster_table(graph, &members);
            ClusterTable { members, probs }
        })
        .collect();
    PosteriorModel::new(graph.n(), tables)
}

/// Normalised joint table for `members` (sorted, at most `MAX_ENUMERATION`).
fn cluster_table(graph: &FactorGraph, members: &[usize]) -> Vec<f64> {
    let n = graph.n();
    let mut local = vec![usize::MAX; n];
    for (j, &m) in members.iter().enumerate() {
        local[m] = j;
    }
    let size = 1usize << members.len();
    let mut log_weights = vec![0.0f64; size];
    for f in &graph.factors {
        if f.cold || !f.scope.iter().any(|&q| local[q] != usize::MAX) {
            continue;
        }
        let inside: Vec<usize> = f.scope.iter().copied().filter(|&q| local[q] != usize::MAX).collect();
        let table = marginal_factor(graph, f, &inside, &local);
        for (a, w) in log_weights.iter_mut().enumerate() {
            let idx = inside
                .iter()
                .enumerate()
                .fold(0usize, |acc, (b, &q)| acc | ((a >> local[q] & 1) << b));
            *w += table[idx].ln();
        }
    }
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = if max.is_finite() {
        log_weights.iter().map(|w| (w - max).exp()).collect()
    } else {
        vec![0.0; size]
    };
    normalize(&mut probs);
    probs
}

/// The factor's value for each assignment of its in-cluster positions
/// (bit `b` is `inside[b]`), averaged over fair-coin labels elsewhere.
fn marginal_factor(graph: &FactorGraph, f: &Factor, inside: &[usize], local: &[usize]) -> Vec<f64> {
    let outside: Vec<usize> = f.scope.iter().copied().filter(|&q| local[q] == usize::MAX).collect();
    let mut labels = vec![false; graph.n()];
    let mut out = vec![0.0; 1 << inside.len()];
    if outside.len() <= EXACT_OUTSIDE_LIMIT {
        let weight = 1.0 / (1u64 << outside.len()) as f64;
        for (a, slot) in out.iter_mut().enumerate() {
            assign(&mut labels, inside, a);
            let mut acc = 0.0;
            for o in 0..1usize << outside.len() {
                assign(&mut labels, &outside, o);
                acc += f.likelihood(&graph.model, &labels);
            }
            *slot = acc * weight;
        }
        return out;
    }

    // Too many outside labels: enumerate the ones feeding the target's own
    // vote and use the expected number of predicted-positive items.
    let mut known = vec![false; graph.n()];
    inside.iter().for_each(|&q| known[q] = true);
    let target_out: Vec<usize> = f.target.iter().copied().filter(|&q| local[q] == usize::MAX).collect();
    target_out.iter().for_each(|&q| known[q] = true);
    let (static_groups, dynamic_groups): (Vec<_>, Vec<_>) = f
        .groups
        .iter()
        .partition(|g| g.positions.iter().all(|&q| !known[q]));
    let static_plus: f64 = static_groups
        .iter()
        .map(|g| g.count as f64 * prob_majority(0, g.positions.len(), g.positions.len()))
        .sum();
    let weight = 1.0 / (1u64 << target_out.len()) as f64;
    let n_items = graph.model.catalog.len();
    for (a, slot) in out.iter_mut().enumerate() {
        assign(&mut labels, inside, a);
        let mut acc = 0.0;
        for o in 0..1usize << target_out.len() {
            assign(&mut labels, &target_out, o);
            let expected_plus = static_plus
                + dynamic_groups
                    .iter()
                    .map(|g| {
                        let (ones, unknown) = g.positions.iter().fold((0, 0), |(ones, unk), &q| {
                            if known[q] {
                                (ones + labels[q] as usize, unk)
                            } else {
                                (ones, unk + 1)
                            }
                        });
                        g.count as f64 * prob_majority(ones, unknown, g.positions.len())
                    })
                    .sum::<f64>();
            let target_ones = f.target.iter().filter(|&&q| labels[q]).count();
            let target_positive = 2 * target_ones >= f.target.len();
            acc += selection_likelihood(graph.model.exploration, n_items, expected_plus, target_positive);
        }
        *slot = acc * weight;
    }
    out
}

fn assign(labels: &mut [bool], positions: &[usize], bits: usize) {
    for (b, &q) in positions.iter().enumerate() {
        labels[q] = bits >> b & 1 == 1;
    }
}

/// Probability that a vote of `len` labels, `known_ones` of them fixed to 1
/// and `unknown` of them fair coins, has a majority of ones (ties count as 1).
fn prob_majority(known_ones: usize, unknown: usize, len: usize) -> f64 {
    let need = len.div_ceil(2);
    if known_ones >= need {
        return 1.0;
    }
    let extra = need - known_ones;
    if extra > unknown {
        return 0.0;
    }
    let mut comb = 1.0f64;
    let mut tail = 0.0;
    for j in 0..=unknown {
        if j >= extra {
            tail += comb;
        }
        comb = comb * (unknown - j) as f64 / (j + 1) as f64;
    }
    tail / 2f64.powi(unknown as i32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    fn random_features(n: usize, seed: u64) -> (RsModel, TestFeatures) {
        let mut rng = RngStream::new(seed, 0).rng();
        let catalog: Vec<Vec<f64>> = (0..8).map(|_| vec![rng.gen(), rng.gen()]).collect();
        let mut x = TestFeatures::default();
        for t in 0..n {
            x.users.push(vec![rng.gen(), rng.gen()]);
            x.items.push(catalog[rng.gen_range(0..catalog.len())].clone());
            x.times.push(t as u64 + 1);
        }
        (RsModel::new(1, 0.1, catalog).unwrap(), x)
    }

    #[test]
    fn binomial_tail() {
        assert_eq!(prob_majority(2, 0, 3), 1.0);
        assert_eq!(prob_majority(0, 1, 3), 0.0);
        assert!((prob_majority(1, 2, 3) - 0.75).abs() < 1e-15);
        assert!((prob_majority(0, 3, 3) - 0.5).abs() < 1e-15);
        // Ties count as ones: P(Bin(2, .5) >= 1).
        assert!((prob_majority(0, 2, 2) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn single_label_is_uninformative() {
        let (model, x) = random_features(1, 1);
        let post = exact_posterior(&model, &x).unwrap();
        assert_eq!(post.clusters()[0].probs, vec![0.5, 0.5]);
    }

    #[test]
    fn exploration_one_gives_uniform() {
        let (mut model, x) = random_features(6, 2);
        model.exploration = 1.0;
        let post = exact_posterior(&model, &x).unwrap();
        assert!(post.clusters()[0].probs.iter().all(|&p| (p - 1.0 / 64.0).abs() < 1e-12));
        let approx = approximate_posterior(&model, &x, 2, 1, &mut RngStream::new(0, 0).rng()).unwrap();
        for c in approx.clusters() {
            let u = 1.0 / c.probs.len() as f64;
            assert!(c.probs.iter().all(|&p| (p - u).abs() < 1e-12));
        }
    }

    #[test]
    fn refuses_large_enumeration() {
        let (model, x) = random_features(21, 3);
        assert!(matches!(exact_posterior(&model, &x), Err(Error::EnumerationTooLarge { .. })));
    }

    #[test]
    fn table_normalised_and_nonnegative() {
        let (model, x) = random_features(9, 4);
        let post = exact_posterior(&model, &x).unwrap();
        let probs = &post.clusters()[0].probs;
        assert!(probs.iter().all(|&p| p >= 0.0));
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn full_cluster_equals_exact() {
        let (model, x) = random_features(8, 5);
        let exact = exact_posterior(&model, &x).unwrap();
        let approx = approximate_posterior(&model, &x, 8, 1, &mut RngStream::new(0, 0).rng()).unwrap();
        assert_eq!(approx.clusters().len(), 1);
        for (a, b) in exact.clusters()[0].probs.iter().zip(&approx.clusters()[0].probs) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn clustering_partitions() {
        let (_, x) = random_features(1000, 6);
        let mut rng = RngStream::new(1, 0).rng();
        let clusters = cluster_test_set(&x, 5, 4, &mut rng).unwrap();
        assert_eq!(clusters.len(), 200);
        assert!(clusters.iter().all(|c| c.len() == 5));
        let mut all: Vec<usize> = clusters.concat();
        all.sort_unstable();
        assert_eq!(all, (0..1000).collect::<Vec<_>>());

        let singletons = cluster_test_set(&x, 1, 1, &mut rng).unwrap();
        assert_eq!(singletons.len(), 1000);
        let one = cluster_test_set(&x, 1000, 1, &mut rng).unwrap();
        assert_eq!(one.len(), 1);
        assert!(cluster_test_set(&x, 0, 1, &mut rng).is_err());
    }

    #[test]
    fn sampling_follows_marginals() {
        let (model, x) = random_features(6, 8);
        let post = exact_posterior(&model, &x).unwrap();
        let marg = post.marginals();
        let mut rng = RngStream::new(9, 0).rng();
        let draws = 20_000;
        let mut ones = [0usize; 6];
        for _ in 0..draws {
            for (c, b) in ones.iter_mut().zip(post.sample(&mut rng).iter()) {
                *c += b as usize;
            }
        }
        for (c, m) in ones.iter().zip(marg) {
            let sd = (m * (1.0 - m) / draws as f64).sqrt().max(1e-3);
            assert!((*c as f64 / draws as f64 - m).abs() < 5.0 * sd);
        }
    }

    #[test]
    fn model_validation() {
        let bad = ClusterTable {
            members: vec![0, 0],
            probs: vec![0.25; 4],
        };
        assert!(PosteriorModel::new(2, vec![bad]).is_err());
        let short = ClusterTable {
            members: vec![0],
            probs: vec![0.5, 0.5],
        };
        assert!(PosteriorModel::new(2, vec![short]).is_err());
        assert_eq!(PosteriorModel::uniform(3).marginals(), vec![0.5; 3]);
    }
}
