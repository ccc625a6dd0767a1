//! Brute-force reference implementations.
//!
//! Written separately from the optimised paths they check: no shared
//! neighbor search, no precomputed vote groups, no bit masks. Used by the
//! test suites and by the `verify` command.

use crate::types::TestFeatures;

fn dist(u: &[f64], i: &[f64], u2: &[f64], i2: &[f64]) -> f64 {
    let mut d = 0.0;
    for (a, b) in u.iter().zip(u2) {
        d += (a - b) * (a - b);
    }
    let mut e = 0.0;
    for (a, b) in i.iter().zip(i2) {
        e += (a - b) * (a - b);
    }
    d + e
}

/// Indices of the `k` closest points by full sort, ties to the lower index.
pub fn brute_nearest(k: usize, u: &[f64], i: &[f64], users: &[Vec<f64>], items: &[Vec<f64>]) -> Vec<usize> {
    let mut all: Vec<(f64, usize)> = (0..users.len())
        .map(|q| (dist(u, i, &users[q], &items[q]), q))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    all.into_iter().take(k).map(|(_, q)| q).collect()
}

fn knn_label(k: usize, u: &[f64], i: &[f64], users: &[Vec<f64>], items: &[Vec<f64>], labels: &[bool]) -> bool {
    let near = brute_nearest(k, u, i, users, items);
    let ones = near.iter().filter(|&&q| labels[q]).count();
    let zeros = near.len() - ones;
    ones >= zeros
}

/// Probability that the logging recommender picked item `items[m]` for
/// `users[m]`, rebuilt from scratch with the hypothesised labels.
pub fn brute_recommendation_probability(
    k: usize,
    exploration: f64,
    catalog: &[Vec<f64>],
    x: &TestFeatures,
    labels: &[bool],
    m: usize,
) -> f64 {
    let n_items = catalog.len() as f64;
    if m < k {
        return 1.0 / n_items;
    }
    let users = &x.users[..m];
    let items = &x.items[..m];
    let hist = &labels[..m];
    let mut weights = Vec::with_capacity(catalog.len());
    for item in catalog {
        let liked = knn_label(k, &x.users[m], item, users, items, hist);
        weights.push(if liked { 1.0 } else { exploration });
    }
    let total: f64 = weights.iter().sum();
    if total == 0.0 {
        return 1.0 / n_items;
    }
    let liked = knn_label(k, &x.users[m], &x.items[m], users, items, hist);
    (if liked { 1.0 } else { exploration }) / total
}

/// Normalised posterior over every label vector, index bit `m` = label `m`.
pub fn brute_posterior(k: usize, exploration: f64, catalog: &[Vec<f64>], x: &TestFeatures) -> Vec<f64> {
    let n = x.len();
    let mut w: Vec<f64> = (0..1usize << n)
        .map(|a| {
            let labels: Vec<bool> = (0..n).map(|m| a >> m & 1 == 1).collect();
            (0..n)
                .map(|m| brute_recommendation_probability(k, exploration, catalog, x, &labels, m))
                .product::<f64>()
                * 0.5f64.powi(n as i32)
        })
        .collect();
    let total: f64 = w.iter().sum();
    if total > 0.0 {
        w.iter_mut().for_each(|p| *p /= total);
    } else {
        let u = 1.0 / w.len() as f64;
        w.iter_mut().for_each(|p| *p = u);
    }
    w
}

/// Marginal of a full joint table onto the positions in `members`
/// (bit `j` of the result index = label of `members[j]`).
pub fn marginalize(joint: &[f64], members: &[usize]) -> Vec<f64> {
    let mut out = vec![0.0; 1 << members.len()];
    for (a, p) in joint.iter().enumerate() {
        let idx = members
            .iter()
            .enumerate()
            .fold(0usize, |acc, (j, &m)| acc | ((a >> m & 1) << j));
        out[idx] += p;
    }
    out
}

/// Total-variation distance between two distributions on the same support.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}
