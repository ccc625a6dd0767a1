//! Self-checks shared by the `verify` command and the acceptance suite:
//! optimised posterior against the brute-force oracle, and the mechanism
//! invariants on random submission streams.

use rand::Rng;

use crate::attacks::{exact_posterior, RsModel};
use crate::error::Result;
use crate::evaluators::{KaggleEvaluator, LadderEvaluator, Oracle, KAGGLE_PRECISION};
use crate::oracle::brute_posterior;
use crate::recsys::KnnRecommender;
use crate::rng::{RngStream, StreamRng};
use crate::risk::empirical_risk;
use crate::synthgen::{simulate, GroundTruth};
use crate::types::{LabelVector, TestFeatures};

/// A small test set produced by a known k-NN logging recommender.
#[derive(Debug, Clone)]
pub struct PlantedInstance {
    pub k: usize,
    pub exploration: f64,
    pub catalog: Vec<Vec<f64>>,
    pub features: TestFeatures,
    pub labels: LabelVector,
}

fn point(dim: usize, grid: bool, rng: &mut StreamRng) -> Vec<f64> {
    // Grid points make distance ties common, which exercises tie-breaking.
    (0..dim)
        .map(|_| if grid { rng.gen_range(0..3) as f64 } else { rng.gen() })
        .collect()
}

/// Draws instance `index` of a reproducible family: n_test in 1..=max_n,
/// k in 1..=3, exploration from {0, 0.1, 0.5, 1}, half of them on a grid.
pub fn planted_instance(seed: u64, index: u64, max_n: usize) -> Result<PlantedInstance> {
    let mut rng = RngStream::new(seed, index).rng();
    let grid = index % 2 == 1;
    let (du, di) = (rng.gen_range(1..=2), rng.gen_range(1..=2));
    let n_items = rng.gen_range(2..=6);
    let catalog: Vec<Vec<f64>> = (0..n_items).map(|_| point(di, grid, &mut rng)).collect();
    let n_centers = rng.gen_range(2..=6);
    let centers: Vec<_> = (0..n_centers)
        .map(|_| (point(du, grid, &mut rng), point(di, grid, &mut rng)))
        .collect();
    let center_labels: Vec<bool> = (0..n_centers).map(|c| c % 2 == 0).collect();
    let truth = GroundTruth::new(centers, center_labels, 1)?;
    let k = rng.gen_range(1..=3);
    let exploration = [0.0, 0.1, 0.5, 1.0][rng.gen_range(0..4)];
    let n = rng.gen_range(1..=max_n);
    let mut logging = KnnRecommender::new(k, exploration, catalog.clone())?;
    let ds = simulate(&truth, &mut logging, n, |r| point(du, grid, r), &mut rng)?;
    Ok(PlantedInstance {
        k,
        exploration,
        catalog,
        features: ds.test_features(),
        labels: ds.test_labels(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorCheck {
    pub instances: usize,
    pub max_abs_diff: f64,
}

/// Compares every entry of the exact posterior table with the oracle.
pub fn check_exact_posterior(seed: u64, instances: usize, max_n: usize) -> Result<PosteriorCheck> {
    let mut max_abs_diff: f64 = 0.0;
    for index in 0..instances as u64 {
        let inst = planted_instance(seed, index, max_n)?;
        let model = RsModel::new(inst.k, inst.exploration, inst.catalog.clone())?;
        let post = exact_posterior(&model, &inst.features)?;
        let table = &post.clusters()[0].probs;
        let reference = brute_posterior(inst.k, inst.exploration, &inst.catalog, &inst.features);
        for (a, b) in table.iter().zip(&reference) {
            max_abs_diff = max_abs_diff.max((a - b).abs());
        }
        if table.len() != reference.len() {
            max_abs_diff = f64::INFINITY;
        }
    }
    Ok(PosteriorCheck {
        instances,
        max_abs_diff,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MechanismCheck {
    pub streams: usize,
    pub ladder_violations: usize,
    pub kaggle_max_error: f64,
}

/// Random label/query streams against both mechanisms. Queries are random
/// flips of the previous one so reports hover near each other.
pub fn check_mechanisms(seed: u64, streams: usize, n: usize, queries: usize) -> Result<MechanismCheck> {
    let mut ladder_violations = 0;
    let mut kaggle_max_error: f64 = 0.0;
    for s in 0..streams as u64 {
        let mut rng = RngStream::new(seed, s).rng();
        let hidden: LabelVector = (0..n).map(|_| rng.gen()).collect();
        let step = [0.001, 0.01, 0.05][rng.gen_range(0..3)];
        let mut ladder = LadderEvaluator::new(hidden.clone(), step)?;
        let mut kaggle = KaggleEvaluator::new(hidden.clone(), KAGGLE_PRECISION)?;
        let mut q: Vec<bool> = (0..n).map(|_| rng.gen()).collect();
        let mut prev = f64::INFINITY;
        for _ in 0..queries {
            let flip = rng.gen_range(0..n);
            q[flip] = !q[flip];
            let query = LabelVector::new(q.clone());
            let r = ladder.submit(&query)?;
            if r > prev {
                ladder_violations += 1;
            }
            prev = r;
            let k = kaggle.submit(&query)?;
            kaggle_max_error = kaggle_max_error.max((k - empirical_risk(&query, &hidden)?).abs());
        }
    }
    Ok(MechanismCheck {
        streams,
        ladder_violations,
        kaggle_max_error,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HoeffdingCheck {
    pub queries: usize,
    pub far: usize,
    pub threshold: f64,
}

impl HoeffdingCheck {
    pub fn fraction(&self) -> f64 {
        self.far as f64 / self.queries as f64
    }
}

/// Non-adaptive random queries on i.i.d. labels: how many reports land
/// further than `threshold` from 0.5.
pub fn check_hoeffding(seed: u64, n: usize, queries: usize, threshold: f64) -> Result<HoeffdingCheck> {
    let mut rng = RngStream::new(seed, 0).rng();
    let hidden: LabelVector = (0..n).map(|_| rng.gen()).collect();
    let mut ev = KaggleEvaluator::new(hidden, KAGGLE_PRECISION)?;
    let mut far = 0;
    for _ in 0..queries {
        let q: LabelVector = (0..n).map(|_| rng.gen()).collect();
        if (ev.submit(&q)? - 0.5).abs() > threshold {
            far += 1;
        }
    }
    Ok(HoeffdingCheck {
        queries,
        far,
        threshold,
    })
}
