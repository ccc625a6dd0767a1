//! Synthetic feedback worlds and the logging simulation loop.
//!
//! A world is a set of labeled (user, item) centers plus an item catalog.
//! True feedback for any pair is the majority label of its nearest centers.
//! A k-NN logging recommender then serves random users one item at a time,
//! and the observed labels form a chronologically ordered dataset.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::kvfile::KvFile;
use crate::recsys::{k_nearest, KnnRecommender};
use crate::rng::{Role, RngStream};
use crate::risk::majority_of_counts;
use crate::types::{Interaction, SequentialDataset, Split};

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    centers: Vec<(Vec<f64>, Vec<f64>)>,
    labels: Vec<bool>,
    k: usize,
}

impl GroundTruth {
    pub fn new(centers: Vec<(Vec<f64>, Vec<f64>)>, labels: Vec<bool>, k: usize) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::InvalidArgument("ground truth needs at least one center".into()));
        }
        if centers.len() != labels.len() {
            return Err(Error::LengthMismatch {
                expected: centers.len(),
                actual: labels.len(),
            });
        }
        if k == 0 || k > centers.len() {
            return Err(Error::InvalidArgument(format!(
                "k* = {k} must be in 1..={}",
                centers.len()
            )));
        }
        Ok(Self { centers, labels, k })
    }

    pub fn centers(&self) -> &[(Vec<f64>, Vec<f64>)] {
        &self.centers
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Majority label of the `k` nearest centers.
    pub fn feedback(&self, u: &[f64], i: &[f64]) -> bool {
        let near = k_nearest(
            self.k,
            u,
            i,
            self.centers
                .iter()
                .enumerate()
                .map(|(l, (cu, ci))| (l, cu.as_slice(), ci.as_slice())),
        );
        let ones = near.iter().filter(|&&l| self.labels[l]).count();
        majority_of_counts(ones, self.k)
    }
}

/// Geometry of a random world. Coordinates are uniform on the unit cube.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldConfig {
    pub user_dim: usize,
    pub item_dim: usize,
    pub n_items: usize,
    pub n_centers: usize,
    pub k_star: usize,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            user_dim: 2,
            item_dim: 2,
            n_items: 100,
            n_centers: 50,
            k_star: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct World {
    pub truth: GroundTruth,
    pub catalog: Vec<Vec<f64>>,
    pub user_dim: usize,
}

fn unit_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    (0..dim).map(|_| rng.gen::<f64>()).collect()
}

impl World {
    /// Draws centers with balanced labels (the odd one out is positive) and
    /// a fixed item catalog.
    pub fn random<R: Rng + ?Sized>(cfg: &WorldConfig, rng: &mut R) -> Result<Self> {
        if cfg.n_centers < 2 {
            return Err(Error::InvalidArgument("need at least two centers so both labels appear".into()));
        }
        if cfg.n_items == 0 {
            return Err(Error::InvalidArgument("empty catalog".into()));
        }
        let centers: Vec<_> = (0..cfg.n_centers)
            .map(|_| (unit_vector(cfg.user_dim, rng), unit_vector(cfg.item_dim, rng)))
            .collect();
        let mut labels: Vec<bool> = (0..cfg.n_centers).map(|l| l < cfg.n_centers.div_ceil(2)).collect();
        labels.shuffle(rng);
        let catalog = (0..cfg.n_items)
            .map(|_| unit_vector(cfg.item_dim, rng))
            .collect();
        Ok(Self {
            truth: GroundTruth::new(centers, labels, cfg.k_star)?,
            catalog,
            user_dim: cfg.user_dim,
        })
    }

    pub fn sample_user<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        unit_vector(self.user_dim, rng)
    }
}

/// Runs the logging loop for `n` steps: draw a user, recommend, label with
/// the ground truth, feed the label back. Every interaction starts in the
/// test pool.
pub fn simulate<R, F>(
    truth: &GroundTruth,
    logging: &mut KnnRecommender,
    n: usize,
    mut user_sampler: F,
    rng: &mut R,
) -> Result<SequentialDataset>
where
    R: Rng + ?Sized,
    F: FnMut(&mut R) -> Vec<f64>,
{
    if n == 0 {
        return Err(Error::InvalidArgument("simulate needs n >= 1".into()));
    }
    let start = logging.history().last().map_or(0, |x| x.time);
    let mut out = Vec::with_capacity(n);
    for step in 1..=n as u64 {
        let m = start + step;
        let user = user_sampler(rng);
        let j = logging.recommend(&user, m, rng);
        let item = logging.catalog()[j].clone();
        let label = truth.feedback(&user, &item);
        let x = Interaction {
            user,
            item,
            time: m,
            label,
        };
        logging.observe(x.clone())?;
        out.push(x);
    }
    SequentialDataset::all_test(out)
}

/// Keeps each test-pool interaction in the pool with probability `fraction`;
/// the others become training data.
pub fn hold_out<R: Rng + ?Sized>(
    ds: SequentialDataset,
    fraction: f64,
    rng: &mut R,
) -> Result<SequentialDataset> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidArgument(format!("test fraction {fraction} outside [0, 1]")));
    }
    let (xs, splits) = ds.into_parts();
    let splits = splits
        .into_iter()
        .map(|s| match s {
            Split::Test if rng.gen::<f64>() >= fraction => Split::Train,
            s => s,
        })
        .collect();
    SequentialDataset::new(xs, splits)
}

/// Downsamples the test pool to `n_test` interactions, half of each label,
/// keeping chronological order. Dropped test samples leave the dataset;
/// training samples are untouched.
pub fn balance_test_split<R: Rng + ?Sized>(
    ds: SequentialDataset,
    n_test: usize,
    rng: &mut R,
) -> Result<SequentialDataset> {
    if n_test == 0 || n_test % 2 == 1 {
        return Err(Error::InvalidArgument(format!(
            "balanced test size must be even and positive, got {n_test}"
        )));
    }
    let half = n_test / 2;
    let (pos, neg): (Vec<usize>, Vec<usize>) = ds
        .iter()
        .enumerate()
        .filter(|(_, (_, s))| *s == Split::Test)
        .map(|(idx, (x, _))| (idx, x.label))
        .fold((Vec::new(), Vec::new()), |(mut p, mut n), (idx, label)| {
            if label {
                p.push(idx)
            } else {
                n.push(idx)
            }
            (p, n)
        });
    if pos.len() < half || neg.len() < half {
        return Err(Error::InsufficientLabels {
            needed: half,
            positives: pos.len(),
            negatives: neg.len(),
        });
    }
    let mut keep = vec![false; ds.len()];
    for group in [&pos, &neg] {
        for s in sample(rng, group.len(), half) {
            keep[group[s]] = true;
        }
    }
    let (xs, splits) = ds.into_parts();
    let (xs, splits): (Vec<_>, Vec<_>) = xs
        .into_iter()
        .zip(splits)
        .enumerate()
        .filter(|(idx, (_, s))| *s == Split::Train || keep[*idx])
        .map(|(_, pair)| pair)
        .unzip();
    SequentialDataset::new(xs, splits)
}

/// Everything needed to generate one synthetic dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub world: WorldConfig,
    pub logging_k: usize,
    pub exploration: f64,
    /// Interactions simulated before the test set is carved out.
    pub n_sim: usize,
    /// Probability that a simulated interaction enters the test pool.
    pub test_fraction: f64,
    pub n_test: usize,
    pub no_repeat: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            world: WorldConfig::default(),
            logging_k: 1,
            exploration: 0.1,
            n_sim: 3000,
            test_fraction: 1.0,
            n_test: 1000,
            no_repeat: false,
        }
    }
}

impl SynthConfig {
    pub fn to_kv(&self, kv: &mut KvFile) {
        kv.set("user_dim", self.world.user_dim);
        kv.set("item_dim", self.world.item_dim);
        kv.set("n_items", self.world.n_items);
        kv.set("n_centers", self.world.n_centers);
        kv.set("k_star", self.world.k_star);
        kv.set("logging_k", self.logging_k);
        kv.set("exploration", self.exploration);
        kv.set("n_sim", self.n_sim);
        kv.set("test_fraction", self.test_fraction);
        kv.set("n_test", self.n_test);
        kv.set("no_repeat", self.no_repeat);
    }

    /// Reads any keys present in `kv` over the current values.
    pub fn update_from_kv(&mut self, kv: &KvFile) -> Result<()> {
        macro_rules! take {
            ($key:literal, $field:expr) => {
                if let Some(v) = kv.get_parsed($key)? {
                    $field = v;
                }
            };
        }
        take!("user_dim", self.world.user_dim);
        take!("item_dim", self.world.item_dim);
        take!("n_items", self.world.n_items);
        take!("n_centers", self.world.n_centers);
        take!("k_star", self.world.k_star);
        take!("logging_k", self.logging_k);
        take!("exploration", self.exploration);
        take!("n_sim", self.n_sim);
        take!("test_fraction", self.test_fraction);
        take!("n_test", self.n_test);
        take!("no_repeat", self.no_repeat);
        Ok(())
    }
}

/// A generated world and the balanced dataset it produced.
#[derive(Debug, Clone)]
pub struct SynthData {
    pub world: World,
    pub dataset: SequentialDataset,
}

/// Builds world, simulation and balanced test split for one trial, each
/// from its own stream.
pub fn generate(cfg: &SynthConfig, master_seed: u64, trial: u64) -> Result<SynthData> {
    let world = World::random(&cfg.world, &mut RngStream::derive(master_seed, trial, Role::World).rng())?;
    let mut logging = KnnRecommender::new(cfg.logging_k, cfg.exploration, world.catalog.clone())?
        .with_no_repeat(cfg.no_repeat);
    let mut sim_rng = RngStream::derive(master_seed, trial, Role::Simulation).rng();
    let raw = simulate(
        &world.truth,
        &mut logging,
        cfg.n_sim,
        |r| world.sample_user(r),
        &mut sim_rng,
    )?;
    let mut split_rng = RngStream::derive(master_seed, trial, Role::Split).rng();
    let pooled = hold_out(raw, cfg.test_fraction, &mut split_rng)?;
    let dataset = balance_test_split(pooled, cfg.n_test, &mut split_rng)?;
    Ok(SynthData { world, dataset })
}

/// Writes the canonical dataset CSV:
/// `time,split,label,u_0..u_{du-1},i_0..i_{di-1}`.
pub fn write_dataset_csv<W: Write>(out: &mut W, ds: &SequentialDataset) -> std::io::Result<()> {
    let mut header = String::from("time,split,label");
    for j in 0..ds.user_dim() {
        header.push_str(&format!(",u_{j}"));
    }
    for j in 0..ds.item_dim() {
        header.push_str(&format!(",i_{j}"));
    }
    writeln!(out, "{header}")?;
    for (x, split) in ds.iter() {
        write!(out, "{},{},{}", x.time, split.as_str(), x.label as u8)?;
        for v in x.user.iter().chain(&x.item) {
            write!(out, ",{v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn save_dataset(path: &Path, ds: &SequentialDataset) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_dataset_csv(&mut w, ds)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn load_dataset(path: &Path) -> Result<SequentialDataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "empty file"))?
        .map_err(|e| Error::io(path, e))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 3 || cols[..3] != ["time", "split", "label"] {
        return Err(Error::parse(path, 1, "header must start with time,split,label"));
    }
    let du = cols.iter().filter(|c| c.starts_with("u_")).count();
    let di = cols.iter().filter(|c| c.starts_with("i_")).count();
    if du + di + 3 != cols.len() {
        return Err(Error::parse(path, 1, "unexpected columns"));
    }
    let mut xs = Vec::new();
    let mut splits = Vec::new();
    for (n, line) in lines.enumerate() {
        let line_no = n + 2;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != cols.len() {
            return Err(Error::parse(path, line_no, format!("expected {} fields, found {}", cols.len(), f.len())));
        }
        let bad = |what: &str| Error::parse(path, line_no, format!("bad {what}"));
        let time = f[0].parse().map_err(|_| bad("time"))?;
        let split: Split = f[1].parse().map_err(|_| bad("split"))?;
        let label = match f[2] {
            "0" => false,
            "1" => true,
            _ => return Err(bad("label")),
        };
        let nums: Vec<f64> = f[3..]
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad("feature value"))?;
        xs.push(Interaction {
            user: nums[..du].to_vec(),
            item: nums[du..].to_vec(),
            time,
            label,
        });
        splits.push(split);
    }
    SequentialDataset::new(xs, splits)
}

/// Writes `<csv>.config` recording how a synthetic dataset was generated.
pub fn write_sidecar(csv_path: &Path, cfg: &SynthConfig, master_seed: u64, trial: u64) -> Result<()> {
    let mut kv = KvFile::new();
    kv.set("source", "synthetic");
    kv.set("seed", master_seed);
    kv.set("trial", trial);
    cfg.to_kv(&mut kv);
    kv.write(&sidecar_path(csv_path))
}

pub fn sidecar_path(csv_path: &Path) -> std::path::PathBuf {
    let mut name = csv_path.as_os_str().to_owned();
    name.push(".config");
    name.into()
}
