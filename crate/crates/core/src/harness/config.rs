//! Experiment configuration and its flat `key = value` form.
//!
//! Keys:
//!
//! | key | meaning |
//! |-----|---------|
//! | `source` | `synthetic` or `ml100k` |
//! | `n_test` | balanced test-set size |
//! | `user_dim`, `item_dim`, `n_items`, `n_centers`, `k_star` | synthetic world geometry |
//! | `logging_k`, `exploration`, `n_sim`, `test_fraction`, `no_repeat` | synthetic logging run |
//! | `ml100k_dir`, `split`, `one_hot_occupation` | MovieLens source |
//! | `mechanism`, `eta` | `kaggle` or `ladder`, and its rounding step |
//! | `attacker` | `boost`, `wboost`, `postboost`, `postboost-approx` |
//! | `window`, `alpha` | window-boosting parameters |
//! | `z`, `cluster_k` | cluster size and clustering neighborhood |
//! | `assumed_k`, `assumed_exploration` | attacker's model of the logging recommender |
//! | `queries`, `repetitions`, `seed`, `labels`, `jobs` | run control |

use std::path::PathBuf;
use std::str::FromStr;

use crate::attacks::AttackerKind;
use crate::error::{Error, Result};
use crate::evaluators::{MechanismKind, KAGGLE_PRECISION};
use crate::kvfile::KvFile;
use crate::synthgen::SynthConfig;

pub const DEFAULT_LADDER_STEP: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Synthetic(SynthConfig),
    Ml100k {
        dir: PathBuf,
        split: String,
        n_test: usize,
        one_hot_occupation: bool,
    },
}

impl DataSource {
    pub fn n_test(&self) -> usize {
        match self {
            DataSource::Synthetic(s) => s.n_test,
            DataSource::Ml100k { n_test, .. } => *n_test,
        }
    }
}

/// Which labels the evaluator hides.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelMode {
    /// The dataset's own labels.
    Observed,
    /// Fresh fair coin flips, unrelated to the features or their order.
    CoinFlip,
}

impl FromStr for LabelMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "observed" => Ok(Self::Observed),
            "coin-flip" => Ok(Self::CoinFlip),
            other => Err(Error::Config(format!("unknown label mode {other:?}"))),
        }
    }
}

impl LabelMode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Observed => "observed",
            Self::CoinFlip => "coin-flip",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackerParams {
    pub kind: AttackerKind,
    pub window: usize,
    pub alpha: f64,
    pub z: usize,
    /// Neighborhood used to grow clusters; defaults to the assumed k.
    pub cluster_k: Option<usize>,
    /// Defaults to the synthetic logging k, or 1 for MovieLens.
    pub assumed_k: Option<usize>,
    /// Defaults to the synthetic exploration, or 0.1 for MovieLens.
    pub assumed_exploration: Option<f64>,
}

impl Default for AttackerParams {
    fn default() -> Self {
        Self {
            kind: AttackerKind::Boost,
            window: 50,
            alpha: 0.1,
            z: 10,
            cluster_k: None,
            assumed_k: None,
            assumed_exploration: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub source: DataSource,
    pub mechanism: MechanismKind,
    pub eta: f64,
    pub attacker: AttackerParams,
    pub queries: usize,
    pub repetitions: usize,
    pub seed: u64,
    pub labels: LabelMode,
    pub jobs: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            source: DataSource::Synthetic(SynthConfig::default()),
            mechanism: MechanismKind::Kaggle,
            eta: KAGGLE_PRECISION,
            attacker: AttackerParams::default(),
            queries: 100,
            repetitions: 10,
            seed: 0,
            labels: LabelMode::Observed,
            jobs: 1,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let n_test = self.source.n_test();
        if n_test == 0 || n_test % 2 == 1 {
            return bad(format!("n_test must be even and positive, got {n_test}"));
        }
        if !(self.eta > 0.0) {
            return bad(format!("eta must be positive, got {}", self.eta));
        }
        if self.repetitions == 0 {
            return bad("repetitions must be at least 1".into());
        }
        if self.jobs == 0 {
            return bad("jobs must be at least 1".into());
        }
        let a = &self.attacker;
        if a.window == 0 {
            return bad("window must be at least 1".into());
        }
        if !(a.alpha > 0.0 && a.alpha <= 1.0) {
            return bad(format!("alpha must be in (0, 1], got {}", a.alpha));
        }
        if a.z == 0 || a.z > crate::attacks::posterior::MAX_ENUMERATION {
            return bad(format!("z must be in 1..=20, got {}", a.z));
        }
        if a.kind == AttackerKind::PostBoost && n_test > crate::attacks::posterior::MAX_ENUMERATION {
            return bad(format!("exact postboost enumerates all labels; n_test {n_test} exceeds 20"));
        }
        if let Some(e) = a.assumed_exploration {
            if !(0.0..=1.0).contains(&e) {
                return bad(format!("assumed_exploration must be in [0, 1], got {e}"));
            }
        }
        if a.assumed_k == Some(0) || a.cluster_k == Some(0) {
            return bad("neighbor counts must be at least 1".into());
        }
        if let DataSource::Synthetic(s) = &self.source {
            if !(0.0..=1.0).contains(&s.exploration) || s.logging_k == 0 || s.n_sim == 0 {
                return bad("synthetic logging parameters out of range".into());
            }
            if !(0.0..=1.0).contains(&s.test_fraction) {
                return bad(format!("test_fraction must be in [0, 1], got {}", s.test_fraction));
            }
        }
        Ok(())
    }

    /// The k the attacker assumes for the logging recommender.
    pub fn assumed_k(&self) -> usize {
        self.attacker.assumed_k.unwrap_or(match &self.source {
            DataSource::Synthetic(s) => s.logging_k,
            DataSource::Ml100k { .. } => 1,
        })
    }

    pub fn assumed_exploration(&self) -> f64 {
        self.attacker.assumed_exploration.unwrap_or(match &self.source {
            DataSource::Synthetic(s) => s.exploration,
            DataSource::Ml100k { .. } => 0.1,
        })
    }

    pub fn cluster_k(&self) -> usize {
        self.attacker.cluster_k.unwrap_or_else(|| self.assumed_k())
    }

    pub fn to_kv(&self) -> KvFile {
        let mut kv = KvFile::new();
        match &self.source {
            DataSource::Synthetic(s) => {
                kv.set("source", "synthetic");
                s.to_kv(&mut kv);
            }
            DataSource::Ml100k {
                dir,
                split,
                n_test,
                one_hot_occupation,
            } => {
                kv.set("source", "ml100k");
                kv.set("ml100k_dir", dir.display());
                kv.set("split", split);
                kv.set("n_test", n_test);
                kv.set("one_hot_occupation", one_hot_occupation);
            }
        }
        kv.set("mechanism", self.mechanism);
        kv.set("eta", self.eta);
        let a = &self.attacker;
        kv.set("attacker", a.kind);
        kv.set("window", a.window);
        kv.set("alpha", a.alpha);
        kv.set("z", a.z);
        if let Some(k) = a.cluster_k {
            kv.set("cluster_k", k);
        }
        if let Some(k) = a.assumed_k {
            kv.set("assumed_k", k);
        }
        if let Some(e) = a.assumed_exploration {
            kv.set("assumed_exploration", e);
        }
        kv.set("queries", self.queries);
        kv.set("repetitions", self.repetitions);
        kv.set("seed", self.seed);
        kv.set("labels", self.labels.as_str());
        kv.set("jobs", self.jobs);
        kv
    }

    /// Builds a config from defaults overlaid with the keys in `kv`.
    pub fn from_kv(kv: &KvFile) -> Result<Self> {
        const KNOWN: &[&str] = &[
            "source", "n_test", "user_dim", "item_dim", "n_items", "n_centers", "k_star",
            "logging_k", "exploration", "n_sim", "test_fraction", "no_repeat", "ml100k_dir",
            "split", "one_hot_occupation", "mechanism", "eta", "attacker", "window", "alpha",
            "z", "cluster_k", "assumed_k", "assumed_exploration", "queries", "repetitions",
            "seed", "labels", "jobs",
        ];
        if let Some(k) = kv.keys().find(|k| !KNOWN.contains(k)) {
            return Err(Error::Config(format!("unknown key {k:?}")));
        }
        let mut cfg = Self::default();
        let source = kv.get("source").unwrap_or("synthetic");
        cfg.source = match source {
            "synthetic" => {
                let mut s = SynthConfig::default();
                s.update_from_kv(kv)?;
                DataSource::Synthetic(s)
            }
            "ml100k" => DataSource::Ml100k {
                dir: kv
                    .get("ml100k_dir")
                    .map(PathBuf::from)
                    .unwrap_or_else(|| PathBuf::from("data/ml-100k")),
                split: kv.get("split").unwrap_or("u1").to_string(),
                n_test: kv.get_parsed("n_test")?.unwrap_or(1000),
                one_hot_occupation: kv.get_parsed("one_hot_occupation")?.unwrap_or(false),
            },
            other => return Err(Error::Config(format!("unknown source {other:?}"))),
        };
        if let Some(m) = kv.get("mechanism") {
            cfg.mechanism = m.parse().map_err(|e: Error| Error::Config(e.to_string()))?;
        }
        cfg.eta = match kv.get_parsed("eta")? {
            Some(eta) => eta,
            None => match cfg.mechanism {
                MechanismKind::Kaggle => KAGGLE_PRECISION,
                MechanismKind::Ladder => DEFAULT_LADDER_STEP,
            },
        };
        if let Some(a) = kv.get("attacker") {
            cfg.attacker.kind = a.parse().map_err(|e: Error| Error::Config(e.to_string()))?;
        }
        macro_rules! take {
            ($key:literal, $field:expr) => {
                if let Some(v) = kv.get_parsed($key)? {
                    $field = v;
                }
            };
        }
        take!("window", cfg.attacker.window);
        take!("alpha", cfg.attacker.alpha);
        take!("z", cfg.attacker.z);
        cfg.attacker.cluster_k = kv.get_parsed("cluster_k")?;
        cfg.attacker.assumed_k = kv.get_parsed("assumed_k")?;
        cfg.attacker.assumed_exploration = kv.get_parsed("assumed_exploration")?;
        take!("queries", cfg.queries);
        take!("repetitions", cfg.repetitions);
        take!("seed", cfg.seed);
        take!("labels", cfg.labels);
        take!("jobs", cfg.jobs);
        cfg.validate()?;
        Ok(cfg)
    }
}
