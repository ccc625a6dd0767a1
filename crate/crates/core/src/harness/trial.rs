//! One trial: data, hidden labels, mechanism, attacker, T queries.

use std::io::Write;

use crate::attacks::boost::uniform_vector;
use crate::attacks::{
    approximate_posterior, exact_posterior, Attacker, AttackerKind, Boost, PostBoost, RsModel, WBoost,
};
use crate::error::{Error, Result};
use crate::evaluators::{AuditEntry, Evaluator, MechanismKind, Oracle};
use crate::ingest::{build_test, Featurizer, Ml100k, RawRating};
use crate::risk::empirical_risk;
use crate::rng::{RngStream, Role, StreamRng};
use crate::synthgen::generate;
use crate::types::{LabelVector, SequentialDataset};

use super::config::{DataSource, ExperimentConfig, LabelMode};

/// Source data that is shared by all trials.
#[derive(Debug)]
pub enum PreparedSource {
    Synthetic,
    Ml100k {
        data: Ml100k,
        featurizer: Featurizer,
        test_ratings: Vec<RawRating>,
        catalog: Vec<Vec<f64>>,
    },
}

impl PreparedSource {
    pub fn load(cfg: &ExperimentConfig) -> Result<Self> {
        match &cfg.source {
            DataSource::Synthetic(_) => Ok(Self::Synthetic),
            DataSource::Ml100k {
                dir,
                split,
                one_hot_occupation,
                ..
            } => {
                let data = Ml100k::load(dir)?;
                let featurizer = data.featurizer(*one_hot_occupation);
                let test_ratings = data.split_test(split)?;
                let catalog = data.catalog(&featurizer);
                Ok(Self::Ml100k {
                    data,
                    featurizer,
                    test_ratings,
                    catalog,
                })
            }
        }
    }
}

/// Everything a trial runs on.
#[derive(Debug, Clone)]
pub struct TrialData {
    pub dataset: SequentialDataset,
    pub catalog: Vec<Vec<f64>>,
    /// What the evaluator hides; the dataset's labels or coin flips.
    pub hidden: LabelVector,
}

pub fn trial_data(cfg: &ExperimentConfig, source: &PreparedSource, trial: u64) -> Result<TrialData> {
    let (dataset, catalog) = match (&cfg.source, source) {
        (DataSource::Synthetic(s), PreparedSource::Synthetic) => {
            let d = generate(s, cfg.seed, trial)?;
            (d.dataset, d.world.catalog)
        }
        (
            DataSource::Ml100k { n_test, .. },
            PreparedSource::Ml100k {
                data,
                featurizer,
                test_ratings,
                catalog,
            },
        ) => {
            let mut rng = RngStream::derive(cfg.seed, trial, Role::Split).rng();
            (build_test(data, featurizer, test_ratings, *n_test, &mut rng)?, catalog.clone())
        }
        _ => return Err(Error::Config("prepared source does not match the config".into())),
    };
    let hidden = match cfg.labels {
        LabelMode::Observed => dataset.test_labels(),
        LabelMode::CoinFlip => {
            let mut rng = RngStream::derive(cfg.seed, trial, Role::Labels).rng();
            uniform_vector(dataset.n_test(), &mut rng)
        }
    };
    Ok(TrialData {
        dataset,
        catalog,
        hidden,
    })
}

pub fn build_attacker(cfg: &ExperimentConfig, data: &TrialData, trial: u64) -> Result<Box<dyn Attacker>> {
    let n = data.hidden.len();
    let a = &cfg.attacker;
    Ok(match a.kind {
        AttackerKind::Boost => Box::new(Boost::new(n)),
        AttackerKind::WBoost => Box::new(WBoost::new(n, a.window.min(n), a.alpha)?),
        AttackerKind::PostBoost | AttackerKind::PostBoostApprox => {
            let model = RsModel::new(cfg.assumed_k(), cfg.assumed_exploration(), data.catalog.clone())?;
            let x = data.dataset.test_features();
            let posterior = if a.kind == AttackerKind::PostBoost {
                exact_posterior(&model, &x)?
            } else {
                let mut rng = RngStream::derive(cfg.seed, trial, Role::Clustering).rng();
                approximate_posterior(&model, &x, a.z.min(n), cfg.cluster_k(), &mut rng)?
            };
            Box::new(PostBoost::new(posterior, a.kind == AttackerKind::PostBoostApprox))
        }
    })
}

/// One row of a trial trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub trial: u64,
    pub attacker: AttackerKind,
    pub mechanism: MechanismKind,
    pub t: u64,
    pub reported: f64,
    pub query_risk: f64,
    pub final_risk: f64,
}

pub const TRACE_CSV_HEADER: &str =
    "trial,attacker,mechanism,t,reported,empirical_risk_of_query,empirical_risk_of_current_final";

pub fn write_trace_rows<W: Write>(out: &mut W, rows: &[TraceRow]) -> std::io::Result<()> {
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.trial, r.attacker, r.mechanism, r.t, r.reported, r.query_risk, r.final_risk
        )?;
    }
    Ok(())
}

/// Passes queries through to the mechanism and keeps a copy of every value
/// the attacker was shown.
struct Recorder<'a> {
    inner: &'a mut Evaluator,
    seen: Vec<f64>,
}

impl Oracle for Recorder<'_> {
    fn submit(&mut self, query: &LabelVector) -> Result<f64> {
        let r = self.inner.submit(query)?;
        self.seen.push(r);
        Ok(r)
    }

    fn n_test(&self) -> usize {
        self.inner.n_test()
    }
}

#[derive(Debug, Clone)]
pub struct TrialRun {
    pub trace: Vec<TraceRow>,
    pub audit: Vec<AuditEntry>,
    /// Every report the attacker received, in order.
    pub attacker_view: Vec<f64>,
    pub final_prediction: LabelVector,
    /// Risk of the final prediction on labels drawn afresh; only meaningful
    /// (and only set) for coin-flip labels, where it estimates true risk.
    pub fresh_risk: Option<f64>,
}

pub fn run_attack(cfg: &ExperimentConfig, data: &TrialData, trial: u64) -> Result<TrialRun> {
    let mut attacker = build_attacker(cfg, data, trial)?;
    let mut evaluator = Evaluator::new(cfg.mechanism, data.hidden.clone(), cfg.eta)?;
    let mut attack_rng = RngStream::derive(cfg.seed, trial, Role::Attacker).rng();
    let mut fallback_rng: StreamRng = RngStream::derive(cfg.seed, trial, Role::Fallback).rng();
    let mut trace = Vec::with_capacity(cfg.queries);
    let mut recorder = Recorder {
        inner: &mut evaluator,
        seen: Vec::with_capacity(cfg.queries),
    };
    let mut final_prediction = attacker.prediction(&mut fallback_rng);
    for t in 1..=cfg.queries as u64 {
        let sub = attacker.step(&mut recorder, &mut attack_rng)?;
        final_prediction = attacker.prediction(&mut fallback_rng);
        trace.push(TraceRow {
            trial,
            attacker: attacker.kind(),
            mechanism: cfg.mechanism,
            t,
            reported: sub.reported,
            query_risk: empirical_risk(&sub.query, &data.hidden)?,
            final_risk: empirical_risk(&final_prediction, &data.hidden)?,
        });
    }
    let attacker_view = recorder.seen;
    let fresh_risk = match cfg.labels {
        LabelMode::CoinFlip => {
            let mut rng = RngStream::derive(cfg.seed, trial, Role::Holdout).rng();
            let fresh = uniform_vector(data.hidden.len(), &mut rng);
            Some(empirical_risk(&final_prediction, &fresh)?)
        }
        LabelMode::Observed => None,
    };
    Ok(TrialRun {
        trace,
        audit: evaluator.audit_log().to_vec(),
        attacker_view,
        final_prediction,
        fresh_risk,
    })
}

pub fn run_trial(cfg: &ExperimentConfig, source: &PreparedSource, trial: u64) -> Result<TrialRun> {
    let data = trial_data(cfg, source, trial)?;
    run_attack(cfg, &data, trial)
}
