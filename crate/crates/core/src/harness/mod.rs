//! Experiment configuration, trial runner, curve aggregation and plotting.

pub mod config;
pub mod experiment;
pub mod plot;
pub mod trial;
pub mod verify;

pub use config::{AttackerParams, DataSource, ExperimentConfig, LabelMode};
pub use experiment::{aggregate, run_experiment, run_prepared, sweep, CurveMetric, CurvePoint, ExperimentResult};
pub use trial::{run_attack, run_trial, trial_data, PreparedSource, TraceRow, TrialData, TrialRun};
