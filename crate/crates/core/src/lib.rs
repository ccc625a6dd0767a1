//! Measures how much hidden test-label information leaks through the order
//! of recommender data, by attacking leaderboard mechanisms with queries
//! that exploit the sequence.

pub mod attacks;
pub mod error;
pub mod evaluators;
pub mod harness;
pub mod ingest;
pub mod kvfile;
pub mod oracle;
pub mod recsys;
pub mod risk;
pub mod rng;
pub mod synthgen;
pub mod types;

pub use error::{Error, Result};
pub use evaluators::{Evaluator, MechanismKind, Oracle};
pub use types::{Interaction, LabelVector, SequentialDataset, Split, TestFeatures};
