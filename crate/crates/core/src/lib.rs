//! Exemplar-free class-incremental learning on a frozen feature space.
//!
//! Past classes are remembered only by their centroid and covariance
//! diagonal. At every incremental state, features of the new classes are
//! translated into each past class's region to stand in for the missing
//! data, optionally refined by hill climbing toward the stored variances,
//! and a linear classifier is retrained over all seen classes.

pub mod bankio;
pub mod classifier;
pub mod cli;
pub mod error;
pub mod generator;
pub mod matrix;
pub mod optimizer;
pub mod protocol;
pub mod report;
pub mod seed;
pub mod selection;
pub mod stats;

/// Class label as stored in feature banks.
pub type ClassId = u32;

pub use bankio::{BankAccess, ClassSplit, FeatureBank, SyntheticSpec};
pub use classifier::{LabeledFeatures, LinearModel, TrainConfig};
pub use error::{Error, Result};
pub use generator::{PseudoSet, RowOrigin, SourceView};
pub use matrix::FeatureMatrix;
pub use optimizer::{ClimbTrace, HillClimbParams, OptimizerVariant};
pub use protocol::{AvgMode, RunConfig, RunReport, StatePlan};
pub use selection::{StrategyKind, StrategySpec};
pub use stats::ClassPrototype;
