//! Metrics, cross-validation, hyperparameter search, noise sweeps and timing.

pub mod cv;
pub mod grid;
pub mod metrics;
pub mod noise;
pub mod timing;

use thiserror::Error;

use crate::ensembles::EnsembleError;
use crate::features::FeatureError;
use crate::resampling::ResampleError;

pub use cv::{stratified_holdout, stratified_kfold};
pub use grid::{confusion_on, grid_search, GridResult, GridRow, GridSpec};
pub use metrics::{BinaryCounts, ClassRow, ConfusionMatrix, Metrics, BALANCED_ACCURACY_DEFINITION};
pub use noise::{noise_sweep, noise_trained_sweep, NoiseRow};
pub use timing::{time_stage, StageTiming, MIN_TIMING_RUNS};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("class '{0}' has no support")]
    ZeroSupportClass(String),
    #[error("no predictions to score")]
    EmptyCounts,
    #[error("fold count {0} must be at least 2")]
    InvalidK(usize),
    #[error("holdout fraction {0} outside (0, 1)")]
    InvalidFraction(f64),
    #[error("class {class} has {count} members, needs at least {needed}")]
    ClassTooSmall { class: usize, count: usize, needed: usize },
    #[error("hyperparameter grid is empty")]
    EmptyGrid,
    #[error("case {0}: windows do not fit inside the record")]
    WindowOutOfRange(usize),
    #[error(transparent)]
    Fit(#[from] EnsembleError),
    #[error(transparent)]
    Resample(#[from] ResampleError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}
