//! Decision tree, random forest and gradient-boosting classifiers, plus
//! impurity-based feature ranking.

pub mod cart;
pub mod forest;
pub mod gbc;
pub mod impurity;
pub mod model;
pub mod tree;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cart::cart_fit;
pub use forest::{forest_fit, rank_features};
pub use gbc::{deviance_gradient, gbc_fit, multinomial_deviance, softmax};
pub use impurity::{information_gain, Impurity};
pub use model::{ModelConfig, ModelKind, Prediction, TrainingMeta, TreeEnsembleModel, MODEL_FORMAT_VERSION};
pub use tree::{Node, Tree};

#[derive(Debug, Error, PartialEq)]
pub enum EnsembleError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("a split child is empty")]
    EmptyChild,
    #[error("feature schema mismatch: model expects {expected}, input has {got}")]
    SchemaMismatch { expected: String, got: String },
    #[error("boosting needs at least two classes present in the training labels")]
    SingleClass,
    #[error("training loss became non-finite at iteration {iteration}")]
    NonFiniteLoss { iteration: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("malformed dataset: {0}")]
    Shape(String),
    #[error("unsupported model format version {0}")]
    UnsupportedVersion(u32),
    #[error("model JSON: {0}")]
    Json(String),
}

/// Row-major training matrix with integer class labels and their names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub classes: Vec<String>,
    pub schema_hash: String,
}

impl Dataset {
    pub fn new(
        rows: Vec<Vec<f64>>,
        labels: Vec<usize>,
        classes: Vec<String>,
        schema_hash: impl Into<String>,
    ) -> Result<Self, EnsembleError> {
        if rows.is_empty() {
            return Err(EnsembleError::EmptyDataset);
        }
        if rows.len() != labels.len() {
            return Err(EnsembleError::Shape(format!("{} rows but {} labels", rows.len(), labels.len())));
        }
        let d = rows[0].len();
        if let Some(r) = rows.iter().position(|r| r.len() != d) {
            return Err(EnsembleError::Shape(format!("row {r} has {} features, expected {d}", rows[r].len())));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(EnsembleError::Shape("non-finite feature value".into()));
        }
        if let Some(&y) = labels.iter().find(|&&y| y >= classes.len()) {
            return Err(EnsembleError::Shape(format!("label {y} outside codebook of {}", classes.len())));
        }
        Ok(Self { rows, labels, classes, schema_hash: schema_hash.into() })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.classes.len()];
        for &y in &self.labels {
            c[y] += 1;
        }
        c
    }

    /// Rows at `idx`, in that order, sharing the codebook and schema.
    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            classes: self.classes.clone(),
            schema_hash: self.schema_hash.clone(),
        }
    }
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CartConfig {
    pub max_depth: usize,
    pub impurity: Impurity,
    pub min_samples_split: usize,
}

impl Default for CartConfig {
    fn default() -> Self {
        Self { max_depth: 10, impurity: Impurity::Gini, min_samples_split: 2 }
    }
}

/// Serialized trees nest one JSON level per tree level.
pub const MAX_TREE_DEPTH: usize = 64;

fn check_tree(max_depth: usize, min_samples_split: usize) -> Result<(), EnsembleError> {
    if max_depth > MAX_TREE_DEPTH {
        return Err(EnsembleError::InvalidConfig(format!("max_depth {max_depth} exceeds {MAX_TREE_DEPTH}")));
    }
    if min_samples_split < 2 {
        return Err(EnsembleError::InvalidConfig("min_samples_split must be at least 2".into()));
    }
    Ok(())
}

impl CartConfig {
    pub fn validate(&self) -> Result<(), EnsembleError> {
        check_tree(self.max_depth, self.min_samples_split)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    Sqrt,
    All,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, d: usize) -> usize {
        match self {
            MaxFeatures::Sqrt => ((d as f64).sqrt().floor() as usize).max(1),
            MaxFeatures::All => d,
            MaxFeatures::Count(n) => n.clamp(1, d.max(1)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub max_features: MaxFeatures,
    pub bootstrap: bool,
    pub seed: u64,
    pub impurity: Impurity,
    pub min_samples_split: usize,
    /// Thread fan-out hint; never changes results.
    #[serde(skip, default = "yes")]
    pub parallel: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_estimators: 100,
            max_depth: 10,
            max_features: MaxFeatures::Sqrt,
            bootstrap: true,
            seed: 0,
            impurity: Impurity::Gini,
            min_samples_split: 2,
            parallel: true,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<(), EnsembleError> {
        if self.n_estimators == 0 {
            return Err(EnsembleError::InvalidConfig("n_estimators must be positive".into()));
        }
        check_tree(self.max_depth, self.min_samples_split)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbcConfig {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub subsample: f64,
    pub seed: u64,
    pub min_samples_split: usize,
    /// Thread fan-out hint; never changes results.
    #[serde(skip, default = "yes")]
    pub parallel: bool,
}

impl Default for GbcConfig {
    fn default() -> Self {
        Self {
            n_estimators: 100,
            max_depth: 3,
            learning_rate: 0.1,
            subsample: 1.0,
            seed: 0,
            min_samples_split: 2,
            parallel: true,
        }
    }
}

impl GbcConfig {
    pub fn validate(&self) -> Result<(), EnsembleError> {
        if self.n_estimators == 0 {
            return Err(EnsembleError::InvalidConfig("n_estimators must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(EnsembleError::InvalidConfig(format!("learning_rate {} outside (0, 1]", self.learning_rate)));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return Err(EnsembleError::InvalidConfig(format!("subsample {} outside (0, 1]", self.subsample)));
        }
        check_tree(self.max_depth, self.min_samples_split)
    }
}

/// Index of the first maximum.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}
