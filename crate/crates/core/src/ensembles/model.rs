//! Fitted tree-ensemble model: prediction, feature importances and the
//! versioned JSON file format.

use serde::{Deserialize, Serialize};

use super::gbc::softmax;
use super::tree::{Node, Tree};
use super::{argmax, CartConfig, EnsembleError, ForestConfig, GbcConfig};
use crate::features::{schema_hash_of, FeatureVector};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "CART")]
    Cart,
    #[serde(rename = "RF")]
    RandomForest,
    #[serde(rename = "GBC")]
    Gbc,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params")]
pub enum ModelConfig {
    #[serde(rename = "CART")]
    Cart(CartConfig),
    #[serde(rename = "RF")]
    Forest(ForestConfig),
    #[serde(rename = "GBC")]
    Gbc(GbcConfig),
}

impl ModelConfig {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelConfig::Cart(_) => ModelKind::Cart,
            ModelConfig::Forest(_) => ModelKind::RandomForest,
            ModelConfig::Gbc(_) => ModelKind::Gbc,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct TrainingMeta {
    pub seed: u64,
    pub n_samples: usize,
    pub class_counts: Vec<usize>,
    /// Mean training deviance before the first boosting iteration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_deviance: Option<f64>,
    /// Mean training deviance after each boosting iteration.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub deviance: Vec<f64>,
    /// Step multiplier accepted by the line search at each iteration.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub step_scale: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsembleModel {
    pub format_version: u32,
    pub kind: ModelKind,
    pub config: ModelConfig,
    pub classes: Vec<String>,
    pub schema_hash: String,
    pub n_features: usize,
    /// Per-class raw scores before any tree (boosting only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub init_scores: Vec<f64>,
    /// Boosting stores `classes.len()` trees per iteration, iteration-major.
    pub trees: Vec<Tree>,
    pub training: TrainingMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub class: usize,
    pub label: String,
    pub probabilities: Vec<f64>,
}

impl TreeEnsembleModel {
    /// Single-leaf model that always predicts `class` with probability 1.
    pub fn constant(classes: Vec<String>, schema_hash: impl Into<String>, n_features: usize, class: usize) -> Self {
        let mut p = vec![0.0; classes.len()];
        p[class] = 1.0;
        let mut counts = vec![0; classes.len()];
        counts[class] = 1;
        Self {
            format_version: MODEL_FORMAT_VERSION,
            kind: ModelKind::Cart,
            config: ModelConfig::Cart(CartConfig { max_depth: 0, ..CartConfig::default() }),
            classes,
            schema_hash: schema_hash.into(),
            n_features,
            init_scores: Vec::new(),
            trees: vec![Tree::leaf(p)],
            training: TrainingMeta { seed: 0, n_samples: 1, class_counts: counts, ..TrainingMeta::default() },
        }
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    /// Class probabilities for a raw row; the caller vouches for its schema.
    pub fn predict_proba_row(&self, x: &[f64]) -> Vec<f64> {
        let k = self.classes.len();
        match self.kind {
            ModelKind::Cart => self.trees[0].predict(x).to_vec(),
            ModelKind::RandomForest => {
                let mut p = vec![0.0; k];
                for t in &self.trees {
                    for (a, b) in p.iter_mut().zip(t.predict(x)) {
                        *a += b;
                    }
                }
                let n = self.trees.len() as f64;
                p.iter_mut().for_each(|v| *v /= n);
                p
            }
            ModelKind::Gbc => softmax(&self.raw_scores(x)),
        }
    }

    /// Boosting raw scores (log-odds scale).
    pub fn raw_scores(&self, x: &[f64]) -> Vec<f64> {
        let k = self.classes.len();
        let mut s = self.init_scores.clone();
        for (j, t) in self.trees.iter().enumerate() {
            s[j % k] += t.predict(x)[0];
        }
        s
    }

    pub fn predict_row(&self, x: &[f64]) -> Prediction {
        let p = self.predict_proba_row(x);
        let class = argmax(&p);
        Prediction { class, label: self.classes[class].clone(), probabilities: p }
    }

    pub fn check_schema(&self, hash: &str) -> Result<(), EnsembleError> {
        if hash != self.schema_hash {
            return Err(EnsembleError::SchemaMismatch { expected: self.schema_hash.clone(), got: hash.to_string() });
        }
        Ok(())
    }

    pub fn predict(&self, fv: &FeatureVector) -> Result<Prediction, EnsembleError> {
        self.check_schema(&schema_hash_of(&fv.names))?;
        if fv.values.len() != self.n_features {
            return Err(EnsembleError::Shape(format!("{} values, model expects {}", fv.values.len(), self.n_features)));
        }
        Ok(self.predict_row(&fv.values))
    }

    /// Mean decrease in impurity per feature: per-tree split gains normalized
    /// to 1, averaged over trees with any split, renormalized. A model with no
    /// splits spreads importance uniformly.
    pub fn feature_importances(&self) -> Vec<f64> {
        let d = self.n_features;
        let mut acc = vec![0.0; d];
        for t in &self.trees {
            let mut g = vec![0.0; d];
            for n in &t.nodes {
                if let Node::Split { feature, gain, .. } = n {
                    g[*feature] += gain;
                }
            }
            let s: f64 = g.iter().sum();
            if s > 0.0 {
                for (a, v) in acc.iter_mut().zip(&g) {
                    *a += v / s;
                }
            }
        }
        let s: f64 = acc.iter().sum();
        if s > 0.0 {
            acc.iter_mut().for_each(|v| *v /= s);
        } else if d > 0 {
            acc.iter_mut().for_each(|v| *v = 1.0 / d as f64);
        }
        acc
    }

    /// Boosted model cut back to its first `n_iter` iterations; identical to
    /// a fit run with `n_estimators = n_iter`. Other kinds are returned as is.
    pub fn truncated(&self, n_iter: usize) -> Self {
        let mut m = self.clone();
        if let ModelConfig::Gbc(cfg) = &mut m.config {
            let n_iter = n_iter.min(cfg.n_estimators);
            cfg.n_estimators = n_iter;
            m.trees.truncate(n_iter * m.classes.len());
            m.training.deviance.truncate(n_iter);
            m.training.step_scale.truncate(n_iter);
        }
        m
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("models serialize")
    }

    /// Parse and validate; `expected_schema` guards against feature drift.
    pub fn from_json(s: &str, expected_schema: Option<&str>) -> Result<Self, EnsembleError> {
        let m: Self = serde_json::from_str(s).map_err(|e| EnsembleError::Json(e.to_string()))?;
        m.validate(expected_schema)?;
        Ok(m)
    }

    /// Structural checks applied to every loaded model.
    pub fn validate(&self, expected_schema: Option<&str>) -> Result<(), EnsembleError> {
        let m = self;
        if m.format_version != MODEL_FORMAT_VERSION {
            return Err(EnsembleError::UnsupportedVersion(m.format_version));
        }
        if m.config.kind() != m.kind {
            return Err(EnsembleError::Json("config kind disagrees with model kind".into()));
        }
        if m.trees.is_empty() || m.classes.is_empty() {
            return Err(EnsembleError::Json("model has no trees or no classes".into()));
        }
        if m.kind == ModelKind::Gbc
            && (m.init_scores.len() != m.classes.len() || !m.trees.len().is_multiple_of(m.classes.len()))
        {
            return Err(EnsembleError::Json("boosting score layout inconsistent with codebook".into()));
        }
        if m.trees.iter().filter_map(Tree::max_feature).any(|f| f >= m.n_features) {
            return Err(EnsembleError::Json("split feature outside the model's feature count".into()));
        }
        if let Some(h) = expected_schema {
            m.check_schema(h)?;
        }
        Ok(())
    }
}
