//! Cross-validated grid search over boosting hyperparameters.
//!
//! Points are scored by mean stratified k-fold balanced accuracy. Ties go to
//! fewer estimators, then shallower trees, then the larger learning rate, so
//! the winner does not depend on the order the grid was written in. Points
//! that differ only in `n_estimators` share one fit per fold: a boosted
//! model cut back to its first `n` iterations is exactly the `n`-iteration fit.

use serde::{Deserialize, Serialize};

use super::cv::stratified_kfold;
use super::metrics::ConfusionMatrix;
use super::EvalError;
use crate::ensembles::{gbc_fit, Dataset, GbcConfig, TreeEnsembleModel};
use crate::par::map_indexed;
use crate::resampling::{apply_plan, ResamplePlan};
use crate::rng::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub n_estimators: Vec<usize>,
    pub max_depth: Vec<usize>,
    pub learning_rate: Vec<f64>,
    pub cv_k: usize,
    pub subsample: f64,
    pub min_samples_split: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self::small()
    }
}

impl GridSpec {
    /// Desk-scale grid.
    pub fn small() -> Self {
        Self {
            n_estimators: vec![50, 100, 200],
            max_depth: vec![3, 5],
            learning_rate: vec![0.1],
            cv_k: 5,
            subsample: 1.0,
            min_samples_split: 2,
        }
    }

    /// The large grid; hours of compute on the reference corpus.
    pub fn paper() -> Self {
        Self {
            n_estimators: vec![5000, 7000, 10000, 12000, 15000],
            max_depth: vec![3, 5, 7, 10, 15],
            learning_rate: vec![0.01, 0.05, 0.07, 0.1],
            ..Self::small()
        }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "small" => Some(Self::small()),
            "paper" => Some(Self::paper()),
            _ => None,
        }
    }

    /// Distinct points in canonical tie-break order.
    pub fn points(&self, seed: u64) -> Vec<GbcConfig> {
        let mut pts = Vec::new();
        for &n in &self.n_estimators {
            for &d in &self.max_depth {
                for &lr in &self.learning_rate {
                    pts.push(GbcConfig {
                        n_estimators: n,
                        max_depth: d,
                        learning_rate: lr,
                        subsample: self.subsample,
                        seed,
                        min_samples_split: self.min_samples_split,
                        parallel: true,
                    });
                }
            }
        }
        pts.sort_by(|a, b| {
            a.n_estimators
                .cmp(&b.n_estimators)
                .then(a.max_depth.cmp(&b.max_depth))
                .then(b.learning_rate.total_cmp(&a.learning_rate))
        });
        pts.dedup_by(|a, b| {
            a.n_estimators == b.n_estimators && a.max_depth == b.max_depth && a.learning_rate == b.learning_rate
        });
        pts
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        if self.n_estimators.is_empty() || self.max_depth.is_empty() || self.learning_rate.is_empty() {
            return Err(EvalError::EmptyGrid);
        }
        for p in self.points(0) {
            p.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub fold_scores: Vec<f64>,
    pub mean_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub cv_k: usize,
    /// Every point in canonical order.
    pub rows: Vec<GridRow>,
    pub best: GbcConfig,
    pub best_mean_score: f64,
    /// Model refit on all of the data with the winning point.
    #[serde(skip)]
    pub model: Option<TreeEnsembleModel>,
}

impl GridResult {
    pub fn cv_runs(&self) -> usize {
        self.rows.len()
    }
}

/// Confusion matrix of `model` on every row of `data`.
pub fn confusion_on(model: &TreeEnsembleModel, data: &Dataset) -> ConfusionMatrix {
    let pred: Vec<usize> = data.rows.iter().map(|r| model.predict_row(r).class).collect();
    ConfusionMatrix::from_predictions(model.classes.clone(), &data.labels, &pred)
}

fn training_set(data: &Dataset, resample: Option<&ResamplePlan>, seed: u64) -> Result<Dataset, EvalError> {
    match resample {
        Some(plan) => Ok(apply_plan(data, plan, seed)?),
        None => Ok(data.clone()),
    }
}

/// Resampling, when given, is applied to training folds only.
pub fn grid_search(
    data: &Dataset,
    grid: &GridSpec,
    seed: u64,
    resample: Option<&ResamplePlan>,
    parallel: bool,
) -> Result<GridResult, EvalError> {
    grid.validate()?;
    let points = grid.points(seed);
    let folds = stratified_kfold(&data.labels, grid.cv_k, seed)?;

    // One fit per (fold, depth, rate) at the largest estimator count.
    let mut groups: Vec<GbcConfig> = Vec::new();
    for p in &points {
        match groups.iter_mut().find(|g| g.max_depth == p.max_depth && g.learning_rate == p.learning_rate) {
            Some(g) => g.n_estimators = g.n_estimators.max(p.n_estimators),
            None => groups.push(*p),
        }
    }
    let jobs: Vec<(usize, usize)> = (0..folds.len()).flat_map(|f| (0..groups.len()).map(move |g| (f, g))).collect();
    let results = map_indexed(jobs.len(), parallel, |j| -> Result<Vec<(usize, f64)>, EvalError> {
        let (f, g) = jobs[j];
        let (train_idx, test_idx) = &folds[f];
        let train = training_set(&data.subset(train_idx), resample, derive_seed(seed, f as u64))?;
        let test = data.subset(test_idx);
        let cfg = GbcConfig { parallel, ..groups[g] };
        let full = gbc_fit(&train, &cfg)?;
        points
            .iter()
            .enumerate()
            .filter(|(_, p)| p.max_depth == cfg.max_depth && p.learning_rate == cfg.learning_rate)
            .map(|(i, p)| Ok((i, confusion_on(&full.truncated(p.n_estimators), &test).balanced_accuracy_supported()?)))
            .collect()
    });

    let mut scores = vec![vec![0.0; folds.len()]; points.len()];
    for (j, r) in results.into_iter().enumerate() {
        for (i, s) in r? {
            scores[i][jobs[j].0] = s;
        }
    }
    let rows: Vec<GridRow> = points
        .iter()
        .zip(scores)
        .map(|(p, fold_scores)| GridRow {
            n_estimators: p.n_estimators,
            max_depth: p.max_depth,
            learning_rate: p.learning_rate,
            mean_score: fold_scores.iter().sum::<f64>() / fold_scores.len() as f64,
            fold_scores,
        })
        .collect();
    let mut best = 0;
    for (i, r) in rows.iter().enumerate() {
        if r.mean_score > rows[best].mean_score {
            best = i;
        }
    }
    let best_cfg = GbcConfig { parallel, ..points[best] };
    let model = gbc_fit(&training_set(data, resample, seed)?, &best_cfg)?;
    Ok(GridResult {
        cv_k: grid.cv_k,
        best_mean_score: rows[best].mean_score,
        rows,
        best: points[best],
        model: Some(model),
    })
}
