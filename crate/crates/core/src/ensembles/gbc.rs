//! Multiclass gradient boosting on the multinomial deviance.
//!
//! Raw scores start at the log class priors. Each iteration fits one
//! squared-error regression tree per class to the negative gradient
//! `onehot - softmax`, sets leaf values by a one-step Newton update, and
//! adds them scaled by the learning rate. If the full step would raise the
//! training deviance the step is halved until it does not, so the recorded
//! deviance never increases.

use rand::seq::index::sample;

use super::impurity::Criterion;
use super::model::{ModelConfig, ModelKind, TrainingMeta, TreeEnsembleModel, MODEL_FORMAT_VERSION};
use super::tree::{grow, GrowParams, Presorted, Targets, Tree};
use super::{Dataset, EnsembleError, GbcConfig};
use crate::par::map_indexed;
use crate::rng::rng_for;

pub fn softmax(s: &[f64]) -> Vec<f64> {
    let m = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = s.iter().map(|v| (v - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

fn log_sum_exp(s: &[f64]) -> f64 {
    let m = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + s.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// `-log softmax(s)[y]`.
pub fn multinomial_deviance(s: &[f64], y: usize) -> f64 {
    log_sum_exp(s) - s[y]
}

/// Gradient of [`multinomial_deviance`] in the scores: `softmax(s) - onehot(y)`.
pub fn deviance_gradient(s: &[f64], y: usize) -> Vec<f64> {
    let mut g = softmax(s);
    g[y] -= 1.0;
    g
}

fn mean_deviance(scores: &[f64], labels: &[usize], k: usize) -> f64 {
    let n = labels.len();
    (0..n).map(|i| multinomial_deviance(&scores[i * k..(i + 1) * k], labels[i])).sum::<f64>() / n as f64
}

/// Absent classes get a tiny prior instead of `-inf`.
const MIN_PRIOR_COUNT: f64 = 1e-9;

/// Halvings tried before the step is dropped entirely.
const MAX_HALVINGS: usize = 40;

pub fn gbc_fit(data: &Dataset, cfg: &GbcConfig) -> Result<TreeEnsembleModel, EnsembleError> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(EnsembleError::EmptyDataset);
    }
    let counts = data.class_counts();
    if counts.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(EnsembleError::SingleClass);
    }
    let n = data.len();
    let k = data.n_classes();
    let init: Vec<f64> = counts.iter().map(|&c| ((c as f64).max(MIN_PRIOR_COUNT) / n as f64).ln()).collect();
    let pre = Presorted::new(&data.rows);
    let params = GrowParams {
        criterion: Criterion::Squared,
        max_depth: cfg.max_depth,
        min_samples_split: cfg.min_samples_split,
        max_features: None,
    };
    let newton_scale = (k as f64 - 1.0) / k as f64;

    let mut scores: Vec<f64> = (0..n).flat_map(|_| init.iter().copied()).collect();
    let initial_deviance = mean_deviance(&scores, &data.labels, k);
    let mut dev = initial_deviance;
    let mut trees = Vec::with_capacity(cfg.n_estimators * k);
    let mut deviance = Vec::with_capacity(cfg.n_estimators);
    let mut step_scale = Vec::with_capacity(cfg.n_estimators);
    let m = ((cfg.subsample * n as f64).round() as usize).clamp(1, n);

    for it in 0..cfg.n_estimators {
        let weights: Vec<f64> = if m == n {
            vec![1.0; n]
        } else {
            let mut w = vec![0.0; n];
            for i in sample(&mut rng_for(cfg.seed, it as u64), n, m).into_iter() {
                w[i] = 1.0;
            }
            w
        };
        let probs: Vec<Vec<f64>> = (0..n).map(|i| softmax(&scores[i * k..(i + 1) * k])).collect();
        let fitted: Vec<(Tree, Vec<f64>)> = map_indexed(k, cfg.parallel, |c| {
            let r: Vec<f64> = (0..n).map(|i| f64::from(u8::from(data.labels[i] == c)) - probs[i][c]).collect();
            let g = grow(&pre, &Targets::Real(&r), &weights, &params, None);
            let mut num = vec![0.0; g.tree.nodes.len()];
            let mut den = vec![0.0; g.tree.nodes.len()];
            for i in 0..n {
                if weights[i] > 0.0 {
                    let l = g.leaf_of[i] as usize;
                    num[l] += r[i];
                    den[l] += r[i].abs() * (1.0 - r[i].abs());
                }
            }
            let mut tree = g.tree;
            tree.map_leaves(|l, _| {
                let v = if den[l].abs() < 1e-150 { 0.0 } else { newton_scale * num[l] / den[l] };
                vec![v]
            });
            let delta: Vec<f64> = data.rows.iter().map(|x| tree.predict(x)[0]).collect();
            (tree, delta)
        });

        let trial = |beta: f64| -> Vec<f64> {
            let mut s = scores.clone();
            for (c, (_, delta)) in fitted.iter().enumerate() {
                for i in 0..n {
                    s[i * k + c] += cfg.learning_rate * beta * delta[i];
                }
            }
            s
        };
        let mut beta = 1.0;
        let mut next = trial(beta);
        let mut next_dev = mean_deviance(&next, &data.labels, k);
        let mut halvings = 0;
        while !(next_dev <= dev) {
            if halvings == MAX_HALVINGS {
                beta = 0.0;
                next = scores.clone();
                next_dev = dev;
                break;
            }
            beta *= 0.5;
            halvings += 1;
            next = trial(beta);
            next_dev = mean_deviance(&next, &data.labels, k);
        }
        if !next_dev.is_finite() {
            return Err(EnsembleError::NonFiniteLoss { iteration: it });
        }
        let scale = cfg.learning_rate * beta;
        for (mut t, _) in fitted {
            t.map_leaves(|_, v| vec![v[0] * scale]);
            trees.push(t);
        }
        scores = next;
        dev = next_dev;
        deviance.push(dev);
        step_scale.push(beta);
    }

    Ok(TreeEnsembleModel {
        format_version: MODEL_FORMAT_VERSION,
        kind: ModelKind::Gbc,
        config: ModelConfig::Gbc(*cfg),
        classes: data.classes.clone(),
        schema_hash: data.schema_hash.clone(),
        n_features: data.n_features(),
        init_scores: init,
        trees,
        training: TrainingMeta {
            seed: cfg.seed,
            n_samples: n,
            class_counts: counts,
            initial_deviance: Some(initial_deviance),
            deviance,
            step_scale,
        },
    })
}
