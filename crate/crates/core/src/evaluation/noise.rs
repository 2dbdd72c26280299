//! Classifier accuracy under measurement noise.
//!
//! Windows are cut at each record's known inception, so the sweep measures
//! the classifier alone and not the detector's behavior on noise.
//! [`noise_sweep`] scores one fixed model at every level;
//! [`noise_trained_sweep`] refits at each level on equally noisy training
//! cases before scoring.

use serde::{Deserialize, Serialize};

use super::metrics::{ConfusionMatrix, Metrics};
use super::EvalError;
use crate::detector::{windows_at, CdfConfig};
use crate::ensembles::{gbc_fit, Dataset, GbcConfig, TreeEnsembleModel};
use crate::features::{extract, Task};
use crate::par::map_indexed;
use crate::rng::derive_seed;
use crate::signal::{Sample3, Waveform};
use crate::waveformgen::add_noise;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseRow {
    /// `None` is the noise-free baseline.
    pub snr_db: Option<f64>,
    pub metrics: Metrics,
}

/// Evaluate `model` on `cases` (waveform, true class) at each SNR. Case `i`
/// uses noise seed `derive_seed(seed, i)` at every level, so levels differ
/// only in noise scale.
pub fn noise_sweep(
    model: &TreeEnsembleModel,
    task: Task,
    cases: &[(&Waveform, usize)],
    snr_list: &[f64],
    cfg: &CdfConfig,
    seed: u64,
    parallel: bool,
) -> Result<Vec<NoiseRow>, EvalError> {
    if cases.is_empty() {
        return Ok(Vec::new());
    }
    snr_list
        .iter()
        .map(|&snr| {
            let rows = noisy_rows(task, cases, snr, cfg, seed, parallel)?;
            let pred: Vec<usize> = rows.iter().map(|x| model.predict_row(x).class).collect();
            score(model, cases, &pred, snr)
        })
        .collect()
}

/// Refit a boosted model with `gbc` at each level on `train` with noise of
/// that level, then score it on `test` with independent noise. Train case `i`
/// uses `derive_seed(derive_seed(seed, 0), i)`, test case `i` uses
/// `derive_seed(derive_seed(seed, 1), i)`, at every level.
#[allow(clippy::too_many_arguments)]
pub fn noise_trained_sweep(
    classes: &[String],
    gbc: &GbcConfig,
    task: Task,
    train: &[(&Waveform, usize)],
    test: &[(&Waveform, usize)],
    snr_list: &[f64],
    cfg: &CdfConfig,
    seed: u64,
    parallel: bool,
) -> Result<Vec<NoiseRow>, EvalError> {
    if train.is_empty() || test.is_empty() {
        return Ok(Vec::new());
    }
    let schema = crate::features::schema_hash(task, &test[0].0.spec);
    snr_list
        .iter()
        .map(|&snr| {
            let rows = noisy_rows(task, train, snr, cfg, derive_seed(seed, 0), parallel)?;
            let labels = train.iter().map(|c| c.1).collect();
            let data = Dataset::new(rows, labels, classes.to_vec(), schema.clone())?;
            let model = gbc_fit(&data, &GbcConfig { parallel, ..*gbc })?;
            let rows = noisy_rows(task, test, snr, cfg, derive_seed(seed, 1), parallel)?;
            let pred: Vec<usize> = rows.iter().map(|x| model.predict_row(x).class).collect();
            score(&model, test, &pred, snr)
        })
        .collect()
}

fn noisy_rows(
    task: Task,
    cases: &[(&Waveform, usize)],
    snr: f64,
    cfg: &CdfConfig,
    seed: u64,
    parallel: bool,
) -> Result<Vec<Vec<f64>>, EvalError> {
    map_indexed(cases.len(), parallel, |i| -> Result<Vec<f64>, EvalError> {
        let (w, _) = cases[i];
        let noisy = add_noise(w, snr, derive_seed(seed, i as u64));
        let (det, cls): (Vec<Sample3>, Vec<Sample3>) =
            windows_at(&noisy.samples, w.inception_index, cfg).ok_or(EvalError::WindowOutOfRange(i))?;
        let window = if task.uses_detect_window() { det } else { cls };
        Ok(extract(&window, task, &w.spec)?.values)
    })
    .into_iter()
    .collect()
}

fn score(
    model: &TreeEnsembleModel,
    cases: &[(&Waveform, usize)],
    pred: &[usize],
    snr: f64,
) -> Result<NoiseRow, EvalError> {
    let truth: Vec<usize> = cases.iter().map(|c| c.1).collect();
    let m = ConfusionMatrix::from_predictions(model.classes.clone(), &truth, pred);
    Ok(NoiseRow { snr_db: snr.is_finite().then_some(snr), metrics: m.summary()? })
}
