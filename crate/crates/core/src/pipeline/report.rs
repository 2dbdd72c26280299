//! Holdout evaluation, noise sweep and stage timing of a trained pipeline.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::bundle::PipelineModel;
use super::decide::{PipelineDecision, Verdict};
use super::train::slot_rows;
use super::{config_hash, PipelineError, Slot, TOOL_VERSION};
use crate::detector::detect;
use crate::ensembles::{GbcConfig, ModelConfig};
use crate::evaluation::{
    noise_sweep, noise_trained_sweep, stratified_holdout, time_stage, ConfusionMatrix, Metrics, NoiseRow, StageTiming,
    BALANCED_ACCURACY_DEFINITION,
};
use crate::par::map_indexed;
use crate::rng::derive_seed;
use crate::signal::{DisturbanceType, EventKind, Waveform};

const NOISE_STREAM: u64 = 0x5EED_0200;
const NOISE_SPLIT_STREAM: u64 = 0x5EED_0201;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    pub detect: f64,
    pub locate: f64,
    pub disturbance: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { detect: 0.95, locate: 0.90, disturbance: 0.90 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluateConfig {
    /// Noise levels in dB; `None` is the noise-free baseline.
    pub snr_db: Vec<Option<f64>>,
    pub thresholds: Thresholds,
    /// Evaluate every case instead of the model's recorded holdout.
    pub all_cases: bool,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        Self { snr_db: vec![Some(10.0), Some(30.0), None], thresholds: Thresholds::default(), all_cases: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdCheck {
    pub name: String,
    pub value: Option<f64>,
    pub minimum: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct LatencySummary {
    pub detected_faults: usize,
    pub max_verdict_from_trigger_samples: Option<usize>,
    pub max_trigger_from_inception_samples: Option<i64>,
    pub mean_trigger_from_inception_samples: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndToEnd {
    /// Trip for faults, restrain for disturbances, against the decided verdict.
    pub verdict: Metrics,
    /// Seven top-level classes plus `NoEvent`.
    pub top_class: Metrics,
    pub no_event: usize,
    pub latency: LatencySummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub tool_version: String,
    pub seed: u64,
    pub config_hash: String,
    pub model_config_hash: String,
    pub balanced_accuracy_definition: String,
    pub n_cases: usize,
    /// Per-slot metrics on windows registered at the trigger (or inception).
    pub stages: BTreeMap<Slot, Metrics>,
    pub end_to_end: EndToEnd,
    /// Verdict-stage metrics of a classifier refit at each noise level on
    /// equally noisy training cases and scored on the noisy holdout.
    pub noise: Vec<NoiseRow>,
    /// The trained verdict classifier itself scored on the noisy holdout.
    pub noise_clean_model: Vec<NoiseRow>,
    pub checks: Vec<ThresholdCheck>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub id: String,
    pub truth: String,
    pub verdict: Verdict,
    pub predicted: String,
    pub trigger_index: Option<usize>,
    pub inception_index: usize,
}

fn selected<'a>(model: &PipelineModel, cases: &'a [(String, Waveform)], all: bool) -> Vec<&'a (String, Waveform)> {
    let holdout: BTreeSet<&str> = model.metadata.holdout_cases.iter().map(String::as_str).collect();
    if all || holdout.is_empty() {
        cases.iter().collect()
    } else {
        cases.iter().filter(|(id, _)| holdout.contains(id.as_str())).collect()
    }
}

fn metrics_of(m: ConfusionMatrix, slot: Slot) -> Result<Metrics, PipelineError> {
    m.summary().map_err(|source| PipelineError::Fit { slot, source })
}

pub fn evaluate_pipeline<'a>(
    model: &PipelineModel,
    cases: &'a [(String, Waveform)],
    cfg: &EvaluateConfig,
    seed: u64,
    parallel: bool,
) -> Result<(ExperimentReport, Vec<PredictionRow>), PipelineError> {
    model.validate()?;
    let all_cases = cases;
    let cases = selected(model, cases, cfg.all_cases);
    if cases.is_empty() {
        return Err(PipelineError::Corpus("no cases to evaluate".into()));
    }

    let rows = map_indexed(cases.len(), parallel, |i| slot_rows(&cases[i].1, &model.detector));
    let rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;
    let mut stages = BTreeMap::new();
    for slot in Slot::ALL {
        let s = model.slot(slot)?;
        let mut m = ConfusionMatrix::new(s.model.classes.clone());
        for (r, class, x) in rows.iter().flatten() {
            if *r == slot {
                if let Some(t) = s.model.classes.iter().position(|c| c == class) {
                    m.add(t, s.model.predict_row(x).class);
                }
            }
        }
        if m.total() > 0 {
            stages.insert(slot, metrics_of(m, slot)?);
        }
    }

    let decisions = map_indexed(cases.len(), parallel, |i| model.decide(&cases[i].1));
    let decisions = decisions.into_iter().collect::<Result<Vec<PipelineDecision>, _>>()?;
    let verdicts: Vec<String> =
        [Verdict::Trip, Verdict::Restrain, Verdict::NoEvent].iter().map(|v| v.name().to_string()).collect();
    let mut top: Vec<String> = vec![super::FAULT_CLASS.to_string()];
    top.extend(DisturbanceType::ALL.iter().map(|d| d.name().to_string()));
    top.push(Verdict::NoEvent.name().to_string());
    let mut vm = ConfusionMatrix::new(verdicts.clone());
    let mut tm = ConfusionMatrix::new(top.clone());
    let mut latency = LatencySummary::default();
    let mut lag_sum = 0i64;
    let mut predictions = Vec::with_capacity(cases.len());
    for ((id, w), d) in cases.iter().map(|c| (&c.0, &c.1)).zip(&decisions) {
        let truth_verdict = if w.label.kind == EventKind::InternalFault { 0 } else { 1 };
        vm.add(truth_verdict, verdicts.iter().position(|v| v == d.verdict.name()).expect("known verdict"));
        let truth_top = w.label.top_class();
        let predicted = d.top_class();
        let t = top.iter().position(|c| c == truth_top).expect("known class");
        let p = top.iter().position(|c| *c == predicted).unwrap_or(top.len() - 1);
        tm.add(t, p);
        if let (EventKind::InternalFault, Some(l)) = (w.label.kind, d.latency) {
            latency.detected_faults += 1;
            latency.max_verdict_from_trigger_samples =
                Some(latency.max_verdict_from_trigger_samples.unwrap_or(0).max(l.verdict_from_trigger_samples));
            if let Some(x) = l.trigger_from_inception_samples {
                latency.max_trigger_from_inception_samples =
                    Some(latency.max_trigger_from_inception_samples.unwrap_or(i64::MIN).max(x));
                lag_sum += x;
            }
        }
        predictions.push(PredictionRow {
            id: id.clone(),
            truth: w.label.key(),
            verdict: d.verdict,
            predicted,
            trigger_index: d.trigger_index,
            inception_index: w.inception_index,
        });
    }
    if latency.detected_faults > 0 {
        latency.mean_trigger_from_inception_samples = Some(lag_sum as f64 / latency.detected_faults as f64);
    }
    let no_event = decisions.iter().filter(|d| d.verdict == Verdict::NoEvent).count();
    let end_to_end =
        EndToEnd { verdict: metrics_of(vm, Slot::Gbc1)?, top_class: metrics_of(tm, Slot::Gbc1)?, no_event, latency };

    let gbc1 = &model.slot(Slot::Gbc1)?.model;
    let verdict_case = |w: &'a Waveform| {
        let class = Slot::Gbc1.class_of(&w.label)?;
        Some((w, gbc1.classes.iter().position(|c| c == class)?))
    };
    let holdout: BTreeSet<&str> = model.metadata.holdout_cases.iter().map(String::as_str).collect();
    let (noise_train, noise_test): (Vec<(&Waveform, usize)>, Vec<(&Waveform, usize)>) = if holdout.is_empty() {
        let labelled: Vec<(&Waveform, usize)> = all_cases.iter().filter_map(|(_, w)| verdict_case(w)).collect();
        let labels: Vec<usize> = labelled.iter().map(|c| c.1).collect();
        let (tr, te) =
            stratified_holdout(&labels, 0.2, derive_seed(seed, NOISE_SPLIT_STREAM)).map_err(PipelineError::Split)?;
        (tr.iter().map(|&i| labelled[i]).collect(), te.iter().map(|&i| labelled[i]).collect())
    } else {
        let pick = |test: bool| {
            all_cases
                .iter()
                .filter(|(id, _)| holdout.contains(id.as_str()) == test)
                .filter_map(|(_, w)| verdict_case(w))
                .collect()
        };
        (pick(false), pick(true))
    };
    let snr: Vec<f64> = cfg.snr_db.iter().map(|s| s.unwrap_or(f64::INFINITY)).collect();
    let noise_seed = derive_seed(seed, NOISE_STREAM);
    let fit_err = |source| PipelineError::Fit { slot: Slot::Gbc1, source };
    let gbc = match gbc1.config {
        ModelConfig::Gbc(c) => c,
        _ => GbcConfig::default(),
    };
    let noise = noise_trained_sweep(
        &gbc1.classes,
        &gbc,
        Slot::Gbc1.task(),
        &noise_train,
        &noise_test,
        &snr,
        &model.detector,
        noise_seed,
        parallel,
    )
    .map_err(fit_err)?;
    let noise_clean_model =
        noise_sweep(gbc1, Slot::Gbc1.task(), &noise_test, &snr, &model.detector, derive_seed(noise_seed, 1), parallel)
            .map_err(fit_err)?;

    let th = cfg.thresholds;
    let check = |name: &str, slot: Slot, minimum: f64| {
        let value = stages.get(&slot).map(|m: &Metrics| m.balanced_accuracy);
        ThresholdCheck { name: name.to_string(), value, minimum, passed: value.is_some_and(|v| v >= minimum) }
    };
    let checks = vec![
        check("detect_balanced_accuracy", Slot::Gbc1, th.detect),
        check("locate_balanced_accuracy", Slot::Gbc3, th.locate),
        check("disturbance_balanced_accuracy", Slot::Gbc2, th.disturbance),
    ];
    let report = ExperimentReport {
        tool_version: TOOL_VERSION.to_string(),
        seed,
        config_hash: config_hash(cfg),
        model_config_hash: model.metadata.config_hash.clone(),
        balanced_accuracy_definition: BALANCED_ACCURACY_DEFINITION.to_string(),
        n_cases: cases.len(),
        stages,
        end_to_end,
        noise,
        noise_clean_model,
        passed: checks.iter().all(|c| c.passed),
        checks,
    };
    Ok((report, predictions))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub tool_version: String,
    pub n_cases: usize,
    /// Seconds per pass over all cases.
    pub stages: Vec<StageTiming>,
}

/// Time the detector, each slot and the full decision over `cases`.
pub fn time_pipeline(
    model: &PipelineModel,
    cases: &[(String, Waveform)],
    runs: usize,
) -> Result<TimingReport, PipelineError> {
    model.validate()?;
    let rows = cases.iter().map(|(_, w)| slot_rows(w, &model.detector)).collect::<Result<Vec<_>, _>>()?;
    let mut stages = vec![time_stage("cdf_detect", runs, || {
        for (_, w) in cases {
            std::hint::black_box(detect(w, &model.detector));
        }
    })];
    for slot in Slot::ALL {
        let m = &model.slot(slot)?.model;
        stages.push(time_stage(slot.name(), runs, || {
            for (s, _, x) in rows.iter().flatten() {
                if *s == slot {
                    std::hint::black_box(m.predict_row(x));
                }
            }
        }));
    }
    let mut failure = None;
    stages.push(time_stage("decide", runs, || {
        for (_, w) in cases {
            if let Err(e) = model.decide(w) {
                failure.get_or_insert(e);
            }
        }
    }));
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(TimingReport { tool_version: TOOL_VERSION.to_string(), n_cases: cases.len(), stages })
}
