//! Training all six slots from a labeled corpus.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::bundle::{PipelineMeta, PipelineModel, SlotModel, StageReport};
use super::{config_hash, PipelineError, Slot};
use crate::detector::{detect, windows_at, CdfConfig};
use crate::ensembles::{Dataset, TreeEnsembleModel};
use crate::evaluation::{confusion_on, grid_search, stratified_holdout, GridSpec};
use crate::features::{extract, schema_hash};
use crate::par::map_indexed;
use crate::resampling::{ResamplePlan, Strategy};
use crate::rng::derive_seed;
use crate::signal::{Sample3, Waveform};

/// Seed streams derived from the run seed.
const SPLIT_STREAM: u64 = 0x5EED_0001;
const SLOT_STREAM: u64 = 0x5EED_0100;

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub grid: GridSpec,
    pub resample: ResamplePlan,
    pub holdout_fraction: f64,
    /// Fail when any class of the full taxonomy is absent.
    pub require_all_classes: bool,
    /// Thread fan-out hint; never changes results.
    #[serde(skip, default = "yes")]
    pub parallel: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            grid: GridSpec::small(),
            resample: ResamplePlan::default(),
            holdout_fraction: 0.2,
            require_all_classes: true,
            parallel: true,
        }
    }
}

/// Windows a record contributes to training and stage evaluation: those at
/// the detector trigger, or at the known inception when the detector stays
/// silent.
#[derive(Debug, Clone, PartialEq)]
pub struct Registered {
    pub trigger_index: Option<usize>,
    pub detect: Vec<Sample3>,
    pub classify: Vec<Sample3>,
}

pub fn register(w: &Waveform, cfg: &CdfConfig) -> Option<Registered> {
    let ev = detect(w, cfg);
    if let (Some(t), Some(detect), Some(classify)) = (ev.trigger_index, ev.detect_window, ev.classify_window) {
        return Some(Registered { trigger_index: Some(t), detect, classify });
    }
    let (detect, classify) = windows_at(&w.samples, w.inception_index, cfg)?;
    Some(Registered { trigger_index: None, detect, classify })
}

/// Feature rows of one record for every slot that sees its label.
pub(crate) fn slot_rows(w: &Waveform, cfg: &CdfConfig) -> Result<Vec<(Slot, &'static str, Vec<f64>)>, PipelineError> {
    let r =
        register(w, cfg).ok_or_else(|| PipelineError::Corpus("record too short for the decision windows".into()))?;
    Slot::ALL
        .iter()
        .filter_map(|&slot| slot.class_of(&w.label).map(|c| (slot, c)))
        .map(|(slot, class)| {
            let task = slot.task();
            let window = if task.uses_detect_window() { &r.detect } else { &r.classify };
            let fv = extract(window, task, &w.spec).map_err(|source| PipelineError::Stage { slot, source })?;
            Ok((slot, class, fv.values))
        })
        .collect()
}

fn dataset(slot: Slot, classes: &[String], rows: Vec<(Vec<f64>, usize)>, hash: &str) -> Result<Dataset, PipelineError> {
    let (x, y): (Vec<Vec<f64>>, Vec<usize>) = rows.into_iter().unzip();
    Dataset::new(x, y, classes.to_vec(), hash).map_err(|source| PipelineError::Model { slot, source })
}

/// Train every slot on a stratified 4:1 split of `cases` (id, record).
pub fn train_pipeline(
    cases: &[(String, Waveform)],
    cfg: &TrainConfig,
    seed: u64,
) -> Result<PipelineModel, PipelineError> {
    let Some((_, first)) = cases.first() else {
        return Err(PipelineError::Corpus("no cases".into()));
    };
    let sampling = first.spec;
    if let Some((id, w)) = cases.iter().find(|(_, w)| w.spec != sampling) {
        return Err(PipelineError::Corpus(format!(
            "{id} sampled differently from the first case ({} Hz)",
            w.spec.sample_rate_hz
        )));
    }
    cfg.grid.validate().map_err(|source| PipelineError::Fit { slot: Slot::Gbc1, source })?;
    let needed = 2 * cfg.grid.cv_k;
    for slot in Slot::ALL {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for (_, w) in cases {
            if let Some(c) = slot.class_of(&w.label) {
                *counts.entry(c).or_default() += 1;
            }
        }
        for class in slot.taxonomy() {
            match counts.get(class).copied().unwrap_or(0) {
                0 if cfg.require_all_classes => {
                    return Err(PipelineError::ClassMissing { task: slot.task(), class: class.to_string() })
                }
                0 => {}
                n if n < needed => {
                    return Err(PipelineError::ClassTooSmall {
                        task: slot.task(),
                        class: class.to_string(),
                        count: n,
                        needed,
                    })
                }
                _ => {}
            }
        }
    }

    let keys: Vec<String> = cases.iter().map(|(_, w)| w.label.key()).collect();
    let mut codes: Vec<&String> = keys.iter().collect();
    codes.sort();
    codes.dedup();
    let strata: Vec<usize> = keys.iter().map(|k| codes.binary_search(&k).expect("key present")).collect();
    let (_, test_idx) = stratified_holdout(&strata, cfg.holdout_fraction, derive_seed(seed, SPLIT_STREAM))
        .map_err(PipelineError::Split)?;
    let mut is_test = vec![false; cases.len()];
    test_idx.iter().for_each(|&i| is_test[i] = true);

    let det = CdfConfig::for_spec(&sampling);
    let rows = map_indexed(cases.len(), cfg.parallel, |i| slot_rows(&cases[i].1, &det));
    let rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;

    let resample = (cfg.resample.strategy != Strategy::None).then_some(&cfg.resample);
    let mut slots = BTreeMap::new();
    let mut stages = BTreeMap::new();
    for (si, slot) in Slot::ALL.into_iter().enumerate() {
        let task = slot.task();
        let hash = schema_hash(task, &sampling);
        let present: Vec<String> = slot
            .taxonomy()
            .into_iter()
            .filter(|c| rows.iter().flatten().any(|(s, cls, _)| *s == slot && cls == c))
            .map(str::to_string)
            .collect();
        let classes = if present.is_empty() { vec![slot.taxonomy()[0].to_string()] } else { present };
        let mut train_rows = Vec::new();
        let mut test_rows = Vec::new();
        for (i, case_rows) in rows.iter().enumerate() {
            for (s, cls, x) in case_rows {
                if *s == slot {
                    let y = classes.iter().position(|c| c == cls).expect("class in codebook");
                    if is_test[i] { &mut test_rows } else { &mut train_rows }.push((x.clone(), y));
                }
            }
        }
        let n_train = train_rows.len();
        let n_holdout = test_rows.len();
        let mut train_counts = vec![0; classes.len()];
        train_rows.iter().for_each(|(_, y)| train_counts[*y] += 1);

        let (model, grid) = if classes.len() < 2 || n_train == 0 {
            (TreeEnsembleModel::constant(classes.clone(), hash.clone(), task.vector_len(), 0), None)
        } else {
            let train = dataset(slot, &classes, train_rows, &hash)?;
            let mut g =
                grid_search(&train, &cfg.grid, derive_seed(seed, SLOT_STREAM + si as u64), resample, cfg.parallel)
                    .map_err(|source| PipelineError::Fit { slot, source })?;
            (g.model.take().expect("grid search returns a model"), Some(g))
        };
        let holdout = if n_holdout > 0 {
            let test = dataset(slot, &classes, test_rows, &hash)?;
            Some(confusion_on(&model, &test).summary().map_err(|source| PipelineError::Fit { slot, source })?)
        } else {
            None
        };
        stages.insert(
            slot,
            StageReport {
                task,
                classes: classes.clone(),
                n_train,
                n_holdout,
                train_class_counts: train_counts,
                grid,
                holdout,
            },
        );
        slots.insert(slot, SlotModel::new(task, &sampling, model));
    }

    let mut model = PipelineModel::new(sampling, slots);
    model.metadata = PipelineMeta {
        seed,
        config_hash: config_hash(cfg),
        train_config: cfg.clone(),
        stages,
        holdout_cases: test_idx.iter().map(|&i| cases[i].0.clone()).collect(),
    };
    model.validate()?;
    Ok(model)
}
