//! The pipeline model file: six slot models, detector settings and training
//! metadata in one JSON document.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::train::TrainConfig;
use super::{PipelineError, Slot, TOOL_VERSION};
use crate::detector::CdfConfig;
use crate::ensembles::TreeEnsembleModel;
use crate::evaluation::{GridResult, Metrics};
use crate::features::{schema_hash, Task};
use crate::signal::SamplingSpec;

pub const PIPELINE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotModel {
    pub task: Task,
    pub schema_hash: String,
    pub model: TreeEnsembleModel,
}

impl SlotModel {
    pub fn new(task: Task, spec: &SamplingSpec, model: TreeEnsembleModel) -> Self {
        Self { task, schema_hash: schema_hash(task, spec), model }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub task: Task,
    pub classes: Vec<String>,
    pub n_train: usize,
    pub n_holdout: usize,
    pub train_class_counts: Vec<usize>,
    /// Absent when the slot saw fewer than two classes.
    pub grid: Option<GridResult>,
    pub holdout: Option<Metrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct PipelineMeta {
    pub seed: u64,
    pub config_hash: String,
    pub train_config: TrainConfig,
    pub stages: BTreeMap<Slot, StageReport>,
    /// Ids of the cases held out from training.
    pub holdout_cases: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineModel {
    pub format_version: u32,
    pub tool_version: String,
    pub sampling: SamplingSpec,
    pub detector: CdfConfig,
    pub slots: BTreeMap<Slot, SlotModel>,
    pub metadata: PipelineMeta,
}

impl PipelineModel {
    /// Bundle with default detector settings and empty metadata.
    pub fn new(sampling: SamplingSpec, slots: BTreeMap<Slot, SlotModel>) -> Self {
        Self {
            format_version: PIPELINE_FORMAT_VERSION,
            tool_version: TOOL_VERSION.to_string(),
            sampling,
            detector: CdfConfig::for_spec(&sampling),
            slots,
            metadata: PipelineMeta::default(),
        }
    }

    pub fn slot(&self, slot: Slot) -> Result<&SlotModel, PipelineError> {
        self.slots.get(&slot).ok_or(PipelineError::IncompleteModel(slot))
    }

    /// All six slots present, each bound to its task and the current
    /// feature schema.
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.format_version != PIPELINE_FORMAT_VERSION {
            return Err(PipelineError::UnsupportedVersion(self.format_version));
        }
        self.detector.validate()?;
        for slot in Slot::ALL {
            let s = self.slot(slot)?;
            let mismatch = |msg: String| Err(PipelineError::SchemaMismatch { slot, msg });
            if s.task != slot.task() {
                return mismatch(format!("holds {} instead of {}", s.task, slot.task()));
            }
            let expected = schema_hash(s.task, &self.sampling);
            s.model.validate(None).map_err(|source| PipelineError::Model { slot, source })?;
            if s.schema_hash != expected || s.model.schema_hash != expected {
                return mismatch("feature schema differs from this build".into());
            }
            if s.model.n_features != s.task.vector_len() {
                return mismatch(format!("{} features, task has {}", s.model.n_features, s.task.vector_len()));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("pipeline serializes");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> Result<Self, PipelineError> {
        let m: Self = serde_json::from_str(s).map_err(|e| PipelineError::Json(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }
}
