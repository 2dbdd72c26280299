//! Hierarchical decision scheme: a change-detection gate, a fault versus
//! disturbance verdict, then either unit location and fault type or the
//! disturbance type.

mod bundle;
mod decide;
mod report;
mod train;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::detector::DetectError;
use crate::ensembles::EnsembleError;
use crate::evaluation::EvalError;
use crate::features::{FeatureError, Task};
use crate::signal::{DisturbanceType, EventKind, EventLabel, FaultType, Unit};

pub use bundle::{PipelineMeta, PipelineModel, SlotModel, StageReport, PIPELINE_FORMAT_VERSION};
pub use decide::{Latency, PipelineDecision, PipelineStream, StageOutput, StreamDecision, StreamStage, Verdict};
pub use report::{
    evaluate_pipeline, time_pipeline, EndToEnd, EvaluateConfig, ExperimentReport, LatencySummary, PredictionRow,
    ThresholdCheck, Thresholds, TimingReport,
};
pub use train::{register, train_pipeline, Registered, TrainConfig};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Class name the verdict stage uses for internal faults.
pub const FAULT_CLASS: &str = "InternalFault";
pub const DISTURBANCE_CLASS: &str = "Disturbance";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("pipeline model has no {0} slot")]
    IncompleteModel(Slot),
    #[error("class {class} is absent from the {task} training data")]
    ClassMissing { task: Task, class: String },
    #[error("class {class} of {task} has {count} cases, needs at least {needed}")]
    ClassTooSmall { task: Task, class: String, count: usize, needed: usize },
    #[error("{slot}: {msg}")]
    SchemaMismatch { slot: Slot, msg: String },
    #[error("record sampled at {got} Hz, model expects {expected} Hz")]
    SamplingMismatch { expected: f64, got: f64 },
    #[error("unsupported pipeline format version {0}")]
    UnsupportedVersion(u32),
    #[error("malformed pipeline file: {0}")]
    Json(String),
    #[error("{slot} features: {source}")]
    Stage { slot: Slot, source: FeatureError },
    #[error("{slot} model: {source}")]
    Model { slot: Slot, source: EnsembleError },
    #[error("{slot} training: {source}")]
    Fit { slot: Slot, source: EvalError },
    #[error("holdout split: {0}")]
    Split(EvalError),
    #[error(transparent)]
    Detect(#[from] DetectError),
    #[error("corpus: {0}")]
    Corpus(String),
}

/// The six classifier positions of the decision tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Slot {
    /// Fault versus disturbance.
    Gbc1,
    /// Disturbance type.
    Gbc2,
    /// Faulted unit.
    Gbc3,
    /// Fault type in the exciting unit.
    Gbc4,
    /// Fault type in the series unit.
    Gbc5,
    /// Fault type in the power transformer.
    Gbc6,
}

impl Slot {
    pub const ALL: [Slot; 6] = [Slot::Gbc1, Slot::Gbc2, Slot::Gbc3, Slot::Gbc4, Slot::Gbc5, Slot::Gbc6];

    pub fn name(self) -> &'static str {
        match self {
            Slot::Gbc1 => "gbc1",
            Slot::Gbc2 => "gbc2",
            Slot::Gbc3 => "gbc3",
            Slot::Gbc4 => "gbc4",
            Slot::Gbc5 => "gbc5",
            Slot::Gbc6 => "gbc6",
        }
    }

    pub fn task(self) -> Task {
        match self {
            Slot::Gbc1 => Task::DetectFault,
            Slot::Gbc2 => Task::IdentifyDisturbance,
            Slot::Gbc3 => Task::LocateUnit,
            Slot::Gbc4 => Task::IdentifyExciting,
            Slot::Gbc5 => Task::IdentifySeries,
            Slot::Gbc6 => Task::IdentifyPt,
        }
    }

    /// Fault-type slot for a located unit.
    pub fn for_unit(unit: Unit) -> Slot {
        match unit {
            Unit::ExcitingUnit => Slot::Gbc4,
            Unit::SeriesUnit => Slot::Gbc5,
            Unit::Pt => Slot::Gbc6,
        }
    }

    /// Every class the slot can name, in codebook order.
    pub fn taxonomy(self) -> Vec<&'static str> {
        match self {
            Slot::Gbc1 => vec![FAULT_CLASS, DISTURBANCE_CLASS],
            Slot::Gbc2 => DisturbanceType::ALL.iter().map(|d| d.name()).collect(),
            Slot::Gbc3 => Unit::ALL.iter().map(|u| u.name()).collect(),
            _ => FaultType::ALL.iter().map(|f| f.name()).collect(),
        }
    }

    /// Class of `label` for this slot, or `None` when the slot never sees it.
    pub fn class_of(self, label: &EventLabel) -> Option<&'static str> {
        match (self, label.kind) {
            (Slot::Gbc1, EventKind::InternalFault) => Some(FAULT_CLASS),
            (Slot::Gbc1, EventKind::Disturbance) => Some(DISTURBANCE_CLASS),
            (Slot::Gbc2, EventKind::Disturbance) => label.disturbance_type.map(DisturbanceType::name),
            (Slot::Gbc3, EventKind::InternalFault) => label.unit.map(Unit::name),
            (s, EventKind::InternalFault) if label.unit.map(Slot::for_unit) == Some(s) => {
                label.fault_type.map(FaultType::name)
            }
            _ => None,
        }
    }
}

impl std::fmt::Display for Slot {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Hex SHA-256 of the compact JSON form of a configuration.
pub fn config_hash<T: Serialize>(cfg: &T) -> String {
    let json = serde_json::to_string(cfg).expect("configurations serialize");
    Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_label_reaches_exactly_one_drill_down_slot() {
        for u in Unit::ALL {
            for f in FaultType::ALL {
                let l = EventLabel::fault(u, f);
                let hits: Vec<Slot> = Slot::ALL[1..].iter().copied().filter(|s| s.class_of(&l).is_some()).collect();
                assert_eq!(hits, vec![Slot::Gbc3, Slot::for_unit(u)]);
                assert_eq!(Slot::Gbc1.class_of(&l), Some(FAULT_CLASS));
            }
        }
        for d in DisturbanceType::ALL {
            let l = EventLabel::disturbance(d);
            let hits: Vec<Slot> = Slot::ALL.iter().copied().filter(|s| s.class_of(&l).is_some()).collect();
            assert_eq!(hits, vec![Slot::Gbc1, Slot::Gbc2]);
        }
    }
}
