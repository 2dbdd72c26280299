//! Batch and streaming decisions.
//!
//! The verdict reads only the detect window and the drill-down reads only
//! the classify window; exactly one drill-down branch runs per detected
//! event. Stage outputs are argmax with no reject option.

use std::collections::BTreeMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::bundle::PipelineModel;
use super::{PipelineError, Slot, FAULT_CLASS};
use crate::detector::{detect_samples, StreamEvent, StreamingDetector};
use crate::features::{extract, Task};
use crate::signal::{DisturbanceType, FaultType, Phase, Record, Sample3, SamplingSpec, Unit, Waveform};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Trip,
    Restrain,
    NoEvent,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::Trip => "Trip",
            Verdict::Restrain => "Restrain",
            Verdict::NoEvent => "NoEvent",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageOutput {
    pub slot: Slot,
    pub task: Task,
    pub label: String,
    pub probabilities: BTreeMap<String, f64>,
}

/// Sample counts between events; a decision is produced on the last sample
/// of the window it reads.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Latency {
    pub verdict_from_trigger_samples: usize,
    pub drilldown_from_trigger_samples: usize,
    /// Known only for labeled records.
    pub trigger_from_inception_samples: Option<i64>,
    pub verdict_from_inception_samples: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineDecision {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub detected: bool,
    pub verdict: Verdict,
    pub trigger_index: Option<usize>,
    pub trigger_phase: Option<Phase>,
    pub fault_unit: Option<Unit>,
    pub fault_type: Option<FaultType>,
    pub disturbance_type: Option<DisturbanceType>,
    pub stages: Vec<StageOutput>,
    pub latency: Option<Latency>,
    /// Some autoregressive feature fell back to zero.
    pub ar_fallback: bool,
}

impl PipelineDecision {
    pub fn no_event() -> Self {
        Self {
            id: None,
            detected: false,
            verdict: Verdict::NoEvent,
            trigger_index: None,
            trigger_phase: None,
            fault_unit: None,
            fault_type: None,
            disturbance_type: None,
            stages: Vec::new(),
            latency: None,
            ar_fallback: false,
        }
    }

    /// Top-level class named by the decision: `InternalFault`, a
    /// disturbance name, or the verdict when no drill-down label exists.
    pub fn top_class(&self) -> String {
        match (self.verdict, self.disturbance_type) {
            (Verdict::Trip, _) => FAULT_CLASS.to_string(),
            (Verdict::Restrain, Some(d)) => d.name().to_string(),
            (v, _) => v.name().to_string(),
        }
    }

    pub fn stage(&self, slot: Slot) -> Option<&StageOutput> {
        self.stages.iter().find(|s| s.slot == slot)
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("decisions serialize")
    }
}

impl PipelineModel {
    fn run_slot(&self, slot: Slot, window: &[Sample3], d: &mut PipelineDecision) -> Result<String, PipelineError> {
        let s = self.slot(slot)?;
        let fv = extract(window, s.task, &self.sampling).map_err(|source| PipelineError::Stage { slot, source })?;
        let p = s.model.predict(&fv).map_err(|source| PipelineError::Model { slot, source })?;
        d.ar_fallback |= fv.ar_fallback;
        d.stages.push(StageOutput {
            slot,
            task: s.task,
            label: p.label.clone(),
            probabilities: s.model.classes.iter().cloned().zip(p.probabilities).collect(),
        });
        Ok(p.label)
    }

    /// Trip or restrain from the detect window.
    pub fn verdict(
        &self,
        trigger_index: usize,
        trigger_phase: Phase,
        detect_window: &[Sample3],
        inception: Option<usize>,
    ) -> Result<PipelineDecision, PipelineError> {
        let mut d = PipelineDecision {
            detected: true,
            trigger_index: Some(trigger_index),
            trigger_phase: Some(trigger_phase),
            ..PipelineDecision::no_event()
        };
        let label = self.run_slot(Slot::Gbc1, detect_window, &mut d)?;
        d.verdict = if label == FAULT_CLASS { Verdict::Trip } else { Verdict::Restrain };
        let cfg = &self.detector;
        let verdict_lag = cfg.post_cycles_detect * cfg.cycle_samples - 1;
        let from_inception = inception.map(|i| trigger_index as i64 - i as i64);
        d.latency = Some(Latency {
            verdict_from_trigger_samples: verdict_lag,
            drilldown_from_trigger_samples: cfg.classify_len() - 1,
            trigger_from_inception_samples: from_inception,
            verdict_from_inception_samples: from_inception.map(|l| l + verdict_lag as i64),
        });
        Ok(d)
    }

    /// Drill-down labels from the classify window; one branch per verdict.
    pub fn drill_down(&self, d: &mut PipelineDecision, classify_window: &[Sample3]) -> Result<(), PipelineError> {
        match d.verdict {
            Verdict::Trip => {
                let unit_name = self.run_slot(Slot::Gbc3, classify_window, d)?;
                let unit = Unit::from_str(&unit_name).map_err(PipelineError::Json)?;
                let fault = self.run_slot(Slot::for_unit(unit), classify_window, d)?;
                d.fault_unit = Some(unit);
                d.fault_type = Some(FaultType::from_str(&fault).map_err(PipelineError::Json)?);
            }
            Verdict::Restrain => {
                let kind = self.run_slot(Slot::Gbc2, classify_window, d)?;
                d.disturbance_type = Some(DisturbanceType::from_str(&kind).map_err(PipelineError::Json)?);
            }
            Verdict::NoEvent => {}
        }
        Ok(())
    }

    fn check_complete(&self) -> Result<(), PipelineError> {
        for slot in Slot::ALL {
            self.slot(slot)?;
        }
        Ok(())
    }

    fn check_sampling(&self, spec: &SamplingSpec) -> Result<(), PipelineError> {
        if spec.sample_rate_hz != self.sampling.sample_rate_hz || spec.fundamental_hz != self.sampling.fundamental_hz {
            return Err(PipelineError::SamplingMismatch {
                expected: self.sampling.sample_rate_hz,
                got: spec.sample_rate_hz,
            });
        }
        Ok(())
    }

    /// Full decision on a record sampled at the model's rate.
    pub fn decide_samples(
        &self,
        samples: &[Sample3],
        inception: Option<usize>,
    ) -> Result<PipelineDecision, PipelineError> {
        self.check_complete()?;
        let ev = detect_samples(samples, &self.detector);
        let (Some(t), Some(phase), Some(det), Some(cls)) =
            (ev.trigger_index, ev.trigger_phase, ev.detect_window, ev.classify_window)
        else {
            return Ok(PipelineDecision::no_event());
        };
        let mut d = self.verdict(t, phase, &det, inception)?;
        self.drill_down(&mut d, &cls)?;
        Ok(d)
    }

    pub fn decide(&self, w: &Waveform) -> Result<PipelineDecision, PipelineError> {
        self.check_sampling(&w.spec)?;
        self.decide_samples(&w.samples, Some(w.inception_index))
    }

    pub fn decide_record(&self, r: &Record) -> Result<PipelineDecision, PipelineError> {
        self.check_sampling(&r.spec)?;
        self.decide_samples(&r.samples, None)
    }

    pub fn stream(&self) -> Result<PipelineStream<'_>, PipelineError> {
        self.check_complete()?;
        Ok(PipelineStream {
            model: self,
            det: StreamingDetector::new(self.detector)?,
            offset: 0,
            pending: None,
            events: 0,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StreamStage {
    Verdict,
    DrillDown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamDecision {
    pub stage: StreamStage,
    /// Stream index of the sample that completed the window.
    pub sample_index: usize,
    pub decision: PipelineDecision,
}

/// Sample-at-a-time decisions. Each event yields a verdict when the detect
/// window closes and a drill-down when the classify window closes; the
/// detector then re-arms for the next event. Memory is bounded by the
/// detector's window buffer.
pub struct PipelineStream<'m> {
    model: &'m PipelineModel,
    det: StreamingDetector,
    offset: usize,
    pending: Option<PipelineDecision>,
    events: usize,
}

impl PipelineStream<'_> {
    pub fn push(&mut self, s: Sample3) -> Result<Option<StreamDecision>, PipelineError> {
        let Some(ev) = self.det.push(s) else { return Ok(None) };
        let sample_index = self.offset + self.det.samples_seen() - 1;
        match ev {
            StreamEvent::Verdict { trigger_index, trigger_phase, detect_window } => {
                let d = self.model.verdict(self.offset + trigger_index, trigger_phase, &detect_window, None)?;
                self.pending = Some(d.clone());
                Ok(Some(StreamDecision { stage: StreamStage::Verdict, sample_index, decision: d }))
            }
            StreamEvent::DrillDown { classify_window, .. } => {
                let mut d = self.pending.take().expect("verdict precedes drill-down");
                self.model.drill_down(&mut d, &classify_window)?;
                self.offset += self.det.samples_seen();
                self.det.reset();
                self.events += 1;
                Ok(Some(StreamDecision { stage: StreamStage::DrillDown, sample_index, decision: d }))
            }
        }
    }

    pub fn samples_seen(&self) -> usize {
        self.offset + self.det.samples_seen()
    }

    /// Samples currently held; bounded independently of stream length.
    pub fn buffered(&self) -> usize {
        self.det.buffered()
    }

    /// A `NoEvent` decision if the stream ended without any detection.
    pub fn finish(self) -> Option<PipelineDecision> {
        (self.events == 0 && self.pending.is_none()).then(PipelineDecision::no_event)
    }
}
