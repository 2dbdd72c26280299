//! Change-detection filter: difference of the absolute-value sums of two
//! consecutive one-cycle windows, thresholded per phase.
//!
//! For a window start `t` the filter compares `[t + n_c, t + 2 n_c)` with
//! `[t, t + n_c)`. A value above the threshold triggers at the newest sample
//! of the window, `t + 2 n_c - 1`, so a step change is reported at the step.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signal::{Phase, Sample3, SamplingSpec, Waveform};

#[derive(Debug, Error, PartialEq)]
pub enum DetectError {
    #[error("sequence of {got} samples is too short; need at least {needed}")]
    TooShort { needed: usize, got: usize },
    #[error("invalid detector configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfConfig {
    pub threshold: f64,
    pub cycle_samples: usize,
    pub pre_cycles: f64,
    pub post_cycles_detect: usize,
    pub post_cycles_classify: usize,
}

impl Default for CdfConfig {
    fn default() -> Self {
        Self::for_spec(&SamplingSpec::default())
    }
}

impl CdfConfig {
    pub fn for_spec(spec: &SamplingSpec) -> Self {
        Self {
            threshold: 0.05,
            cycle_samples: spec.samples_per_cycle(),
            pre_cycles: 0.5,
            post_cycles_detect: 1,
            post_cycles_classify: 3,
        }
    }

    pub fn validate(&self) -> Result<(), DetectError> {
        if !(self.threshold > 0.0) {
            return Err(DetectError::InvalidConfig(format!("threshold {} must be positive", self.threshold)));
        }
        if self.cycle_samples < 2 {
            return Err(DetectError::InvalidConfig("cycle_samples must be at least 2".into()));
        }
        if !(self.pre_cycles >= 0.0) || self.post_cycles_detect == 0 || self.post_cycles_classify == 0 {
            return Err(DetectError::InvalidConfig("window lengths must be positive".into()));
        }
        Ok(())
    }

    /// Samples kept before the trigger (83 at defaults).
    pub fn pre_samples(&self) -> usize {
        (self.pre_cycles * self.cycle_samples as f64).floor() as usize
    }

    /// Detect-window length (250 at defaults).
    pub fn detect_len(&self) -> usize {
        self.pre_samples() + self.post_cycles_detect * self.cycle_samples
    }

    /// Classify-window length (501 at defaults).
    pub fn classify_len(&self) -> usize {
        self.post_cycles_classify * self.cycle_samples
    }

    /// Samples needed after the trigger (inclusive) for both windows.
    fn post_needed(&self) -> usize {
        self.classify_len().max(self.post_cycles_detect * self.cycle_samples)
    }
}

/// Filter output for `t = 0 ..= n - 2 n_c` (`n - 2 n_c + 1` values).
pub fn cdf_series(id: &[f64], n_c: usize) -> Result<Vec<f64>, DetectError> {
    let needed = 2 * n_c + 1;
    if n_c == 0 || id.len() < needed {
        return Err(DetectError::TooShort { needed, got: id.len() });
    }
    Ok((0..=id.len() - 2 * n_c).map(|t| cdf_at(id, t, n_c)).collect())
}

fn abs_sum(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}

fn cdf_at(id: &[f64], t: usize, n_c: usize) -> f64 {
    abs_sum(&id[t + n_c..t + 2 * n_c]) - abs_sum(&id[t..t + n_c])
}

/// Per-phase filter value for window start `t` over a three-phase record.
fn cdf3_at(x: &[Sample3], t: usize, n_c: usize) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (p, o) in out.iter_mut().enumerate() {
        let mut cur = 0.0;
        let mut prev = 0.0;
        for k in 0..n_c {
            prev += x[t + k][p].abs();
            cur += x[t + n_c + k][p].abs();
        }
        *o = cur - prev;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionEvent {
    pub triggered: bool,
    pub trigger_index: Option<usize>,
    pub trigger_phase: Option<Phase>,
    /// `[trigger - pre, trigger + post_detect * n_c)`.
    pub detect_window: Option<Vec<Sample3>>,
    /// `[trigger, trigger + post_classify * n_c)`.
    pub classify_window: Option<Vec<Sample3>>,
}

impl DetectionEvent {
    pub fn none() -> Self {
        Self { triggered: false, trigger_index: None, trigger_phase: None, detect_window: None, classify_window: None }
    }
}

/// First trigger of the record, or `None`. Scans forward and stops at the
/// first window above threshold; triggers whose windows would not fit in the
/// record are not reported.
pub fn first_trigger(x: &[Sample3], cfg: &CdfConfig) -> Option<(usize, Phase)> {
    let n_c = cfg.cycle_samples;
    if x.len() < 2 * n_c {
        return None;
    }
    for t in 0..=x.len() - 2 * n_c {
        let cdf = cdf3_at(x, t, n_c);
        if let Some(p) = (0..3).find(|&p| cdf[p] > cfg.threshold) {
            // Defer until the pre-trigger window fits.
            let trigger = (t + 2 * n_c - 1).max(cfg.pre_samples());
            if trigger + cfg.post_needed() > x.len() {
                return None;
            }
            return Some((trigger, Phase::from_index(p)));
        }
    }
    None
}

pub fn detect_samples(x: &[Sample3], cfg: &CdfConfig) -> DetectionEvent {
    match first_trigger(x, cfg) {
        None => DetectionEvent::none(),
        Some((trigger, phase)) => {
            let pre = cfg.pre_samples();
            let post = cfg.post_cycles_detect * cfg.cycle_samples;
            DetectionEvent {
                triggered: true,
                trigger_index: Some(trigger),
                trigger_phase: Some(phase),
                detect_window: Some(x[trigger - pre..trigger + post].to_vec()),
                classify_window: Some(x[trigger..trigger + cfg.classify_len()].to_vec()),
            }
        }
    }
}

pub fn detect(w: &Waveform, cfg: &CdfConfig) -> DetectionEvent {
    detect_samples(&w.samples, cfg)
}

/// Windows registered at a known event index instead of a filter trigger.
pub fn windows_at(x: &[Sample3], index: usize, cfg: &CdfConfig) -> Option<(Vec<Sample3>, Vec<Sample3>)> {
    let pre = cfg.pre_samples();
    if index < pre || index + cfg.post_needed() > x.len() {
        return None;
    }
    let post = cfg.post_cycles_detect * cfg.cycle_samples;
    Some((x[index - pre..index + post].to_vec(), x[index..index + cfg.classify_len()].to_vec()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StreamEvent {
    /// The detect window closed: enough data for the trip/restrain verdict.
    Verdict { trigger_index: usize, trigger_phase: Phase, detect_window: Vec<Sample3> },
    /// The classify window closed: enough data for drill-down labels.
    DrillDown { trigger_index: usize, classify_window: Vec<Sample3> },
}

/// Sample-at-a-time detector with rolling window sums. Memory is bounded by
/// the window lengths; one event is reported per stream until [`reset`].
///
/// [`reset`]: StreamingDetector::reset
#[derive(Debug, Clone)]
pub struct StreamingDetector {
    cfg: CdfConfig,
    buf: VecDeque<Sample3>,
    capacity: usize,
    seen: usize,
    prev_sum: [f64; 3],
    cur_sum: [f64; 3],
    trigger: Option<(usize, Phase)>,
    verdict_sent: bool,
    done: bool,
}

/// Rolling sums are rebuilt from the buffer this often to bound drift.
const RECOMPUTE_EVERY: usize = 1024;

impl StreamingDetector {
    pub fn new(cfg: CdfConfig) -> Result<Self, DetectError> {
        cfg.validate()?;
        let n_c = cfg.cycle_samples;
        let capacity = (2 * n_c).max(cfg.pre_samples() + cfg.post_needed());
        Ok(Self {
            cfg,
            buf: VecDeque::with_capacity(capacity),
            capacity,
            seen: 0,
            prev_sum: [0.0; 3],
            cur_sum: [0.0; 3],
            trigger: None,
            verdict_sent: false,
            done: false,
        })
    }

    pub fn config(&self) -> &CdfConfig {
        &self.cfg
    }

    pub fn samples_seen(&self) -> usize {
        self.seen
    }

    /// Buffered samples; never exceeds the window-derived capacity.
    pub fn buffered(&self) -> usize {
        self.buf.len()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn reset(&mut self) {
        *self = Self::new(self.cfg).expect("config was validated");
    }

    /// Absolute stream index of buffer slot 0.
    fn base(&self) -> usize {
        self.seen - self.buf.len()
    }

    fn slice(&self, from: usize, to: usize) -> Vec<Sample3> {
        let b = self.base();
        (from..to).map(|i| self.buf[i - b]).collect()
    }

    fn recompute(&mut self) {
        let n_c = self.cfg.cycle_samples;
        let len = self.buf.len();
        for p in 0..3 {
            self.cur_sum[p] = (len - n_c..len).map(|i| self.buf[i][p].abs()).sum();
            self.prev_sum[p] = (len - 2 * n_c..len - n_c).map(|i| self.buf[i][p].abs()).sum();
        }
    }

    pub fn push(&mut self, s: Sample3) -> Option<StreamEvent> {
        if self.done {
            return None;
        }
        let n_c = self.cfg.cycle_samples;
        if self.buf.len() == self.capacity {
            self.buf.pop_front();
        }
        self.buf.push_back(s);
        self.seen += 1;
        let n = self.seen - 1;

        if self.trigger.is_none() {
            let len = self.buf.len();
            if self.seen > 2 * n_c && !self.seen.is_multiple_of(RECOMPUTE_EVERY) {
                // Slide both windows by one sample.
                let leaving_cur = self.buf[len - 1 - n_c];
                let leaving_prev = self.buf[len - 1 - 2 * n_c];
                for p in 0..3 {
                    self.cur_sum[p] += s[p].abs() - leaving_cur[p].abs();
                    self.prev_sum[p] += leaving_cur[p].abs() - leaving_prev[p].abs();
                }
            } else if self.seen >= 2 * n_c {
                self.recompute();
            }
            if self.seen >= 2 * n_c {
                if let Some(p) = (0..3).find(|&p| self.cur_sum[p] - self.prev_sum[p] > self.cfg.threshold) {
                    self.trigger = Some((n.max(self.cfg.pre_samples()), Phase::from_index(p)));
                }
            }
        }

        let (trigger, phase) = self.trigger?;
        let detect_end = trigger + self.cfg.post_cycles_detect * n_c;
        if !self.verdict_sent && self.seen >= detect_end {
            self.verdict_sent = true;
            return Some(StreamEvent::Verdict {
                trigger_index: trigger,
                trigger_phase: phase,
                detect_window: self.slice(trigger - self.cfg.pre_samples(), detect_end),
            });
        }
        let classify_end = trigger + self.cfg.classify_len();
        if self.verdict_sent && self.seen >= classify_end {
            self.done = true;
            return Some(StreamEvent::DrillDown {
                trigger_index: trigger,
                classify_window: self.slice(trigger, classify_end),
            });
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_evaluated_step() {
        let id = [0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0];
        assert_eq!(cdf_series(&id, 2).unwrap(), vec![0.0, 1.0, 2.0, 1.0, 0.0]);
    }

    #[test]
    fn too_short_is_an_error() {
        assert_eq!(cdf_series(&[1.0; 4], 2), Err(DetectError::TooShort { needed: 5, got: 4 }));
    }

    #[test]
    fn default_windows() {
        let cfg = CdfConfig::default();
        assert_eq!(cfg.pre_samples(), 83);
        assert_eq!(cfg.detect_len(), 250);
        assert_eq!(cfg.classify_len(), 501);
    }

    fn sine(n: usize, amp: f64) -> Vec<Sample3> {
        let spec = SamplingSpec::default();
        (0..n)
            .map(|i| {
                let a = spec.angle_at(i);
                [amp * a.sin(), amp * (a - 2.1).sin(), amp * (a + 2.1).sin()]
            })
            .collect()
    }

    #[test]
    fn steady_sinusoid_never_triggers() {
        let x = sine(2000, 1.0);
        assert!(!detect_samples(&x, &CdfConfig::default()).triggered);
    }

    #[test]
    fn step_triggers_at_the_step_with_full_windows() {
        let mut x = sine(1500, 0.01);
        for s in x.iter_mut().skip(600) {
            s[1] += 0.5;
        }
        let ev = detect_samples(&x, &CdfConfig::default());
        assert_eq!(ev.trigger_index, Some(600));
        assert_eq!(ev.trigger_phase, Some(Phase::B));
        assert_eq!(ev.detect_window.unwrap().len(), 250);
        assert_eq!(ev.classify_window.unwrap().len(), 501);
    }

    #[test]
    fn streaming_matches_batch_and_stays_bounded() {
        let mut x = sine(3000, 0.02);
        for s in x.iter_mut().skip(1400) {
            s[2] *= 30.0;
        }
        let cfg = CdfConfig::default();
        let batch = detect_samples(&x, &cfg);
        let mut sd = StreamingDetector::new(cfg).unwrap();
        let mut events = Vec::new();
        for (n, s) in x.iter().enumerate() {
            if let Some(e) = sd.push(*s) {
                events.push((n, e));
            }
            assert!(sd.buffered() <= sd.capacity());
        }
        assert_eq!(events.len(), 2);
        match &events[0] {
            (n, StreamEvent::Verdict { trigger_index, detect_window, .. }) => {
                assert_eq!(Some(*trigger_index), batch.trigger_index);
                assert_eq!(Some(detect_window), batch.detect_window.as_ref());
                // Verdict is available once the last detect-window sample arrives.
                assert_eq!(*n, trigger_index + cfg.cycle_samples - 1);
            }
            other => panic!("unexpected {other:?}"),
        }
        match &events[1] {
            (_, StreamEvent::DrillDown { classify_window, .. }) => {
                assert_eq!(Some(classify_window), batch.classify_window.as_ref());
            }
            other => panic!("unexpected {other:?}"),
        }
        sd.reset();
        assert_eq!(sd.samples_seen(), 0);
    }

    proptest! {
        #[test]
        fn periodic_inputs_give_zero(amp in 0.01f64..100.0, phase in 0.0f64..6.3, h3 in 0.0f64..1.0, nc in 2usize..200) {
            let n = 4 * nc + 3;
            let x: Vec<f64> = (0..n)
                .map(|i| {
                    let a = 2.0 * std::f64::consts::PI * ((i % nc) as f64) / nc as f64;
                    amp * (a + phase).sin() + h3 * (3.0 * a).cos()
                })
                .collect();
            let c = cdf_series(&x, nc).unwrap();
            prop_assert_eq!(c.len(), n - 2 * nc + 1);
            for v in c {
                prop_assert!(v.abs() <= 1e-9 * amp.max(1.0) * nc as f64);
            }
        }

        #[test]
        fn positive_scaling_scales_output(k in 0.01f64..100.0, seed in 0u64..1000) {
            let x: Vec<f64> = (0..40).map(|i| ((i as u64 * 2654435761 + seed) % 97) as f64 / 10.0 - 4.0).collect();
            let a = cdf_series(&x, 7).unwrap();
            let xs: Vec<f64> = x.iter().map(|v| v * k).collect();
            let b = cdf_series(&xs, 7).unwrap();
            for (u, v) in a.iter().zip(&b) {
                prop_assert!((u * k - v).abs() <= 1e-9 * (1.0 + v.abs()));
            }
        }

        #[test]
        fn trigger_is_translation_equivariant(k in 0usize..167, at in 500usize..800) {
            let mut x = sine(1600, 0.01);
            for s in x.iter_mut().skip(at) {
                s[0] += 0.3 * (s[0] * 50.0).sin() + 0.2;
            }
            let cfg = CdfConfig::default();
            let base = first_trigger(&x, &cfg).map(|t| t.0);
            let shifted = first_trigger(&x[k..], &cfg).map(|t| t.0 + k);
            prop_assert_eq!(base, shifted);
        }
    }
}
