//! Wall-clock timing of pipeline stages.

use std::time::Instant;

use serde::{Deserialize, Serialize};

pub const MIN_TIMING_RUNS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub runs: usize,
    pub median_s: f64,
    pub mean_s: f64,
}

impl std::fmt::Display for StageTiming {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:<24} median {:.6} s  mean {:.6} s  ({} runs)", self.stage, self.median_s, self.mean_s, self.runs)
    }
}

/// Runs `f` `max(runs, MIN_TIMING_RUNS)` times; times are rounded to whole
/// microseconds.
pub fn time_stage<F: FnMut()>(stage: &str, runs: usize, mut f: F) -> StageTiming {
    let runs = runs.max(MIN_TIMING_RUNS);
    let mut t: Vec<f64> = (0..runs)
        .map(|_| {
            let start = Instant::now();
            f();
            start.elapsed().as_micros() as f64 * 1e-6
        })
        .collect();
    t.sort_by(f64::total_cmp);
    let median = if runs % 2 == 1 { t[runs / 2] } else { 0.5 * (t[runs / 2 - 1] + t[runs / 2]) };
    StageTiming { stage: stage.to_string(), runs, median_s: median, mean_s: t.iter().sum::<f64>() / runs as f64 }
}
