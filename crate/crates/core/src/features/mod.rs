//! Five feature families computed per phase and assembled into fixed,
//! task-specific vectors.
//!
//! Family parameterizations are frozen per task so a vector is reproducible
//! from its name list alone; [`schema_hash`] fingerprints that list.

pub mod ops;

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::detector::CdfConfig;
use crate::signal::{Phase, Sample3, SamplingSpec};

pub use ops::{
    agg_linear_trend, ar_coefficients, change_quantile, dft_coefficient, hann, quantile, welch_density, welch_spectrum,
    Aggregator, DftPart, TrendStat,
};

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("sequence of {got} samples is too short; need at least {needed}")]
    TooShort { needed: usize, got: usize },
    #[error("invalid feature parameter: {0}")]
    InvalidParameter(String),
    #[error("index {index} out of range (max {max})")]
    IndexOutOfRange { index: usize, max: usize },
    #[error("autoregressive design is rank-deficient: lag {lag} is a combination of the intercept and shorter lags")]
    SingularDesign { lag: usize },
    #[error("window has {got} samples; task expects {expected}")]
    WrongWindowLength { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    ChangeQuantile,
    DftCoefficient,
    AggLinearTrend,
    WelchDensity,
    AutoregressiveCoeff,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::ChangeQuantile,
        Family::DftCoefficient,
        Family::AggLinearTrend,
        Family::WelchDensity,
        Family::AutoregressiveCoeff,
    ];

    pub fn slug(self) -> &'static str {
        match self {
            Family::ChangeQuantile => "change_quantile",
            Family::DftCoefficient => "dft_coefficient",
            Family::AggLinearTrend => "agg_linear_trend",
            Family::WelchDensity => "welch_density",
            Family::AutoregressiveCoeff => "ar_coefficient",
        }
    }
}

/// One feature of one channel, tagged by family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family")]
pub enum FeatureSpec {
    ChangeQuantile { ql: f64, qh: f64 },
    DftCoefficient { k: usize, part: DftPart },
    AggLinearTrend { window: usize, stat: TrendStat, agg: Aggregator },
    WelchDensity { bin: usize, segment: usize },
    AutoregressiveCoeff { order: usize, coeff: usize },
}

impl FeatureSpec {
    pub fn family(&self) -> Family {
        match self {
            FeatureSpec::ChangeQuantile { .. } => Family::ChangeQuantile,
            FeatureSpec::DftCoefficient { .. } => Family::DftCoefficient,
            FeatureSpec::AggLinearTrend { .. } => Family::AggLinearTrend,
            FeatureSpec::WelchDensity { .. } => Family::WelchDensity,
            FeatureSpec::AutoregressiveCoeff { .. } => Family::AutoregressiveCoeff,
        }
    }

    pub fn validate(&self) -> Result<(), FeatureError> {
        let ok = match *self {
            FeatureSpec::ChangeQuantile { ql, qh } => (0.0..1.0).contains(&ql) && ql < qh && qh <= 1.0,
            FeatureSpec::DftCoefficient { .. } => true,
            FeatureSpec::AggLinearTrend { window, .. } => window >= 2,
            FeatureSpec::WelchDensity { bin, segment } => segment.is_power_of_two() && bin <= segment / 2,
            FeatureSpec::AutoregressiveCoeff { order, coeff } => order >= 1 && coeff <= order,
        };
        if ok {
            Ok(())
        } else {
            Err(FeatureError::InvalidParameter(format!("{self:?}")))
        }
    }

    /// First 8 hex digits of the SHA-256 of the canonical JSON form.
    pub fn param_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("feature specs serialize");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().take(4).map(|b| format!("{b:02x}")).collect()
    }

    /// Evaluate on one channel.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64, FeatureError> {
        match *self {
            FeatureSpec::ChangeQuantile { ql, qh } => change_quantile(x, ql, qh),
            FeatureSpec::DftCoefficient { k, part } => dft_coefficient(x, k, part),
            FeatureSpec::AggLinearTrend { window, stat, agg } => agg_linear_trend(x, window, stat, agg),
            FeatureSpec::WelchDensity { bin, segment } => welch_density(x, bin, segment),
            FeatureSpec::AutoregressiveCoeff { order, coeff } => {
                if coeff > order {
                    return Err(FeatureError::IndexOutOfRange { index: coeff, max: order });
                }
                Ok(ar_coefficients(x, order)?[coeff])
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Task {
    DetectFault,
    LocateUnit,
    IdentifySeries,
    IdentifyExciting,
    #[serde(rename = "IdentifyPT")]
    IdentifyPt,
    IdentifyDisturbance,
}

impl Task {
    pub const ALL: [Task; 6] = [
        Task::DetectFault,
        Task::LocateUnit,
        Task::IdentifySeries,
        Task::IdentifyExciting,
        Task::IdentifyPt,
        Task::IdentifyDisturbance,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Task::DetectFault => "DetectFault",
            Task::LocateUnit => "LocateUnit",
            Task::IdentifySeries => "IdentifySeries",
            Task::IdentifyExciting => "IdentifyExciting",
            Task::IdentifyPt => "IdentifyPT",
            Task::IdentifyDisturbance => "IdentifyDisturbance",
        }
    }

    /// Per-phase feature counts for families F1..F5.
    pub fn family_counts(self) -> [usize; 5] {
        match self {
            Task::DetectFault => [2, 1, 1, 1, 1],
            Task::LocateUnit => [2, 2, 2, 0, 0],
            Task::IdentifySeries => [3, 1, 2, 1, 0],
            Task::IdentifyExciting | Task::IdentifyPt => [3, 2, 2, 0, 0],
            Task::IdentifyDisturbance => [2, 1, 1, 0, 1],
        }
    }

    pub fn vector_len(self) -> usize {
        3 * self.family_counts().iter().sum::<usize>()
    }

    /// Only the fault-detection stage sees the short verdict window.
    pub fn uses_detect_window(self) -> bool {
        self == Task::DetectFault
    }

    pub fn window_len(self, spec: &SamplingSpec) -> usize {
        let cfg = CdfConfig::for_spec(spec);
        if self.uses_detect_window() {
            cfg.detect_len()
        } else {
            cfg.classify_len()
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Task::ALL.into_iter().find(|t| t.name() == s).ok_or_else(|| format!("unknown task '{s}'"))
    }
}

const WELCH_SEGMENT: usize = 64;
const AR_ORDER: usize = 4;
const TREND_WINDOW: usize = 10;

/// Ordered per-phase spec list for a task. Each family contributes the first
/// `count` entries of its fixed candidate list.
pub fn task_specs(task: Task, spec: &SamplingSpec) -> Vec<FeatureSpec> {
    let welch_bin = ((2.0 * spec.fundamental_hz * WELCH_SEGMENT as f64 / spec.sample_rate_hz).round() as usize)
        .min(WELCH_SEGMENT / 2);
    let candidates: [Vec<FeatureSpec>; 5] = [
        vec![
            FeatureSpec::ChangeQuantile { ql: 0.4, qh: 0.8 },
            FeatureSpec::ChangeQuantile { ql: 0.2, qh: 0.8 },
            FeatureSpec::ChangeQuantile { ql: 0.0, qh: 0.6 },
        ],
        vec![
            FeatureSpec::DftCoefficient { k: 1, part: DftPart::Abs },
            FeatureSpec::DftCoefficient { k: 2, part: DftPart::Abs },
        ],
        vec![
            FeatureSpec::AggLinearTrend { window: TREND_WINDOW, stat: TrendStat::Slope, agg: Aggregator::Mean },
            FeatureSpec::AggLinearTrend { window: TREND_WINDOW, stat: TrendStat::Stderr, agg: Aggregator::Mean },
        ],
        vec![FeatureSpec::WelchDensity { bin: welch_bin, segment: WELCH_SEGMENT }],
        vec![FeatureSpec::AutoregressiveCoeff { order: AR_ORDER, coeff: 1 }],
    ];
    task.family_counts().iter().zip(candidates).flat_map(|(&n, c)| c.into_iter().take(n)).collect()
}

/// Names in vector order: phase-a specs, then phase b, then phase c.
pub fn feature_names(task: Task, spec: &SamplingSpec) -> Vec<String> {
    let specs = task_specs(task, spec);
    Phase::ALL
        .iter()
        .flat_map(|p| specs.iter().map(move |s| format!("{}_{}_{}", p.name(), s.family().slug(), s.param_hash())))
        .collect()
}

/// Hex SHA-256 over the newline-joined feature names.
pub fn schema_hash_of(names: &[String]) -> String {
    Sha256::digest(names.join("\n").as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn schema_hash(task: Task, spec: &SamplingSpec) -> String {
    schema_hash_of(&feature_names(task, spec))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub task: Task,
    pub values: Vec<f64>,
    pub names: Vec<String>,
    /// Set when an autoregressive feature fell back to 0 on a singular or
    /// non-finite fit.
    pub ar_fallback: bool,
}

/// Task vector for a three-phase window. Deterministic; never yields
/// non-finite values (degenerate AR fits become 0 with `ar_fallback` set).
pub fn extract(window: &[Sample3], task: Task, spec: &SamplingSpec) -> Result<FeatureVector, FeatureError> {
    let expected = task.window_len(spec);
    if window.len() != expected {
        return Err(FeatureError::WrongWindowLength { expected, got: window.len() });
    }
    let specs = task_specs(task, spec);
    let mut values = Vec::with_capacity(task.vector_len());
    let mut ar_fallback = false;
    let mut channel = vec![0.0; window.len()];
    for p in 0..3 {
        for (c, s) in channel.iter_mut().zip(window) {
            *c = s[p];
        }
        for fs in &specs {
            let v = match fs.evaluate(&channel) {
                Ok(v) if v.is_finite() => v,
                Ok(_) | Err(FeatureError::SingularDesign { .. }) if fs.family() == Family::AutoregressiveCoeff => {
                    ar_fallback = true;
                    0.0
                }
                Ok(v) => return Err(FeatureError::InvalidParameter(format!("{fs:?} produced {v}"))),
                Err(e) => return Err(e),
            };
            values.push(v);
        }
    }
    Ok(FeatureVector { task, values, names: feature_names(task, spec), ar_fallback })
}

/// Sidecar describing a feature-matrix CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub task: Task,
    pub names: Vec<String>,
    pub specs: Vec<FeatureSpec>,
    pub schema_hash: String,
}

impl FeatureSchema {
    pub fn for_task(task: Task, spec: &SamplingSpec) -> Self {
        Self {
            task,
            names: feature_names(task, spec),
            specs: task_specs(task, spec),
            schema_hash: schema_hash(task, spec),
        }
    }
}

/// Feature-matrix CSV: `id,<names...>,label`, one row per case.
pub fn write_feature_csv<W: Write>(
    mut out: W,
    names: &[String],
    rows: &[(String, Vec<f64>, String)],
) -> std::io::Result<()> {
    writeln!(out, "id,{},label", names.join(","))?;
    for (id, values, label) in rows {
        let vals: Vec<String> = values.iter().map(|v| format!("{v:.12e}")).collect();
        writeln!(out, "{id},{},{label}", vals.join(","))?;
    }
    Ok(())
}
