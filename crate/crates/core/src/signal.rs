//! Sampled three-phase differential-current records and their event labels.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Three phase samples `(ia, ib, ic)` in per-unit of rated peak current.
pub type Sample3 = [f64; 3];

/// Generator parameter record attached to every synthetic waveform.
/// Keys are kept sorted so serialized provenance is byte-stable.
pub type Provenance = serde_json::Map<String, serde_json::Value>;

pub const CSV_HEADER: &str = "t_s,ia_pu,ib_pu,ic_pu";

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("invalid sampling: {0}")]
    InvalidSampling(String),
    #[error("waveform invariant violated: {0}")]
    Invariant(String),
    #[error("csv line {line}: {msg}")]
    Csv { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingSpec {
    pub sample_rate_hz: f64,
    pub fundamental_hz: f64,
}

impl Default for SamplingSpec {
    fn default() -> Self {
        Self { sample_rate_hz: 10_000.0, fundamental_hz: 60.0 }
    }
}

impl SamplingSpec {
    /// Integer cycle length used by every window computation (167 at defaults).
    pub fn samples_per_cycle(&self) -> usize {
        (self.sample_rate_hz / self.fundamental_hz).round() as usize
    }

    /// Angular advance per sample of the synthesized fundamental. The
    /// generator runs at `fs / samples_per_cycle` so one cycle is exactly an
    /// integer number of samples.
    pub fn omega_per_sample(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.samples_per_cycle() as f64
    }

    /// Effective synthesized fundamental in rad/s.
    pub fn omega_rad_s(&self) -> f64 {
        self.omega_per_sample() * self.sample_rate_hz
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate_hz
    }

    /// Phase angle of the fundamental at sample `n`, reduced modulo one cycle
    /// so that samples one cycle apart get bit-identical angles.
    pub fn angle_at(&self, n: usize) -> f64 {
        let spc = self.samples_per_cycle();
        self.omega_per_sample() * (n % spc) as f64
    }

    pub fn validate(&self) -> Result<(), SignalError> {
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return Err(SignalError::InvalidSampling(format!("sample rate {} must be positive", self.sample_rate_hz)));
        }
        if !(self.fundamental_hz.is_finite() && self.fundamental_hz > 0.0) {
            return Err(SignalError::InvalidSampling(format!("fundamental {} must be positive", self.fundamental_hz)));
        }
        if self.samples_per_cycle() < 2 {
            return Err(SignalError::InvalidSampling("fewer than 2 samples per cycle".into()));
        }
        Ok(())
    }

    /// Highest harmonic order that stays below Nyquist.
    pub fn max_harmonic(&self) -> usize {
        ((self.sample_rate_hz / 2.0) / self.fundamental_hz).ceil() as usize - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Phase {
    #[serde(rename = "a")]
    A,
    #[serde(rename = "b")]
    B,
    #[serde(rename = "c")]
    C,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::A, Phase::B, Phase::C];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Phase {
        Phase::ALL[i]
    }

    /// Electrical angle offset of the phase (a leads, b lags 120°, c leads 120°).
    pub fn angle_offset(self) -> f64 {
        let third = 2.0 * std::f64::consts::PI / 3.0;
        match self {
            Phase::A => 0.0,
            Phase::B => -third,
            Phase::C => third,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Phase::A => "a",
            Phase::B => "b",
            Phase::C => "c",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EventKind {
    InternalFault,
    Disturbance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Unit {
    #[serde(rename = "PT")]
    Pt,
    SeriesUnit,
    ExcitingUnit,
}

impl Unit {
    pub const ALL: [Unit; 3] = [Unit::Pt, Unit::SeriesUnit, Unit::ExcitingUnit];

    pub fn name(self) -> &'static str {
        match self {
            Unit::Pt => "PT",
            Unit::SeriesUnit => "SeriesUnit",
            Unit::ExcitingUnit => "ExcitingUnit",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FaultType {
    #[serde(rename = "wa-g")]
    WaG,
    #[serde(rename = "wb-g")]
    WbG,
    #[serde(rename = "wc-g")]
    WcG,
    #[serde(rename = "wa-wb-g")]
    WaWbG,
    #[serde(rename = "wa-wc-g")]
    WaWcG,
    #[serde(rename = "wb-wc-g")]
    WbWcG,
    #[serde(rename = "wa-wb")]
    WaWb,
    #[serde(rename = "wa-wc")]
    WaWc,
    #[serde(rename = "wb-wc")]
    WbWc,
    #[serde(rename = "wa-wb-wc")]
    WaWbWc,
    #[serde(rename = "wa-wb-wc-g")]
    WaWbWcG,
    TurnToTurn,
    WindingToWinding,
}

impl FaultType {
    pub const ALL: [FaultType; 13] = [
        FaultType::WaG,
        FaultType::WbG,
        FaultType::WcG,
        FaultType::WaWbG,
        FaultType::WaWcG,
        FaultType::WbWcG,
        FaultType::WaWb,
        FaultType::WaWc,
        FaultType::WbWc,
        FaultType::WaWbWc,
        FaultType::WaWbWcG,
        FaultType::TurnToTurn,
        FaultType::WindingToWinding,
    ];

    /// The eleven phase and ground fault types.
    pub const PHASE_GROUND: [FaultType; 11] = [
        FaultType::WaG,
        FaultType::WbG,
        FaultType::WcG,
        FaultType::WaWbG,
        FaultType::WaWcG,
        FaultType::WbWcG,
        FaultType::WaWb,
        FaultType::WaWc,
        FaultType::WbWc,
        FaultType::WaWbWc,
        FaultType::WaWbWcG,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FaultType::WaG => "wa-g",
            FaultType::WbG => "wb-g",
            FaultType::WcG => "wc-g",
            FaultType::WaWbG => "wa-wb-g",
            FaultType::WaWcG => "wa-wc-g",
            FaultType::WbWcG => "wb-wc-g",
            FaultType::WaWb => "wa-wb",
            FaultType::WaWc => "wa-wc",
            FaultType::WbWc => "wb-wc",
            FaultType::WaWbWc => "wa-wb-wc",
            FaultType::WaWbWcG => "wa-wb-wc-g",
            FaultType::TurnToTurn => "TurnToTurn",
            FaultType::WindingToWinding => "WindingToWinding",
        }
    }

    /// Phases involved and whether the fault path reaches ground. `None` for
    /// the single-phase intra-winding types, whose phase is a separate parameter.
    pub fn phases(self) -> Option<(&'static [Phase], bool)> {
        use Phase::*;
        Some(match self {
            FaultType::WaG => (&[A], true),
            FaultType::WbG => (&[B], true),
            FaultType::WcG => (&[C], true),
            FaultType::WaWbG => (&[A, B], true),
            FaultType::WaWcG => (&[A, C], true),
            FaultType::WbWcG => (&[B, C], true),
            FaultType::WaWb => (&[A, B], false),
            FaultType::WaWc => (&[A, C], false),
            FaultType::WbWc => (&[B, C], false),
            FaultType::WaWbWc => (&[A, B, C], false),
            FaultType::WaWbWcG => (&[A, B, C], true),
            FaultType::TurnToTurn | FaultType::WindingToWinding => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DisturbanceType {
    MagnetizingInrush,
    SympatheticInrush,
    ExternalFaultCTSat,
    CapacitorSwitching,
    NonlinearLoadSwitching,
    Ferroresonance,
}

impl DisturbanceType {
    pub const ALL: [DisturbanceType; 6] = [
        DisturbanceType::MagnetizingInrush,
        DisturbanceType::SympatheticInrush,
        DisturbanceType::ExternalFaultCTSat,
        DisturbanceType::CapacitorSwitching,
        DisturbanceType::NonlinearLoadSwitching,
        DisturbanceType::Ferroresonance,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DisturbanceType::MagnetizingInrush => "MagnetizingInrush",
            DisturbanceType::SympatheticInrush => "SympatheticInrush",
            DisturbanceType::ExternalFaultCTSat => "ExternalFaultCTSat",
            DisturbanceType::CapacitorSwitching => "CapacitorSwitching",
            DisturbanceType::NonlinearLoadSwitching => "NonlinearLoadSwitching",
            DisturbanceType::Ferroresonance => "Ferroresonance",
        }
    }
}

macro_rules! from_str_by_name {
    ($ty:ty, $all:expr) => {
        impl FromStr for $ty {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                $all.iter()
                    .copied()
                    .find(|v| v.name().eq_ignore_ascii_case(s))
                    .ok_or_else(|| format!("unknown {}: {s}", stringify!($ty)))
            }
        }
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }
    };
}

from_str_by_name!(Unit, Unit::ALL);
from_str_by_name!(FaultType, FaultType::ALL);
from_str_by_name!(DisturbanceType, DisturbanceType::ALL);
from_str_by_name!(Phase, Phase::ALL);

/// Hierarchical event label: fault vs disturbance, then unit and fault type,
/// or disturbance type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EventLabel {
    pub kind: EventKind,
    pub unit: Option<Unit>,
    pub fault_type: Option<FaultType>,
    pub disturbance_type: Option<DisturbanceType>,
}

impl EventLabel {
    pub fn fault(unit: Unit, fault_type: FaultType) -> Self {
        Self { kind: EventKind::InternalFault, unit: Some(unit), fault_type: Some(fault_type), disturbance_type: None }
    }

    pub fn disturbance(kind: DisturbanceType) -> Self {
        Self { kind: EventKind::Disturbance, unit: None, fault_type: None, disturbance_type: Some(kind) }
    }

    pub fn is_valid(&self) -> bool {
        match self.kind {
            EventKind::InternalFault => {
                self.unit.is_some() && self.fault_type.is_some() && self.disturbance_type.is_none()
            }
            EventKind::Disturbance => {
                self.unit.is_none() && self.fault_type.is_none() && self.disturbance_type.is_some()
            }
        }
    }

    /// One of the seven top-level classes: `InternalFault` or a disturbance name.
    pub fn top_class(&self) -> &'static str {
        match (self.kind, self.disturbance_type) {
            (EventKind::Disturbance, Some(d)) => d.name(),
            _ => "InternalFault",
        }
    }

    /// Full hierarchical key, used for stratified splitting.
    pub fn key(&self) -> String {
        match self.kind {
            EventKind::InternalFault => format!(
                "InternalFault/{}/{}",
                self.unit.map_or("?", Unit::name),
                self.fault_type.map_or("?", FaultType::name)
            ),
            EventKind::Disturbance => {
                format!("Disturbance/{}", self.disturbance_type.map_or("?", DisturbanceType::name))
            }
        }
    }
}

/// Unlabeled three-phase record, e.g. ingested from CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub spec: SamplingSpec,
    pub samples: Vec<Sample3>,
}

/// Labeled synthetic differential-current record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waveform {
    pub spec: SamplingSpec,
    pub samples: Vec<Sample3>,
    pub label: EventLabel,
    pub inception_index: usize,
    pub provenance: Provenance,
}

impl Waveform {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn channel(&self, phase: Phase) -> Vec<f64> {
        self.samples.iter().map(|s| s[phase.index()]).collect()
    }

    pub fn record(&self) -> Record {
        Record { spec: self.spec, samples: self.samples.clone() }
    }

    /// Largest |s(t) − s(t + n_c)| over the steady pre-inception segment.
    pub fn pre_inception_residue(&self) -> f64 {
        let nc = self.spec.samples_per_cycle();
        let stop = self.inception_index.saturating_sub(nc);
        let mut worst = 0.0f64;
        for t in 0..stop {
            for p in 0..3 {
                worst = worst.max((self.samples[t][p] - self.samples[t + nc][p]).abs());
            }
        }
        worst
    }

    pub fn check_invariants(&self) -> Result<(), SignalError> {
        let nc = self.spec.samples_per_cycle();
        if self.samples.len() < 5 * nc {
            return Err(SignalError::Invariant(format!(
                "length {} shorter than 5 cycles ({})",
                self.samples.len(),
                5 * nc
            )));
        }
        if self.inception_index + 3 * nc > self.samples.len() {
            return Err(SignalError::Invariant(format!(
                "inception {} leaves fewer than 3 post-event cycles",
                self.inception_index
            )));
        }
        if !self.label.is_valid() {
            return Err(SignalError::Invariant(format!("inconsistent label {:?}", self.label)));
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), SignalError> {
        write_csv(&self.spec, &self.samples, out)
    }
}

pub fn write_csv<W: Write>(spec: &SamplingSpec, samples: &[Sample3], mut out: W) -> Result<(), SignalError> {
    let dt = spec.dt();
    writeln!(out, "{CSV_HEADER}")?;
    for (i, s) in samples.iter().enumerate() {
        writeln!(out, "{:.12e},{:.12e},{:.12e},{:.12e}", i as f64 * dt, s[0], s[1], s[2])?;
    }
    Ok(())
}

/// Parse one `t,ia,ib,ic` data row.
pub fn parse_row(line: &str, line_no: usize) -> Result<(f64, Sample3), SignalError> {
    let mut vals = [0.0; 4];
    let mut n = 0;
    for field in line.split(',') {
        if n == 4 {
            return Err(SignalError::Csv { line: line_no, msg: "more than 4 columns".into() });
        }
        vals[n] = field
            .trim()
            .parse::<f64>()
            .map_err(|e| SignalError::Csv { line: line_no, msg: format!("bad number {field:?}: {e}") })?;
        n += 1;
    }
    if n != 4 {
        return Err(SignalError::Csv { line: line_no, msg: format!("expected 4 columns, got {n}") });
    }
    Ok((vals[0], [vals[1], vals[2], vals[3]]))
}

pub fn is_header(line: &str) -> bool {
    line.trim_start().starts_with(|c: char| c.is_ascii_alphabetic())
}

/// Read a waveform CSV; the sample rate is inferred from the time column.
pub fn read_csv<R: BufRead>(input: R, fundamental_hz: f64) -> Result<Record, SignalError> {
    let mut times = Vec::new();
    let mut samples = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() || (i == 0 && is_header(&line)) {
            continue;
        }
        let (t, s) = parse_row(&line, i + 1)?;
        times.push(t);
        samples.push(s);
    }
    if times.len() < 2 {
        return Err(SignalError::Csv { line: times.len(), msg: "need at least two rows".into() });
    }
    let span = times[times.len() - 1] - times[0];
    if !(span > 0.0) {
        return Err(SignalError::Csv { line: 2, msg: "time column is not increasing".into() });
    }
    let mut fs = (times.len() - 1) as f64 / span;
    if (fs - fs.round()).abs() < 1e-6 * fs {
        fs = fs.round();
    }
    let spec = SamplingSpec { sample_rate_hz: fs, fundamental_hz };
    spec.validate()?;
    Ok(Record { spec, samples })
}
