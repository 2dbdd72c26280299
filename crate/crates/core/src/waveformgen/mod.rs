//! Labeled synthetic differential-current waveforms.
//!
//! Internal faults come from a lumped three-phase circuit built around the
//! coupled-coil transformer matrices in [`inductance`]; disturbances come
//! from per-sample signature models in [`disturbance`].

pub mod circuit;
pub mod corpus;
pub mod disturbance;
pub mod fault;
pub mod inductance;
pub mod noise;
pub mod saturation;
pub mod units;

use thiserror::Error;

use crate::signal::SignalError;

pub use corpus::{generate_cases, generate_corpus, read_corpus, CaseSpec, CorpusPlan, ManifestEntry, SweepGrid};
pub use disturbance::{generate_disturbance, inrush_flux, DisturbanceParams};
pub use fault::{simulate_internal_fault, FaultSpec, ShiftDirection, Side};
pub use inductance::{build_three_winding_l, build_two_winding_l, InductanceMatrix, TwoWindingParams};
pub use noise::add_noise;
pub use units::UnitModel;

#[derive(Debug, Error)]
pub enum GenError {
    #[error("parameter {name} = {value} must be strictly positive")]
    NonPositiveParameter { name: String, value: f64 },
    #[error("{name} = {value}% is outside [0, 100]")]
    FaultFractionOutOfRange { name: String, value: f64 },
    #[error("inductance or system matrix is singular ({0})")]
    SingularMatrix(String),
    #[error("inception index {inception} invalid for {len} samples ({min_post} post-event samples required)")]
    InvalidInception { inception: usize, len: usize, min_post: usize },
    #[error("unknown disturbance {0:?}")]
    UnknownDisturbance(String),
    #[error("parameter {name} = {value} outside table bound {bound}")]
    ParameterOutOfRange { name: String, value: f64, bound: String },
    #[error("corpus plan enumerates no cases")]
    PlanEmpty,
    #[error("i/o failure on {path}: {source}")]
    IoFailure { path: String, source: std::io::Error },
    #[error(transparent)]
    Signal(#[from] SignalError),
}

/// Validate record length and inception against the waveform invariants.
pub(crate) fn check_layout(
    spec: &crate::signal::SamplingSpec,
    duration_cycles: usize,
    inception: usize,
) -> Result<usize, GenError> {
    spec.validate()?;
    let nc = spec.samples_per_cycle();
    let len = duration_cycles * nc;
    if duration_cycles < 5 || inception + 3 * nc > len {
        return Err(GenError::InvalidInception { inception, len, min_post: 3 * nc });
    }
    Ok(len)
}
