//! Detection and classification of internal faults and transient
//! disturbances in power transformers and phase-angle regulators from
//! three-phase differential currents.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod detector;
pub mod ensembles;
pub mod evaluation;
pub mod features;
mod par;
pub mod pipeline;
pub mod resampling;
pub mod rng;
pub mod signal;
pub mod waveformgen;
