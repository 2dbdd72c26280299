//! Coupled-coil inductance matrices for multi-winding single-phase transformers.
//!
//! Every winding is split into two series coils: the neutral-side portion
//! (fraction `f`) and the line-side remainder (`1 - f`). Leakage is shared by
//! the fractional turns, magnetizing inductance scales with the turns squared,
//! and all mutuals are geometric means of the magnetizing components.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::GenError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoWindingParams {
    pub mva: f64,
    pub v1: f64,
    pub v2: f64,
    pub f: f64,
    /// Leakage reactance, per-unit.
    pub xl: f64,
    /// Magnetizing current, per-unit, applied to both windings.
    pub im: f64,
    /// Percent of winding 1 on the neutral side of the split point.
    pub fault1: f64,
    /// Percent of winding 2 on the neutral side of the split point.
    pub fault2: f64,
}

/// One winding of an N-winding unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindingSpec {
    pub kv: f64,
    /// Percent of the winding on the neutral side of the split point.
    pub split_pct: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InductanceMatrix {
    pub entries: DMatrix<f64>,
    /// Magnetizing component of each coil's self inductance.
    pub magnetizing: Vec<f64>,
    /// Leakage component of each coil's self inductance.
    pub leakage: Vec<f64>,
}

/// Quantities the winding recipe derives but the matrix never uses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindingDiagnostics {
    /// Full-winding magnetizing inductances of windings 1 and 2.
    pub l1: f64,
    pub l2: f64,
    /// Voltage ratio v1/v2.
    pub tr: f64,
}

impl InductanceMatrix {
    pub fn order(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    /// Fails with `SingularMatrix` unless the matrix is positive definite.
    pub fn check_nonsingular(&self, context: &str) -> Result<(), GenError> {
        let scale = self.entries.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let singular = || GenError::SingularMatrix(context.to_string());
        if scale <= 0.0 {
            return Err(singular());
        }
        let chol = nalgebra::Cholesky::new(self.entries.clone()).ok_or_else(singular)?;
        let l = chol.l();
        let min_pivot = l.diagonal().iter().fold(f64::INFINITY, |m, v| m.min(v * v));
        if min_pivot <= 1e-12 * scale {
            return Err(singular());
        }
        Ok(())
    }
}

fn check_positive(name: &str, v: f64) -> Result<(), GenError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(GenError::NonPositiveParameter { name: name.to_string(), value: v })
    }
}

fn check_pct(name: &str, v: f64) -> Result<(), GenError> {
    if (0.0..=100.0).contains(&v) {
        Ok(())
    } else {
        Err(GenError::FaultFractionOutOfRange { name: name.to_string(), value: v })
    }
}

/// Coupled-coil matrix of an N-winding unit with `2N` coils ordered
/// `[w1 neutral side, w1 line side, w2 neutral side, w2 line side, ...]`.
pub fn build_winding_l(
    mva: f64,
    f: f64,
    xl: f64,
    im: f64,
    windings: &[WindingSpec],
) -> Result<InductanceMatrix, GenError> {
    check_positive("mva", mva)?;
    check_positive("f", f)?;
    check_positive("Xl", xl)?;
    check_positive("Im", im)?;
    for (k, wd) in windings.iter().enumerate() {
        check_positive(&format!("v{}", k + 1), wd.kv)?;
    }
    for (k, wd) in windings.iter().enumerate() {
        check_pct(&format!("fault{}", k + 1), wd.split_pct)?;
    }

    let w = 2.0 * std::f64::consts::PI * f;
    let n = 2 * windings.len();
    let mut leakage = Vec::with_capacity(n);
    let mut magnetizing = Vec::with_capacity(n);
    for wd in windings {
        let fa = wd.split_pct * 0.01;
        let fb = 1.0 - fa;
        let i = mva / wd.kv;
        let z = wd.kv / i;
        let lk = xl * z / w;
        let lm = wd.kv / (w * im * i);
        leakage.push(lk / 2.0 * fa);
        leakage.push(lk / 2.0 * fb);
        magnetizing.push(lm * (fa * fa));
        magnetizing.push(lm * (fb * fb));
    }

    let mut entries = DMatrix::zeros(n, n);
    for i in 0..n {
        entries[(i, i)] = leakage[i] + magnetizing[i];
        for j in (i + 1)..n {
            let m = (magnetizing[i] * magnetizing[j]).sqrt();
            entries[(i, j)] = m;
            entries[(j, i)] = m;
        }
    }
    Ok(InductanceMatrix { entries, magnetizing, leakage })
}

/// The 4x4 two-winding matrix over coils `(x, y, z, w)`: x and y are the
/// `fault1` and remaining portions of winding 1, z and w those of winding 2.
pub fn build_two_winding_l(p: &TwoWindingParams) -> Result<InductanceMatrix, GenError> {
    build_winding_l(
        p.mva,
        p.f,
        p.xl,
        p.im,
        &[WindingSpec { kv: p.v1, split_pct: p.fault1 }, WindingSpec { kv: p.v2, split_pct: p.fault2 }],
    )
}

pub fn two_winding_diagnostics(p: &TwoWindingParams) -> WindingDiagnostics {
    let w = 2.0 * std::f64::consts::PI * p.f;
    let i1 = p.mva / p.v1;
    let i2 = p.mva / p.v2;
    WindingDiagnostics { l1: p.v1 / (w * p.im * i1), l2: p.v2 / (w * p.im * i2), tr: p.v1 / p.v2 }
}

/// Six-coil matrix of a three-winding unit.
pub fn build_three_winding_l(
    mva: f64,
    f: f64,
    xl: f64,
    im: f64,
    kv: [f64; 3],
    split_pct: [f64; 3],
) -> Result<InductanceMatrix, GenError> {
    let windings: Vec<WindingSpec> =
        kv.iter().zip(split_pct).map(|(&kv, split_pct)| WindingSpec { kv, split_pct }).collect();
    build_winding_l(mva, f, xl, im, &windings)
}
