//! Ratings and surrounding-network constants of the three protected units.

use serde::{Deserialize, Serialize};

use super::inductance::TwoWindingParams;
use crate::signal::Unit;

/// Three-phase unit description. Per-unit network quantities are on the
/// unit's own base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitModel {
    pub unit: Unit,
    /// Three-phase rating.
    pub mva: f64,
    /// Line-to-line winding voltages; two or three windings.
    pub kv_ll: Vec<f64>,
    pub f_hz: f64,
    pub xl_pu: f64,
    pub im_pu: f64,
    /// Series resistance of each full winding.
    pub winding_r_pu: f64,
    pub source_x_pu: f64,
    pub line_x_pu: f64,
    /// X/R ratio shared by the source and line impedances.
    pub x_over_r: f64,
    pub neutral_r_pu: f64,
    /// Resistive load closing the third winding, if any.
    pub tertiary_load_pu: f64,
    /// Phase shift at full tap, degrees.
    pub max_shift_deg: f64,
    pub ltc_steps: Vec<f64>,
}

impl UnitModel {
    pub fn preset(unit: Unit) -> Self {
        let common = UnitModel {
            unit,
            mva: 500.0,
            kv_ll: vec![230.0, 230.0],
            f_hz: 60.0,
            xl_pu: 0.1,
            im_pu: 0.01,
            winding_r_pu: 0.003,
            source_x_pu: 0.02,
            line_x_pu: 0.3,
            x_over_r: 10.0,
            neutral_r_pu: 0.05,
            tertiary_load_pu: 0.0,
            max_shift_deg: 25.0,
            ltc_steps: vec![0.2, 0.4, 0.6, 0.8, 1.0],
        };
        match unit {
            Unit::Pt => UnitModel { kv_ll: vec![500.0, 230.0], xl_pu: 0.12, im_pu: 0.005, ..common },
            Unit::ExcitingUnit => UnitModel { xl_pu: 0.08, im_pu: 0.02, ltc_steps: vec![1.0, 0.5], ..common },
            Unit::SeriesUnit => UnitModel {
                kv_ll: vec![230.0, 230.0, 115.0],
                xl_pu: 0.06,
                im_pu: 0.01,
                tertiary_load_pu: 2.0,
                ..common
            },
        }
    }

    /// Single two-winding unit from explicit appendix-style ratings.
    pub fn from_two_winding(unit: Unit, p: &TwoWindingParams) -> Self {
        UnitModel {
            mva: p.mva,
            kv_ll: vec![p.v1, p.v2],
            f_hz: p.f,
            xl_pu: p.xl,
            im_pu: p.im,
            ..UnitModel::preset(unit)
        }
    }

    pub fn n_windings(&self) -> usize {
        self.kv_ll.len()
    }

    pub fn phase_mva(&self) -> f64 {
        self.mva / 3.0
    }

    pub fn phase_kv(&self, winding: usize) -> f64 {
        self.kv_ll[winding] / 3f64.sqrt()
    }

    /// Base impedance (ohm) of a winding.
    pub fn z_base(&self, winding: usize) -> f64 {
        self.phase_kv(winding).powi(2) / self.phase_mva()
    }

    /// Peak rated current (kA) of a winding.
    pub fn i_peak(&self, winding: usize) -> f64 {
        2f64.sqrt() * self.phase_mva() / self.phase_kv(winding)
    }

    pub fn shift_rad(&self, ltc: f64) -> f64 {
        (ltc * self.max_shift_deg).to_radians()
    }
}

/// Real power across a phase-shifting unit between two buses:
/// `V_s V_l / (X_line + X_unit) * sin(theta + alpha)`.
pub fn par_power_flow(v_s: f64, v_l: f64, x_line: f64, x_unit: f64, theta: f64, alpha: f64) -> f64 {
    v_s * v_l / (x_line + x_unit) * (theta + alpha).sin()
}
