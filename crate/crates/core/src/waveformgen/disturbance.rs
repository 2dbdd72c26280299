//! Non-fault transients as per-sample signature models.
//!
//! Every model keeps the pre-inception segment an exact function of the
//! cycle-reduced angle, so it repeats bit-for-bit from cycle to cycle.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::fault::ShiftDirection;
use super::saturation::{BhCurve, SaturatingCt};
use super::{check_layout, GenError};
use crate::signal::{DisturbanceType, EventLabel, FaultType, Phase, Provenance, Sample3, SamplingSpec, Waveform};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum DisturbanceParams {
    MagnetizingInrush {
        /// Residual flux of `residual_phase`, percent of peak flux; the other
        /// two phases carry minus half of it.
        residual_pct: f64,
        residual_phase: Phase,
        ltc: f64,
        shift: ShiftDirection,
    },
    SympatheticInrush {
        residual_pct: f64,
        residual_phase: Phase,
        ltc: f64,
        shift: ShiftDirection,
    },
    ExternalFaultCTSat {
        fault_type: FaultType,
        rf_ohm: f64,
        bus_kv: f64,
        ltc: f64,
        shift: ShiftDirection,
    },
    CapacitorSwitching {
        bank_mvar: f64,
        ltc: f64,
        shift: ShiftDirection,
    },
    NonlinearLoadSwitching {
        firing_deg: f64,
        ltc: f64,
    },
    Ferroresonance {
        grading_uf: f64,
        phase: Phase,
    },
}

impl DisturbanceParams {
    pub fn kind(&self) -> DisturbanceType {
        match self {
            DisturbanceParams::MagnetizingInrush { .. } => DisturbanceType::MagnetizingInrush,
            DisturbanceParams::SympatheticInrush { .. } => DisturbanceType::SympatheticInrush,
            DisturbanceParams::ExternalFaultCTSat { .. } => DisturbanceType::ExternalFaultCTSat,
            DisturbanceParams::CapacitorSwitching { .. } => DisturbanceType::CapacitorSwitching,
            DisturbanceParams::NonlinearLoadSwitching { .. } => DisturbanceType::NonlinearLoadSwitching,
            DisturbanceParams::Ferroresonance { .. } => DisturbanceType::Ferroresonance,
        }
    }

    /// Mid-range parameters of a class, handy for demos and tests.
    pub fn typical(kind: DisturbanceType) -> Self {
        let shift = ShiftDirection::Forward;
        match kind {
            DisturbanceType::MagnetizingInrush => {
                DisturbanceParams::MagnetizingInrush { residual_pct: 80.0, residual_phase: Phase::A, ltc: 1.0, shift }
            }
            DisturbanceType::SympatheticInrush => {
                DisturbanceParams::SympatheticInrush { residual_pct: -80.0, residual_phase: Phase::A, ltc: 1.0, shift }
            }
            DisturbanceType::ExternalFaultCTSat => DisturbanceParams::ExternalFaultCTSat {
                fault_type: FaultType::WaG,
                rf_ohm: 0.01,
                bus_kv: 230.0,
                ltc: 1.0,
                shift,
            },
            DisturbanceType::CapacitorSwitching => {
                DisturbanceParams::CapacitorSwitching { bank_mvar: 1500.0, ltc: 1.0, shift }
            }
            DisturbanceType::NonlinearLoadSwitching => {
                DisturbanceParams::NonlinearLoadSwitching { firing_deg: 0.0, ltc: 1.0 }
            }
            DisturbanceType::Ferroresonance => DisturbanceParams::Ferroresonance { grading_uf: 0.2, phase: Phase::A },
        }
    }
}

/// Core flux after energization: `phi_r + phi_m cos(s) - phi_m cos(s + a)`
/// where `s` is the switching angle and `a` the angle elapsed since.
pub fn inrush_flux(phi_r: f64, phi_m: f64, switch_angle: f64, elapsed: f64) -> f64 {
    phi_r + phi_m * switch_angle.cos() - phi_m * (switch_angle + elapsed).cos()
}

const BASELINE_FUNDAMENTAL: f64 = 0.01;
const BASELINE_THIRD: f64 = 0.002;
const INRUSH_DC_CYCLES: f64 = 3.0;
const R_SYSTEM: f64 = 0.08;
const R_TRANSFORMER: f64 = 0.02;
const CT_FAULT_XR_ANGLE: f64 = 80.0 * PI / 180.0;
const CT_DC_CYCLES: f64 = 1.5;
const CAP_DECAY_S: f64 = 0.003;
const HARMONIC_ORDERS: [f64; 4] = [5.0, 7.0, 11.0, 13.0];
const FERRO_BUILDUP_CYCLES: f64 = 1.0;

/// Magnetizing current of an energized, unloaded-side transformer.
fn baseline(angle: f64) -> f64 {
    -BASELINE_FUNDAMENTAL * angle.cos() + BASELINE_THIRD * (3.0 * angle).sin()
}

fn out_of_range(name: &str, value: f64, bound: &str) -> GenError {
    GenError::ParameterOutOfRange { name: name.into(), value, bound: bound.into() }
}

fn check_ltc(ltc: f64) -> Result<(), GenError> {
    if ltc > 0.0 && ltc <= 1.0 {
        Ok(())
    } else {
        Err(out_of_range("ltc", ltc, "(0, 1]"))
    }
}

fn check_residual(pct: f64) -> Result<(), GenError> {
    if (-80.0..=80.0).contains(&pct) {
        Ok(())
    } else {
        Err(out_of_range("residual_pct", pct, "[-80, 80]"))
    }
}

fn validate(params: &DisturbanceParams) -> Result<(), GenError> {
    match *params {
        DisturbanceParams::MagnetizingInrush { residual_pct, ltc, .. }
        | DisturbanceParams::SympatheticInrush { residual_pct, ltc, .. } => {
            check_residual(residual_pct)?;
            check_ltc(ltc)
        }
        DisturbanceParams::ExternalFaultCTSat { fault_type, rf_ohm, bus_kv, ltc, .. } => {
            if fault_type.phases().is_none() {
                return Err(GenError::UnknownDisturbance(format!("external fault of type {fault_type}")));
            }
            if !(rf_ohm > 0.0 && rf_ohm <= 10.0) {
                return Err(out_of_range("rf_ohm", rf_ohm, "(0, 10]"));
            }
            if bus_kv != 230.0 && bus_kv != 500.0 {
                return Err(out_of_range("bus_kv", bus_kv, "{230, 500}"));
            }
            check_ltc(ltc)
        }
        DisturbanceParams::CapacitorSwitching { bank_mvar, ltc, .. } => {
            let legs = bank_mvar / 500.0;
            if !(legs.fract() == 0.0 && (1.0..=3.0).contains(&legs)) {
                return Err(out_of_range("bank_mvar", bank_mvar, "{500, 1000, 1500}"));
            }
            check_ltc(ltc)
        }
        DisturbanceParams::NonlinearLoadSwitching { firing_deg, ltc } => {
            if !(0.0..=50.0).contains(&firing_deg) {
                return Err(out_of_range("firing_deg", firing_deg, "[0, 50]"));
            }
            check_ltc(ltc)
        }
        DisturbanceParams::Ferroresonance { grading_uf, .. } => {
            if !(0.02 - 1e-9..=0.2 + 1e-9).contains(&grading_uf) {
                return Err(out_of_range("grading_uf", grading_uf, "[0.02, 0.2]"));
            }
            Ok(())
        }
    }
}

fn shift_angle(ltc: f64, shift: ShiftDirection) -> f64 {
    shift.sign() * (ltc * 25.0).to_radians()
}

fn residuals(pct: f64, phase: Phase) -> [f64; 3] {
    let r = pct * 0.01;
    let mut out = [-r / 2.0; 3];
    out[phase.index()] = r;
    out
}

struct Ctx<'a> {
    spec: &'a SamplingSpec,
    len: usize,
    inception: usize,
}

impl Ctx<'_> {
    fn angle(&self, n: usize, phase: usize, extra: f64) -> f64 {
        self.spec.angle_at(n) + Phase::from_index(phase).angle_offset() + extra
    }

    /// Angle elapsed since inception.
    fn elapsed(&self, n: usize) -> f64 {
        (n - self.inception) as f64 * self.spec.omega_per_sample()
    }

    fn cycles_since(&self, n: usize) -> f64 {
        (n - self.inception) as f64 / self.spec.samples_per_cycle() as f64
    }

    fn seconds_since(&self, n: usize) -> f64 {
        (n - self.inception) as f64 * self.spec.dt()
    }

    fn fill(&self, mut f: impl FnMut(usize, usize) -> f64) -> Vec<Sample3> {
        (0..self.len).map(|n| [f(n, 0), f(n, 1), f(n, 2)]).collect()
    }
}

fn magnetizing_inrush(ctx: &Ctx, residual_pct: f64, phase: Phase, shift: f64) -> Vec<Sample3> {
    let bh = BhCurve::default();
    let phi_r = residuals(residual_pct, phase);
    ctx.fill(|n, p| {
        if n < ctx.inception {
            return 0.0;
        }
        let s = ctx.angle(ctx.inception, p, shift);
        let decay = (-ctx.cycles_since(n) / INRUSH_DC_CYCLES).exp();
        let ac = -(s + ctx.elapsed(n)).cos();
        let dc = (phi_r[p] + s.cos()) * decay;
        bh.current(dc + ac)
    })
}

fn sympathetic_inrush(ctx: &Ctx, residual_pct: f64, phase: Phase, shift: f64) -> Vec<Sample3> {
    let bh = BhCurve::default();
    let phi_r = residuals(residual_pct, phase);
    let h = ctx.spec.omega_per_sample();
    let mut out = vec![[0.0; 3]; ctx.len];
    for p in 0..3 {
        let steady = |n: usize| -ctx.angle(n, p, shift).cos();
        for (n, row) in out.iter_mut().enumerate().take(ctx.inception) {
            row[p] = bh.current(steady(n));
        }
        let start = ctx.inception.saturating_sub(1);
        let mut f1 = steady(start);
        let mut f2 = phi_r[p];
        let deriv = |f1: f64, f2: f64, theta: f64| {
            let (i1, i2) = (bh.current(f1), bh.current(f2));
            let bus = theta.sin() - R_SYSTEM * (i1 + i2);
            (bus - R_TRANSFORMER * i1, bus - R_TRANSFORMER * i2)
        };
        for (n, row) in out.iter_mut().enumerate().skip(ctx.inception) {
            // Heun step from the previous sample.
            let t0 = ctx.angle(n, p, shift) - h;
            let (k1a, k1b) = deriv(f1, f2, t0);
            let (k2a, k2b) = deriv(f1 + h * k1a, f2 + h * k1b, t0 + h);
            f1 += 0.5 * h * (k1a + k2a);
            f2 += 0.5 * h * (k1b + k2b);
            row[p] = bh.current(f1);
        }
    }
    out
}

fn external_fault_ct(ctx: &Ctx, fault_type: FaultType, rf_ohm: f64, bus_kv: f64, ltc: f64, shift: f64) -> Vec<Sample3> {
    let ct = SaturatingCt { burden: 0.4, ..SaturatingCt::default() };
    let h = ctx.spec.omega_per_sample();
    let (involved, grounded) = fault_type.phases().expect("validated external fault type");
    let bolted = if bus_kv >= 500.0 { 20.0 } else { 12.0 };
    let mut i_fault = bolted / (1.0 + rf_ohm / 5.0);
    if !grounded && involved.len() == 2 {
        i_fault *= 3f64.sqrt() / 2.0;
    }
    let load = 0.3 + 0.7 * ltc;
    let load_lag = 0.3;
    let mut out = vec![[0.0; 3]; ctx.len];
    for p in 0..3 {
        let lam_ss = ct.linear_steady_state(load, Phase::from_index(p).angle_offset() + shift - load_lag, h);
        let pre_lambda = |n: usize| (lam_ss * Complex64::from_polar(1.0, ctx.spec.angle_at(n))).im;
        let sign = match involved.iter().position(|&q| q.index() == p) {
            Some(1) if !grounded && involved.len() == 2 => -1.0,
            Some(_) => 1.0,
            None => 0.0,
        };
        // Two-phase loops carry one current, in opposite directions.
        let ref_phase = if sign < 0.0 { involved[0].index() } else { p };
        let mut lambda = 0.0;
        for n in 0..ctx.len {
            let base = baseline(ctx.angle(n, p, 0.0));
            if n < ctx.inception {
                lambda = pre_lambda(n);
                out[n][p] = base + ct.magnetizing(lambda);
                continue;
            }
            if n == ctx.inception {
                lambda = pre_lambda(n.saturating_sub(1));
            }
            let th = ctx.angle(n, ref_phase, shift) - CT_FAULT_XR_ANGLE;
            let th0 = ctx.angle(ctx.inception, ref_phase, shift) - CT_FAULT_XR_ANGLE;
            let decay = (-ctx.cycles_since(n) / CT_DC_CYCLES).exp();
            let through = sign * i_fault * (th.sin() - th0.sin() * decay);
            let i_p = load * ctx.angle(n, p, shift - load_lag).sin() + through;
            lambda = ct.step(lambda, i_p, h);
            out[n][p] = base + ct.magnetizing(lambda);
        }
    }
    out
}

fn capacitor_switching(ctx: &Ctx, bank_mvar: f64, ltc: f64, shift: f64) -> Vec<Sample3> {
    let legs = bank_mvar / 500.0;
    let f_osc = 1000.0 / legs.sqrt();
    let scale = 1.5 * legs.sqrt() * (0.8 + 0.2 * ltc);
    ctx.fill(|n, p| {
        let base = baseline(ctx.angle(n, p, 0.0));
        if n < ctx.inception {
            return base;
        }
        let v_switch = ctx.angle(ctx.inception, p, shift).sin();
        let t = ctx.seconds_since(n);
        let ring = scale * v_switch * (-t / CAP_DECAY_S).exp() * (2.0 * PI * f_osc * t).sin();
        let steady = 0.02 * legs * ctx.angle(n, p, shift).cos();
        base + ring + steady
    })
}

fn nonlinear_load(ctx: &Ctx, firing_deg: f64, ltc: f64) -> Vec<Sample3> {
    let amp = 0.3 + 0.5 * ltc;
    let alpha = firing_deg.to_radians();
    ctx.fill(|n, p| {
        let base = baseline(ctx.angle(n, p, 0.0));
        if n < ctx.inception {
            return base;
        }
        let th = ctx.angle(n, p, alpha);
        let harmonics: f64 = HARMONIC_ORDERS.iter().map(|&h| amp / h * (h * th).sin()).sum();
        let dc = 0.5 * amp * ctx.angle(ctx.inception, p, alpha).cos() * (-2.0 * ctx.cycles_since(n)).exp();
        base + harmonics + dc
    })
}

fn ferroresonance(ctx: &Ctx, grading_uf: f64, phase: Phase) -> Vec<Sample3> {
    let amp = 0.3 + 6.0 * grading_uf;
    ctx.fill(|n, p| {
        let base = baseline(ctx.angle(n, p, 0.0));
        if n < ctx.inception {
            return base;
        }
        if p != phase.index() {
            return base * 1.05;
        }
        let c = ctx.cycles_since(n);
        let th = ctx.angle(n, p, 0.0);
        let wave = th.sin() + 0.6 * (3.0 * th + 0.3).sin() + 0.25 * (5.0 * th).sin() + 0.1 * (7.0 * th).sin();
        base * (-8.0 * c).exp() + amp * (1.0 - (-c / FERRO_BUILDUP_CYCLES).exp()) * wave
    })
}

/// Generate one labeled disturbance with onset at `inception_index`.
pub fn generate_disturbance(
    kind: DisturbanceType,
    params: &DisturbanceParams,
    spec: &SamplingSpec,
    duration_cycles: usize,
    inception_index: usize,
) -> Result<Waveform, GenError> {
    if params.kind() != kind {
        return Err(GenError::UnknownDisturbance(format!("{kind} requested with {} parameters", params.kind())));
    }
    validate(params)?;
    let len = check_layout(spec, duration_cycles, inception_index)?;
    let ctx = Ctx { spec, len, inception: inception_index };
    let samples = match *params {
        DisturbanceParams::MagnetizingInrush { residual_pct, residual_phase, ltc, shift } => {
            magnetizing_inrush(&ctx, residual_pct, residual_phase, shift_angle(ltc, shift))
        }
        DisturbanceParams::SympatheticInrush { residual_pct, residual_phase, ltc, shift } => {
            sympathetic_inrush(&ctx, residual_pct, residual_phase, shift_angle(ltc, shift))
        }
        DisturbanceParams::ExternalFaultCTSat { fault_type, rf_ohm, bus_kv, ltc, shift } => {
            external_fault_ct(&ctx, fault_type, rf_ohm, bus_kv, ltc, shift_angle(ltc, shift))
        }
        DisturbanceParams::CapacitorSwitching { bank_mvar, ltc, shift } => {
            capacitor_switching(&ctx, bank_mvar, ltc, shift_angle(ltc, shift))
        }
        DisturbanceParams::NonlinearLoadSwitching { firing_deg, ltc } => nonlinear_load(&ctx, firing_deg, ltc),
        DisturbanceParams::Ferroresonance { grading_uf, phase } => ferroresonance(&ctx, grading_uf, phase),
    };
    let mut provenance = Provenance::new();
    provenance.insert("generator".into(), "disturbance".into());
    provenance.insert("params".into(), serde_json::to_value(params).expect("params serialize"));
    Ok(Waveform { spec: *spec, samples, label: EventLabel::disturbance(kind), inception_index, provenance })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gen(params: DisturbanceParams, inception: usize) -> Waveform {
        generate_disturbance(params.kind(), &params, &SamplingSpec::default(), 7, inception).unwrap()
    }

    #[test]
    fn inrush_flux_endpoints() {
        for &(r, s) in &[(0.8, 0.3), (-0.4, 2.0), (0.0, 0.0)] {
            assert!((inrush_flux(r, 1.0, s, 0.0) - r).abs() < 1e-15);
        }
        // Switching at cos = 1 and evaluating half a cycle later reaches r + 2 phi_m.
        assert!((inrush_flux(0.4, 1.0, 0.0, PI) - 2.4).abs() < 1e-12);
    }

    #[test]
    fn pre_inception_is_periodic_for_every_class() {
        for kind in DisturbanceType::ALL {
            let w = gen(DisturbanceParams::typical(kind), 2 * 167 + 70);
            assert!(w.pre_inception_residue() <= 1e-9, "{kind}: {}", w.pre_inception_residue());
            w.check_invariants().unwrap();
            assert!(w.samples.iter().flatten().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn zero_residual_at_voltage_peak_gives_the_smallest_inrush() {
        let spec = SamplingSpec::default();
        let nc = spec.samples_per_cycle();
        // Phase a voltage sin(angle) peaks a quarter cycle into the cycle.
        let inception = 2 * nc + (nc as f64 / 4.0).round() as usize;
        // The tap shift moves the switching angle, so drive the model unshifted.
        let mut unshifted = Vec::new();
        for value in [-80.0, -40.0, 0.0, 40.0, 80.0] {
            for phase in Phase::ALL {
                let ctx = Ctx { spec: &spec, len: 7 * nc, inception };
                let s = magnetizing_inrush(&ctx, value, phase, 0.0);
                let peak = s.iter().fold(0.0f64, |m, v| m.max(v[0].abs()));
                unshifted.push((value, phase, peak));
            }
        }
        let min = unshifted.iter().map(|t| t.2).fold(f64::INFINITY, f64::min);
        for &(value, _, peak) in &unshifted {
            if value == 0.0 {
                assert_eq!(peak, min);
            } else {
                assert!(peak > min, "{value}: {peak} vs {min}");
            }
        }
    }

    #[test]
    fn nonlinear_load_is_dominated_by_fifth_harmonic() {
        let w = gen(DisturbanceParams::NonlinearLoadSwitching { firing_deg: 20.0, ltc: 0.6 }, 2 * 167);
        let nc = 167;
        let x = w.channel(Phase::B);
        let tail = &x[x.len() - 2 * nc..];
        let mag = |bin: usize| {
            let n = tail.len() as f64;
            let (mut re, mut im) = (0.0, 0.0);
            for (t, v) in tail.iter().enumerate() {
                let a = -2.0 * PI * bin as f64 * t as f64 / n;
                re += v * a.cos();
                im += v * a.sin();
            }
            (re * re + im * im).sqrt()
        };
        // Two cycles: harmonic h sits at bin 2h.
        assert!(mag(10) >= 10.0 * mag(8));
        assert!(mag(10) >= 10.0 * mag(12));
    }

    #[test]
    fn out_of_range_parameters_are_rejected() {
        let bad = DisturbanceParams::CapacitorSwitching { bank_mvar: 700.0, ltc: 1.0, shift: ShiftDirection::Forward };
        let r = generate_disturbance(DisturbanceType::CapacitorSwitching, &bad, &SamplingSpec::default(), 7, 400);
        assert!(matches!(r, Err(GenError::ParameterOutOfRange { .. })));
        let r = generate_disturbance(
            DisturbanceType::Ferroresonance,
            &DisturbanceParams::typical(DisturbanceType::MagnetizingInrush),
            &SamplingSpec::default(),
            7,
            400,
        );
        assert!(matches!(r, Err(GenError::UnknownDisturbance(_))));
    }
}
