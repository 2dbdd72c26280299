//! Internal-fault transients from the lumped three-phase circuit.
//!
//! Per phase, each winding is two coupled coils `line -> J -> N` where the
//! neutral-side coil holds the shorted fraction. The primary is fed from a
//! source behind a small R-L impedance; the secondary terminal reaches a
//! phase-shifted source through an R-L line, which sets the pre-fault load
//! flow. Star points are grounded through a neutral resistor. Fault branches
//! are open before inception and closed from the inception sample on.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::circuit::{phasor_sample, Circuit, Integrator, Sinusoid, GROUND};
use super::inductance::{build_winding_l, WindingSpec};
use super::units::UnitModel;
use super::{check_layout, GenError};
use crate::signal::{EventLabel, FaultType, Phase, Provenance, SamplingSpec, Waveform};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    #[serde(rename = "P")]
    Primary,
    #[serde(rename = "S")]
    Secondary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ShiftDirection {
    Forward,
    Backward,
}

impl ShiftDirection {
    pub fn sign(self) -> f64 {
        match self {
            ShiftDirection::Forward => 1.0,
            ShiftDirection::Backward => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaultSpec {
    pub fault_type: FaultType,
    /// Fault resistance in ohms; infinity leaves the fault branch open.
    pub rf_ohm: f64,
    /// Percent of the faulted winding between the fault point and neutral.
    pub shorted_pct: f64,
    pub ltc: f64,
    pub side: Side,
    pub shift: ShiftDirection,
    /// Faulted phase of the single-phase intra-winding types.
    pub phase: Phase,
}

impl FaultSpec {
    pub fn new(fault_type: FaultType, rf_ohm: f64, shorted_pct: f64) -> Self {
        Self {
            fault_type,
            rf_ohm,
            shorted_pct,
            ltc: 1.0,
            side: Side::Primary,
            shift: ShiftDirection::Forward,
            phase: Phase::A,
        }
    }
}

const UNFAULTED_SPLIT_PCT: f64 = 50.0;

struct PhaseNodes {
    line: Vec<usize>,
    junction: Vec<usize>,
    /// Line-side coil branch of each winding; its current enters the winding.
    terminal_branch: Vec<usize>,
}

struct FaultCircuit {
    circuit: Circuit,
    phases: Vec<PhaseNodes>,
    fault_branches: Vec<usize>,
}

fn build_circuit(unit: &UnitModel, fault: &FaultSpec, omega: f64) -> Result<FaultCircuit, GenError> {
    let nw = unit.n_windings();
    let faulted = match fault.side {
        Side::Primary => 0,
        Side::Secondary => 1,
    };
    let windings: Vec<WindingSpec> = (0..nw)
        .map(|k| WindingSpec {
            kv: unit.phase_kv(k),
            split_pct: if k == faulted { fault.shorted_pct } else { UNFAULTED_SPLIT_PCT },
        })
        .collect();
    let l = build_winding_l(unit.phase_mva(), unit.f_hz, unit.xl_pu, unit.im_pu, &windings)?;
    l.check_nonsingular(&format!(
        "{} with {:.1}% of winding {} on the neutral side",
        unit.unit.name(),
        fault.shorted_pct,
        faulted + 1
    ))?;

    let mut c = Circuit::new(1);
    // Star points of the first two windings; the third winding's star is ground.
    let neutrals: Vec<usize> = (0..nw.min(2)).map(|_| c.add_node()).collect();
    let z1 = unit.z_base(0);
    let z2 = unit.z_base(1);
    let shift = fault.shift.sign() * unit.shift_rad(fault.ltc);
    let mut phases = Vec::with_capacity(3);
    for phase in Phase::ALL {
        let off = phase.angle_offset();
        let mut line = Vec::new();
        let mut junction = Vec::new();
        let mut coils = Vec::new();
        let mut terminal_branch = Vec::new();
        for k in 0..nw {
            let t = c.add_node();
            let j = c.add_node();
            let n = if k < 2 { neutrals[k] } else { GROUND };
            let frac = windings[k].split_pct * 0.01;
            let rw = unit.winding_r_pu * unit.z_base(k);
            let neutral_coil = c.add_branch(j, n, rw * frac, None);
            let line_coil = c.add_branch(t, j, rw * (1.0 - frac), None);
            coils.push(neutral_coil);
            coils.push(line_coil);
            line.push(t);
            junction.push(j);
            terminal_branch.push(line_coil);
        }
        c.couple(&coils, &l.entries);

        // Branch ground -> node with emf -e gives v_node = e - Z i.
        let v1 = 2f64.sqrt() * unit.phase_kv(0);
        let xs = unit.source_x_pu * z1;
        c.add_rl(GROUND, line[0], xs / unit.x_over_r, xs / omega, Some(Sinusoid { amplitude: -v1, phase: off }));
        let v2 = 2f64.sqrt() * unit.phase_kv(1);
        let xline = unit.line_x_pu * z2;
        c.add_rl(
            GROUND,
            line[1],
            xline / unit.x_over_r,
            xline / omega,
            Some(Sinusoid { amplitude: -v2, phase: off - shift }),
        );
        if nw > 2 {
            c.add_branch(line[2], GROUND, unit.tertiary_load_pu * unit.z_base(2), None);
        }
        phases.push(PhaseNodes { line, junction, terminal_branch });
    }
    for (k, &n) in neutrals.iter().enumerate() {
        c.add_branch(n, GROUND, unit.neutral_r_pu * unit.z_base(k), None);
    }

    let mut fault_branches = Vec::new();
    if fault.rf_ohm.is_finite() {
        let rf = fault.rf_ohm;
        let j = |p: Phase, w: usize| phases[p.index()].junction[w];
        match fault.fault_type.phases() {
            Some((involved, true)) => {
                for &p in involved {
                    fault_branches.push(c.add_branch(j(p, faulted), GROUND, rf, None));
                }
            }
            Some((involved, false)) if involved.len() == 2 => {
                fault_branches.push(c.add_branch(j(involved[0], faulted), j(involved[1], faulted), rf, None));
            }
            Some((involved, false)) => {
                let star = c.add_node();
                for &p in involved {
                    fault_branches.push(c.add_branch(j(p, faulted), star, rf, None));
                }
            }
            None => match fault.fault_type {
                FaultType::TurnToTurn => {
                    fault_branches.push(c.add_branch(j(fault.phase, faulted), neutrals[faulted], rf, None));
                }
                _ => {
                    fault_branches.push(c.add_branch(j(fault.phase, 0), j(fault.phase, 1), rf, None));
                }
            },
        }
    }
    Ok(FaultCircuit { circuit: c, phases, fault_branches })
}

fn differential(unit: &UnitModel, fc: &FaultCircuit, x: &[f64]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (p, nodes) in fc.phases.iter().enumerate() {
        out[p] = nodes
            .terminal_branch
            .iter()
            .enumerate()
            .map(|(k, &b)| x[fc.circuit.current_index(b)] / unit.i_peak(k))
            .sum();
    }
    out
}

fn validate_fault(fault: &FaultSpec) -> Result<(), GenError> {
    if !(fault.rf_ohm > 0.0) {
        return Err(GenError::NonPositiveParameter { name: "rf_ohm".into(), value: fault.rf_ohm });
    }
    if !(fault.ltc >= 0.0 && fault.ltc <= 1.0) {
        return Err(GenError::ParameterOutOfRange { name: "ltc".into(), value: fault.ltc, bound: "[0, 1]".into() });
    }
    Ok(())
}

/// Simulate an internal fault switched in at `inception_index`.
///
/// Samples before inception are the exact periodic orbit of the discretized
/// pre-fault circuit; the switching sample takes one backward-Euler step to
/// absorb the topology change, and the rest use the trapezoidal rule.
pub fn simulate_internal_fault(
    unit: &UnitModel,
    fault: &FaultSpec,
    spec: &SamplingSpec,
    duration_cycles: usize,
    inception_index: usize,
) -> Result<Waveform, GenError> {
    let len = check_layout(spec, duration_cycles, inception_index)?;
    validate_fault(fault)?;
    let h = spec.dt();
    let omega = spec.omega_rad_s();
    let mut fc = build_circuit(unit, fault, omega)?;

    for &b in &fc.fault_branches {
        fc.circuit.set_open(b, true);
    }
    let steady = fc.circuit.discrete_steady_state(h, spec.omega_per_sample())?;
    let mut samples = Vec::with_capacity(len);
    let mut state: Vec<f64> = Vec::new();
    for n in 0..inception_index.min(len) {
        state = phasor_sample(&steady, spec.angle_at(n));
        samples.push(differential(unit, &fc, &state));
    }
    if inception_index == 0 {
        state = phasor_sample(&steady, -spec.omega_per_sample());
    }

    let switched = !fc.fault_branches.is_empty();
    for &b in &fc.fault_branches {
        fc.circuit.set_open(b, false);
    }
    let trap = fc.circuit.stepper(Integrator::Trapezoidal, h)?;
    let euler = if switched { Some(fc.circuit.stepper(Integrator::BackwardEuler, h)?) } else { None };
    for n in inception_index..len {
        let prev = if n == 0 { -spec.omega_per_sample() } else { spec.angle_at(n - 1) };
        let next = spec.angle_at(n);
        state = match (&euler, n == inception_index) {
            (Some(be), true) => be.step(&state, prev, next),
            _ => trap.step(&state, prev, next),
        };
        samples.push(differential(unit, &fc, &state));
    }

    let mut provenance = Provenance::new();
    provenance.insert("generator".into(), "internal_fault".into());
    provenance.insert("unit".into(), serde_json::to_value(unit).expect("unit serializes"));
    provenance.insert("fault".into(), fault_provenance(fault));
    Ok(Waveform {
        spec: *spec,
        samples,
        label: EventLabel::fault(unit.unit, fault.fault_type),
        inception_index,
        provenance,
    })
}

fn fault_provenance(fault: &FaultSpec) -> serde_json::Value {
    let mut v = serde_json::to_value(fault).expect("fault spec serializes");
    if !fault.rf_ohm.is_finite() {
        v["rf_ohm"] = serde_json::Value::String("inf".into());
    }
    v
}

/// Three-phase real power (MW) delivered through the secondary terminal in
/// the pre-fault steady state.
pub fn load_flow_mw(unit: &UnitModel, ltc: f64, shift: ShiftDirection, spec: &SamplingSpec) -> Result<f64, GenError> {
    let fault = FaultSpec { ltc, shift, ..FaultSpec::new(FaultType::WaG, f64::INFINITY, 50.0) };
    let fc = build_circuit(unit, &fault, spec.omega_rad_s())?;
    let x = fc.circuit.discrete_steady_state(spec.dt(), spec.omega_per_sample())?;
    let mut p = 0.0;
    for nodes in &fc.phases {
        let v: Complex64 = fc.circuit.voltage_index(nodes.line[1]).map_or(Complex64::new(0.0, 0.0), |i| x[i]);
        let i = -x[fc.circuit.current_index(nodes.terminal_branch[1])];
        p += 0.5 * (v * i.conj()).re;
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::Unit;
    use crate::waveformgen::units::par_power_flow;

    fn peak(w: &Waveform) -> f64 {
        w.samples[w.inception_index..].iter().flat_map(|s| s.iter()).fold(0.0f64, |m, v| m.max(v.abs()))
    }

    fn run(unit: Unit, fault: FaultSpec) -> Waveform {
        let spec = SamplingSpec::default();
        simulate_internal_fault(&UnitModel::preset(unit), &fault, &spec, 7, 2 * 167 + 40).unwrap()
    }

    #[test]
    fn pre_fault_segment_is_periodic() {
        let w = run(Unit::Pt, FaultSpec::new(FaultType::WaG, 0.5, 50.0));
        assert!(w.pre_inception_residue() <= 1e-9, "{}", w.pre_inception_residue());
        w.check_invariants().unwrap();
    }

    #[test]
    fn open_fault_branch_reproduces_steady_state() {
        for unit in Unit::ALL {
            let w = run(unit, FaultSpec::new(FaultType::WaWbG, f64::INFINITY, 80.0));
            let nc = 167;
            for n in w.inception_index..w.len() {
                for p in 0..3 {
                    assert!((w.samples[n][p] - w.samples[n - nc][p]).abs() <= 1e-6);
                }
            }
        }
    }

    #[test]
    fn repeated_runs_are_bit_identical() {
        let f = FaultSpec::new(FaultType::TurnToTurn, 0.01, 40.0);
        assert_eq!(run(Unit::SeriesUnit, f), run(Unit::SeriesUnit, f));
    }

    #[test]
    fn low_fault_resistance_gives_larger_peak() {
        let hi = run(Unit::Pt, FaultSpec::new(FaultType::WaG, 10.0, 80.0));
        let lo = run(Unit::Pt, FaultSpec::new(FaultType::WaG, 0.01, 80.0));
        assert!(peak(&lo) > peak(&hi), "{} vs {}", peak(&lo), peak(&hi));
        assert_eq!(lo.label, EventLabel::fault(Unit::Pt, FaultType::WaG));
    }

    #[test]
    fn peak_is_monotone_in_fault_resistance_for_every_type() {
        for unit in Unit::ALL {
            for ft in FaultType::ALL {
                for side in [Side::Primary, Side::Secondary] {
                    let peaks: Vec<f64> = [0.01, 0.5, 10.0]
                        .iter()
                        .map(|&rf| peak(&run(unit, FaultSpec { side, ..FaultSpec::new(ft, rf, 50.0) })))
                        .collect();
                    assert!(peaks[0] >= peaks[1] && peaks[1] >= peaks[2], "{unit:?} {ft:?} {side:?}: {peaks:?}");
                }
            }
        }
    }

    #[test]
    fn fully_shorted_winding_is_singular() {
        let spec = SamplingSpec::default();
        let r = simulate_internal_fault(
            &UnitModel::preset(Unit::Pt),
            &FaultSpec::new(FaultType::WaG, 0.5, 100.0),
            &spec,
            7,
            400,
        );
        assert!(matches!(r, Err(GenError::SingularMatrix(_))));
    }

    #[test]
    fn load_flow_follows_phase_shift_model() {
        let spec = SamplingSpec::default();
        let unit = UnitModel::preset(Unit::ExcitingUnit);
        let fwd = load_flow_mw(&unit, 1.0, ShiftDirection::Forward, &spec).unwrap();
        let back = load_flow_mw(&unit, 1.0, ShiftDirection::Backward, &spec).unwrap();
        assert!(fwd > 0.0 && back < 0.0);
        let x = unit.source_x_pu + unit.xl_pu;
        let model = unit.mva * par_power_flow(1.0, 1.0, unit.line_x_pu, x, 0.0, unit.shift_rad(1.0));
        assert!((fwd - model).abs() / model < 0.15, "{fwd} vs {model}");
    }
}
