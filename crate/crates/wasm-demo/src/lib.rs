//! Browser bindings: synthesize a record, run the change detector over it,
//! and explore the coupled-coil inductance matrix of a faulted unit.
//!
//! Each binding returns a JSON string. The `*_json` functions carry the
//! logic and are plain Rust so they can be tested natively.

use diffprot::detector::{cdf_series, first_trigger, CdfConfig};
use diffprot::signal::{DisturbanceType, FaultType, Phase, Sample3, SamplingSpec, Unit, Waveform};
use diffprot::waveformgen::inductance::{build_two_winding_l, two_winding_diagnostics, TwoWindingParams};
use diffprot::waveformgen::noise::add_noise;
use diffprot::waveformgen::units::UnitModel;
use diffprot::waveformgen::{generate_disturbance, simulate_internal_fault, DisturbanceParams, FaultSpec};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

const DURATION_CYCLES: usize = 7;

/// One record of `class` (a fault type or disturbance name). Fault classes
/// use `unit`, `rf_ohm` and `shorted_pct`; a non-finite `snr_db` is clean.
pub fn synthesize_json(
    unit: &str,
    class: &str,
    rf_ohm: f64,
    shorted_pct: f64,
    inception_cycles: f64,
    snr_db: f64,
    seed: u32,
) -> Result<Value, String> {
    let spec = SamplingSpec::default();
    let nc = spec.samples_per_cycle();
    if !(inception_cycles.is_finite() && inception_cycles >= 1.0) {
        return Err(format!("inception must be at least one cycle, got {inception_cycles}"));
    }
    let inception = (inception_cycles * nc as f64).round() as usize;
    let w = if let Ok(kind) = class.parse::<DisturbanceType>() {
        generate_disturbance(kind, &DisturbanceParams::typical(kind), &spec, DURATION_CYCLES, inception)
    } else {
        let fault_type: FaultType = class.parse().map_err(|_| format!("unknown class {class:?}"))?;
        let unit: Unit = unit.parse().map_err(|_| format!("unknown unit {unit:?}"))?;
        simulate_internal_fault(
            &UnitModel::preset(unit),
            &FaultSpec::new(fault_type, rf_ohm, shorted_pct),
            &spec,
            DURATION_CYCLES,
            inception,
        )
    }
    .map_err(|e| e.to_string())?;
    let w = if snr_db.is_finite() { add_noise(&w, snr_db, u64::from(seed)) } else { w };
    Ok(record_json(&w))
}

fn record_json(w: &Waveform) -> Value {
    json!({
        "sample_rate_hz": w.spec.sample_rate_hz,
        "samples_per_cycle": w.spec.samples_per_cycle(),
        "inception_index": w.inception_index,
        "label": w.label.key(),
        "ia": w.channel(Phase::A),
        "ib": w.channel(Phase::B),
        "ic": w.channel(Phase::C),
    })
}

/// Filter trace of each phase and the first trigger at `threshold`. Trace
/// value `k` belongs to the window ending at sample `k + 2 n_c - 1`.
pub fn detect_json(ia: &[f64], ib: &[f64], ic: &[f64], threshold: f64) -> Result<Value, String> {
    if ia.len() != ib.len() || ia.len() != ic.len() {
        return Err("phase channels differ in length".into());
    }
    let cfg = CdfConfig { threshold, ..CdfConfig::default() };
    cfg.validate().map_err(|e| e.to_string())?;
    let nc = cfg.cycle_samples;
    let trace = [ia, ib, ic].map(|x| cdf_series(x, nc));
    let trace: Vec<Vec<f64>> = trace.into_iter().collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    let samples: Vec<Sample3> = (0..ia.len()).map(|n| [ia[n], ib[n], ic[n]]).collect();
    let trigger = first_trigger(&samples, &cfg);
    Ok(json!({
        "threshold": threshold,
        "trace_offset": 2 * nc - 1,
        "trace": trace,
        "trigger_index": trigger.map(|t| t.0),
        "trigger_phase": trigger.map(|t| t.1.name()),
        "verdict_index": trigger.map(|t| t.0 + nc - 1),
        "detect_window": trigger.map(|t| [t.0 - cfg.pre_samples(), t.0 + nc]),
        "classify_window": trigger.map(|t| [t.0, t.0 + cfg.classify_len()]),
    }))
}

/// Two-winding coupled-coil matrix of a 500 MVA, 230/230 kV unit split at
/// `fault1` and `fault2` percent from neutral.
pub fn inductance_json(fault1: f64, fault2: f64, xl: f64, im: f64) -> Result<Value, String> {
    let p = TwoWindingParams { mva: 500.0, v1: 230.0, v2: 230.0, f: 60.0, xl, im, fault1, fault2 };
    let m = build_two_winding_l(&p).map_err(|e| e.to_string())?;
    let d = two_winding_diagnostics(&p);
    let n = m.order();
    let entries: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| m.get(i, j)).collect()).collect();
    Ok(json!({
        "coils": ["x", "y", "z", "w"],
        "entries": entries,
        "magnetizing": m.magnetizing,
        "leakage": m.leakage,
        "positive_definite": m.check_nonsingular("inductance explorer").is_ok(),
        "l1": d.l1,
        "l2": d.l2,
        "tr": d.tr,
    }))
}

fn to_js(r: Result<Value, String>) -> Result<String, JsValue> {
    r.map(|v| v.to_string()).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn synthesize(
    unit: &str,
    class: &str,
    rf_ohm: f64,
    shorted_pct: f64,
    inception_cycles: f64,
    snr_db: f64,
    seed: u32,
) -> Result<String, JsValue> {
    to_js(synthesize_json(unit, class, rf_ohm, shorted_pct, inception_cycles, snr_db, seed))
}

#[wasm_bindgen]
pub fn detect(ia: &[f64], ib: &[f64], ic: &[f64], threshold: f64) -> Result<String, JsValue> {
    to_js(detect_json(ia, ib, ic, threshold))
}

#[wasm_bindgen]
pub fn inductance(fault1: f64, fault2: f64, xl: f64, im: f64) -> Result<String, JsValue> {
    to_js(inductance_json(fault1, fault2, xl, im))
}

/// Class names accepted by `synthesize`, faults first.
#[wasm_bindgen]
pub fn classes() -> String {
    let faults = FaultType::ALL.iter().map(|f| f.name());
    let dists = DisturbanceType::ALL.iter().map(|d| d.name());
    json!({ "faults": faults.collect::<Vec<_>>(), "disturbances": dists.collect::<Vec<_>>(),
            "units": Unit::ALL.iter().map(|u| u.name()).collect::<Vec<_>>() })
    .to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn channels(v: &Value) -> [Vec<f64>; 3] {
        ["ia", "ib", "ic"].map(|k| v[k].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect())
    }

    #[test]
    fn fault_record_triggers_at_its_inception() {
        let r = synthesize_json("PT", "wa-g", 0.01, 50.0, 3.0, f64::INFINITY, 1).unwrap();
        assert_eq!(r["label"], "InternalFault/PT/wa-g");
        let [a, b, c] = channels(&r);
        assert_eq!(a.len(), 7 * 167);
        let d = detect_json(&a, &b, &c, 0.05).unwrap();
        let trigger = d["trigger_index"].as_u64().unwrap();
        assert!((501..=501 + 167).contains(&trigger), "{trigger}");
        assert_eq!(d["verdict_index"].as_u64().unwrap(), trigger + 166);
        assert_eq!(d["trace"][0].as_array().unwrap().len(), 7 * 167 - 2 * 167 + 1);
    }

    #[test]
    fn noise_is_seeded() {
        let a = synthesize_json("PT", "MagnetizingInrush", 0.0, 0.0, 2.0, 20.0, 4).unwrap();
        let b = synthesize_json("PT", "MagnetizingInrush", 0.0, 0.0, 2.0, 20.0, 4).unwrap();
        let c = synthesize_json("PT", "MagnetizingInrush", 0.0, 0.0, 2.0, 20.0, 5).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn steady_record_never_triggers() {
        let spec = SamplingSpec::default();
        let x: Vec<f64> = (0..1000).map(|n| spec.angle_at(n).sin()).collect();
        let d = detect_json(&x, &x, &x, 0.05).unwrap();
        assert!(d["trigger_index"].is_null());
    }

    #[test]
    fn inductance_is_symmetric_and_positive_definite() {
        let v = inductance_json(20.0, 20.0, 0.1, 0.01).unwrap();
        let e: Vec<Vec<f64>> = serde_json::from_value(v["entries"].clone()).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(e[i][j], e[j][i]);
            }
        }
        assert_eq!(v["positive_definite"], true);
    }

    #[test]
    fn every_listed_class_synthesizes_with_page_defaults() {
        let names: Value = serde_json::from_str(&classes()).unwrap();
        for unit in names["units"].as_array().unwrap() {
            for group in ["faults", "disturbances"] {
                for class in names[group].as_array().unwrap() {
                    let r = synthesize_json(
                        unit.as_str().unwrap(),
                        class.as_str().unwrap(),
                        0.01,
                        40.0,
                        2.5,
                        f64::INFINITY,
                        7,
                    );
                    assert!(r.is_ok(), "{unit} {class}: {r:?}");
                }
            }
        }
    }

    #[test]
    fn zero_turn_coils_are_flagged_singular() {
        for (f1, f2) in [(0.0, 20.0), (100.0, 20.0), (50.0, 0.0), (0.0, 100.0)] {
            assert_eq!(inductance_json(f1, f2, 0.1, 0.01).unwrap()["positive_definite"], false, "{f1} {f2}");
        }
        for (f1, f2) in [(1.0, 99.0), (50.0, 50.0), (99.0, 1.0)] {
            assert_eq!(inductance_json(f1, f2, 0.1, 0.01).unwrap()["positive_definite"], true, "{f1} {f2}");
        }
    }

    #[test]
    fn bad_inputs_are_reported() {
        assert!(synthesize_json("PT", "bogus", 0.01, 50.0, 3.0, f64::NAN, 0).is_err());
        assert!(synthesize_json("PT", "wa-g", 0.01, 50.0, 0.0, f64::NAN, 0).is_err());
        assert!(inductance_json(120.0, 20.0, 0.1, 0.01).is_err());
        assert!(detect_json(&[0.0; 400], &[0.0; 400], &[0.0; 399], 0.05).is_err());
    }
}
