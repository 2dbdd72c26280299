//! Parameter sweeps, stratified capping and on-disk corpora.

use std::collections::BTreeMap;
use std::fs;
use std::io::BufWriter;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::disturbance::{generate_disturbance, DisturbanceParams};
use super::fault::{simulate_internal_fault, FaultSpec, ShiftDirection, Side};
use super::noise::add_noise;
use super::units::UnitModel;
use super::GenError;
use crate::rng::{derive_seed_str, rng_for};
use crate::signal::{
    DisturbanceType, EventKind, EventLabel, FaultType, Phase, Provenance, SamplingSpec, Unit, Waveform,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepGrid {
    pub rf_ohm: Vec<f64>,
    /// Shorted percentages of phase and ground faults.
    pub shorted_pct: Vec<f64>,
    /// Shorted percentages of turn-to-turn and winding-to-winding faults.
    pub intra_shorted_pct: Vec<f64>,
    pub sides: Vec<Side>,
    pub shifts: Vec<ShiftDirection>,
    /// First inception sample, in whole cycles from the record start.
    pub first_inception_cycles: usize,
    pub inception_steps: usize,
    pub inception_stride: usize,
    pub disturbance_ltc: Vec<f64>,
    pub residual_pct: Vec<f64>,
    pub external_rf_ohm: Vec<f64>,
    pub external_fault_types: Vec<FaultType>,
    pub external_bus_kv: Vec<f64>,
    pub bank_mvar: Vec<f64>,
    pub firing_deg: Vec<f64>,
    pub grading_uf: Vec<f64>,
    pub ferro_inception_steps: usize,
    pub ferro_inception_stride: usize,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            rf_ohm: vec![0.01, 0.5, 10.0],
            shorted_pct: vec![20.0, 50.0, 80.0],
            intra_shorted_pct: vec![20.0, 40.0, 60.0, 80.0],
            sides: vec![Side::Primary, Side::Secondary],
            shifts: vec![ShiftDirection::Forward, ShiftDirection::Backward],
            first_inception_cycles: 2,
            inception_steps: 12,
            inception_stride: 14,
            disturbance_ltc: vec![0.2, 0.4, 0.6, 0.8, 1.0],
            residual_pct: vec![-80.0, -40.0, 0.0, 40.0, 80.0],
            external_rf_ohm: vec![0.01, 0.5, 10.0],
            external_fault_types: FaultType::PHASE_GROUND.to_vec(),
            external_bus_kv: vec![230.0, 500.0],
            bank_mvar: vec![500.0, 1000.0, 1500.0],
            firing_deg: vec![0.0, 10.0, 20.0, 30.0, 40.0, 50.0],
            grading_uf: (1..=10).map(|k| (k as f64 * 0.02 * 100.0).round() / 100.0).collect(),
            ferro_inception_steps: 24,
            ferro_inception_stride: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusPlan {
    pub sampling: SamplingSpec,
    pub duration_cycles: usize,
    pub units: Vec<Unit>,
    pub fault_types: Vec<FaultType>,
    pub disturbances: Vec<DisturbanceType>,
    pub grid: SweepGrid,
    /// Cap on every top-level class (internal faults count as one class).
    pub cap_per_class: Option<usize>,
    /// When set, internal faults are capped per (unit, fault type) stratum
    /// instead of by `cap_per_class`.
    pub fault_cap_per_stratum: Option<usize>,
    /// Measurement noise applied to every case; `None` is noise-free.
    pub snr_db: Option<f64>,
}

impl Default for CorpusPlan {
    fn default() -> Self {
        Self {
            sampling: SamplingSpec::default(),
            duration_cycles: 7,
            units: Unit::ALL.to_vec(),
            fault_types: FaultType::ALL.to_vec(),
            disturbances: DisturbanceType::ALL.to_vec(),
            grid: SweepGrid::default(),
            cap_per_class: None,
            fault_cap_per_stratum: None,
            snr_db: None,
        }
    }
}

impl CorpusPlan {
    /// Full uncapped sweep.
    pub fn full() -> Self {
        Self::default()
    }

    /// Desk-scale corpus used for end-to-end checks: 30 cases per
    /// (unit, fault type) stratum and 120 cases per disturbance class.
    pub fn reference() -> Self {
        Self { cap_per_class: Some(120), fault_cap_per_stratum: Some(30), ..Self::default() }
    }

    pub fn capped(cases_per_class: usize) -> Self {
        Self { cap_per_class: Some(cases_per_class), ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source")]
pub enum CaseSource {
    Fault { unit: Unit, fault: FaultSpec },
    Disturbance { params: DisturbanceParams },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseSpec {
    pub id: String,
    pub label: EventLabel,
    pub inception_index: usize,
    pub case: CaseSource,
}

impl CaseSpec {
    fn stratum(&self) -> String {
        self.label.key()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub kind: EventKind,
    pub unit: Option<Unit>,
    pub fault_type: Option<FaultType>,
    pub disturbance_type: Option<DisturbanceType>,
    pub inception_index: usize,
    pub provenance: Provenance,
    pub seed: u64,
}

impl ManifestEntry {
    pub fn label(&self) -> EventLabel {
        EventLabel {
            kind: self.kind,
            unit: self.unit,
            fault_type: self.fault_type,
            disturbance_type: self.disturbance_type,
        }
    }
}

fn inceptions(spec: &SamplingSpec, first_cycles: usize, steps: usize, stride: usize) -> Vec<usize> {
    let first = first_cycles * spec.samples_per_cycle();
    (0..steps).map(|j| first + j * stride).collect()
}

fn enumerate_faults(plan: &CorpusPlan, unit: Unit, out: &mut Vec<(EventLabel, usize, CaseSource)>) {
    let g = &plan.grid;
    let model = UnitModel::preset(unit);
    let incs = inceptions(&plan.sampling, g.first_inception_cycles, g.inception_steps, g.inception_stride);
    for &ft in &plan.fault_types {
        let label = EventLabel::fault(unit, ft);
        let push = |out: &mut Vec<_>, fault: FaultSpec, inc: usize| {
            out.push((label, inc, CaseSource::Fault { unit, fault }));
        };
        match ft {
            FaultType::TurnToTurn | FaultType::WindingToWinding => {
                let sides: &[Side] = if ft == FaultType::TurnToTurn { &g.sides } else { &[Side::Primary] };
                for &rf in &g.rf_ohm {
                    for &pct in &g.intra_shorted_pct {
                        for &inc in &incs {
                            for phase in Phase::ALL {
                                for &side in sides {
                                    for &shift in &g.shifts {
                                        for &ltc in &model.ltc_steps {
                                            let fault = FaultSpec {
                                                fault_type: ft,
                                                rf_ohm: rf,
                                                shorted_pct: pct,
                                                ltc,
                                                side,
                                                shift,
                                                phase,
                                            };
                                            push(out, fault, inc);
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
            _ => {
                for &rf in &g.rf_ohm {
                    for &pct in &g.shorted_pct {
                        for &inc in &incs {
                            for &side in &g.sides {
                                for &shift in &g.shifts {
                                    for &ltc in &model.ltc_steps {
                                        let fault = FaultSpec {
                                            fault_type: ft,
                                            rf_ohm: rf,
                                            shorted_pct: pct,
                                            ltc,
                                            side,
                                            shift,
                                            phase: Phase::A,
                                        };
                                        push(out, fault, inc);
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

fn enumerate_disturbances(plan: &CorpusPlan, kind: DisturbanceType, out: &mut Vec<(EventLabel, usize, CaseSource)>) {
    let g = &plan.grid;
    let label = EventLabel::disturbance(kind);
    let incs = inceptions(&plan.sampling, g.first_inception_cycles, g.inception_steps, g.inception_stride);
    let mut push = |params: DisturbanceParams, inc: usize| {
        out.push((label, inc, CaseSource::Disturbance { params }));
    };
    match kind {
        DisturbanceType::MagnetizingInrush | DisturbanceType::SympatheticInrush => {
            for &r in &g.residual_pct {
                for phase in Phase::ALL {
                    for &inc in &incs {
                        for &ltc in &g.disturbance_ltc {
                            for &shift in &g.shifts {
                                let params = if kind == DisturbanceType::MagnetizingInrush {
                                    DisturbanceParams::MagnetizingInrush {
                                        residual_pct: r,
                                        residual_phase: phase,
                                        ltc,
                                        shift,
                                    }
                                } else {
                                    DisturbanceParams::SympatheticInrush {
                                        residual_pct: r,
                                        residual_phase: phase,
                                        ltc,
                                        shift,
                                    }
                                };
                                push(params, inc);
                            }
                        }
                    }
                }
            }
        }
        DisturbanceType::ExternalFaultCTSat => {
            for &rf in &g.external_rf_ohm {
                for &ft in &g.external_fault_types {
                    for &inc in &incs {
                        for &ltc in &g.disturbance_ltc {
                            for &shift in &g.shifts {
                                for &bus in &g.external_bus_kv {
                                    push(
                                        DisturbanceParams::ExternalFaultCTSat {
                                            fault_type: ft,
                                            rf_ohm: rf,
                                            bus_kv: bus,
                                            ltc,
                                            shift,
                                        },
                                        inc,
                                    );
                                }
                            }
                        }
                    }
                }
            }
        }
        DisturbanceType::NonlinearLoadSwitching => {
            for &firing in &g.firing_deg {
                for &inc in &incs {
                    for &ltc in &g.disturbance_ltc {
                        push(DisturbanceParams::NonlinearLoadSwitching { firing_deg: firing, ltc }, inc);
                    }
                }
            }
        }
        DisturbanceType::CapacitorSwitching => {
            for &bank in &g.bank_mvar {
                for &inc in &incs {
                    for &shift in &g.shifts {
                        for &ltc in &g.disturbance_ltc {
                            push(DisturbanceParams::CapacitorSwitching { bank_mvar: bank, ltc, shift }, inc);
                        }
                    }
                }
            }
        }
        DisturbanceType::Ferroresonance => {
            let ferro =
                inceptions(&plan.sampling, g.first_inception_cycles, g.ferro_inception_steps, g.ferro_inception_stride);
            for &c in &g.grading_uf {
                for phase in Phase::ALL {
                    for &inc in &ferro {
                        push(DisturbanceParams::Ferroresonance { grading_uf: c, phase }, inc);
                    }
                }
            }
        }
    }
}

fn slug(label: &EventLabel) -> String {
    match label.kind {
        EventKind::InternalFault => format!(
            "fault_{}_{}",
            label.unit.map_or("unknown", Unit::name),
            label.fault_type.map_or("unknown", FaultType::name)
        ),
        EventKind::Disturbance => format!("dist_{}", label.disturbance_type.map_or("unknown", DisturbanceType::name)),
    }
}

/// Every case of the plan's cross-product, before capping.
pub fn enumerate_plan(plan: &CorpusPlan) -> Vec<CaseSpec> {
    let mut raw = Vec::new();
    for &unit in &plan.units {
        enumerate_faults(plan, unit, &mut raw);
    }
    for &kind in &plan.disturbances {
        enumerate_disturbances(plan, kind, &mut raw);
    }
    let mut counters: BTreeMap<String, usize> = BTreeMap::new();
    raw.into_iter()
        .map(|(label, inception_index, case)| {
            let s = slug(&label);
            let k = counters.entry(s.clone()).or_default();
            let id = format!("{s}_{:06}", *k);
            *k += 1;
            CaseSpec { id, label, inception_index, case }
        })
        .collect()
}

/// Split `cap` across strata of the given sizes as evenly as possible;
/// small strata give their unused share to the others.
fn water_fill(sizes: &[usize], cap: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by_key(|&i| (sizes[i], i));
    let mut alloc = vec![0; sizes.len()];
    let mut remaining = cap;
    for (pos, &i) in order.iter().enumerate() {
        let left = sizes.len() - pos;
        let share = remaining / left;
        let take = share.min(sizes[i]);
        alloc[i] = take;
        remaining -= take;
    }
    // Hand out any remainder one by one in stratum order.
    let mut i = 0;
    while remaining > 0 && alloc.iter().zip(sizes).any(|(a, s)| a < s) {
        if alloc[i] < sizes[i] {
            alloc[i] += 1;
            remaining -= 1;
        }
        i = (i + 1) % sizes.len();
    }
    alloc
}

/// Apply the plan's caps by seeded stratified subsampling; enumeration
/// order is preserved among the kept cases.
pub fn select_cases(plan: &CorpusPlan, seed: u64) -> Vec<CaseSpec> {
    let all = enumerate_plan(plan);
    let mut strata: BTreeMap<(String, String), Vec<usize>> = BTreeMap::new();
    for (i, c) in all.iter().enumerate() {
        strata.entry((c.label.top_class().to_string(), c.stratum())).or_default().push(i);
    }
    let mut by_class: BTreeMap<String, Vec<(String, Vec<usize>)>> = BTreeMap::new();
    for ((class, stratum), idx) in strata {
        by_class.entry(class).or_default().push((stratum, idx));
    }
    let mut keep = vec![false; all.len()];
    for (class, groups) in by_class {
        let is_fault = class == "InternalFault";
        let sizes: Vec<usize> = groups.iter().map(|g| g.1.len()).collect();
        let alloc = match (is_fault, plan.fault_cap_per_stratum, plan.cap_per_class) {
            (true, Some(k), _) => sizes.iter().map(|&s| s.min(k)).collect(),
            (_, _, Some(cap)) => water_fill(&sizes, cap),
            _ => sizes.clone(),
        };
        for ((stratum, idx), take) in groups.into_iter().zip(alloc) {
            let mut chosen = idx.clone();
            if take < idx.len() {
                let mut rng = rng_for(derive_seed_str(seed, &stratum), 0);
                chosen.shuffle(&mut rng);
                chosen.truncate(take);
            }
            for i in chosen {
                keep[i] = true;
            }
        }
    }
    all.into_iter().zip(keep).filter_map(|(c, k)| k.then_some(c)).collect()
}

pub fn generate_case(plan: &CorpusPlan, case: &CaseSpec, case_seed: u64) -> Result<Waveform, GenError> {
    let mut w = match &case.case {
        CaseSource::Fault { unit, fault } => simulate_internal_fault(
            &UnitModel::preset(*unit),
            fault,
            &plan.sampling,
            plan.duration_cycles,
            case.inception_index,
        )?,
        CaseSource::Disturbance { params } => {
            generate_disturbance(params.kind(), params, &plan.sampling, plan.duration_cycles, case.inception_index)?
        }
    };
    w.provenance.insert("case_id".into(), case.id.clone().into());
    if let Some(snr) = plan.snr_db {
        w = add_noise(&w, snr, case_seed);
        w.provenance.insert("snr_db".into(), serde_json::json!(snr));
    }
    Ok(w)
}

fn entry_for(case: &CaseSpec, w: &Waveform, seed: u64) -> ManifestEntry {
    ManifestEntry {
        file: format!("waveforms/{}.csv", case.id),
        kind: case.label.kind,
        unit: case.label.unit,
        fault_type: case.label.fault_type,
        disturbance_type: case.label.disturbance_type,
        inception_index: case.inception_index,
        provenance: w.provenance.clone(),
        seed,
    }
}

/// Generate every selected case in memory, in enumeration order.
pub fn generate_cases(plan: &CorpusPlan, seed: u64) -> Result<Vec<(ManifestEntry, Waveform)>, GenError> {
    let cases = select_cases(plan, seed);
    if cases.is_empty() {
        return Err(GenError::PlanEmpty);
    }
    let run = |case: &CaseSpec| {
        let case_seed = derive_seed_str(seed, &case.id);
        let w = generate_case(plan, case, case_seed)?;
        Ok((entry_for(case, &w, case_seed), w))
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        cases.par_iter().map(run).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        cases.iter().map(run).collect()
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> GenError + '_ {
    move |source| GenError::IoFailure { path: path.display().to_string(), source }
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Write the corpus under `dir`: `waveforms/<id>.csv` plus `manifest.json`
/// sorted by file name. Returns the manifest.
pub fn generate_corpus(plan: &CorpusPlan, seed: u64, dir: &Path) -> Result<Vec<ManifestEntry>, GenError> {
    let cases = generate_cases(plan, seed)?;
    let wdir = dir.join("waveforms");
    fs::create_dir_all(&wdir).map_err(io_err(&wdir))?;
    let mut manifest = Vec::with_capacity(cases.len());
    for (entry, w) in cases {
        let path = dir.join(&entry.file);
        let f = fs::File::create(&path).map_err(io_err(&path))?;
        let mut out = BufWriter::new(f);
        w.write_csv(&mut out)?;
        std::io::Write::flush(&mut out).map_err(io_err(&path))?;
        manifest.push(entry);
    }
    manifest.sort_by(|a, b| a.file.cmp(&b.file));
    write_manifest(&manifest, &dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

pub fn write_manifest(manifest: &[ManifestEntry], path: &Path) -> Result<(), GenError> {
    let mut text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>, GenError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| GenError::IoFailure {
        path: path.display().to_string(),
        source: std::io::Error::new(std::io::ErrorKind::InvalidData, e),
    })
}

/// Load a corpus written by [`generate_corpus`]; the sample rate of each
/// record is inferred from its time column.
pub fn read_corpus(dir: &Path, fundamental_hz: f64) -> Result<Vec<(ManifestEntry, Waveform)>, GenError> {
    let manifest = read_manifest(&dir.join(MANIFEST_FILE))?;
    manifest
        .into_iter()
        .map(|e| {
            let path = dir.join(&e.file);
            let f = fs::File::open(&path).map_err(io_err(&path))?;
            let r = crate::signal::read_csv(std::io::BufReader::new(f), fundamental_hz)?;
            let w = Waveform {
                spec: r.spec,
                samples: r.samples,
                label: e.label(),
                inception_index: e.inception_index,
                provenance: e.provenance.clone(),
            };
            w.check_invariants()?;
            Ok((e, w))
        })
        .collect()
}

/// Per-class counts of a manifest, keyed by top-level class.
pub fn class_counts(manifest: &[ManifestEntry]) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for e in manifest {
        *counts.entry(e.label().top_class().to_string()).or_default() += 1;
    }
    counts
}
