//! A scripted harmonic-ratio and polarity oracle re-identifies noise-free
//! disturbances from their defining signatures alone.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use diffprot::signal::{DisturbanceType, Waveform};
use diffprot::waveformgen::{generate_cases, CorpusPlan};

/// Amplitude of harmonic `h` over a window spanning exactly one cycle.
fn harmonic(x: &[f64], h: f64) -> f64 {
    let n = x.len() as f64;
    let (re, im) = x.iter().enumerate().fold((0.0, 0.0), |(re, im), (k, v)| {
        let a = 2.0 * PI * h * k as f64 / n;
        (re + v * a.cos(), im + v * a.sin())
    });
    2.0 * re.hypot(im) / n
}

fn peak(x: &[f64]) -> f64 {
    x.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn identify(w: &Waveform) -> Option<DisturbanceType> {
    let nc = w.spec.samples_per_cycle();
    let (inc, len) = (w.inception_index, w.len());
    let ch: Vec<Vec<f64>> = (0..3).map(|p| w.samples.iter().map(|s| s[p]).collect()).collect();
    let peaks: Vec<f64> = ch.iter().map(|c| peak(&c[inc..])).collect();
    let d = (0..3).max_by(|&a, &b| peaks[a].total_cmp(&peaks[b])).unwrap();
    let (x, pk) = (&ch[d], peaks[d]);
    let pre = ch.iter().map(|c| peak(&c[..inc])).fold(0.0, f64::max);
    let first = &x[inc..inc + nc];
    let last = &x[len - nc..];
    let (f1, l1) = (harmonic(first, 1.0), harmonic(last, 1.0));
    let ratio = |h: f64| harmonic(last, h) / l1;
    let active = peaks.iter().filter(|&&p| p > 0.2 * pk).count();
    // Largest second difference shortly after onset, relative to the peak.
    let ringing = (inc + 1..inc + nc / 3).map(|n| (x[n + 1] - 2.0 * x[n] + x[n - 1]).abs()).fold(0.0, f64::max) / pk;
    // Half-wave symmetric steady currents carry no even harmonics; a core
    // flux offset breaks the symmetry.
    let even_growth = ch.iter().map(|c| harmonic(&c[len - nc..], 2.0)).fold(0.0, f64::max);

    if pre == 0.0 {
        return (harmonic(first, 2.0) / f1 > 0.005).then_some(DisturbanceType::MagnetizingInrush);
    }
    if pk >= 3.0 {
        return Some(DisturbanceType::ExternalFaultCTSat);
    }
    if ratio(5.0) > 2.0 && ratio(7.0) > 1.0 {
        return Some(DisturbanceType::NonlinearLoadSwitching);
    }
    if ringing > 0.1 {
        return Some(DisturbanceType::CapacitorSwitching);
    }
    if active == 1 && ratio(2.0) < 0.05 && (ratio(3.0) - 0.6).abs() < 0.05 {
        return Some(DisturbanceType::Ferroresonance);
    }
    (even_growth > 1e-7).then_some(DisturbanceType::SympatheticInrush)
}

#[test]
fn signature_oracle_reidentifies_noise_free_disturbances() {
    let plan = CorpusPlan { units: vec![], fault_types: vec![], ..CorpusPlan::full() };
    let cases = generate_cases(&plan, 11).unwrap();
    let mut tally: BTreeMap<DisturbanceType, (usize, usize)> = BTreeMap::new();
    for (_, w) in &cases {
        let truth = w.label.disturbance_type.unwrap();
        let t = tally.entry(truth).or_default();
        t.0 += usize::from(identify(w) == Some(truth));
        t.1 += 1;
    }
    assert_eq!(tally.len(), DisturbanceType::ALL.len());
    let (hit, total) = tally.values().fold((0, 0), |a, t| (a.0 + t.0, a.1 + t.1));
    assert!(hit as f64 >= 0.99 * total as f64, "{hit}/{total}: {tally:?}");
    for (kind, (h, n)) in &tally {
        assert!(*h as f64 >= 0.99 * *n as f64, "{kind}: {h}/{n}");
    }
}
