//! Additive white Gaussian measurement noise at a target SNR.

use rand_distr::{Distribution, StandardNormal};

use crate::rng::rng_for;
use crate::signal::Waveform;

/// Per-channel power over the post-inception segment.
pub fn post_inception_power(w: &Waveform) -> [f64; 3] {
    let seg = &w.samples[w.inception_index.min(w.len())..];
    let mut p = [0.0; 3];
    if seg.is_empty() {
        return p;
    }
    for s in seg {
        for c in 0..3 {
            p[c] += s[c] * s[c];
        }
    }
    p.map(|v| v / seg.len() as f64)
}

/// Add zero-mean Gaussian noise with variance `P / 10^(snr/10)` per channel,
/// `P` being the channel's post-inception power. Infinite SNR is a no-op.
///
/// The unit-variance draws depend only on `seed`, so the same seed at
/// different SNRs produces the same noise shape at different scales.
pub fn add_noise(w: &Waveform, snr_db: f64, seed: u64) -> Waveform {
    let mut out = w.clone();
    if snr_db == f64::INFINITY {
        return out;
    }
    let power = post_inception_power(w);
    for c in 0..3 {
        let sigma = (power[c] / 10f64.powf(snr_db / 10.0)).sqrt();
        let mut rng = rng_for(seed, c as u64);
        for s in out.samples.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            s[c] += sigma * z;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{DisturbanceType, EventLabel, Provenance, SamplingSpec};

    fn sine(n: usize) -> Waveform {
        Waveform {
            spec: SamplingSpec::default(),
            samples: (0..n)
                .map(|i| {
                    let a = i as f64 * 0.05;
                    [a.sin(), 2.0 * a.cos(), 0.5 * (a + 1.0).sin()]
                })
                .collect(),
            label: EventLabel::disturbance(DisturbanceType::CapacitorSwitching),
            inception_index: 0,
            provenance: Provenance::new(),
        }
    }

    #[test]
    fn infinite_snr_is_identity() {
        let w = sine(1000);
        assert_eq!(add_noise(&w, f64::INFINITY, 3), w);
    }

    #[test]
    fn noise_power_matches_snr() {
        let w = sine(20_000);
        let noisy = add_noise(&w, 10.0, 11);
        let p = post_inception_power(&w);
        for c in 0..3 {
            let np: f64 =
                noisy.samples.iter().zip(&w.samples).map(|(a, b)| (a[c] - b[c]).powi(2)).sum::<f64>() / w.len() as f64;
            let target = p[c] / 10.0;
            assert!((np - target).abs() / target < 0.05, "channel {c}: {np} vs {target}");
        }
    }

    #[test]
    fn same_seed_same_noise() {
        let w = sine(500);
        assert_eq!(add_noise(&w, 20.0, 5), add_noise(&w, 20.0, 5));
        assert_ne!(add_noise(&w, 20.0, 5), add_noise(&w, 20.0, 6));
    }
}
