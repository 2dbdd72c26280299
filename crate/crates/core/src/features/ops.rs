//! Scalar feature operators on a single channel.

use std::cell::RefCell;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::FeatureError;

/// Inclusive linear-interpolation quantile of unsorted data (`q` in [0, 1]).
pub fn quantile(x: &[f64], q: f64) -> f64 {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    quantile_sorted(&s, q)
}

fn quantile_sorted(s: &[f64], q: f64) -> f64 {
    let pos = q * (s.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    s[lo] + (pos - lo as f64) * (s[hi] - s[lo])
}

/// Mean absolute consecutive change over pairs whose both samples lie inside
/// the `[quantile(ql), quantile(qh)]` band; 0 when no pair qualifies.
pub fn change_quantile(x: &[f64], ql: f64, qh: f64) -> Result<f64, FeatureError> {
    if x.len() < 2 {
        return Err(FeatureError::TooShort { needed: 2, got: x.len() });
    }
    if !(0.0..1.0).contains(&ql) || !(ql < qh && qh <= 1.0) {
        return Err(FeatureError::InvalidParameter(format!("quantile band ({ql}, {qh})")));
    }
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let lo = quantile_sorted(&s, ql);
    let hi = quantile_sorted(&s, qh);
    let inside = |v: f64| v >= lo && v <= hi;
    let mut sum = 0.0;
    let mut count = 0usize;
    for w in x.windows(2) {
        if inside(w[0]) && inside(w[1]) {
            sum += (w[1] - w[0]).abs();
            count += 1;
        }
    }
    Ok(if count == 0 { 0.0 } else { sum / count as f64 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DftPart {
    Abs,
    Real,
    Imag,
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn fft(x: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()).process(&mut buf));
    buf
}

/// Part of `X_k = sum_t x_t exp(-j 2 pi k t / n)` for `0 <= k <= n/2`.
pub fn dft_coefficient(x: &[f64], k: usize, part: DftPart) -> Result<f64, FeatureError> {
    if x.is_empty() {
        return Err(FeatureError::TooShort { needed: 1, got: 0 });
    }
    if k > x.len() / 2 {
        return Err(FeatureError::IndexOutOfRange { index: k, max: x.len() / 2 });
    }
    let c = fft(x)[k];
    Ok(match part {
        DftPart::Abs => c.norm(),
        DftPart::Real => c.re,
        DftPart::Imag => c.im,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrendStat {
    Slope,
    Intercept,
    Stderr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregator {
    Mean,
    Min,
    Max,
    Var,
}

impl Aggregator {
    /// `Var` is the population variance.
    pub fn apply(self, v: &[f64]) -> f64 {
        let n = v.len() as f64;
        match self {
            Aggregator::Mean => v.iter().sum::<f64>() / n,
            Aggregator::Min => v.iter().copied().fold(f64::INFINITY, f64::min),
            Aggregator::Max => v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            Aggregator::Var => {
                let m = v.iter().sum::<f64>() / n;
                v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n
            }
        }
    }
}

/// OLS fit of `y = a + b t` on `t = 0..n`; returns (intercept, slope,
/// standard error of the slope). The standard error is 0 for two points.
fn ols(y: &[f64]) -> (f64, f64, f64) {
    let n = y.len() as f64;
    let tm = (n - 1.0) / 2.0;
    let ym = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (t, &v) in y.iter().enumerate() {
        let dt = t as f64 - tm;
        sxx += dt * dt;
        sxy += dt * (v - ym);
    }
    let b = sxy / sxx;
    let a = ym - b * tm;
    if y.len() <= 2 {
        return (a, b, 0.0);
    }
    let sse: f64 = y.iter().enumerate().map(|(t, &v)| (v - a - b * t as f64).powi(2)).sum();
    (a, b, (sse / (n - 2.0) / sxx).sqrt())
}

/// Aggregate of a per-window OLS statistic over consecutive non-overlapping
/// windows; a trailing partial window is dropped.
pub fn agg_linear_trend(x: &[f64], window: usize, stat: TrendStat, agg: Aggregator) -> Result<f64, FeatureError> {
    if window < 2 {
        return Err(FeatureError::InvalidParameter(format!("trend window {window} must be at least 2")));
    }
    if x.len() < window {
        return Err(FeatureError::TooShort { needed: window, got: x.len() });
    }
    let per: Vec<f64> = x
        .chunks_exact(window)
        .map(|w| {
            let (a, b, se) = ols(w);
            match stat {
                TrendStat::Slope => b,
                TrendStat::Intercept => a,
                TrendStat::Stderr => se,
            }
        })
        .collect();
    Ok(agg.apply(&per))
}

/// Periodic Hann window of length `n`.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos()).collect()
}

/// One-sided Welch density (unit sample rate, Hann, 50% overlap, no
/// detrending) for bins `0..=segment/2`.
pub fn welch_spectrum(x: &[f64], segment: usize) -> Result<Vec<f64>, FeatureError> {
    if segment < 2 || !segment.is_power_of_two() {
        return Err(FeatureError::InvalidParameter(format!("segment {segment} must be a power of two")));
    }
    if x.len() < segment {
        return Err(FeatureError::TooShort { needed: segment, got: x.len() });
    }
    let w = hann(segment);
    let scale = 1.0 / w.iter().map(|v| v * v).sum::<f64>();
    let step = segment / 2;
    let nseg = (x.len() - segment) / step + 1;
    let half = segment / 2;
    let mut acc = vec![0.0; half + 1];
    let mut buf = vec![0.0; segment];
    for s in 0..nseg {
        for (i, b) in buf.iter_mut().enumerate() {
            *b = x[s * step + i] * w[i];
        }
        for (k, c) in fft(&buf).iter().take(half + 1).enumerate() {
            acc[k] += c.norm_sqr();
        }
    }
    for (k, a) in acc.iter_mut().enumerate() {
        let fold = if k == 0 || k == half { 1.0 } else { 2.0 };
        *a *= fold * scale / nseg as f64;
    }
    Ok(acc)
}

pub fn welch_density(x: &[f64], bin: usize, segment: usize) -> Result<f64, FeatureError> {
    let spec = welch_spectrum(x, segment)?;
    spec.get(bin).copied().ok_or(FeatureError::IndexOutOfRange { index: bin, max: segment / 2 })
}

/// Least-squares `(phi_0, ..., phi_P)` of `x_t = phi_0 + sum_i phi_i x_{t-i}`
/// over `t = P..n`, via Cholesky on the normal equations.
pub fn ar_coefficients(x: &[f64], order: usize) -> Result<Vec<f64>, FeatureError> {
    if order == 0 {
        return Err(FeatureError::InvalidParameter("autoregressive order must be at least 1".into()));
    }
    let m = order + 1;
    if x.len() < 2 * m {
        return Err(FeatureError::TooShort { needed: 2 * m, got: x.len() });
    }
    // Normal equations G phi = r with regressors (1, x_{t-1}, ..., x_{t-P}).
    let mut g = vec![vec![0.0; m]; m];
    let mut r = vec![0.0; m];
    let mut z = vec![0.0; m];
    for t in order..x.len() {
        z[0] = 1.0;
        for i in 1..m {
            z[i] = x[t - i];
        }
        for i in 0..m {
            r[i] += z[i] * x[t];
            for j in 0..=i {
                g[i][j] += z[i] * z[j];
            }
        }
    }
    let scale = (0..m).map(|i| g[i][i]).fold(0.0, f64::max);
    // In-place lower Cholesky; a pivot that collapses relative to the
    // diagonal scale means that regressor is a combination of earlier ones.
    for j in 0..m {
        let mut d = g[j][j];
        for k in 0..j {
            d -= g[j][k] * g[j][k];
        }
        if !(d > 1e-10 * scale) {
            return Err(FeatureError::SingularDesign { lag: j });
        }
        let d = d.sqrt();
        g[j][j] = d;
        for i in j + 1..m {
            let mut s = g[i][j];
            for k in 0..j {
                s -= g[i][k] * g[j][k];
            }
            g[i][j] = s / d;
        }
    }
    let mut y = vec![0.0; m];
    for i in 0..m {
        let s: f64 = (0..i).map(|k| g[i][k] * y[k]).sum();
        y[i] = (r[i] - s) / g[i][i];
    }
    let mut phi = vec![0.0; m];
    for i in (0..m).rev() {
        let s: f64 = (i + 1..m).map(|k| g[k][i] * phi[k]).sum();
        phi[i] = (y[i] - s) / g[i][i];
    }
    Ok(phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn change_quantile_examples() {
        assert_eq!(change_quantile(&[2.0; 6], 0.2, 0.8).unwrap(), 0.0);
        assert_eq!(change_quantile(&[0.0, 1.0, 0.0, 1.0], 0.0, 1.0).unwrap(), 1.0);
        // Sorted: 0 1 1 2 5 5; q(0.5) = 1.5, band [0, 1.5]; pairs fully inside
        // the band: none of (0,5),(5,1),(1,2),(2,1),(1,5).
        assert_eq!(change_quantile(&[0.0, 5.0, 1.0, 2.0, 1.0, 5.0], 0.0, 0.5).unwrap(), 0.0);
        // Band [0, 2] admits (1,2) and (2,1).
        assert_eq!(change_quantile(&[0.0, 5.0, 1.0, 2.0, 1.0, 5.0], 0.0, 0.6).unwrap(), 1.0);
        assert!(change_quantile(&[1.0], 0.0, 1.0).is_err());
        assert!(change_quantile(&[1.0, 2.0], 0.5, 0.5).is_err());
    }

    #[test]
    fn dft_examples() {
        assert!((dft_coefficient(&[1.0; 4], 0, DftPart::Abs).unwrap() - 4.0).abs() < 1e-12);
        assert!(dft_coefficient(&[1.0; 4], 1, DftPart::Abs).unwrap().abs() < 1e-12);
        let x: Vec<f64> = (0..32).map(|t| (2.0 * std::f64::consts::PI * 3.0 * t as f64 / 32.0).cos()).collect();
        assert!((dft_coefficient(&x, 3, DftPart::Abs).unwrap() - 16.0).abs() < 1e-9);
        assert_eq!(dft_coefficient(&x, 17, DftPart::Abs), Err(FeatureError::IndexOutOfRange { index: 17, max: 16 }));
    }

    #[test]
    fn trend_examples() {
        let line = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert!((agg_linear_trend(&line, 5, TrendStat::Slope, Aggregator::Mean).unwrap() - 1.0).abs() < 1e-12);
        assert!(agg_linear_trend(&line, 5, TrendStat::Stderr, Aggregator::Mean).unwrap().abs() < 1e-12);
        let tent = [0.0, 1.0, 2.0, 3.0, 4.0, 4.0, 3.0, 2.0, 1.0, 0.0];
        assert!(agg_linear_trend(&tent, 5, TrendStat::Slope, Aggregator::Mean).unwrap().abs() < 1e-12);
        assert!((agg_linear_trend(&tent, 5, TrendStat::Slope, Aggregator::Var).unwrap() - 1.0).abs() < 1e-12);
        assert!((agg_linear_trend(&tent, 5, TrendStat::Intercept, Aggregator::Max).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn welch_examples() {
        let dc = welch_spectrum(&[1.5; 256], 64).unwrap();
        // Periodic Hann leaks DC into bin 1 only.
        for &v in &dc[2..] {
            assert!(dc[0] > 1e6 * v);
        }
        assert!(welch_spectrum(&[0.0; 256], 64).unwrap().iter().all(|&v| v == 0.0));
        for m in 1..32 {
            let x: Vec<f64> =
                (0..300).map(|t| (2.0 * std::f64::consts::PI * m as f64 * t as f64 / 64.0).sin()).collect();
            let s = welch_spectrum(&x, 64).unwrap();
            let arg = (0..s.len()).max_by(|&a, &b| s[a].total_cmp(&s[b])).unwrap();
            assert_eq!(arg, m);
        }
        assert!(matches!(welch_density(&[0.0; 256], 33, 64), Err(FeatureError::IndexOutOfRange { .. })));
        assert!(matches!(welch_density(&[0.0; 32], 1, 64), Err(FeatureError::TooShort { .. })));
    }

    #[test]
    fn ar_examples() {
        let mut x = vec![1.0];
        for _ in 0..20 {
            x.push(0.8 * x.last().unwrap());
        }
        let phi = ar_coefficients(&x, 1).unwrap();
        assert!(phi[0].abs() < 1e-9 && (phi[1] - 0.8).abs() < 1e-9, "{phi:?}");
        assert_eq!(ar_coefficients(&[3.0; 20], 2), Err(FeatureError::SingularDesign { lag: 1 }));

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut y = vec![0.3, -0.2];
        for t in 2..100_000 {
            let e: f64 = rng.random_range(-0.01..0.01);
            y.push(0.1 + 0.5 * y[t - 1] - 0.3 * y[t - 2] + e);
        }
        let phi = ar_coefficients(&y, 2).unwrap();
        for (got, want) in phi.iter().zip([0.1, 0.5, -0.3]) {
            assert!((got - want).abs() < 1e-2, "{phi:?}");
        }
    }

    proptest! {
        #[test]
        fn change_quantile_shift_invariant(x in prop::collection::vec(-5.0f64..5.0, 2..100), c in -50.0f64..50.0) {
            let a = change_quantile(&x, 0.2, 0.8).unwrap();
            let y: Vec<f64> = x.iter().map(|v| v + c).collect();
            let b = change_quantile(&y, 0.2, 0.8).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
        }

        #[test]
        fn trend_slope_scales(x in prop::collection::vec(-5.0f64..5.0, 10..200), k in -20.0f64..20.0) {
            let a = agg_linear_trend(&x, 10, TrendStat::Slope, Aggregator::Mean).unwrap();
            let y: Vec<f64> = x.iter().map(|v| v * k).collect();
            let b = agg_linear_trend(&y, 10, TrendStat::Slope, Aggregator::Mean).unwrap();
            prop_assert!((a * k - b).abs() <= 1e-9 * (1.0 + b.abs()));
        }
    }
}
