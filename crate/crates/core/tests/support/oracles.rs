//! Independent brute-force references for the feature operators, the change
//! detection filter and the tree builder. Each check returns `Err` with a
//! description of the first mismatch.

#![allow(dead_code)]

use diffprot::detector::cdf_series;
use diffprot::ensembles::{cart_fit, CartConfig, Dataset, Impurity, Tree};
use diffprot::features::{
    agg_linear_trend, ar_coefficients, change_quantile, dft_coefficient, welch_density, Aggregator, DftPart, TrendStat,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

/// `|got - want| <= tol * max(|want|, scale)`.
pub fn close(got: f64, want: f64, scale: f64, tol: f64) -> bool {
    (got - want).abs() <= tol * want.abs().max(scale)
}

/// Random test signal of length `n`: a mix of noise, a fundamental, a
/// harmonic, a ramp and a step, with per-draw weights.
pub fn random_signal(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let w: [f64; 5] = std::array::from_fn(|_| rng.random_range(0.0..2.0));
    let period = rng.random_range(8.0..200.0);
    let step_at = rng.random_range(0..n);
    (0..n)
        .map(|t| {
            let tt = t as f64;
            w[0] * rng.random_range(-1.0..1.0)
                + w[1] * (2.0 * PI * tt / period).sin()
                + w[2] * (6.0 * PI * tt / period + 0.3).cos()
                + w[3] * tt / n as f64
                + if t >= step_at { w[4] } else { 0.0 }
        })
        .collect()
}

fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// `X_k` by the defining sum.
pub fn direct_dft(x: &[f64], k: usize) -> (f64, f64) {
    let n = x.len() as f64;
    x.iter().enumerate().fold((0.0, 0.0), |(re, im), (t, &v)| {
        let a = -2.0 * PI * k as f64 * t as f64 / n;
        (re + v * a.cos(), im + v * a.sin())
    })
}

/// Order statistic of rank `r` found by counting, without sorting.
fn rank_value(x: &[f64], r: usize) -> f64 {
    for &v in x {
        let below = x.iter().filter(|&&u| u < v).count();
        let equal = x.iter().filter(|&&u| u == v).count();
        if below <= r && r < below + equal {
            return v;
        }
    }
    unreachable!("every rank is occupied")
}

/// Linear-interpolation quantile by rank enumeration.
pub fn direct_quantile(x: &[f64], q: f64) -> f64 {
    let pos = q * (x.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let a = rank_value(x, lo);
    a + (pos - lo as f64) * (rank_value(x, hi) - a)
}

pub fn direct_change_quantile(x: &[f64], ql: f64, qh: f64) -> f64 {
    let lo = direct_quantile(x, ql);
    let hi = direct_quantile(x, qh);
    let steps: Vec<f64> = (1..x.len())
        .filter(|&t| [x[t - 1], x[t]].iter().all(|v| (lo..=hi).contains(v)))
        .map(|t| (x[t] - x[t - 1]).abs())
        .collect();
    if steps.is_empty() {
        0.0
    } else {
        steps.iter().sum::<f64>() / steps.len() as f64
    }
}

/// Uncentred textbook OLS: slope, intercept and slope standard error.
pub fn hand_ols(y: &[f64]) -> (f64, f64, f64) {
    let n = y.len() as f64;
    let (mut st, mut sy, mut stt, mut sty) = (0.0, 0.0, 0.0, 0.0);
    for (t, &v) in y.iter().enumerate() {
        let t = t as f64;
        st += t;
        sy += v;
        stt += t * t;
        sty += t * v;
    }
    let b = (n * sty - st * sy) / (n * stt - st * st);
    let a = (sy - b * st) / n;
    if y.len() <= 2 {
        return (b, a, 0.0);
    }
    let sse: f64 = y.iter().enumerate().map(|(t, &v)| (v - a - b * t as f64).powi(2)).sum();
    let sxx = stt - st * st / n;
    (b, a, (sse / (n - 2.0) / sxx).sqrt())
}

pub fn direct_trend(x: &[f64], window: usize, stat: TrendStat) -> f64 {
    let per: Vec<f64> = (0..x.len() / window)
        .map(|i| {
            let (b, a, se) = hand_ols(&x[i * window..(i + 1) * window]);
            match stat {
                TrendStat::Slope => b,
                TrendStat::Intercept => a,
                TrendStat::Stderr => se,
            }
        })
        .collect();
    per.iter().sum::<f64>() / per.len() as f64
}

/// Welch density with every segment transformed by the defining DFT sum.
pub fn direct_welch(x: &[f64], bin: usize, segment: usize) -> f64 {
    let w: Vec<f64> = (0..segment).map(|i| (PI * i as f64 / segment as f64).sin().powi(2)).collect();
    let u: f64 = w.iter().map(|v| v * v).sum();
    let step = segment / 2;
    let starts: Vec<usize> = (0..).map(|s| s * step).take_while(|&s| s + segment <= x.len()).collect();
    let mean_power = starts
        .iter()
        .map(|&s| {
            let seg: Vec<f64> = (0..segment).map(|i| x[s + i] * w[i]).collect();
            let (re, im) = direct_dft(&seg, bin);
            re * re + im * im
        })
        .sum::<f64>()
        / starts.len() as f64;
    let fold = if bin == 0 || bin == segment / 2 { 1.0 } else { 2.0 };
    fold * mean_power / u
}

/// AR least squares via a Householder QR of the full design matrix.
pub fn qr_ar(x: &[f64], order: usize) -> Vec<f64> {
    let rows = x.len() - order;
    let a = DMatrix::from_fn(rows, order + 1, |r, c| if c == 0 { 1.0 } else { x[r + order - c] });
    let b = DVector::from_fn(rows, |r, _| x[r + order]);
    let qr = a.qr();
    let qtb = qr.q().transpose() * b;
    qr.r().solve_upper_triangular(&qtb).expect("full-rank design").iter().copied().collect()
}

/// Checks every feature operator against its oracle on `draws` random inputs
/// of length up to 512. Returns the number of comparisons made.
pub fn check_feature_oracles(seed: u64, draws: usize, tol: f64) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut compared = 0;
    for d in 0..draws {
        let n = rng.random_range(64..=512);
        let x = random_signal(&mut rng, n);
        let scale = max_abs(&x);
        let mut check = |name: &str, got: f64, want: f64, s: f64| -> Result<(), String> {
            compared += 1;
            if close(got, want, s, tol) {
                Ok(())
            } else {
                Err(format!("draw {d} (n={n}) {name}: {got:e} vs oracle {want:e}"))
            }
        };
        for (ql, qh) in [(0.4, 0.8), (0.2, 0.8), (0.0, 0.6), (0.0, 1.0)] {
            check(
                &format!("change_quantile({ql},{qh})"),
                change_quantile(&x, ql, qh).unwrap(),
                direct_change_quantile(&x, ql, qh),
                scale,
            )?;
        }
        let q = rng.random_range(0.0..=1.0);
        check(&format!("quantile({q})"), diffprot::features::quantile(&x, q), direct_quantile(&x, q), scale)?;
        let l1: f64 = x.iter().map(|v| v.abs()).sum();
        for k in [0, 1, 2, rng.random_range(0..=n / 2)] {
            let (re, im) = direct_dft(&x, k);
            check(&format!("|X_{k}|"), dft_coefficient(&x, k, DftPart::Abs).unwrap(), re.hypot(im), l1)?;
            check(&format!("Re X_{k}"), dft_coefficient(&x, k, DftPart::Real).unwrap(), re, l1)?;
            check(&format!("Im X_{k}"), dft_coefficient(&x, k, DftPart::Imag).unwrap(), im, l1)?;
        }
        let window = rng.random_range(2..=20);
        for stat in [TrendStat::Slope, TrendStat::Intercept, TrendStat::Stderr] {
            let got = agg_linear_trend(&x, window, stat, Aggregator::Mean).unwrap();
            check(&format!("trend {stat:?} w={window}"), got, direct_trend(&x, window, stat), scale)?;
        }
        for bin in [0, 1, 2, 5, 32] {
            let got = welch_density(&x, bin, 64).unwrap();
            check(&format!("welch bin {bin}"), got, direct_welch(&x, bin, 64), scale * scale)?;
        }
        let order = rng.random_range(1..=6);
        let got = ar_coefficients(&x, order).unwrap();
        for (i, (g, w)) in got.iter().zip(qr_ar(&x, order)).enumerate() {
            check(&format!("AR({order}) phi_{i}"), *g, w, 1.0)?;
        }
    }
    Ok(compared)
}

/// Hand-evaluated filter case plus `signals` random periodic inputs whose
/// filter output must vanish.
pub fn check_cdf(seed: u64, signals: usize) -> Result<(), String> {
    let hand = cdf_series(&[0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0], 2).map_err(|e| e.to_string())?;
    if hand != [0.0, 1.0, 2.0, 1.0, 0.0] {
        return Err(format!("hand case gave {hand:?}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for s in 0..signals {
        let nc = rng.random_range(2..=200);
        let period: Vec<f64> = (0..nc).map(|_| rng.random_range(-10.0..10.0)).collect();
        let reps = rng.random_range(3..=6);
        let x: Vec<f64> = (0..nc * reps).map(|t| period[t % nc]).collect();
        let tol = 1e-12 * period.iter().map(|v| v.abs()).sum::<f64>();
        if let Some(v) = cdf_series(&x, nc).map_err(|e| e.to_string())?.iter().find(|v| v.abs() > tol) {
            return Err(format!("periodic signal {s} (n_c={nc}) gave {v:e}"));
        }
    }
    Ok(())
}

/// Weighted training impurity of the leaves a tree assigns the rows to.
pub fn leaf_impurity(tree: &Tree, rows: &[Vec<f64>], labels: &[usize], k: usize, kind: Impurity) -> f64 {
    let mut by_leaf: std::collections::BTreeMap<usize, Vec<f64>> = Default::default();
    for (r, &y) in rows.iter().zip(labels) {
        by_leaf.entry(tree.leaf_index(r)).or_insert_with(|| vec![0.0; k])[y] += 1.0;
    }
    by_leaf.values().map(|c| weighted(c, kind)).sum()
}

/// `w * I(p)` for class counts `c`.
pub fn weighted(c: &[f64], kind: Impurity) -> f64 {
    let w: f64 = c.iter().sum();
    if w == 0.0 {
        return 0.0;
    }
    match kind {
        Impurity::Gini => w * (1.0 - c.iter().map(|v| (v / w) * (v / w)).sum::<f64>()),
        Impurity::Entropy => c.iter().filter(|&&v| v > 0.0).map(|&v| -v * (v / w).log2()).sum(),
    }
}

/// Minimum leaf impurity over every tree of depth at most `depth` whose
/// splits are axis-aligned at thresholds between observed values.
pub fn exhaustive_min(points: &[(Vec<f64>, usize)], k: usize, depth: usize, kind: Impurity) -> f64 {
    let mut c = vec![0.0; k];
    for (_, y) in points {
        c[*y] += 1.0;
    }
    let mut best = weighted(&c, kind);
    if depth == 0 || points.len() < 2 {
        return best;
    }
    for f in 0..points[0].0.len() {
        let mut vals: Vec<f64> = points.iter().map(|p| p.0[f]).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for t in vals.windows(2).map(|w| 0.5 * (w[0] + w[1])) {
            let (l, r): (Vec<_>, Vec<_>) = points.iter().cloned().partition(|p| p.0[f] <= t);
            best = best.min(exhaustive_min(&l, k, depth - 1, kind) + exhaustive_min(&r, k, depth - 1, kind));
        }
    }
    best
}

/// Runs `cart_fit` at depth 2 on every multiset of at most `max_n` points
/// drawn from the eight (binary feature pair, binary label) cells and
/// compares its training impurity to the exhaustive minimum. Returns the
/// number of datasets checked.
pub fn check_tree_oracle(max_n: usize) -> Result<usize, String> {
    let cells: Vec<(Vec<f64>, usize)> = (0..8).map(|c| (vec![(c & 1) as f64, ((c >> 1) & 1) as f64], c >> 2)).collect();
    let mut checked = 0;
    let mut counts = vec![0usize; 8];
    loop {
        let n: usize = counts.iter().sum();
        if n > 0 {
            let points: Vec<(Vec<f64>, usize)> =
                counts.iter().enumerate().flat_map(|(c, &m)| std::iter::repeat_n(cells[c].clone(), m)).collect();
            let rows: Vec<Vec<f64>> = points.iter().map(|p| p.0.clone()).collect();
            let labels: Vec<usize> = points.iter().map(|p| p.1).collect();
            let data = Dataset::new(rows.clone(), labels.clone(), vec!["0".into(), "1".into()], "h").unwrap();
            for kind in [Impurity::Gini, Impurity::Entropy] {
                let model = cart_fit(&data, &CartConfig { max_depth: 2, impurity: kind, min_samples_split: 2 })
                    .map_err(|e| e.to_string())?;
                let got = leaf_impurity(&model.trees[0], &rows, &labels, 2, kind);
                let want = exhaustive_min(&points, 2, 2, kind);
                if !close(got, want, 1.0, 1e-12) {
                    return Err(format!("{kind:?} on cell counts {counts:?}: cart {got} vs exhaustive {want}"));
                }
            }
            checked += 1;
        }
        // Next multiset of total size <= max_n in odometer order.
        let mut i = 0;
        loop {
            if i == 8 {
                return Ok(checked);
            }
            counts[i] += 1;
            if counts.iter().sum::<usize>() <= max_n {
                break;
            }
            counts[i] = 0;
            i += 1;
        }
    }
}
