//! Class-imbalance resampling: SMOTE over-sampling and NearMiss-1
//! under-sampling.
//!
//! Neighbour searches use Euclidean distance. [`apply_plan`] z-scores the
//! features on the data it is given before any distance is computed;
//! synthetic rows are interpolated in the original units, which is the same
//! point because interpolation commutes with per-feature affine maps.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ensembles::Dataset;
use crate::rng::{derive_seed, rng_for};

#[derive(Debug, Error, PartialEq)]
pub enum ResampleError {
    #[error("need at least {needed} samples, have {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("reference (minority) set is empty")]
    EmptyMinority,
    #[error("invalid resampling plan: {0}")]
    InvalidPlan(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    None,
    SmoteOnly,
    NearMissOnly,
    Combined,
}

impl std::str::FromStr for Strategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "none" => Ok(Strategy::None),
            "smote" => Ok(Strategy::SmoteOnly),
            "nearmiss" => Ok(Strategy::NearMissOnly),
            "combined" => Ok(Strategy::Combined),
            _ => Err(format!("unknown resampling strategy '{s}' (none|smote|nearmiss|combined)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    /// Largest class count for SMOTE, smallest for NearMiss, rounded mean
    /// for the combined plan.
    Auto,
    Equal(usize),
    PerClass(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResamplePlan {
    pub strategy: Strategy,
    pub k_neighbors: usize,
    pub target: Target,
}

impl Default for ResamplePlan {
    fn default() -> Self {
        Self { strategy: Strategy::None, k_neighbors: 5, target: Target::Auto }
    }
}

impl ResamplePlan {
    pub fn new(strategy: Strategy) -> Self {
        Self { strategy, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), ResampleError> {
        if self.k_neighbors == 0 {
            return Err(ResampleError::InvalidPlan("k_neighbors must be at least 1".into()));
        }
        match &self.target {
            Target::Equal(0) => Err(ResampleError::InvalidPlan("target must be at least 1".into())),
            Target::PerClass(v) if v.contains(&0) => {
                Err(ResampleError::InvalidPlan("targets must be at least 1".into()))
            }
            _ => Ok(()),
        }
    }

    /// Per-class targets for the given class counts.
    pub fn targets(&self, counts: &[usize]) -> Result<Vec<usize>, ResampleError> {
        let present: Vec<usize> = counts.iter().copied().filter(|&c| c > 0).collect();
        let auto = match self.strategy {
            Strategy::None => return Ok(counts.to_vec()),
            Strategy::SmoteOnly => present.iter().copied().max().unwrap_or(0),
            Strategy::NearMissOnly => present.iter().copied().min().unwrap_or(0),
            Strategy::Combined => (present.iter().sum::<usize>() as f64 / present.len().max(1) as f64).round() as usize,
        };
        let t = match &self.target {
            Target::Auto => counts.iter().map(|&c| if c > 0 { auto } else { 0 }).collect(),
            Target::Equal(t) => counts.iter().map(|&c| if c > 0 { *t } else { 0 }).collect(),
            Target::PerClass(v) if v.len() == counts.len() => v.clone(),
            Target::PerClass(v) => {
                return Err(ResampleError::InvalidPlan(format!("{} targets for {} classes", v.len(), counts.len())))
            }
        };
        Ok(t)
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Indices of the `k` nearest rows of `pool` to `x` (excluding `skip`),
/// nearest first, ties to the lower index.
fn nearest(x: &[f64], pool: &[Vec<f64>], k: usize, skip: Option<usize>) -> Vec<usize> {
    let mut d: Vec<(f64, usize)> =
        pool.iter().enumerate().filter(|(j, _)| Some(*j) != skip).map(|(j, r)| (dist2(x, r), j)).collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    d.into_iter().take(k).map(|(_, j)| j).collect()
}

/// SMOTE synthetic rows. Row `j` interpolates base row `j mod m` toward one
/// of its `k` nearest minority neighbours; the neighbour pick and the
/// interpolation fraction come from `rng_for(seed, j)` in that order.
pub fn smote(minority: &[Vec<f64>], k: usize, n_synthetic: usize, seed: u64) -> Result<Vec<Vec<f64>>, ResampleError> {
    smote_in_metric(minority, minority, k, n_synthetic, seed)
}

/// SMOTE with neighbours found in `metric_rows` (row-aligned with `rows`).
fn smote_in_metric(
    rows: &[Vec<f64>],
    metric_rows: &[Vec<f64>],
    k: usize,
    n_synthetic: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>, ResampleError> {
    if n_synthetic == 0 {
        return Ok(Vec::new());
    }
    let m = rows.len();
    if m < 2 || k == 0 || k > m - 1 {
        return Err(ResampleError::TooFewSamples { needed: k.max(1) + 1, got: m });
    }
    let neighbours: Vec<Vec<usize>> = (0..m).map(|i| nearest(&metric_rows[i], metric_rows, k, Some(i))).collect();
    Ok((0..n_synthetic)
        .map(|j| {
            let b = j % m;
            let mut rng = rng_for(seed, j as u64);
            let nn = neighbours[b][rng.random_range(0..k)];
            let u: f64 = rng.random_range(0.0..=1.0);
            rows[b].iter().zip(&rows[nn]).map(|(x, y)| x + u * (y - x)).collect()
        })
        .collect())
}

/// NearMiss-1: the `n_keep` majority rows with the smallest mean distance to
/// their 3 nearest minority rows (ties to the lower index), returned in
/// ascending index order.
pub fn nearmiss(majority: &[Vec<f64>], minority: &[Vec<f64>], n_keep: usize) -> Result<Vec<usize>, ResampleError> {
    if minority.is_empty() {
        return Err(ResampleError::EmptyMinority);
    }
    if n_keep > majority.len() {
        return Err(ResampleError::InvalidPlan(format!("cannot keep {n_keep} of {} rows", majority.len())));
    }
    let kk = 3.min(minority.len());
    let mut score: Vec<(f64, usize)> = majority
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let mean =
                nearest(x, minority, kk, None).iter().map(|&j| dist2(x, &minority[j]).sqrt()).sum::<f64>() / kk as f64;
            (mean, i)
        })
        .collect();
    score.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut keep: Vec<usize> = score.into_iter().take(n_keep).map(|(_, i)| i).collect();
    keep.sort_unstable();
    Ok(keep)
}

/// Per-feature z-score statistics (population standard deviation; constant
/// features get unit scale).
pub fn zscore_stats(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = rows.len() as f64;
    let d = rows.first().map_or(0, Vec::len);
    let mean: Vec<f64> = (0..d).map(|f| rows.iter().map(|r| r[f]).sum::<f64>() / n).collect();
    let sd: Vec<f64> = (0..d)
        .map(|f| {
            let v = rows.iter().map(|r| (r[f] - mean[f]).powi(2)).sum::<f64>() / n;
            if v > 0.0 {
                v.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    (mean, sd)
}

/// Rebalance a training set. Original rows keep their order (minus any
/// removed by NearMiss); synthetic rows follow, grouped by class. The
/// NearMiss reference set is the smallest present class.
pub fn apply_plan(data: &Dataset, plan: &ResamplePlan, seed: u64) -> Result<Dataset, ResampleError> {
    plan.validate()?;
    if plan.strategy == Strategy::None {
        return Ok(data.clone());
    }
    let counts = data.class_counts();
    let targets = plan.targets(&counts)?;
    let (mean, sd) = zscore_stats(&data.rows);
    let z: Vec<Vec<f64>> =
        data.rows.iter().map(|r| r.iter().enumerate().map(|(f, v)| (v - mean[f]) / sd[f]).collect()).collect();
    let by_class: Vec<Vec<usize>> =
        (0..counts.len()).map(|c| (0..data.len()).filter(|&i| data.labels[i] == c).collect()).collect();

    let undersample = matches!(plan.strategy, Strategy::NearMissOnly | Strategy::Combined);
    let oversample = matches!(plan.strategy, Strategy::SmoteOnly | Strategy::Combined);

    let mut keep = vec![true; data.len()];
    if undersample {
        let reference = (0..counts.len()).filter(|&c| counts[c] > 0).min_by_key(|&c| (counts[c], c));
        for c in 0..counts.len() {
            if counts[c] <= targets[c] {
                continue;
            }
            let reference = reference.ok_or(ResampleError::EmptyMinority)?;
            let majority: Vec<Vec<f64>> = by_class[c].iter().map(|&i| z[i].clone()).collect();
            let minority: Vec<Vec<f64>> = by_class[reference].iter().map(|&i| z[i].clone()).collect();
            let kept = nearmiss(&majority, &minority, targets[c])?;
            let mut mask = vec![false; majority.len()];
            kept.into_iter().for_each(|j| mask[j] = true);
            for (j, &i) in by_class[c].iter().enumerate() {
                keep[i] = mask[j];
            }
        }
    }

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels = Vec::new();
    for i in (0..data.len()).filter(|&i| keep[i]) {
        rows.push(data.rows[i].clone());
        labels.push(data.labels[i]);
    }
    if oversample {
        for c in 0..counts.len() {
            if counts[c] == 0 || counts[c] >= targets[c] {
                continue;
            }
            let orig: Vec<Vec<f64>> = by_class[c].iter().map(|&i| data.rows[i].clone()).collect();
            let metric: Vec<Vec<f64>> = by_class[c].iter().map(|&i| z[i].clone()).collect();
            let k = plan.k_neighbors.min(orig.len().saturating_sub(1)).max(1);
            let synth = smote_in_metric(&orig, &metric, k, targets[c] - counts[c], derive_seed(seed, c as u64))?;
            labels.extend(std::iter::repeat_n(c, synth.len()));
            rows.extend(synth);
        }
    }
    Ok(Dataset { rows, labels, classes: data.classes.clone(), schema_hash: data.schema_hash.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert, proptest};

    #[test]
    fn smote_on_a_segment_stays_on_the_diagonal() {
        let pts = smote(&[vec![0.0, 0.0], vec![1.0, 1.0]], 1, 50, 3).unwrap();
        assert_eq!(pts.len(), 50);
        for p in pts {
            assert_eq!(p[0], p[1]);
            assert!((0.0..=1.0).contains(&p[0]));
        }
        assert!(smote(&[vec![0.0, 0.0], vec![1.0, 1.0]], 1, 0, 3).unwrap().is_empty());
        assert!(matches!(smote(&[vec![0.0]], 1, 3, 3), Err(ResampleError::TooFewSamples { .. })));
        assert!(matches!(smote(&[vec![0.0], vec![1.0]], 2, 3, 3), Err(ResampleError::TooFewSamples { .. })));
    }

    #[test]
    fn smote_rows_follow_the_documented_derivation() {
        let pts: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let out = smote(&pts, 2, 20, 11).unwrap();
        for (j, row) in out.iter().enumerate() {
            let b = j % 6;
            let nn = nearest(&pts[b], &pts, 2, Some(b));
            let mut rng = rng_for(11, j as u64);
            let pick = nn[rng.random_range(0..2)];
            let u: f64 = rng.random_range(0.0..=1.0);
            let want: Vec<f64> = pts[b].iter().zip(&pts[pick]).map(|(x, y)| x + u * (y - x)).collect();
            assert_eq!(row, &want);
        }
    }

    #[test]
    fn nearmiss_examples() {
        let maj = vec![vec![3.0], vec![1.0], vec![2.0]];
        assert_eq!(nearmiss(&maj, &[vec![0.0]], 1).unwrap(), vec![1]);
        assert_eq!(nearmiss(&maj, &[vec![0.0]], 3).unwrap(), vec![0, 1, 2]);
        let dup = vec![vec![1.0], vec![1.0], vec![1.0]];
        assert_eq!(nearmiss(&dup, &[vec![0.0]], 2).unwrap(), vec![0, 1]);
        assert_eq!(nearmiss(&maj, &[], 1), Err(ResampleError::EmptyMinority));
    }

    fn imbalanced() -> Dataset {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (c, n) in [(0usize, 40usize), (1, 7), (2, 15)] {
            for i in 0..n {
                rows.push(vec![c as f64 * 3.0 + (i as f64 * 0.7).sin(), (i as f64 * 1.3).cos() * 10.0]);
                labels.push(c);
            }
        }
        Dataset::new(rows, labels, vec!["a".into(), "b".into(), "c".into()], "h").unwrap()
    }

    #[test]
    fn combined_plan_hits_targets_exactly() {
        let d = imbalanced();
        for t in [Target::Auto, Target::Equal(20), Target::Equal(5)] {
            let plan = ResamplePlan { strategy: Strategy::Combined, k_neighbors: 3, target: t.clone() };
            let out = apply_plan(&d, &plan, 5).unwrap();
            let want = plan.targets(&d.class_counts()).unwrap();
            assert_eq!(out.class_counts(), want, "{t:?}");
            assert!(want.iter().all(|&c| c == want[0]));
        }
        let out = apply_plan(&d, &ResamplePlan::new(Strategy::SmoteOnly), 1).unwrap();
        assert_eq!(out.class_counts(), vec![40, 40, 40]);
        let out = apply_plan(&d, &ResamplePlan::new(Strategy::NearMissOnly), 1).unwrap();
        assert_eq!(out.class_counts(), vec![7, 7, 7]);
        assert_eq!(apply_plan(&d, &ResamplePlan::new(Strategy::None), 1).unwrap(), d);
    }

    proptest! {
        #[test]
        fn smote_points_stay_in_the_hull(seed in 0u64..500) {
            // Points on a circle are all hull vertices; sorted by angle they
            // form the convex polygon the synthetic points must stay inside.
            let mut ang: Vec<f64> = (0..10)
                .map(|i| (i as f64 * 2.3 + seed as f64 * 0.01).rem_euclid(std::f64::consts::TAU))
                .collect();
            ang.sort_by(f64::total_cmp);
            let pts: Vec<Vec<f64>> = ang.iter().map(|a| vec![a.cos(), a.sin()]).collect();
            for p in smote(&pts, 3, 40, seed).unwrap() {
                for i in 0..pts.len() {
                    let (a, b) = (&pts[i], &pts[(i + 1) % pts.len()]);
                    let cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
                    prop_assert!(cross >= -1e-12);
                }
            }
        }
    }
}
