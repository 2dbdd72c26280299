//! Node impurity measures on weighted sufficient statistics.
//!
//! Classification statistics are per-class weights; regression statistics are
//! `[weight, sum(w r), sum(w r^2)]`. Every `weighted_*` function returns
//! impurity multiplied by node weight, so split gains are plain differences.

use serde::{Deserialize, Serialize};

use super::EnsembleError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Impurity {
    #[default]
    Gini,
    Entropy,
}

impl std::str::FromStr for Impurity {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "gini" => Ok(Impurity::Gini),
            "entropy" => Ok(Impurity::Entropy),
            _ => Err(format!("unknown impurity '{s}'")),
        }
    }
}

/// Split criterion used by the tree builder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Criterion {
    Class(Impurity),
    /// Sum of squared errors around the node mean.
    Squared,
}

impl Criterion {
    pub fn width(self, n_classes: usize) -> usize {
        match self {
            Criterion::Class(_) => n_classes,
            Criterion::Squared => 3,
        }
    }

    pub fn weighted(self, s: &[f64]) -> f64 {
        match self {
            Criterion::Class(Impurity::Gini) => weighted_gini(s),
            Criterion::Class(Impurity::Entropy) => weighted_entropy(s),
            Criterion::Squared => weighted_sse(s),
        }
    }
}

/// `w * (1 - sum p_k^2)` for class weights `c` with total `w`.
pub fn weighted_gini(c: &[f64]) -> f64 {
    let w: f64 = c.iter().sum();
    if w <= 0.0 {
        return 0.0;
    }
    (w - c.iter().map(|x| x * x).sum::<f64>() / w).max(0.0)
}

/// `w * H(p)` in bits.
pub fn weighted_entropy(c: &[f64]) -> f64 {
    let w: f64 = c.iter().sum();
    if w <= 0.0 {
        return 0.0;
    }
    c.iter().filter(|&&x| x > 0.0).map(|&x| -x * (x / w).log2()).sum::<f64>().max(0.0)
}

pub fn weighted_sse(s: &[f64]) -> f64 {
    if s[0] <= 0.0 {
        return 0.0;
    }
    (s[2] - s[1] * s[1] / s[0]).max(0.0)
}

/// Unweighted impurity of a class-count vector.
pub fn impurity(counts: &[f64], kind: Impurity) -> f64 {
    let w: f64 = counts.iter().sum();
    if w <= 0.0 {
        return 0.0;
    }
    Criterion::Class(kind).weighted(counts) / w
}

fn counts(labels: &[usize], n_classes: usize) -> Vec<f64> {
    let mut c = vec![0.0; n_classes];
    for &y in labels {
        c[y] += 1.0;
    }
    c
}

/// `I(parent) - (n_l/n_p) I(left) - (n_r/n_p) I(right)`.
pub fn information_gain(
    parent: &[usize],
    left: &[usize],
    right: &[usize],
    kind: Impurity,
) -> Result<f64, EnsembleError> {
    if left.is_empty() || right.is_empty() {
        return Err(EnsembleError::EmptyChild);
    }
    let k = parent.iter().chain(left).chain(right).max().map_or(1, |m| m + 1);
    let np = parent.len() as f64;
    let ip = impurity(&counts(parent, k), kind);
    let il = impurity(&counts(left, k), kind);
    let ir = impurity(&counts(right, k), kind);
    Ok(ip - left.len() as f64 / np * il - right.len() as f64 / np * ir)
}
