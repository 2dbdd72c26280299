//! Confusion counts, accuracy and balanced accuracy (macro-averaged recall).

use serde::{Deserialize, Serialize};

use super::EvalError;

/// Binary view of one class: positives are that class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct BinaryCounts {
    pub tp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub fp: usize,
    pub tn: usize,
}

impl BinaryCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fn_ + self.fp + self.tn
    }

    pub fn accuracy(&self) -> Result<f64, EvalError> {
        if self.total() == 0 {
            return Err(EvalError::EmptyCounts);
        }
        Ok((self.tp + self.tn) as f64 / self.total() as f64)
    }

    /// `(TP/(TP+FN) + TN/(TN+FP)) / 2`.
    pub fn balanced_accuracy(&self) -> Result<f64, EvalError> {
        if self.tp + self.fn_ == 0 {
            return Err(EvalError::ZeroSupportClass("positive".into()));
        }
        if self.tn + self.fp == 0 {
            return Err(EvalError::ZeroSupportClass("negative".into()));
        }
        Ok(0.5 * (self.tp as f64 / (self.tp + self.fn_) as f64 + self.tn as f64 / (self.tn + self.fp) as f64))
    }

    pub fn recall(&self) -> Option<f64> {
        (self.tp + self.fn_ > 0).then(|| self.tp as f64 / (self.tp + self.fn_) as f64)
    }

    pub fn precision(&self) -> Option<f64> {
        (self.tp + self.fp > 0).then(|| self.tp as f64 / (self.tp + self.fp) as f64)
    }
}

/// Multiclass confusion matrix, rows = true class, columns = predicted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn new(classes: Vec<String>) -> Self {
        let k = classes.len();
        Self { classes, counts: vec![vec![0; k]; k] }
    }

    pub fn from_predictions(classes: Vec<String>, truth: &[usize], predicted: &[usize]) -> Self {
        let mut m = Self::new(classes);
        for (&t, &p) in truth.iter().zip(predicted) {
            m.add(t, p);
        }
        m
    }

    pub fn add(&mut self, truth: usize, predicted: usize) {
        self.counts[truth][predicted] += 1;
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn support(&self, c: usize) -> usize {
        self.counts[c].iter().sum()
    }

    pub fn binary(&self, c: usize) -> BinaryCounts {
        let tp = self.counts[c][c];
        let fn_ = self.support(c) - tp;
        let fp = (0..self.classes.len()).map(|t| self.counts[t][c]).sum::<usize>() - tp;
        BinaryCounts { tp, fn_, fp, tn: self.total() - tp - fn_ - fp }
    }

    pub fn accuracy(&self) -> Result<f64, EvalError> {
        let n = self.total();
        if n == 0 {
            return Err(EvalError::EmptyCounts);
        }
        Ok((0..self.classes.len()).map(|c| self.counts[c][c]).sum::<usize>() as f64 / n as f64)
    }

    /// Mean per-class recall; every class must have support.
    pub fn balanced_accuracy(&self) -> Result<f64, EvalError> {
        if let Some(c) = (0..self.classes.len()).find(|&c| self.support(c) == 0) {
            return Err(EvalError::ZeroSupportClass(self.classes[c].clone()));
        }
        self.balanced_accuracy_supported()
    }

    /// Mean recall over the classes that have support.
    pub fn balanced_accuracy_supported(&self) -> Result<f64, EvalError> {
        let recalls: Vec<f64> = (0..self.classes.len()).filter_map(|c| self.binary(c).recall()).collect();
        if recalls.is_empty() {
            return Err(EvalError::EmptyCounts);
        }
        Ok(recalls.iter().sum::<f64>() / recalls.len() as f64)
    }

    pub fn per_class(&self) -> Vec<ClassRow> {
        (0..self.classes.len())
            .map(|c| {
                let b = self.binary(c);
                ClassRow {
                    class: self.classes[c].clone(),
                    support: self.support(c),
                    counts: b,
                    recall: b.recall(),
                    precision: b.precision(),
                }
            })
            .collect()
    }

    pub fn summary(&self) -> Result<Metrics, EvalError> {
        Ok(Metrics {
            accuracy: self.accuracy()?,
            balanced_accuracy: self.balanced_accuracy_supported()?,
            balanced_accuracy_definition: BALANCED_ACCURACY_DEFINITION.to_string(),
            n: self.total(),
            per_class: self.per_class(),
            confusion: self.clone(),
        })
    }
}

pub const BALANCED_ACCURACY_DEFINITION: &str = "macro-averaged recall over classes with support";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRow {
    pub class: String,
    pub support: usize,
    pub counts: BinaryCounts,
    pub recall: Option<f64>,
    pub precision: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub balanced_accuracy: f64,
    pub balanced_accuracy_definition: String,
    pub n: usize,
    pub per_class: Vec<ClassRow>,
    pub confusion: ConfusionMatrix,
}
