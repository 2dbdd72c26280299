//! Single classification tree.

use super::impurity::Criterion;
use super::model::{ModelConfig, ModelKind, TrainingMeta, TreeEnsembleModel, MODEL_FORMAT_VERSION};
use super::tree::{grow, GrowParams, Presorted, Targets, Tree};
use super::{CartConfig, Dataset, EnsembleError};

/// Leaf payloads become class probabilities.
pub(crate) fn normalize_leaves(tree: &mut Tree) {
    tree.map_leaves(|_, c| {
        let w: f64 = c.iter().sum();
        c.iter().map(|v| v / w).collect()
    });
}

pub(crate) fn class_tree(
    data: &Presorted,
    labels: &[usize],
    n_classes: usize,
    weights: &[f64],
    params: &GrowParams,
    rng: Option<&mut rand_chacha::ChaCha8Rng>,
) -> Tree {
    let mut g = grow(data, &Targets::Class { labels, n_classes }, weights, params, rng);
    normalize_leaves(&mut g.tree);
    g.tree
}

pub fn cart_fit(data: &Dataset, cfg: &CartConfig) -> Result<TreeEnsembleModel, EnsembleError> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(EnsembleError::EmptyDataset);
    }
    let pre = Presorted::new(&data.rows);
    let params = GrowParams {
        criterion: Criterion::Class(cfg.impurity),
        max_depth: cfg.max_depth,
        min_samples_split: cfg.min_samples_split,
        max_features: None,
    };
    let tree = class_tree(&pre, &data.labels, data.n_classes(), &vec![1.0; data.len()], &params, None);
    Ok(TreeEnsembleModel {
        format_version: MODEL_FORMAT_VERSION,
        kind: ModelKind::Cart,
        config: ModelConfig::Cart(*cfg),
        classes: data.classes.clone(),
        schema_hash: data.schema_hash.clone(),
        n_features: data.n_features(),
        init_scores: Vec::new(),
        trees: vec![tree],
        training: TrainingMeta {
            seed: 0,
            n_samples: data.len(),
            class_counts: data.class_counts(),
            ..Default::default()
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::Impurity;

    fn ds(rows: Vec<Vec<f64>>, y: Vec<usize>, k: usize) -> Dataset {
        Dataset::new(rows, y, (0..k).map(|c| format!("c{c}")).collect(), "h").unwrap()
    }

    #[test]
    fn separable_one_dimensional_data_needs_one_split() {
        let d = ds((0..10).map(|i| vec![i as f64]).collect(), (0..10).map(|i| usize::from(i >= 6)).collect(), 2);
        let m = cart_fit(&d, &CartConfig::default()).unwrap();
        assert_eq!(m.trees[0].depth(), 1);
        for (r, &y) in d.rows.iter().zip(&d.labels) {
            assert_eq!(m.predict_row(r).class, y);
        }
    }

    #[test]
    fn xor_is_learned_at_depth_two() {
        for imp in [Impurity::Gini, Impurity::Entropy] {
            let d = ds(vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]], vec![0, 1, 1, 0], 2);
            let m = cart_fit(&d, &CartConfig { max_depth: 2, impurity: imp, min_samples_split: 2 }).unwrap();
            for (r, &y) in d.rows.iter().zip(&d.labels) {
                assert_eq!(m.predict_row(r).class, y);
            }
        }
    }

    #[test]
    fn depth_zero_predicts_majority() {
        let d = ds((0..7).map(|i| vec![i as f64]).collect(), vec![1, 0, 1, 1, 0, 2, 1], 3);
        let m = cart_fit(&d, &CartConfig { max_depth: 0, ..Default::default() }).unwrap();
        for r in &d.rows {
            assert_eq!(m.predict_row(r).class, 1);
        }
        assert!((m.predict_row(&[0.0]).probabilities[1] - 4.0 / 7.0).abs() < 1e-15);
    }
}
