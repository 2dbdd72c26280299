//! Random forest: bootstrap-resampled trees with per-node feature sampling.

use rand::Rng;

use super::cart::class_tree;
use super::impurity::Criterion;
use super::model::{ModelConfig, ModelKind, TrainingMeta, TreeEnsembleModel, MODEL_FORMAT_VERSION};
use super::tree::{GrowParams, Presorted};
use super::{Dataset, EnsembleError, ForestConfig};
use crate::par::map_indexed;
use crate::rng::rng_for;

/// Tree `t` draws its bootstrap and feature subsets from `rng_for(seed, t)`,
/// so the forest is identical whether trees are built serially or not.
pub fn forest_fit(data: &Dataset, cfg: &ForestConfig) -> Result<TreeEnsembleModel, EnsembleError> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(EnsembleError::EmptyDataset);
    }
    let n = data.len();
    let d = data.n_features();
    let pre = Presorted::new(&data.rows);
    let mf = cfg.max_features.resolve(d);
    let params = GrowParams {
        criterion: Criterion::Class(cfg.impurity),
        max_depth: cfg.max_depth,
        min_samples_split: cfg.min_samples_split,
        max_features: (mf < d).then_some(mf),
    };
    let trees = map_indexed(cfg.n_estimators, cfg.parallel, |t| {
        let mut rng = rng_for(cfg.seed, t as u64);
        let mut w = vec![0.0; n];
        if cfg.bootstrap {
            for _ in 0..n {
                w[rng.random_range(0..n)] += 1.0;
            }
        } else {
            w.iter_mut().for_each(|v| *v = 1.0);
        }
        class_tree(&pre, &data.labels, data.n_classes(), &w, &params, Some(&mut rng))
    });
    Ok(TreeEnsembleModel {
        format_version: MODEL_FORMAT_VERSION,
        kind: ModelKind::RandomForest,
        config: ModelConfig::Forest(*cfg),
        classes: data.classes.clone(),
        schema_hash: data.schema_hash.clone(),
        n_features: d,
        init_scores: Vec::new(),
        trees,
        training: TrainingMeta {
            seed: cfg.seed,
            n_samples: n,
            class_counts: data.class_counts(),
            ..Default::default()
        },
    })
}

/// Features by descending mean decrease in impurity of a fitted forest;
/// ties go to the lower index.
pub fn rank_features(data: &Dataset, cfg: &ForestConfig) -> Result<Vec<(usize, f64)>, EnsembleError> {
    let imp = forest_fit(data, cfg)?.feature_importances();
    let mut ranked: Vec<(usize, f64)> = imp.into_iter().enumerate().collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(ranked)
}
