//! Feature operators, the change detection filter and the tree builder
//! against independent brute-force references.

#[path = "support/oracles.rs"]
mod oracles;

use diffprot::ensembles::{gbc_fit, Dataset, GbcConfig, TreeEnsembleModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn feature_operators_match_direct_evaluation() {
    let n = oracles::check_feature_oracles(20, 120, 1e-9).unwrap();
    assert!(n >= 120 * 20);
}

#[test]
fn quantile_oracle_handles_ties_and_short_inputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let n = rng.random_range(2..40);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(0..5) as f64).collect();
        for (ql, qh) in [(0.4, 0.8), (0.2, 0.8), (0.0, 0.6)] {
            let got = diffprot::features::change_quantile(&x, ql, qh).unwrap();
            assert!(oracles::close(got, oracles::direct_change_quantile(&x, ql, qh), 1.0, 1e-12), "{x:?}");
        }
    }
}

#[test]
fn change_detection_filter_hand_case_and_periodic_inputs() {
    oracles::check_cdf(5, 100).unwrap();
}

#[test]
fn cart_reaches_the_exhaustive_depth_two_optimum() {
    let checked = oracles::check_tree_oracle(12).unwrap();
    // Multisets of size 1..=12 over eight cells: C(20, 8) - 1.
    assert_eq!(checked, 125_969);
}

#[test]
fn exhaustive_search_beats_a_greedy_stump_on_xor() {
    let pts: Vec<(Vec<f64>, usize)> =
        vec![(vec![0.0, 0.0], 0), (vec![0.0, 1.0], 1), (vec![1.0, 0.0], 1), (vec![1.0, 1.0], 0)];
    let kind = diffprot::ensembles::Impurity::Gini;
    assert_eq!(oracles::exhaustive_min(&pts, 2, 1, kind), 2.0);
    assert_eq!(oracles::exhaustive_min(&pts, 2, 2, kind), 0.0);
}

#[test]
fn model_json_round_trip_preserves_predictions() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let rows: Vec<Vec<f64>> = (0..240).map(|_| (0..4).map(|_| rng.random_range(-3.0..3.0)).collect()).collect();
    let labels: Vec<usize> =
        rows.iter().map(|r| usize::from(r[0] + 0.5 * r[1] > 0.0) + usize::from(r[2] > 1.0)).collect();
    let data = Dataset::new(rows, labels, vec!["a".into(), "b".into(), "c".into()], "schema").unwrap();
    let model = gbc_fit(&data, &GbcConfig { n_estimators: 40, max_depth: 3, learning_rate: 0.2, ..Default::default() })
        .unwrap();
    let back = TreeEnsembleModel::from_json(&model.to_json(), Some("schema")).unwrap();
    assert_eq!(back, model);
    assert_eq!(back.to_json(), model.to_json());
    for _ in 0..1000 {
        let x: Vec<f64> = (0..4).map(|_| rng.random_range(-4.0..4.0)).collect();
        let (a, b) = (model.predict_row(&x), back.predict_row(&x));
        assert_eq!(a.class, b.class);
        assert_eq!(a.probabilities, b.probabilities);
    }
}
