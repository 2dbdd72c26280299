//! Stratified fold assignment and holdout splits.

use rand::seq::SliceRandom;

use super::EvalError;
use crate::rng::rng_for;

/// Shuffled row indices of each class, in class order.
fn class_members(labels: &[usize], seed: u64) -> Vec<Vec<usize>> {
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut members = vec![Vec::new(); k];
    for (i, &y) in labels.iter().enumerate() {
        members[y].push(i);
    }
    for (c, m) in members.iter_mut().enumerate() {
        m.shuffle(&mut rng_for(seed, c as u64));
    }
    members
}

/// `(train, test)` index pairs, both ascending. Class `c` is dealt round-robin
/// starting where the previous class stopped, so every fold holds
/// `floor` or `ceil` of `n_c / k` members of each class and fold sizes differ
/// by at most one.
pub fn stratified_kfold(labels: &[usize], k: usize, seed: u64) -> Result<Vec<(Vec<usize>, Vec<usize>)>, EvalError> {
    if k < 2 {
        return Err(EvalError::InvalidK(k));
    }
    let members = class_members(labels, seed);
    if let Some((c, m)) = members.iter().enumerate().find(|(_, m)| !m.is_empty() && m.len() < k) {
        return Err(EvalError::ClassTooSmall { class: c, count: m.len(), needed: k });
    }
    let mut fold_of = vec![0usize; labels.len()];
    let mut offset = 0;
    for m in &members {
        for (j, &i) in m.iter().enumerate() {
            fold_of[i] = (offset + j) % k;
        }
        offset = (offset + m.len()) % k;
    }
    Ok((0..k)
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..labels.len()).partition(|&i| fold_of[i] == f);
            (train, test)
        })
        .collect())
}

/// Holdout of `round(n_c * test_fraction)` members per class.
pub fn stratified_holdout(
    labels: &[usize],
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>), EvalError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(EvalError::InvalidFraction(test_fraction));
    }
    let mut is_test = vec![false; labels.len()];
    for m in class_members(labels, seed) {
        let n_test = (m.len() as f64 * test_fraction).round() as usize;
        for &i in &m[..n_test] {
            is_test[i] = true;
        }
    }
    let (test, train): (Vec<usize>, Vec<usize>) = (0..labels.len()).partition(|&i| is_test[i]);
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn count(idx: &[usize], labels: &[usize], c: usize) -> usize {
        idx.iter().filter(|&&i| labels[i] == c).count()
    }

    #[test]
    fn balanced_classes_give_one_of_each_per_fold() {
        let labels: Vec<usize> = (0..20).map(|i| i % 2).collect();
        let folds = stratified_kfold(&labels, 10, 3).unwrap();
        for (_, test) in &folds {
            assert_eq!(count(test, &labels, 0), 1);
            assert_eq!(count(test, &labels, 1), 1);
        }
        assert_eq!(stratified_kfold(&labels, 1, 3), Err(EvalError::InvalidK(1)));
    }

    #[test]
    fn rare_class_is_spread_over_folds() {
        let labels: Vec<usize> = (0..100).map(|i| usize::from(i >= 97)).collect();
        for (_, test) in stratified_kfold(&labels, 3, 8).unwrap() {
            assert_eq!(count(&test, &labels, 1), 1);
        }
        assert_eq!(stratified_kfold(&labels, 4, 8), Err(EvalError::ClassTooSmall { class: 1, count: 3, needed: 4 }));
    }

    #[test]
    fn holdout_takes_a_fifth_of_each_class() {
        let labels: Vec<usize> = (0..75).map(|i| i % 3).collect();
        let (train, test) = stratified_holdout(&labels, 0.2, 1).unwrap();
        assert_eq!(train.len() + test.len(), 75);
        for c in 0..3 {
            assert_eq!(count(&test, &labels, c), 5);
        }
    }

    proptest! {
        #[test]
        fn folds_partition_and_preserve_proportions(
            sizes in prop::collection::vec(5usize..40, 2..5), k in 2usize..6, seed in 0u64..1000
        ) {
            let labels: Vec<usize> = sizes.iter().enumerate().flat_map(|(c, &n)| std::iter::repeat_n(c, n)).collect();
            let folds = stratified_kfold(&labels, k, seed).unwrap();
            let mut seen = vec![0; labels.len()];
            for (train, test) in &folds {
                prop_assert_eq!(train.len() + test.len(), labels.len());
                for &i in test { seen[i] += 1; }
                for (c, &n) in sizes.iter().enumerate() {
                    let got = count(test, &labels, c) as f64;
                    prop_assert!((got - n as f64 / k as f64).abs() < 1.0);
                }
            }
            prop_assert!(seen.iter().all(|&s| s == 1));
            let lens: Vec<usize> = folds.iter().map(|f| f.1.len()).collect();
            prop_assert!(lens.iter().max().unwrap() - lens.iter().min().unwrap() <= 1);
        }
    }
}
