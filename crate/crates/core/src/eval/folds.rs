use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Label;
use crate::error::{Error, Result};

/// Stratified assignment of samples to `k` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSpec {
    pub k: usize,
    pub assignments: Vec<usize>,
    pub seed: u64,
}

impl FoldSpec {
    /// `(train, test)` indices for fold `f`, each ascending.
    pub fn split(&self, f: usize) -> (Vec<usize>, Vec<usize>) {
        let (test, train): (Vec<usize>, Vec<usize>) =
            (0..self.assignments.len()).partition(|&i| self.assignments[i] == f);
        (train, test)
    }
}

fn class_members(labels: &[Label], seed: u64) -> [Vec<usize>; 2] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Label::ALL.map(|c| {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        idx.shuffle(&mut rng);
        idx
    })
}

/// Each class is shuffled and dealt round-robin over the folds; the second
/// class continues where the first stopped so fold sizes also balance.
pub fn kfold_indices(labels: &[Label], k: usize, seed: u64) -> Result<FoldSpec> {
    if k < 2 {
        return Err(Error::InvalidConfig(format!("k-fold needs k >= 2, got {k}")));
    }
    let members = class_members(labels, seed);
    for (c, m) in Label::ALL.iter().zip(&members) {
        if m.len() < k {
            return Err(Error::Data(format!(
                "class {c} has {} samples, fewer than k = {k}",
                m.len()
            )));
        }
    }
    let mut assignments = vec![0; labels.len()];
    let mut next = 0;
    for m in &members {
        for &i in m {
            assignments[i] = next % k;
            next += 1;
        }
    }
    Ok(FoldSpec { k, assignments, seed })
}

/// Stratified shuffled hold-out split; `round(n_c * test_fraction)` of
/// each class goes to the test side. Returns ascending `(train, test)`.
pub fn stratified_split(labels: &[Label], test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (c, m) in Label::ALL.iter().zip(class_members(labels, seed)) {
        let n_test = (m.len() as f64 * test_fraction).round() as usize;
        if m.len() < 2 || n_test == 0 || n_test == m.len() {
            return Err(Error::Data(format!(
                "class {c} has {} samples, too few to split at {test_fraction}",
                m.len()
            )));
        }
        test.extend_from_slice(&m[..n_test]);
        train.extend_from_slice(&m[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labels(up: usize, noise: usize) -> Vec<Label> {
        let mut v = vec![Label::Upcall; up];
        v.extend(vec![Label::Noise; noise]);
        v
    }

    #[test]
    fn perfect_stratification() {
        let l = labels(5, 5);
        let f = kfold_indices(&l, 5, 1).unwrap();
        for fold in 0..5 {
            let (_, test) = f.split(fold);
            let ups = test.iter().filter(|&&i| l[i].is_upcall()).count();
            assert_eq!((test.len(), ups), (2, 1));
        }
        assert_eq!(f, kfold_indices(&l, 5, 1).unwrap());
    }

    #[test]
    fn too_small_class() {
        assert!(kfold_indices(&labels(3, 10), 5, 0).is_err());
        assert!(kfold_indices(&labels(10, 10), 1, 0).is_err());
    }

    #[test]
    fn split_sizes() {
        let l = labels(500, 2000);
        let (train, test) = stratified_split(&l, 0.2, 3).unwrap();
        assert_eq!((train.len(), test.len()), (2000, 500));
        assert_eq!(test.iter().filter(|&&i| l[i].is_upcall()).count(), 100);
        assert!(stratified_split(&labels(1, 10), 0.2, 0).is_err());
    }

    proptest! {
        #[test]
        fn folds_partition_and_stratify(up in 5usize..40, noise in 5usize..80, k in 2usize..6, seed in any::<u64>()) {
            let l = labels(up, noise);
            let f = kfold_indices(&l, k, seed).unwrap();
            let mut seen = vec![0; l.len()];
            for fold in 0..k {
                let (train, test) = f.split(fold);
                prop_assert_eq!(train.len() + test.len(), l.len());
                for &i in &test {
                    seen[i] += 1;
                }
                for (c, n) in [(Label::Upcall, up), (Label::Noise, noise)] {
                    let in_fold = test.iter().filter(|&&i| l[i] == c).count() as f64;
                    prop_assert!((in_fold - n as f64 / k as f64).abs() < 1.0);
                }
            }
            prop_assert!(seen.iter().all(|&s| s == 1));
        }
    }
}
