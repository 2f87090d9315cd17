use serde::{Deserialize, Serialize};

use super::FeatureMatrix;
use crate::dataset::Label;
use crate::error::{Error, Result};

pub const DEFAULT_K: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub data: FeatureMatrix,
    pub k: usize,
}

impl KnnModel {
    pub fn new(data: FeatureMatrix, k: usize) -> Result<Self> {
        if k == 0 || k.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!("knn k must be odd and positive, got {k}")));
        }
        if k > data.len() {
            return Err(Error::InvalidConfig(format!(
                "knn k = {k} exceeds the {} training samples",
                data.len()
            )));
        }
        Ok(KnnModel { data, k })
    }
}

/// Majority label among the k nearest training rows (Euclidean), with
/// distance ties going to the lower training index. Also returns the
/// up-call fraction among those neighbors.
pub fn knn_predict(model: &KnnModel, x: &[f64]) -> Result<(Label, f64)> {
    if x.len() != model.data.dim() {
        return Err(Error::ShapeMismatch(format!(
            "knn expects {} features, got {}",
            model.data.dim(),
            x.len()
        )));
    }
    let mut d: Vec<(f64, usize)> = model
        .data
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| (r.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum(), i))
        .collect();
    let k = model.k;
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < d.len() {
        d.select_nth_unstable_by(k - 1, cmp);
    }
    let ups = d[..k]
        .iter()
        .filter(|(_, i)| model.data.labels[*i].is_upcall())
        .count();
    let label = if 2 * ups > k { Label::Upcall } else { Label::Noise };
    Ok((label, ups as f64 / k as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_set(n: usize, seed: u64) -> FeatureMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = (0..n).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let labels = (0..n).map(|_| if rng.random::<bool>() { Label::Upcall } else { Label::Noise }).collect();
        FeatureMatrix::new(rows, labels).unwrap()
    }

    #[test]
    fn k1_on_training_point() {
        let data = random_set(20, 1);
        let m = KnnModel::new(data.clone(), 1).unwrap();
        for (x, &l) in data.rows.iter().zip(&data.labels) {
            assert_eq!(knn_predict(&m, x).unwrap().0, l);
        }
    }

    #[test]
    fn k3_vote() {
        let data = FeatureMatrix::new(
            vec![vec![0.0], vec![0.1], vec![0.2], vec![5.0]],
            vec![Label::Upcall, Label::Upcall, Label::Noise, Label::Noise],
        )
        .unwrap();
        let m = KnnModel::new(data, 3).unwrap();
        assert_eq!(knn_predict(&m, &[0.05]).unwrap().0, Label::Upcall);
    }

    #[test]
    fn agrees_with_exhaustive_sort() {
        let data = random_set(50, 2);
        let m = KnnModel::new(data.clone(), 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let q: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut all: Vec<(f64, usize)> = data
                .rows
                .iter()
                .enumerate()
                .map(|(i, r)| (r.iter().zip(&q).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt(), i))
                .collect();
            all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            let ups = all[..5].iter().filter(|(_, i)| data.labels[*i].is_upcall()).count();
            let want = if ups >= 3 { Label::Upcall } else { Label::Noise };
            assert_eq!(knn_predict(&m, &q).unwrap().0, want);
        }
    }

    #[test]
    fn k_equal_n_predicts_majority() {
        let data = random_set(21, 4);
        let ups = data.labels.iter().filter(|l| l.is_upcall()).count();
        let majority = if 2 * ups > 21 { Label::Upcall } else { Label::Noise };
        let m = KnnModel::new(data, 21).unwrap();
        for q in [[0.0, 0.0, 0.0], [9.0, -9.0, 1.0]] {
            assert_eq!(knn_predict(&m, &q).unwrap().0, majority);
        }
    }

    #[test]
    fn invalid_k() {
        let data = random_set(4, 5);
        assert!(KnnModel::new(data.clone(), 2).is_err());
        assert!(KnnModel::new(data, 5).is_err());
    }
}
