//! Linear SVM trained by Pegasos stochastic subgradient descent.
//!
//! The bias is learned as the weight of a constant 1 feature, so it is
//! regularized together with `w`. The objective is
//! `lambda/2 * (|w|^2 + b^2) + mean(max(0, 1 - y (w.x + b)))`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::FeatureMatrix;
use crate::dataset::Label;
use crate::error::{Error, Result};

pub const DEFAULT_LAMBDA: f64 = 1e-4;
pub const DEFAULT_EPOCHS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub lambda: f64,
}

fn sign(l: Label) -> f64 {
    if l.is_upcall() {
        1.0
    } else {
        -1.0
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl SvmModel {
    pub fn zeros(dim: usize, lambda: f64) -> Self {
        SvmModel {
            weights: vec![0.0; dim],
            bias: 0.0,
            lambda,
        }
    }

    pub fn margin(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) + self.bias
    }

    pub fn objective(&self, data: &FeatureMatrix) -> f64 {
        let reg = 0.5 * self.lambda * (dot(&self.weights, &self.weights) + self.bias * self.bias);
        let hinge = data
            .rows
            .iter()
            .zip(&data.labels)
            .map(|(x, &l)| (1.0 - sign(l) * self.margin(x)).max(0.0))
            .sum::<f64>()
            / data.len() as f64;
        reg + hinge
    }
}

/// Pegasos with step `1/(lambda t)` and projection onto the ball of radius
/// `1/sqrt(lambda)`, `epochs` shuffled passes. At the end of every epoch both
/// the current iterate and the running average of all iterates are scored;
/// the lowest-objective candidate seen (the zero model included) is
/// returned, so the objective never ends above its starting value.
pub fn train_linear_svm(data: &FeatureMatrix, lambda: f64, epochs: usize, seed: u64) -> Result<SvmModel> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidConfig(format!("svm lambda must be > 0, got {lambda}")));
    }
    data.check_both_classes()?;
    let dim = data.dim();
    let mut model = SvmModel::zeros(dim, lambda);
    let mut best = model.clone();
    let mut best_obj = model.objective(data);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let radius = 1.0 / lambda.sqrt();
    let mut avg = model.clone();
    let mut t = 0u64;
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let x = &data.rows[i];
            let y = sign(data.labels[i]);
            let violated = y * model.margin(x) < 1.0;
            let shrink = 1.0 - eta * lambda;
            model.weights.iter_mut().for_each(|w| *w *= shrink);
            model.bias *= shrink;
            if violated {
                for (w, xi) in model.weights.iter_mut().zip(x) {
                    *w += eta * y * xi;
                }
                model.bias += eta * y;
            }
            let norm = (dot(&model.weights, &model.weights) + model.bias * model.bias).sqrt();
            if norm > radius {
                let s = radius / norm;
                model.weights.iter_mut().for_each(|w| *w *= s);
                model.bias *= s;
            }
            let a = 1.0 / t as f64;
            for (m, w) in avg.weights.iter_mut().zip(&model.weights) {
                *m += a * (w - *m);
            }
            avg.bias += a * (model.bias - avg.bias);
        }
        for cand in [&model, &avg] {
            let obj = cand.objective(data);
            if obj < best_obj {
                best_obj = obj;
                best = cand.clone();
            }
        }
    }
    if best.weights.iter().any(|w| !w.is_finite()) || !best.bias.is_finite() {
        return Err(Error::NonFinite("svm weights".into()));
    }
    Ok(best)
}

/// Label and margin; a margin of exactly 0 is noise.
pub fn svm_predict(model: &SvmModel, x: &[f64]) -> Result<(Label, f64)> {
    if x.len() != model.weights.len() {
        return Err(Error::ShapeMismatch(format!(
            "svm expects {} features, got {}",
            model.weights.len(),
            x.len()
        )));
    }
    let m = model.margin(x);
    Ok((if m > 0.0 { Label::Upcall } else { Label::Noise }, m))
}
