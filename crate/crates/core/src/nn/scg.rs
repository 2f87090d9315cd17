//! Møller's scaled conjugate gradient on the mean cross-entropy of a fully
//! connected network. A step is only taken when the actual reduction is
//! non-negative, so the loss never increases.

use serde::{Deserialize, Serialize};

use super::layer::Layer;
use super::network::Network;
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScgConfig {
    pub max_iters: usize,
    pub sigma0: f64,
    pub lambda0: f64,
    pub goal_gradient_norm: f64,
}

impl Default for ScgConfig {
    fn default() -> Self {
        ScgConfig {
            max_iters: 1000,
            sigma0: 5e-5,
            lambda0: 5e-7,
            goal_gradient_norm: 1e-6,
        }
    }
}

impl ScgConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma0 > 0.0 && self.lambda0 > 0.0 && self.goal_gradient_norm > 0.0) {
            return Err(Error::InvalidConfig(
                "scg sigma0, lambda0 and goal_gradient_norm must be > 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScgReport {
    pub iterations: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub gradient_norm: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(w: &[f64], a: f64, p: &[f64]) -> Vec<f64> {
    w.iter().zip(p).map(|(x, y)| x + a * y).collect()
}

struct Objective<'a> {
    net: Network,
    x: &'a Tensor,
    labels: &'a [usize],
}

impl Objective<'_> {
    fn loss(&mut self, w: &[f64]) -> Result<f64> {
        self.net.set_flat_params(w)?;
        self.net.train_loss(self.x, self.labels)
    }

    fn grad(&mut self, w: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.net.set_flat_params(w)?;
        let (l, g, _) = self.net.loss_and_grad(self.x, self.labels)?;
        Ok((l, g.into_iter().flatten().collect()))
    }
}

/// Train `net` in place; it must contain only dense, sigmoid, tanh and
/// softmax layers.
pub fn scg_train(net: &mut Network, x: &Tensor, labels: &[usize], cfg: &ScgConfig) -> Result<ScgReport> {
    cfg.validate()?;
    if let Some(l) = net
        .layers()
        .iter()
        .find(|l| !matches!(l, Layer::Dense(_) | Layer::Tanh | Layer::Sigmoid | Layer::Softmax))
    {
        return Err(Error::InvalidInput(format!(
            "scg trains fully connected networks only, found {:?}",
            l.spec()
        )));
    }
    let mut obj = Objective {
        net: net.clone(),
        x,
        labels,
    };
    let mut w = net.flat_params();
    let n = w.len();
    let (mut e, g) = obj.grad(&w)?;
    let initial_loss = e;
    let mut r: Vec<f64> = g.iter().map(|v| -v).collect();
    let mut p = r.clone();
    let mut lambda = cfg.lambda0;
    let mut lambda_bar = 0.0;
    let mut success = true;
    let mut delta = 0.0;
    let mut iterations = 0;

    while iterations < cfg.max_iters && dot(&r, &r).sqrt() > cfg.goal_gradient_norm {
        iterations += 1;
        let p2 = dot(&p, &p);
        if p2 == 0.0 {
            break;
        }
        if success {
            let sigma = cfg.sigma0 / p2.sqrt();
            let (_, g_sigma) = obj.grad(&axpy(&w, sigma, &p))?;
            // s approximates the Hessian-vector product H p; -r is the gradient.
            delta = g_sigma
                .iter()
                .zip(&r)
                .zip(&p)
                .map(|((gs, ri), pi)| (gs + ri) / sigma * pi)
                .sum();
        }
        delta += (lambda - lambda_bar) * p2;
        if delta <= 0.0 {
            lambda_bar = 2.0 * (lambda - delta / p2);
            delta = -delta + lambda * p2;
            lambda = lambda_bar;
        }
        let mu = dot(&p, &r);
        let alpha = mu / delta;
        let w_new = axpy(&w, alpha, &p);
        let e_new = obj.loss(&w_new)?;
        let comparison = 2.0 * delta * (e - e_new) / (mu * mu);
        if comparison.is_finite() && comparison >= 0.0 {
            w = w_new;
            e = e_new;
            let (_, g_new) = obj.grad(&w)?;
            let r_new: Vec<f64> = g_new.iter().map(|v| -v).collect();
            lambda_bar = 0.0;
            success = true;
            if iterations % n == 0 {
                p = r_new.clone();
            } else {
                let beta = (dot(&r_new, &r_new) - dot(&r_new, &r)) / mu;
                p = axpy(&r_new, beta, &p);
            }
            r = r_new;
            if comparison >= 0.75 {
                lambda *= 0.25;
            }
        } else {
            lambda_bar = lambda;
            success = false;
        }
        if !(comparison >= 0.25) {
            lambda += delta * (1.0 - comparison.max(-1e12)) / p2;
        }
        if !lambda.is_finite() || lambda > 1e100 {
            break;
        }
    }
    net.set_flat_params(&w)?;
    net.finalize();
    Ok(ScgReport {
        iterations,
        initial_loss,
        final_loss: e,
        gradient_norm: dot(&r, &r).sqrt(),
    })
}
