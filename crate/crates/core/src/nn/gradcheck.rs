//! Central-difference verification of analytic gradients.
//!
//! ReLU and max pooling are non-differentiable on a measure-zero set. When a
//! pre-activation lies within `KINK_FACTOR * epsilon` of zero, or a pooling
//! window's two largest inputs are that close, a finite difference can
//! straddle the kink and disagree with the one-sided analytic gradient. The
//! check therefore perturbs the sample with small Gaussian noise (fixed
//! internal seed) until every kink is comfortably far away, and gives up
//! with an error after `MAX_RETRIES` attempts.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::layer::Layer;
use super::network::Network;
use super::tensor::Tensor;
use crate::error::{Error, Result};

const KINK_FACTOR: f64 = 20.0;
const MAX_RETRIES: usize = 200;
const NUDGE_SIGMA: f64 = 1e-2;

/// Smallest distance to a non-differentiable point over all relu inputs
/// and pooling windows, in training mode.
pub fn kink_margin(net: &Network, x: &Tensor) -> f64 {
    let body = &net.layers()[..net.layers().len() - 1];
    let mut margin = f64::INFINITY;
    let mut cur = x.clone();
    for l in body {
        match l {
            Layer::Relu => {
                for v in cur.data() {
                    margin = margin.min(v.abs());
                }
            }
            Layer::MaxPool => {
                let s = cur.shape();
                let (h, w) = (s[2], s[3]);
                let d = cur.data();
                for plane in 0..s[0] * s[1] {
                    let base = plane * h * w;
                    for y in 0..h / 2 {
                        for xx in 0..w / 2 {
                            let mut v = [0.0; 4];
                            for (k, (dy, dx)) in [(0, 0), (0, 1), (1, 0), (1, 1)].iter().enumerate() {
                                v[k] = d[base + (2 * y + dy) * w + 2 * xx + dx];
                            }
                            v.sort_by(|a, b| b.total_cmp(a));
                            // Exact ties at a dead relu output carry no gradient
                            // and stay tied under small perturbations.
                            if !(v[0] == 0.0 && v[1] == 0.0) {
                                margin = margin.min(v[0] - v[1]);
                            }
                        }
                    }
                }
            }
            _ => {}
        }
        cur = l.forward(cur, true).0;
    }
    margin
}

/// Relative error `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Maximum relative error between backprop gradients and central
/// differences of the training-mode mean cross-entropy over every parameter.
pub fn finite_difference_check(net: &Network, x: &Tensor, labels: &[usize], epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidInput("epsilon must be > 0".into()));
    }
    let mut sample = x.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let noise = Normal::new(0.0, NUDGE_SIGMA).expect("valid sigma");
    let mut tries = 0;
    while kink_margin(net, &sample) < KINK_FACTOR * epsilon {
        tries += 1;
        if tries > MAX_RETRIES {
            return Err(Error::InvalidInput(
                "could not move the sample away from relu/maxpool kinks".into(),
            ));
        }
        sample = x.clone();
        sample.data_mut().iter_mut().for_each(|v| *v += noise.sample(&mut rng));
    }

    let (_, grads, _) = net.loss_and_grad(&sample, labels)?;
    let analytic: Vec<f64> = grads.into_iter().flatten().collect();
    let base = net.flat_params();
    let mut probe = net.clone();
    let mut params = base.clone();
    let mut worst: f64 = 0.0;
    for (i, a) in analytic.iter().enumerate() {
        params[i] = base[i] + epsilon;
        probe.set_flat_params(&params)?;
        let up = probe.train_loss(&sample, labels)?;
        params[i] = base[i] - epsilon;
        probe.set_flat_params(&params)?;
        let down = probe.train_loss(&sample, labels)?;
        params[i] = base[i];
        let numeric = (up - down) / (2.0 * epsilon);
        worst = worst.max(relative_error(*a, numeric));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::LayerSpec::*;
    use crate::nn::{LayerSpec, Network};
    use rand::Rng;

    fn check(input: &[usize], specs: &[LayerSpec], batch: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = Network::build(input, specs, &mut rng).unwrap();
        let per: usize = input.iter().product();
        let mut shape = vec![batch];
        shape.extend_from_slice(input);
        let x = Tensor::new(shape, (0..batch * per).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let labels: Vec<usize> = (0..batch).map(|i| i % 2).collect();
        finite_difference_check(&net, &x, &labels, 1e-5).unwrap()
    }

    #[test]
    fn linear_net_is_near_exact() {
        let err = check(&[3], &[Dense { out_units: 2 }, Softmax], 4, 1);
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn two_conv_blocks_on_8x8() {
        let specs = [
            Conv2d { out_channels: 3 },
            BatchNorm,
            Relu,
            MaxPool,
            Conv2d { out_channels: 2 },
            BatchNorm,
            Relu,
            MaxPool,
            Flatten,
            Dense { out_units: 2 },
            Softmax,
        ];
        let err = check(&[1, 8, 8], &specs, 3, 2);
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn mixed_activations() {
        let specs = [
            Dense { out_units: 5 },
            Sigmoid,
            Dense { out_units: 4 },
            BatchNorm,
            Tanh,
            Dense { out_units: 2 },
            Softmax,
        ];
        let err = check(&[6], &specs, 5, 3);
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn margin_detects_exact_kink() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let net = Network::build(&[2], &[Dense { out_units: 2 }, Relu, Dense { out_units: 2 }, Softmax], &mut rng)
            .unwrap();
        let x = Tensor::zeros(vec![1, 2]);
        // Zero input and zero biases put every relu input exactly on the kink.
        assert_eq!(kink_margin(&net, &x), 0.0);
        let err = finite_difference_check(&net, &x, &[1], 1e-5).unwrap();
        assert!(err < 1e-4, "{err}");
    }
}
