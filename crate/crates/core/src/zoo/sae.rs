//! Greedy layer-wise autoencoder pretraining and supervised fine-tuning.
//!
//! Each autoencoder is `dense -> sigmoid -> dense` with a linear
//! reconstruction. The loss is half the squared reconstruction error summed
//! over input dimensions and averaged over samples; [`reconstruction_mse`]
//! reports the per-element mean for diagnostics.
//!
//! Every autoencoder trains on its input minus the input's column means.
//! Afterwards the mean is folded into the encoder bias (`b - W mu`), so the
//! encoder applies to uncentered data. Without centering, scalogram pixels
//! (mostly around 0.7) push every weight of a hidden unit the same way and
//! the codes saturate.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::arch::SaeArch;
use crate::error::{Error, Result};
use crate::nn::{
    keep_freed_memory, run_backward, run_forward, sgd_update, train_supervised, Dense, Init,
    Layer, Network, SgdState, Tensor, TrainConfig,
};

/// Trained encoder halves, outermost first.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderStack {
    pub input_dim: usize,
    pub encoders: Vec<Dense>,
}

impl EncoderStack {
    pub fn output_dim(&self) -> usize {
        self.encoders.last().map_or(self.input_dim, |d| d.out_units)
    }

    fn layers(&self) -> Vec<Layer> {
        self.encoders
            .iter()
            .flat_map(|d| [Layer::Dense(d.clone()), Layer::Sigmoid])
            .collect()
    }

    /// Hidden code of the last encoder for a `[n, input_dim]` batch.
    pub fn encode(&self, x: &Tensor) -> Result<Tensor> {
        if x.shape() != [x.batch(), self.input_dim] {
            return Err(Error::ShapeMismatch(format!(
                "encoder expects [n, {}], got {:?}",
                self.input_dim,
                x.shape()
            )));
        }
        Ok(run_forward(&self.layers(), x, false).0)
    }
}

fn check_data(x: &Tensor) -> Result<()> {
    if x.shape().len() != 2 || x.batch() == 0 {
        return Err(Error::Data(format!(
            "autoencoder training needs a non-empty [n, d] matrix, got {:?}",
            x.shape()
        )));
    }
    if !x.all_finite() {
        return Err(Error::NonFinite("autoencoder input".into()));
    }
    Ok(())
}

/// Per-element mean squared reconstruction error of `ae` on `x`.
fn mse(ae: &[Layer], x: &Tensor) -> f64 {
    let (y, _) = run_forward(ae, x, false);
    y.data()
        .iter()
        .zip(x.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / x.len() as f64
}

/// Train one autoencoder of width `hidden` on `x`; returns `[enc, sigmoid, dec]`.
fn train_autoencoder(x: &Tensor, hidden: usize, cfg: &TrainConfig, rng: &mut impl Rng) -> Result<Vec<Layer>> {
    keep_freed_memory();
    let d = x.sample_len();
    let mut ae = vec![
        Layer::Dense(Dense::new(d, hidden, Init::XavierUniform, rng)),
        Layer::Sigmoid,
        Layer::Dense(Dense::new(hidden, d, Init::XavierUniform, rng)),
    ];
    let mut shuffle = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..x.batch()).collect();
    let mut state = SgdState::default();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle);
        for batch in order.chunks(cfg.batch_size) {
            let bx = x.gather(batch);
            let (y, caches) = run_forward(&ae, &bx, true);
            let n = batch.len() as f64;
            let mut dy = y;
            for (o, t) in dy.data_mut().iter_mut().zip(bx.data()) {
                *o = (*o - t) / n;
            }
            if !dy.all_finite() {
                return Err(Error::NonFinite(format!(
                    "autoencoder reconstruction at epoch {epoch}"
                )));
            }
            let grads = run_backward(&ae, &caches, dy);
            sgd_update(&mut ae, &grads, cfg, &mut state);
        }
    }
    Ok(ae)
}

fn column_means(x: &Tensor) -> Vec<f64> {
    let d = x.sample_len();
    let mut mu = vec![0.0; d];
    for row in x.data().chunks(d) {
        for (m, v) in mu.iter_mut().zip(row) {
            *m += v;
        }
    }
    let n = x.batch() as f64;
    mu.iter_mut().for_each(|m| *m /= n);
    mu
}

fn centered(x: &Tensor, mu: &[f64]) -> Tensor {
    let mut c = x.clone();
    for row in c.data_mut().chunks_mut(mu.len()) {
        for (v, m) in row.iter_mut().zip(mu) {
            *v -= m;
        }
    }
    c
}

/// Rewrite `enc` so that `enc'(x) == enc(x - mu)`.
fn fold_mean(enc: &mut Dense, mu: &[f64]) {
    for (o, b) in enc.bias.iter_mut().enumerate() {
        let row = &enc.weight[o * enc.in_units..(o + 1) * enc.in_units];
        *b -= row.iter().zip(mu).map(|(w, m)| w * m).sum::<f64>();
    }
}

/// Per-element reconstruction MSE of a single autoencoder built from an
/// encoder and decoder pair.
pub fn reconstruction_mse(encoder: &Dense, decoder: &Dense, x: &Tensor) -> f64 {
    mse(
        &[Layer::Dense(encoder.clone()), Layer::Sigmoid, Layer::Dense(decoder.clone())],
        x,
    )
}

/// Result of pretraining: the encoder stack plus, for diagnostics, each
/// autoencoder's decoder and final reconstruction MSE on its own (centered)
/// inputs. Decoders reconstruct centered inputs.
#[derive(Debug, Clone)]
pub struct Pretrained {
    pub stack: EncoderStack,
    pub decoders: Vec<Dense>,
    pub mse: Vec<f64>,
}

/// Greedy layer-wise pretraining: autoencoder k learns to reconstruct the
/// hidden code of autoencoder k-1. Labels are never seen.
pub fn pretrain_sae(arch: &SaeArch, x: &Tensor, cfg: &TrainConfig, rng: &mut impl Rng) -> Result<Pretrained> {
    cfg.validate()?;
    check_data(x)?;
    if arch.hidden_sizes.is_empty() {
        return Err(Error::InvalidConfig("sae needs at least one autoencoder".into()));
    }
    let mut encoders = Vec::with_capacity(arch.hidden_sizes.len());
    let mut decoders = Vec::with_capacity(arch.hidden_sizes.len());
    let mut errors = Vec::with_capacity(arch.hidden_sizes.len());
    let mut input = x.clone();
    for (k, &h) in arch.hidden_sizes.iter().enumerate() {
        let layer_cfg = TrainConfig {
            seed: cfg.seed.wrapping_add(k as u64),
            ..cfg.clone()
        };
        let mu = column_means(&input);
        let centered_input = centered(&input, &mu);
        let mut ae = train_autoencoder(&centered_input, h, &layer_cfg, rng)?;
        errors.push(mse(&ae, &centered_input));
        drop(centered_input);
        let dec = match ae.pop() {
            Some(Layer::Dense(d)) => d,
            _ => unreachable!("autoencoder ends in a dense decoder"),
        };
        ae.pop();
        let mut enc = match ae.pop() {
            Some(Layer::Dense(d)) => d,
            _ => unreachable!("autoencoder starts with a dense encoder"),
        };
        fold_mean(&mut enc, &mu);
        input = run_forward(&[Layer::Dense(enc.clone()), Layer::Sigmoid], &input, false).0;
        encoders.push(enc);
        decoders.push(dec);
    }
    Ok(Pretrained {
        stack: EncoderStack {
            input_dim: x.sample_len(),
            encoders,
        },
        decoders,
        mse: errors,
    })
}

/// Append dense(2) + softmax to the encoders and train the whole network
/// end-to-end. With `cfg.epochs == 0` the result is the pretrained encoders
/// plus a freshly initialized head.
pub fn finetune_sae(
    stack: &EncoderStack,
    x: &Tensor,
    labels: &[usize],
    cfg: &TrainConfig,
    rng: &mut impl Rng,
) -> Result<Network> {
    let mut layers = stack.layers();
    layers.push(Layer::Dense(Dense::new(stack.output_dim(), 2, Init::XavierUniform, rng)));
    layers.push(Layer::Softmax);
    let mut net = Network::from_layers(vec![stack.input_dim], layers)?;
    train_supervised(&mut net, x, labels, cfg)?;
    Ok(net)
}
