use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layer::{softmax_rows, BatchNorm, Cache, Conv2d, Dense, Init, Layer, LayerSpec};
use super::tensor::Tensor;
use crate::error::{Error, Result};

// Batch mean and variance of one batchnorm layer.
type BatchStats = (Vec<f64>, Vec<f64>);

/// Floor applied to probabilities inside the log of the cross-entropy.
pub const CE_FLOOR: f64 = 1e-15;

/// Layers evaluated on batches whose first dimension is the sample index.
/// The final layer is always a softmax over `n_classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    input_shape: Vec<usize>,
    layers: Vec<Layer>,
    n_classes: usize,
    finalized: bool,
    seed: Option<u64>,
}

/// Result of a single-sample forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Forward {
    pub posterior: Vec<f64>,
    /// Pre-softmax activations of the final layer.
    pub logits: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub l2: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            momentum: 0.9,
            batch_size: 32,
            epochs: 30,
            seed: 0,
            l2: 1e-4,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) || !(self.l2 >= 0.0) {
            return Err(Error::InvalidConfig(
                "momentum must lie in [0, 1) and l2 must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Momentum buffers, one per parameter tensor.
#[derive(Debug, Clone, Default)]
pub struct SgdState {
    velocity: Vec<Vec<f64>>,
}

pub(crate) fn run_forward(layers: &[Layer], x: &Tensor, train: bool) -> (Tensor, Vec<Cache>) {
    let mut caches = Vec::with_capacity(if train { layers.len() } else { 0 });
    let mut cur = x.clone();
    for l in layers {
        let (y, c) = l.forward(cur, train);
        if train {
            caches.push(c);
        }
        cur = y;
    }
    (cur, caches)
}

/// Backpropagate `dy` through `layers`; gradients come back in the order of
/// [`param_list`].
pub(crate) fn run_backward(layers: &[Layer], caches: &[Cache], dy: Tensor) -> Vec<Vec<f64>> {
    let mut per_layer: Vec<Vec<Vec<f64>>> = layers
        .iter()
        .map(|l| l.params().iter().map(|p| vec![0.0; p.len()]).collect())
        .collect();
    let mut g = Some(dy);
    for (i, l) in layers.iter().enumerate().rev() {
        let dy = g.take().expect("gradient available");
        g = l.backward(&caches[i], dy, &mut per_layer[i], i > 0);
        if g.is_none() {
            break;
        }
    }
    per_layer.into_iter().flatten().collect()
}

pub(crate) fn param_list(layers: &[Layer]) -> Vec<&Vec<f64>> {
    layers.iter().flat_map(|l| l.params()).collect()
}

/// Momentum SGD: `v = mu v - lr (g + l2 w)`, `w += v`, L2 on weights only.
pub(crate) fn sgd_update(layers: &mut [Layer], grads: &[Vec<f64>], cfg: &TrainConfig, state: &mut SgdState) {
    let flags: Vec<bool> = layers.iter().flat_map(|l| l.weight_flags()).collect();
    let params: Vec<&mut Vec<f64>> = layers.iter_mut().flat_map(|l| l.params_mut()).collect();
    if state.velocity.len() != params.len() {
        state.velocity = params.iter().map(|p| vec![0.0; p.len()]).collect();
    }
    for (((p, g), v), &is_w) in params.into_iter().zip(grads).zip(&mut state.velocity).zip(&flags) {
        let l2 = if is_w { cfg.l2 } else { 0.0 };
        for ((w, gi), vi) in p.iter_mut().zip(g).zip(v.iter_mut()) {
            *vi = cfg.momentum * *vi - cfg.learning_rate * (gi + l2 * *w);
            *w += *vi;
        }
    }
}

/// `-sum target * ln(max(posterior, 1e-15))`.
pub fn cross_entropy(posterior: &[f64], target: &[f64]) -> f64 {
    -posterior
        .iter()
        .zip(target)
        .map(|(p, t)| t * p.max(CE_FLOOR).ln())
        .sum::<f64>()
}

pub fn one_hot(class: usize, n_classes: usize) -> Vec<f64> {
    let mut v = vec![0.0; n_classes];
    v[class] = 1.0;
    v
}

/// Init rule for a parametrized layer at `idx`: He when the next
/// nonlinearity (looking past batchnorm) is a relu, Xavier otherwise.
fn init_for(specs: &[LayerSpec], idx: usize) -> Init {
    for s in &specs[idx + 1..] {
        match s {
            LayerSpec::BatchNorm => continue,
            LayerSpec::Relu => return Init::HeUniform,
            _ => return Init::XavierUniform,
        }
    }
    Init::XavierUniform
}

impl Network {
    /// Instantiate layers from specs with fresh random weights.
    pub fn build(input_shape: &[usize], specs: &[LayerSpec], rng: &mut impl Rng) -> Result<Self> {
        let mut shape = input_shape.to_vec();
        let mut layers = Vec::with_capacity(specs.len());
        for (i, spec) in specs.iter().enumerate() {
            let out = Layer::output_shape(spec, &shape)?;
            let layer = match *spec {
                LayerSpec::Conv2d { out_channels } => {
                    let bias = specs.get(i + 1) != Some(&LayerSpec::BatchNorm);
                    Layer::Conv2d(Conv2d::new(
                        [shape[0], shape[1], shape[2]],
                        out_channels,
                        bias,
                        init_for(specs, i),
                        rng,
                    ))
                }
                LayerSpec::Dense { out_units } => {
                    Layer::Dense(Dense::new(shape[0], out_units, init_for(specs, i), rng))
                }
                LayerSpec::BatchNorm => Layer::BatchNorm(BatchNorm::new(shape[0])),
                LayerSpec::Relu => Layer::Relu,
                LayerSpec::MaxPool => Layer::MaxPool,
                LayerSpec::Sigmoid => Layer::Sigmoid,
                LayerSpec::Tanh => Layer::Tanh,
                LayerSpec::Softmax => Layer::Softmax,
                LayerSpec::Flatten => Layer::Flatten,
            };
            layers.push(layer);
            shape = out;
        }
        Network::from_layers(input_shape.to_vec(), layers)
    }

    /// Assemble already-parametrized layers, checking every shape.
    pub fn from_layers(input_shape: Vec<usize>, layers: Vec<Layer>) -> Result<Self> {
        let mut shape = input_shape.clone();
        for (i, l) in layers.iter().enumerate() {
            let spec = l.spec();
            let out = Layer::output_shape(&spec, &shape)?;
            let ok = match l {
                Layer::Conv2d(c) => {
                    [c.in_channels, c.height, c.width] == shape[..]
                        && c.weight.len() == c.out_channels * c.in_channels * 9
                        && c.bias.as_ref().is_none_or(|b| b.len() == c.out_channels)
                }
                Layer::Dense(d) => {
                    d.in_units == shape[0]
                        && d.weight.len() == d.in_units * d.out_units
                        && d.bias.len() == d.out_units
                }
                Layer::BatchNorm(b) => {
                    b.channels == shape[0]
                        && [&b.gamma, &b.beta, &b.running_mean, &b.running_var]
                            .iter()
                            .all(|v| v.len() == b.channels)
                }
                Layer::Softmax => i + 1 == layers.len(),
                _ => true,
            };
            if !ok {
                return Err(Error::ShapeMismatch(format!(
                    "layer {i} ({spec:?}) parameters do not fit input shape {shape:?}"
                )));
            }
            shape = out;
        }
        if layers.last().map(Layer::spec) != Some(LayerSpec::Softmax) {
            return Err(Error::ShapeMismatch("network must end in softmax".into()));
        }
        let n_classes = shape[0];
        if n_classes < 2 {
            return Err(Error::ShapeMismatch(format!(
                "softmax over {n_classes} class(es)"
            )));
        }
        Ok(Network {
            input_shape,
            layers,
            n_classes,
            finalized: false,
            seed: None,
        })
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(Layer::spec).collect()
    }

    /// True once training has finished and the network is in inference mode.
    pub fn is_finalized(&self) -> bool {
        self.finalized
    }

    pub fn finalize(&mut self) {
        self.finalized = true;
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = Some(seed);
    }

    pub(crate) fn set_finalized(&mut self, f: bool) {
        self.finalized = f;
    }

    pub fn param_count(&self) -> usize {
        param_list(&self.layers).iter().map(|p| p.len()).sum()
    }

    /// All trainable values concatenated in layer order.
    pub fn flat_params(&self) -> Vec<f64> {
        param_list(&self.layers).into_iter().flatten().copied().collect()
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                flat.len()
            )));
        }
        let mut off = 0;
        for p in self.layers.iter_mut().flat_map(|l| l.params_mut()) {
            let n = p.len();
            p.copy_from_slice(&flat[off..off + n]);
            off += n;
        }
        Ok(())
    }

    fn check_batch(&self, x: &Tensor) -> Result<()> {
        if x.shape().len() != self.input_shape.len() + 1 || x.shape()[1..] != self.input_shape[..] {
            return Err(Error::ShapeMismatch(format!(
                "network expects batches of {:?}, got {:?}",
                self.input_shape,
                x.shape()
            )));
        }
        if !x.all_finite() {
            return Err(Error::NonFinite("network input".into()));
        }
        Ok(())
    }

    fn check_labels(&self, x: &Tensor, labels: &[usize]) -> Result<()> {
        if labels.len() != x.batch() || x.batch() == 0 {
            return Err(Error::ShapeMismatch(format!(
                "{} labels for a batch of {}",
                labels.len(),
                x.batch()
            )));
        }
        if let Some(l) = labels.iter().find(|&&l| l >= self.n_classes) {
            return Err(Error::InvalidInput(format!(
                "label {l} out of range for {} classes",
                self.n_classes
            )));
        }
        Ok(())
    }

    /// Inference-mode logits for a batch.
    pub fn logits(&self, x: &Tensor) -> Result<Tensor> {
        self.check_batch(x)?;
        let body = &self.layers[..self.layers.len() - 1];
        let (logits, _) = run_forward(body, x, false);
        if !logits.all_finite() {
            return Err(Error::NonFinite("logits".into()));
        }
        Ok(logits)
    }

    /// Inference-mode posteriors, one row per batch entry.
    pub fn predict(&self, x: &Tensor) -> Result<Vec<Vec<f64>>> {
        let p = softmax_rows(&self.logits(x)?);
        Ok(p.data().chunks(self.n_classes).map(<[f64]>::to_vec).collect())
    }

    /// Forward one sample given with or without a leading batch dimension.
    pub fn forward(&self, input: &Tensor) -> Result<Forward> {
        let x = if input.shape() == self.input_shape.as_slice() {
            let mut shape = vec![1];
            shape.extend_from_slice(&self.input_shape);
            input.clone().reshape(shape)?
        } else {
            input.clone()
        };
        if x.batch() != 1 {
            return Err(Error::ShapeMismatch(format!(
                "forward takes one sample, got shape {:?}",
                input.shape()
            )));
        }
        let logits = self.logits(&x)?;
        let posterior = softmax_rows(&logits).into_data();
        Ok(Forward {
            posterior,
            logits: logits.into_data(),
        })
    }

    /// Training-mode mean cross-entropy and its gradient (no L2), plus the
    /// batchnorm batch statistics for running-average updates.
    pub(crate) fn loss_and_grad(
        &self,
        x: &Tensor,
        labels: &[usize],
    ) -> Result<(f64, Vec<Vec<f64>>, Vec<BatchStats>)> {
        self.check_batch(x)?;
        self.check_labels(x, labels)?;
        let body = &self.layers[..self.layers.len() - 1];
        let (logits, caches) = run_forward(body, x, true);
        let n = labels.len();
        let p = softmax_rows(&logits);
        let k = self.n_classes;
        let mut loss = 0.0;
        let mut d = p.clone();
        for (i, &l) in labels.iter().enumerate() {
            loss -= p.data()[i * k + l].max(CE_FLOOR).ln();
            d.data_mut()[i * k + l] -= 1.0;
        }
        loss /= n as f64;
        if !loss.is_finite() || !logits.all_finite() {
            return Err(Error::NonFinite(format!(
                "training loss is {loss}; logits finite: {}",
                logits.all_finite()
            )));
        }
        d.data_mut().iter_mut().for_each(|v| *v /= n as f64);
        let stats = caches
            .iter()
            .filter_map(|c| match c {
                Cache::BatchNorm(b) => Some((b.mean.clone(), b.var.clone())),
                _ => None,
            })
            .collect();
        let grads = run_backward(body, &caches, d);
        Ok((loss, grads, stats))
    }

    /// Training-mode mean cross-entropy only.
    pub fn train_loss(&self, x: &Tensor, labels: &[usize]) -> Result<f64> {
        self.check_batch(x)?;
        self.check_labels(x, labels)?;
        let body = &self.layers[..self.layers.len() - 1];
        let (logits, _) = run_forward(body, x, true);
        let p = softmax_rows(&logits);
        let k = self.n_classes;
        let loss = labels
            .iter()
            .enumerate()
            .map(|(i, &l)| -p.data()[i * k + l].max(CE_FLOOR).ln())
            .sum::<f64>()
            / labels.len() as f64;
        Ok(loss)
    }

    /// Fraction of samples whose inference-mode argmax equals the label.
    pub fn accuracy(&self, x: &Tensor, labels: &[usize]) -> Result<f64> {
        self.check_labels(x, labels)?;
        let mut correct = 0;
        for (start, chunk) in chunks(x.batch(), 64) {
            let idx: Vec<usize> = (start..start + chunk).collect();
            for (row, &l) in self.predict(&x.gather(&idx))?.iter().zip(&labels[start..]) {
                if argmax(row) == l {
                    correct += 1;
                }
            }
        }
        Ok(correct as f64 / labels.len() as f64)
    }

    /// Inference-mode posteriors for an arbitrarily large batch, evaluated
    /// in chunks to bound memory.
    pub fn predict_all(&self, x: &Tensor) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(x.batch());
        for (start, chunk) in chunks(x.batch(), 64) {
            let idx: Vec<usize> = (start..start + chunk).collect();
            out.extend(self.predict(&x.gather(&idx))?);
        }
        Ok(out)
    }
}

fn chunks(n: usize, size: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).step_by(size).map(move |s| (s, size.min(n - s)))
}

/// Index of the largest entry; ties go to the lower index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// One momentum-SGD step on a mini-batch. Returns the loss before the update.
pub fn train_step(
    net: &mut Network,
    x: &Tensor,
    labels: &[usize],
    cfg: &TrainConfig,
    state: &mut SgdState,
) -> Result<f64> {
    super::alloc::keep_freed_memory();
    let (loss, grads, stats) = net.loss_and_grad(x, labels)?;
    let weights: f64 = net
        .layers
        .iter()
        .flat_map(|l| l.params().into_iter().zip(l.weight_flags()))
        .filter(|(_, w)| *w)
        .map(|(p, _)| p.iter().map(|v| v * v).sum::<f64>())
        .sum();
    let mut stats = stats.into_iter();
    for l in net.layers.iter_mut() {
        if let Layer::BatchNorm(b) = l {
            let (m, v) = stats.next().expect("one stat pair per batchnorm");
            b.update_running(&m, &v);
        }
    }
    sgd_update(&mut net.layers, &grads, cfg, state);
    Ok(loss + 0.5 * cfg.l2 * weights)
}

/// Per-epoch mean loss returned by [`train_supervised`].
pub type LossCurve = Vec<f64>;

/// Shuffled mini-batch training for `cfg.epochs` epochs; leaves the network
/// finalized for inference.
pub fn train_supervised(
    net: &mut Network,
    x: &Tensor,
    labels: &[usize],
    cfg: &TrainConfig,
) -> Result<LossCurve> {
    cfg.validate()?;
    net.check_batch(x)?;
    net.check_labels(x, labels)?;
    for c in 0..net.n_classes {
        if !labels.contains(&c) {
            return Err(Error::Data(format!("class {c} has no training samples")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..labels.len()).collect();
    let mut state = SgdState::default();
    let mut curve = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let bx = x.gather(batch);
            let by: Vec<usize> = batch.iter().map(|&i| labels[i]).collect();
            let loss = train_step(net, &bx, &by, cfg, &mut state).map_err(|e| match e {
                Error::NonFinite(m) => Error::NonFinite(format!("epoch {epoch}: {m}")),
                e => e,
            })?;
            total += loss * batch.len() as f64;
        }
        curve.push(total / labels.len() as f64);
    }
    net.finalized = true;
    Ok(curve)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_dense(rng: &mut ChaCha8Rng) -> Network {
        Network::build(
            &[2],
            &[LayerSpec::Dense { out_units: 2 }, LayerSpec::Softmax],
            rng,
        )
        .unwrap()
    }

    #[test]
    fn zero_dense_gives_uniform_posterior() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut net = tiny_dense(&mut rng);
        let zeros = vec![0.0; net.param_count()];
        net.set_flat_params(&zeros).unwrap();
        let f = net.forward(&Tensor::new(vec![2], vec![3.0, -1.0]).unwrap()).unwrap();
        assert_eq!(f.posterior, vec![0.5, 0.5]);
    }

    #[test]
    fn cross_entropy_examples() {
        assert!(cross_entropy(&[1.0, 0.0], &[1.0, 0.0]).abs() < 1e-15);
        assert!((cross_entropy(&[0.5, 0.5], &[0.0, 1.0]) - 2f64.ln()).abs() < 1e-15);
        assert!((cross_entropy(&[0.75, 0.25], &[0.0, 1.0]) - 4f64.ln()).abs() < 1e-12);
        assert!((cross_entropy(&[1.0, 0.0], &[0.0, 1.0]) + CE_FLOOR.ln()).abs() < 1e-12);
    }

    #[test]
    fn tiny_learning_rate_leaves_params_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut net = tiny_dense(&mut rng);
        let before = net.flat_params();
        let x = Tensor::new(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let cfg = TrainConfig {
            learning_rate: 1e-300,
            l2: 0.0,
            ..TrainConfig::default()
        };
        train_step(&mut net, &x, &[0, 1], &cfg, &mut SgdState::default()).unwrap();
        for (a, b) in net.flat_params().iter().zip(&before) {
            assert!((a - b).abs() < 1e-290);
        }
    }

    #[test]
    fn separable_pair_loss_decreases() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut net = tiny_dense(&mut rng);
        let x = Tensor::new(vec![2, 2], vec![1.0, 2.0, -1.0, -2.0]).unwrap();
        let cfg = TrainConfig {
            learning_rate: 0.05,
            ..TrainConfig::default()
        };
        let mut st = SgdState::default();
        let first = train_step(&mut net, &x, &[0, 1], &cfg, &mut st).unwrap();
        let mut last = first;
        for _ in 0..99 {
            last = train_step(&mut net, &x, &[0, 1], &cfg, &mut st).unwrap();
        }
        assert!(last < first, "{last} !< {first}");
    }

    #[test]
    fn rejects_bad_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = tiny_dense(&mut rng);
        assert!(net.forward(&Tensor::zeros(vec![3])).is_err());
        assert!(Network::build(&[4], &[LayerSpec::Dense { out_units: 2 }], &mut rng).is_err());
        assert!(Network::build(
            &[1, 4, 4],
            &[LayerSpec::Dense { out_units: 2 }, LayerSpec::Softmax],
            &mut rng
        )
        .is_err());
    }

    #[test]
    fn empty_class_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut net = tiny_dense(&mut rng);
        let x = Tensor::new(vec![2, 2], vec![1.0, 2.0, -1.0, -2.0]).unwrap();
        assert!(train_supervised(&mut net, &x, &[0, 0], &TrainConfig::default()).is_err());
    }

    #[test]
    fn zero_epochs_only_finalizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut net = tiny_dense(&mut rng);
        let before = net.flat_params();
        let x = Tensor::new(vec![2, 2], vec![1.0, 2.0, -1.0, -2.0]).unwrap();
        let cfg = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        train_supervised(&mut net, &x, &[0, 1], &cfg).unwrap();
        assert!(net.is_finalized());
        assert_eq!(net.flat_params(), before);
    }
}
