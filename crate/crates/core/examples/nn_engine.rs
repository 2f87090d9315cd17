//! The neural-network engine on its own: check backprop against finite
//! differences, then train a tiny CNN to tell horizontal from vertical bars.

use mmdl::nn::LayerSpec::*;
use mmdl::nn::{finite_difference_check, train_supervised, Network, Tensor, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bars(n: usize, side: usize, rng: &mut ChaCha8Rng) -> mmdl::Result<(Tensor, Vec<usize>)> {
    let mut data = Vec::with_capacity(n * side * side);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % 2;
        let pos = rng.random_range(2..side - 2);
        for r in 0..side {
            for c in 0..side {
                let on = if class == 0 { r == pos } else { c == pos };
                data.push(if on { 1.0 } else { 0.0 } + rng.random_range(0.0..0.2));
            }
        }
        labels.push(class);
    }
    Ok((Tensor::new(vec![n, 1, side, side], data)?, labels))
}

fn main() -> mmdl::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let specs = [
        Conv2d { out_channels: 3 },
        BatchNorm,
        Relu,
        MaxPool,
        Flatten,
        Dense { out_units: 4 },
        Tanh,
        Dense { out_units: 2 },
        Softmax,
    ];
    let net = Network::build(&[1, 8, 8], &specs, &mut rng)?;
    let (x, y) = bars(4, 8, &mut rng)?;
    println!("gradient check, max relative error: {:.2e}", finite_difference_check(&net, &x, &y, 1e-5)?);

    let mut net = Network::build(&[1, 16, 16], &specs, &mut rng)?;
    let (x, y) = bars(64, 16, &mut rng)?;
    let cfg = TrainConfig {
        epochs: 15,
        batch_size: 8,
        ..TrainConfig::default()
    };
    let curve = train_supervised(&mut net, &x, &y, &cfg)?;
    println!(
        "loss {:.3} -> {:.3}, training accuracy {:.2}",
        curve.first().unwrap(),
        curve.last().unwrap(),
        net.accuracy(&x, &y)?
    );
    Ok(())
}
