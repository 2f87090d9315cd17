//! On-disk model format: a directory holding `model.json` plus one raw
//! little-endian f64 blob per tensor.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::layer::{BatchNorm, Conv2d, Dense, Layer, LayerSpec};
use super::network::Network;
use crate::error::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;
pub const MODEL_META_FILE: &str = "model.json";

#[derive(Debug, Serialize, Deserialize)]
struct TensorMeta {
    name: String,
    file: String,
    shape: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct LayerMeta {
    spec: LayerSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    momentum: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    tensors: Vec<TensorMeta>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelMeta {
    format_version: u32,
    input_shape: Vec<usize>,
    n_classes: usize,
    finalized: bool,
    seed: Option<u64>,
    layers: Vec<LayerMeta>,
}

fn write_blob(path: &Path, v: &[f64]) -> Result<()> {
    let bytes: Vec<u8> = v.iter().flat_map(|x| x.to_le_bytes()).collect();
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_blob(path: &Path, len: usize) -> Result<Vec<f64>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() != len * 8 {
        return Err(Error::Format(format!(
            "{} holds {} bytes, expected {}",
            path.display(),
            bytes.len(),
            len * 8
        )));
    }
    let v: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Format(format!("{} contains non-finite values", path.display())));
    }
    Ok(v)
}

fn layer_tensors(l: &Layer) -> Vec<(&'static str, Vec<usize>, &Vec<f64>)> {
    match l {
        Layer::Conv2d(c) => {
            let mut v = vec![("weight", vec![c.out_channels, c.in_channels, 3, 3], &c.weight)];
            if let Some(b) = &c.bias {
                v.push(("bias", vec![c.out_channels], b));
            }
            v
        }
        Layer::BatchNorm(b) => vec![
            ("gamma", vec![b.channels], &b.gamma),
            ("beta", vec![b.channels], &b.beta),
            ("running_mean", vec![b.channels], &b.running_mean),
            ("running_var", vec![b.channels], &b.running_var),
        ],
        Layer::Dense(d) => vec![
            ("weight", vec![d.out_units, d.in_units], &d.weight),
            ("bias", vec![d.out_units], &d.bias),
        ],
        _ => vec![],
    }
}

/// Write `net` into `dir` (created if needed).
pub fn save_model(net: &Network, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut layers = Vec::with_capacity(net.layers().len());
    for (i, l) in net.layers().iter().enumerate() {
        let mut tensors = Vec::new();
        for (name, shape, data) in layer_tensors(l) {
            let file = format!("layer{i:02}_{name}.f64");
            write_blob(&dir.join(&file), data)?;
            tensors.push(TensorMeta {
                name: name.to_string(),
                file,
                shape,
            });
        }
        let (eps, momentum) = match l {
            Layer::BatchNorm(b) => (Some(b.eps), Some(b.momentum)),
            _ => (None, None),
        };
        layers.push(LayerMeta {
            spec: l.spec(),
            eps,
            momentum,
            tensors,
        });
    }
    let meta = ModelMeta {
        format_version: MODEL_FORMAT_VERSION,
        input_shape: net.input_shape().to_vec(),
        n_classes: net.n_classes(),
        finalized: net.is_finalized(),
        seed: net.seed(),
        layers,
    };
    let path = dir.join(MODEL_META_FILE);
    let text = serde_json::to_string_pretty(&meta).expect("model metadata serializes");
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}

pub fn load_model(dir: &Path) -> Result<Network> {
    let path = dir.join(MODEL_META_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let meta: ModelMeta = serde_json::from_str(&text)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    if meta.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::Format(format!(
            "model format version {} is not supported (expected {MODEL_FORMAT_VERSION})",
            meta.format_version
        )));
    }
    let mut shape = meta.input_shape.clone();
    let mut layers = Vec::with_capacity(meta.layers.len());
    for lm in &meta.layers {
        let find = |name: &str| -> Result<Vec<f64>> {
            let t = lm
                .tensors
                .iter()
                .find(|t| t.name == name)
                .ok_or_else(|| Error::Format(format!("{:?} layer missing tensor {name}", lm.spec)))?;
            read_blob(&dir.join(&t.file), t.shape.iter().product())
        };
        let next = Layer::output_shape(&lm.spec, &shape).map_err(|e| Error::Format(e.to_string()))?;
        let layer = match lm.spec {
            LayerSpec::Conv2d { out_channels } => Layer::Conv2d(Conv2d {
                in_channels: shape[0],
                out_channels,
                height: shape[1],
                width: shape[2],
                weight: find("weight")?,
                bias: if lm.tensors.iter().any(|t| t.name == "bias") {
                    Some(find("bias")?)
                } else {
                    None
                },
            }),
            LayerSpec::BatchNorm => {
                let channels = shape[0];
                Layer::BatchNorm(BatchNorm {
                    channels,
                    gamma: find("gamma")?,
                    beta: find("beta")?,
                    running_mean: find("running_mean")?,
                    running_var: find("running_var")?,
                    eps: lm.eps.ok_or_else(|| Error::Format("batchnorm missing eps".into()))?,
                    momentum: lm
                        .momentum
                        .ok_or_else(|| Error::Format("batchnorm missing momentum".into()))?,
                })
            }
            LayerSpec::Dense { out_units } => Layer::Dense(Dense {
                in_units: shape[0],
                out_units,
                weight: find("weight")?,
                bias: find("bias")?,
            }),
            LayerSpec::Relu => Layer::Relu,
            LayerSpec::MaxPool => Layer::MaxPool,
            LayerSpec::Sigmoid => Layer::Sigmoid,
            LayerSpec::Tanh => Layer::Tanh,
            LayerSpec::Softmax => Layer::Softmax,
            LayerSpec::Flatten => Layer::Flatten,
        };
        layers.push(layer);
        shape = next;
    }
    let mut net = Network::from_layers(meta.input_shape, layers).map_err(|e| Error::Format(e.to_string()))?;
    if net.n_classes() != meta.n_classes {
        return Err(Error::Format(format!(
            "metadata says {} classes, layers produce {}",
            meta.n_classes,
            net.n_classes()
        )));
    }
    net.set_finalized(meta.finalized);
    if let Some(s) = meta.seed {
        net.set_seed(s);
    }
    Ok(net)
}
