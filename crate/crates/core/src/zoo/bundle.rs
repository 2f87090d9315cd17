//! On-disk ensemble layout:
//!
//! ```text
//! bundle/
//!   meta.json      counts, ranges, seeds, architectures, input spec
//!   cnn_<i>/       one model directory per CNN
//!   sae_<i>/       one model directory per SAE
//!   fusion/        PatternNet, when trained
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::arch::{CnnArch, CnnArchRange, SaeArch, SaeArchRange};
use super::ensemble::{CnnMember, EnsembleBundle, InputSpec, SaeMember};
use crate::error::{Error, Result};
use crate::fusion::FusionNet;
use crate::nn::{load_model, save_model};

pub const BUNDLE_FORMAT_VERSION: u32 = 1;
pub const BUNDLE_META_FILE: &str = "meta.json";

#[derive(Debug, Serialize, Deserialize)]
struct CnnEntry {
    index: usize,
    seed: u64,
    arch: CnnArch,
}

#[derive(Debug, Serialize, Deserialize)]
struct SaeEntry {
    index: usize,
    seed: u64,
    arch: SaeArch,
    pretrain_mse: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct BundleMeta {
    format_version: u32,
    master_seed: u64,
    n_cnn: usize,
    n_sae: usize,
    cnn_range: CnnArchRange,
    sae_range: SaeArchRange,
    input: Option<InputSpec>,
    cnn: Vec<CnnEntry>,
    sae: Vec<SaeEntry>,
    fusion: bool,
}

fn format_err(path: &Path, msg: impl std::fmt::Display) -> Error {
    Error::Format(format!("{}: {msg}", path.display()))
}

impl EnsembleBundle {
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for m in &self.cnns {
            save_model(&m.net, &dir.join(format!("cnn_{}", m.index)))?;
        }
        for m in &self.saes {
            save_model(&m.net, &dir.join(format!("sae_{}", m.index)))?;
        }
        let fusion_dir = dir.join("fusion");
        match &self.fusion {
            Some(f) => f.save(&fusion_dir)?,
            None if fusion_dir.exists() => {
                fs::remove_dir_all(&fusion_dir).map_err(|e| Error::io(&fusion_dir, e))?
            }
            None => {}
        }
        let meta = BundleMeta {
            format_version: BUNDLE_FORMAT_VERSION,
            master_seed: self.master_seed,
            n_cnn: self.n_cnn(),
            n_sae: self.n_sae(),
            cnn_range: self.cnn_range.clone(),
            sae_range: self.sae_range.clone(),
            input: self.input.clone(),
            cnn: self
                .cnns
                .iter()
                .map(|m| CnnEntry {
                    index: m.index,
                    seed: m.seed,
                    arch: m.arch.clone(),
                })
                .collect(),
            sae: self
                .saes
                .iter()
                .map(|m| SaeEntry {
                    index: m.index,
                    seed: m.seed,
                    arch: m.arch.clone(),
                    pretrain_mse: m.pretrain_mse.clone(),
                })
                .collect(),
            fusion: self.fusion.is_some(),
        };
        // Metadata last, via rename, so a half-written bundle never looks complete.
        let path = dir.join(BUNDLE_META_FILE);
        let tmp = dir.join(format!("{BUNDLE_META_FILE}.tmp"));
        let text = serde_json::to_string_pretty(&meta).expect("bundle metadata serializes");
        fs::write(&tmp, text + "\n").map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: &Path) -> Result<EnsembleBundle> {
        let path = dir.join(BUNDLE_META_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let meta: BundleMeta = serde_json::from_str(&text).map_err(|e| format_err(&path, e))?;
        if meta.format_version != BUNDLE_FORMAT_VERSION {
            return Err(format_err(
                &path,
                format!("format version {} (expected {BUNDLE_FORMAT_VERSION})", meta.format_version),
            ));
        }
        if meta.cnn.len() != meta.n_cnn || meta.sae.len() != meta.n_sae {
            return Err(format_err(&path, "member counts disagree with member lists"));
        }
        let mut cnns = Vec::with_capacity(meta.n_cnn);
        for (i, e) in meta.cnn.into_iter().enumerate() {
            if e.index != i {
                return Err(format_err(&path, format!("cnn entry {i} has index {}", e.index)));
            }
            let net = load_model(&dir.join(format!("cnn_{i}")))?;
            if net.specs() != e.arch.layer_specs() {
                return Err(format_err(&path, format!("cnn_{i} layers do not match its architecture")));
            }
            cnns.push(CnnMember {
                index: i,
                seed: e.seed,
                arch: e.arch,
                net,
            });
        }
        let mut saes = Vec::with_capacity(meta.n_sae);
        for (i, e) in meta.sae.into_iter().enumerate() {
            if e.index != i {
                return Err(format_err(&path, format!("sae entry {i} has index {}", e.index)));
            }
            let net = load_model(&dir.join(format!("sae_{i}")))?;
            // dense+sigmoid per autoencoder, then dense(2)+softmax
            if net.layers().len() != 2 * e.arch.hidden_sizes.len() + 2 {
                return Err(format_err(&path, format!("sae_{i} layers do not match its architecture")));
            }
            saes.push(SaeMember {
                index: i,
                seed: e.seed,
                arch: e.arch,
                net,
                pretrain_mse: e.pretrain_mse,
            });
        }
        let fusion = if meta.fusion {
            let f = FusionNet::load(&dir.join("fusion"))?;
            if f.n_cnn != meta.n_cnn || f.n_sae != meta.n_sae {
                return Err(format_err(
                    &path,
                    format!(
                        "fusion net expects {}+{} members, bundle has {}+{}",
                        f.n_cnn, f.n_sae, meta.n_cnn, meta.n_sae
                    ),
                ));
            }
            Some(f)
        } else {
            None
        };
        Ok(EnsembleBundle {
            master_seed: meta.master_seed,
            cnn_range: meta.cnn_range,
            sae_range: meta.sae_range,
            cnns,
            saes,
            fusion,
            input: meta.input,
        })
    }
}
