use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::IMAGE_SIZE;
use crate::nn::LayerSpec;

/// Deepest CNN whose final feature map is still at least 2x2 on a 100x100
/// input (100 -> 50 -> 25 -> 12 -> 6 -> 3).
pub const MAX_CNN_BLOCKS: usize = 5;

/// Flattened scalogram length fed to SAEs.
pub const SAE_INPUT_DIM: usize = IMAGE_SIZE * IMAGE_SIZE;

fn check_range(name: &str, (lo, hi): (usize, usize)) -> Result<()> {
    if lo < 1 || lo > hi {
        return Err(Error::InvalidConfig(format!(
            "{name} range ({lo}, {hi}) must satisfy 1 <= min <= max"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CnnArchRange {
    /// Number of conv blocks.
    pub alpha: (usize, usize),
    /// Channels per block.
    pub filters: (usize, usize),
}

impl Default for CnnArchRange {
    fn default() -> Self {
        CnnArchRange {
            alpha: (2, 4),
            filters: (8, 64),
        }
    }
}

impl CnnArchRange {
    pub fn validate(&self) -> Result<()> {
        check_range("cnn alpha", self.alpha)?;
        check_range("cnn filters", self.filters)?;
        if self.alpha.1 > MAX_CNN_BLOCKS {
            return Err(Error::InvalidConfig(format!(
                "cnn alpha max {} exceeds {MAX_CNN_BLOCKS}; the feature map would shrink below 2x2",
                self.alpha.1
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SaeArchRange {
    /// Number of stacked autoencoders L.
    pub depth: (usize, usize),
    /// Hidden units per autoencoder.
    pub hidden: (usize, usize),
}

impl Default for SaeArchRange {
    fn default() -> Self {
        SaeArchRange {
            depth: (2, 3),
            hidden: (400, 2500),
        }
    }
}

impl SaeArchRange {
    pub fn validate(&self, input_dim: usize) -> Result<()> {
        check_range("sae depth", self.depth)?;
        check_range("sae hidden", self.hidden)?;
        if self.hidden.1 >= input_dim {
            return Err(Error::InvalidConfig(format!(
                "sae hidden max {} must be below the input dimension {input_dim}",
                self.hidden.1
            )));
        }
        Ok(())
    }
}

/// Conv block widths, non-increasing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CnnArch {
    pub block_filters: Vec<usize>,
}

impl CnnArch {
    /// Blocks of conv -> batchnorm -> relu -> maxpool, then
    /// flatten -> dense(2) -> softmax.
    pub fn layer_specs(&self) -> Vec<LayerSpec> {
        let mut v = Vec::with_capacity(4 * self.block_filters.len() + 3);
        for &f in &self.block_filters {
            v.extend([
                LayerSpec::Conv2d { out_channels: f },
                LayerSpec::BatchNorm,
                LayerSpec::Relu,
                LayerSpec::MaxPool,
            ]);
        }
        v.extend([LayerSpec::Flatten, LayerSpec::Dense { out_units: 2 }, LayerSpec::Softmax]);
        v
    }
}

/// Autoencoder hidden widths, non-increasing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SaeArch {
    pub hidden_sizes: Vec<usize>,
}

fn sorted_draws(n: usize, (lo, hi): (usize, usize), rng: &mut impl Rng) -> Vec<usize> {
    let mut v: Vec<usize> = (0..n).map(|_| rng.random_range(lo..=hi)).collect();
    v.sort_unstable_by(|a, b| b.cmp(a));
    v
}

/// Uniform block count, then that many uniform widths sorted descending.
pub fn sample_cnn_arch(range: &CnnArchRange, rng: &mut impl Rng) -> Result<CnnArch> {
    range.validate()?;
    let alpha = rng.random_range(range.alpha.0..=range.alpha.1);
    Ok(CnnArch {
        block_filters: sorted_draws(alpha, range.filters, rng),
    })
}

/// Uniform depth, then that many uniform hidden widths sorted descending.
pub fn sample_sae_arch(range: &SaeArchRange, rng: &mut impl Rng) -> Result<SaeArch> {
    range.validate(SAE_INPUT_DIM)?;
    let depth = rng.random_range(range.depth.0..=range.depth.1);
    Ok(SaeArch {
        hidden_sizes: sorted_draws(depth, range.hidden, rng),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn degenerate_ranges() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = CnnArchRange {
            alpha: (2, 2),
            filters: (16, 16),
        };
        for _ in 0..10 {
            assert_eq!(sample_cnn_arch(&r, &mut rng).unwrap().block_filters, vec![16, 16]);
        }
        let r = SaeArchRange {
            depth: (1, 1),
            hidden: (256, 256),
        };
        assert_eq!(sample_sae_arch(&r, &mut rng).unwrap().hidden_sizes, vec![256]);
    }

    #[test]
    fn same_seed_same_arch() {
        let r = CnnArchRange::default();
        let a = sample_cnn_arch(&r, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = sample_cnn_arch(&r, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_ranges() {
        let bad = CnnArchRange {
            alpha: (2, 6),
            ..CnnArchRange::default()
        };
        assert!(bad.validate().is_err());
        let bad = CnnArchRange {
            alpha: (3, 2),
            ..CnnArchRange::default()
        };
        assert!(bad.validate().is_err());
        let bad = SaeArchRange {
            hidden: (100, 10000),
            ..SaeArchRange::default()
        };
        assert!(bad.validate(SAE_INPUT_DIM).is_err());
    }

    #[test]
    fn cnn_specs_shape() {
        let a = CnnArch {
            block_filters: vec![32, 16, 8],
        };
        let specs = a.layer_specs();
        assert_eq!(specs.len(), 15);
        assert_eq!(specs[0], LayerSpec::Conv2d { out_channels: 32 });
        assert_eq!(specs[12], LayerSpec::Flatten);
    }
}
