//! TOML run configuration. Every section is optional; missing keys take
//! their defaults and unknown keys are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::BaselineConfig;
use crate::dataset::{SynthSetConfig, DEFAULT_DURATION_S, DEFAULT_SAMPLE_RATE_HZ};
use crate::error::{Error, Result};
use crate::features::{ImageConfig, MfccConfig};
use crate::fusion::{FusionStrategy, DEFAULT_K};
use crate::nn::ScgConfig;
use crate::zoo::{EnsembleConfig, SAE_INPUT_DIM};

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "MMDL_OUT";
pub const DEFAULT_OUT: &str = "mmdl-out";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Labeled clip list for `train`, `evaluate` and `baseline`.
    pub manifest: Option<PathBuf>,
    /// Optional separate test manifest for `baseline`.
    pub test_manifest: Option<PathBuf>,
    pub sample_rate_hz: u32,
    pub duration_s: f64,
    /// Stratified share held out for testing (0 keeps everything for training).
    pub test_fraction: f64,
    /// Share of the training split held out to fit the PatternNet.
    pub fusion_fraction: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            manifest: None,
            test_manifest: None,
            sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
            duration_s: DEFAULT_DURATION_S,
            test_fraction: 0.2,
            fusion_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionConfig {
    /// `vote`, `average` or `patternnet`.
    pub strategy: String,
    /// PatternNet hidden-width multiplier.
    pub k: usize,
    pub scg: ScgConfig,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            strategy: "patternnet".into(),
            k: DEFAULT_K,
            scg: ScgConfig::default(),
        }
    }
}

impl FusionConfig {
    pub fn strategy(&self) -> Result<FusionStrategy> {
        let s: FusionStrategy = self.strategy.parse().map_err(|e: Error| Error::InvalidConfig(e.to_string()))?;
        let s = match s {
            FusionStrategy::PatternNet { .. } => FusionStrategy::PatternNet { k: self.k },
            other => other,
        };
        s.validate()?;
        Ok(s)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateConfig {
    /// Stratified cross-validation folds; 0 evaluates a trained bundle instead.
    pub k_folds: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    pub jobs: usize,
    pub data: DataConfig,
    pub synth: SynthSetConfig,
    pub features: ImageConfig,
    pub ensemble: EnsembleConfig,
    pub fusion: FusionConfig,
    pub baseline: BaselineConfig,
    pub evaluate: EvaluateConfig,
}

fn check_fraction(name: &str, f: f64, allow_zero: bool) -> Result<()> {
    let ok = if allow_zero { (0.0..1.0).contains(&f) } else { f > 0.0 && f < 1.0 };
    if !ok {
        return Err(Error::InvalidConfig(format!("{name} = {f} is out of range")));
    }
    Ok(())
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
    }

    /// Check every section before any work starts.
    pub fn validate(&self) -> Result<()> {
        if self.data.sample_rate_hz == 0 || !(self.data.duration_s > 0.0) {
            return Err(Error::InvalidConfig("data sample rate and duration must be positive".into()));
        }
        check_fraction("data.test_fraction", self.data.test_fraction, true)?;
        check_fraction("data.fusion_fraction", self.data.fusion_fraction, false)?;
        self.synth.validate()?;
        self.ensemble.validate()?;
        self.fusion.strategy()?;
        self.fusion.scg.validate()?;
        self.baseline.mfcc.validate(self.data.sample_rate_hz as f64)?;
        if self.evaluate.k_folds == 1 {
            return Err(Error::InvalidConfig("evaluate.k_folds must be 0 or >= 2".into()));
        }
        debug_assert_eq!(SAE_INPUT_DIM, crate::features::IMAGE_SIZE * crate::features::IMAGE_SIZE);
        Ok(())
    }

    pub fn mfcc(&self) -> &MfccConfig {
        &self.baseline.mfcc
    }

    /// Output root: explicit value, else `$MMDL_OUT`, else `mmdl-out`.
    pub fn out_dir(&self) -> PathBuf {
        self.out
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_default() {
        let c: RunConfig = toml::from_str("").unwrap();
        assert_eq!(c, RunConfig::default());
        c.validate().unwrap();
    }

    #[test]
    fn partial_sections_and_typos() {
        let c: RunConfig = toml::from_str("seed = 4\n[ensemble]\nn_cnn = 2\n[ensemble.cnn_range]\nfilters = [4, 8]\n").unwrap();
        assert_eq!((c.seed, c.ensemble.n_cnn, c.ensemble.n_sae), (4, 2, 15));
        assert_eq!(c.ensemble.cnn_range.filters, (4, 8));
        assert!(toml::from_str::<RunConfig>("[ensemble]\nn_cnns = 2\n").is_err());
    }

    #[test]
    fn validation_catches_nested_errors() {
        let mut c = RunConfig::default();
        c.fusion.strategy = "median".into();
        assert!(c.validate().unwrap_err().is_validation());
        let mut c = RunConfig::default();
        c.ensemble.cnn_range.alpha = (3, 9);
        assert!(c.validate().is_err());
        let e = toml::from_str::<RunConfig>("[baseline]\nrecipe = \"dwt:db99:2+mfcc\"\n").unwrap_err();
        assert!(e.to_string().contains("db99"));
    }
}
