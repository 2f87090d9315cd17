//! Classical detectors: MFCC or DWT+MFCC features, standardized, with a
//! linear SVM or a k-nearest-neighbor classifier.

mod knn;
mod svm;

pub use knn::{knn_predict, KnnModel, DEFAULT_K as DEFAULT_KNN_K};
pub use svm::{svm_predict, train_linear_svm, SvmModel, DEFAULT_EPOCHS as DEFAULT_SVM_EPOCHS, DEFAULT_LAMBDA};

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Clip, Label};
use crate::error::{Error, Result};
use crate::features::{dwt_mfcc_features, mfcc, FeatureVector, MfccConfig, WaveletSpec};

pub const BASELINE_FILE: &str = "baseline.json";
pub const BASELINE_FORMAT_VERSION: u32 = 1;

/// Rows of features with their labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<Label>,
}

impl FeatureMatrix {
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<Label>) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::ShapeMismatch(format!("{} rows but {} labels", rows.len(), labels.len())));
        }
        if let Some(d) = rows.first().map(Vec::len) {
            if rows.iter().any(|r| r.len() != d) {
                return Err(Error::ShapeMismatch("feature rows differ in length".into()));
            }
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature matrix".into()));
        }
        Ok(FeatureMatrix { rows, labels })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub(crate) fn check_both_classes(&self) -> Result<()> {
        for l in Label::ALL {
            if !self.labels.contains(&l) {
                return Err(Error::Data(format!("no {l} samples in training data")));
            }
        }
        Ok(())
    }
}

/// Per-column statistics captured from training data. Zero-variance columns
/// are passed through untouched (neither centered nor scaled).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    /// Population standard deviation.
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(data: &FeatureMatrix) -> Result<Self> {
        if data.len() < 2 {
            return Err(Error::Data("standardization needs at least two rows".into()));
        }
        let n = data.len() as f64;
        let d = data.dim();
        let mut mean = vec![0.0; d];
        for r in &data.rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for r in &data.rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var.into_iter().map(|s| (s / n).sqrt()).collect();
        Ok(Standardizer { mean, std })
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.mean.len() {
            return Err(Error::ShapeMismatch(format!(
                "standardizer has {} columns, vector has {}",
                self.mean.len(),
                x.len()
            )));
        }
        Ok(x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(&v, (&m, &s))| if s > 0.0 { (v - m) / s } else { v })
            .collect())
    }

    pub fn apply_matrix(&self, data: &FeatureMatrix) -> Result<FeatureMatrix> {
        let rows = data.rows.iter().map(|r| self.apply(r)).collect::<Result<_>>()?;
        FeatureMatrix::new(rows, data.labels.clone())
    }
}

/// `mfcc` or `dwt:<wavelet>:<stages>+mfcc`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum FeatureRecipe {
    Mfcc,
    DwtMfcc { wavelet: String, stages: usize },
}

impl fmt::Display for FeatureRecipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureRecipe::Mfcc => f.write_str("mfcc"),
            FeatureRecipe::DwtMfcc { wavelet, stages } => write!(f, "dwt:{wavelet}:{stages}+mfcc"),
        }
    }
}

impl FromStr for FeatureRecipe {
    type Err = Error;

    /// Validates the wavelet name and stage count, so an unknown wavelet
    /// fails here before any features are computed.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "mfcc" {
            return Ok(FeatureRecipe::Mfcc);
        }
        let bad = || {
            Error::InvalidConfig(format!(
                "unknown feature recipe {s:?} (expected `mfcc` or `dwt:<wavelet>:<stages>+mfcc`)"
            ))
        };
        let body = s.strip_prefix("dwt:").and_then(|r| r.strip_suffix("+mfcc")).ok_or_else(bad)?;
        let (wavelet, stages) = body.split_once(':').ok_or_else(bad)?;
        let stages: usize = stages.parse().map_err(|_| bad())?;
        if stages == 0 {
            return Err(Error::InvalidConfig("dwt+mfcc needs at least one stage".into()));
        }
        let spec = WaveletSpec::by_name(wavelet)?;
        Ok(FeatureRecipe::DwtMfcc {
            wavelet: spec.name(),
            stages,
        })
    }
}

impl TryFrom<String> for FeatureRecipe {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<FeatureRecipe> for String {
    fn from(r: FeatureRecipe) -> String {
        r.to_string()
    }
}

impl FeatureRecipe {
    pub fn extract(&self, clip: &Clip, mcfg: &MfccConfig) -> Result<FeatureVector> {
        match self {
            FeatureRecipe::Mfcc => mfcc(clip, mcfg),
            FeatureRecipe::DwtMfcc { wavelet, stages } => {
                dwt_mfcc_features(clip, &WaveletSpec::by_name(wavelet)?, *stages, mcfg)
            }
        }
    }

    /// Features for many clips, in parallel, preserving order.
    pub fn extract_all(&self, clips: &[Clip], labels: &[Label], mcfg: &MfccConfig) -> Result<FeatureMatrix> {
        let rows = clips
            .par_iter()
            .map(|c| self.extract(c, mcfg).map(|f| f.values))
            .collect::<Result<Vec<_>>>()?;
        FeatureMatrix::new(rows, labels.to_vec())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Svm,
    Knn,
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClassifierKind::Svm => "svm",
            ClassifierKind::Knn => "knn",
        })
    }
}

impl FromStr for ClassifierKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "svm" => Ok(ClassifierKind::Svm),
            "knn" => Ok(ClassifierKind::Knn),
            other => Err(Error::InvalidConfig(format!(
                "unknown classifier {other:?} (expected svm or knn)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    pub recipe: FeatureRecipe,
    pub classifier: ClassifierKind,
    pub mfcc: MfccConfig,
    pub svm_lambda: f64,
    pub svm_epochs: usize,
    pub knn_k: usize,
    pub seed: u64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            recipe: FeatureRecipe::DwtMfcc {
                wavelet: "db4".into(),
                stages: 2,
            },
            classifier: ClassifierKind::Svm,
            mfcc: MfccConfig::default(),
            svm_lambda: DEFAULT_LAMBDA,
            svm_epochs: DEFAULT_SVM_EPOCHS,
            knn_k: DEFAULT_KNN_K,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Classifier {
    Svm(SvmModel),
    Knn(KnnModel),
}

/// Feature recipe, captured standardization and trained classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineModel {
    pub format_version: u32,
    pub config: BaselineConfig,
    pub standardizer: Standardizer,
    pub classifier: Classifier,
}

impl BaselineModel {
    /// Report scope name, e.g. `baseline_svm`.
    pub fn name(&self) -> String {
        format!("baseline_{}", self.config.classifier)
    }

    /// Train on an already extracted (unstandardized) feature matrix.
    pub fn fit(cfg: &BaselineConfig, raw: &FeatureMatrix) -> Result<BaselineModel> {
        raw.check_both_classes()?;
        let standardizer = Standardizer::fit(raw)?;
        let data = standardizer.apply_matrix(raw)?;
        let classifier = match cfg.classifier {
            ClassifierKind::Svm => Classifier::Svm(train_linear_svm(&data, cfg.svm_lambda, cfg.svm_epochs, cfg.seed)?),
            ClassifierKind::Knn => Classifier::Knn(KnnModel::new(data, cfg.knn_k)?),
        };
        Ok(BaselineModel {
            format_version: BASELINE_FORMAT_VERSION,
            config: cfg.clone(),
            standardizer,
            classifier,
        })
    }

    pub fn train(cfg: &BaselineConfig, clips: &[Clip], labels: &[Label]) -> Result<BaselineModel> {
        let raw = cfg.recipe.extract_all(clips, labels, &cfg.mfcc)?;
        Self::fit(cfg, &raw)
    }

    /// Label plus a score that increases with up-call confidence (the SVM
    /// margin, or the up-call fraction of the neighbors).
    pub fn predict_features(&self, raw: &[f64]) -> Result<(Label, f64)> {
        let x = self.standardizer.apply(raw)?;
        match &self.classifier {
            Classifier::Svm(m) => svm_predict(m, &x),
            Classifier::Knn(m) => knn_predict(m, &x),
        }
    }

    pub fn predict(&self, clip: &Clip) -> Result<(Label, f64)> {
        self.predict_features(&self.config.recipe.extract(clip, &self.config.mfcc)?.values)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(BASELINE_FILE);
        let text = serde_json::to_string(self).expect("baseline model serializes");
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: &Path) -> Result<BaselineModel> {
        let path = dir.join(BASELINE_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let m: BaselineModel =
            serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        if m.format_version != BASELINE_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "{}: format version {} (expected {BASELINE_FORMAT_VERSION})",
                path.display(),
                m.format_version
            )));
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn matrix(rows: Vec<Vec<f64>>) -> FeatureMatrix {
        let n = rows.len();
        FeatureMatrix::new(rows, (0..n).map(|i| Label::from_index(i % 2)).collect()).unwrap()
    }

    #[test]
    fn standardize_examples() {
        let m = matrix(vec![vec![1.0, 7.0], vec![3.0, 7.0]]);
        let s = Standardizer::fit(&m).unwrap();
        assert_eq!(s.apply(&[1.0, 7.0]).unwrap(), vec![-1.0, 7.0]);
        assert_eq!(s.apply(&[3.0, 7.0]).unwrap(), vec![1.0, 7.0]);
        assert!(Standardizer::fit(&matrix(vec![vec![1.0]])).is_err());
    }

    #[test]
    fn standardized_columns_are_unit() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = matrix((0..30).map(|_| vec![rng.random_range(-5.0..9.0), rng.random::<f64>() * 1e3]).collect());
        let s = Standardizer::fit(&m).unwrap();
        let z = s.apply_matrix(&m).unwrap();
        for c in 0..2 {
            let col: Vec<f64> = z.rows.iter().map(|r| r[c]).collect();
            let mean = col.iter().sum::<f64>() / 30.0;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 30.0;
            assert!(mean.abs() < 1e-12 && (var - 1.0).abs() < 1e-12);
        }
        assert_eq!(s.apply_matrix(&m).unwrap(), z);
    }

    #[test]
    fn recipe_parsing() {
        assert_eq!("mfcc".parse::<FeatureRecipe>().unwrap(), FeatureRecipe::Mfcc);
        let r: FeatureRecipe = "dwt:db4:2+mfcc".parse().unwrap();
        assert_eq!(r.to_string(), "dwt:db4:2+mfcc");
        for bad in ["dwt:db99:2+mfcc", "dwt:db4:0+mfcc", "dwt:db4+mfcc", "spectral", "dwt:db4:x+mfcc"] {
            let e = bad.parse::<FeatureRecipe>().unwrap_err();
            assert!(e.is_validation(), "{bad}: {e}");
        }
    }

    #[test]
    fn doubling_features_keeps_predictions() {
        for seed in 0..5u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rows: Vec<Vec<f64>> = (0..20)
                .map(|i| {
                    let off = if i % 2 == 1 { 2.0 } else { -2.0 };
                    vec![off + rng.random_range(-0.5..0.5), rng.random_range(-1.0..1.0)]
                })
                .collect();
            let m = matrix(rows.clone());
            let doubled = matrix(rows.iter().map(|r| r.iter().map(|v| 2.0 * v).collect()).collect());
            let cfg = BaselineConfig {
                svm_epochs: 20,
                seed,
                ..BaselineConfig::default()
            };
            let a = BaselineModel::fit(&cfg, &m).unwrap();
            let b = BaselineModel::fit(&cfg, &doubled).unwrap();
            for (r, d) in m.rows.iter().zip(&doubled.rows) {
                assert_eq!(a.predict_features(r).unwrap().0, b.predict_features(d).unwrap().0);
            }
        }
    }

    #[test]
    fn prediction_through_pipeline_matches_manual_standardization() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = matrix((0..16).map(|i| vec![i as f64 + rng.random::<f64>(), 3.0 * rng.random::<f64>()]).collect());
        let model = BaselineModel::fit(&BaselineConfig::default(), &m).unwrap();
        let Classifier::Svm(svm) = &model.classifier else { panic!("svm expected") };
        for r in &m.rows {
            let z = model.standardizer.apply(r).unwrap();
            assert_eq!(model.predict_features(r).unwrap(), svm_predict(svm, &z).unwrap());
        }
    }

    #[test]
    fn save_load_round_trip() {
        let m = matrix(vec![vec![0.0, 1.0], vec![1.0, 0.5], vec![0.2, 0.9], vec![1.3, 0.1]]);
        let cfg = BaselineConfig {
            classifier: ClassifierKind::Knn,
            knn_k: 3,
            ..BaselineConfig::default()
        };
        let model = BaselineModel::fit(&cfg, &m).unwrap();
        let dir = tempfile::tempdir().unwrap();
        model.save(dir.path()).unwrap();
        assert_eq!(BaselineModel::load(dir.path()).unwrap(), model);
    }
}
