//! Time-frequency images (spectrogram, scalogram) and classical feature
//! vectors (MFCC, DWT + MFCC).

mod cwt;
mod dwt;
mod image;
mod mfcc;
mod stft;
mod wavelets;

pub use cwt::{cwt_scalogram, morlet_kernel, CwtPlan, ScalogramConfig, WaveletKind};
pub use dwt::{dwt_decompose, dwt_step, idwt_step, DwtPyramid};
pub use image::{resize_bilinear, Image, Matrix, IMAGE_SIZE};
pub use mfcc::{
    dct2, hz_to_mel, log_mel_frames, mel_filterbank, mel_to_hz, mfcc, mfcc_frames,
    pool_mean_std, MfccConfig, MEL_LOG_FLOOR,
};
pub use stft::{frame_count, hann, stft_magnitudes, stft_spectrogram, SpectrogramConfig, WindowKind};
pub use wavelets::{WaveletFamily, WaveletSpec, FILTER_TABLE_VERSION, NAMES as WAVELET_NAMES};

use rayon::prelude::*;

use crate::dataset::Clip;
use crate::error::{Error, Result};

/// Fixed-length vector of finite features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature vector".into()));
        }
        Ok(FeatureVector { values })
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }
}

/// MFCC settings and sample rate applied to the stage-`stages` DWT
/// approximation: rate divided by `2^stages`, window and hop scaled the
/// same way, upper band edge clipped to the new Nyquist.
pub fn dwt_mfcc_config(
    mcfg: &MfccConfig,
    sample_rate_hz: f64,
    stages: usize,
) -> Result<(MfccConfig, f64)> {
    if stages == 0 {
        return Err(Error::InvalidInput(
            "dwt+mfcc needs at least one stage; use plain mfcc otherwise".into(),
        ));
    }
    let factor = (1usize << stages) as f64;
    let rate = sample_rate_hz / factor;
    let cfg = MfccConfig {
        window_len: ((mcfg.window_len as f64 / factor).round() as usize).max(2),
        hop: ((mcfg.hop as f64 / factor).round() as usize).max(1),
        f_max_hz: mcfg.f_max_hz.min(rate / 2.0),
        ..mcfg.clone()
    };
    Ok((cfg, rate))
}

/// MFCC of the final DWT approximation.
pub fn dwt_mfcc_features(
    clip: &Clip,
    wavelet: &WaveletSpec,
    stages: usize,
    mcfg: &MfccConfig,
) -> Result<FeatureVector> {
    let (cfg, rate) = dwt_mfcc_config(mcfg, clip.sample_rate_hz as f64, stages)?;
    let pyr = dwt_decompose(&clip.samples, wavelet, stages)?;
    mfcc::mfcc_samples(pyr.final_approximation(), rate, &cfg)
}

/// Spectrogram + scalogram settings for converting clips to image pairs.
#[derive(Debug, Clone, PartialEq, Default, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImageConfig {
    pub spectrogram: SpectrogramConfig,
    pub scalogram: ScalogramConfig,
}

/// Reusable converter from clips to (spectrogram, scalogram) pairs.
pub struct ImagePipeline {
    spec: SpectrogramConfig,
    cwt: CwtPlan,
    sample_rate_hz: u32,
    len: usize,
}

impl ImagePipeline {
    pub fn new(cfg: &ImageConfig, sample_rate_hz: u32, clip_len: usize) -> Result<Self> {
        cfg.spectrogram.validate()?;
        Ok(ImagePipeline {
            spec: cfg.spectrogram.clone(),
            cwt: CwtPlan::new(&cfg.scalogram, sample_rate_hz, clip_len)?,
            sample_rate_hz,
            len: clip_len,
        })
    }

    pub fn images(&self, clip: &Clip) -> Result<(Image, Image)> {
        if clip.sample_rate_hz != self.sample_rate_hz || clip.len() != self.len {
            return Err(Error::ShapeMismatch(format!(
                "pipeline expects {} samples at {} Hz, clip has {} at {} Hz",
                self.len,
                self.sample_rate_hz,
                clip.len(),
                clip.sample_rate_hz
            )));
        }
        Ok((stft_spectrogram(clip, &self.spec)?, self.cwt.image(clip)?))
    }

    /// Convert many clips, in parallel, preserving order.
    pub fn images_batch(&self, clips: &[Clip]) -> Result<Vec<(Image, Image)>> {
        clips.par_iter().map(|c| self.images(c)).collect()
    }
}
