use std::f64::consts::PI;

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use super::{Image, Matrix};
use crate::dataset::Clip;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    Hann,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrogramConfig {
    pub window_len: usize,
    pub hop: usize,
    pub fft_len: usize,
    pub window: WindowKind,
    pub log_floor: f64,
}

impl Default for SpectrogramConfig {
    fn default() -> Self {
        SpectrogramConfig {
            window_len: 256,
            hop: 64,
            fft_len: 256,
            window: WindowKind::Hann,
            log_floor: 1e-10,
        }
    }
}

impl SpectrogramConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0 < self.hop && self.hop <= self.window_len && self.window_len <= self.fft_len) {
            return Err(Error::InvalidConfig(format!(
                "spectrogram needs 0 < hop ({}) <= window ({}) <= fft ({})",
                self.hop, self.window_len, self.fft_len
            )));
        }
        if !(self.log_floor > 0.0) {
            return Err(Error::InvalidConfig("spectrogram log_floor must be > 0".into()));
        }
        Ok(())
    }
}

/// Periodic Hann window.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

/// Number of full frames that fit in `len` samples.
pub fn frame_count(len: usize, window_len: usize, hop: usize) -> usize {
    if len < window_len {
        0
    } else {
        1 + (len - window_len) / hop
    }
}

/// Magnitude spectra of Hann-windowed frames, one row per frame with
/// `fft_len / 2 + 1` bins (DC first).
pub fn stft_magnitudes(samples: &[f64], cfg: &SpectrogramConfig) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    let frames = frame_count(samples.len(), cfg.window_len, cfg.hop);
    if frames == 0 {
        return Err(Error::InvalidInput(format!(
            "clip of {} samples is shorter than one {}-sample window",
            samples.len(),
            cfg.window_len
        )));
    }
    let win = match cfg.window {
        WindowKind::Hann => hann(cfg.window_len),
    };
    let fft = FftPlanner::<f64>::new().plan_fft_forward(cfg.fft_len);
    let bins = cfg.fft_len / 2 + 1;
    let mut buf = vec![Complex::new(0.0, 0.0); cfg.fft_len];
    let mut out = Vec::with_capacity(frames);
    for f in 0..frames {
        let start = f * cfg.hop;
        buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
        for (i, (b, w)) in buf.iter_mut().zip(&win).enumerate() {
            b.re = samples[start + i] * w;
        }
        fft.process(&mut buf);
        out.push(buf[..bins].iter().map(|c| c.norm()).collect());
    }
    Ok(out)
}

/// Log-magnitude spectrogram as a 100x100 image, low frequencies at the
/// bottom row.
pub fn stft_spectrogram(clip: &Clip, cfg: &SpectrogramConfig) -> Result<Image> {
    let mags = stft_magnitudes(&clip.samples, cfg)?;
    let bins = mags[0].len();
    // A single frame is stretched across the time axis.
    let cols = mags.len().max(2);
    let mut m = Matrix::zeros(bins, cols);
    for c in 0..cols {
        let frame = &mags[c.min(mags.len() - 1)];
        for (k, &v) in frame.iter().enumerate() {
            m.data[(bins - 1 - k) * cols + c] = v.max(cfg.log_floor).log10();
        }
    }
    Image::from_matrix(&m)
}
