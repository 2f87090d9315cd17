//! Mel-frequency cepstral coefficients with mean/std pooling over frames.

use std::f64::consts::PI;

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use super::stft::{frame_count, hann};
use super::FeatureVector;
use crate::dataset::Clip;
use crate::error::{Error, Result};

/// Floor applied to mel energies before the log.
pub const MEL_LOG_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MfccConfig {
    pub n_mels: usize,
    pub n_coeffs: usize,
    pub window_len: usize,
    pub hop: usize,
    pub f_min_hz: f64,
    pub f_max_hz: f64,
}

impl Default for MfccConfig {
    fn default() -> Self {
        MfccConfig {
            n_mels: 20,
            n_coeffs: 12,
            window_len: 256,
            hop: 128,
            f_min_hz: 20.0,
            f_max_hz: 1000.0,
        }
    }
}

impl MfccConfig {
    pub fn validate(&self, sample_rate_hz: f64) -> Result<()> {
        if self.n_coeffs == 0 || self.n_coeffs > self.n_mels {
            return Err(Error::InvalidConfig(format!(
                "mfcc needs 1 <= n_coeffs ({}) <= n_mels ({})",
                self.n_coeffs, self.n_mels
            )));
        }
        if self.window_len < 2 || self.hop == 0 {
            return Err(Error::InvalidConfig("mfcc window must be >= 2 and hop >= 1".into()));
        }
        let nyquist = sample_rate_hz / 2.0;
        if !(0.0 <= self.f_min_hz && self.f_min_hz < self.f_max_hz && self.f_max_hz <= nyquist) {
            return Err(Error::InvalidConfig(format!(
                "mfcc band {}..{} Hz must lie inside 0..{nyquist} Hz",
                self.f_min_hz, self.f_max_hz
            )));
        }
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        2 * self.n_coeffs
    }
}

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular filters with edges evenly spaced on the mel scale, evaluated at
/// each FFT bin's centre frequency. Rows are filters, columns bins
/// `0..=fft_len/2`.
pub fn mel_filterbank(
    n_mels: usize,
    fft_len: usize,
    sample_rate_hz: f64,
    f_min_hz: f64,
    f_max_hz: f64,
) -> Vec<Vec<f64>> {
    let (lo, hi) = (hz_to_mel(f_min_hz), hz_to_mel(f_max_hz));
    let edges: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (n_mels + 1) as f64))
        .collect();
    let bins = fft_len / 2 + 1;
    (0..n_mels)
        .map(|m| {
            let (l, c, r) = (edges[m], edges[m + 1], edges[m + 2]);
            (0..bins)
                .map(|k| {
                    let f = k as f64 * sample_rate_hz / fft_len as f64;
                    if f <= l || f >= r {
                        0.0
                    } else if f <= c {
                        (f - l) / (c - l)
                    } else {
                        (r - f) / (r - c)
                    }
                })
                .collect()
        })
        .collect()
}

/// Natural-log mel energies per frame.
pub fn log_mel_frames(
    samples: &[f64],
    sample_rate_hz: f64,
    cfg: &MfccConfig,
) -> Result<Vec<Vec<f64>>> {
    cfg.validate(sample_rate_hz)?;
    let frames = frame_count(samples.len(), cfg.window_len, cfg.hop);
    if frames == 0 {
        return Err(Error::InvalidInput(format!(
            "signal of {} samples is shorter than one {}-sample mfcc window",
            samples.len(),
            cfg.window_len
        )));
    }
    let n = cfg.window_len;
    let win = hann(n);
    let bank = mel_filterbank(cfg.n_mels, n, sample_rate_hz, cfg.f_min_hz, cfg.f_max_hz);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let mut buf = vec![Complex::new(0.0, 0.0); n];
    let mut out = Vec::with_capacity(frames);
    for f in 0..frames {
        let start = f * cfg.hop;
        for (i, b) in buf.iter_mut().enumerate() {
            *b = Complex::new(samples[start + i] * win[i], 0.0);
        }
        fft.process(&mut buf);
        let power: Vec<f64> = buf[..n / 2 + 1].iter().map(|c| c.norm_sqr()).collect();
        out.push(
            bank.iter()
                .map(|filt| {
                    let e: f64 = filt.iter().zip(&power).map(|(w, p)| w * p).sum();
                    e.max(MEL_LOG_FLOOR).ln()
                })
                .collect(),
        );
    }
    Ok(out)
}

/// Orthonormal DCT-II, first `keep` coefficients.
pub fn dct2(x: &[f64], keep: usize) -> Vec<f64> {
    let m = x.len() as f64;
    (0..keep)
        .map(|k| {
            let s = if k == 0 { (1.0 / m).sqrt() } else { (2.0 / m).sqrt() };
            s * x
                .iter()
                .enumerate()
                .map(|(i, v)| v * (PI * k as f64 * (2 * i + 1) as f64 / (2.0 * m)).cos())
                .sum::<f64>()
        })
        .collect()
}

/// Cepstral coefficients per frame.
pub fn mfcc_frames(samples: &[f64], sample_rate_hz: f64, cfg: &MfccConfig) -> Result<Vec<Vec<f64>>> {
    Ok(log_mel_frames(samples, sample_rate_hz, cfg)?
        .iter()
        .map(|e| dct2(e, cfg.n_coeffs))
        .collect())
}

/// Per-coefficient mean followed by per-coefficient population std.
///
/// Statistics are accumulated relative to the first frame, so identical
/// frames give that frame back as the mean and an exact zero std.
pub fn pool_mean_std(frames: &[Vec<f64>]) -> Vec<f64> {
    let d = frames[0].len();
    let n = frames.len() as f64;
    let mut mean = Vec::with_capacity(d);
    let mut std = Vec::with_capacity(d);
    for j in 0..d {
        let pivot = frames[0][j];
        let shift = frames.iter().map(|f| f[j] - pivot).sum::<f64>() / n;
        let var = frames
            .iter()
            .map(|f| (f[j] - pivot - shift).powi(2))
            .sum::<f64>()
            / n;
        mean.push(pivot + shift);
        std.push(var.sqrt());
    }
    [mean, std].concat()
}

/// Pooled MFCC vector of dimension `2 * n_coeffs`.
pub fn mfcc(clip: &Clip, cfg: &MfccConfig) -> Result<FeatureVector> {
    mfcc_samples(&clip.samples, clip.sample_rate_hz as f64, cfg)
}

pub(crate) fn mfcc_samples(
    samples: &[f64],
    sample_rate_hz: f64,
    cfg: &MfccConfig,
) -> Result<FeatureVector> {
    let frames = mfcc_frames(samples, sample_rate_hz, cfg)?;
    FeatureVector::new(pool_mean_std(&frames))
}
