//! Morlet continuous wavelet transform and scalogram images.
//!
//! The wavelet at scale `s` (in samples) is
//! `psi_s[n] = (1/s) * pi^(-1/4) * exp(i * omega0 * n / s) * exp(-n^2 / (2 s^2))`,
//! truncated to `|n| <= ceil(4 s)`. The 1/s (L1) normalization keeps the
//! peak response to a unit sinusoid independent of scale, so the ridge of a
//! tone sits at the scale whose centre frequency `omega0 * fs / (2 pi s)`
//! matches the tone. Scales are chosen so these centre frequencies are
//! log-spaced over `[f_min_hz, f_max_hz]`.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::{num_complex::Complex, Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::{Image, Matrix};
use crate::dataset::Clip;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WaveletKind {
    Morlet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalogramConfig {
    pub wavelet: WaveletKind,
    pub omega0: f64,
    pub n_scales: usize,
    pub f_min_hz: f64,
    pub f_max_hz: f64,
    pub log_floor: f64,
}

impl Default for ScalogramConfig {
    fn default() -> Self {
        ScalogramConfig {
            wavelet: WaveletKind::Morlet,
            omega0: 6.0,
            n_scales: 100,
            f_min_hz: 30.0,
            f_max_hz: 500.0,
            log_floor: 1e-10,
        }
    }
}

impl ScalogramConfig {
    pub fn validate(&self, sample_rate_hz: u32) -> Result<()> {
        let nyquist = sample_rate_hz as f64 / 2.0;
        if self.n_scales < 2 {
            return Err(Error::InvalidConfig("scalogram needs at least 2 scales".into()));
        }
        if !(0.0 < self.f_min_hz && self.f_min_hz < self.f_max_hz && self.f_max_hz < nyquist) {
            return Err(Error::InvalidConfig(format!(
                "scalogram band {}..{} Hz must satisfy 0 < min < max < Nyquist ({nyquist} Hz)",
                self.f_min_hz, self.f_max_hz
            )));
        }
        if !(self.omega0 > 0.0) || !(self.log_floor > 0.0) {
            return Err(Error::InvalidConfig(
                "scalogram omega0 and log_floor must be > 0".into(),
            ));
        }
        Ok(())
    }

    /// Centre frequencies, ascending and log-spaced.
    pub fn frequencies(&self) -> Vec<f64> {
        let ratio = (self.f_max_hz / self.f_min_hz).ln();
        (0..self.n_scales)
            .map(|i| self.f_min_hz * (ratio * i as f64 / (self.n_scales - 1) as f64).exp())
            .collect()
    }

    /// Scale in samples whose centre frequency is `freq_hz`.
    pub fn scale_for(&self, freq_hz: f64, sample_rate_hz: u32) -> f64 {
        self.omega0 * sample_rate_hz as f64 / (2.0 * PI * freq_hz)
    }
}

/// Sampled Morlet wavelet at `scale` samples, indices `-half..=half`.
pub fn morlet_kernel(scale: f64, omega0: f64) -> Vec<Complex<f64>> {
    let half = (4.0 * scale).ceil() as isize;
    let norm = PI.powf(-0.25) / scale;
    (-half..=half)
        .map(|n| {
            let t = n as f64 / scale;
            let env = norm * (-0.5 * t * t).exp();
            Complex::from_polar(env, omega0 * t)
        })
        .collect()
}

/// Precomputed kernel spectra for a fixed (config, rate, clip length).
pub struct CwtPlan {
    cfg: ScalogramConfig,
    sample_rate_hz: u32,
    len: usize,
    padded: usize,
    kernels: Vec<(usize, Vec<Complex<f64>>)>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl CwtPlan {
    pub fn new(cfg: &ScalogramConfig, sample_rate_hz: u32, len: usize) -> Result<Self> {
        cfg.validate(sample_rate_hz)?;
        if len == 0 {
            return Err(Error::InvalidInput("cannot transform an empty clip".into()));
        }
        let raw: Vec<Vec<Complex<f64>>> = cfg
            .frequencies()
            .iter()
            .map(|&f| morlet_kernel(cfg.scale_for(f, sample_rate_hz), cfg.omega0))
            .collect();
        let longest = raw.iter().map(Vec::len).max().unwrap_or(1);
        let padded = (len + longest - 1).next_power_of_two();
        let mut planner = FftPlanner::<f64>::new();
        let forward = planner.plan_fft_forward(padded);
        let inverse = planner.plan_fft_inverse(padded);
        let kernels = raw
            .into_iter()
            .map(|k| {
                let half = k.len() / 2;
                let mut buf = vec![Complex::new(0.0, 0.0); padded];
                buf[..k.len()].copy_from_slice(&k);
                forward.process(&mut buf);
                (half, buf)
            })
            .collect();
        Ok(CwtPlan {
            cfg: cfg.clone(),
            sample_rate_hz,
            len,
            padded,
            kernels,
            forward,
            inverse,
        })
    }

    /// |CWT| per scale (ascending frequency), each row `len` samples long.
    pub fn magnitudes(&self, samples: &[f64]) -> Result<Vec<Vec<f64>>> {
        if samples.len() != self.len {
            return Err(Error::ShapeMismatch(format!(
                "plan built for {} samples, got {}",
                self.len,
                samples.len()
            )));
        }
        let mut spec = vec![Complex::new(0.0, 0.0); self.padded];
        for (s, &x) in spec.iter_mut().zip(samples) {
            s.re = x;
        }
        self.forward.process(&mut spec);
        let scale = 1.0 / self.padded as f64;
        let mut buf = vec![Complex::new(0.0, 0.0); self.padded];
        let mut out = Vec::with_capacity(self.kernels.len());
        for (half, k) in &self.kernels {
            for ((b, a), w) in buf.iter_mut().zip(&spec).zip(k) {
                *b = a * w;
            }
            self.inverse.process(&mut buf);
            out.push(
                buf[*half..*half + self.len]
                    .iter()
                    .map(|c| c.norm() * scale)
                    .collect(),
            );
        }
        Ok(out)
    }

    /// 100x100 log-magnitude scalogram, high frequencies on top.
    pub fn image(&self, clip: &Clip) -> Result<Image> {
        if clip.sample_rate_hz != self.sample_rate_hz {
            return Err(Error::ShapeMismatch(format!(
                "plan built for {} Hz, clip is {} Hz",
                self.sample_rate_hz, clip.sample_rate_hz
            )));
        }
        let mags = self.magnitudes(&clip.samples)?;
        let rows = mags.len();
        // Single-sample clips are stretched so the resize has two columns.
        let cols = self.len.max(2);
        let mut m = Matrix::zeros(rows, cols);
        for (i, row) in mags.iter().enumerate() {
            let r = rows - 1 - i;
            for c in 0..cols {
                m.data[r * cols + c] = row[c.min(self.len - 1)].max(self.cfg.log_floor).log10();
            }
        }
        Image::from_matrix(&m)
    }
}

/// One-shot scalogram; prefer [`CwtPlan`] when transforming many clips.
pub fn cwt_scalogram(clip: &Clip, cfg: &ScalogramConfig) -> Result<Image> {
    CwtPlan::new(cfg, clip.sample_rate_hz, clip.len())?.image(clip)
}
