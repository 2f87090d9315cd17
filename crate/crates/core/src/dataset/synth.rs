//! Synthetic up-calls (linear FM sweeps) and background noise.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use super::{clip_len, Clip, DEFAULT_DURATION_S, DEFAULT_SAMPLE_RATE_HZ};
use crate::error::{Error, Result};

/// Peak amplitude of each synthetic sweep.
pub const CHIRP_AMPLITUDE: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    White,
    Pink,
    Transient,
}

impl NoiseKind {
    pub const ALL: [NoiseKind; 3] = [NoiseKind::White, NoiseKind::Pink, NoiseKind::Transient];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub f_start_hz: f64,
    pub f_end_hz: f64,
    pub duration_s: f64,
    pub sample_rate_hz: u32,
    pub snr_db: f64,
    pub chirp_count: usize,
    pub noise_kind: NoiseKind,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            f_start_hz: 50.0,
            f_end_hz: 250.0,
            duration_s: DEFAULT_DURATION_S,
            sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
            snr_db: 10.0,
            chirp_count: 1,
            noise_kind: NoiseKind::White,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let nyquist = self.sample_rate_hz as f64 / 2.0;
        if self.sample_rate_hz == 0 {
            return Err(Error::InvalidConfig("synth sample rate must be positive".into()));
        }
        if !(0.0 < self.f_start_hz && self.f_start_hz < self.f_end_hz && self.f_end_hz < nyquist)
        {
            return Err(Error::InvalidConfig(format!(
                "sweep {}..{} Hz must satisfy 0 < start < end < Nyquist ({nyquist} Hz)",
                self.f_start_hz, self.f_end_hz
            )));
        }
        if !self.snr_db.is_finite() {
            return Err(Error::InvalidConfig("snr_db must be finite".into()));
        }
        if self.chirp_count == 0 {
            return Err(Error::InvalidConfig("chirp_count must be >= 1".into()));
        }
        if !(self.duration_s > 0.0) || clip_len(self.duration_s, self.sample_rate_hz) < 2 {
            return Err(Error::InvalidConfig("duration too short".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        clip_len(self.duration_s, self.sample_rate_hz)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// The noise-free sweep train. Each of the `chirp_count` sweeps occupies an
/// equal consecutive slice of the clip and rises linearly from `f_start_hz`
/// to `f_end_hz` with a random starting phase.
pub fn clean_upcall<R: Rng + ?Sized>(cfg: &SynthConfig, rng: &mut R) -> Result<Vec<f64>> {
    cfg.validate()?;
    let n = cfg.len();
    let fs = cfg.sample_rate_hz as f64;
    let mut out = vec![0.0; n];
    let per = n / cfg.chirp_count;
    for c in 0..cfg.chirp_count {
        let start = c * per;
        let end = if c + 1 == cfg.chirp_count { n } else { start + per };
        let span = (end - start) as f64 / fs;
        let sweep_rate = (cfg.f_end_hz - cfg.f_start_hz) / span;
        let phase0 = rng.random_range(0.0..2.0 * PI);
        for (i, v) in out[start..end].iter_mut().enumerate() {
            let t = i as f64 / fs;
            let phase = 2.0 * PI * (cfg.f_start_hz * t + 0.5 * sweep_rate * t * t) + phase0;
            *v += CHIRP_AMPLITUDE * phase.sin();
        }
    }
    Ok(out)
}

/// An up-call clip: the sweep train plus noise scaled so that
/// `rms(sweep) / rms(noise) == 10^(snr_db / 20)`.
pub fn synth_upcall<R: Rng + ?Sized>(cfg: &SynthConfig, rng: &mut R) -> Result<Clip> {
    let clean = clean_upcall(cfg, rng)?;
    let target_noise_rms = rms(&clean) / 10f64.powf(cfg.snr_db / 20.0);
    let noise = unit_noise(cfg.noise_kind, clean.len(), cfg.sample_rate_hz, rng);
    let samples = clean
        .iter()
        .zip(&noise)
        .map(|(s, n)| s + n * target_noise_rms)
        .collect();
    Clip::new(samples, cfg.sample_rate_hz, cfg.duration_s)
}

/// A noise-only clip at the level an up-call clip with the same `snr_db`
/// would carry.
pub fn synth_noise<R: Rng + ?Sized>(cfg: &SynthConfig, rng: &mut R) -> Result<Clip> {
    cfg.validate()?;
    let level = CHIRP_AMPLITUDE / 2f64.sqrt() / 10f64.powf(cfg.snr_db / 20.0);
    let samples = unit_noise(cfg.noise_kind, cfg.len(), cfg.sample_rate_hz, rng)
        .into_iter()
        .map(|v| v * level)
        .collect();
    Clip::new(samples, cfg.sample_rate_hz, cfg.duration_s)
}

pub(crate) fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

/// Noise of the requested colour with RMS exactly 1.
fn unit_noise<R: Rng + ?Sized>(kind: NoiseKind, n: usize, rate: u32, rng: &mut R) -> Vec<f64> {
    let mut x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    match kind {
        NoiseKind::White => {}
        NoiseKind::Pink => x = pink_from_white(&x),
        NoiseKind::Transient => {
            let clicks = rng.random_range(1..=3);
            // ~10 ms decaying broadband bursts well above the floor.
            let click_len = ((rate as f64 * 0.01).round() as usize).clamp(2, n);
            let decay = click_len as f64 / 4.0;
            for _ in 0..clicks {
                let pos = rng.random_range(0..=n - click_len);
                let amp = rng.random_range(6.0..12.0);
                for j in 0..click_len {
                    let g: f64 = rng.sample(StandardNormal);
                    x[pos + j] += amp * (-(j as f64) / decay).exp() * g;
                }
            }
        }
    }
    let r = rms(&x);
    if r > 0.0 {
        x.iter_mut().for_each(|v| *v /= r);
    }
    x
}

/// Shape a white sequence to a 1/f power spectrum.
fn pink_from_white(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut planner = FftPlanner::<f64>::new();
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, b) in buf.iter_mut().enumerate() {
        let f = k.min(n - k);
        if f == 0 {
            *b = Complex::new(0.0, 0.0);
        } else {
            *b /= (f as f64).sqrt();
        }
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf.iter().map(|c| c.re / n as f64).collect()
}
