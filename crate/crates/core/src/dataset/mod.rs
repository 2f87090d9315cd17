//! Audio ingestion, synthetic up-call/noise generation and image augmentation.

mod augment;
mod manifest;
mod synth;
mod synthset;
mod wav;

pub use augment::{apply_affine, augment_image, augment_set, AffineParams, AugmentConfig};
pub use manifest::{Manifest, ManifestEntry};
pub use synth::{clean_upcall, synth_noise, synth_upcall, NoiseKind, SynthConfig};
pub use synthset::{synth_set, write_dataset, SynthSetConfig, MANIFEST_FILE};
pub use wav::{read_wav, write_wav_f32, write_wav_i16};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default clip length in seconds.
pub const DEFAULT_DURATION_S: f64 = 2.0;
/// Default working sample rate.
pub const DEFAULT_SAMPLE_RATE_HZ: u32 = 2000;

/// The two detection classes. The discriminant is the class index used in
/// posterior vectors, so posteriors are laid out as `[noise, upcall]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Noise = 0,
    Upcall = 1,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Noise, Label::Upcall];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Label {
        if i == 1 {
            Label::Upcall
        } else {
            Label::Noise
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Noise => "noise",
            Label::Upcall => "upcall",
        }
    }

    pub fn is_upcall(self) -> bool {
        self == Label::Upcall
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "upcall" => Ok(Label::Upcall),
            "noise" => Ok(Label::Noise),
            other => Err(Error::InvalidInput(format!(
                "unknown label {other:?} (expected upcall or noise)"
            ))),
        }
    }
}

/// A mono audio stream of arbitrary length.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioSignal {
    pub samples: Vec<f64>,
    pub sample_rate_hz: u32,
}

impl AudioSignal {
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Result<Self> {
        if sample_rate_hz == 0 {
            return Err(Error::InvalidInput("sample rate must be positive".into()));
        }
        if samples.is_empty() {
            return Err(Error::InvalidInput("audio signal has no samples".into()));
        }
        Ok(AudioSignal {
            samples,
            sample_rate_hz,
        })
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }
}

/// A fixed-duration segment, the unit of detection.
#[derive(Debug, Clone, PartialEq)]
pub struct Clip {
    pub samples: Vec<f64>,
    pub sample_rate_hz: u32,
    pub duration_s: f64,
}

impl Clip {
    /// Build a clip, checking that the sample count matches the duration.
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32, duration_s: f64) -> Result<Self> {
        let expected = clip_len(duration_s, sample_rate_hz);
        if sample_rate_hz == 0 || samples.len() != expected {
            return Err(Error::InvalidInput(format!(
                "clip of {} samples does not match {duration_s} s at {sample_rate_hz} Hz",
                samples.len()
            )));
        }
        Ok(Clip {
            samples,
            sample_rate_hz,
            duration_s,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Number of samples in a clip of `duration_s` seconds.
pub fn clip_len(duration_s: f64, sample_rate_hz: u32) -> usize {
    (duration_s * sample_rate_hz as f64).round() as usize
}

/// Linear-interpolation resampler.
///
/// Output sample `i` sits at time `i / target_hz`; positions past the last
/// input sample hold the last value.
pub fn resample_linear(signal: &AudioSignal, target_hz: u32) -> Result<AudioSignal> {
    if target_hz == 0 {
        return Err(Error::InvalidInput("target sample rate must be positive".into()));
    }
    if target_hz == signal.sample_rate_hz {
        return Ok(signal.clone());
    }
    let src = &signal.samples;
    let ratio = signal.sample_rate_hz as f64 / target_hz as f64;
    let out_len =
        (src.len() as f64 * target_hz as f64 / signal.sample_rate_hz as f64).round() as usize;
    let last = src.len() - 1;
    let samples = (0..out_len)
        .map(|i| {
            let pos = i as f64 * ratio;
            let i0 = pos.floor() as usize;
            if i0 >= last {
                return src[last];
            }
            let frac = pos - i0 as f64;
            src[i0] + (src[i0 + 1] - src[i0]) * frac
        })
        .collect();
    AudioSignal::new(samples, target_hz)
}

/// Cut `duration_s` seconds starting at `start_s`, zero-padding past the end.
pub fn segment_clip(signal: &AudioSignal, start_s: f64, duration_s: f64) -> Result<Clip> {
    if !(start_s >= 0.0) || !start_s.is_finite() {
        return Err(Error::InvalidInput(format!("start time {start_s} must be >= 0")));
    }
    if !(duration_s > 0.0) {
        return Err(Error::InvalidInput(format!("duration {duration_s} must be > 0")));
    }
    let rate = signal.sample_rate_hz;
    let start = (start_s * rate as f64).round() as usize;
    if start >= signal.samples.len() {
        return Err(Error::InvalidInput(format!(
            "start {start_s} s is beyond the end of a {:.3} s signal",
            signal.duration_s()
        )));
    }
    let n = clip_len(duration_s, rate);
    let mut samples = vec![0.0; n];
    let avail = (signal.samples.len() - start).min(n);
    samples[..avail].copy_from_slice(&signal.samples[start..start + avail]);
    Clip::new(samples, rate, duration_s)
}

/// Load a WAV file as a clip: first channel, resampled to `rate`, first
/// `duration_s` seconds (zero-padded when shorter).
pub fn load_clip(path: &std::path::Path, rate: u32, duration_s: f64) -> Result<Clip> {
    let sig = read_wav(path)?;
    let sig = resample_linear(&sig, rate)?;
    segment_clip(&sig, 0.0, duration_s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig(samples: Vec<f64>, rate: u32) -> AudioSignal {
        AudioSignal::new(samples, rate).unwrap()
    }

    #[test]
    fn resample_identity() {
        let s = sig(vec![0.1, -0.4, 0.3, 0.9], 2000);
        assert_eq!(resample_linear(&s, 2000).unwrap(), s);
    }

    #[test]
    fn resample_constant_stays_constant() {
        let s = sig(vec![0.5; 37], 3000);
        for target in [1000, 2000, 4410, 8000] {
            let r = resample_linear(&s, target).unwrap();
            assert_eq!(r.samples.len(), (37.0 * target as f64 / 3000.0).round() as usize);
            assert!(r.samples.iter().all(|&v| (v - 0.5).abs() < 1e-15));
        }
    }

    #[test]
    fn resample_ramp_halves() {
        let s = sig(vec![0.0, 1.0, 2.0, 3.0], 4);
        let r = resample_linear(&s, 2).unwrap();
        assert_eq!(r.samples, vec![0.0, 2.0]);
        assert_eq!(r.sample_rate_hz, 2);
    }

    #[test]
    fn resample_rejects_zero_rate() {
        let s = sig(vec![0.0; 4], 4);
        assert!(resample_linear(&s, 0).is_err());
    }

    #[test]
    fn segment_takes_prefix() {
        let s = sig((0..8000).map(|i| i as f64).collect(), 2000);
        let c = segment_clip(&s, 0.0, 2.0).unwrap();
        assert_eq!(c.samples.len(), 4000);
        assert_eq!(c.samples[3999], 3999.0);
    }

    #[test]
    fn segment_zero_pads_short_sources() {
        let s = sig(vec![1.0; 2000], 2000);
        let c = segment_clip(&s, 0.0, 2.0).unwrap();
        assert_eq!(c.samples.len(), 4000);
        assert!(c.samples[..2000].iter().all(|&v| v == 1.0));
        assert!(c.samples[2000..].iter().all(|&v| v == 0.0));

        let s = sig(vec![1.0; 8000], 2000);
        let c = segment_clip(&s, 3.5, 2.0).unwrap();
        assert_eq!(c.samples.len(), 4000);
        assert!(c.samples[..1000].iter().all(|&v| v == 1.0));
        assert!(c.samples[1000..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn segment_rejects_start_past_end() {
        let s = sig(vec![1.0; 8000], 2000);
        assert!(segment_clip(&s, 4.0, 2.0).is_err());
        assert!(segment_clip(&s, -0.1, 2.0).is_err());
    }

    #[test]
    fn label_round_trip() {
        for l in Label::ALL {
            assert_eq!(l.as_str().parse::<Label>().unwrap(), l);
            assert_eq!(Label::from_index(l.index()), l);
        }
        assert!("whale".parse::<Label>().is_err());
    }
}
