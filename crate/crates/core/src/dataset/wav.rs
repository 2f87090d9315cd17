use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::AudioSignal;
use crate::error::{Error, Result};

/// Read a PCM WAV file (16-bit integer or 32-bit float) and return its first
/// channel. Integer samples are scaled by 1/32768, so -32768 maps to -1.0.
pub fn read_wav(path: &Path) -> Result<AudioSignal> {
    let unreadable = |e: hound::Error| Error::UnreadableWav {
        path: path.to_path_buf(),
        reason: e.to_string(),
    };
    let reader = WavReader::open(path).map_err(unreadable)?;
    let spec = reader.spec();
    let channels = spec.channels.max(1) as usize;
    let samples: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .step_by(channels)
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<std::result::Result<_, _>>()
            .map_err(unreadable)?,
        (SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .step_by(channels)
            .map(|s| s.map(|v| v as f64))
            .collect::<std::result::Result<_, _>>()
            .map_err(unreadable)?,
        (fmt, bits) => {
            return Err(Error::UnsupportedEncoding {
                path: path.to_path_buf(),
                encoding: format!("{bits}-bit {fmt:?}"),
            })
        }
    };
    if samples.is_empty() {
        return Err(Error::EmptyAudio(path.to_path_buf()));
    }
    AudioSignal::new(samples, spec.sample_rate)
}

/// Write mono 16-bit PCM; samples are clamped to [-1, 1) before quantizing.
pub fn write_wav_i16(path: &Path, samples: &[f64], sample_rate_hz: u32) -> Result<()> {
    let spec = WavSpec {
        channels: 1,
        sample_rate: sample_rate_hz,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let fail = |e: hound::Error| Error::UnreadableWav {
        path: path.to_path_buf(),
        reason: e.to_string(),
    };
    let mut w = WavWriter::create(path, spec).map_err(fail)?;
    for &s in samples {
        let q = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        w.write_sample(q).map_err(fail)?;
    }
    w.finalize().map_err(fail)
}

/// Write mono 32-bit float PCM.
pub fn write_wav_f32(path: &Path, samples: &[f64], sample_rate_hz: u32) -> Result<()> {
    let spec = WavSpec {
        channels: 1,
        sample_rate: sample_rate_hz,
        bits_per_sample: 32,
        sample_format: SampleFormat::Float,
    };
    let fail = |e: hound::Error| Error::UnreadableWav {
        path: path.to_path_buf(),
        reason: e.to_string(),
    };
    let mut w = WavWriter::create(path, spec).map_err(fail)?;
    for &s in samples {
        w.write_sample(s as f32).map_err(fail)?;
    }
    w.finalize().map_err(fail)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_raw_i16(path: &Path, channels: u16, rate: u32, data: &[i16]) {
        let spec = WavSpec {
            channels,
            sample_rate: rate,
            bits_per_sample: 16,
            sample_format: SampleFormat::Int,
        };
        let mut w = WavWriter::create(path, spec).unwrap();
        for &s in data {
            w.write_sample(s).unwrap();
        }
        w.finalize().unwrap();
    }

    #[test]
    fn reads_mono_i16() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.wav");
        let data: Vec<i16> = (0..4000).map(|i| (i % 200) as i16 * 10).collect();
        write_raw_i16(&p, 1, 2000, &data);
        let s = read_wav(&p).unwrap();
        assert_eq!(s.samples.len(), 4000);
        assert_eq!(s.sample_rate_hz, 2000);
        assert_eq!(s.samples[10], 100.0 / 32768.0);
    }

    #[test]
    fn zeros_and_extremes() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("z.wav");
        write_raw_i16(&p, 1, 2000, &[0; 16]);
        assert!(read_wav(&p).unwrap().samples.iter().all(|&v| v == 0.0));

        let p = dir.path().join("m.wav");
        write_raw_i16(&p, 1, 2000, &[-32768, 32767]);
        let s = read_wav(&p).unwrap();
        assert_eq!(s.samples[0], -1.0);
    }

    #[test]
    fn takes_first_channel() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("st.wav");
        write_raw_i16(&p, 2, 1000, &[100, -5, 200, -5, 300, -5]);
        let s = read_wav(&p).unwrap();
        assert_eq!(s.samples.len(), 3);
        assert_eq!(s.samples[2], 300.0 / 32768.0);
    }

    #[test]
    fn float_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.wav");
        let x = vec![0.25, -0.5, 0.125, 1.5];
        write_wav_f32(&p, &x, 2000).unwrap();
        assert_eq!(read_wav(&p).unwrap().samples, x);
    }

    #[test]
    fn distinct_errors() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("nope.wav");
        assert!(matches!(read_wav(&missing), Err(Error::UnreadableWav { .. })));

        let garbage = dir.path().join("g.wav");
        std::fs::write(&garbage, b"definitely not a riff file").unwrap();
        assert!(matches!(read_wav(&garbage), Err(Error::UnreadableWav { .. })));

        let p8 = dir.path().join("8.wav");
        let spec = WavSpec {
            channels: 1,
            sample_rate: 2000,
            bits_per_sample: 8,
            sample_format: SampleFormat::Int,
        };
        let mut w = WavWriter::create(&p8, spec).unwrap();
        w.write_sample(3i8).unwrap();
        w.finalize().unwrap();
        assert!(matches!(read_wav(&p8), Err(Error::UnsupportedEncoding { .. })));

        let empty = dir.path().join("e.wav");
        write_raw_i16(&empty, 1, 2000, &[]);
        assert!(matches!(read_wav(&empty), Err(Error::EmptyAudio(_))));
    }
}
