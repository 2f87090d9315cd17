//! Generate a small labeled up-call / noise set and write it as WAVs plus a
//! manifest.
//!
//!     cargo run --example synth_dataset -- /tmp/narw-demo

use mmdl::dataset::{synth_set, write_dataset, Label, NoiseKind, SynthSetConfig};

fn main() -> mmdl::Result<()> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "synth-demo".into());
    let cfg = SynthSetConfig {
        n_upcall: 20,
        n_noise: 80,
        snr_db: (0.0, 10.0),
        noise_kinds: vec![NoiseKind::White, NoiseKind::Pink, NoiseKind::Transient],
        ..SynthSetConfig::default()
    };
    let clips = synth_set(&cfg, 42)?;
    let manifest = write_dataset(dir.as_ref(), &clips)?;
    println!(
        "{} clips in {dir}: {} up-calls, {} noise, {} samples each at {} Hz",
        manifest.len(),
        manifest.count(Label::Upcall),
        manifest.count(Label::Noise),
        clips[0].0.len(),
        clips[0].0.sample_rate_hz
    );
    Ok(())
}
