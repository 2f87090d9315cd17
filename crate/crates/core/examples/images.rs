//! Turn one synthetic up-call and one noise clip into the two 100x100 model
//! inputs (STFT spectrogram, Morlet scalogram) and save them as PGM files.
//!
//!     cargo run --example images -- /tmp/narw-images

use std::fs;
use std::path::PathBuf;

use mmdl::dataset::{synth_noise, synth_upcall, SynthConfig};
use mmdl::features::{ImageConfig, ImagePipeline};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> mmdl::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "images-demo".into()));
    fs::create_dir_all(&dir).map_err(|e| mmdl::Error::io(&dir, e))?;
    let cfg = SynthConfig {
        snr_db: 6.0,
        ..SynthConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pipe = ImagePipeline::new(&ImageConfig::default(), cfg.sample_rate_hz, cfg.len())?;
    for (name, clip) in [("upcall", synth_upcall(&cfg, &mut rng)?), ("noise", synth_noise(&cfg, &mut rng)?)] {
        let (spec, scal) = pipe.images(&clip)?;
        spec.write_pgm(&dir.join(format!("{name}_spectrogram.pgm")))?;
        scal.write_pgm(&dir.join(format!("{name}_scalogram.pgm")))?;
        let mean = |p: &[f64]| p.iter().sum::<f64>() / p.len() as f64;
        println!(
            "{name:>6}: spectrogram mean {:.3}, scalogram mean {:.3}",
            mean(spec.pixels()),
            mean(scal.pixels())
        );
    }
    println!("wrote 4 images to {}", dir.display());
    Ok(())
}
