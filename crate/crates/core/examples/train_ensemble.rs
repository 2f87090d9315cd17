//! Train a small CNN + SAE ensemble with a PatternNet on synthetic data,
//! save it as a bundle, reload it and score held-out clips.
//!
//!     cargo run --release --example train_ensemble

use mmdl::dataset::{synth_set, Label, SynthSetConfig};
use mmdl::eval::{evaluate_bundle, stratified_split};
use mmdl::features::ImageConfig;
use mmdl::fusion::FusionStrategy;
use mmdl::nn::ScgConfig;
use mmdl::pipeline::{image_sets, input_spec, train_mmdl, PatternNetSettings};
use mmdl::zoo::{CnnArchRange, EnsembleBundle, EnsembleConfig, SaeArchRange};

fn main() -> mmdl::Result<()> {
    let set = synth_set(
        &SynthSetConfig {
            n_upcall: 60,
            n_noise: 120,
            ..SynthSetConfig::default()
        },
        1,
    )?;
    let (clips, labels): (Vec<_>, Vec<Label>) = set.into_iter().unzip();
    let input = input_spec(2000, 2.0, &ImageConfig::default());
    let (spec, scal) = image_sets(&input, &clips, &labels)?;
    let (train, test) = stratified_split(&labels, 0.25, 1)?;

    let mut cfg = EnsembleConfig {
        n_cnn: 2,
        n_sae: 2,
        master_seed: 9,
        cnn_range: CnnArchRange {
            alpha: (2, 3),
            filters: (4, 8),
        },
        sae_range: SaeArchRange {
            depth: (2, 2),
            hidden: (100, 200),
        },
        ..EnsembleConfig::default()
    };
    cfg.cnn_train.epochs = 5;
    cfg.sae_pretrain.epochs = 5;
    cfg.sae_finetune.epochs = 5;
    cfg.augment.copies_per_image = 1;
    let pn = PatternNetSettings {
        k: 2,
        scg: ScgConfig::default(),
        holdout_fraction: 0.2,
    };
    let mut bundle = train_mmdl(&cfg, Some(&pn), &spec.select(&train), &scal.select(&train), &|m| println!("  {m}"))?;
    bundle.input = Some(input);

    let dir = std::env::temp_dir().join("mmdl-example-bundle");
    bundle.save(&dir)?;
    let bundle = EnsembleBundle::load(&dir)?;
    let (ts, tc) = (spec.select(&test), scal.select(&test));
    let report = evaluate_bundle(
        &bundle,
        &ts.images,
        &tc.images,
        &ts.labels,
        &[FusionStrategy::MajorityVote, FusionStrategy::UnweightedAverage, FusionStrategy::PatternNet { k: 2 }],
    )?;
    print!("{}", report.summary());
    println!("bundle saved in {}", dir.display());
    Ok(())
}
