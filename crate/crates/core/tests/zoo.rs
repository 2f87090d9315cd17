use mmdl::dataset::{synth_set, Label, SynthSetConfig};
use mmdl::features::ImageConfig;
use mmdl::nn::{ScgConfig, TrainConfig};
use mmdl::pipeline::{attach_patternnet, image_sets, input_spec};
use mmdl::zoo::{
    sample_cnn_arch, sample_sae_arch, train_ensemble, CnnArchRange, EnsembleBundle, EnsembleConfig, LabeledImages,
    SaeArchRange,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn images(n: usize, seed: u64) -> (LabeledImages, LabeledImages) {
    let cfg = SynthSetConfig {
        n_upcall: n,
        n_noise: n,
        ..SynthSetConfig::default()
    };
    let set = synth_set(&cfg, seed).unwrap();
    let (clips, labels): (Vec<_>, Vec<Label>) = set.into_iter().unzip();
    let input = input_spec(2000, 2.0, &ImageConfig::default());
    image_sets(&input, &clips, &labels).unwrap()
}

fn small_config(n_cnn: usize, n_sae: usize, seed: u64) -> EnsembleConfig {
    let quick = TrainConfig {
        epochs: 2,
        batch_size: 8,
        ..TrainConfig::default()
    };
    let mut cfg = EnsembleConfig {
        n_cnn,
        n_sae,
        master_seed: seed,
        cnn_range: CnnArchRange {
            alpha: (2, 3),
            filters: (2, 4),
        },
        sae_range: SaeArchRange {
            depth: (1, 2),
            hidden: (16, 48),
        },
        cnn_train: quick.clone(),
        sae_finetune: quick,
        ..EnsembleConfig::default()
    };
    cfg.sae_pretrain.epochs = 2;
    cfg.augment.copies_per_image = 0;
    cfg
}

#[test]
fn sampled_architectures_are_sorted_and_in_range() {
    let cr = CnnArchRange::default();
    let sr = SaeArchRange::default();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..1000 {
        let c = sample_cnn_arch(&cr, &mut rng).unwrap().block_filters;
        assert!((cr.alpha.0..=cr.alpha.1).contains(&c.len()));
        assert!(c.windows(2).all(|w| w[0] >= w[1]));
        assert!(c.iter().all(|f| (cr.filters.0..=cr.filters.1).contains(f)));
        let s = sample_sae_arch(&sr, &mut rng).unwrap().hidden_sizes;
        assert!((sr.depth.0..=sr.depth.1).contains(&s.len()));
        assert!(s.windows(2).all(|w| w[0] >= w[1]));
        assert!(s.iter().all(|h| (sr.hidden.0..=sr.hidden.1).contains(h)));
    }
}

#[test]
fn subset_matches_a_smaller_run_and_round_trips() {
    let (spec, scal) = images(6, 21);
    let big = train_ensemble(&small_config(2, 2, 5), &spec, &scal).unwrap();
    let small = train_ensemble(&small_config(1, 1, 5), &spec, &scal).unwrap();
    assert_eq!(big.subset(1, 1).unwrap(), small);
    assert!(big.subset(3, 1).is_err());

    let mut bundle = big;
    attach_patternnet(&mut bundle, &spec, &scal, 2, &ScgConfig { max_iters: 20, ..ScgConfig::default() }).unwrap();
    bundle.input = Some(input_spec(2000, 2.0, &ImageConfig::default()));
    let dir = tempfile::tempdir().unwrap();
    bundle.save(dir.path()).unwrap();
    let back = EnsembleBundle::load(dir.path()).unwrap();
    assert_eq!(back, bundle);
    assert_eq!(
        back.member_outputs(&spec.images, &scal.images).unwrap(),
        bundle.member_outputs(&spec.images, &scal.images).unwrap()
    );
}

#[test]
fn truncated_bundle_is_rejected() {
    let (spec, scal) = images(4, 3);
    let bundle = train_ensemble(&small_config(1, 1, 2), &spec, &scal).unwrap();
    let dir = tempfile::tempdir().unwrap();
    bundle.save(dir.path()).unwrap();
    std::fs::remove_dir_all(dir.path().join("sae_0")).unwrap();
    assert!(EnsembleBundle::load(dir.path()).is_err());
}
