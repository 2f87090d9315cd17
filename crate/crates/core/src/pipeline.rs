//! End-to-end MMDL flows shared by the command line and the examples:
//! loading labeled audio, turning it into image pairs, and training an
//! ensemble with its fusion net.

use rayon::prelude::*;

use crate::dataset::{load_clip, Clip, Label, Manifest};
use crate::error::{Result, StageExt};
use crate::eval::stratified_split;
use crate::features::{Image, ImageConfig, ImagePipeline};
use crate::fusion::{build_fusion_training_matrix, train_patternnet};
use crate::nn::ScgConfig;
use crate::zoo::{
    member_seed, train_ensemble_with_progress, EnsembleBundle, EnsembleConfig, InputSpec, LabeledImages,
    MemberKind,
};

/// Load every manifest entry as a fixed-length clip, in parallel.
pub fn load_clips(manifest: &Manifest, sample_rate_hz: u32, duration_s: f64) -> Result<(Vec<Clip>, Vec<Label>)> {
    let clips = manifest
        .entries
        .par_iter()
        .map(|e| load_clip(&e.path, sample_rate_hz, duration_s))
        .collect::<Result<Vec<_>>>()?;
    Ok((clips, manifest.labels()))
}

/// Spectrogram and scalogram sets for labeled clips.
pub fn image_sets(input: &InputSpec, clips: &[Clip], labels: &[Label]) -> Result<(LabeledImages, LabeledImages)> {
    let len = crate::dataset::clip_len(input.duration_s, input.sample_rate_hz);
    let pipe = ImagePipeline::new(&input.image, input.sample_rate_hz, len)?;
    let (spec, scal): (Vec<Image>, Vec<Image>) = pipe.images_batch(clips)?.into_iter().unzip();
    Ok((
        LabeledImages::new(spec, labels.to_vec())?,
        LabeledImages::new(scal, labels.to_vec())?,
    ))
}

pub fn input_spec(sample_rate_hz: u32, duration_s: f64, image: &ImageConfig) -> InputSpec {
    InputSpec {
        sample_rate_hz,
        duration_s,
        image: image.clone(),
    }
}

/// PatternNet settings for [`train_mmdl`].
#[derive(Debug, Clone)]
pub struct PatternNetSettings {
    pub k: usize,
    pub scg: ScgConfig,
    /// Share of the training images held out (stratified) to fit the
    /// fusion net; members never see them.
    pub holdout_fraction: f64,
}

/// Fit a PatternNet on member outputs for `images` and attach it.
pub fn attach_patternnet(
    bundle: &mut EnsembleBundle,
    spec: &LabeledImages,
    scal: &LabeledImages,
    k: usize,
    scg: &ScgConfig,
) -> Result<()> {
    let (x, y) = build_fusion_training_matrix(bundle, &spec.images, &scal.images, &spec.labels)?;
    let seed = member_seed(bundle.master_seed, MemberKind::Fusion, 0);
    bundle.fusion = Some(train_patternnet(&x, &y, k, bundle.n_cnn(), bundle.n_sae(), seed, scg)?);
    Ok(())
}

/// Train members (and optionally the PatternNet on a held-out share) from
/// already computed image sets.
pub fn train_mmdl(
    cfg: &EnsembleConfig,
    patternnet: Option<&PatternNetSettings>,
    spec: &LabeledImages,
    scal: &LabeledImages,
    progress: &(dyn Fn(&str) + Sync),
) -> Result<EnsembleBundle> {
    let Some(pn) = patternnet else {
        return train_ensemble_with_progress(cfg, spec, scal, progress).stage("train members");
    };
    let (member_idx, fusion_idx) =
        stratified_split(&spec.labels, pn.holdout_fraction, cfg.master_seed).stage("fusion split")?;
    let mut bundle = train_ensemble_with_progress(cfg, &spec.select(&member_idx), &scal.select(&member_idx), progress)
        .stage("train members")?;
    attach_patternnet(&mut bundle, &spec.select(&fusion_idx), &scal.select(&fusion_idx), pn.k, &pn.scg)
        .stage("train fusion")?;
    progress(&format!("patternnet trained on {} held-out clips", fusion_idx.len()));
    Ok(bundle)
}
