//! Randomized ensemble: n_cnn CNNs on spectrograms, n_sae SAEs on
//! scalograms, each with its own sampled architecture and seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::arch::{
    sample_cnn_arch, sample_sae_arch, CnnArch, CnnArchRange, SaeArch, SaeArchRange, SAE_INPUT_DIM,
};
use super::sae::{finetune_sae, pretrain_sae};
use crate::dataset::{augment_set, AugmentConfig, Label};
use crate::error::{Error, Result};
use crate::features::{Image, ImageConfig, IMAGE_SIZE};
use crate::fusion::{FusionNet, ModelOutput};
use crate::nn::{train_supervised, Network, Tensor, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MemberKind {
    Cnn,
    Sae,
    Fusion,
}

impl MemberKind {
    fn tag(self) -> &'static [u8] {
        match self {
            MemberKind::Cnn => b"cnn",
            MemberKind::Sae => b"sae",
            MemberKind::Fusion => b"fusion",
        }
    }
}

/// Seed of member `index` of `kind`: the first 8 bytes (little endian) of
/// SHA-256 over the master seed, the kind tag and the index. Member i gets
/// the same seed whatever the ensemble size.
pub fn member_seed(master_seed: u64, kind: MemberKind, index: usize) -> u64 {
    let digest = Sha256::new()
        .chain_update(master_seed.to_le_bytes())
        .chain_update(kind.tag())
        .chain_update((index as u64).to_le_bytes())
        .finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("sha256 has 32 bytes"))
}

/// Images with their labels, in clip order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabeledImages {
    pub images: Vec<Image>,
    pub labels: Vec<Label>,
}

impl LabeledImages {
    pub fn new(images: Vec<Image>, labels: Vec<Label>) -> Result<Self> {
        if images.len() != labels.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} images but {} labels",
                images.len(),
                labels.len()
            )));
        }
        Ok(LabeledImages { images, labels })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn class_indices(&self) -> Vec<usize> {
        self.labels.iter().map(|l| l.index()).collect()
    }

    /// The entries at `idx`, in that order.
    pub fn select(&self, idx: &[usize]) -> LabeledImages {
        LabeledImages {
            images: idx.iter().map(|&i| self.images[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    pub fn augmented(&self, cfg: &AugmentConfig, rng: &mut impl Rng) -> Result<Self> {
        let pairs: Vec<(Image, Label)> = self.images.iter().cloned().zip(self.labels.iter().copied()).collect();
        let (images, labels) = augment_set(&pairs, cfg, rng)?.into_iter().unzip();
        Ok(LabeledImages { images, labels })
    }
}

/// `[n, 1, 100, 100]` batch for CNN members.
pub fn cnn_tensor(images: &[Image]) -> Tensor {
    let data: Vec<f64> = images.iter().flat_map(|i| i.pixels().iter().copied()).collect();
    Tensor::new(vec![images.len(), 1, IMAGE_SIZE, IMAGE_SIZE], data).expect("image sizes are fixed")
}

/// `[n, 10000]` batch for SAE members.
pub fn sae_tensor(images: &[Image]) -> Tensor {
    let data: Vec<f64> = images.iter().flat_map(|i| i.pixels().iter().copied()).collect();
    Tensor::new(vec![images.len(), SAE_INPUT_DIM], data).expect("image sizes are fixed")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleConfig {
    pub n_cnn: usize,
    pub n_sae: usize,
    /// Set from the run seed, never read from configuration files.
    #[serde(skip)]
    pub master_seed: u64,
    pub cnn_range: CnnArchRange,
    pub sae_range: SaeArchRange,
    pub cnn_train: TrainConfig,
    pub sae_pretrain: TrainConfig,
    pub sae_finetune: TrainConfig,
    /// Applied to the training images only, separately per modality.
    pub augment: AugmentConfig,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            n_cnn: 15,
            n_sae: 15,
            master_seed: 0,
            cnn_range: CnnArchRange::default(),
            sae_range: SaeArchRange::default(),
            cnn_train: TrainConfig::default(),
            sae_pretrain: TrainConfig {
                learning_rate: 0.01,
                l2: 0.0,
                ..TrainConfig::default()
            },
            sae_finetune: TrainConfig::default(),
            augment: AugmentConfig::default(),
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_cnn + self.n_sae == 0 {
            return Err(Error::InvalidConfig("ensemble needs at least one member".into()));
        }
        if self.n_cnn > 0 {
            self.cnn_range.validate()?;
            self.cnn_train.validate()?;
        }
        if self.n_sae > 0 {
            self.sae_range.validate(SAE_INPUT_DIM)?;
            self.sae_pretrain.validate()?;
            self.sae_finetune.validate()?;
        }
        self.augment.validate()
    }
}

/// How clips were turned into images, kept so a bundle can score raw audio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSpec {
    pub sample_rate_hz: u32,
    pub duration_s: f64,
    pub image: ImageConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CnnMember {
    pub index: usize,
    pub seed: u64,
    pub arch: CnnArch,
    pub net: Network,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaeMember {
    pub index: usize,
    pub seed: u64,
    pub arch: SaeArch,
    pub net: Network,
    /// Per-autoencoder reconstruction MSE after pretraining.
    pub pretrain_mse: Vec<f64>,
}

/// A trained ensemble. Model ids are `0..n_cnn` for CNNs, then
/// `n_cnn..n_cnn + n_sae` for SAEs.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleBundle {
    pub master_seed: u64,
    pub cnn_range: CnnArchRange,
    pub sae_range: SaeArchRange,
    pub cnns: Vec<CnnMember>,
    pub saes: Vec<SaeMember>,
    pub fusion: Option<FusionNet>,
    pub input: Option<InputSpec>,
}

/// Train one CNN member. Architecture, initialization and batch order all
/// come from a single stream seeded with `seed`.
pub fn train_cnn_member(
    index: usize,
    seed: u64,
    range: &CnnArchRange,
    cfg: &TrainConfig,
    x: &Tensor,
    labels: &[usize],
) -> Result<CnnMember> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let arch = sample_cnn_arch(range, &mut rng)?;
    let mut net = Network::build(&[1, IMAGE_SIZE, IMAGE_SIZE], &arch.layer_specs(), &mut rng)?;
    let cfg = TrainConfig {
        seed: rng.random(),
        ..cfg.clone()
    };
    train_supervised(&mut net, x, labels, &cfg)?;
    net.set_seed(seed);
    Ok(CnnMember { index, seed, arch, net })
}

/// Train one SAE member: unsupervised layer-wise pretraining, then
/// supervised fine-tuning of the whole stack with a softmax head.
pub fn train_sae_member(
    index: usize,
    seed: u64,
    range: &SaeArchRange,
    pretrain: &TrainConfig,
    finetune: &TrainConfig,
    x: &Tensor,
    labels: &[usize],
) -> Result<SaeMember> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let arch = sample_sae_arch(range, &mut rng)?;
    let pcfg = TrainConfig {
        seed: rng.random(),
        ..pretrain.clone()
    };
    let p = pretrain_sae(&arch, x, &pcfg, &mut rng)?;
    let fcfg = TrainConfig {
        seed: rng.random(),
        ..finetune.clone()
    };
    let mut net = finetune_sae(&p.stack, x, labels, &fcfg, &mut rng)?;
    net.set_seed(seed);
    Ok(SaeMember {
        index,
        seed,
        arch,
        net,
        pretrain_mse: p.mse,
    })
}

enum Job {
    Cnn(usize),
    Sae(usize),
}

enum Trained {
    Cnn(CnnMember),
    Sae(SaeMember),
}

/// Train every member in parallel on the training images. The two image
/// sets must describe the same clips with the same labels.
pub fn train_ensemble(
    cfg: &EnsembleConfig,
    spectrograms: &LabeledImages,
    scalograms: &LabeledImages,
) -> Result<EnsembleBundle> {
    train_ensemble_with_progress(cfg, spectrograms, scalograms, &|_| {})
}

pub fn train_ensemble_with_progress(
    cfg: &EnsembleConfig,
    spectrograms: &LabeledImages,
    scalograms: &LabeledImages,
    progress: &(dyn Fn(&str) + Sync),
) -> Result<EnsembleBundle> {
    cfg.validate()?;
    if spectrograms.labels != scalograms.labels {
        return Err(Error::Data(
            "spectrogram and scalogram sets disagree on labels or length".into(),
        ));
    }
    if spectrograms.is_empty() {
        return Err(Error::Data("no training images".into()));
    }
    let mut aug_rng = ChaCha8Rng::seed_from_u64(cfg.master_seed ^ 0x6175_676d);
    let spec = spectrograms.augmented(&cfg.augment, &mut aug_rng)?;
    let scal = scalograms.augmented(&cfg.augment, &mut aug_rng)?;
    let labels = spec.class_indices();
    let cnn_x = if cfg.n_cnn > 0 { cnn_tensor(&spec.images) } else { Tensor::zeros(vec![0]) };
    let sae_x = if cfg.n_sae > 0 { sae_tensor(&scal.images) } else { Tensor::zeros(vec![0]) };
    drop((spec, scal));

    let jobs: Vec<Job> = (0..cfg.n_cnn).map(Job::Cnn).chain((0..cfg.n_sae).map(Job::Sae)).collect();
    let trained: Vec<Trained> = jobs
        .par_iter()
        .map(|job| match *job {
            Job::Cnn(i) => {
                let seed = member_seed(cfg.master_seed, MemberKind::Cnn, i);
                let m = train_cnn_member(i, seed, &cfg.cnn_range, &cfg.cnn_train, &cnn_x, &labels)
                    .map_err(|e| Error::Stage { stage: format!("cnn member {i}"), source: Box::new(e) })?;
                progress(&format!("cnn {i} trained, blocks {:?}", m.arch.block_filters));
                Ok(Trained::Cnn(m))
            }
            Job::Sae(i) => {
                let seed = member_seed(cfg.master_seed, MemberKind::Sae, i);
                let m = train_sae_member(
                    i,
                    seed,
                    &cfg.sae_range,
                    &cfg.sae_pretrain,
                    &cfg.sae_finetune,
                    &sae_x,
                    &labels,
                )
                .map_err(|e| Error::Stage { stage: format!("sae member {i}"), source: Box::new(e) })?;
                progress(&format!("sae {i} trained, hidden {:?}", m.arch.hidden_sizes));
                Ok(Trained::Sae(m))
            }
        })
        .collect::<Result<_>>()?;

    let mut cnns = Vec::with_capacity(cfg.n_cnn);
    let mut saes = Vec::with_capacity(cfg.n_sae);
    for t in trained {
        match t {
            Trained::Cnn(m) => cnns.push(m),
            Trained::Sae(m) => saes.push(m),
        }
    }
    Ok(EnsembleBundle {
        master_seed: cfg.master_seed,
        cnn_range: cfg.cnn_range.clone(),
        sae_range: cfg.sae_range.clone(),
        cnns,
        saes,
        fusion: None,
        input: None,
    })
}

impl EnsembleBundle {
    pub fn n_cnn(&self) -> usize {
        self.cnns.len()
    }

    pub fn n_sae(&self) -> usize {
        self.saes.len()
    }

    pub fn n_models(&self) -> usize {
        self.cnns.len() + self.saes.len()
    }

    /// The first `n_cnn` CNNs and `n_sae` SAEs, without a fusion net. Since
    /// member seeds depend only on the index, this equals an ensemble
    /// trained at the smaller size with the same data and master seed.
    pub fn subset(&self, n_cnn: usize, n_sae: usize) -> Result<EnsembleBundle> {
        if n_cnn > self.n_cnn() || n_sae > self.n_sae() || n_cnn + n_sae == 0 {
            return Err(Error::InvalidInput(format!(
                "cannot take {n_cnn}+{n_sae} members from a {}+{} ensemble",
                self.n_cnn(),
                self.n_sae()
            )));
        }
        Ok(EnsembleBundle {
            cnns: self.cnns[..n_cnn].to_vec(),
            saes: self.saes[..n_sae].to_vec(),
            fusion: None,
            ..self.clone_header()
        })
    }

    fn clone_header(&self) -> EnsembleBundle {
        EnsembleBundle {
            master_seed: self.master_seed,
            cnn_range: self.cnn_range.clone(),
            sae_range: self.sae_range.clone(),
            cnns: Vec::new(),
            saes: Vec::new(),
            fusion: None,
            input: self.input.clone(),
        }
    }

    /// Every member's output for every clip: `out[clip][model_id]`.
    pub fn member_outputs(&self, spectrograms: &[Image], scalograms: &[Image]) -> Result<Vec<Vec<ModelOutput>>> {
        if spectrograms.len() != scalograms.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} spectrograms but {} scalograms",
                spectrograms.len(),
                scalograms.len()
            )));
        }
        let n = spectrograms.len();
        let cnn_x = if self.cnns.is_empty() { None } else { Some(cnn_tensor(spectrograms)) };
        let sae_x = if self.saes.is_empty() { None } else { Some(sae_tensor(scalograms)) };
        let nets: Vec<(&Network, &Tensor)> = self
            .cnns
            .iter()
            .map(|m| (&m.net, cnn_x.as_ref().expect("cnn batch built")))
            .chain(self.saes.iter().map(|m| (&m.net, sae_x.as_ref().expect("sae batch built"))))
            .collect();
        let posts: Vec<Vec<Vec<f64>>> = nets
            .par_iter()
            .map(|(net, x)| if n == 0 { Ok(Vec::new()) } else { net.predict_all(x) })
            .collect::<Result<_>>()?;
        (0..n)
            .map(|c| {
                posts
                    .iter()
                    .enumerate()
                    .map(|(id, p)| ModelOutput::from_posterior(id, &p[c]))
                    .collect()
            })
            .collect()
    }
}
