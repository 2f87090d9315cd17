//! Combining member outputs: majority vote, unweighted posterior average,
//! and a trained PatternNet meta-network.
//!
//! Posteriors are `[p_noise, p_upcall]` (class index order). Vote ties go to
//! the label with the larger summed posterior, then to noise; average ties
//! go to noise.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Label;
use crate::error::{Error, Result};
use crate::features::Image;
use crate::nn::{argmax, load_model, save_model, scg_train, LayerSpec, Network, ScgConfig, Tensor};
use crate::zoo::EnsembleBundle;

pub const DEFAULT_K: usize = 2;
pub const FUSION_META_FILE: &str = "fusion.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FusionStrategy {
    MajorityVote,
    UnweightedAverage,
    PatternNet { k: usize },
}

impl FusionStrategy {
    pub fn name(&self) -> &'static str {
        match self {
            FusionStrategy::MajorityVote => "vote",
            FusionStrategy::UnweightedAverage => "average",
            FusionStrategy::PatternNet { .. } => "patternnet",
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let FusionStrategy::PatternNet { k: 0 } = self {
            return Err(Error::InvalidConfig("patternnet k must be >= 1".into()));
        }
        Ok(())
    }
}

impl fmt::Display for FusionStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Parses `vote`, `average` or `patternnet` (with the default k).
impl FromStr for FusionStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vote" | "majority_vote" => Ok(FusionStrategy::MajorityVote),
            "average" | "unweighted_average" => Ok(FusionStrategy::UnweightedAverage),
            "patternnet" => Ok(FusionStrategy::PatternNet { k: DEFAULT_K }),
            other => Err(Error::InvalidInput(format!(
                "unknown fusion strategy {other:?} (expected vote, average or patternnet)"
            ))),
        }
    }
}

/// One member's opinion on one clip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelOutput {
    pub model_id: usize,
    pub label: Label,
    pub posterior: [f64; 2],
}

impl ModelOutput {
    pub fn from_posterior(model_id: usize, posterior: &[f64]) -> Result<Self> {
        let ok = posterior.len() == 2
            && posterior.iter().all(|p| (0.0..=1.0).contains(p))
            && (posterior[0] + posterior[1] - 1.0).abs() < 1e-9;
        if !ok {
            return Err(Error::InvalidInput(format!(
                "model {model_id} posterior {posterior:?} is not a 2-class distribution"
            )));
        }
        Ok(ModelOutput {
            model_id,
            label: Label::from_index(argmax(posterior)),
            posterior: [posterior[0], posterior[1]],
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub label: Label,
    /// Strategy-specific confidence: the winning vote fraction for majority
    /// vote, the up-call posterior otherwise.
    pub score: f64,
    /// Monotone up-call score for threshold sweeps.
    pub upcall_score: f64,
    pub strategy: FusionStrategy,
}

fn non_empty(outputs: &[ModelOutput]) -> Result<()> {
    if outputs.is_empty() {
        return Err(Error::InvalidInput("no model outputs to fuse".into()));
    }
    Ok(())
}

pub fn majority_vote(outputs: &[ModelOutput]) -> Result<Decision> {
    non_empty(outputs)?;
    let n = outputs.len() as f64;
    let up_votes = outputs.iter().filter(|o| o.label.is_upcall()).count();
    let noise_votes = outputs.len() - up_votes;
    let label = if up_votes != noise_votes {
        if up_votes > noise_votes {
            Label::Upcall
        } else {
            Label::Noise
        }
    } else {
        let up: f64 = outputs.iter().map(|o| o.posterior[1]).sum();
        let noise: f64 = outputs.iter().map(|o| o.posterior[0]).sum();
        if up > noise {
            Label::Upcall
        } else {
            Label::Noise
        }
    };
    let winning = if label.is_upcall() { up_votes } else { noise_votes };
    Ok(Decision {
        label,
        score: winning as f64 / n,
        upcall_score: up_votes as f64 / n,
        strategy: FusionStrategy::MajorityVote,
    })
}

pub fn unweighted_average(outputs: &[ModelOutput]) -> Result<Decision> {
    non_empty(outputs)?;
    let n = outputs.len() as f64;
    let noise = outputs.iter().map(|o| o.posterior[0]).sum::<f64>() / n;
    let up = outputs.iter().map(|o| o.posterior[1]).sum::<f64>() / n;
    Ok(Decision {
        label: Label::from_index(argmax(&[noise, up])),
        score: up,
        upcall_score: up,
        strategy: FusionStrategy::UnweightedAverage,
    })
}

/// Hidden width rule `k * n_classes * n_models` with two classes.
pub fn patternnet_hidden_width(k: usize, n_models: usize) -> usize {
    k * 2 * n_models
}

/// Posteriors concatenated in `model_id` order.
pub fn fusion_input_row(outputs: &[ModelOutput]) -> Vec<f64> {
    let mut sorted: Vec<&ModelOutput> = outputs.iter().collect();
    sorted.sort_by_key(|o| o.model_id);
    sorted.iter().flat_map(|o| o.posterior).collect()
}

/// Dense/tanh/softmax meta-network over concatenated member posteriors.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionNet {
    pub net: Network,
    pub k: usize,
    pub n_cnn: usize,
    pub n_sae: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct FusionMeta {
    strategy: String,
    k: usize,
    n_cnn: usize,
    n_sae: usize,
}

impl FusionNet {
    pub fn n_models(&self) -> usize {
        self.n_cnn + self.n_sae
    }

    pub fn input_dim(&self) -> usize {
        2 * self.n_models()
    }

    pub fn hidden_width(&self) -> usize {
        match &self.net.layers()[0] {
            crate::nn::Layer::Dense(d) => d.out_units,
            _ => 0,
        }
    }

    pub fn decide(&self, outputs: &[ModelOutput]) -> Result<Decision> {
        non_empty(outputs)?;
        if outputs.len() != self.n_models() {
            return Err(Error::ShapeMismatch(format!(
                "fusion net trained for {} models, got {} outputs",
                self.n_models(),
                outputs.len()
            )));
        }
        let row = fusion_input_row(outputs);
        let f = self.net.forward(&Tensor::new(vec![row.len()], row)?)?;
        Ok(Decision {
            label: Label::from_index(argmax(&f.posterior)),
            score: f.posterior[1],
            upcall_score: f.posterior[1],
            strategy: FusionStrategy::PatternNet { k: self.k },
        })
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        save_model(&self.net, dir)?;
        let meta = FusionMeta {
            strategy: "patternnet".into(),
            k: self.k,
            n_cnn: self.n_cnn,
            n_sae: self.n_sae,
        };
        let path = dir.join(FUSION_META_FILE);
        let text = serde_json::to_string_pretty(&meta).expect("fusion metadata serializes");
        fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(FUSION_META_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let meta: FusionMeta =
            serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        let net = load_model(dir)?;
        let f = FusionNet {
            net,
            k: meta.k,
            n_cnn: meta.n_cnn,
            n_sae: meta.n_sae,
        };
        if f.net.input_shape() != [f.input_dim()]
            || f.hidden_width() != patternnet_hidden_width(f.k, f.n_models())
        {
            return Err(Error::Format(format!(
                "fusion net shape does not match k={} with {}+{} models",
                f.k, f.n_cnn, f.n_sae
            )));
        }
        Ok(f)
    }
}

/// Single tanh hidden layer of `k * 2 * (n_cnn + n_sae)` units and a softmax
/// output, trained by scaled conjugate gradient on cross-entropy.
pub fn train_patternnet(
    inputs: &Tensor,
    labels: &[usize],
    k: usize,
    n_cnn: usize,
    n_sae: usize,
    seed: u64,
    cfg: &ScgConfig,
) -> Result<FusionNet> {
    FusionStrategy::PatternNet { k }.validate()?;
    let n_models = n_cnn + n_sae;
    if inputs.shape() != [labels.len(), 2 * n_models] {
        return Err(Error::ShapeMismatch(format!(
            "fusion matrix {:?} does not fit {} rows of {} models",
            inputs.shape(),
            labels.len(),
            n_models
        )));
    }
    if labels.len() < 2 || !labels.contains(&0) || !labels.contains(&1) {
        return Err(Error::Data(
            "patternnet training needs at least two rows covering both classes".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = Network::build(
        &[2 * n_models],
        &[
            LayerSpec::Dense {
                out_units: patternnet_hidden_width(k, n_models),
            },
            LayerSpec::Tanh,
            LayerSpec::Dense { out_units: 2 },
            LayerSpec::Softmax,
        ],
        &mut rng,
    )?;
    net.set_seed(seed);
    scg_train(&mut net, inputs, labels, cfg)?;
    Ok(FusionNet {
        net,
        k,
        n_cnn,
        n_sae,
    })
}

/// Rows of concatenated member posteriors (CNNs on spectrograms, then SAEs
/// on scalograms) in clip order, with class-index targets.
pub fn build_fusion_training_matrix(
    bundle: &EnsembleBundle,
    spectrograms: &[Image],
    scalograms: &[Image],
    labels: &[Label],
) -> Result<(Tensor, Vec<usize>)> {
    if labels.len() != spectrograms.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} labels for {} clips",
            labels.len(),
            spectrograms.len()
        )));
    }
    let outputs = bundle.member_outputs(spectrograms, scalograms)?;
    let width = 2 * bundle.n_models();
    let mut data = Vec::with_capacity(outputs.len() * width);
    for o in &outputs {
        data.extend(fusion_input_row(o));
    }
    Ok((
        Tensor::new(vec![outputs.len(), width], data)?,
        labels.iter().map(|l| l.index()).collect(),
    ))
}

/// Apply a strategy to one clip's member outputs.
pub fn apply_strategy(
    outputs: &[ModelOutput],
    strategy: FusionStrategy,
    fusion: Option<&FusionNet>,
) -> Result<Decision> {
    match strategy {
        FusionStrategy::MajorityVote => majority_vote(outputs),
        FusionStrategy::UnweightedAverage => unweighted_average(outputs),
        FusionStrategy::PatternNet { .. } => fusion
            .ok_or_else(|| Error::InvalidInput("bundle has no trained patternnet fusion net".into()))?
            .decide(outputs),
    }
}

/// Run every member on one image pair and fuse.
pub fn fuse(
    bundle: &EnsembleBundle,
    spectrogram: &Image,
    scalogram: &Image,
    strategy: FusionStrategy,
) -> Result<Decision> {
    let outputs = bundle.member_outputs(std::slice::from_ref(spectrogram), std::slice::from_ref(scalogram))?;
    apply_strategy(&outputs[0], strategy, bundle.fusion.as_ref())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn out(id: usize, up: f64) -> ModelOutput {
        ModelOutput::from_posterior(id, &[1.0 - up, up]).unwrap()
    }

    #[test]
    fn vote_examples() {
        let d = majority_vote(&[out(0, 0.9), out(1, 0.8), out(2, 0.1)]).unwrap();
        assert_eq!(d.label, Label::Upcall);
        assert!((d.score - 2.0 / 3.0).abs() < 1e-15);
        let all_noise: Vec<ModelOutput> = (0..15).map(|i| out(i, 0.2)).collect();
        let d = majority_vote(&all_noise).unwrap();
        assert_eq!((d.label, d.score), (Label::Noise, 1.0));
        let d = majority_vote(&[out(0, 0.9), out(1, 0.4)]).unwrap();
        assert_eq!(d.label, Label::Upcall);
        assert!(majority_vote(&[]).is_err());
    }

    #[test]
    fn average_examples() {
        let d = unweighted_average(&[out(0, 0.9), out(1, 0.1)]).unwrap();
        assert_eq!(d.label, Label::Noise);
        assert!((d.score - 0.5).abs() < 1e-15);
        let single = out(0, 0.35);
        let d = unweighted_average(&[single]).unwrap();
        assert_eq!((d.label, d.score), (single.label, 0.35));
        let d = unweighted_average(&[out(0, 0.8), out(1, 0.6), out(2, 0.7)]).unwrap();
        assert_eq!(d.label, Label::Upcall);
        assert!((d.score - 0.7).abs() < 1e-12);
    }

    #[test]
    fn vote_matches_counting_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [4usize, 5] {
            for mask in 0..(1u32 << n) {
                let outs: Vec<ModelOutput> = (0..n)
                    .map(|i| {
                        let up = if mask >> i & 1 == 1 {
                            rng.random_range(0.51..1.0)
                        } else {
                            rng.random_range(0.0..0.49)
                        };
                        out(i, up)
                    })
                    .collect();
                let ups = mask.count_ones() as usize;
                let expect = if 2 * ups > n {
                    Label::Upcall
                } else if 2 * ups < n {
                    Label::Noise
                } else {
                    let s: f64 = outs.iter().map(|o| o.posterior[1]).sum();
                    if s > n as f64 / 2.0 {
                        Label::Upcall
                    } else {
                        Label::Noise
                    }
                };
                assert_eq!(majority_vote(&outs).unwrap().label, expect, "n={n} mask={mask:b}");
            }
        }
    }

    #[test]
    fn strategies_are_permutation_invariant() {
        let outs = vec![out(0, 0.9), out(1, 0.3), out(2, 0.6), out(3, 0.45)];
        let mut rev = outs.clone();
        rev.reverse();
        assert_eq!(majority_vote(&outs).unwrap(), majority_vote(&rev).unwrap());
        let (a, b) = (unweighted_average(&outs).unwrap(), unweighted_average(&rev).unwrap());
        assert_eq!(a.label, b.label);
        assert!((a.score - b.score).abs() < 1e-15);
        assert_eq!(fusion_input_row(&outs), fusion_input_row(&rev));
    }

    #[test]
    fn hidden_width_rule() {
        assert_eq!(patternnet_hidden_width(2, 15), 60);
        assert_eq!(patternnet_hidden_width(1, 2), 4);
    }

    #[test]
    fn patternnet_learns_from_reliable_member() {
        // Model 0 always right, model 1 a coin flip.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 200;
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        let mut random_correct = 0;
        for i in 0..n {
            let y = i % 2;
            let p0 = if y == 1 { rng.random_range(0.6..1.0) } else { rng.random_range(0.0..0.4) };
            let p1: f64 = rng.random();
            if (p1 > 0.5) as usize == y {
                random_correct += 1;
            }
            rows.extend([1.0 - p0, p0, 1.0 - p1, p1]);
            labels.push(y);
        }
        let x = Tensor::new(vec![n, 4], rows).unwrap();
        let cfg = ScgConfig {
            max_iters: 200,
            ..ScgConfig::default()
        };
        let f = train_patternnet(&x, &labels, 2, 1, 1, 5, &cfg).unwrap();
        assert_eq!(f.hidden_width(), 8);
        let acc = f.net.accuracy(&x, &labels).unwrap();
        assert!(acc >= random_correct as f64 / n as f64);
        assert!(acc > 0.95, "{acc}");
        let outs = [
            ModelOutput::from_posterior(0, &x.sample(0)[..2]).unwrap(),
            ModelOutput::from_posterior(1, &x.sample(0)[2..]).unwrap(),
        ];
        let d = f.decide(&outs).unwrap();
        let direct = f.net.forward(&Tensor::new(vec![4], x.sample(0).to_vec()).unwrap()).unwrap();
        assert_eq!(d.label.index(), argmax(&direct.posterior));
    }

    #[test]
    fn patternnet_rejects_single_class() {
        let x = Tensor::zeros(vec![3, 4]);
        assert!(train_patternnet(&x, &[1, 1, 1], 2, 1, 1, 0, &ScgConfig::default()).is_err());
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in ["vote", "average", "patternnet"] {
            assert_eq!(s.parse::<FusionStrategy>().unwrap().name(), s);
        }
        assert!("median".parse::<FusionStrategy>().is_err());
    }
}
