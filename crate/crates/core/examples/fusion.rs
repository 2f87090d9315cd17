//! The three fusion rules on hand-written member outputs, then a PatternNet
//! learning to trust the reliable members of a noisy synthetic committee.

use mmdl::dataset::Label;
use mmdl::fusion::{majority_vote, train_patternnet, unweighted_average, ModelOutput};
use mmdl::nn::{ScgConfig, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn out(id: usize, p_up: f64) -> ModelOutput {
    ModelOutput::from_posterior(id, &[1.0 - p_up, p_up]).expect("valid posterior")
}

fn main() -> mmdl::Result<()> {
    // Two confident noise votes against three weak up-call votes.
    let outputs = [out(0, 0.02), out(1, 0.05), out(2, 0.55), out(3, 0.6), out(4, 0.52)];
    let v = majority_vote(&outputs)?;
    let a = unweighted_average(&outputs)?;
    println!("vote:    {} (up-call fraction {:.2})", v.label, v.upcall_score);
    println!("average: {} (mean up-call posterior {:.3})", a.label, a.upcall_score);

    // Members 0-1 are accurate, 2-5 guess. A vote follows the guessers; the
    // meta-network learns to weight the first two.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n_models = 6;
    let sample = |rng: &mut ChaCha8Rng, truth: Label| -> Vec<ModelOutput> {
        (0..n_models)
            .map(|id| {
                let p = if id < 2 {
                    if truth.is_upcall() { rng.random_range(0.6..0.95) } else { rng.random_range(0.05..0.4) }
                } else {
                    rng.random_range(0.05..0.95)
                };
                out(id, p)
            })
            .collect()
    };
    let truth: Vec<Label> = (0..400).map(|i| if i % 2 == 0 { Label::Upcall } else { Label::Noise }).collect();
    let rows: Vec<Vec<ModelOutput>> = truth.iter().map(|&t| sample(&mut rng, t)).collect();
    let flat: Vec<f64> = rows.iter().flat_map(|r| mmdl::fusion::fusion_input_row(r)).collect();
    let x = Tensor::new(vec![rows.len(), 2 * n_models], flat)?;
    let y: Vec<usize> = truth.iter().map(|l| l.index()).collect();
    let net = train_patternnet(&x, &y, 2, 2, 4, 0, &ScgConfig::default())?;

    let test: Vec<(Label, Vec<ModelOutput>)> =
        (0..400).map(|i| if i % 2 == 0 { Label::Upcall } else { Label::Noise }).map(|t| (t, sample(&mut rng, t))).collect();
    let acc = |f: &dyn Fn(&[ModelOutput]) -> Label| {
        test.iter().filter(|(t, o)| f(o) == *t).count() as f64 / test.len() as f64
    };
    println!("accuracy on fresh committee outputs:");
    println!("  vote       {:.3}", acc(&|o| majority_vote(o).unwrap().label));
    println!("  average    {:.3}", acc(&|o| unweighted_average(o).unwrap().label));
    println!("  patternnet {:.3} (hidden width {})", acc(&|o| net.decide(o).unwrap().label), net.hidden_width());
    Ok(())
}
