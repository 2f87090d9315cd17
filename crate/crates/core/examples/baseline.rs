//! Handcrafted-feature baselines: MFCC and DWT+MFCC features with a linear
//! SVM and a KNN, scored on a held-out split of a synthetic set.
//!
//!     cargo run --release --example baseline

use mmdl::baselines::{BaselineConfig, BaselineModel, ClassifierKind, FeatureMatrix, FeatureRecipe};
use mmdl::dataset::{synth_set, Label, SynthSetConfig};
use mmdl::eval::{evaluate_baseline, stratified_split, Report};

fn main() -> mmdl::Result<()> {
    let set = synth_set(
        &SynthSetConfig {
            n_upcall: 100,
            n_noise: 400,
            ..SynthSetConfig::default()
        },
        11,
    )?;
    let (clips, labels): (Vec<_>, Vec<Label>) = set.into_iter().unzip();
    let (train, test) = stratified_split(&labels, 0.2, 0)?;
    let pick = |m: &FeatureMatrix, idx: &[usize]| {
        FeatureMatrix::new(idx.iter().map(|&i| m.rows[i].clone()).collect(), idx.iter().map(|&i| m.labels[i]).collect())
    };
    let mut report = Report::default();
    for recipe in ["mfcc", "dwt:db4:2+mfcc", "dwt:sym4:3+mfcc"] {
        let recipe: FeatureRecipe = recipe.parse()?;
        let feats = recipe.extract_all(&clips, &labels, &BaselineConfig::default().mfcc)?;
        for classifier in [ClassifierKind::Svm, ClassifierKind::Knn] {
            let cfg = BaselineConfig {
                recipe: recipe.clone(),
                classifier,
                ..BaselineConfig::default()
            };
            let model = BaselineModel::fit(&cfg, &pick(&feats, &train)?)?;
            report.extend(evaluate_baseline(&model, &pick(&feats, &test)?)?);
        }
    }
    print!("{}", report.summary());
    Ok(())
}
