//! Confusion counts, detection rates, stratified folds and reports.

mod folds;
mod metrics;
mod report;

pub use folds::{kfold_indices, stratified_split, FoldSpec};
pub use metrics::{confusion_counts, percent, rates, ConfusionCounts, Rates};
pub use report::{threshold_sweep, Report, ReportRow, Sweep, SweepPoint, REPORT_HEADER};

use crate::baselines::{BaselineModel, FeatureMatrix};
use crate::dataset::Label;
use crate::error::{Error, Result};
use crate::features::Image;
use crate::fusion::{apply_strategy, FusionNet, FusionStrategy, ModelOutput};
use crate::zoo::EnsembleBundle;

/// Report scope of member `model_id`: `cnn_<i>` or `sae_<i>`.
pub fn member_scope(model_id: usize, n_cnn: usize) -> String {
    if model_id < n_cnn {
        format!("cnn_{model_id}")
    } else {
        format!("sae_{}", model_id - n_cnn)
    }
}

fn check_truth(truth: &[Label]) -> Result<()> {
    for c in Label::ALL {
        if !truth.contains(&c) {
            return Err(Error::Data(format!("test set has no {c} clips")));
        }
    }
    Ok(())
}

/// One `ensemble` row and sweep per strategy, then one `member` row per
/// model, from precomputed member outputs (`outputs[clip][model_id]`).
pub fn evaluate_outputs(
    outputs: &[Vec<ModelOutput>],
    truth: &[Label],
    n_cnn: usize,
    strategies: &[FusionStrategy],
    fusion: Option<&FusionNet>,
) -> Result<Report> {
    check_truth(truth)?;
    if outputs.len() != truth.len() {
        return Err(Error::ShapeMismatch(format!("{} outputs for {} labels", outputs.len(), truth.len())));
    }
    let mut report = Report::default();
    for &s in strategies {
        let decisions = outputs
            .iter()
            .map(|o| apply_strategy(o, s, fusion))
            .collect::<Result<Vec<_>>>()?;
        let preds: Vec<Label> = decisions.iter().map(|d| d.label).collect();
        report.push("ensemble", s.name(), confusion_counts(&preds, truth)?)?;
        let scores: Vec<f64> = decisions.iter().map(|d| d.upcall_score).collect();
        report.sweeps.push(Sweep {
            scope: "ensemble".into(),
            strategy: s.name().into(),
            points: threshold_sweep(&scores, truth)?,
        });
    }
    let n_models = outputs.first().map_or(0, Vec::len);
    for id in 0..n_models {
        let preds: Vec<Label> = outputs.iter().map(|o| o[id].label).collect();
        report.push(member_scope(id, n_cnn), "member", confusion_counts(&preds, truth)?)?;
    }
    Ok(report)
}

pub fn evaluate_bundle(
    bundle: &EnsembleBundle,
    spectrograms: &[Image],
    scalograms: &[Image],
    truth: &[Label],
    strategies: &[FusionStrategy],
) -> Result<Report> {
    check_truth(truth)?;
    let outputs = bundle.member_outputs(spectrograms, scalograms)?;
    evaluate_outputs(&outputs, truth, bundle.n_cnn(), strategies, bundle.fusion.as_ref())
}

/// One row (scope `baseline_<classifier>`, strategy = feature recipe) and a
/// score sweep, on raw (unstandardized) test features.
pub fn evaluate_baseline(model: &BaselineModel, test: &FeatureMatrix) -> Result<Report> {
    check_truth(&test.labels)?;
    let out = test
        .rows
        .iter()
        .map(|r| model.predict_features(r))
        .collect::<Result<Vec<_>>>()?;
    let preds: Vec<Label> = out.iter().map(|o| o.0).collect();
    let scores: Vec<f64> = out.iter().map(|o| o.1).collect();
    let strategy = model.config.recipe.to_string();
    let mut report = Report::default();
    report.push(model.name(), strategy.clone(), confusion_counts(&preds, &test.labels)?)?;
    report.sweeps.push(Sweep {
        scope: model.name(),
        strategy: strategy.replace([':', '+'], "_"),
        points: threshold_sweep(&scores, &test.labels)?,
    });
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_baseline_rate_arithmetic() {
        let r = rates(&ConfusionCounts { tp: 172, tn: 1231, fp: 36, fn_: 61 }).unwrap();
        assert!((100.0 * r.upcall_detection - 73.82).abs() < 0.01);
        assert!((100.0 * r.non_upcall_detection - 97.16).abs() < 0.01);
        assert!((100.0 * r.false_alarm - 2.84).abs() < 0.01);
        let r = rates(&ConfusionCounts { tp: 215, tn: 1, fp: 0, fn_: 18 }).unwrap();
        assert!((100.0 * r.upcall_detection - 92.27).abs() < 0.01);
    }

    #[test]
    fn unanimous_members_score_perfectly() {
        let truth = [Label::Upcall, Label::Noise, Label::Noise, Label::Upcall];
        let outputs: Vec<Vec<ModelOutput>> = truth
            .iter()
            .map(|&t| {
                let p = if t.is_upcall() { [0.1, 0.9] } else { [0.8, 0.2] };
                (0..4).map(|id| ModelOutput::from_posterior(id, &p).unwrap()).collect()
            })
            .collect();
        let strategies = [FusionStrategy::MajorityVote, FusionStrategy::UnweightedAverage];
        let r = evaluate_outputs(&outputs, &truth, 2, &strategies, None).unwrap();
        assert_eq!(r.rows.len(), 6);
        for row in &r.rows {
            assert_eq!((row.rates.upcall_detection, row.rates.false_alarm), (1.0, 0.0));
        }
        assert_eq!(r.rows[4].scope, "sae_0");
        assert!(evaluate_outputs(&outputs, &truth, 2, &[FusionStrategy::PatternNet { k: 2 }], None).is_err());
        assert!(evaluate_outputs(&outputs[..0], &[], 2, &strategies, None).is_err());
    }
}
