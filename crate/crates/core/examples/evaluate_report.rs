//! Confusion counts to detection rates, the report CSV format and stratified
//! folds, using the counts of a published MFCC + linear SVM baseline.

use mmdl::dataset::Label;
use mmdl::eval::{confusion_counts, kfold_indices, threshold_sweep, ConfusionCounts, Report, Sweep};

fn main() -> mmdl::Result<()> {
    let mut report = Report::default();
    report.push("baseline_svm", "mfcc", ConfusionCounts { tp: 172, fn_: 61, tn: 1231, fp: 36 })?;
    report.push("baseline_svm", "dwt:db4:2+mfcc", ConfusionCounts { tp: 215, fn_: 18, tn: 1231, fp: 36 })?;

    // A toy scorer: labels and scores for ten clips.
    let truth = [1, 1, 1, 0, 0, 0, 0, 1, 0, 0].map(Label::from_index);
    let scores = [0.9, 0.8, 0.35, 0.4, 0.1, 0.2, 0.05, 0.7, 0.6, 0.3];
    let preds: Vec<Label> = scores.iter().map(|&s| Label::from_index(usize::from(s >= 0.5))).collect();
    report.push("ensemble", "average", confusion_counts(&preds, &truth)?)?;
    report.sweeps.push(Sweep {
        scope: "ensemble".into(),
        strategy: "average".into(),
        points: threshold_sweep(&scores, &truth)?,
    });

    print!("{}", report.summary());
    println!();
    print!("{}", report.to_csv());
    assert_eq!(Report::from_csv(&report.to_csv())?.rows, report.rows);

    let folds = kfold_indices(&truth, 3, 0)?;
    for f in 0..folds.k {
        let (train, test) = folds.split(f);
        println!("fold {f}: train {train:?} test {test:?}");
    }
    Ok(())
}
