use serde::{Deserialize, Serialize};

use crate::dataset::Label;
use crate::error::{Error, Result};

/// Up-call is the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionCounts {
    /// True up-calls, `tp + fn`.
    pub fn positives(&self) -> usize {
        self.tp + self.fn_
    }

    /// True non-up-calls, `tn + fp`.
    pub fn negatives(&self) -> usize {
        self.tn + self.fp
    }

    pub fn total(&self) -> usize {
        self.positives() + self.negatives()
    }

    pub fn add(&mut self, predicted: Label, truth: Label) {
        match (predicted, truth) {
            (Label::Upcall, Label::Upcall) => self.tp += 1,
            (Label::Noise, Label::Noise) => self.tn += 1,
            (Label::Upcall, Label::Noise) => self.fp += 1,
            (Label::Noise, Label::Upcall) => self.fn_ += 1,
        }
    }
}

impl std::ops::AddAssign for ConfusionCounts {
    fn add_assign(&mut self, o: ConfusionCounts) {
        self.tp += o.tp;
        self.tn += o.tn;
        self.fp += o.fp;
        self.fn_ += o.fn_;
    }
}

pub fn confusion_counts(predictions: &[Label], truth: &[Label]) -> Result<ConfusionCounts> {
    if predictions.len() != truth.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} predictions for {} labels",
            predictions.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::InvalidInput("no predictions to count".into()));
    }
    let mut c = ConfusionCounts::default();
    for (&p, &t) in predictions.iter().zip(truth) {
        c.add(p, t);
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub upcall_detection: f64,
    pub non_upcall_detection: f64,
    pub false_alarm: f64,
}

/// `tp/P`, `tn/N` and `1 - tn/N`. The false-alarm rate equals `fp/N`
/// mathematically; computing it as the complement makes
/// `false_alarm + non_upcall_detection == 1.0` hold exactly in floating point.
pub fn rates(c: &ConfusionCounts) -> Result<Rates> {
    if c.positives() == 0 || c.negatives() == 0 {
        return Err(Error::Data(format!(
            "rates need both classes present (P = {}, N = {})",
            c.positives(),
            c.negatives()
        )));
    }
    let non_upcall_detection = c.tn as f64 / c.negatives() as f64;
    Ok(Rates {
        upcall_detection: c.tp as f64 / c.positives() as f64,
        non_upcall_detection,
        false_alarm: 1.0 - non_upcall_detection,
    })
}

/// Percentage rounded to two decimals, as printed in reports.
pub fn percent(rate: f64) -> String {
    format!("{:.2}", 100.0 * rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn counts(tp: usize, tn: usize, fp: usize, fn_: usize) -> ConfusionCounts {
        ConfusionCounts { tp, tn, fp, fn_ }
    }

    #[test]
    fn count_examples() {
        use Label::*;
        let truth = [Upcall, Upcall, Noise, Noise, Noise];
        assert_eq!(confusion_counts(&truth, &truth).unwrap(), counts(2, 3, 0, 0));
        assert_eq!(confusion_counts(&[Upcall; 5], &truth).unwrap(), counts(2, 0, 3, 0));
        let inv: Vec<Label> = truth.iter().map(|l| if l.is_upcall() { Noise } else { Upcall }).collect();
        let c = confusion_counts(&inv, &truth).unwrap();
        assert_eq!((c.tp, c.tn), (0, 0));
        assert!(confusion_counts(&[Upcall], &truth).is_err());
        assert!(confusion_counts(&[], &[]).is_err());
    }

    #[test]
    fn perfect_detector() {
        let r = rates(&counts(7, 9, 0, 0)).unwrap();
        assert_eq!((r.upcall_detection, r.non_upcall_detection, r.false_alarm), (1.0, 1.0, 0.0));
        assert!(rates(&counts(0, 3, 1, 0)).is_err());
        assert!(rates(&counts(2, 0, 0, 1)).is_err());
    }

    proptest! {
        #[test]
        fn complement_is_exact(tp in 0usize..500, tn in 0usize..5000, fp in 0usize..5000, fn_ in 0usize..500) {
            prop_assume!(tp + fn_ > 0 && tn + fp > 0);
            let r = rates(&counts(tp, tn, fp, fn_)).unwrap();
            prop_assert_eq!(r.false_alarm + r.non_upcall_detection, 1.0);
            prop_assert!((r.false_alarm - fp as f64 / (tn + fp) as f64).abs() < 1e-15);
            for v in [r.upcall_detection, r.non_upcall_detection, r.false_alarm] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }

        #[test]
        fn counts_ignore_order(pairs in proptest::collection::vec((any::<bool>(), any::<bool>()), 1..60), rot in 0usize..60) {
            let lab = |b: bool| if b { Label::Upcall } else { Label::Noise };
            let p: Vec<Label> = pairs.iter().map(|x| lab(x.0)).collect();
            let t: Vec<Label> = pairs.iter().map(|x| lab(x.1)).collect();
            let mut rp = p.clone();
            let mut rt = t.clone();
            let k = rot % pairs.len();
            rp.rotate_left(k);
            rt.rotate_left(k);
            rp.reverse();
            rt.reverse();
            prop_assert_eq!(confusion_counts(&p, &t).unwrap(), confusion_counts(&rp, &rt).unwrap());
        }
    }
}
