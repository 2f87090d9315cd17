use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::metrics::{percent, rates, ConfusionCounts, Rates};
use crate::atomic::write_atomic;
use crate::dataset::Label;
use crate::error::{Error, Result};

pub const REPORT_HEADER: [&str; 9] = [
    "scope",
    "strategy",
    "tp",
    "tn",
    "fp",
    "fn",
    "upcall_rate",
    "non_upcall_rate",
    "false_alarm",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub scope: String,
    pub strategy: String,
    pub counts: ConfusionCounts,
    pub rates: Rates,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub false_alarm: f64,
    pub upcall_detection: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub scope: String,
    pub strategy: String,
    pub points: Vec<SweepPoint>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub rows: Vec<ReportRow>,
    pub sweeps: Vec<Sweep>,
}

/// Operating points for "up-call when score >= t" as t falls through every
/// distinct score, starting from (0, 0) and ending at (1, 1).
pub fn threshold_sweep(scores: &[f64], truth: &[Label]) -> Result<Vec<SweepPoint>> {
    if scores.len() != truth.len() {
        return Err(Error::ShapeMismatch(format!("{} scores for {} labels", scores.len(), truth.len())));
    }
    let p = truth.iter().filter(|l| l.is_upcall()).count();
    let n = truth.len() - p;
    if p == 0 || n == 0 {
        return Err(Error::Data("threshold sweep needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![SweepPoint {
        false_alarm: 0.0,
        upcall_detection: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    for (j, &i) in order.iter().enumerate() {
        if truth[i].is_upcall() {
            tp += 1;
        } else {
            fp += 1;
        }
        let group_ends = order.get(j + 1).is_none_or(|&next| scores[next] != scores[i]);
        if group_ends {
            points.push(SweepPoint {
                false_alarm: fp as f64 / n as f64,
                upcall_detection: tp as f64 / p as f64,
            });
        }
    }
    Ok(points)
}

impl Report {
    pub fn push(&mut self, scope: impl Into<String>, strategy: impl Into<String>, counts: ConfusionCounts) -> Result<()> {
        let rates = rates(&counts)?;
        self.rows.push(ReportRow {
            scope: scope.into(),
            strategy: strategy.into(),
            counts,
            rates,
        });
        Ok(())
    }

    pub fn row(&self, scope: &str, strategy: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.scope == scope && r.strategy == strategy)
    }

    pub fn extend(&mut self, other: Report) {
        self.rows.extend(other.rows);
        self.sweeps.extend(other.sweeps);
    }

    /// Counts plus rates as percentages with two decimals.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(REPORT_HEADER).expect("in-memory csv");
        for r in &self.rows {
            let c = &r.counts;
            w.write_record([
                r.scope.clone(),
                r.strategy.clone(),
                c.tp.to_string(),
                c.tn.to_string(),
                c.fp.to_string(),
                c.fn_.to_string(),
                percent(r.rates.upcall_detection),
                percent(r.rates.non_upcall_detection),
                percent(r.rates.false_alarm),
            ])
            .expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("csv is utf-8")
    }

    /// Parse a report CSV. Rates are recomputed from the counts, and each
    /// printed percentage must agree with its recomputed value.
    pub fn from_csv(text: &str) -> Result<Report> {
        let bad = |m: String| Error::Format(format!("report csv: {m}"));
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let header = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
        if header.iter().ne(REPORT_HEADER) {
            return Err(bad(format!("unexpected header {:?}", header.iter().collect::<Vec<_>>())));
        }
        let mut report = Report::default();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let num = |i: usize| -> Result<usize> {
                rec[i].parse().map_err(|_| bad(format!("row {}: bad count {:?}", line + 1, &rec[i])))
            };
            let counts = ConfusionCounts {
                tp: num(2)?,
                tn: num(3)?,
                fp: num(4)?,
                fn_: num(5)?,
            };
            report.push(&rec[0], &rec[1], counts)?;
            let r = &report.rows.last().expect("row just pushed").rates;
            let printed = [&rec[6], &rec[7], &rec[8]];
            let expect = [r.upcall_detection, r.non_upcall_detection, r.false_alarm].map(percent);
            if printed.iter().zip(&expect).any(|(p, e)| *p != e.as_str()) {
                return Err(bad(format!("row {}: printed rates disagree with counts", line + 1)));
            }
        }
        Ok(report)
    }

    /// Fixed-width table for terminals and summary files.
    pub fn summary(&self) -> String {
        let w = self.rows.iter().map(|r| r.scope.len()).max().unwrap_or(5).max(5);
        let s = self.rows.iter().map(|r| r.strategy.len()).max().unwrap_or(8).max(8);
        let mut out = format!(
            "{:<w$}  {:<s$}  {:>6} {:>6} {:>6} {:>6}  {:>8} {:>8} {:>8}\n",
            "scope", "strategy", "tp", "tn", "fp", "fn", "upcall%", "nonup%", "falarm%"
        );
        for r in &self.rows {
            let c = &r.counts;
            let _ = writeln!(
                out,
                "{:<w$}  {:<s$}  {:>6} {:>6} {:>6} {:>6}  {:>8} {:>8} {:>8}",
                r.scope,
                r.strategy,
                c.tp,
                c.tn,
                c.fp,
                c.fn_,
                percent(r.rates.upcall_detection),
                percent(r.rates.non_upcall_detection),
                percent(r.rates.false_alarm)
            );
        }
        out
    }

    fn sweep_csv(s: &Sweep) -> String {
        let mut out = String::from("false_alarm,upcall_detection\n");
        for p in &s.points {
            let _ = writeln!(out, "{},{}", p.false_alarm, p.upcall_detection);
        }
        out
    }

    /// Writes `<stem>.csv`, `<stem>.txt` and one `<stem>_plot_<scope>_<strategy>.csv`
    /// per sweep into `dir`; returns the paths written.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
        let mut paths = vec![dir.join(format!("{stem}.csv")), dir.join(format!("{stem}.txt"))];
        write_atomic(&paths[0], self.to_csv().as_bytes())?;
        write_atomic(&paths[1], self.summary().as_bytes())?;
        for s in &self.sweeps {
            let p = dir.join(format!("{stem}_plot_{}_{}.csv", s.scope, s.strategy));
            write_atomic(&p, Self::sweep_csv(s).as_bytes())?;
            paths.push(p);
        }
        Ok(paths)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sweep_endpoints_and_monotone() {
        use Label::*;
        let scores = [0.9, 0.8, 0.8, 0.3, 0.1];
        let truth = [Upcall, Noise, Upcall, Noise, Upcall];
        let pts = threshold_sweep(&scores, &truth).unwrap();
        assert_eq!(pts.len(), 5);
        assert_eq!((pts[0].false_alarm, pts[0].upcall_detection), (0.0, 0.0));
        assert_eq!((pts[4].false_alarm, pts[4].upcall_detection), (1.0, 1.0));
        assert_eq!((pts[2].false_alarm, pts[2].upcall_detection), (0.5, 2.0 / 3.0));
        assert!(pts.windows(2).all(|w| w[0].false_alarm <= w[1].false_alarm
            && w[0].upcall_detection <= w[1].upcall_detection));
    }

    #[test]
    fn csv_header_and_summary() {
        let mut r = Report::default();
        r.push("ensemble", "vote", ConfusionCounts { tp: 172, tn: 1231, fp: 36, fn_: 61 }).unwrap();
        let csv = r.to_csv();
        assert!(csv.starts_with("scope,strategy,tp,tn,fp,fn,upcall_rate,non_upcall_rate,false_alarm\n"));
        assert!(csv.contains("ensemble,vote,172,1231,36,61,73.82,97.16,2.84"));
        assert!(r.summary().contains("73.82"));
    }

    #[test]
    fn tampered_csv_rejected() {
        let text = "scope,strategy,tp,tn,fp,fn,upcall_rate,non_upcall_rate,false_alarm\n\
                    ensemble,vote,1,1,1,1,50.00,50.00,40.00\n";
        assert!(Report::from_csv(text).is_err());
        assert!(Report::from_csv("a,b\n1,2\n").is_err());
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_exact(rows in proptest::collection::vec((1usize..400, 0usize..3000, 0usize..3000, 0usize..400), 1..12)) {
            let mut r = Report::default();
            for (i, (tp, tn, fp, fn_)) in rows.into_iter().enumerate() {
                prop_assume!(tn + fp > 0);
                r.push(format!("cnn_{i}"), "member", ConfusionCounts { tp, tn, fp, fn_ }).unwrap();
            }
            let back = Report::from_csv(&r.to_csv()).unwrap();
            prop_assert_eq!(&back.rows, &r.rows);
            for row in &back.rows {
                prop_assert_eq!(row.rates.false_alarm + row.rates.non_upcall_detection, 1.0);
            }
        }
    }
}
