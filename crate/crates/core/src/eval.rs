//! Tolerance-window boundary matching and segmentation scores (precision,
//! recall, F-value, over-segmentation and R-value).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::postprocess::BoundaryList;

/// Slack added to the tolerance so that boundaries read back from
/// microsecond-rounded CSV still match at the window edge.
pub const TOLERANCE_SLACK_S: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MatchCounts {
    pub n_hit: usize,
    pub n_f: usize,
    pub n_ref: usize,
}

impl std::ops::Add for MatchCounts {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        Self {
            n_hit: self.n_hit + rhs.n_hit,
            n_f: self.n_f + rhs.n_f,
            n_ref: self.n_ref + rhs.n_ref,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    pub counts: MatchCounts,
    pub prc: f64,
    pub rcl: f64,
    pub f_value: f64,
    pub os: f64,
    pub r1: f64,
    pub r2: f64,
    pub r_value: f64,
    pub tolerance_s: f64,
}

impl EvalReport {
    pub const CSV_HEADER: &'static str = "n_hit,n_f,n_ref,prc,rcl,f_value,os,r1,r2,r_value,tolerance_s";

    /// One `key=value` pair per line.
    pub fn to_key_value(&self) -> String {
        let mut out = String::new();
        let c = self.counts;
        let _ = writeln!(out, "n_hit={}", c.n_hit);
        let _ = writeln!(out, "n_f={}", c.n_f);
        let _ = writeln!(out, "n_ref={}", c.n_ref);
        for (k, v) in self.reals() {
            let _ = writeln!(out, "{k}={v:.6}");
        }
        out
    }

    pub fn to_csv_row(&self) -> String {
        let c = self.counts;
        let mut row = format!("{},{},{}", c.n_hit, c.n_f, c.n_ref);
        for (_, v) in self.reals() {
            let _ = write!(row, ",{v:.6}");
        }
        row
    }

    fn reals(&self) -> [(&'static str, f64); 8] {
        [
            ("prc", self.prc),
            ("rcl", self.rcl),
            ("f_value", self.f_value),
            ("os", self.os),
            ("r1", self.r1),
            ("r2", self.r2),
            ("r_value", self.r_value),
            ("tolerance_s", self.tolerance_s),
        ]
    }
}

pub fn within_tolerance(a: f64, b: f64, tolerance_s: f64) -> bool {
    (a - b).abs() <= tolerance_s + TOLERANCE_SLACK_S
}

/// One-to-one matching of predicted to reference boundaries within
/// `tolerance_s`. Both inputs must be sorted. Walking both lists in time
/// order and pairing heads whenever they fall inside the window yields a
/// maximum-cardinality matching for points on a line.
pub fn match_boundaries(pred: &[f64], reference: &[f64], tolerance_s: f64) -> Result<MatchCounts> {
    if !(tolerance_s >= 0.0) {
        return Err(Error::InvalidArgument("tolerance must be non-negative".into()));
    }
    let sorted = |v: &[f64]| v.windows(2).all(|w| w[0] <= w[1]);
    if !sorted(pred) || !sorted(reference) {
        return Err(Error::Unsorted);
    }
    let (mut i, mut j, mut hits) = (0, 0, 0);
    while i < pred.len() && j < reference.len() {
        if within_tolerance(pred[i], reference[j], tolerance_s) {
            hits += 1;
            i += 1;
            j += 1;
        } else if pred[i] < reference[j] {
            i += 1;
        } else {
            j += 1;
        }
    }
    Ok(MatchCounts {
        n_hit: hits,
        n_f: pred.len(),
        n_ref: reference.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Composite {
    pub f_value: f64,
    pub r1: f64,
    pub r2: f64,
    pub r_value: f64,
}

/// F-value and R-value from precision, recall and over-segmentation.
pub fn compose_scores(prc: f64, rcl: f64, os: f64) -> Composite {
    let f_value = if prc + rcl > 0.0 {
        2.0 * prc * rcl / (prc + rcl)
    } else {
        0.0
    };
    let r1 = ((1.0 - rcl).powi(2) + os * os).sqrt();
    let r2 = (-os + rcl - 1.0) / std::f64::consts::SQRT_2;
    let r_value = 1.0 - (r1.abs() + r2.abs()) / 2.0;
    Composite {
        f_value,
        r1,
        r2,
        r_value,
    }
}

/// Builds a report from rates directly; counts are left at zero.
pub fn report_from_rates(prc: f64, rcl: f64, os: f64, tolerance_s: f64) -> EvalReport {
    let c = compose_scores(prc, rcl, os);
    EvalReport {
        counts: MatchCounts::default(),
        prc,
        rcl,
        f_value: c.f_value,
        os,
        r1: c.r1,
        r2: c.r2,
        r_value: c.r_value,
        tolerance_s,
    }
}

pub fn metrics_from_counts(c: MatchCounts, tolerance_s: f64) -> Result<EvalReport> {
    if c.n_ref == 0 {
        return Err(Error::NoReference);
    }
    if c.n_hit > c.n_f.min(c.n_ref) {
        return Err(Error::InvalidArgument(format!(
            "n_hit {} exceeds min(n_f, n_ref)",
            c.n_hit
        )));
    }
    let prc = if c.n_f == 0 { 0.0 } else { c.n_hit as f64 / c.n_f as f64 };
    let rcl = c.n_hit as f64 / c.n_ref as f64;
    let os = c.n_f as f64 / c.n_ref as f64 - 1.0;
    Ok(EvalReport {
        counts: c,
        ..report_from_rates(prc, rcl, os, tolerance_s)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Aggregation {
    /// Pool counts over utterances, then compute rates.
    #[default]
    Micro,
    /// Average per-utterance precision, recall and OS, then compose.
    /// Utterances without reference boundaries are skipped.
    Macro,
}

pub fn evaluate_corpus(
    preds: &BTreeMap<String, BoundaryList>,
    refs: &BTreeMap<String, BoundaryList>,
    tolerance_s: f64,
) -> Result<EvalReport> {
    evaluate_corpus_with(preds, refs, tolerance_s, Aggregation::Micro)
}

pub fn evaluate_corpus_with(
    preds: &BTreeMap<String, BoundaryList>,
    refs: &BTreeMap<String, BoundaryList>,
    tolerance_s: f64,
    aggregation: Aggregation,
) -> Result<EvalReport> {
    if let Some(k) = preds.keys().find(|k| !refs.contains_key(*k)) {
        return Err(Error::UtteranceMismatch(format!(
            "{k} has predictions but no reference"
        )));
    }
    if let Some(k) = refs.keys().find(|k| !preds.contains_key(*k)) {
        return Err(Error::UtteranceMismatch(format!(
            "{k} has a reference but no predictions"
        )));
    }
    let per_utt = refs
        .iter()
        .map(|(k, r)| match_boundaries(&preds[k].times, &r.times, tolerance_s))
        .collect::<Result<Vec<_>>>()?;
    let pooled = per_utt.iter().copied().fold(MatchCounts::default(), |a, b| a + b);
    match aggregation {
        Aggregation::Micro => metrics_from_counts(pooled, tolerance_s),
        Aggregation::Macro => {
            let reports = per_utt
                .iter()
                .filter(|c| c.n_ref > 0)
                .map(|&c| metrics_from_counts(c, tolerance_s))
                .collect::<Result<Vec<_>>>()?;
            if reports.is_empty() {
                return Err(Error::NoReference);
            }
            let n = reports.len() as f64;
            let mean = |f: fn(&EvalReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
            Ok(EvalReport {
                counts: pooled,
                ..report_from_rates(mean(|r| r.prc), mean(|r| r.rcl), mean(|r| r.os), tolerance_s)
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn match_examples() {
        assert_eq!(match_boundaries(&[1.00], &[1.02], 0.04).unwrap().n_hit, 1);
        let c = match_boundaries(&[1.00, 1.03], &[1.02], 0.04).unwrap();
        assert_eq!((c.n_hit, c.n_f, c.n_ref), (1, 2, 1));
        assert_eq!(match_boundaries(&[1.00], &[1.05], 0.04).unwrap().n_hit, 0);
        assert!(matches!(
            match_boundaries(&[2.0, 1.0], &[1.0], 0.04),
            Err(Error::Unsorted)
        ));
        assert!(match_boundaries(&[1.0], &[1.0], -0.1).is_err());
    }

    #[test]
    fn compose_perfect() {
        let c = compose_scores(1.0, 1.0, 0.0);
        assert_eq!((c.f_value, c.r_value), (1.0, 1.0));
        assert_eq!(compose_scores(0.0, 0.0, -1.0).f_value, 0.0);
    }

    #[test]
    fn counts_identity() {
        let r = metrics_from_counts(
            MatchCounts {
                n_hit: 10,
                n_f: 10,
                n_ref: 10,
            },
            0.04,
        )
        .unwrap();
        assert_eq!((r.prc, r.rcl, r.f_value, r.os, r.r_value), (1.0, 1.0, 1.0, 0.0, 1.0));
    }

    #[test]
    fn counts_no_detections() {
        let r = metrics_from_counts(
            MatchCounts {
                n_hit: 0,
                n_f: 0,
                n_ref: 10,
            },
            0.04,
        )
        .unwrap();
        assert_eq!((r.prc, r.rcl, r.f_value, r.os), (0.0, 0.0, 0.0, -1.0));
        assert_abs_diff_eq!(r.r1, 2f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(r.r2, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.r_value, 0.292_893_218_813_452_4, epsilon = 1e-12);
    }

    #[test]
    fn counts_hand_case() {
        // Values evaluated independently in Python from the defining formulas.
        let r = metrics_from_counts(
            MatchCounts {
                n_hit: 3,
                n_f: 6,
                n_ref: 4,
            },
            0.04,
        )
        .unwrap();
        assert_abs_diff_eq!(r.prc, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(r.rcl, 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(r.os, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(r.f_value, 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(r.r1, 0.559_016_994_374_947_5, epsilon = 1e-12);
        assert_abs_diff_eq!(r.r2, -0.530_330_085_889_910_6, epsilon = 1e-12);
        assert_abs_diff_eq!(r.r_value, 0.455_326_459_867_571, epsilon = 1e-12);
    }

    #[test]
    fn counts_require_reference() {
        assert!(matches!(
            metrics_from_counts(MatchCounts::default(), 0.04),
            Err(Error::NoReference)
        ));
    }

    fn lists(entries: &[(&str, &[f64])]) -> BTreeMap<String, BoundaryList> {
        entries
            .iter()
            .map(|(k, t)| (k.to_string(), BoundaryList::new(*k, t.to_vec())))
            .collect()
    }

    #[test]
    fn corpus_pooling() {
        let refs = lists(&[("a", &[0.1, 0.5]), ("b", &[0.2, 0.9])]);
        let preds = lists(&[("a", &[0.1]), ("b", &[0.9])]);
        let r = evaluate_corpus(&preds, &refs, 0.04).unwrap();
        assert_eq!(
            r.counts,
            MatchCounts {
                n_hit: 2,
                n_f: 2,
                n_ref: 4
            }
        );
        assert_eq!((r.prc, r.rcl), (1.0, 0.5));

        let r = evaluate_corpus(&refs, &refs, 0.04).unwrap();
        assert_eq!(r.r_value, 1.0);

        let single_p = lists(&[("a", &[0.1, 0.3])]);
        let single_r = lists(&[("a", &[0.1, 0.5])]);
        let r = evaluate_corpus(&single_p, &single_r, 0.04).unwrap();
        let direct = metrics_from_counts(match_boundaries(&[0.1, 0.3], &[0.1, 0.5], 0.04).unwrap(), 0.04).unwrap();
        assert_eq!(r, direct);
    }

    #[test]
    fn corpus_rejects_mismatched_keys() {
        let refs = lists(&[("a", &[0.1])]);
        let preds = lists(&[("b", &[0.1])]);
        assert!(matches!(
            evaluate_corpus(&preds, &refs, 0.04),
            Err(Error::UtteranceMismatch(_))
        ));
    }

    #[test]
    fn macro_average() {
        let refs = lists(&[("a", &[0.1, 0.5]), ("b", &[0.2, 0.4, 0.6, 0.8])]);
        let preds = lists(&[("a", &[0.1, 0.5]), ("b", &[0.2])]);
        let r = evaluate_corpus_with(&preds, &refs, 0.04, Aggregation::Macro).unwrap();
        assert_abs_diff_eq!(r.rcl, (1.0 + 0.25) / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.os, (0.0 - 0.75) / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn report_formats() {
        let r = metrics_from_counts(
            MatchCounts {
                n_hit: 3,
                n_f: 6,
                n_ref: 4,
            },
            0.04,
        )
        .unwrap();
        let kv = r.to_key_value();
        assert!(kv.starts_with("n_hit=3\nn_f=6\nn_ref=4\nprc=0.500000\n"));
        assert!(kv.contains("r_value=0.455326\n"));
        assert!(kv.ends_with("tolerance_s=0.040000\n"));
        assert_eq!(
            r.to_csv_row().split(',').count(),
            EvalReport::CSV_HEADER.split(',').count()
        );
    }
}
