//! Frame decoding, begin-cluster collapse and boundary timestamps.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::classifier::ProbMatrix;
use crate::error::{Error, Result};
use crate::labeling::{FrameLabel, FrameLabelSeq};

/// Which frame of a begin cluster stands for the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SelectionStrategy {
    First,
    #[default]
    Mid,
    Last,
}

impl SelectionStrategy {
    pub const ALL: [SelectionStrategy; 3] = [Self::First, Self::Mid, Self::Last];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::First => "first",
            Self::Mid => "mid",
            Self::Last => "last",
        }
    }
}

impl FromStr for SelectionStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "first" => Ok(Self::First),
            "mid" => Ok(Self::Mid),
            "last" => Ok(Self::Last),
            other => Err(Error::InvalidArgument(format!("unknown selection strategy {other:?}"))),
        }
    }
}

/// Where inside a frame its timestamp is placed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TimeConvention {
    #[default]
    Center,
    Onset,
}

/// Boundary times of one utterance, in seconds, strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryList {
    pub utterance_id: String,
    pub times: Vec<f64>,
}

impl BoundaryList {
    pub fn new(utterance_id: impl Into<String>, times: Vec<f64>) -> Self {
        Self {
            utterance_id: utterance_id.into(),
            times,
        }
    }

    pub fn is_sorted(&self) -> bool {
        self.times.windows(2).all(|w| w[0] <= w[1])
    }
}

/// Argmax per frame with ties going to the lowest class code. Frames at or
/// beyond `valid_frames` are forced to Outside.
pub fn decode(p: &ProbMatrix, valid_frames: usize) -> FrameLabelSeq {
    let labels = p
        .rows()
        .iter()
        .enumerate()
        .map(|(j, row)| {
            if j >= valid_frames {
                return FrameLabel::Outside;
            }
            let mut best = 0;
            for k in 1..3 {
                if row[k] > row[best] {
                    best = k;
                }
            }
            FrameLabel::ALL[best]
        })
        .collect();
    FrameLabelSeq {
        labels,
        frame_len: p.frame_len(),
        valid_frames: valid_frames.min(p.rows().len()),
    }
}

/// One frame index per maximal run of Begin frames. `Mid` takes the floor
/// of the run's index mean.
pub fn collapse_clusters(y: &FrameLabelSeq, strategy: SelectionStrategy) -> Vec<usize> {
    let mut out = Vec::new();
    let mut run_start: Option<usize> = None;
    let n = y.labels.len();
    for j in 0..=n {
        let is_begin = j < n && y.labels[j] == FrameLabel::Begin;
        match (run_start, is_begin) {
            (None, true) => run_start = Some(j),
            (Some(a), false) => {
                let b = j - 1;
                out.push(match strategy {
                    SelectionStrategy::First => a,
                    SelectionStrategy::Last => b,
                    SelectionStrategy::Mid => (a + b) / 2,
                });
                run_start = None;
            }
            _ => {}
        }
    }
    out
}

pub fn frames_to_times(
    utterance_id: &str,
    indices: &[usize],
    frame_len: usize,
    sample_rate: u32,
    convention: TimeConvention,
) -> BoundaryList {
    let offset = match convention {
        TimeConvention::Center => 0.5,
        TimeConvention::Onset => 0.0,
    };
    let times = indices
        .iter()
        .map(|&j| (j as f64 + offset) * frame_len as f64 / sample_rate as f64)
        .collect();
    BoundaryList::new(utterance_id, times)
}

/// Cut list: each boundary opens a segment that runs to the next boundary,
/// the last one to `duration_s`.
pub fn segment(boundaries: &BoundaryList, duration_s: f64) -> Vec<(f64, f64)> {
    let t = &boundaries.times;
    t.iter()
        .enumerate()
        .map(|(k, &start)| (start, t.get(k + 1).copied().unwrap_or(duration_s)))
        .collect()
}

pub const BOUNDARY_CSV_HEADER: &str = "utterance_id,time_s";
pub const SEGMENT_CSV_HEADER: &str = "utterance_id,start_s,end_s";

pub fn boundaries_to_csv<'a>(lists: impl IntoIterator<Item = &'a BoundaryList>) -> String {
    let mut out = String::from(BOUNDARY_CSV_HEADER);
    out.push('\n');
    for b in lists {
        for t in &b.times {
            let _ = writeln!(out, "{},{:.6}", b.utterance_id, t);
        }
    }
    out
}

pub fn segments_to_csv<'a>(rows: impl IntoIterator<Item = (&'a str, &'a [(f64, f64)])>) -> String {
    let mut out = String::from(SEGMENT_CSV_HEADER);
    out.push('\n');
    for (utt, segs) in rows {
        for (s, e) in segs {
            let _ = writeln!(out, "{utt},{s:.6},{e:.6}");
        }
    }
    out
}

/// Parses a boundary CSV into per-utterance sorted lists.
pub fn parse_boundary_csv(text: &str) -> Result<BTreeMap<String, BoundaryList>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == BOUNDARY_CSV_HEADER => {}
        _ => {
            return Err(Error::MalformedLine {
                line: 1,
                reason: format!("expected header `{BOUNDARY_CSV_HEADER}`"),
            })
        }
    }
    let mut out: BTreeMap<String, BoundaryList> = BTreeMap::new();
    for (idx, raw) in lines {
        if raw.trim().is_empty() {
            continue;
        }
        let bad = || Error::MalformedLine {
            line: idx + 1,
            reason: "expected `utterance_id,time_s`".into(),
        };
        let (utt, t) = raw.rsplit_once(',').ok_or_else(bad)?;
        let t: f64 = t.trim().parse().map_err(|_| bad())?;
        if !t.is_finite() || utt.is_empty() {
            return Err(bad());
        }
        out.entry(utt.to_string())
            .or_insert_with(|| BoundaryList::new(utt, Vec::new()))
            .times
            .push(t);
    }
    for b in out.values_mut() {
        b.times.sort_by(f64::total_cmp);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use FrameLabel::{Begin as B, Inside as I, Outside as O};

    fn seq(labels: Vec<FrameLabel>) -> FrameLabelSeq {
        let n = labels.len();
        FrameLabelSeq {
            labels,
            frame_len: 400,
            valid_frames: n,
        }
    }

    #[test]
    fn decode_argmax_ties_and_mask() {
        let p = ProbMatrix::new(
            vec![[0.5, 0.3, 0.2], [1.0 / 3.0; 3], [0.1, 0.1, 0.8], [0.9, 0.05, 0.05]],
            400,
        )
        .unwrap();
        let y = decode(&p, 3);
        assert_eq!(y.labels, vec![B, B, O, O]);
        assert_eq!(y.valid_frames, 3);
    }

    #[test]
    fn collapse_cases() {
        let y = seq(vec![O, O, O, O, B, B, B, I]);
        assert_eq!(collapse_clusters(&y, SelectionStrategy::Mid), vec![5]);
        assert_eq!(collapse_clusters(&y, SelectionStrategy::First), vec![4]);
        assert_eq!(collapse_clusters(&y, SelectionStrategy::Last), vec![6]);

        let y = seq(vec![O, O, O, O, B, B]);
        assert_eq!(collapse_clusters(&y, SelectionStrategy::Mid), vec![4]);

        let mut labels = vec![O; 11];
        labels[2] = B;
        labels[9] = B;
        for s in SelectionStrategy::ALL {
            assert_eq!(collapse_clusters(&seq(labels.clone()), s), vec![2, 9]);
        }
    }

    #[test]
    fn frame_times() {
        let b = frames_to_times("u", &[0, 5], 400, 16_000, TimeConvention::Center);
        assert!((b.times[0] - 0.0125).abs() < 1e-12);
        assert!((b.times[1] - 0.1375).abs() < 1e-12);
        assert!(frames_to_times("u", &[], 400, 16_000, TimeConvention::Center)
            .times
            .is_empty());
        let b = frames_to_times("u", &[3], 400, 16_000, TimeConvention::Onset);
        assert!((b.times[0] - 0.075).abs() < 1e-12);
    }

    #[test]
    fn segment_cases() {
        assert_eq!(
            segment(&BoundaryList::new("u", vec![0.1, 0.5]), 1.0),
            vec![(0.1, 0.5), (0.5, 1.0)]
        );
        assert!(segment(&BoundaryList::new("u", vec![]), 1.0).is_empty());
        assert_eq!(segment(&BoundaryList::new("u", vec![0.0]), 2.0), vec![(0.0, 2.0)]);
    }

    #[test]
    fn boundary_csv_round_trip() {
        let lists = [
            BoundaryList::new("a", vec![0.0125, 0.5]),
            BoundaryList::new("b", vec![1.25]),
        ];
        let text = boundaries_to_csv(&lists);
        assert_eq!(text, "utterance_id,time_s\na,0.012500\na,0.500000\nb,1.250000\n");
        let parsed = parse_boundary_csv(&text).unwrap();
        assert_eq!(parsed["a"], lists[0]);
        assert!(parse_boundary_csv("x\n").is_err());
    }
}
