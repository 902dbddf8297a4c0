//! Sample-level pre-labels, framed BIO labels and begin-label augmentation.

use std::fmt::Write as _;

use crate::corpus::WordAnnotationSeq;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointLabel {
    Start,
    Inside,
    Outside,
}

/// Framed class. The discriminants are the on-disk class codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum FrameLabel {
    Begin = 0,
    Inside = 1,
    Outside = 2,
}

impl FrameLabel {
    pub const ALL: [FrameLabel; 3] = [FrameLabel::Begin, FrameLabel::Inside, FrameLabel::Outside];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PointLabelSeq {
    pub labels: Vec<PointLabel>,
    pub sample_rate: u32,
}

/// Per-frame labels. Frames at index `>= valid_frames` cover padding only
/// and are always [`FrameLabel::Outside`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameLabelSeq {
    pub labels: Vec<FrameLabel>,
    pub frame_len: usize,
    pub valid_frames: usize,
}

impl FrameLabelSeq {
    pub fn num_frames(&self) -> usize {
        self.labels.len()
    }

    pub fn begin_indices(&self) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, l)| **l == FrameLabel::Begin)
            .map(|(i, _)| i)
            .collect()
    }

    /// Appends Outside frames up to `total_frames`; `valid_frames` is kept.
    pub fn padded_to(&self, total_frames: usize) -> Result<Self> {
        if total_frames < self.labels.len() {
            return Err(Error::InvalidArgument(format!(
                "cannot pad {} frames down to {total_frames}",
                self.labels.len()
            )));
        }
        let mut out = self.clone();
        out.labels.resize(total_frames, FrameLabel::Outside);
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AugmentConfig {
    pub radius: usize,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self { radius: 1 }
    }
}

/// How a frame without a start sample is classified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InsideRule {
    /// Inside when at least half of the frame's in-range samples are Inside.
    #[default]
    Majority,
    /// Inside when any sample is Inside.
    Any,
}

pub fn make_point_labels(ann: &WordAnnotationSeq, num_samples: usize, sample_rate: u32) -> Result<PointLabelSeq> {
    let mut labels = vec![PointLabel::Outside; num_samples];
    for e in ann.entries() {
        if e.end as usize > num_samples {
            return Err(Error::AnnotationOutOfRange {
                start: e.start,
                end: e.end,
                len: num_samples,
            });
        }
        let (s, t) = (e.start as usize, e.end as usize);
        for l in &mut labels[s + 1..t] {
            if *l != PointLabel::Start {
                *l = PointLabel::Inside;
            }
        }
        labels[s] = PointLabel::Start;
    }
    Ok(PointLabelSeq { labels, sample_rate })
}

/// Frame length in samples for a frame duration in milliseconds.
pub fn frame_len_samples(sample_rate: u32, frame_ms: f64) -> Result<usize> {
    if sample_rate == 0 {
        return Err(Error::InvalidArgument("sample rate must be positive".into()));
    }
    let len = (frame_ms / 1000.0 * sample_rate as f64).round();
    if !(len >= 1.0) {
        return Err(Error::FrameTooShort { frame_ms, sample_rate });
    }
    Ok(len as usize)
}

/// Number of frames covering `num_samples`: `ceil(num_samples / frame_len)`.
pub fn num_frames(num_samples: usize, frame_len: usize) -> usize {
    num_samples.div_ceil(frame_len)
}

pub fn frame_labels(p: &PointLabelSeq, frame_len: usize) -> FrameLabelSeq {
    frame_labels_with(p, frame_len, InsideRule::Majority)
}

/// Frames the pre-labels with non-overlapping windows. Precedence within a
/// frame is Begin > Inside > Outside.
pub fn frame_labels_with(p: &PointLabelSeq, frame_len: usize, rule: InsideRule) -> FrameLabelSeq {
    let frame_len = frame_len.max(1);
    let labels: Vec<FrameLabel> = p
        .labels
        .chunks(frame_len)
        .map(|chunk| {
            if chunk.contains(&PointLabel::Start) {
                return FrameLabel::Begin;
            }
            let inside = chunk.iter().filter(|l| **l == PointLabel::Inside).count();
            let is_inside = match rule {
                InsideRule::Majority => 2 * inside >= chunk.len(),
                InsideRule::Any => inside > 0,
            };
            if is_inside {
                FrameLabel::Inside
            } else {
                FrameLabel::Outside
            }
        })
        .collect();
    let valid_frames = labels.len();
    FrameLabelSeq {
        labels,
        frame_len,
        valid_frames,
    }
}

/// Number of word starts lost because another start shares their frame.
pub fn collapsed_starts(ann: &WordAnnotationSeq, frame_len: usize) -> usize {
    let mut frames: Vec<u64> = ann.entries().iter().map(|e| e.start / frame_len as u64).collect();
    let before = frames.len();
    frames.dedup();
    before - frames.len()
}

/// Marks every frame within `radius` of an input Begin frame as Begin.
/// Padded frames are never touched.
pub fn augment_labels(y: &FrameLabelSeq, cfg: AugmentConfig) -> FrameLabelSeq {
    let mut out = y.clone();
    if cfg.radius == 0 {
        return out;
    }
    let limit = y.valid_frames.min(y.labels.len());
    for j in y.begin_indices() {
        let lo = j.saturating_sub(cfg.radius);
        let hi = (j + cfg.radius).min(limit.saturating_sub(1));
        for l in &mut out.labels[lo..=hi] {
            *l = FrameLabel::Begin;
        }
    }
    out
}

/// `utterance_id<TAB>c0 c1 c2 ...`
pub fn format_label_line(utterance_id: &str, y: &FrameLabelSeq) -> String {
    let mut line = String::with_capacity(utterance_id.len() + 2 * y.labels.len() + 1);
    line.push_str(utterance_id);
    line.push('\t');
    for (i, l) in y.labels.iter().enumerate() {
        if i > 0 {
            line.push(' ');
        }
        let _ = write!(line, "{}", l.code());
    }
    line
}

/// Parses one label line. Every frame is treated as valid.
pub fn parse_label_line(line: &str, frame_len: usize, line_no: usize) -> Result<(String, FrameLabelSeq)> {
    let (utt, codes) = line.split_once('\t').ok_or_else(|| Error::MalformedLine {
        line: line_no,
        reason: "expected `utterance_id<TAB>codes`".into(),
    })?;
    let labels = codes
        .split_whitespace()
        .map(|c| {
            c.parse::<u8>()
                .ok()
                .and_then(FrameLabel::from_code)
                .ok_or_else(|| Error::MalformedLine {
                    line: line_no,
                    reason: format!("bad class code {c:?}"),
                })
        })
        .collect::<Result<Vec<_>>>()?;
    let valid_frames = labels.len();
    Ok((
        utt.to_string(),
        FrameLabelSeq {
            labels,
            frame_len,
            valid_frames,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::WordSpan;
    use FrameLabel::{Begin as B, Inside as I, Outside as O};

    fn ann(spans: &[(u64, u64)]) -> WordAnnotationSeq {
        WordAnnotationSeq::new(
            "u",
            spans
                .iter()
                .map(|&(start, end)| WordSpan {
                    start,
                    end,
                    word: "w".into(),
                })
                .collect(),
        )
        .unwrap()
    }

    fn seq(labels: Vec<FrameLabel>) -> FrameLabelSeq {
        let n = labels.len();
        FrameLabelSeq {
            labels,
            frame_len: 400,
            valid_frames: n,
        }
    }

    #[test]
    fn point_labels_single_word() {
        use PointLabel::{Inside as PI, Outside as PO, Start as PS};
        let p = make_point_labels(&ann(&[(4, 8)]), 12, 16_000).unwrap();
        assert_eq!(p.labels, vec![PO, PO, PO, PO, PS, PI, PI, PI, PO, PO, PO, PO]);
    }

    #[test]
    fn point_labels_empty_and_touching() {
        let p = make_point_labels(&WordAnnotationSeq::default(), 5, 16_000).unwrap();
        assert!(p.labels.iter().all(|l| *l == PointLabel::Outside));

        let p = make_point_labels(&ann(&[(0, 4), (4, 8)]), 8, 16_000).unwrap();
        assert_eq!(p.labels[4], PointLabel::Start);
        assert_eq!(p.labels[3], PointLabel::Inside);
    }

    #[test]
    fn point_labels_out_of_range() {
        assert!(matches!(
            make_point_labels(&ann(&[(4, 13)]), 12, 16_000),
            Err(Error::AnnotationOutOfRange { .. })
        ));
        assert!(make_point_labels(&ann(&[(4, 12)]), 12, 16_000).is_ok());
    }

    #[test]
    fn frame_len_cases() {
        assert_eq!(frame_len_samples(16_000, 25.0).unwrap(), 400);
        assert_eq!(frame_len_samples(8000, 25.0).unwrap(), 200);
        assert!(matches!(frame_len_samples(10, 25.0), Err(Error::FrameTooShort { .. })));
    }

    #[test]
    fn framing_cases() {
        let p = make_point_labels(&ann(&[(800, 2400)]), 4000, 16_000).unwrap();
        let y = frame_labels(&p, 400);
        assert_eq!(y.labels, vec![O, O, B, I, I, I, O, O, O, O]);
        assert_eq!(y.num_frames(), 10);

        let p = make_point_labels(&ann(&[(10, 20), (30, 40)]), 400, 16_000).unwrap();
        assert_eq!(frame_labels(&p, 400).labels, vec![B]);
        assert_eq!(collapsed_starts(&ann(&[(10, 20), (30, 40)]), 400), 1);
    }

    #[test]
    fn framing_mixed_frames_and_partial_tail() {
        // frame of 4 samples: 2 inside + 2 outside -> Inside under majority
        let p = make_point_labels(&ann(&[(0, 6)]), 10, 16_000).unwrap();
        let y = frame_labels(&p, 4);
        assert_eq!(y.labels, vec![B, I, O]);
        assert_eq!(y.num_frames(), 3);
        let p = make_point_labels(&ann(&[(0, 5)]), 12, 16_000).unwrap();
        assert_eq!(frame_labels(&p, 4).labels, vec![B, O, O]);
        assert_eq!(frame_labels_with(&p, 4, InsideRule::Any).labels, vec![B, I, O]);
    }

    #[test]
    fn augment_cases() {
        let y = seq(vec![O, O, B, I, I]);
        assert_eq!(
            augment_labels(&y, AugmentConfig { radius: 1 }).labels,
            vec![O, B, B, B, I]
        );
        assert_eq!(y.labels, vec![O, O, B, I, I]);

        let y = seq(vec![B, I, I, O]);
        assert_eq!(augment_labels(&y, AugmentConfig { radius: 1 }).labels, vec![B, B, I, O]);
        assert_eq!(augment_labels(&y, AugmentConfig { radius: 0 }), y);
    }

    #[test]
    fn augment_skips_padding() {
        let y = FrameLabelSeq {
            labels: vec![O, O, B, O, O],
            frame_len: 400,
            valid_frames: 3,
        };
        assert_eq!(
            augment_labels(&y, AugmentConfig { radius: 2 }).labels,
            vec![B, B, B, O, O]
        );
    }

    #[test]
    fn label_line_round_trip() {
        let y = seq(vec![O, B, I, I, O]);
        let line = format_label_line("utt1", &y);
        assert_eq!(line, "utt1\t2 0 1 1 2");
        assert_eq!(parse_label_line(&line, 400, 1).unwrap(), ("utt1".into(), y));
        assert!(parse_label_line("utt1\t0 3", 400, 7).is_err());
    }
}
