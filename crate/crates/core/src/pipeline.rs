//! Glue from raw corpus data to classifier-ready utterances.

use rayon::prelude::*;

use crate::classifier::{FeatureExtractor, LabeledUtterance};
use crate::corpus::{pad_to, standardize, StandardizationStats, Waveform, WordAnnotationSeq};
use crate::error::{Error, Result};
use crate::labeling::{
    collapsed_starts, frame_labels_with, frame_len_samples, make_point_labels, num_frames, InsideRule,
};

/// Standardizes, pads to `pad_len` samples (when given), labels and
/// featurizes each utterance. Labels cover the valid audio only; frames
/// over padding are Outside and excluded through `valid_frames`.
pub fn prepare_utterances(
    waves: &[Waveform],
    annotations: &[WordAnnotationSeq],
    stats: &StandardizationStats,
    frame_ms: f64,
    pad_len: Option<usize>,
    rule: InsideRule,
) -> Result<Vec<LabeledUtterance>> {
    if waves.len() != annotations.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} waveforms vs {} annotation sets",
            waves.len(),
            annotations.len()
        )));
    }
    let Some(first) = waves.first() else {
        return Ok(Vec::new());
    };
    let sample_rate = first.sample_rate;
    if let Some(w) = waves.iter().find(|w| w.sample_rate != sample_rate) {
        return Err(Error::SampleRateMismatch {
            expected: sample_rate,
            got: w.sample_rate,
        });
    }
    let frame_len = frame_len_samples(sample_rate, frame_ms)?;
    let extractor = FeatureExtractor::new(frame_len, sample_rate);

    waves
        .par_iter()
        .zip(annotations)
        .map(|(w, ann)| {
            let mut std_w = standardize(w, stats);
            if let Some(len) = pad_len {
                std_w = pad_to(&std_w, len)?;
            }
            let points = make_point_labels(ann, w.valid_len(), sample_rate)?;
            let collapsed = collapsed_starts(ann, frame_len);
            if collapsed > 0 {
                log::warn!(
                    "{}: {collapsed} word start(s) share a frame with another start",
                    w.utterance_id
                );
            }
            let labels = frame_labels_with(&points, frame_len, rule).padded_to(num_frames(std_w.len(), frame_len))?;
            let features = extractor.extract(&std_w);
            Ok(LabeledUtterance {
                features,
                labels,
                reference: ann.start_times(sample_rate),
            })
        })
        .collect()
}
