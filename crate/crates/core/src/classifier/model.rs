use std::fmt::Write as _;

use super::features::FeatureMatrix;
use crate::error::{Error, Result};
use crate::labeling::FrameLabelSeq;

pub const NUM_CLASSES: usize = 3;

/// Probabilities are clamped to this before taking logs.
pub const PROB_EPS: f64 = 1e-12;

/// Raw per-frame class scores in Begin, Inside, Outside order.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitsMatrix {
    pub utterance_id: String,
    pub frame_duration_us: u32,
    pub rows: Vec<[f32; NUM_CLASSES]>,
}

impl LogitsMatrix {
    pub fn new(utterance_id: impl Into<String>, frame_duration_us: u32, rows: Vec<[f32; NUM_CLASSES]>) -> Result<Self> {
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite logit".into()));
        }
        Ok(Self {
            utterance_id: utterance_id.into(),
            frame_duration_us,
            rows,
        })
    }

    pub fn num_frames(&self) -> usize {
        self.rows.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbMatrix {
    rows: Vec<[f64; NUM_CLASSES]>,
    frame_len: usize,
}

impl ProbMatrix {
    /// Rows must lie in [0, 1] and sum to 1 within 1e-6.
    pub fn new(rows: Vec<[f64; NUM_CLASSES]>, frame_len: usize) -> Result<Self> {
        for (j, row) in rows.iter().enumerate() {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) || (sum - 1.0).abs() > 1e-6 {
                return Err(Error::InvalidArgument(format!(
                    "row {j} is not a distribution: {row:?}"
                )));
            }
        }
        Ok(Self { rows, frame_len })
    }

    pub fn rows(&self) -> &[[f64; NUM_CLASSES]] {
        &self.rows
    }

    pub fn frame_len(&self) -> usize {
        self.frame_len
    }
}

pub fn softmax_row(logits: [f64; NUM_CLASSES]) -> [f64; NUM_CLASSES] {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp = logits.map(|l| (l - max).exp());
    let sum: f64 = exp.iter().sum();
    exp.map(|e| e / sum)
}

/// Row-wise softmax. `frame_len` is carried over to the result for
/// downstream decoding.
pub fn softmax(l: &LogitsMatrix, frame_len: usize) -> ProbMatrix {
    ProbMatrix {
        rows: l.rows.iter().map(|r| softmax_row(r.map(f64::from))).collect(),
        frame_len,
    }
}

/// Mean over utterances of the summed per-frame negative log-likelihood of
/// the true class. Frames at or beyond `valid_frames` are ignored.
pub fn cross_entropy(batch: &[(&FrameLabelSeq, &ProbMatrix)]) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::ShapeMismatch("empty batch".into()));
    }
    let mut total = 0.0;
    for (i, (y, p)) in batch.iter().enumerate() {
        if y.labels.len() != p.rows.len() {
            return Err(Error::ShapeMismatch(format!(
                "utterance {i}: {} labels vs {} probability rows",
                y.labels.len(),
                p.rows.len()
            )));
        }
        let valid = y.valid_frames.min(y.labels.len());
        total -= y.labels[..valid]
            .iter()
            .zip(&p.rows)
            .map(|(l, row)| row[l.code() as usize].max(PROB_EPS).ln())
            .sum::<f64>();
    }
    Ok(total / batch.len() as f64)
}

/// Affine classifier over z-scored features. `weights` has `d + 1` rows;
/// the last row is the bias.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub weights: Vec<[f64; NUM_CLASSES]>,
    pub feature_mean: Vec<f64>,
    pub feature_std: Vec<f64>,
}

const MODEL_HEADER: &str = "segwords-model v1";

impl ModelParams {
    pub fn zeros(feature_mean: Vec<f64>, feature_std: Vec<f64>) -> Self {
        let d = feature_mean.len();
        Self {
            weights: vec![[0.0; NUM_CLASSES]; d + 1],
            feature_mean,
            feature_std,
        }
    }

    pub fn dim(&self) -> usize {
        self.feature_mean.len()
    }

    /// z-scored features followed by a constant 1 for the bias.
    pub fn augmented_input(&self, row: &[f64]) -> Vec<f64> {
        let mut x: Vec<f64> = row
            .iter()
            .zip(self.feature_mean.iter().zip(&self.feature_std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect();
        x.push(1.0);
        x
    }

    pub fn logits_row(&self, row: &[f64]) -> [f64; NUM_CLASSES] {
        let x = self.augmented_input(row);
        let mut out = [0.0; NUM_CLASSES];
        for (xi, w) in x.iter().zip(&self.weights) {
            for k in 0..NUM_CLASSES {
                out[k] += xi * w[k];
            }
        }
        out
    }

    fn check_dim(&self, f: &FeatureMatrix) -> Result<()> {
        let d = f.rows.first().map_or(self.dim(), |r| r.len());
        if d != self.dim() || self.weights.len() != d + 1 || self.feature_std.len() != d {
            return Err(Error::ShapeMismatch(format!(
                "model expects {} features, got {d}",
                self.dim()
            )));
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.weights
            .iter()
            .flatten()
            .chain(&self.feature_mean)
            .chain(&self.feature_std)
            .all(|v| v.is_finite())
    }

    /// Versioned text: header, `dims d 3`, then the feature means, feature
    /// standard deviations and weight rows as whitespace-separated reals.
    pub fn to_text(&self) -> String {
        let mut out = format!("{MODEL_HEADER}\ndims {} {NUM_CLASSES}\n", self.dim());
        let join = |v: &[f64]| v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(" ");
        let _ = writeln!(out, "{}", join(&self.feature_mean));
        let _ = writeln!(out, "{}", join(&self.feature_std));
        for w in &self.weights {
            let _ = writeln!(out, "{}", join(w));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(MODEL_HEADER) {
            return Err(Error::MalformedLine {
                line: 1,
                reason: format!("expected `{MODEL_HEADER}`"),
            });
        }
        let bad_dims = || Error::MalformedLine {
            line: 2,
            reason: "expected `dims <d> 3`".into(),
        };
        let dims: Vec<&str> = lines.next().ok_or_else(bad_dims)?.split_whitespace().collect();
        let [tag, d, p] = dims[..] else {
            return Err(bad_dims());
        };
        let d: usize = d.parse().map_err(|_| bad_dims())?;
        if tag != "dims" || p != "3" {
            return Err(bad_dims());
        }
        let values = lines
            .flat_map(str::split_whitespace)
            .map(|t| {
                t.parse::<f64>().map_err(|_| Error::MalformedLine {
                    line: 0,
                    reason: format!("bad real {t:?}"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        let expected = 2 * d + (d + 1) * NUM_CLASSES;
        if values.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "expected {expected} reals, got {}",
                values.len()
            )));
        }
        let params = Self {
            feature_mean: values[..d].to_vec(),
            feature_std: values[d..2 * d].to_vec(),
            weights: values[2 * d..]
                .chunks(NUM_CLASSES)
                .map(|c| [c[0], c[1], c[2]])
                .collect(),
        };
        if !params.all_finite() || params.feature_std.iter().any(|s| *s <= 0.0) {
            return Err(Error::InvalidArgument("model contains invalid values".into()));
        }
        Ok(params)
    }
}

/// Per-dimension mean and standard deviation over the valid frames of the
/// given utterances. Constant dimensions get std 1.
pub fn fit_normalization<'a>(data: impl IntoIterator<Item = (&'a FeatureMatrix, usize)>) -> (Vec<f64>, Vec<f64>) {
    let mut sum: Vec<f64> = Vec::new();
    let mut sq: Vec<f64> = Vec::new();
    let mut n = 0usize;
    let data: Vec<_> = data.into_iter().collect();
    for (f, valid) in &data {
        for row in f.rows.iter().take(*valid) {
            if sum.is_empty() {
                sum = vec![0.0; row.len()];
                sq = vec![0.0; row.len()];
            }
            for (s, v) in sum.iter_mut().zip(row) {
                *s += v;
            }
            n += 1;
        }
    }
    if n == 0 {
        return (sum, sq);
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
    for (f, valid) in &data {
        for row in f.rows.iter().take(*valid) {
            for ((q, v), m) in sq.iter_mut().zip(row).zip(&mean) {
                *q += (v - m) * (v - m);
            }
        }
    }
    let std = sq
        .iter()
        .map(|q| {
            let s = (q / n as f64).sqrt();
            if s > 1e-12 {
                s
            } else {
                1.0
            }
        })
        .collect();
    (mean, std)
}

/// Frame logits of one utterance. `frame_duration_us` is derived from the
/// feature frame length and sample rate.
pub fn predict(params: &ModelParams, f: &FeatureMatrix) -> Result<LogitsMatrix> {
    params.check_dim(f)?;
    let rows = f.rows.iter().map(|r| params.logits_row(r).map(|v| v as f32)).collect();
    let frame_duration_us = (f.frame_len as f64 * 1e6 / f.sample_rate as f64).round() as u32;
    LogitsMatrix::new(f.utterance_id.clone(), frame_duration_us, rows)
}

/// One training instance: features and (possibly augmented) labels.
#[derive(Debug, Clone, Copy)]
pub struct Example<'a> {
    pub features: &'a FeatureMatrix,
    pub labels: &'a FrameLabelSeq,
}

/// Gradient with the shape of [`ModelParams::weights`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub weights: Vec<[f64; NUM_CLASSES]>,
}

fn check_example(params: &ModelParams, ex: &Example<'_>) -> Result<()> {
    params.check_dim(ex.features)?;
    if ex.features.rows.len() != ex.labels.labels.len() {
        return Err(Error::ShapeMismatch(format!(
            "{}: {} feature rows vs {} labels",
            ex.features.utterance_id,
            ex.features.rows.len(),
            ex.labels.labels.len()
        )));
    }
    Ok(())
}

/// Cross-entropy of the model on a batch, evaluated in full precision.
pub fn loss(params: &ModelParams, batch: &[Example<'_>]) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::ShapeMismatch("empty batch".into()));
    }
    let mut probs = Vec::with_capacity(batch.len());
    for ex in batch {
        check_example(params, ex)?;
        let rows = ex
            .features
            .rows
            .iter()
            .map(|r| softmax_row(params.logits_row(r)))
            .collect();
        probs.push(ProbMatrix {
            rows,
            frame_len: ex.features.frame_len,
        });
    }
    let pairs: Vec<_> = batch.iter().zip(&probs).map(|(ex, p)| (ex.labels, p)).collect();
    cross_entropy(&pairs)
}

/// Analytic gradient of [`loss`] with respect to the weights:
/// `Σ x ⊗ (p − onehot(y)) / N` over valid frames.
pub fn grad_cross_entropy(params: &ModelParams, batch: &[Example<'_>]) -> Result<Gradient> {
    if batch.is_empty() {
        return Err(Error::ShapeMismatch("empty batch".into()));
    }
    let mut g = vec![[0.0; NUM_CLASSES]; params.weights.len()];
    for ex in batch {
        check_example(params, ex)?;
        let valid = ex.labels.valid_frames.min(ex.labels.labels.len());
        for (row, label) in ex.features.rows.iter().zip(&ex.labels.labels).take(valid) {
            let x = params.augmented_input(row);
            let mut delta = softmax_row(params.logits_row(row));
            delta[label.code() as usize] -= 1.0;
            for (gi, xi) in g.iter_mut().zip(&x) {
                for k in 0..NUM_CLASSES {
                    gi[k] += xi * delta[k];
                }
            }
        }
    }
    let n = batch.len() as f64;
    for gi in &mut g {
        for v in gi.iter_mut() {
            *v /= n;
        }
    }
    Ok(Gradient { weights: g })
}
