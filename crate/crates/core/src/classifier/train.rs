use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::features::FeatureMatrix;
use super::model::{fit_normalization, grad_cross_entropy, loss, softmax_row, Example, ModelParams, ProbMatrix};
use crate::error::{Error, Result};
use crate::eval::evaluate_corpus;
use crate::labeling::{augment_labels, AugmentConfig, FrameLabelSeq};
use crate::postprocess::{collapse_clusters, decode, frames_to_times, BoundaryList, SelectionStrategy, TimeConvention};

/// Features, clean frame labels and reference word-start times (seconds)
/// for one utterance.
#[derive(Debug, Clone)]
pub struct LabeledUtterance {
    pub features: FeatureMatrix,
    pub labels: FrameLabelSeq,
    pub reference: Vec<f64>,
}

/// Model-selection score computed on the validation split after each epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ValidationMetric {
    /// Corpus R-value with a half-frame tolerance, i.e. a predicted
    /// boundary must fall in the reference boundary's own frame.
    #[default]
    ExactFrameR,
    /// Fraction of valid frames whose argmax equals the clean label.
    FrameAccuracy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Utterances per mini-batch.
    pub batch_size: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub max_epochs: usize,
    pub seed: u64,
    /// Applied to training labels only.
    pub augment: AugmentConfig,
    pub selection: SelectionStrategy,
    pub validation: ValidationMetric,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 32,
            patience: 10,
            max_epochs: 200,
            seed: 0,
            augment: AugmentConfig::default(),
            selection: SelectionStrategy::Mid,
            validation: ValidationMetric::ExactFrameR,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument("learning_rate must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be at least 1".into()));
        }
        if self.patience == 0 {
            return Err(Error::InvalidArgument("patience must be at least 1".into()));
        }
        if self.max_epochs == 0 {
            return Err(Error::InvalidArgument("max_epochs must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    /// Full-pass training loss after the epoch's updates.
    pub train_loss: f64,
    pub val_score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the best validation score.
    pub params: ModelParams,
    pub best_epoch: usize,
    pub best_score: f64,
    /// Training loss of the zero-initialized model.
    pub initial_loss: f64,
    pub log: Vec<EpochLog>,
}

fn boundaries_for(params: &ModelParams, u: &LabeledUtterance, selection: SelectionStrategy) -> BoundaryList {
    let rows = u
        .features
        .rows
        .iter()
        .map(|r| softmax_row(params.logits_row(r)))
        .collect();
    let probs = ProbMatrix::new(rows, u.features.frame_len).expect("softmax rows are distributions");
    let decoded = decode(&probs, u.labels.valid_frames);
    let idx = collapse_clusters(&decoded, selection);
    frames_to_times(
        &u.features.utterance_id,
        &idx,
        u.features.frame_len,
        u.features.sample_rate,
        TimeConvention::Center,
    )
}

pub fn validation_score(params: &ModelParams, val: &[LabeledUtterance], cfg: &TrainConfig) -> Result<f64> {
    let first = val
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty validation set".into()))?;
    match cfg.validation {
        ValidationMetric::ExactFrameR => {
            let tolerance = first.features.frame_len as f64 / (2.0 * first.features.sample_rate as f64);
            let mut preds = BTreeMap::new();
            let mut refs = BTreeMap::new();
            for u in val {
                let id = u.features.utterance_id.clone();
                preds.insert(id.clone(), boundaries_for(params, u, cfg.selection));
                refs.insert(id.clone(), BoundaryList::new(id, u.reference.clone()));
            }
            Ok(evaluate_corpus(&preds, &refs, tolerance)?.r_value)
        }
        ValidationMetric::FrameAccuracy => {
            let (mut hit, mut total) = (0usize, 0usize);
            for u in val {
                for (row, label) in u.features.rows.iter().zip(&u.labels.labels).take(u.labels.valid_frames) {
                    let l = params.logits_row(row);
                    let best = (1..3).fold(0, |b, k| if l[k] > l[b] { k } else { b });
                    hit += usize::from(best == label.code() as usize);
                    total += 1;
                }
            }
            Ok(if total == 0 { 0.0 } else { hit as f64 / total as f64 })
        }
    }
}

/// Mini-batch gradient descent on the cross-entropy with early stopping on
/// the validation score. Feature normalization is fit on the training set
/// and weights start at zero, so the result depends only on the data and
/// `cfg`.
pub fn train_baseline(train: &[LabeledUtterance], val: &[LabeledUtterance], cfg: &TrainConfig) -> Result<TrainOutcome> {
    if val.is_empty() {
        return Err(Error::InvalidArgument("empty validation set".into()));
    }
    train_with_validator(train, cfg, |p| validation_score(p, val, cfg))
}

/// Same loop as [`train_baseline`] with a caller-supplied validation score
/// (higher is better).
pub fn train_with_validator<F>(train: &[LabeledUtterance], cfg: &TrainConfig, mut validator: F) -> Result<TrainOutcome>
where
    F: FnMut(&ModelParams) -> Result<f64>,
{
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    let augmented: Vec<FrameLabelSeq> = train.iter().map(|u| augment_labels(&u.labels, cfg.augment)).collect();
    let examples: Vec<Example<'_>> = train
        .iter()
        .zip(&augmented)
        .map(|(u, labels)| Example {
            features: &u.features,
            labels,
        })
        .collect();

    let (mean, std) = fit_normalization(train.iter().map(|u| (&u.features, u.labels.valid_frames)));
    let mut params = ModelParams::zeros(mean, std);
    let initial_loss = loss(&params, &examples)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut best: Option<(f64, usize, ModelParams)> = None;
    let mut since_best = 0;
    let mut log = Vec::new();

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<Example<'_>> = chunk.iter().map(|&i| examples[i]).collect();
            let g = grad_cross_entropy(&params, &batch)?;
            for (w, gw) in params.weights.iter_mut().zip(&g.weights) {
                for k in 0..w.len() {
                    w[k] -= cfg.learning_rate * gw[k];
                }
            }
        }
        let train_loss = loss(&params, &examples)?;
        if !train_loss.is_finite() || !params.all_finite() {
            return Err(Error::Diverged {
                epoch,
                loss: train_loss,
            });
        }
        let val_score = validator(&params)?;
        log.push(EpochLog {
            epoch,
            train_loss,
            val_score,
        });
        log::debug!("epoch {epoch}: loss {train_loss:.6} val {val_score:.6}");

        if best.as_ref().is_none_or(|(s, _, _)| val_score > *s) {
            best = Some((val_score, epoch, params.clone()));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }

    let (best_score, best_epoch, params) = best.expect("at least one epoch ran");
    Ok(TrainOutcome {
        params,
        best_epoch,
        best_score,
        initial_loss,
        log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::FEATURE_DIM;
    use crate::labeling::FrameLabel;

    /// Two well separated clusters per class in feature 0 and 1.
    fn separable(n_utt: usize) -> Vec<LabeledUtterance> {
        (0..n_utt)
            .map(|i| {
                let classes = [FrameLabel::Begin, FrameLabel::Inside, FrameLabel::Outside];
                let mut rows = Vec::new();
                let mut labels = Vec::new();
                for j in 0..9 {
                    let c = classes[(i + j) % 3];
                    let mut row = [0.0; FEATURE_DIM];
                    row[0] = match c {
                        FrameLabel::Begin => 3.0,
                        FrameLabel::Inside => 0.0,
                        FrameLabel::Outside => -3.0,
                    } + 0.1 * ((i * 7 + j * 3) % 5) as f64;
                    row[1] = if c == FrameLabel::Inside { 2.0 } else { -1.0 };
                    rows.push(row);
                    labels.push(c);
                }
                LabeledUtterance {
                    features: FeatureMatrix {
                        utterance_id: format!("u{i}"),
                        rows,
                        frame_len: 400,
                        sample_rate: 16_000,
                    },
                    labels: FrameLabelSeq {
                        labels,
                        frame_len: 400,
                        valid_frames: 9,
                    },
                    reference: vec![],
                }
            })
            .collect()
    }

    fn cfg() -> TrainConfig {
        TrainConfig {
            learning_rate: 0.05,
            batch_size: 4,
            augment: AugmentConfig { radius: 0 },
            max_epochs: 200,
            patience: 1000,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn separable_batch_loss_drops_below_a_tenth() {
        let data = separable(12);
        let out = train_with_validator(&data, &TrainConfig { patience: 200, ..cfg() }, |_| Ok(0.0)).unwrap();
        let last = out.log.last().unwrap().train_loss;
        assert!(out.log.len() <= 200);
        assert!(last < 0.1 * out.initial_loss, "{last} vs {}", out.initial_loss);
    }

    #[test]
    fn early_stop_after_patience() {
        let data = separable(4);
        let out = train_with_validator(&data, &TrainConfig { patience: 1, ..cfg() }, |_| Ok(0.5)).unwrap();
        assert_eq!(out.log.len(), 2);
        assert_eq!(out.best_epoch, 1);
    }

    #[test]
    fn best_epoch_params_are_returned() {
        let data = separable(4);
        let mut calls = 0;
        let scores = [0.1, 0.9, 0.2, 0.3];
        let out = train_with_validator(&data, &TrainConfig { patience: 2, ..cfg() }, |_| {
            calls += 1;
            Ok(scores[calls - 1])
        })
        .unwrap();
        assert_eq!(out.best_epoch, 2);
        assert_eq!(out.log.len(), 4);
    }

    #[test]
    fn deterministic_under_seed() {
        let data = separable(10);
        let a = train_with_validator(&data, &TrainConfig { max_epochs: 5, ..cfg() }, |_| Ok(0.0)).unwrap();
        let b = train_with_validator(&data, &TrainConfig { max_epochs: 5, ..cfg() }, |_| Ok(0.0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn divergence_is_reported() {
        let mut data = separable(4);
        data[0].features.rows[0][0] = 1e300;
        let err = train_with_validator(
            &data,
            &TrainConfig {
                learning_rate: 1e6,
                ..cfg()
            },
            |_| Ok(0.0),
        )
        .unwrap_err();
        assert!(err.is_numeric(), "{err}");
    }

    #[test]
    fn invalid_config_rejected() {
        let data = separable(2);
        for bad in [
            TrainConfig {
                learning_rate: 0.0,
                ..cfg()
            },
            TrainConfig { batch_size: 0, ..cfg() },
            TrainConfig { patience: 0, ..cfg() },
        ] {
            assert!(train_with_validator(&data, &bad, |_| Ok(0.0)).is_err());
        }
    }
}
