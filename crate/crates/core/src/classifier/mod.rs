//! Per-frame features, the built-in multinomial logistic classifier and
//! the binary logits interchange used by external encoders.

mod features;
mod interchange;
mod model;
mod train;

pub use features::{extract_features, FeatureExtractor, FeatureMatrix, FEATURE_DIM, LOG_ENERGY_FLOOR, NUM_BANDS};
pub use interchange::{
    decode_logits, encode_logits, read_logits, write_logits, INTERCHANGE_MAGIC, INTERCHANGE_VERSION,
};
pub use model::{
    cross_entropy, fit_normalization, grad_cross_entropy, loss, predict, softmax, softmax_row, Example, Gradient,
    LogitsMatrix, ModelParams, ProbMatrix, NUM_CLASSES, PROB_EPS,
};
pub use train::{
    train_baseline, train_with_validator, validation_score, EpochLog, LabeledUtterance, TrainConfig, TrainOutcome,
    ValidationMetric,
};
