//! Supervised word boundary detection toolkit.
//!
//! The pipeline runs word-annotated audio through BIO frame labelling,
//! a per-frame classifier, begin-cluster post-processing and
//! tolerance-windowed segmentation metrics:
//!
//! ```text
//! corpus -> labeling -> classifier -> postprocess -> eval
//! ```
//!
//! Every stage is a pure function over owned or borrowed data, so
//! utterances can be processed in parallel by the caller.

pub mod classifier;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod labeling;
pub mod pipeline;
pub mod postprocess;

pub use error::{Error, Result};
