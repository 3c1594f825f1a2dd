//! Partial label masking (PLM) for imbalanced multi-label classification.
//!
//! The crate is organised bottom-up:
//!
//! - [`dataset`]: IDX ingestion, long-tail subsetting, MultiMNIST composition,
//!   synthetic fixtures, class statistics and per-epoch undersampling.
//! - [`nnet`]: a small multi-layer perceptron with hand-written backprop,
//!   SGD with momentum and a warmup/step learning-rate schedule.
//! - [`objective`]: per-label losses (BCE, focal) and the masked, class-weighted
//!   batch reduction.
//! - [`plm`]: stochastic mask generation, probability histograms, KL divergence,
//!   divergence normalisation and the exponential ratio update.
//! - [`trainer`]: the epoch loop tying everything together, plus evaluation.
//! - [`metrics`]: per-class precision/recall, F1, exact-match accuracy and
//!   top-K-infrequent views.
//!
//! Batch-level work fans out through [`par`], which uses rayon when the
//! `parallel` feature is enabled (the default) and plain iterators otherwise.
//! All reductions run in a fixed order so results are bit-identical across
//! thread counts and across the two execution modes.

pub mod dataset;
pub mod error;
pub mod matrix;
pub mod metrics;
pub mod nnet;
pub mod objective;
pub mod par;
pub mod plm;
pub mod rng;
pub mod trainer;

pub use error::{Error, Result};
pub use matrix::{BinaryMatrix, Matrix};
