//! Semi-supervised text classification with pseudo-label debiasing.
//!
//! The crate trains a small softmax classifier from a handful of labeled
//! examples per class plus a pool of unlabeled examples, turning confident
//! model predictions into pseudo-labels. Because rare or hard classes produce
//! fewer confident predictions, naive pseudo-labeling amplifies class bias;
//! this crate implements four mitigation strategies on one training loop —
//! plain confidence-thresholded pseudo-labeling, logit adjustment by a
//! running class-prior estimate, self-adaptive per-class thresholds, and a
//! class-balanced memory bank with equal or adaptive sampling — plus oracle
//! variants that use withheld ground truth to bound what debiasing can gain.
//!
//! Layering, bottom to top: [`data`] (ingestion, featurization, splits),
//! [`model`] (classifier, loss/gradients, optimizer), [`trackers`] (EMA class
//! priors and adaptive thresholds), [`bank`] (per-class FIFO queues),
//! [`strategies`] (pseudo-label selection), [`metrics`] (evaluation and the
//! run log), [`trainer`] (the loop), and [`harness`] (multi-run experiment
//! driver behind the command-line interface).

pub mod bank;
pub mod data;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod strategies;
pub mod trackers;
pub mod trainer;

pub use error::{Error, Result};
