//! Fairness-aware dropout risk prediction toolkit.
//!
//! The pipeline: load or synthesize a student cohort, split it by
//! enrollment year, encode and optionally oversample the training side,
//! train a probabilistic classifier, calibrate its scores, audit accuracy
//! and generalized error rates per demographic group, and equalize one
//! error rate across a group pair without breaking calibration.

pub mod calibrate;
pub mod cohort;
pub mod fairness;
pub mod mitigate;
pub mod models;
pub(crate) mod numeric;
pub mod preprocess;
pub mod synth;
