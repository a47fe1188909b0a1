//! Channel modeling with deep mixture density networks.
//!
//! The crate covers the whole pipeline:
//!
//! - [`channel`]: Nakagami-m fading and dual-slope Log-Normal shadowing
//!   scenarios, additive Gaussian noise and seeded dataset generation.
//! - [`datapipe`]: log scaling, distance normalization, stratified splits and
//!   shuffled batching.
//! - [`mdn`]: the dense ReLU trunk with a Gaussian-mixture head, its
//!   negative log-likelihood and exact analytic gradients.
//! - [`trainer`]: Adam, the non-finite loss watchdog, multi-iteration
//!   experiments with Global Best / Global Median selection, transfer
//!   learning and model persistence.
//! - [`metrics`]: Gaussian KDE, Overlapped Area, MOA, percent errors and
//!   per-distance evaluation reports.

pub mod channel;
pub mod datapipe;
pub mod error;
pub mod mdn;
pub mod metrics;
pub mod rng;
pub mod trainer;

pub use error::{Error, Result};
