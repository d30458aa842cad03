//! Differentially private rejection ABC.
//!
//! The crate is split along the inference pipeline:
//!
//! - [`noise`]: Laplace sampling and the law of the threshold-minus-distance
//!   noise difference used by every analytic prediction.
//! - [`distance`]: empirical MMD with bounded kernels, clipped weighted L2 on
//!   summary statistics, and their global sensitivities.
//! - [`engine`]: plain rejection ABC, the sparse-vector ABCDP loop with both
//!   threshold re-draw policies, and the privacy accountant.
//! - [`analytics`]: flip probabilities and posterior-expectation error bounds.
//! - [`simulators`]: priors and the three generative models.
//!
//! Everything here is `no_std` + `alloc`; file formats, configuration and the
//! command line live in the `abcdp` crate.
#![no_std]
#![deny(missing_debug_implementations)]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analytics;
pub mod distance;
pub mod engine;
mod error;
pub mod noise;
pub mod seed;
pub mod simulators;

pub use error::{Error, Result};

/// Seedable generator used for every random stream in the crate.
///
/// ChaCha8 is counter-based, so streams derived from a master seed are cheap
/// to construct and reproducible across platforms.
pub type SimRng = rand_chacha::ChaCha8Rng;
