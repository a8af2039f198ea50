//! Anytime-valid PAC-Bayes bounds and confidence sequences.
//!
//! * [`divergences`]: KL, Rényi and total variation between posteriors and
//!   priors, plus the Bernoulli `kl` and its inversion.
//! * [`forward`]: supermartingale bounds that accumulate one step at a time.
//! * [`stitch`] and [`reverse`]: stitched bounds for exchangeable data.
//! * [`confseq`]: confidence sequences for the posterior-averaged mean.
//! * [`simulation`]: a seeded Monte Carlo harness that measures time-uniform
//!   coverage on synthetic loss streams.

// `!(x > 0.0)` is how the domain checks reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod confseq;
pub mod divergences;
pub mod error;
pub mod forward;
pub mod parse;
pub mod reverse;
pub mod schedule;
pub mod simulation;
pub mod stitch;

pub use error::{Error, Result};

#[cfg(doctest)]
#[doc = include_str!("../../../README.md")]
pub struct ReadmeDoctests;
