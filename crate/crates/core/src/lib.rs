//! Moderate-deviation probabilities and efficiency bounds for statistical
//! estimators.
//!
//! The crate is organised bottom-up:
//!
//! * [`numerics`]: special functions, small SPD linear algebra and the
//!   counter-based random stream every randomized routine draws from.
//! * [`geometry`]: central-symmetric convex deviation sets (balls,
//!   ellipsoids, generic oracle bodies) and their nearest boundary points.
//! * [`exit`]: the standard Gaussian exit probability `P(ζ ∉ tΩ)`, exact,
//!   asymptotic, plain Monte Carlo and importance sampling.
//! * [`tilting`]: conjugate (exponentially tilted) distributions and the
//!   mean-matching tilt solver.
//! * [`models`]: parametric families, Fisher information, Hellinger
//!   distances, MLEs and numeric regularity checks.
//! * [`confidence`]: moderate-deviation vs normal confidence intervals.
//! * [`efficiency`]: the experiment engine comparing estimator deviation
//!   probabilities with the Gaussian benchmark.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod confidence;
pub mod efficiency;
pub mod error;
pub mod exit;
pub mod geometry;
pub mod models;
pub mod numerics;
pub mod tilting;

pub use error::{Error, Result};
