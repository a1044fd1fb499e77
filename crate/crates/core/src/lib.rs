//! Integrated squared-error risk of the hierarchical (HB) and
//! partial-hierarchical (PHB) Bayes estimators in the Gaussian normal-means
//! model, when the true means are drawn from `N_d(0, Σ)`.
//!
//! The crate is organised bottom-up:
//!
//! - [`domain`]: problem sizes, compound-symmetric and general covariance
//!   spectra.
//! - [`estimators`]: the MLE, PHB (James–Stein type) and HB point estimators.
//! - [`quad`]: adaptive Gauss–Kronrod quadrature on `[0, 1]` and the integrand
//!   kernels shared by every risk formula.
//! - [`risk`]: closed-form and quadrature integrated risks, the risk
//!   difference `H(ρ)` and its diagnostics.
//! - [`bounds`]: analytic constants bracketing the crossover correlation and
//!   the bisection solver for it.
//! - [`mc`]: a seeded, thread-count independent Monte Carlo oracle.
//!
//! With the default `parallel` feature, Monte Carlo blocks and parameter
//! sweeps run on the rayon global pool; without it everything is sequential
//! and produces bit-identical results.

// Negated float comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod domain;
pub mod error;
pub mod estimators;
pub mod mc;
pub mod par;
pub mod quad;
pub mod risk;

pub use error::{Error, Result};
