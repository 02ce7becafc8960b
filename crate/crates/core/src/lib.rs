//! Rank-based, smoothing-inspired lack-of-fit tests for regression.
//!
//! The crate tests the no-effect hypothesis `r ≡ C` in the fixed-design model
//! `Y_i = r(x_i) + ε_i` on the midpoint grid `x_i = (i - 1/2)/n`, using cosine
//! series coefficients of the responses, of their ranks, or of least-squares
//! residual ranks.
//!
//! Modules, bottom-up:
//!
//! - [`basis`]: design grid, cosine coefficients, rank and normal scores.
//! - [`stats`]: order-selection, Neyman, data-driven Neyman and Bayes statistics.
//! - [`calibrate`]: exact permutation, Monte Carlo and asymptotic null laws.
//! - [`loflinear`]: rank tests applied to residuals of a fitted linear model.
//! - [`smooth`]: truncated cosine series smooths of raw data and of ranks.
//! - [`power`]: local-alternative power simulation and relative efficiency.

pub mod basis;
pub mod calibrate;
pub mod error;
pub mod loflinear;
pub mod power;
mod quadrature;
pub mod smooth;
pub mod stats;

pub use error::{Error, Result};
