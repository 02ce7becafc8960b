//! Truncated cosine series smooths `φ₀ + 2 Σ_{j≤m} φ_j cos(πjx)` with the
//! truncation point chosen by the order criterion.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::basis::{cosine_coefficients, rank_scores, CoefficientSource, CoefficientVector, DesignedSample, TiePolicy};
use crate::error::{invalid, Result};
use crate::power::ErrorLaw;
use crate::stats::{criterion_trace, variance_estimate, Penalty, RANK_SCALE};

/// Plotting-grid density used when none is given.
pub const DEFAULT_PLOT_POINTS: usize = 512;

/// Scaling applied to a smooth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoothScale {
    Unscaled,
    /// Raw data divided by `σ̂`.
    RawOverSigma,
    /// Rank scores multiplied by `√12`.
    RankSqrt12,
}

/// A fitted series smooth.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmoothFit {
    pub m: usize,
    pub coeff0: f64,
    pub coeffs: Vec<f64>,
    pub scale: SmoothScale,
    /// Multiplier implied by `scale` (`1/σ̂`, `√12` or 1).
    pub factor: f64,
    /// Scaled fit at the design points.
    pub fitted: Vec<f64>,
}

impl SmoothFit {
    fn build(coeff0: f64, coeffs: &[f64], n: usize, m: usize, scale: SmoothScale, factor: f64) -> Result<Self> {
        if m >= n {
            return invalid(format!("truncation m = {m} must satisfy m <= n - 1 = {}", n - 1));
        }
        let mut fit = Self { m, coeff0, coeffs: coeffs[..m].to_vec(), scale, factor, fitted: Vec::new() };
        fit.fitted = crate::basis::design_grid(n)?.into_iter().map(|x| fit.evaluate(x)).collect();
        Ok(fit)
    }

    /// Scaled smooth at an arbitrary `x` in `[0, 1]`.
    pub fn evaluate(&self, x: f64) -> f64 {
        self.factor * (self.coeff0 + self.centered_unscaled(x))
    }

    /// Scaled smooth minus its constant term, so the curve has mean zero
    /// over `[0, 1]` and over the design points.
    pub fn evaluate_centered(&self, x: f64) -> f64 {
        self.factor * self.centered_unscaled(x)
    }

    fn centered_unscaled(&self, x: f64) -> f64 {
        2.0 * self.coeffs.iter().enumerate().map(|(k, c)| c * (PI * (k + 1) as f64 * x).cos()).sum::<f64>()
    }
}

/// Uniform plotting grid `0, 1/(points-1), ..., 1`.
pub fn plot_grid(points: usize) -> Result<Vec<f64>> {
    if points < 2 {
        return invalid("a plotting grid needs at least 2 points");
    }
    Ok((0..points).map(|k| k as f64 / (points - 1) as f64).collect())
}

/// Unscaled smooth of `values` truncated at `m`, with `coeff0` their mean.
pub fn series_smooth(values: &[f64], m: usize) -> Result<SmoothFit> {
    let coeffs = cosine_coefficients(values, CoefficientSource::Raw)?;
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    SmoothFit::build(mean, coeffs.as_slice(), values.len(), m, SmoothScale::Unscaled, 1.0)
}

/// Smallest maximizer of `Σ_{j≤m} 2n c_j²/scale − A·m` over `m = 0..n-1`.
pub fn select_truncation(coeffs: &CoefficientVector, scale: f64, a: f64) -> Result<usize> {
    Ok(criterion_trace(coeffs, scale, Penalty::Mallows { a })?.argmax)
}

/// Smooth of the raw data divided by the first-difference `σ̂`, truncated
/// at `m` if given, else at the criterion's choice with constant `a`.
pub fn raw_smooth(sample: &DesignedSample, a: f64, m: Option<usize>) -> Result<SmoothFit> {
    let sigma_sq = variance_estimate(sample)?;
    if sigma_sq <= 0.0 {
        return Err(crate::Error::DegenerateVariance);
    }
    let coeffs = cosine_coefficients(sample.y(), CoefficientSource::Raw)?;
    let m = match m {
        Some(m) => m,
        None => select_truncation(&coeffs, sigma_sq, a)?,
    };
    let mean = sample.y().iter().sum::<f64>() / sample.n() as f64;
    SmoothFit::build(mean, coeffs.as_slice(), sample.n(), m, SmoothScale::RawOverSigma, 1.0 / sigma_sq.sqrt())
}

/// `√12` times the smooth of the rank scores, truncated at `m` if given,
/// else at the rank criterion's choice with constant `a`. The constant
/// term is the mean score (one half for `R/(n+1)` scores).
pub fn rank_smooth(sample: &DesignedSample, a: f64, ties: TiePolicy, m: Option<usize>) -> Result<SmoothFit> {
    let u = rank_scores(sample, ties)?;
    let coeffs = u.coefficients();
    let m = match m {
        Some(m) => m,
        None => select_truncation(&coeffs, RANK_SCALE, a)?,
    };
    let mean = u.as_slice().iter().sum::<f64>() / u.n() as f64;
    SmoothFit::build(mean, coeffs.as_slice(), u.n(), m, SmoothScale::RankSqrt12, 12f64.sqrt())
}

/// How the rank smooth's truncation relates to the raw one.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Truncation {
    /// Both curves use the raw criterion's `m`.
    #[default]
    Paired,
    Independent,
}

/// Raw and rank smooths of one sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairedSmooth {
    pub raw: SmoothFit,
    pub rank: SmoothFit,
}

/// One row of a plottable smooth: both curves centered to mean zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmoothRow {
    pub x: f64,
    pub fitted_raw_scaled: f64,
    pub fitted_rank_scaled: f64,
}

impl PairedSmooth {
    pub fn rows(&self, xs: &[f64]) -> Vec<SmoothRow> {
        xs.iter()
            .map(|&x| SmoothRow {
                x,
                fitted_raw_scaled: self.raw.evaluate_centered(x),
                fitted_rank_scaled: self.rank.evaluate_centered(x),
            })
            .collect()
    }
}

pub fn paired_smooth(sample: &DesignedSample, a: f64, ties: TiePolicy, truncation: Truncation) -> Result<PairedSmooth> {
    let raw = raw_smooth(sample, a, None)?;
    let rank = match truncation {
        Truncation::Paired => rank_smooth(sample, a, ties, Some(raw.m))?,
        Truncation::Independent => rank_smooth(sample, a, ties, None)?,
    };
    Ok(PairedSmooth { raw, rank })
}

/// `μ(x_i) = (1/n) Σ_k H(r(x_i) − r(x_k))`, with `H` the law of `ε₂ − ε₁`.
pub fn mu_function(r_values: &[f64], law: &ErrorLaw) -> Result<Vec<f64>> {
    if r_values.is_empty() {
        return invalid("mu needs at least one value");
    }
    law.validate()?;
    let n = r_values.len() as f64;
    Ok(r_values.iter().map(|ri| r_values.iter().map(|rk| law.difference_cdf(ri - rk)).sum::<f64>() / n).collect())
}
