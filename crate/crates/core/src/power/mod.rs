//! Local-alternative power and asymptotic relative efficiency.
//!
//! Under `r_n(x) = β(x)/√n` the rank and raw order-selection statistics
//! converge to `max_m (1/m) Σ_{j≤m} (Z_j + δ_j)²` with shifts
//! `δ_j = √24 h(0) β_j` (ranks) and `δ_j = √2 β_j/σ` (raw data), where
//! `β_j = ∫ β(x) cos(πjx) dx`. The squared ratio of the shifts is the
//! efficiency `η(f) = 12σ²h(0)² = 12σ²(∫f²)²`.

mod laws;

pub use laws::{ErrorLaw, QUADRATURE_TOLERANCE};

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::basis::{design_grid, DesignedSample};
use crate::calibrate::{asymptotic_quantile, build_null, run_draws, run_sharded, TestConfig};
use crate::error::{invalid, Error, Result};
use crate::stats::{variance_estimate, Method};

/// Default number of terms kept in the limiting maximum.
pub const DEFAULT_TRUNCATION: usize = 500;

/// Largest truncation the auto-doubling check will reach.
pub const MAX_TRUNCATION: usize = 64_000;

/// Efficiency of the rank test relative to the raw-data test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AreReport {
    pub law: ErrorLaw,
    /// `12σ²(∫f²)²` with `∫f²` by quadrature.
    pub are: f64,
    /// Same with the closed-form `∫f²`.
    pub are_closed_form: f64,
    pub sigma_sq: f64,
    pub f_sq_integral: f64,
    pub h0: f64,
}

pub fn are_report(law: &ErrorLaw) -> Result<AreReport> {
    law.validate()?;
    let sigma_sq = law.variance()?;
    let f_sq_integral = law.f_sq_integral_quadrature();
    let closed = law.f_sq_integral();
    Ok(AreReport {
        law: *law,
        are: 12.0 * sigma_sq * f_sq_integral * f_sq_integral,
        are_closed_form: 12.0 * sigma_sq * closed * closed,
        sigma_sq,
        f_sq_integral,
        h0: law.h0(),
    })
}

/// `η(f) = 12σ²(∫f²)²`.
pub fn are(law: &ErrorLaw) -> Result<f64> {
    Ok(are_report(law)?.are)
}

/// Whether the rank test beats the raw test under `t_k` errors, `k ≥ 5`.
pub fn are_sign_check(k: u32) -> Result<bool> {
    if k < 5 {
        return Err(Error::UnsupportedLaw(format!("t{k}: the raw-data limit needs four moments (k >= 5)")));
    }
    Ok(are(&ErrorLaw::student_t(k))? > 1.0)
}

/// `β_j` by the midpoint rule on the design grid of `beta`'s length.
pub fn fourier_beta(beta: &[f64], j: usize) -> Result<f64> {
    if j == 0 {
        return invalid("Fourier index j must be >= 1");
    }
    let x = design_grid(beta.len())?;
    Ok(beta.iter().zip(&x).map(|(b, xi)| b * (PI * j as f64 * xi).cos()).sum::<f64>() / beta.len() as f64)
}

/// Local alternative direction `β`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "form")]
pub enum Beta {
    /// `c·cos(πkx)`
    Cosine { c: f64, k: usize },
    /// `c·x`
    Linear { c: f64 },
    /// Values on a midpoint grid; usable only at that sample size.
    Grid { values: Vec<f64> },
}

impl Beta {
    pub fn zero() -> Self {
        Beta::Linear { c: 0.0 }
    }

    /// `cosine:C:K`, `linear:C`, or a bare number `C` for `C·cos(πx)`.
    pub fn parse(spec: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("bad beta {spec:?}; expected cosine:C:K, linear:C or C"));
        let parts: Vec<&str> = spec.split(':').collect();
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
        match parts.as_slice() {
            ["cosine", c, k] => Ok(Beta::Cosine { c: num(c)?, k: k.parse().map_err(|_| bad())? }),
            ["cosine", c] => Ok(Beta::Cosine { c: num(c)?, k: 1 }),
            ["linear", c] => Ok(Beta::Linear { c: num(c)? }),
            [c] => Ok(Beta::Cosine { c: num(c)?, k: 1 }),
            _ => Err(bad()),
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        match self {
            Beta::Cosine { c, k } => Beta::Cosine { c: c * factor, k: *k },
            Beta::Linear { c } => Beta::Linear { c: c * factor },
            Beta::Grid { values } => Beta::Grid { values: values.iter().map(|v| v * factor).collect() },
        }
    }

    /// `β(x_i)` on the `n`-point design grid.
    pub fn on_grid(&self, n: usize) -> Result<Vec<f64>> {
        let x = design_grid(n)?;
        Ok(match self {
            Beta::Cosine { c, k } => x.iter().map(|xi| c * (PI * *k as f64 * xi).cos()).collect(),
            Beta::Linear { c } => x.iter().map(|xi| c * xi).collect(),
            Beta::Grid { values } => {
                if values.len() != n {
                    return invalid(format!("beta grid has {} points but n = {n}", values.len()));
                }
                values.clone()
            }
        })
    }

    /// `β_j`, exact for the named forms.
    pub fn coefficient(&self, j: usize) -> Result<f64> {
        if j == 0 {
            return invalid("Fourier index j must be >= 1");
        }
        Ok(match self {
            Beta::Cosine { c, k } => {
                if j == *k {
                    0.5 * c
                } else {
                    0.0
                }
            }
            Beta::Linear { c } => {
                let sign = if j.is_multiple_of(2) { 1.0 } else { -1.0 };
                c * (sign - 1.0) / (PI * PI * (j * j) as f64)
            }
            Beta::Grid { values } => fourier_beta(values, j)?,
        })
    }

    pub fn coefficients(&self, truncation: usize) -> Result<Vec<f64>> {
        (1..=truncation).map(|j| self.coefficient(j)).collect()
    }
}

/// A local alternative `Y_i = β(x_i)/√n + ε_i` and the error-law
/// functionals its limiting power depends on.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalAlternativeSpec {
    pub beta: Beta,
    pub error_law: ErrorLaw,
    /// `Var ε`, when finite.
    pub sigma_sq: Option<f64>,
    pub h0: f64,
    pub f_sq_integral: f64,
}

impl LocalAlternativeSpec {
    pub fn new(beta: Beta, error_law: ErrorLaw) -> Result<Self> {
        error_law.validate()?;
        let f_sq_integral = error_law.f_sq_integral();
        Ok(Self { beta, sigma_sq: error_law.variance().ok(), h0: error_law.h0(), f_sq_integral, error_law })
    }

    /// `√24 h(0) β_j` for `j = 1..=truncation`.
    pub fn rank_shifts(&self, truncation: usize) -> Result<Vec<f64>> {
        let scale = 24f64.sqrt() * self.h0;
        Ok(self.beta.coefficients(truncation)?.into_iter().map(|b| scale * b).collect())
    }

    /// `√2 β_j/σ` for `j = 1..=truncation`.
    pub fn raw_shifts(&self, truncation: usize) -> Result<Vec<f64>> {
        let sigma = self.raw_sigma()?;
        Ok(self.beta.coefficients(truncation)?.into_iter().map(|b| 2f64.sqrt() * b / sigma).collect())
    }

    fn raw_sigma(&self) -> Result<f64> {
        if !self.error_law.has_fourth_moment() {
            return Err(Error::UnsupportedLaw(format!(
                "{}: the raw-data limit needs four finite moments",
                self.error_law.name()
            )));
        }
        self.sigma_sq
            .map(f64::sqrt)
            .ok_or_else(|| Error::UnsupportedLaw(format!("{} has no finite variance", self.error_law.name())))
    }
}

/// A simulated rejection probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerEstimate {
    pub value: f64,
    pub std_error: f64,
    pub reps: usize,
    pub seed: u64,
    /// Terms kept in the limiting maximum; `None` for finite-sample power.
    pub truncation: Option<usize>,
}

impl PowerEstimate {
    fn from_count(hits: usize, reps: usize, seed: u64, truncation: Option<usize>) -> Self {
        let value = hits as f64 / reps as f64;
        Self { value, std_error: (value * (1.0 - value) / reps as f64).sqrt(), reps, seed, truncation }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        invalid(format!("alpha must lie in (0, 1), got {alpha}"))
    }
}

/// `P(max_m (1/m) Σ_{j≤m} (Z_j + δ_j)² ≥ t)` by simulation. Also returns the
/// fraction of draws that reject only because of a maximizer in the upper
/// half of the truncation range.
fn simulate_limit(shifts: &[f64], threshold: f64, reps: usize, seed: u64) -> Result<(usize, f64)> {
    let truncation = shifts.len();
    let flags = run_draws(reps, seed, |rng| {
        let mut sum = 0.0;
        let mut best = f64::NEG_INFINITY;
        let mut arg = 0;
        for (m, s) in shifts.iter().enumerate() {
            let z: f64 = rng.sample::<f64, _>(StandardNormal) + s;
            sum += z * z;
            let mean = sum / (m + 1) as f64;
            if mean > best {
                best = mean;
                arg = m + 1;
            }
        }
        let reject = best >= threshold;
        (reject, reject && 2 * arg > truncation)
    })?;
    let hits = flags.iter().filter(|f| f.0).count();
    let late = flags.iter().filter(|f| f.1).count() as f64 / reps as f64;
    Ok((hits, late))
}

/// Limiting power for a shift sequence. The truncation is doubled while more
/// than 0.1% of draws reject with a maximizer in its upper half, the draws
/// whose decision a longer sequence could change. (Non-rejecting draws often
/// peak late, with partial means creeping up towards 1, but such peaks sit
/// far below any critical value.)
pub fn limiting_power(
    shifts: impl Fn(usize) -> Result<Vec<f64>>,
    alpha: f64,
    truncation: usize,
    reps: usize,
    seed: u64,
) -> Result<PowerEstimate> {
    check_alpha(alpha)?;
    if truncation == 0 || reps == 0 {
        return invalid("limiting power needs truncation >= 1 and reps >= 1");
    }
    let threshold = asymptotic_quantile(alpha)?;
    let mut truncation = truncation;
    loop {
        let (hits, late) = simulate_limit(&shifts(truncation)?, threshold, reps, seed)?;
        if late < 1e-3 || truncation >= MAX_TRUNCATION {
            return Ok(PowerEstimate::from_count(hits, reps, seed, Some(truncation)));
        }
        truncation = (2 * truncation).min(MAX_TRUNCATION);
    }
}

/// Limiting power of the rank order-selection test.
pub fn limiting_power_rank(
    spec: &LocalAlternativeSpec,
    alpha: f64,
    truncation: usize,
    reps: usize,
    seed: u64,
) -> Result<PowerEstimate> {
    limiting_power(|t| spec.rank_shifts(t), alpha, truncation, reps, seed)
}

/// Limiting power of the raw-data order-selection test.
pub fn limiting_power_raw(
    spec: &LocalAlternativeSpec,
    alpha: f64,
    truncation: usize,
    reps: usize,
    seed: u64,
) -> Result<PowerEstimate> {
    spec.raw_sigma()?;
    limiting_power(|t| spec.raw_shifts(t), alpha, truncation, reps, seed)
}

/// Rejection rate of a test on `Y_i = signal·β(x_i) + ε_i` at level `alpha`.
fn rejection_rate(
    spec: &LocalAlternativeSpec,
    n: usize,
    signal: f64,
    config: &TestConfig,
    alpha: f64,
    reps: usize,
    seed: u64,
) -> Result<PowerEstimate> {
    check_alpha(alpha)?;
    if n < 3 || reps == 0 {
        return invalid("power simulation needs n >= 3 and reps >= 1");
    }
    let null = build_null(config.method, config.order, n, config.scores, config.request_for(n))?;
    if null.as_ref().is_none() {
        return invalid("power simulation needs a calibrated test");
    }
    let mean: Vec<f64> = spec.beta.on_grid(n)?.iter().map(|b| signal * b).collect();
    let flags = run_sharded(reps, seed, |rng, count| {
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let y: Vec<f64> = mean.iter().map(|m| m + spec.error_law.sample(rng)).collect();
            let sample = DesignedSample::new(y)?;
            let outcome = config.statistic(sample.y(), || variance_estimate(&sample))?;
            let p = null.apply(outcome)?.p_value.expect("calibrated null");
            out.push(p <= alpha);
        }
        Ok(out)
    })?;
    Ok(PowerEstimate::from_count(flags.iter().filter(|&&f| f).count(), reps, seed, None))
}

/// Finite-sample power at `r_n = β/√n`.
pub fn empirical_power(
    spec: &LocalAlternativeSpec,
    n: usize,
    config: &TestConfig,
    alpha: f64,
    reps: usize,
    seed: u64,
) -> Result<PowerEstimate> {
    rejection_rate(spec, n, 1.0 / (n as f64).sqrt(), config, alpha, reps, seed)
}

/// One point of a power curve over signal multipliers `c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerCurvePoint {
    pub c: f64,
    pub empirical_power: f64,
    /// Present for the order-selection methods, which have a known limit.
    pub limiting_power: Option<f64>,
    pub std_error: f64,
}

/// Simulation budget for a power curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveSettings {
    pub n: usize,
    pub alpha: f64,
    pub reps: usize,
    pub limit_reps: usize,
    pub truncation: usize,
    pub seed: u64,
}

/// Empirical and limiting power of `c·β` for each multiplier, with the
/// same seed at every `c` so the curve is coupled.
pub fn power_curve(
    spec: &LocalAlternativeSpec,
    multipliers: &[f64],
    config: &TestConfig,
    settings: &CurveSettings,
) -> Result<Vec<PowerCurvePoint>> {
    multipliers
        .iter()
        .map(|&c| {
            let scaled = LocalAlternativeSpec { beta: spec.beta.scaled(c), ..spec.clone() };
            let emp = empirical_power(&scaled, settings.n, config, settings.alpha, settings.reps, settings.seed)?;
            let limit = match config.method {
                Method::OsRank => Some(limiting_power_rank(
                    &scaled,
                    settings.alpha,
                    settings.truncation,
                    settings.limit_reps,
                    settings.seed,
                )?),
                Method::OsRaw => Some(limiting_power_raw(
                    &scaled,
                    settings.alpha,
                    settings.truncation,
                    settings.limit_reps,
                    settings.seed,
                )?),
                _ => None,
            };
            Ok(PowerCurvePoint {
                c,
                empirical_power: emp.value,
                limiting_power: limit.map(|l| l.value),
                std_error: emp.std_error,
            })
        })
        .collect()
}

/// Pitman comparison: the rank test with `n` observations against the raw
/// test with `n* = ⌊n/η⌋`, both facing the same function `β/√n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PitmanDemo {
    pub are: f64,
    pub n_rank: usize,
    pub n_raw: usize,
    pub rank_power: PowerEstimate,
    pub raw_power: PowerEstimate,
}

pub fn pitman_demo(spec: &LocalAlternativeSpec, n: usize, alpha: f64, reps: usize, seed: u64) -> Result<PitmanDemo> {
    let eta = are(&spec.error_law)?;
    let n_raw = (n as f64 / eta).floor() as usize;
    let signal = 1.0 / (n as f64).sqrt();
    let asymptotic = |method| TestConfig {
        calibration: Some(crate::calibrate::CalibrationRequest::Asymptotic { seed: None }),
        ..TestConfig::new(method)
    };
    Ok(PitmanDemo {
        are: eta,
        n_rank: n,
        n_raw,
        rank_power: rejection_rate(spec, n, signal, &asymptotic(Method::OsRank), alpha, reps, seed)?,
        raw_power: rejection_rate(spec, n_raw, signal, &asymptotic(Method::OsRaw), alpha, reps, seed)?,
    })
}
