//! The limiting null law `G` of the order-selection statistics.
//!
//! `G(t) = exp{ -Σ_{j≥1} P(χ²_j > j t) / j }` for `t > 1`, and `G(t) = 0` for
//! `t ≤ 1` (the partial means of `Z_j²` converge to 1, so the maximum is at
//! least 1 almost surely).
//!
//! The `1/j` weight is the resolved form. A typeset variant dividing each tail
//! term by `t` instead is kept as [`SeriesWeight::Threshold`] so the choice can
//! be re-checked by [`resolve_series_weight`]: against the published quantile
//! row (3.221, 4.179, 6.745, 10.850 at levels 0.10, 0.05, 0.01, 0.001) and a
//! direct simulation of `max_m (1/m) Σ_{j≤m} Z_j²`, the `1/j` form matches
//! both to three decimals (3.2208, 4.1793, 6.7442, 10.8450) while the `1/t`
//! form puts `1 - G(4.179)` near 0.016.

use std::f64::consts::PI;

use serde::Serialize;
use statrs::function::erf::erfc;
use statrs::function::gamma::gamma_ur;

use super::montecarlo::EmpiricalLaw;
use crate::error::{invalid, Result};
use crate::quadrature;

/// Published large-sample levels and quantiles of `G`.
pub const TABLE_LEVELS: [f64; 4] = [0.10, 0.05, 0.01, 0.001];
pub const TABLE_QUANTILES: [f64; 4] = [3.221, 4.179, 6.745, 10.850];

/// `P(χ²_df > x)`.
pub fn chi2_tail(df: usize, x: f64) -> Result<f64> {
    if df == 0 {
        return invalid("chi-squared degrees of freedom must be >= 1");
    }
    if x.is_nan() || x < 0.0 {
        return invalid(format!("chi-squared tail needs x >= 0, got {x}"));
    }
    Ok(chi2_tail_real(df as f64, x))
}

/// Tail for real `df > 0` and `x ≥ 0`.
pub(crate) fn chi2_tail_real(df: f64, x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else if x == f64::INFINITY {
        0.0
    } else if df == 1.0 {
        erfc((0.5 * x).sqrt())
    } else if df == 2.0 {
        (-0.5 * x).exp()
    } else if df >= LARGE_DF {
        temme_upper(0.5 * df, 0.5 * x)
    } else {
        gamma_ur(0.5 * df, 0.5 * x)
    }
}

/// From this many degrees of freedom on, the incomplete gamma function is
/// replaced by its uniform asymptotic expansion, which is accurate to about
/// 1e-12 there and improves like `df^-5/2`. The iterative routine loses
/// digits for large shapes.
const LARGE_DF: f64 = 1e4;

/// Temme's uniform expansion of `Q(a, x)` through the `1/a` term.
fn temme_upper(a: f64, x: f64) -> f64 {
    let mu = x / a - 1.0;
    let eta = mu.signum() * (2.0 * (mu - mu.ln_1p())).sqrt();
    let (c0, c1) = if eta.abs() < 1e-2 {
        (
            -1.0 / 3.0 + eta / 12.0 - 2.0 * eta * eta / 135.0 + eta.powi(3) / 864.0,
            -1.0 / 540.0 - eta / 288.0 + eta * eta / 378.0,
        )
    } else {
        (1.0 / mu - 1.0 / eta, 1.0 / eta.powi(3) - 1.0 / mu.powi(3) - 1.0 / (mu * mu) - 1.0 / (12.0 * mu))
    };
    0.5 * erfc(eta * (0.5 * a).sqrt()) + (-0.5 * a * eta * eta).exp() / (2.0 * PI * a).sqrt() * (c0 + c1 / a)
}

/// Weight on the `j`-th chi-squared tail term of the series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesWeight {
    /// `1/j`, the resolved form.
    Order,
    /// `1/t`, the typeset variant retained for the guard.
    Threshold,
}

/// Series evaluation of `G`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticLaw {
    pub series_cutoff: usize,
    pub tolerance: f64,
    pub weight: SeriesWeight,
}

impl Default for AsymptoticLaw {
    fn default() -> Self {
        Self { series_cutoff: 200, tolerance: 1e-12, weight: SeriesWeight::Order }
    }
}

impl AsymptoticLaw {
    pub fn with_weight(weight: SeriesWeight) -> Self {
        Self { weight, ..Self::default() }
    }

    fn term(&self, j: f64, t: f64) -> f64 {
        let w = match self.weight {
            SeriesWeight::Order => j,
            SeriesWeight::Threshold => t,
        };
        chi2_tail_real(j, j * t) / w
    }

    /// `Σ_j w_j P(χ²_j > jt)`.
    ///
    /// When the terms have not dropped below the tolerance by the cutoff `J`
    /// (which happens for `t` close to 1, where they decay slowly), the rest of
    /// the series is added by Euler–Maclaurin: `∫_{J+1/2}^∞ f + f'(J+1/2)/24`.
    fn exponent(&self, t: f64) -> f64 {
        let mut sum = 0.0;
        let mut last = f64::INFINITY;
        let mut j = 1;
        while j <= self.series_cutoff {
            last = self.term(j as f64, t);
            sum += last;
            if last < self.tolerance {
                return sum;
            }
            j += 1;
        }
        if last < self.tolerance {
            return sum;
        }
        let start = self.series_cutoff as f64 + 0.5;
        let f = |s: f64| self.term(s, t);
        let h = 1e-3;
        let slope = (f(start + h) - f(start - h)) / (2.0 * h);
        // terms decay like exp(-s(t - 1 - ln t)/2); integrate in log s up to
        // where they are negligible
        let decay = (t - 1.0) - (t - 1.0).ln_1p();
        let end = (80.0 / decay).max(2.0 * start);
        let tail = quadrature::integrate(
            |u: f64| {
                let s = start * u.exp();
                s * f(s)
            },
            0.0,
            (end / start).ln(),
            1e-13,
        );
        sum + tail + slope / 24.0
    }

    /// `G(t)`, defined for `t > 0`.
    pub fn cdf(&self, t: f64) -> Result<f64> {
        if t.is_nan() || t <= 0.0 {
            return invalid(format!("G(t) is defined for t > 0, got {t}"));
        }
        if t == f64::INFINITY {
            return Ok(1.0);
        }
        if t <= 1.0 {
            return Ok(0.0);
        }
        Ok((-self.exponent(t)).exp().clamp(0.0, 1.0))
    }

    /// `1 - G(t)`, computed as `-expm1(-exponent)` so tiny tails keep their
    /// relative accuracy.
    pub fn tail(&self, t: f64) -> Result<f64> {
        if t.is_nan() || t <= 0.0 {
            return invalid(format!("G(t) is defined for t > 0, got {t}"));
        }
        if t <= 1.0 {
            return Ok(1.0);
        }
        if t == f64::INFINITY {
            return Ok(0.0);
        }
        Ok((-(-self.exponent(t)).exp_m1()).clamp(0.0, 1.0))
    }

    /// `t` with `G(t) = 1 - alpha`, to 1e-9 in `t`.
    pub fn quantile(&self, alpha: f64) -> Result<f64> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return invalid(format!("alpha must lie in (0, 1), got {alpha}"));
        }
        // the tail is decreasing in t; bracket then bisect on it
        let above = |t: f64| -> Result<bool> { Ok(self.tail(t)? > alpha) };
        let mut lo = 1.0;
        let mut hi = 2.0;
        while above(hi)? {
            lo = hi;
            hi *= 2.0;
            if hi > 1e6 {
                return invalid(format!("quantile for alpha = {alpha} not bracketed"));
            }
        }
        while hi - lo > 1e-10 {
            let mid = 0.5 * (lo + hi);
            if above(mid)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// `G(t)` with default series settings.
pub fn asymptotic_cdf(t: f64) -> Result<f64> {
    AsymptoticLaw::default().cdf(t)
}

/// The `1 - alpha` quantile `t_α` of `G`.
pub fn asymptotic_quantile(alpha: f64) -> Result<f64> {
    AsymptoticLaw::default().quantile(alpha)
}

/// Quantiles of one candidate weight at the published levels.
#[derive(Debug, Clone, Serialize)]
pub struct WeightCandidate {
    pub weight: SeriesWeight,
    pub quantiles: [f64; 4],
    /// Largest |quantile − published quantile|.
    pub table_deviation: f64,
    /// Largest |quantile − simulated quantile|.
    pub simulation_deviation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct WeightResolution {
    pub chosen: SeriesWeight,
    pub simulated_quantiles: [f64; 4],
    pub simulation_reps: usize,
    pub candidates: Vec<WeightCandidate>,
}

/// Picks the series weight whose quantiles agree best with an independent
/// simulation of the limiting maximum (see
/// [`simulate_null_max`](super::montecarlo::simulate_null_max)), and reports
/// each candidate's distance from the published quantiles too.
pub fn resolve_series_weight(simulation: &EmpiricalLaw) -> Result<WeightResolution> {
    let simulated = TABLE_LEVELS.map(|a| simulation.quantile(1.0 - a));
    let mut candidates = Vec::new();
    for weight in [SeriesWeight::Order, SeriesWeight::Threshold] {
        let law = AsymptoticLaw::with_weight(weight);
        let mut quantiles = [0.0; 4];
        for (q, &a) in quantiles.iter_mut().zip(&TABLE_LEVELS) {
            *q = law.quantile(a)?;
        }
        let dev = |other: &[f64; 4]| quantiles.iter().zip(other).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        candidates.push(WeightCandidate {
            weight,
            quantiles,
            table_deviation: dev(&TABLE_QUANTILES),
            simulation_deviation: dev(&simulated),
        });
    }
    let chosen = candidates
        .iter()
        .min_by(|a, b| a.simulation_deviation.total_cmp(&b.simulation_deviation))
        .map(|c| c.weight)
        .expect("two candidates");
    Ok(WeightResolution { chosen, simulated_quantiles: simulated, simulation_reps: simulation.len(), candidates })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    /// χ²₁ tail by quadrature of the density on [x, ∞).
    fn chi2_1_tail_quadrature(x: f64) -> f64 {
        let dens = |s: f64| (-0.5 * s).exp() / (2.0 * PI * s).sqrt();
        quadrature::integrate_to_infinity(dens, x, 1e-13)
    }

    /// Even-df tail as a finite Poisson sum, term by term in log space.
    fn chi2_even_tail(df: usize, x: f64) -> f64 {
        let half = 0.5 * x;
        let mut s = 0.0;
        let mut log_fact = 0.0;
        for k in 0..df / 2 {
            if k > 0 {
                log_fact += (k as f64).ln();
            }
            s += (-half + k as f64 * half.ln() - log_fact).exp();
        }
        s
    }

    #[test]
    fn chi2_tail_closed_forms() {
        for df in [1, 3, 10, 500] {
            assert_eq!(chi2_tail(df, 0.0).unwrap(), 1.0);
        }
        for x in [0.1, 1.0, 5.0, 40.0] {
            assert_eq!(chi2_tail(2, x).unwrap(), (-x / 2.0).exp());
        }
        assert_abs_diff_eq!(chi2_tail(1, 3.841459).unwrap(), 0.05, epsilon = 1e-4);
        assert_abs_diff_eq!(chi2_tail(1, 3.841459).unwrap(), chi2_1_tail_quadrature(3.841459), epsilon = 1e-10);
        assert!(chi2_tail(0, 1.0).is_err());
        assert!(chi2_tail(3, -1.0).is_err());
    }

    #[test]
    fn chi2_tail_matches_poisson_sum() {
        for df in [4, 10, 50, 200, 500] {
            for mult in [0.5, 0.9, 1.0, 1.2, 2.0, 4.0] {
                let x = mult * df as f64;
                let got = chi2_tail(df, x).unwrap();
                let expect = chi2_even_tail(df, x);
                assert_abs_diff_eq!(got, expect, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn published_quantiles() {
        let law = AsymptoticLaw::default();
        for (&a, &q) in TABLE_LEVELS.iter().zip(&TABLE_QUANTILES) {
            assert_abs_diff_eq!(law.cdf(q).unwrap(), 1.0 - a, epsilon = 1e-3);
            assert_abs_diff_eq!(law.quantile(a).unwrap(), q, epsilon = 5e-3);
        }
        assert_abs_diff_eq!(asymptotic_quantile(0.05).unwrap(), 4.179, epsilon = 1e-3);
        assert_abs_diff_eq!(asymptotic_quantile(0.10).unwrap(), 3.221, epsilon = 1e-3);
    }

    #[test]
    fn quantile_round_trip() {
        for a in [0.2, 0.05, 0.01] {
            let t = asymptotic_quantile(a).unwrap();
            assert_abs_diff_eq!(asymptotic_cdf(t).unwrap(), 1.0 - a, epsilon = 1e-6);
        }
        assert!(asymptotic_quantile(0.0).is_err());
        assert!(asymptotic_quantile(1.0).is_err());
        assert!(asymptotic_cdf(0.0).is_err());
    }

    #[test]
    fn large_df_expansion_matches_incomplete_gamma() {
        // reference values from 40-digit arithmetic
        let cases = [
            (5000.0, 1.0, 0.498_119_365_966_182_6),
            (5000.0, 1.01, 0.239_015_325_240_175_1),
            (1e5, 0.999, 0.623_725_107_245_656_6),
            (1e5, 1.0001, 0.486_966_558_563_729_3),
        ];
        for (a, lam, want) in cases {
            let got = temme_upper(a, lam * a);
            assert!((got - want).abs() < 2e-12, "a = {a}, lambda = {lam}: {got} vs {want}");
        }
    }

    #[test]
    fn cdf_is_monotone_and_proper() {
        let law = AsymptoticLaw::default();
        let mut prev = 0.0;
        for k in 0..10_000 {
            let t = 0.01 + (50.0 - 0.01) * k as f64 / 9_999.0;
            let g = law.cdf(t).unwrap();
            assert!(g >= prev - 1e-15, "t = {t}: {g} < {prev}");
            assert!((0.0..=1.0).contains(&g));
            prev = g;
        }
        assert!(law.cdf(0.5).unwrap() == 0.0);
        assert!(law.cdf(50.0).unwrap() > 1.0 - 1e-10);
    }

    #[test]
    fn series_truncation_is_sound() {
        let short = AsymptoticLaw::default();
        let long = AsymptoticLaw { series_cutoff: 400, ..short };
        let mut t = 0.5;
        while t < 30.0 {
            let d = (short.cdf(t).unwrap() - long.cdf(t).unwrap()).abs();
            assert!(d < 1e-10, "t = {t}: {d}");
            t += 0.01;
        }
    }

    #[test]
    fn threshold_weight_disagrees_with_table() {
        let law = AsymptoticLaw::with_weight(SeriesWeight::Threshold);
        let tail = law.tail(4.179).unwrap();
        assert!((tail - 0.05).abs() > 0.03, "{tail}");
    }
}
