//! Test statistics and order-selection criteria built on cosine coefficients.
//!
//! Every statistic is a function of the scaled squared coefficients
//! `2n c_j² / s²`, where `s² = σ̂²` for raw data and `1/12` for uniform rank
//! scores. The order-selection statistic is the largest partial mean of those
//! terms; the Neyman statistics are partial sums at a fixed or criterion-chosen
//! order; the Bayes statistic weights `exp(half-term)` by `j⁻²`.

use serde::{Deserialize, Serialize};

use crate::basis::{CoefficientSource, CoefficientVector, DesignedSample, UniformScores};
use crate::error::{invalid, Error, Result};

/// Variance of the continuous uniform law, the known scale of rank scores.
pub const RANK_SCALE: f64 = 1.0 / 12.0;

/// Default exponent above which the Bayes sum switches to log-space.
pub const BAYES_LOG_THRESHOLD: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    OsRaw,
    OsRank,
    NeymanFixed,
    NeymanRankMallows,
    NeymanRankBic,
    BayesRank,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::OsRaw,
        Method::OsRank,
        Method::NeymanFixed,
        Method::NeymanRankMallows,
        Method::NeymanRankBic,
        Method::BayesRank,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Method::OsRaw => "os_raw",
            Method::OsRank => "os_rank",
            Method::NeymanFixed => "neyman_fixed",
            Method::NeymanRankMallows => "neyman_rank_mallows",
            Method::NeymanRankBic => "neyman_rank_bic",
            Method::BayesRank => "bayes_rank",
        }
    }

    pub fn from_id(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.id() == s)
    }

    pub fn is_rank_based(self) -> bool {
        self != Method::OsRaw
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Calibration {
    Exact,
    MonteCarlo,
    Asymptotic,
    None,
}

/// Result of one test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub method: Method,
    pub statistic: f64,
    /// Selected order for order-selected methods, the fixed order for
    /// `neyman_fixed`, 0 for the Bayes statistic.
    pub selected_order: usize,
    pub p_value: Option<f64>,
    pub calibration: Calibration,
    pub seed: Option<u64>,
    /// Set when midranks were used; exact null tables assume no ties.
    pub tie_caveat: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration_note: Option<String>,
}

impl TestOutcome {
    fn uncalibrated(method: Method, statistic: f64, selected_order: usize, tie_caveat: bool) -> Self {
        Self {
            method,
            statistic,
            selected_order,
            p_value: None,
            calibration: Calibration::None,
            seed: None,
            tie_caveat,
            calibration_note: None,
        }
    }

    /// Attaches a p-value; `calibration` must not be `None`.
    pub fn with_p_value(mut self, p_value: f64, calibration: Calibration, seed: Option<u64>) -> Self {
        debug_assert!(calibration != Calibration::None);
        self.p_value = Some(p_value.clamp(0.0, 1.0));
        self.calibration = calibration;
        self.seed = seed;
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.calibration_note = Some(note.into());
        self
    }
}

/// Penalty of a Mallows- or BIC-type order criterion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Penalty {
    /// `A·m`; `A = 2` is Mallows' Cp.
    Mallows { a: f64 },
    /// `(log n)·m`
    Bic,
}

impl Penalty {
    pub fn per_order(self, n: usize) -> f64 {
        match self {
            Penalty::Mallows { a } => a,
            Penalty::Bic => (n as f64).ln(),
        }
    }

    fn validate(self) -> Result<()> {
        match self {
            Penalty::Mallows { a } if !(a > 0.0 && a.is_finite()) => {
                invalid(format!("Mallows penalty constant must be positive and finite, got {a}"))
            }
            _ => Ok(()),
        }
    }
}

/// Criterion values `M(m)` for `m = 0..n-1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionTrace {
    pub values: Vec<f64>,
    /// Smallest maximizing order.
    pub argmax: usize,
    pub penalty: Penalty,
}

/// `2n c² / scale`, the unit every statistic is built from.
#[inline]
pub fn scaled_term(c: f64, n: usize, scale: f64) -> f64 {
    2.0 * n as f64 * c * c / scale
}

/// Largest partial mean of `terms` and its smallest maximizing order.
fn max_partial_mean(terms: impl Iterator<Item = f64>) -> (f64, usize) {
    let mut sum = 0.0;
    let mut best = f64::NEG_INFINITY;
    let mut arg = 0;
    for (k, t) in terms.enumerate() {
        sum += t;
        let mean = sum / (k + 1) as f64;
        if mean > best {
            best = mean;
            arg = k + 1;
        }
    }
    (best, arg)
}

fn trace_from_terms(terms: impl Iterator<Item = f64>, per_order: f64, len: usize) -> (Vec<f64>, usize) {
    let mut values = Vec::with_capacity(len + 1);
    values.push(0.0);
    let mut sum = 0.0;
    let (mut best, mut arg) = (0.0, 0);
    for (k, t) in terms.enumerate() {
        sum += t;
        let v = sum - per_order * (k + 1) as f64;
        if v > best {
            best = v;
            arg = k + 1;
        }
        values.push(v);
    }
    (values, arg)
}

/// A distribution-free statistic of uniform rank scores. The null tables in
/// `calibrate` and the public test functions both evaluate through here, so
/// observed and tabulated values are computed identically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankStatistic {
    Os,
    NeymanFixed { order: usize },
    NeymanMallows,
    NeymanBic,
    Bayes,
}

impl RankStatistic {
    pub fn method(self) -> Method {
        match self {
            RankStatistic::Os => Method::OsRank,
            RankStatistic::NeymanFixed { .. } => Method::NeymanFixed,
            RankStatistic::NeymanMallows => Method::NeymanRankMallows,
            RankStatistic::NeymanBic => Method::NeymanRankBic,
            RankStatistic::Bayes => Method::BayesRank,
        }
    }

    /// Rank statistic for a method; `order` is required for `neyman_fixed`.
    pub fn for_method(method: Method, order: Option<usize>) -> Result<Self> {
        Ok(match method {
            Method::OsRank => RankStatistic::Os,
            Method::NeymanRankMallows => RankStatistic::NeymanMallows,
            Method::NeymanRankBic => RankStatistic::NeymanBic,
            Method::BayesRank => RankStatistic::Bayes,
            Method::NeymanFixed => match order {
                Some(order) if order >= 1 => RankStatistic::NeymanFixed { order },
                _ => return invalid("neyman_fixed needs an order m >= 1"),
            },
            Method::OsRaw => return invalid("os_raw is not a rank statistic"),
        })
    }

    /// `os_rank`, `neyman_fixed:3`, ...
    pub fn id(self) -> String {
        match self {
            RankStatistic::NeymanFixed { order } => format!("neyman_fixed:{order}"),
            other => other.method().id().to_string(),
        }
    }

    pub fn from_id(s: &str) -> Option<Self> {
        if let Some(rest) = s.strip_prefix("neyman_fixed:") {
            return rest.parse().ok().filter(|&o| o >= 1).map(|order| RankStatistic::NeymanFixed { order });
        }
        Method::from_id(s).and_then(|m| Self::for_method(m, None).ok())
    }

    pub fn check_n(self, n: usize) -> Result<()> {
        if n < 2 {
            return invalid("rank statistics need n >= 2");
        }
        if let RankStatistic::NeymanFixed { order } = self {
            if order >= n {
                return invalid(format!("Neyman order {order} must be < n = {n}"));
            }
        }
        Ok(())
    }

    /// Statistic and order from rank-score coefficients `c_1..c_{n-1}`.
    pub fn evaluate(self, coeffs: &[f64]) -> Result<(f64, usize)> {
        let n = coeffs.len() + 1;
        let terms = coeffs.iter().map(|&c| scaled_term(c, n, RANK_SCALE));
        Ok(match self {
            RankStatistic::Os => max_partial_mean(terms),
            RankStatistic::NeymanFixed { order } => {
                if order == 0 || order >= n {
                    return invalid(format!("Neyman order {order} out of range 1..{n}"));
                }
                (terms.take(order).sum(), order)
            }
            RankStatistic::NeymanMallows | RankStatistic::NeymanBic => {
                let per_order = if self == RankStatistic::NeymanMallows { 2.0 } else { (n as f64).ln() };
                let (values, arg) = trace_from_terms(terms, per_order, n - 1);
                (values[arg] + per_order * arg as f64, arg)
            }
            RankStatistic::Bayes => (bayes_sum(coeffs, BAYES_LOG_THRESHOLD)?, 0),
        })
    }

    pub fn outcome(self, u: &UniformScores) -> Result<TestOutcome> {
        self.check_n(u.n())?;
        let coeffs = u.coefficients();
        let (stat, order) = self.evaluate(coeffs.as_slice())?;
        Ok(TestOutcome::uncalibrated(self.method(), stat, order, u.has_ties()))
    }
}

/// Raw-data order-selection statistic `T_n`.
pub fn os_statistic(coeffs: &CoefficientVector, sigma_sq: f64) -> Result<TestOutcome> {
    if !(sigma_sq > 0.0 && sigma_sq.is_finite()) {
        return invalid(format!("sigma_sq must be positive and finite, got {sigma_sq}"));
    }
    if coeffs.source() != CoefficientSource::Raw {
        return invalid(format!("os_statistic needs raw coefficients, got {:?}", coeffs.source()));
    }
    let n = coeffs.n();
    let (stat, arg) = max_partial_mean(coeffs.as_slice().iter().map(|&c| scaled_term(c, n, sigma_sq)));
    Ok(TestOutcome::uncalibrated(Method::OsRaw, stat, arg, false))
}

/// `T_n` with the first-difference variance estimate.
pub fn raw_os_test(sample: &DesignedSample) -> Result<TestOutcome> {
    let sigma_sq = variance_estimate(sample)?;
    if sigma_sq <= 0.0 {
        return Err(Error::DegenerateVariance);
    }
    let coeffs = crate::basis::cosine_coefficients(sample.y(), CoefficientSource::Raw)?;
    os_statistic(&coeffs, sigma_sq)
}

/// Rank order-selection statistic `R_n`.
pub fn rank_os_statistic(u: &UniformScores) -> Result<TestOutcome> {
    RankStatistic::Os.outcome(u)
}

/// Mallows/BIC criterion trace `M(m) = Σ_{j≤m} 2n c_j²/scale − pen·m`.
pub fn criterion_trace(coeffs: &CoefficientVector, scale: f64, penalty: Penalty) -> Result<CriterionTrace> {
    if !(scale > 0.0 && scale.is_finite()) {
        return invalid(format!("scale must be positive and finite, got {scale}"));
    }
    penalty.validate()?;
    let n = coeffs.n();
    let (values, argmax) =
        trace_from_terms(coeffs.as_slice().iter().map(|&c| scaled_term(c, n, scale)), penalty.per_order(n), n - 1);
    Ok(CriterionTrace { values, argmax, penalty })
}

/// Unmaximized Neyman sum `Σ_{j≤m} 2n c_j²/scale`.
pub fn neyman_statistic(coeffs: &CoefficientVector, scale: f64, m: usize) -> Result<f64> {
    let n = coeffs.n();
    if m == 0 || m >= n {
        return invalid(format!("Neyman order m = {m} must satisfy 1 <= m <= {}", n - 1));
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return invalid(format!("scale must be positive and finite, got {scale}"));
    }
    Ok(coeffs.as_slice()[..m].iter().map(|&c| scaled_term(c, n, scale)).sum())
}

/// Order criterion for the data-driven Neyman statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeymanPenalty {
    /// `2m`
    Mallows,
    /// `(log n)m`
    Bic,
}

/// `S^R_{n,m̂}` with `m̂` maximizing the rank criterion.
pub fn data_driven_neyman(u: &UniformScores, penalty: NeymanPenalty) -> Result<TestOutcome> {
    match penalty {
        NeymanPenalty::Mallows => RankStatistic::NeymanMallows,
        NeymanPenalty::Bic => RankStatistic::NeymanBic,
    }
    .outcome(u)
}

/// Rank Bayes statistic `B_n = Σ j⁻² exp(12n φ̂_j²)`.
pub fn bayes_statistic(u: &UniformScores) -> Result<TestOutcome> {
    RankStatistic::Bayes.outcome(u)
}

/// `B_n` with a custom log-space switch-over threshold.
pub fn bayes_statistic_with_threshold(u: &UniformScores, log_threshold: f64) -> Result<TestOutcome> {
    let coeffs = u.coefficients();
    let stat = bayes_sum(coeffs.as_slice(), log_threshold)?;
    Ok(TestOutcome::uncalibrated(Method::BayesRank, stat, 0, u.has_ties()))
}

fn bayes_sum(coeffs: &[f64], log_threshold: f64) -> Result<f64> {
    let n = coeffs.len() + 1;
    // 12n c² is half of the rank OS term
    let exponent = |c: f64| 0.5 * scaled_term(c, n, RANK_SCALE);
    let max_exp = coeffs.iter().map(|&c| exponent(c)).fold(0.0f64, f64::max);
    if max_exp <= log_threshold {
        return Ok(coeffs.iter().enumerate().map(|(k, &c)| exponent(c).exp() / ((k + 1) * (k + 1)) as f64).sum());
    }
    let logs: Vec<f64> = coeffs.iter().enumerate().map(|(k, &c)| exponent(c) - 2.0 * ((k + 1) as f64).ln()).collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_stat = top + logs.iter().map(|l| (l - top).exp()).sum::<f64>().ln();
    if log_stat >= f64::MAX.ln() {
        return Err(Error::Overflow { log_statistic: log_stat });
    }
    Ok(log_stat.exp())
}

/// First-difference variance estimate `Σ (Y_{i+1} − Y_i)² / (2(n−1))`.
pub fn variance_estimate(sample: &DesignedSample) -> Result<f64> {
    let y = sample.y();
    if y.len() < 3 {
        return invalid("variance estimate needs n >= 3");
    }
    let ss: f64 = y.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    Ok(ss / (2.0 * (y.len() - 1) as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{cosine_coefficients, rank_scores, TiePolicy};
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn scores(y: Vec<f64>) -> UniformScores {
        rank_scores(&DesignedSample::new(y).unwrap(), TiePolicy::Reject).unwrap()
    }

    fn raw(c: Vec<f64>) -> CoefficientVector {
        let n = c.len() + 1;
        CoefficientVector::new(CoefficientSource::Raw, c, n).unwrap()
    }

    fn brute_os(terms: &[f64]) -> f64 {
        let mut best = f64::NEG_INFINITY;
        for m in 1..=terms.len() {
            let mut s = 0.0;
            for t in &terms[..m] {
                s += t;
            }
            best = best.max(s / m as f64);
        }
        best
    }

    #[test]
    fn os_statistic_zero_and_single_coefficient() {
        let out = os_statistic(&raw(vec![0.0; 9]), 2.5).unwrap();
        assert_eq!(out.statistic, 0.0);
        assert_eq!(out.p_value, None);
        assert_eq!(out.calibration, Calibration::None);

        let mut c = vec![0.0; 9];
        c[0] = 0.3;
        let out = os_statistic(&raw(c), 0.5).unwrap();
        assert_relative_eq!(out.statistic, 2.0 * 10.0 * 0.09 / 0.5, max_relative = 1e-15);
        assert_eq!(out.selected_order, 1);

        assert!(os_statistic(&raw(vec![0.0; 3]), 0.0).is_err());
        assert!(os_statistic(&raw(vec![0.0; 3]), -1.0).is_err());
        let rank = raw(vec![0.0; 3]).with_source(CoefficientSource::Rank);
        assert!(os_statistic(&rank, 1.0).is_err());
    }

    #[test]
    fn os_statistic_matches_brute_force_on_gaussian_sample() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let y: Vec<f64> = (0..100).map(|_| rng.sample(StandardNormal)).collect();
        let c = cosine_coefficients(&y, CoefficientSource::Raw).unwrap();
        let terms: Vec<f64> = c.as_slice().iter().map(|c| 200.0 * c * c / 1.3).collect();
        let out = os_statistic(&c, 1.3).unwrap();
        assert_relative_eq!(out.statistic, brute_os(&terms), max_relative = 1e-12);
    }

    #[test]
    fn rank_os_two_points_is_two_thirds() {
        for y in [vec![0.1, 0.2], vec![0.2, 0.1], vec![-5.0, 7.0]] {
            let out = rank_os_statistic(&scores(y)).unwrap();
            assert_relative_eq!(out.statistic, 2.0 / 3.0, max_relative = 1e-14);
            assert_eq!(out.selected_order, 1);
        }
    }

    #[test]
    fn rank_os_monotone_up_and_down_agree() {
        let up = rank_os_statistic(&scores((0..12).map(f64::from).collect())).unwrap();
        let down = rank_os_statistic(&scores((0..12).rev().map(f64::from).collect())).unwrap();
        assert_relative_eq!(up.statistic, down.statistic, max_relative = 1e-13);
    }

    #[test]
    fn rank_os_n5_brute_force() {
        let u: Vec<f64> = (1..=5).map(|k| k as f64 / 6.0).collect();
        let mut terms = Vec::new();
        for j in 1..5 {
            let mut phi = 0.0;
            for (i, ui) in u.iter().enumerate() {
                phi += ui * (std::f64::consts::PI * j as f64 * (i as f64 + 0.5) / 5.0).cos();
            }
            phi /= 5.0;
            terms.push(24.0 * 5.0 * phi * phi);
        }
        let out = rank_os_statistic(&scores(vec![1.0, 2.0, 3.0, 4.0, 5.0])).unwrap();
        assert_relative_eq!(out.statistic, brute_os(&terms), max_relative = 1e-12);
    }

    #[test]
    fn criterion_trace_zero_coefficients() {
        let t = criterion_trace(&raw(vec![0.0; 6]), 1.0, Penalty::Mallows { a: 2.0 }).unwrap();
        assert_eq!(t.argmax, 0);
        assert_eq!(t.values[0], 0.0);
        assert!(t.values[1..].iter().all(|&v| v < 0.0));
        assert!(criterion_trace(&raw(vec![0.0; 6]), 1.0, Penalty::Mallows { a: 0.0 }).is_err());
        assert!(criterion_trace(&raw(vec![0.0; 6]), 0.0, Penalty::Bic).is_err());
    }

    #[test]
    fn criterion_argmax_matches_exhaustive_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let c: Vec<f64> = (0..9).map(|_| rng.random_range(-0.5..0.5)).collect();
            let coeffs = raw(c.clone());
            for pen in [Penalty::Mallows { a: 2.0 }, Penalty::Mallows { a: 4.18 }, Penalty::Bic] {
                let t = criterion_trace(&coeffs, 1.0, pen).unwrap();
                let per = pen.per_order(10);
                let mut best = (0.0, 0);
                for m in 1..10 {
                    let v: f64 = c[..m].iter().map(|x| 20.0 * x * x).sum::<f64>() - per * m as f64;
                    if v > best.0 {
                        best = (v, m);
                    }
                }
                assert_eq!(t.argmax, best.1);
            }
        }
    }

    #[test]
    fn order_selection_equivalence_random_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..1000 {
            let n = rng.random_range(3..30);
            let y: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let u = scores(y);
            let r = rank_os_statistic(&u).unwrap().statistic;
            let a: f64 = rng.random_range(0.2..8.0);
            let t = criterion_trace(&u.coefficients(), RANK_SCALE, Penalty::Mallows { a }).unwrap();
            assert_eq!(r >= a, t.argmax > 0, "R = {r}, A = {a}");
        }
    }

    #[test]
    fn neyman_statistic_cases() {
        let z = raw(vec![0.0; 4]);
        assert_eq!(neyman_statistic(&z, 1.0, 2).unwrap(), 0.0);
        assert!(neyman_statistic(&z, 1.0, 0).is_err());
        assert!(neyman_statistic(&z, 1.0, 5).is_err());
        let c = raw(vec![0.2, 0.1, 0.0, 0.3]);
        assert_relative_eq!(neyman_statistic(&c, 0.5, 1).unwrap(), 10.0 * 0.04 / 0.5);
    }

    #[test]
    fn neyman_full_order_is_parseval() {
        let u = scores(vec![3.0, 9.0, 1.0, 4.0, 7.0, 2.0, 8.0, 5.0, 6.0, 0.5]);
        let n = u.n() as f64;
        let full = neyman_statistic(&u.coefficients(), RANK_SCALE, u.n() - 1).unwrap();
        let mean = u.as_slice().iter().sum::<f64>() / n;
        let ss: f64 = u.as_slice().iter().map(|v| (v - mean).powi(2)).sum();
        assert_relative_eq!(full, 24.0 * n * ss / (2.0 * n), max_relative = 1e-12);
    }

    #[test]
    fn data_driven_neyman_flat_and_signal() {
        // n = 2 scores give 24·2·(1/72) = 2/3 < 2, so m̂ = 0
        let out = data_driven_neyman(&scores(vec![1.0, 2.0]), NeymanPenalty::Mallows).unwrap();
        assert_eq!((out.selected_order, out.statistic), (0, 0.0));

        let n = 50;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let y: Vec<f64> = (0..n)
            .map(|i| {
                let x = (i as f64 + 0.5) / n as f64;
                3.0 * (std::f64::consts::PI * x).cos() + 0.3 * rng.sample::<f64, _>(StandardNormal)
            })
            .collect();
        let u = scores(y);
        for pen in [NeymanPenalty::Mallows, NeymanPenalty::Bic] {
            let out = data_driven_neyman(&u, pen).unwrap();
            assert!(out.selected_order >= 1 && out.statistic > 0.0);
            let p = if pen == NeymanPenalty::Mallows { Penalty::Mallows { a: 2.0 } } else { Penalty::Bic };
            let t = criterion_trace(&u.coefficients(), RANK_SCALE, p).unwrap();
            assert_eq!(t.argmax, out.selected_order);
            let m = out.selected_order;
            assert_relative_eq!(out.statistic, t.values[m] + p.per_order(n) * m as f64, max_relative = 1e-12);
        }
    }

    #[test]
    fn bayes_flat_values() {
        let zero = [0.0; 2];
        assert_eq!(bayes_sum(&zero, BAYES_LOG_THRESHOLD).unwrap(), 1.25);
        let zero = [0.0; 19];
        let expect: f64 = (1..20).map(|j| 1.0 / (j * j) as f64).sum();
        assert_relative_eq!(bayes_sum(&zero, BAYES_LOG_THRESHOLD).unwrap(), expect, max_relative = 1e-15);
    }

    #[test]
    fn bayes_matches_direct_sum_and_log_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let y: Vec<f64> = (0..20).map(|_| rng.sample(StandardNormal)).collect();
        let u = scores(y);
        let c = u.coefficients();
        let mut direct = 0.0;
        for j in 1..20 {
            let phi = c.get(j).unwrap();
            direct += (12.0 * 20.0 * phi * phi).exp() / (j * j) as f64;
        }
        let b = bayes_statistic(&u).unwrap();
        assert!(b.statistic > 0.0);
        assert_relative_eq!(b.statistic, direct, max_relative = 1e-12);
        let logged = bayes_statistic_with_threshold(&u, 0.0).unwrap();
        assert_relative_eq!(logged.statistic, direct, max_relative = 1e-12);
    }

    #[test]
    fn bayes_overflow_reports_log() {
        // a strong trend on n = 3000 pushes 12n φ̂₁² far past 710
        let y: Vec<f64> = (0..3000).map(f64::from).collect();
        match bayes_statistic(&scores(y)) {
            Err(Error::Overflow { log_statistic }) => assert!(log_statistic > 709.0),
            other => panic!("expected overflow, got {other:?}"),
        }
    }

    #[test]
    fn variance_estimate_cases() {
        let s = |y: Vec<f64>| DesignedSample::new(y).unwrap();
        assert_eq!(variance_estimate(&s(vec![2.0; 5])).unwrap(), 0.0);
        assert_abs_diff_eq!(variance_estimate(&s(vec![0.0, 1.0, 0.0, 1.0])).unwrap(), 0.5);
        assert!(variance_estimate(&s(vec![0.0, 1.0])).is_err());
        assert!(matches!(raw_os_test(&s(vec![2.0; 5])), Err(Error::DegenerateVariance)));

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let y: Vec<f64> = (0..10_000).map(|_| rng.sample(StandardNormal)).collect();
        assert!((variance_estimate(&s(y)).unwrap() - 1.0).abs() < 0.05);
    }

    #[test]
    fn raw_test_scale_shift_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let y: Vec<f64> = (0..60).map(|_| rng.sample(StandardNormal)).collect();
        let s = DesignedSample::new(y).unwrap();
        let t = s.map(|v| 3.5 * v - 12.0).unwrap();
        let a = raw_os_test(&s).unwrap();
        let b = raw_os_test(&t).unwrap();
        assert_relative_eq!(a.statistic, b.statistic, max_relative = 1e-10);
        assert_eq!(a.selected_order, b.selected_order);
    }

    #[test]
    fn statistic_ids_round_trip() {
        for s in [
            RankStatistic::Os,
            RankStatistic::NeymanFixed { order: 4 },
            RankStatistic::NeymanMallows,
            RankStatistic::NeymanBic,
            RankStatistic::Bayes,
        ] {
            assert_eq!(RankStatistic::from_id(&s.id()), Some(s));
        }
        assert_eq!(RankStatistic::from_id("neyman_fixed:0"), None);
        assert_eq!(RankStatistic::from_id("os_raw"), None);
        for m in Method::ALL {
            assert_eq!(Method::from_id(m.id()), Some(m));
        }
    }
}
