//! Design grid, cosine-basis coefficients, rank scores and normal scores.
//!
//! Responses are observed on the midpoint grid `x_i = (i - 1/2)/n`, on which
//! the cosines `cos(πjx)`, `j = 1..n-1`, are discretely orthogonal:
//!
//! ```text
//! Σ_r cos(πj x_r)  = 0
//! Σ_r cos²(πj x_r) = n/2
//! ```
//!
//! Every statistic in the crate is a function of the coefficients
//! `(1/n) Σ_i v_i cos(πj x_i)` of some transform `v` of the data, so all of
//! them go through [`CosineTable`].

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{invalid, Error, Result};

/// Midpoint design points `x_i = (i - 1/2)/n`, `i = 1..n`.
pub fn design_grid(n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return invalid("design grid needs n >= 1");
    }
    let nf = n as f64;
    Ok((1..=n).map(|i| (i as f64 - 0.5) / nf).collect())
}

/// Responses on the implicit midpoint grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignedSample {
    y: Vec<f64>,
}

impl DesignedSample {
    pub fn new(y: Vec<f64>) -> Result<Self> {
        if y.len() < 2 {
            return invalid(format!("a sample needs n >= 2 responses, got {}", y.len()));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return invalid(format!("response {} is not finite ({})", i + 1, y[i]));
        }
        Ok(Self { y })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn x(&self) -> Vec<f64> {
        design_grid(self.y.len()).expect("n >= 2 by construction")
    }

    /// Applies `f` to every response, keeping the design.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.y.iter().map(|&v| f(v)).collect())
    }
}

/// Which transform of the data a coefficient vector was computed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientSource {
    Raw,
    Rank,
    NormalScore,
    ResidualRank,
}

/// Cosine coefficients `c_1, …, c_{n-1}` of a length-`n` vector.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientVector {
    source: CoefficientSource,
    coeffs: Vec<f64>,
    n: usize,
}

impl CoefficientVector {
    pub fn new(source: CoefficientSource, coeffs: Vec<f64>, n: usize) -> Result<Self> {
        if n < 2 || coeffs.len() != n - 1 {
            return invalid(format!("coefficient vector for n = {n} must have n - 1 entries, got {}", coeffs.len()));
        }
        Ok(Self { source, coeffs, n })
    }

    pub fn source(&self) -> CoefficientSource {
        self.source
    }

    /// Originating sample size.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Coefficients for `j = 1..n-1`, stored 0-based.
    pub fn as_slice(&self) -> &[f64] {
        &self.coeffs
    }

    /// Coefficient `j` (1-based, as in the series index).
    pub fn get(&self, j: usize) -> Option<f64> {
        j.checked_sub(1).and_then(|k| self.coeffs.get(k).copied())
    }

    pub fn with_source(mut self, source: CoefficientSource) -> Self {
        self.source = source;
        self
    }
}

/// Precomputed `cos(πj x_i)` for `j = 1..n-1` and `i = 1..n`.
///
/// Angles are reduced in integer arithmetic: `πj x_i = π k / (2n)` with
/// `k = j(2i - 1)`, folded into `[0, n]` before calling `cos`. Symmetric grid
/// points therefore get bitwise-equal magnitudes and `k = n` gives an exact 0.
#[derive(Debug, Clone)]
pub struct CosineTable {
    n: usize,
    rows: Vec<f64>,
}

impl CosineTable {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return invalid("cosine table needs n >= 2");
        }
        let mut rows = Vec::with_capacity((n - 1) * n);
        for j in 1..n {
            for i in 0..n {
                rows.push(reduced_cos(j * (2 * i + 1), n));
            }
        }
        Ok(Self { n, rows })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `cos(πj x_i)` for the 1-based frequency `j` over all design points.
    pub fn row(&self, j: usize) -> &[f64] {
        let start = (j - 1) * self.n;
        &self.rows[start..start + self.n]
    }

    /// Coefficients `(1/n) Σ_i v_i cos(πj x_i)`, written into `out[j - 1]`.
    pub fn coefficients_into(&self, values: &[f64], out: &mut [f64]) {
        debug_assert_eq!(values.len(), self.n);
        debug_assert_eq!(out.len(), self.n - 1);
        let nf = self.n as f64;
        for (row, slot) in self.rows.chunks_exact(self.n).zip(out.iter_mut()) {
            let s: f64 = row.iter().zip(values).map(|(c, v)| c * v).sum();
            *slot = s / nf;
        }
    }

    pub fn coefficients(&self, values: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n - 1];
        self.coefficients_into(values, &mut out);
        out
    }
}

/// `cos(π k / (2n))` with exact integer folding of `k` modulo the period.
fn reduced_cos(k: usize, n: usize) -> f64 {
    let period = 4 * n;
    let mut k = k % period;
    if k > 2 * n {
        k = period - k;
    }
    let (k, sign) = if k > n { (2 * n - k, -1.0) } else { (k, 1.0) };
    if k == n {
        return 0.0;
    }
    sign * (PI * k as f64 / (2 * n) as f64).cos()
}

/// Cosine coefficients of `values`, tagged with `source`.
pub fn cosine_coefficients(values: &[f64], source: CoefficientSource) -> Result<CoefficientVector> {
    let n = values.len();
    if n < 2 {
        return invalid("cosine coefficients need n >= 2 values");
    }
    if values.iter().any(|v| !v.is_finite()) {
        return invalid("cosine coefficients need finite values");
    }
    let table = CosineTable::new(n)?;
    CoefficientVector::new(source, table.coefficients(values), n)
}

/// What to do when responses are tied.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TiePolicy {
    #[default]
    Reject,
    /// Tied values share the average of their would-be ranks. The null
    /// tables no longer apply exactly; outcomes carry a tie caveat.
    Midrank,
}

/// Denominator turning ranks into uniform scores.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreDenominator {
    /// `U_i = R_i/(n+1)`, scores strictly inside (0, 1) with mean 1/2.
    #[default]
    NPlusOne,
    /// `U_i = R_i/n`. The published small-sample tail tables were tabulated
    /// under this scaling.
    SampleSize,
}

impl ScoreDenominator {
    pub fn divisor(self, n: usize) -> f64 {
        match self {
            Self::NPlusOne => (n + 1) as f64,
            Self::SampleSize => n as f64,
        }
    }

    pub fn id(self) -> &'static str {
        match self {
            Self::NPlusOne => "n_plus_one",
            Self::SampleSize => "sample_size",
        }
    }

    pub fn from_id(s: &str) -> Option<Self> {
        match s {
            "n_plus_one" => Some(Self::NPlusOne),
            "sample_size" => Some(Self::SampleSize),
            _ => None,
        }
    }
}

/// Uniform rank scores `U_i = R(Y_i)/d`.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformScores {
    u: Vec<f64>,
    denominator: ScoreDenominator,
    tied: bool,
}

impl UniformScores {
    /// Scores from a permutation of the ranks `1..=n`. No validation beyond
    /// debug assertions; this is the hot path of null enumeration.
    pub fn from_ranks(ranks: &[usize], denominator: ScoreDenominator) -> Self {
        let d = denominator.divisor(ranks.len());
        Self { u: ranks.iter().map(|&r| r as f64 / d).collect(), denominator, tied: false }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.u
    }

    pub fn n(&self) -> usize {
        self.u.len()
    }

    pub fn denominator(&self) -> ScoreDenominator {
        self.denominator
    }

    /// True when midranks were assigned to tied responses.
    pub fn has_ties(&self) -> bool {
        self.tied
    }

    pub fn coefficients(&self) -> CoefficientVector {
        let table = CosineTable::new(self.u.len()).expect("n >= 2");
        CoefficientVector::new(CoefficientSource::Rank, table.coefficients(&self.u), self.u.len())
            .expect("length n - 1")
    }
}

/// Ranks of `values` (1-based, midranks for ties) and the number of values
/// that belong to a tie group.
pub fn midranks(values: &[f64]) -> (Vec<f64>, usize) {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut tied = 0;
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end share ranks start+1 ..= end
        let rank = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = rank;
        }
        if end - start > 1 {
            tied += end - start;
        }
        start = end;
    }
    (ranks, tied)
}

/// Uniform scores `R(Y_i)/(n+1)` of a sample.
pub fn rank_scores(sample: &DesignedSample, tie_policy: TiePolicy) -> Result<UniformScores> {
    rank_scores_with(sample, tie_policy, ScoreDenominator::NPlusOne)
}

pub fn rank_scores_with(
    sample: &DesignedSample,
    tie_policy: TiePolicy,
    denominator: ScoreDenominator,
) -> Result<UniformScores> {
    rank_values(sample.y(), tie_policy, denominator)
}

/// Rank scores of an arbitrary finite vector (residuals, transformed data).
pub fn rank_values(values: &[f64], tie_policy: TiePolicy, denominator: ScoreDenominator) -> Result<UniformScores> {
    let n = values.len();
    if n < 2 {
        return invalid("rank scores need n >= 2 values");
    }
    if values.iter().any(|v| !v.is_finite()) {
        return invalid("rank scores need finite values");
    }
    let (ranks, tied) = midranks(values);
    if tied > 0 && tie_policy == TiePolicy::Reject {
        return Err(Error::Ties { n, tied });
    }
    let d = denominator.divisor(n);
    Ok(UniformScores { u: ranks.iter().map(|&r| r / d).collect(), denominator, tied: tied > 0 })
}

/// `Φ⁻¹(u_i)` elementwise.
pub fn normal_scores(u: &UniformScores) -> Result<Vec<f64>> {
    normal_quantiles(u.as_slice())
}

pub(crate) fn normal_quantiles(u: &[f64]) -> Result<Vec<f64>> {
    if let Some(&bad) = u.iter().find(|&&p| !(p > 0.0 && p < 1.0)) {
        return invalid(format!("normal scores need u in (0, 1), got {bad}"));
    }
    let std = Normal::standard();
    Ok(u.iter()
        .map(|&p| {
            // evaluate on the lower half and reflect, so scores are odd about 1/2
            if p > 0.5 {
                -std.inverse_cdf(1.0 - p)
            } else {
                std.inverse_cdf(p)
            }
        })
        .collect())
}

/// Cosine coefficients of the normal scores of a sample.
pub fn normal_score_coefficients(u: &UniformScores) -> Result<CoefficientVector> {
    let z = normal_scores(u)?;
    cosine_coefficients(&z, CoefficientSource::NormalScore)
}

/// Maximum deviations from the discrete cosine identities for one `n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BasisIdentityReport {
    pub n: usize,
    /// `max_i |Σ_r cos(πi x_r)|`
    pub max_sum_deviation: f64,
    /// `max_i |Σ_r cos²(πi x_r) - n/2|`
    pub max_square_deviation: f64,
    pub tolerance: f64,
}

impl BasisIdentityReport {
    pub fn holds(&self) -> bool {
        self.max_sum_deviation <= self.tolerance && self.max_square_deviation <= self.tolerance
    }
}

/// Checks the sum and sum-of-squares identities for `i = 1..n-1` on the
/// table every coefficient computation uses.
pub fn check_basis_identities(n: usize) -> Result<BasisIdentityReport> {
    let table = CosineTable::new(n)?;
    let half = n as f64 / 2.0;
    let (mut sum_dev, mut sq_dev) = (0.0f64, 0.0f64);
    for i in 1..n {
        let row = table.row(i);
        sum_dev = sum_dev.max(row.iter().sum::<f64>().abs());
        sq_dev = sq_dev.max((row.iter().map(|c| c * c).sum::<f64>() - half).abs());
    }
    Ok(BasisIdentityReport { n, max_sum_deviation: sum_dev, max_square_deviation: sq_dev, tolerance: 1e-10 * n as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn direct_cos(j: usize, i: usize, n: usize) -> f64 {
        (PI * j as f64 * (i as f64 - 0.5) / n as f64).cos()
    }

    #[test]
    fn design_grid_values() {
        assert_eq!(design_grid(1).unwrap(), vec![0.5]);
        assert_eq!(design_grid(2).unwrap(), vec![0.25, 0.75]);
        assert_eq!(design_grid(4).unwrap(), vec![0.125, 0.375, 0.625, 0.875]);
        assert!(design_grid(0).is_err());
    }

    #[test]
    fn sample_validation() {
        assert!(DesignedSample::new(vec![1.0]).is_err());
        assert!(DesignedSample::new(vec![1.0, f64::NAN]).is_err());
        assert!(DesignedSample::new(vec![1.0, f64::INFINITY]).is_err());
        let s = DesignedSample::new(vec![3.0, 1.0, 2.0]).unwrap();
        assert_eq!(s.x(), design_grid(3).unwrap());
    }

    #[test]
    fn table_matches_direct_formula() {
        for n in [2, 3, 7, 64, 129] {
            let t = CosineTable::new(n).unwrap();
            for j in 1..n {
                for i in 1..=n {
                    assert_abs_diff_eq!(t.row(j)[i - 1], direct_cos(j, i, n), epsilon = 1e-13);
                }
            }
        }
    }

    #[test]
    fn constant_vector_has_zero_coefficients() {
        for n in [2, 5, 33, 200] {
            let c = cosine_coefficients(&vec![3.7; n], CoefficientSource::Raw).unwrap();
            assert!(c.as_slice().iter().all(|v| v.abs() < 1e-14), "n = {n}");
        }
    }

    #[test]
    fn two_point_hand_value() {
        let c = cosine_coefficients(&[1.0 / 3.0, 2.0 / 3.0], CoefficientSource::Rank).unwrap();
        assert_abs_diff_eq!(c.get(1).unwrap(), -(2f64.sqrt()) / 12.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c.get(1).unwrap(), -0.117851, epsilon = 1e-6);
        assert_eq!(c.get(0), None);
        assert_eq!(c.get(2), None);
    }

    #[test]
    fn pure_cosine_isolates_its_frequency() {
        let n = 40;
        for k in [1, 7, 39] {
            let v: Vec<f64> = (1..=n).map(|i| 2.0 * direct_cos(k, i, n)).collect();
            let c = cosine_coefficients(&v, CoefficientSource::Raw).unwrap();
            for j in 1..n {
                let expect = if j == k { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(c.get(j).unwrap(), expect, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn coefficient_validation() {
        assert!(cosine_coefficients(&[1.0], CoefficientSource::Raw).is_err());
        assert!(cosine_coefficients(&[1.0, f64::NAN], CoefficientSource::Raw).is_err());
        assert!(CoefficientVector::new(CoefficientSource::Raw, vec![1.0; 3], 3).is_err());
    }

    #[test]
    fn rank_scores_examples() {
        let s = DesignedSample::new(vec![5.0, 1.0, 3.0]).unwrap();
        let u = rank_scores(&s, TiePolicy::Reject).unwrap();
        assert_eq!(u.as_slice(), &[0.75, 0.25, 0.5]);

        let inc = DesignedSample::new((0..9).map(|i| i as f64 * 1.5 - 2.0).collect()).unwrap();
        let u = rank_scores(&inc, TiePolicy::Reject).unwrap();
        let expect: Vec<f64> = (1..=9).map(|k| k as f64 / 10.0).collect();
        assert_eq!(u.as_slice(), expect.as_slice());

        let tied = DesignedSample::new(vec![1.0, 1.0]).unwrap();
        let u = rank_scores(&tied, TiePolicy::Midrank).unwrap();
        assert_eq!(u.as_slice(), &[0.5, 0.5]);
        assert!(u.has_ties());
        assert!(matches!(rank_scores(&tied, TiePolicy::Reject), Err(Error::Ties { n: 2, tied: 2 })));
    }

    #[test]
    fn midranks_average_tie_groups() {
        let (r, tied) = midranks(&[2.0, 5.0, 2.0, 1.0, 2.0]);
        assert_eq!(r, vec![3.0, 5.0, 3.0, 1.0, 3.0]);
        assert_eq!(tied, 3);
    }

    #[test]
    fn sample_size_denominator() {
        let s = DesignedSample::new(vec![0.3, 0.1]).unwrap();
        let u = rank_scores_with(&s, TiePolicy::Reject, ScoreDenominator::SampleSize).unwrap();
        assert_eq!(u.as_slice(), &[1.0, 0.5]);
    }

    /// Φ by Simpson quadrature of the density on [0, z], plus 1/2.
    fn phi_quadrature(z: f64) -> f64 {
        let m = 20_000;
        let h = z / m as f64;
        let dens = |t: f64| (-0.5 * t * t).exp() / (2.0 * PI).sqrt();
        let mut s = dens(0.0) + dens(z);
        for k in 1..m {
            s += dens(k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        0.5 + s * h / 3.0
    }

    #[test]
    fn normal_score_two_thirds_against_quadrature_root() {
        let (mut lo, mut hi) = (0.0, 2.0);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if phi_quadrature(mid) < 2.0 / 3.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let oracle = 0.5 * (lo + hi);
        let z = normal_quantiles(&[2.0 / 3.0]).unwrap()[0];
        assert_abs_diff_eq!(z, oracle, epsilon = 1e-9);
        assert_abs_diff_eq!(z, 0.430727, epsilon = 1e-6);
    }

    #[test]
    fn normal_scores_symmetry_and_domain() {
        assert_eq!(normal_quantiles(&[0.5]).unwrap()[0], 0.0);
        for n in [3usize, 10, 101] {
            let u: Vec<f64> = (1..=n).map(|k| k as f64 / (n + 1) as f64).collect();
            let z = normal_quantiles(&u).unwrap();
            for k in 0..n {
                assert_abs_diff_eq!(z[k] + z[n - 1 - k], 0.0, epsilon = 1e-12);
            }
            assert!(z.windows(2).all(|w| w[0] < w[1]));
        }
        assert!(normal_quantiles(&[0.0]).is_err());
        assert!(normal_quantiles(&[1.0]).is_err());
    }

    #[test]
    fn basis_identities_small_cases() {
        let row: Vec<f64> = (1..=3).map(|r| direct_cos(1, r, 3)).collect();
        assert_abs_diff_eq!(row.iter().sum::<f64>(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(row.iter().map(|c| c * c).sum::<f64>(), 1.5, epsilon = 1e-15);
        for n in [2, 3, 64, 256] {
            let rep = check_basis_identities(n).unwrap();
            assert!(rep.holds(), "{rep:?}");
        }
    }

    #[test]
    fn basis_identities_direct_summation_n64() {
        let n = 64;
        for i in 1..n {
            let s: f64 = (1..=n).map(|r| direct_cos(i, r, n)).sum();
            let q: f64 = (1..=n).map(|r| direct_cos(i, r, n).powi(2)).sum();
            assert!(s.abs() <= 1e-10 * n as f64);
            assert!((q - n as f64 / 2.0).abs() <= 1e-10 * n as f64);
        }
    }

    #[test]
    fn discrete_orthogonality_brute_force() {
        for n in [2, 5, 17, 64] {
            for j in 1..n {
                for k in 1..n {
                    let s: f64 =
                        (1..=n).map(|i| direct_cos(j, i, n) * direct_cos(k, i, n)).sum::<f64>() * 2.0 / n as f64;
                    let delta = if j == k { 1.0 } else { 0.0 };
                    assert_abs_diff_eq!(s, delta, epsilon = 1e-12);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn rank_coefficients_invariant_under_monotone_maps(
            y in prop::collection::vec(-1e3f64..1e3, 2..40)
        ) {
            let s = DesignedSample::new(y).unwrap();
            let Ok(u) = rank_scores(&s, TiePolicy::Reject) else { return Ok(()); };
            let t = s.map(|v| (v / 100.0).exp() + v.powi(3)).unwrap();
            let ut = rank_scores(&t, TiePolicy::Reject).unwrap();
            prop_assert_eq!(u.coefficients(), ut.coefficients());
        }

        #[test]
        fn centering_does_not_change_coefficients(
            v in prop::collection::vec(0.0f64..1.0, 2..50)
        ) {
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            let centered: Vec<f64> = v.iter().map(|x| x - mean).collect();
            let a = cosine_coefficients(&v, CoefficientSource::Rank).unwrap();
            let b = cosine_coefficients(&centered, CoefficientSource::Rank).unwrap();
            for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
                prop_assert!((x - y).abs() < 1e-14);
            }
        }

        #[test]
        fn uniform_scores_have_mean_one_half(
            y in prop::collection::vec(-10.0f64..10.0, 2..60)
        ) {
            let s = DesignedSample::new(y).unwrap();
            let u = rank_scores(&s, TiePolicy::Midrank).unwrap();
            let mean = u.as_slice().iter().sum::<f64>() / u.n() as f64;
            prop_assert!((mean - 0.5).abs() < 1e-14);
        }
    }
}
