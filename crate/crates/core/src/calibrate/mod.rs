//! Null distributions and p-values.
//!
//! Rank statistics are distribution-free under the no-effect hypothesis: every
//! permutation of the ranks is equally likely, whatever the (continuous)
//! error law. Their null law at sample size `n` is therefore tabulated by
//! enumerating all `n!` permutations ([`exact_null`]) or by sampling random
//! permutations ([`monte_carlo_null`]). For large `n` the order-selection
//! statistics (rank and raw alike) share the limit law
//! [`AsymptoticLaw`].

mod asymptotic;
mod montecarlo;
mod table;

pub use asymptotic::{
    asymptotic_cdf, asymptotic_quantile, chi2_tail, resolve_series_weight, AsymptoticLaw, SeriesWeight,
    WeightCandidate, WeightResolution, TABLE_LEVELS, TABLE_QUANTILES,
};
pub use montecarlo::{
    bayes_limit_sample, draw_rng, monte_carlo_null, monte_carlo_null_with, run_draws, run_sharded, shard_rng,
    simulate_null_max, EmpiricalLaw, SHARD_SIZE,
};
pub use table::TABLE_SCHEMA;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{
    cosine_coefficients, rank_values, CoefficientSource, CosineTable, DesignedSample, ScoreDenominator, TiePolicy,
};
use crate::error::{invalid, Error, Result};
use crate::stats::{os_statistic, variance_estimate, Calibration, Method, RankStatistic, TestOutcome};

/// Largest `n` enumerated exactly unless the caller raises the cap.
pub const DEFAULT_ENUMERATION_CAP: usize = 10;

/// Hard ceiling for an acknowledged cap override (`12! ≈ 4.8e8`).
pub const MAX_ENUMERATION_CAP: usize = 12;

/// Statistic values closer than this (relative) are the same support point.
/// Mathematically equal statistics reached through different summation orders
/// differ in the last few bits; they are tied for p-value purposes.
pub const TIE_TOLERANCE: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NullKind {
    Exact,
    MonteCarlo,
    Asymptotic,
}

impl NullKind {
    pub fn id(self) -> &'static str {
        match self {
            NullKind::Exact => "exact",
            NullKind::MonteCarlo => "monte_carlo",
            NullKind::Asymptotic => "asymptotic",
        }
    }

    pub fn from_id(s: &str) -> Option<Self> {
        [NullKind::Exact, NullKind::MonteCarlo, NullKind::Asymptotic].into_iter().find(|k| k.id() == s)
    }

    pub fn calibration(self) -> Calibration {
        match self {
            NullKind::Exact => Calibration::Exact,
            NullKind::MonteCarlo => Calibration::MonteCarlo,
            NullKind::Asymptotic => Calibration::Asymptotic,
        }
    }
}

/// Tabulated null law of a rank statistic at one sample size.
#[derive(Debug, Clone, PartialEq)]
pub struct NullDistribution {
    kind: NullKind,
    n: usize,
    statistic: RankStatistic,
    scores: ScoreDenominator,
    /// Ascending support points with multiplicities.
    support: Vec<(f64, u64)>,
    /// `upper[k]` = total multiplicity of `support[k..]`.
    upper: Vec<u64>,
    seed: Option<u64>,
}

impl NullDistribution {
    pub(crate) fn from_values(
        kind: NullKind,
        n: usize,
        statistic: RankStatistic,
        scores: ScoreDenominator,
        mut values: Vec<f64>,
        seed: Option<u64>,
    ) -> Self {
        values.sort_by(f64::total_cmp);
        let mut support: Vec<(f64, u64)> = Vec::new();
        for v in values {
            match support.last_mut() {
                Some((anchor, count)) if v - *anchor <= TIE_TOLERANCE * anchor.abs() => *count += 1,
                _ => support.push((v, 1)),
            }
        }
        Self::from_support(kind, n, statistic, scores, support, seed)
    }

    pub(crate) fn from_support(
        kind: NullKind,
        n: usize,
        statistic: RankStatistic,
        scores: ScoreDenominator,
        support: Vec<(f64, u64)>,
        seed: Option<u64>,
    ) -> Self {
        let mut upper = vec![0u64; support.len() + 1];
        for k in (0..support.len()).rev() {
            upper[k] = upper[k + 1] + support[k].1;
        }
        Self { kind, n, statistic, scores, support, upper, seed }
    }

    pub fn kind(&self) -> NullKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn statistic(&self) -> RankStatistic {
        self.statistic
    }

    pub fn method(&self) -> Method {
        self.statistic.method()
    }

    pub fn scores(&self) -> ScoreDenominator {
        self.scores
    }

    pub fn support(&self) -> &[(f64, u64)] {
        &self.support
    }

    /// `n!` for exact tables, the replication count for Monte Carlo.
    pub fn total(&self) -> u64 {
        self.upper[0]
    }

    pub fn reps(&self) -> Option<u64> {
        (self.kind == NullKind::MonteCarlo).then(|| self.total())
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// `P(S ≥ t)` with ties (within [`TIE_TOLERANCE`]) counted as `≥`.
    pub fn tail_probability(&self, t: f64) -> f64 {
        let cut = t - TIE_TOLERANCE * t.abs();
        let k = self.support.partition_point(|&(v, _)| v < cut);
        self.upper[k] as f64 / self.total() as f64
    }

    pub fn p_value(&self, statistic: f64) -> f64 {
        self.tail_probability(statistic)
    }

    /// Smallest support point whose tail probability is at most `alpha`,
    /// if any: the test rejects at level `alpha` iff the statistic reaches it.
    pub fn critical_value(&self, alpha: f64) -> Option<f64> {
        let total = self.total() as f64;
        (0..self.support.len()).find(|&k| self.upper[k] as f64 / total <= alpha).map(|k| self.support[k].0)
    }
}

fn factorial(n: usize) -> u64 {
    (1..=n as u64).product()
}

/// Rearranges `v` into its next lexicographic permutation; false after the last.
fn next_permutation(v: &mut [usize]) -> bool {
    let Some(i) = v.windows(2).rposition(|w| w[0] < w[1]) else {
        return false;
    };
    let j = v.iter().rposition(|&x| x > v[i]).expect("pivot has a successor");
    v.swap(i, j);
    v[i + 1..].reverse();
    true
}

/// Exact null law from all `n!` rank permutations, `2 ≤ n ≤ 10`.
pub fn exact_null(n: usize, statistic: RankStatistic) -> Result<NullDistribution> {
    exact_null_with(n, statistic, ScoreDenominator::NPlusOne, DEFAULT_ENUMERATION_CAP)
}

/// Exact null law with an explicit score convention and enumeration cap.
/// Raising `cap` above the default is the caller's acknowledgment of the
/// `n!` cost; it may not exceed [`MAX_ENUMERATION_CAP`].
pub fn exact_null_with(
    n: usize,
    statistic: RankStatistic,
    scores: ScoreDenominator,
    cap: usize,
) -> Result<NullDistribution> {
    statistic.check_n(n)?;
    let cap = cap.min(MAX_ENUMERATION_CAP);
    if n > cap {
        return Err(Error::Capacity { n, cap });
    }
    let table = CosineTable::new(n)?;
    let d = scores.divisor(n);
    // one lexicographic stream per leading rank, concatenated in order
    let shards: Vec<Vec<f64>> = (1..=n)
        .into_par_iter()
        .map(|lead| -> Result<Vec<f64>> {
            let mut perm: Vec<usize> = std::iter::once(lead).chain((1..=n).filter(|&r| r != lead)).collect();
            let mut u = vec![0.0; n];
            let mut coeffs = vec![0.0; n - 1];
            let mut out = Vec::with_capacity(factorial(n - 1) as usize);
            loop {
                for (ui, &r) in u.iter_mut().zip(&perm) {
                    *ui = r as f64 / d;
                }
                table.coefficients_into(&u, &mut coeffs);
                out.push(statistic.evaluate(&coeffs)?.0);
                if !next_permutation(&mut perm[1..]) {
                    break;
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let values: Vec<f64> = shards.into_iter().flatten().collect();
    debug_assert_eq!(values.len() as u64, factorial(n));
    Ok(NullDistribution::from_values(NullKind::Exact, n, statistic, scores, values, None))
}

/// Any of the calibration backends a p-value can be read from.
#[derive(Debug, Clone, Copy)]
pub enum NullRef<'a> {
    Table(&'a NullDistribution),
    Asymptotic(&'a AsymptoticLaw),
    Empirical(&'a EmpiricalLaw),
}

/// p-value of an outcome against a null law of the same method.
pub fn p_value(outcome: &TestOutcome, null: NullRef<'_>) -> Result<f64> {
    let method = outcome.method;
    match null {
        NullRef::Table(table) => {
            let ok = match table.statistic() {
                RankStatistic::NeymanFixed { order } => {
                    method == Method::NeymanFixed && order == outcome.selected_order
                }
                other => other.method() == method,
            };
            if !ok {
                return invalid(format!("null table for {} cannot calibrate {method}", table.statistic().id()));
            }
            Ok(table.p_value(outcome.statistic))
        }
        NullRef::Asymptotic(law) => match method {
            Method::OsRank | Method::OsRaw => law.tail(outcome.statistic.max(f64::MIN_POSITIVE)),
            Method::NeymanFixed => chi2_tail(outcome.selected_order, outcome.statistic.max(0.0)),
            other => invalid(format!("no closed-form asymptotic law for {other}; use Monte Carlo calibration")),
        },
        NullRef::Empirical(law) => {
            if law.method != method {
                return invalid(format!("simulated {} law cannot calibrate {method}", law.method));
            }
            Ok(law.tail_probability(outcome.statistic))
        }
    }
}

/// Default draws and truncation for the simulated Bayes limit law.
pub const BAYES_LIMIT_REPS: usize = 100_000;
pub const BAYES_LIMIT_TRUNCATION: usize = 1000;

/// How to attach a p-value to an outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum CalibrationRequest {
    None,
    Exact {
        cap: usize,
    },
    MonteCarlo {
        reps: usize,
        seed: u64,
    },
    /// `seed` is needed only for the simulated Bayes limit.
    Asymptotic {
        seed: Option<u64>,
    },
}

impl CalibrationRequest {
    pub fn exact() -> Self {
        CalibrationRequest::Exact { cap: DEFAULT_ENUMERATION_CAP }
    }

    /// Exact for `n ≤ 10`, Monte Carlo (1e5 reps) below 50, asymptotic from
    /// 50 on where a closed-form limit exists.
    pub fn default_for(n: usize, method: Method, seed: Option<u64>) -> Self {
        let has_limit = matches!(method, Method::OsRank | Method::OsRaw | Method::NeymanFixed);
        if method == Method::OsRaw || (n >= 50 && has_limit) {
            CalibrationRequest::Asymptotic { seed }
        } else if n <= DEFAULT_ENUMERATION_CAP {
            CalibrationRequest::exact()
        } else {
            CalibrationRequest::MonteCarlo { reps: 100_000, seed: seed.unwrap_or(0) }
        }
    }

    pub fn needs_seed(&self, method: Method) -> bool {
        match self {
            CalibrationRequest::MonteCarlo { .. } => true,
            CalibrationRequest::Asymptotic { .. } => method == Method::BayesRank,
            _ => false,
        }
    }
}

/// A built null law, kept so repeated tests can share it.
#[derive(Debug, Clone)]
pub enum BuiltNull {
    None,
    Table(NullDistribution),
    Asymptotic(AsymptoticLaw),
    Empirical(EmpiricalLaw),
}

impl BuiltNull {
    pub fn as_ref(&self) -> Option<NullRef<'_>> {
        match self {
            BuiltNull::None => None,
            BuiltNull::Table(t) => Some(NullRef::Table(t)),
            BuiltNull::Asymptotic(a) => Some(NullRef::Asymptotic(a)),
            BuiltNull::Empirical(e) => Some(NullRef::Empirical(e)),
        }
    }

    pub fn calibration(&self) -> Calibration {
        match self {
            BuiltNull::None => Calibration::None,
            BuiltNull::Table(t) => t.kind().calibration(),
            BuiltNull::Asymptotic(_) | BuiltNull::Empirical(_) => Calibration::Asymptotic,
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            BuiltNull::Table(t) => t.seed(),
            BuiltNull::Empirical(e) => Some(e.seed),
            _ => None,
        }
    }

    /// Attaches this law's p-value to `outcome`.
    pub fn apply(&self, outcome: TestOutcome) -> Result<TestOutcome> {
        match self.as_ref() {
            None => Ok(outcome),
            Some(null) => {
                let p = p_value(&outcome, null)?;
                Ok(outcome.with_p_value(p, self.calibration(), self.seed()))
            }
        }
    }
}

/// Builds the null law a request describes for `statistic` at size `n`.
pub fn build_null(
    method: Method,
    order: Option<usize>,
    n: usize,
    scores: ScoreDenominator,
    request: CalibrationRequest,
) -> Result<BuiltNull> {
    if method == Method::OsRaw && !matches!(request, CalibrationRequest::Asymptotic { .. } | CalibrationRequest::None) {
        return invalid("the raw OS statistic is not distribution-free; only asymptotic calibration applies");
    }
    Ok(match request {
        CalibrationRequest::None => BuiltNull::None,
        CalibrationRequest::Exact { cap } => {
            let stat = RankStatistic::for_method(method, order)?;
            BuiltNull::Table(exact_null_with(n, stat, scores, cap)?)
        }
        CalibrationRequest::MonteCarlo { reps, seed } => {
            let stat = RankStatistic::for_method(method, order)?;
            BuiltNull::Table(monte_carlo_null_with(n, stat, scores, reps, seed)?)
        }
        CalibrationRequest::Asymptotic { seed } => match method {
            Method::OsRank | Method::OsRaw | Method::NeymanFixed => BuiltNull::Asymptotic(AsymptoticLaw::default()),
            Method::BayesRank => {
                let Some(seed) = seed else {
                    return invalid("the Bayes limit law is simulated; a seed is required");
                };
                BuiltNull::Empirical(bayes_limit_sample(BAYES_LIMIT_REPS, BAYES_LIMIT_TRUNCATION, seed)?)
            }
            other => return invalid(format!("no asymptotic law for {other}; use exact or Monte Carlo calibration")),
        },
    })
}

/// Builds the requested null law and attaches its p-value.
pub fn calibrate(
    outcome: TestOutcome,
    n: usize,
    scores: ScoreDenominator,
    request: CalibrationRequest,
) -> Result<TestOutcome> {
    let order = (outcome.method == Method::NeymanFixed).then_some(outcome.selected_order);
    build_null(outcome.method, order, n, scores, request)?.apply(outcome)
}

/// Everything needed to run one no-effect test end to end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    pub method: Method,
    /// Order for `neyman_fixed`.
    pub order: Option<usize>,
    pub ties: TiePolicy,
    pub scores: ScoreDenominator,
    /// `None` picks [`CalibrationRequest::default_for`].
    pub calibration: Option<CalibrationRequest>,
    pub seed: Option<u64>,
}

impl TestConfig {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            order: None,
            ties: TiePolicy::Reject,
            scores: ScoreDenominator::NPlusOne,
            calibration: None,
            seed: None,
        }
    }

    pub fn request_for(&self, n: usize) -> CalibrationRequest {
        self.calibration.unwrap_or_else(|| CalibrationRequest::default_for(n, self.method, self.seed))
    }

    /// Uncalibrated outcome for `values`; `raw_sigma_sq` supplies the error
    /// variance when the method is `os_raw`.
    pub fn statistic(&self, values: &[f64], raw_sigma_sq: impl FnOnce() -> Result<f64>) -> Result<TestOutcome> {
        if self.method == Method::OsRaw {
            let sigma_sq = raw_sigma_sq()?;
            if sigma_sq <= 0.0 {
                return Err(Error::DegenerateVariance);
            }
            return os_statistic(&cosine_coefficients(values, CoefficientSource::Raw)?, sigma_sq);
        }
        let u = rank_values(values, self.ties, self.scores)?;
        RankStatistic::for_method(self.method, self.order)?.outcome(&u)
    }
}

/// Tests `r ≡ C` on a designed sample and attaches the requested p-value.
pub fn run_test(sample: &DesignedSample, config: &TestConfig) -> Result<TestOutcome> {
    let outcome = config.statistic(sample.y(), || variance_estimate(sample))?;
    calibrate(outcome, sample.n(), config.scores, config.request_for(sample.n()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{rank_scores, UniformScores};
    use approx::assert_abs_diff_eq;

    #[test]
    fn next_permutation_is_lexicographic() {
        let mut v = vec![1, 2, 3];
        let mut seen = vec![v.clone()];
        while next_permutation(&mut v) {
            seen.push(v.clone());
        }
        assert_eq!(
            seen,
            vec![vec![1, 2, 3], vec![1, 3, 2], vec![2, 1, 3], vec![2, 3, 1], vec![3, 1, 2], vec![3, 2, 1]]
        );
    }

    #[test]
    fn exact_n5_published_tails() {
        let null = exact_null_with(5, RankStatistic::Os, ScoreDenominator::SampleSize, 10).unwrap();
        assert_eq!(null.total(), 120);
        assert_abs_diff_eq!(null.tail_probability(3.221), 0.1000, epsilon = 5e-5);
        assert_eq!(null.tail_probability(4.179), 2.0 / 120.0);
    }

    #[test]
    fn exact_n8_published_tail() {
        let null = exact_null_with(8, RankStatistic::Os, ScoreDenominator::SampleSize, 10).unwrap();
        assert_eq!(null.total(), 40_320);
        assert_abs_diff_eq!(null.tail_probability(6.745), 0.0022, epsilon = 5e-5);
    }

    #[test]
    fn exact_n2_is_point_mass() {
        let null = exact_null(2, RankStatistic::Os).unwrap();
        assert_eq!(null.support().len(), 1);
        assert_abs_diff_eq!(null.support()[0].0, 2.0 / 3.0, epsilon = 1e-14);
        assert_eq!(null.support()[0].1, 2);
    }

    #[test]
    fn capacity_and_range_errors() {
        assert!(matches!(exact_null(11, RankStatistic::Os), Err(Error::Capacity { n: 11, cap: 10 })));
        assert!(matches!(
            exact_null_with(13, RankStatistic::Os, ScoreDenominator::NPlusOne, 50),
            Err(Error::Capacity { n: 13, cap: 12 })
        ));
        assert!(exact_null(1, RankStatistic::Os).is_err());
        assert!(exact_null(4, RankStatistic::NeymanFixed { order: 4 }).is_err());
    }

    #[test]
    fn tail_probability_is_non_increasing() {
        let null = exact_null(6, RankStatistic::Bayes).unwrap();
        let mut prev = 1.0;
        for k in 0..500 {
            let t = k as f64 * 0.05;
            let p = null.tail_probability(t);
            assert!(p <= prev);
            prev = p;
        }
        assert_eq!(null.tail_probability(f64::NEG_INFINITY), 1.0);
        assert_eq!(null.tail_probability(0.0), 1.0);
    }

    #[test]
    fn p_value_below_support_is_one() {
        let null = exact_null(5, RankStatistic::Os).unwrap();
        let out =
            crate::stats::rank_os_statistic(&UniformScores::from_ranks(&[1, 2, 3, 4, 5], ScoreDenominator::NPlusOne))
                .unwrap();
        let low = TestOutcome { statistic: 0.0, ..out.clone() };
        assert_eq!(p_value(&low, NullRef::Table(&null)).unwrap(), 1.0);
        let p = p_value(&out, NullRef::Table(&null)).unwrap();
        assert!(p > 0.0 && p <= 1.0);
    }

    #[test]
    fn published_table2_p_values() {
        let law = AsymptoticLaw::default();
        let mk = |method, statistic| TestOutcome {
            method,
            statistic,
            selected_order: 1,
            p_value: None,
            calibration: Calibration::None,
            seed: None,
            tie_caveat: false,
            calibration_note: None,
        };
        let rank = p_value(&mk(Method::OsRank, 8.44), NullRef::Asymptotic(&law)).unwrap();
        assert_abs_diff_eq!(rank, 0.00379, epsilon = 1e-4);
        let raw = p_value(&mk(Method::OsRaw, 5.77), NullRef::Asymptotic(&law)).unwrap();
        assert_abs_diff_eq!(raw, 0.01795, epsilon = 1e-4);
        assert!(p_value(&mk(Method::NeymanRankMallows, 5.0), NullRef::Asymptotic(&law)).is_err());
        let neyman = TestOutcome { selected_order: 2, ..mk(Method::NeymanFixed, 2.0 * 2f64.ln() * 2.0) };
        // χ²₂ tail at x is exp(-x/2)
        assert_abs_diff_eq!(p_value(&neyman, NullRef::Asymptotic(&law)).unwrap(), 0.25, epsilon = 1e-14);
    }

    #[test]
    fn method_mismatch_is_rejected() {
        let null = exact_null(5, RankStatistic::Os).unwrap();
        let u = UniformScores::from_ranks(&[2, 1, 3, 5, 4], ScoreDenominator::NPlusOne);
        let b = crate::stats::bayes_statistic(&u).unwrap();
        assert!(p_value(&b, NullRef::Table(&null)).is_err());
        let fixed = exact_null(5, RankStatistic::NeymanFixed { order: 2 }).unwrap();
        let out = RankStatistic::NeymanFixed { order: 3 }.outcome(&u).unwrap();
        assert!(p_value(&out, NullRef::Table(&fixed)).is_err());
    }

    #[test]
    fn calibrate_attaches_p_value_and_provenance() {
        let s = DesignedSample::new(vec![0.3, 1.2, -0.4, 2.2, 0.9, 1.7, 2.8]).unwrap();
        let u = rank_scores(&s, TiePolicy::Reject).unwrap();
        let out = crate::stats::rank_os_statistic(&u).unwrap();
        let exact = calibrate(out.clone(), 7, ScoreDenominator::NPlusOne, CalibrationRequest::exact()).unwrap();
        assert_eq!(exact.calibration, Calibration::Exact);
        assert!(exact.p_value.is_some() && exact.seed.is_none());
        let mc = calibrate(
            out.clone(),
            7,
            ScoreDenominator::NPlusOne,
            CalibrationRequest::MonteCarlo { reps: 50_000, seed: 5 },
        )
        .unwrap();
        assert_eq!(mc.seed, Some(5));
        assert!((mc.p_value.unwrap() - exact.p_value.unwrap()).abs() < 0.01);
        let none = calibrate(out, 7, ScoreDenominator::NPlusOne, CalibrationRequest::None).unwrap();
        assert_eq!((none.p_value, none.calibration), (None, Calibration::None));
    }

    #[test]
    fn raw_statistic_only_calibrates_asymptotically() {
        assert!(build_null(Method::OsRaw, None, 8, ScoreDenominator::NPlusOne, CalibrationRequest::exact()).is_err());
        assert!(build_null(
            Method::BayesRank,
            None,
            60,
            ScoreDenominator::NPlusOne,
            CalibrationRequest::Asymptotic { seed: None }
        )
        .is_err());
    }

    #[test]
    fn default_calibration_pattern() {
        use CalibrationRequest as C;
        assert_eq!(C::default_for(8, Method::OsRank, None), C::exact());
        assert!(matches!(C::default_for(30, Method::OsRank, Some(2)), C::MonteCarlo { reps: 100_000, seed: 2 }));
        assert!(matches!(C::default_for(80, Method::OsRank, None), C::Asymptotic { .. }));
        assert!(matches!(C::default_for(80, Method::BayesRank, Some(1)), C::MonteCarlo { .. }));
    }
}
