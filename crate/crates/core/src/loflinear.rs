//! Lack-of-fit tests for a linear model `r(x) = Σ θ_j r_j(x)`.
//!
//! The model is fitted by least squares and the no-effect statistics are
//! applied to the ranks of the residuals. Residual ranks are only
//! asymptotically distribution-free, so outcomes from a non-constant model
//! carry a calibration note.

use std::f64::consts::PI;
use std::io::Read;

use nalgebra::{DMatrix, DVector};

use crate::basis::{design_grid, DesignedSample};
use crate::calibrate::{calibrate, TestConfig};
use crate::error::{invalid, Error, Result};
use crate::stats::{Method, TestOutcome};

/// Relative rank tolerance: a design is singular when some `|R_kk|` of its
/// QR factor falls below this times the largest column norm.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Caveat attached to residual-rank outcomes.
pub const RESIDUAL_CAVEAT: &str =
    "residual ranks are not exactly distribution-free; p-values from the no-effect null law \
     are approximate, may depend on the error law, and tend to be conservative when the model absorbs low frequencies";

/// Basis functions `r_1..r_p` evaluated on the design grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModelBasis {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl LinearModelBasis {
    /// Validates shape, finiteness and full column rank `p ≤ n - 1`.
    pub fn from_columns(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        let p = columns.len();
        if p == 0 || names.len() != p {
            return invalid("a linear model needs at least one named column");
        }
        let n = columns[0].len();
        if columns.iter().any(|c| c.len() != n) {
            return invalid("basis columns must all have length n");
        }
        if p + 1 > n {
            return invalid(format!("a model with p = {p} columns needs n >= p + 1, got n = {n}"));
        }
        if columns.iter().flatten().any(|v| !v.is_finite()) {
            return invalid("basis values must be finite");
        }
        let basis = Self { names, columns };
        let rank = basis.numerical_rank();
        if rank < p {
            return Err(Error::SingularDesign { rank, p });
        }
        Ok(basis)
    }

    pub fn constant(n: usize) -> Result<Self> {
        Self::polynomial(n, 0)
    }

    pub fn linear(n: usize) -> Result<Self> {
        Self::polynomial(n, 1)
    }

    /// `1, x, ..., x^degree`.
    pub fn polynomial(n: usize, degree: usize) -> Result<Self> {
        let x = design_grid(n)?;
        let names = (0..=degree).map(|k| if k == 0 { "1".into() } else { format!("x^{k}") }).collect();
        let columns = (0..=degree as i32).map(|k| x.iter().map(|&xi| xi.powi(k)).collect()).collect();
        Self::from_columns(names, columns)
    }

    /// `1, cos(πx), ..., cos(πkx)`.
    pub fn cosine(n: usize, k: usize) -> Result<Self> {
        let x = design_grid(n)?;
        let names = (0..=k).map(|j| if j == 0 { "1".into() } else { format!("cos({j}πx)") }).collect();
        let columns = (0..=k).map(|j| x.iter().map(|&xi| (PI * j as f64 * xi).cos()).collect()).collect();
        Self::from_columns(names, columns)
    }

    /// Named built-ins: `constant`, `linear`, `polynomial:K`, `cosine:K`.
    pub fn builtin(spec: &str, n: usize) -> Result<Self> {
        let (name, arg) = match spec.split_once(':') {
            Some((name, arg)) => {
                let k = arg
                    .parse::<usize>()
                    .map_err(|_| Error::InvalidArgument(format!("bad basis degree in {spec:?}")))?;
                (name, Some(k))
            }
            None => (spec, None),
        };
        match (name, arg) {
            ("constant", None) => Self::constant(n),
            ("linear", None) => Self::linear(n),
            ("polynomial", Some(k)) => Self::polynomial(n, k),
            ("cosine", Some(k)) => Self::cosine(n, k),
            _ => invalid(format!("unknown basis {spec:?}; expected constant, linear, polynomial:K or cosine:K")),
        }
    }

    /// Numeric CSV with `n` rows and `p` columns. A first row that does not
    /// parse as numbers is taken as column names.
    pub fn from_csv<R: Read>(input: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(input);
        let mut names: Option<Vec<String>> = None;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::InvalidArgument(format!("basis CSV: {e}")))?;
            let parsed: std::result::Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
            match parsed {
                Ok(row) => rows.push(row),
                Err(_) if i == 0 => names = Some(record.iter().map(String::from).collect()),
                Err(_) => return invalid(format!("basis CSV row {} is not numeric", i + 1)),
            }
        }
        let p = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != p) {
            return invalid("basis CSV rows have differing lengths");
        }
        let names = names.unwrap_or_else(|| (1..=p).map(|j| format!("r{j}")).collect());
        let columns = (0..p).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
        Self::from_columns(names, columns)
    }

    pub fn n(&self) -> usize {
        self.columns[0].len()
    }

    pub fn p(&self) -> usize {
        self.columns.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    /// True when the columns span only the constants, in which case residual
    /// ranks are the ranks of `y` and the permutation null holds exactly.
    pub fn spans_constants_only(&self) -> bool {
        self.p() == 1 && {
            let c = &self.columns[0];
            c.iter().all(|&v| v == c[0])
        }
    }

    fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n(), self.p(), |i, j| self.columns[j][i])
    }

    fn numerical_rank(&self) -> usize {
        let x = self.matrix();
        let scale = x.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            return 0;
        }
        let r = x.col_piv_qr().r();
        r.diagonal().iter().filter(|d| d.abs() > RANK_TOLERANCE * scale).count()
    }
}

/// Least-squares residuals `e_i = Y_i − Ŷ_i` and coefficients `θ̂`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSample {
    residuals: Vec<f64>,
    theta_hat: Vec<f64>,
    /// `max |Y_i|`, the reference size for a perfect fit.
    y_scale: f64,
    exact_null: bool,
}

impl ResidualSample {
    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    pub fn theta_hat(&self) -> &[f64] {
        &self.theta_hat
    }

    pub fn n(&self) -> usize {
        self.residuals.len()
    }

    pub fn p(&self) -> usize {
        self.theta_hat.len()
    }

    /// Residual mean square `Σ e²/(n − p)`.
    pub fn sigma_sq(&self) -> f64 {
        self.residuals.iter().map(|e| e * e).sum::<f64>() / (self.n() - self.p()) as f64
    }

    pub fn is_perfect_fit(&self) -> bool {
        let tol = 1e-12 * self.y_scale.max(f64::MIN_POSITIVE) * (self.n() as f64).sqrt();
        self.residuals.iter().all(|e| e.abs() <= tol)
    }
}

/// Least-squares fit of `sample` on `basis` by Householder QR.
pub fn least_squares_fit(sample: &DesignedSample, basis: &LinearModelBasis) -> Result<ResidualSample> {
    let n = sample.n();
    if basis.n() != n {
        return invalid(format!("basis has {} rows but the sample has n = {n}", basis.n()));
    }
    let x = basis.matrix();
    let y = DVector::from_column_slice(sample.y());
    let qr = x.clone().qr();
    let qty = qr.q().transpose() * &y;
    let theta = qr.r().solve_upper_triangular(&qty).ok_or(Error::SingularDesign { rank: 0, p: basis.p() })?;
    let fitted = &x * &theta;
    let residuals = y.iter().zip(fitted.iter()).map(|(yi, fi)| yi - fi).collect();
    Ok(ResidualSample {
        residuals,
        theta_hat: theta.iter().copied().collect(),
        y_scale: sample.y().iter().fold(0.0, |m, v| m.max(v.abs())),
        exact_null: basis.spans_constants_only(),
    })
}

/// Applies the configured statistic to the residuals. `os_raw` uses the
/// residual mean square for `σ²`.
pub fn residual_rank_test(resid: &ResidualSample, config: &TestConfig) -> Result<TestOutcome> {
    if resid.is_perfect_fit() {
        return Err(Error::DegenerateResiduals);
    }
    let n = resid.n();
    let outcome = config.statistic(resid.residuals(), || Ok(resid.sigma_sq()))?;
    let outcome = calibrate(outcome, n, config.scores, config.request_for(n))?;
    Ok(if resid.exact_null && config.method != Method::OsRaw { outcome } else { outcome.with_note(RESIDUAL_CAVEAT) })
}

/// Fits `basis` and tests the residuals in one step.
pub fn lack_of_fit_test(sample: &DesignedSample, basis: &LinearModelBasis, config: &TestConfig) -> Result<TestOutcome> {
    residual_rank_test(&least_squares_fit(sample, basis)?, config)
}
