//! Error laws with the density functionals the efficiency theory needs.

use std::f64::consts::{PI, SQRT_2};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, Error, Result};
use crate::quadrature::{integrate, integrate_real_line};

/// Absolute tolerance for density functionals computed by quadrature.
pub const QUADRATURE_TOLERANCE: f64 = 1e-10;

/// A continuous error distribution, location zero unless stated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "law")]
pub enum ErrorLaw {
    Normal {
        sigma: f64,
    },
    Uniform {
        lo: f64,
        hi: f64,
    },
    Logistic {
        scale: f64,
    },
    Laplace {
        scale: f64,
    },
    /// Student t with `k` degrees of freedom, multiplied by `scale`.
    StudentT {
        k: u32,
        scale: f64,
    },
}

impl ErrorLaw {
    pub fn standard_normal() -> Self {
        ErrorLaw::Normal { sigma: 1.0 }
    }

    pub fn student_t(k: u32) -> Self {
        ErrorLaw::StudentT { k, scale: 1.0 }
    }

    /// `normal`, `normal:SIGMA`, `uniform`, `uniform:LO:HI`, `logistic`,
    /// `laplace`, `t:K` (optionally `:SCALE` after each).
    pub fn parse(spec: &str) -> Result<Self> {
        let parts: Vec<&str> = spec.split(':').collect();
        let num = |k: usize, default: f64| -> Result<f64> {
            parts.get(k).map_or(Ok(default), |s| {
                s.parse().map_err(|_| Error::InvalidArgument(format!("bad number {s:?} in error law {spec:?}")))
            })
        };
        let law = match parts[0] {
            "normal" => ErrorLaw::Normal { sigma: num(1, 1.0)? },
            "uniform" => ErrorLaw::Uniform { lo: num(1, 0.0)?, hi: num(2, 1.0)? },
            "logistic" => ErrorLaw::Logistic { scale: num(1, 1.0)? },
            "laplace" => ErrorLaw::Laplace { scale: num(1, 1.0)? },
            "t" => {
                let k = parts
                    .get(1)
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::InvalidArgument(format!("t law needs degrees of freedom, got {spec:?}")))?;
                ErrorLaw::StudentT { k, scale: num(2, 1.0)? }
            }
            other => return invalid(format!("unknown error law {other:?}")),
        };
        law.validate()?;
        Ok(law)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            ErrorLaw::Normal { sigma } => sigma > 0.0 && sigma.is_finite(),
            ErrorLaw::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && hi > lo,
            ErrorLaw::Logistic { scale } | ErrorLaw::Laplace { scale } => scale > 0.0 && scale.is_finite(),
            ErrorLaw::StudentT { k, scale } => k >= 1 && scale > 0.0 && scale.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            invalid(format!("invalid error law parameters {self:?}"))
        }
    }

    pub fn name(&self) -> String {
        match *self {
            ErrorLaw::Normal { sigma } => format!("normal(sigma={sigma})"),
            ErrorLaw::Uniform { lo, hi } => format!("uniform({lo}, {hi})"),
            ErrorLaw::Logistic { scale } => format!("logistic(scale={scale})"),
            ErrorLaw::Laplace { scale } => format!("laplace(scale={scale})"),
            ErrorLaw::StudentT { k, scale } => format!("t{k}(scale={scale})"),
        }
    }

    fn t_log_norm(k: u32) -> f64 {
        let k = k as f64;
        ln_gamma(0.5 * (k + 1.0)) - ln_gamma(0.5 * k) - 0.5 * (k * PI).ln()
    }

    pub fn density(&self, x: f64) -> f64 {
        match *self {
            ErrorLaw::Normal { sigma } => {
                let z = x / sigma;
                (-0.5 * z * z).exp() / (sigma * (2.0 * PI).sqrt())
            }
            ErrorLaw::Uniform { lo, hi } => {
                if (lo..=hi).contains(&x) {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
            ErrorLaw::Logistic { scale } => {
                let e = (-(x / scale).abs()).exp();
                e / (scale * (1.0 + e) * (1.0 + e))
            }
            ErrorLaw::Laplace { scale } => (-(x / scale).abs()).exp() / (2.0 * scale),
            ErrorLaw::StudentT { k, scale } => {
                let z = x / scale;
                let kf = k as f64;
                (Self::t_log_norm(k) - 0.5 * (kf + 1.0) * (z * z / kf).ln_1p()).exp() / scale
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            ErrorLaw::Normal { sigma } => 0.5 * erfc(-x / (sigma * SQRT_2)),
            ErrorLaw::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            ErrorLaw::Logistic { scale } => 1.0 / (1.0 + (-x / scale).exp()),
            ErrorLaw::Laplace { scale } => {
                if x < 0.0 {
                    0.5 * (x / scale).exp()
                } else {
                    1.0 - 0.5 * (-x / scale).exp()
                }
            }
            ErrorLaw::StudentT { k, scale } => {
                StudentsT::new(0.0, 1.0, k as f64).expect("validated degrees of freedom").cdf(x / scale)
            }
        }
    }

    /// `Var ε`; laws without a second moment are unsupported.
    pub fn variance(&self) -> Result<f64> {
        Ok(match *self {
            ErrorLaw::Normal { sigma } => sigma * sigma,
            ErrorLaw::Uniform { lo, hi } => (hi - lo).powi(2) / 12.0,
            ErrorLaw::Logistic { scale } => PI * PI * scale * scale / 3.0,
            ErrorLaw::Laplace { scale } => 2.0 * scale * scale,
            ErrorLaw::StudentT { k, scale } => {
                if k <= 2 {
                    return Err(Error::UnsupportedLaw(format!("t{k} has no finite variance")));
                }
                scale * scale * k as f64 / (k as f64 - 2.0)
            }
        })
    }

    /// Whether `E ε⁴ < ∞`, the side condition of the raw-test limit.
    pub fn has_fourth_moment(&self) -> bool {
        !matches!(*self, ErrorLaw::StudentT { k, .. } if k <= 4)
    }

    /// `∫ f²` in closed form.
    pub fn f_sq_integral(&self) -> f64 {
        match *self {
            ErrorLaw::Normal { sigma } => 1.0 / (2.0 * sigma * PI.sqrt()),
            ErrorLaw::Uniform { lo, hi } => 1.0 / (hi - lo),
            ErrorLaw::Logistic { scale } => 1.0 / (6.0 * scale),
            ErrorLaw::Laplace { scale } => 1.0 / (4.0 * scale),
            ErrorLaw::StudentT { k, scale } => {
                // c² ∫ (1 + x²/k)^-(k+1) dx with the Beta-function integral
                let kf = k as f64;
                let log = 2.0 * Self::t_log_norm(k) + 0.5 * (kf * PI).ln() + ln_gamma(kf + 0.5) - ln_gamma(kf + 1.0);
                log.exp() / scale
            }
        }
    }

    /// `∫ f²` by adaptive quadrature.
    pub fn f_sq_integral_quadrature(&self) -> f64 {
        let f2 = |x: f64| self.density(x).powi(2);
        match *self {
            ErrorLaw::Uniform { lo, hi } => integrate(f2, lo, hi, QUADRATURE_TOLERANCE),
            _ => integrate_real_line(f2, QUADRATURE_TOLERANCE),
        }
    }

    /// `h(0)`, the density of `ε₁ − ε₂` at zero. For i.i.d. errors this is
    /// `∫ f(e) f(e) de = ∫ f²`.
    pub fn h0(&self) -> f64 {
        self.f_sq_integral()
    }

    /// `H(d) = P(ε₂ − ε₁ ≤ d)`.
    pub fn difference_cdf(&self, d: f64) -> f64 {
        match *self {
            ErrorLaw::Normal { sigma } => 0.5 * erfc(-d / (2.0 * sigma)),
            ErrorLaw::Uniform { lo, hi } => {
                let t = (d / (hi - lo)).clamp(-1.0, 1.0);
                if t < 0.0 {
                    0.5 * (1.0 + t).powi(2)
                } else {
                    1.0 - 0.5 * (1.0 - t).powi(2)
                }
            }
            ErrorLaw::Laplace { scale } => {
                let upper = 0.5 * (-d.abs() / scale).exp() * (1.0 + d.abs() / (2.0 * scale));
                if d < 0.0 {
                    upper
                } else {
                    1.0 - upper
                }
            }
            _ => {
                // P(ε₂ ≤ ε₁ + d), symmetric in d about one half
                let upper = integrate_real_line(|e| self.density(e) * (1.0 - self.cdf(e + d.abs())), 1e-12);
                if d < 0.0 {
                    upper
                } else {
                    1.0 - upper
                }
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ErrorLaw::Normal { sigma } => sigma * rng.sample::<f64, _>(StandardNormal),
            ErrorLaw::Uniform { lo, hi } => rng.random_range(lo..hi),
            ErrorLaw::Logistic { scale } => {
                let u: f64 = rng.random();
                scale * (u / (1.0 - u)).ln()
            }
            ErrorLaw::Laplace { scale } => {
                let u: f64 = rng.random::<f64>() - 0.5;
                -scale * u.signum() * (-2.0 * u.abs()).ln_1p()
            }
            ErrorLaw::StudentT { k, scale } => {
                scale * StudentT::new(k as f64).expect("validated degrees of freedom").sample(rng)
            }
        }
    }
}
