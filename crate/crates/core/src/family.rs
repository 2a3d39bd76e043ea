//! Exponential families in natural parametrization.
//!
//! A family is described by its log-partition function `psi`, which fixes
//! densities `p(x) = exp(<x, theta> - psi(theta)) * h(x)` over natural
//! parameters `theta`. The gradient of `psi` maps natural parameters onto
//! expectation parameters (means), and its inverse maps them back. Mixture
//! components are stored in expectation coordinates, since that is what the
//! weighted-mean update produces.
//!
//! Only the identity sufficient statistic is supported.

use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};

/// Expectation parameters are kept at least this far from the boundary of
/// their domain before being mapped to natural coordinates.
pub const BOUNDARY_EPS: f64 = 1e-10;

/// Natural coordinates `theta`.
#[derive(Debug, Clone, PartialEq)]
pub struct NaturalParameter(pub Vec<f64>);

/// Expectation (mean) coordinates `xi = grad psi(theta)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectationParameter(pub Vec<f64>);

impl NaturalParameter {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl ExpectationParameter {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// A value together with a flag telling whether it had to be clamped into
/// the interior of its domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Clamped<T> {
    pub value: T,
    pub clamped: bool,
}

/// A convex function with a gradient, defined on an open domain.
///
/// Implemented by the families' log-partition functions and by the
/// transport-plan regularizers, which share [`bregman_div`].
pub trait ConvexFunction {
    fn label(&self) -> String;
    fn contains(&self, point: &[f64]) -> bool;
    fn value(&self, point: &[f64]) -> f64;
    fn gradient(&self, point: &[f64]) -> Vec<f64>;
}

/// Bregman divergence `f(a) - f(b) - <a - b, grad f(b)>`.
pub fn bregman_div<F: ConvexFunction + ?Sized>(f: &F, a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    for p in [a, b] {
        if !f.contains(p) {
            return Err(Error::Domain {
                family: f.label(),
                predicate: "function",
                value: p.to_vec(),
            });
        }
    }
    if a == b {
        return Ok(0.0);
    }
    let grad = f.gradient(b);
    let inner: f64 = a.iter().zip(b).zip(&grad).map(|((x, y), g)| (x - y) * g).sum();
    Ok(f.value(a) - f.value(b) - inner)
}

/// The built-in exponential families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    /// Unit-variance Gaussian in `dim` dimensions; `psi(theta) = |theta|^2 / 2`.
    GaussianSpherical { dim: usize },
    /// `psi(theta) = exp(theta)` on counts.
    Poisson,
    /// `psi(theta) = log(1 + exp(theta))` on `{0, 1}`.
    Bernoulli,
    /// `psi(theta) = -log(-theta)` for `theta < 0`, on positive reals.
    Exponential,
}

impl Family {
    pub const NAMES: [&'static str; 4] = ["gaussian_spherical", "poisson", "bernoulli", "exponential"];

    pub fn gaussian(dim: usize) -> Self {
        Family::GaussianSpherical { dim }
    }

    /// Looks a family up by identifier. Only the Gaussian family accepts a
    /// dimension other than one.
    pub fn from_name(name: &str, dim: usize) -> Result<Self> {
        let family = match name {
            "gaussian_spherical" => {
                if dim == 0 {
                    return Err(Error::InvalidConfig("dimension must be positive".into()));
                }
                Family::GaussianSpherical { dim }
            }
            "poisson" => Family::Poisson,
            "bernoulli" => Family::Bernoulli,
            "exponential" => Family::Exponential,
            other => return Err(Error::UnknownFamily(other.to_string())),
        };
        if family.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: family.dim(),
                found: dim,
            });
        }
        Ok(family)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Family::GaussianSpherical { .. } => "gaussian_spherical",
            Family::Poisson => "poisson",
            Family::Bernoulli => "bernoulli",
            Family::Exponential => "exponential",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Family::GaussianSpherical { dim } => *dim,
            _ => 1,
        }
    }

    /// Whether observations take only integer values.
    pub fn is_discrete(&self) -> bool {
        matches!(self, Family::Poisson | Family::Bernoulli)
    }

    pub fn natural_domain(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim()
            && theta.iter().all(|t| t.is_finite())
            && match self {
                Family::Exponential => theta[0] < 0.0,
                _ => true,
            }
    }

    /// Open interior of the expectation domain (the image of `grad psi`).
    pub fn expectation_domain(&self, xi: &[f64]) -> bool {
        xi.len() == self.dim()
            && xi.iter().all(|v| v.is_finite())
            && match self {
                Family::GaussianSpherical { .. } => true,
                Family::Poisson | Family::Exponential => xi[0] > 0.0,
                Family::Bernoulli => xi[0] > 0.0 && xi[0] < 1.0,
            }
    }

    /// Closure of the expectation domain; values here can be clamped inward.
    fn expectation_closure(&self, xi: &[f64]) -> bool {
        xi.len() == self.dim()
            && xi.iter().all(|v| v.is_finite())
            && match self {
                Family::GaussianSpherical { .. } => true,
                Family::Poisson | Family::Exponential => xi[0] >= 0.0,
                Family::Bernoulli => (0.0..=1.0).contains(&xi[0]),
            }
    }

    pub fn data_domain(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter().all(|v| v.is_finite())
            && match self {
                Family::GaussianSpherical { .. } => true,
                Family::Poisson => x[0] >= 0.0 && x[0].fract() == 0.0,
                Family::Bernoulli => x[0] == 0.0 || x[0] == 1.0,
                Family::Exponential => x[0] > 0.0,
            }
    }

    pub(crate) fn check_data(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        if !self.data_domain(x) {
            return Err(self.domain_error("data", x));
        }
        Ok(())
    }

    fn check_natural(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: theta.len(),
            });
        }
        if !self.natural_domain(theta) {
            return Err(self.domain_error("natural", theta));
        }
        Ok(())
    }

    fn domain_error(&self, predicate: &'static str, value: &[f64]) -> Error {
        Error::Domain {
            family: self.name().to_string(),
            predicate,
            value: value.to_vec(),
        }
    }

    /// Log-partition `psi(theta)`. The argument must lie in the natural domain.
    pub fn psi(&self, theta: &[f64]) -> f64 {
        match self {
            Family::GaussianSpherical { .. } => 0.5 * theta.iter().map(|t| t * t).sum::<f64>(),
            Family::Poisson => theta[0].exp(),
            Family::Bernoulli => softplus(theta[0]),
            Family::Exponential => -(-theta[0]).ln(),
        }
    }

    pub fn grad_psi(&self, theta: &[f64]) -> Vec<f64> {
        match self {
            Family::GaussianSpherical { .. } => theta.to_vec(),
            Family::Poisson => vec![theta[0].exp()],
            Family::Bernoulli => vec![sigmoid(theta[0])],
            Family::Exponential => vec![-1.0 / theta[0]],
        }
    }

    /// Inverse of [`Family::grad_psi`]; the argument must be interior.
    pub fn grad_psi_inv(&self, xi: &[f64]) -> Vec<f64> {
        match self {
            Family::GaussianSpherical { .. } => xi.to_vec(),
            Family::Poisson => vec![xi[0].ln()],
            Family::Bernoulli => vec![(xi[0] / (1.0 - xi[0])).ln()],
            Family::Exponential => vec![-1.0 / xi[0]],
        }
    }

    /// `log h(x)`, the carrier term.
    pub fn log_carrier(&self, x: &[f64]) -> f64 {
        match self {
            Family::GaussianSpherical { dim } => {
                -0.5 * x.iter().map(|v| v * v).sum::<f64>() - 0.5 * *dim as f64 * (2.0 * PI).ln()
            }
            Family::Poisson => -libm::lgamma(x[0] + 1.0),
            Family::Bernoulli | Family::Exponential => 0.0,
        }
    }

    /// Clamps an expectation parameter into the interior of its domain.
    pub fn clamp_expectation(&self, xi: &[f64]) -> Result<Clamped<ExpectationParameter>> {
        if xi.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: xi.len(),
            });
        }
        if !self.expectation_closure(xi) {
            return Err(self.domain_error("expectation", xi));
        }
        let mut value = xi.to_vec();
        match self {
            Family::GaussianSpherical { .. } => {}
            Family::Poisson | Family::Exponential => value[0] = value[0].max(BOUNDARY_EPS),
            Family::Bernoulli => value[0] = value[0].clamp(BOUNDARY_EPS, 1.0 - BOUNDARY_EPS),
        }
        let clamped = value != xi;
        Ok(Clamped {
            value: ExpectationParameter(value),
            clamped,
        })
    }

    pub fn to_expectation(&self, theta: &NaturalParameter) -> Result<ExpectationParameter> {
        self.check_natural(&theta.0)?;
        Ok(ExpectationParameter(self.grad_psi(&theta.0)))
    }

    /// Maps expectation coordinates to natural ones, clamping boundary values
    /// (e.g. a Bernoulli mean of exactly 0 or 1) inward first.
    pub fn to_natural(&self, xi: &ExpectationParameter) -> Result<Clamped<NaturalParameter>> {
        let Clamped { value, clamped } = self.clamp_expectation(&xi.0)?;
        Ok(Clamped {
            value: NaturalParameter(self.grad_psi_inv(&value.0)),
            clamped,
        })
    }

    /// `<x, theta> - psi(theta) + log h(x)`.
    pub fn log_density(&self, theta: &NaturalParameter, x: &[f64]) -> Result<f64> {
        self.check_natural(&theta.0)?;
        self.check_data(x)?;
        let psi = self.psi(&theta.0);
        Ok(dot(x, &theta.0) - psi + self.log_carrier(x))
    }

    /// Divergence between an observation and an expectation parameter,
    /// measured with the convex conjugate of `psi`. Boundary observations use
    /// the limiting values of the conjugate (`0 log 0 = 0`).
    pub fn dual_bregman_data_div(&self, x: &[f64], xi: &[f64]) -> Result<f64> {
        self.check_data(x)?;
        if xi.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: xi.len(),
            });
        }
        if !self.expectation_domain(xi) {
            return Err(self.domain_error("expectation", xi));
        }
        Ok(self.dual_div_unchecked(x, xi))
    }

    pub(crate) fn dual_div_unchecked(&self, x: &[f64], xi: &[f64]) -> f64 {
        match self {
            Family::GaussianSpherical { .. } => {
                0.5 * x.iter().zip(xi).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
            }
            Family::Poisson => {
                let (x, m) = (x[0], xi[0]);
                if x == 0.0 {
                    m
                } else {
                    x * (x / m).ln() - x + m
                }
            }
            Family::Bernoulli => {
                let (x, m) = (x[0], xi[0]);
                if x == 1.0 {
                    -m.ln()
                } else {
                    -(-m).ln_1p()
                }
            }
            Family::Exponential => {
                let r = x[0] / xi[0];
                r - r.ln() - 1.0
            }
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::GaussianSpherical { dim } => write!(f, "gaussian_spherical({dim})"),
            other => f.write_str(other.name()),
        }
    }
}

impl ConvexFunction for Family {
    fn label(&self) -> String {
        self.name().to_string()
    }

    fn contains(&self, point: &[f64]) -> bool {
        self.natural_domain(point)
    }

    fn value(&self, point: &[f64]) -> f64 {
        self.psi(point)
    }

    fn gradient(&self, point: &[f64]) -> Vec<f64> {
        self.grad_psi(point)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}
