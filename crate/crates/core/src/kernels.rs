//! Kernel densities on `[-1, 1]` and product kernels on `[-1, 1]²`.
//!
//! Built-in kernels carry closed-form antiderivatives and moment constants so
//! the estimators never run quadrature inside the sum over observations.
//! Custom kernels are accepted but must pass [`validate_conditions`] before an
//! estimator configuration will use them.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quad;

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelFamily {
    Uniform,
    Epanechnikov,
    Custom,
}

#[derive(Clone)]
enum Shape {
    Uniform,
    Epanechnikov,
    Custom {
        name: String,
        eval: RealFn,
        antiderivative: Option<RealFn>,
        derivative: Option<RealFn>,
    },
}

/// A univariate kernel density supported on `[-1, 1]`.
#[derive(Clone)]
pub struct UnivariateKernel {
    shape: Shape,
}

impl fmt::Debug for UnivariateKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "UnivariateKernel({})", self.name())
    }
}

impl UnivariateKernel {
    /// `k(u) = ½·1{|u| ≤ 1}`.
    pub fn uniform() -> Self {
        Self {
            shape: Shape::Uniform,
        }
    }

    /// `k(u) = ¾(1 − u²)·1{|u| ≤ 1}`.
    pub fn epanechnikov() -> Self {
        Self {
            shape: Shape::Epanechnikov,
        }
    }

    /// A user-supplied kernel. Without an antiderivative the cumulative value
    /// is obtained by quadrature of `eval`.
    pub fn custom<E>(name: impl Into<String>, eval: E) -> Self
    where
        E: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            shape: Shape::Custom {
                name: name.into(),
                eval: Arc::new(eval),
                antiderivative: None,
                derivative: None,
            },
        }
    }

    pub fn with_antiderivative<A>(mut self, antiderivative: A) -> Self
    where
        A: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if let Shape::Custom {
            antiderivative: ref mut slot,
            ..
        } = self.shape
        {
            *slot = Some(Arc::new(antiderivative));
        }
        self
    }

    pub fn with_derivative<D>(mut self, derivative: D) -> Self
    where
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if let Shape::Custom {
            derivative: ref mut slot,
            ..
        } = self.shape
        {
            *slot = Some(Arc::new(derivative));
        }
        self
    }

    /// Looks up a built-in kernel by id (`uniform`, `epanechnikov`).
    pub fn from_id(id: &str) -> Result<Self> {
        match id.trim().to_ascii_lowercase().as_str() {
            "uniform" => Ok(Self::uniform()),
            "epanechnikov" | "epa" => Ok(Self::epanechnikov()),
            other => Err(Error::InvalidArgument(format!("unknown kernel `{other}`"))),
        }
    }

    pub fn family(&self) -> KernelFamily {
        match self.shape {
            Shape::Uniform => KernelFamily::Uniform,
            Shape::Epanechnikov => KernelFamily::Epanechnikov,
            Shape::Custom { .. } => KernelFamily::Custom,
        }
    }

    pub fn name(&self) -> &str {
        match &self.shape {
            Shape::Uniform => "uniform",
            Shape::Epanechnikov => "epanechnikov",
            Shape::Custom { name, .. } => name,
        }
    }

    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        match &self.shape {
            Shape::Uniform => {
                if u.abs() <= 1.0 {
                    0.5
                } else {
                    0.0
                }
            }
            Shape::Epanechnikov => {
                if u.abs() <= 1.0 {
                    0.75 * (1.0 - u * u)
                } else {
                    0.0
                }
            }
            Shape::Custom { eval, .. } => eval(u),
        }
    }

    /// `∫_{-∞}^u k`, equal to 0 below −1 and 1 above 1.
    #[inline]
    pub fn antiderivative(&self, u: f64) -> f64 {
        match &self.shape {
            Shape::Uniform => 0.5 * (u.clamp(-1.0, 1.0) + 1.0),
            Shape::Epanechnikov => {
                let v = u.clamp(-1.0, 1.0);
                0.25 * (2.0 + 3.0 * v - v * v * v)
            }
            Shape::Custom {
                eval,
                antiderivative,
                ..
            } => match antiderivative {
                Some(a) => a(u),
                None => {
                    // declared support plus a margin, so shifted kernels integrate correctly
                    let lo = -1.5;
                    let hi = u.min(1.5);
                    if hi <= lo {
                        0.0
                    } else {
                        quad::integrate(|x| eval(x), lo, hi, 1e-13).unwrap_or(f64::NAN)
                    }
                }
            },
        }
    }

    pub fn has_derivative(&self) -> bool {
        match &self.shape {
            Shape::Uniform => false,
            Shape::Epanechnikov => true,
            Shape::Custom { derivative, .. } => derivative.is_some(),
        }
    }

    /// `k′(u)`; the uniform kernel has none.
    #[inline]
    pub fn derivative(&self, u: f64) -> Result<f64> {
        match &self.shape {
            Shape::Uniform => Err(Error::DerivativeUnavailable(self.name().to_string())),
            Shape::Epanechnikov => Ok(if u.abs() < 1.0 { -1.5 * u } else { 0.0 }),
            Shape::Custom {
                derivative: Some(d),
                ..
            } => Ok(d(u)),
            Shape::Custom { name, .. } => Err(Error::DerivativeUnavailable(name.clone())),
        }
    }

    /// `m₂(k) = ∫ u² k(u) du`.
    pub fn second_moment(&self) -> f64 {
        match self.shape {
            Shape::Uniform => 1.0 / 3.0,
            Shape::Epanechnikov => 0.2,
            Shape::Custom { .. } => self.moment_by_quadrature(|u, k| u * u * k),
        }
    }

    /// `∫ k(u)² du`.
    pub fn l2_norm_sq(&self) -> f64 {
        match self.shape {
            Shape::Uniform => 0.5,
            Shape::Epanechnikov => 0.6,
            Shape::Custom { .. } => self.moment_by_quadrature(|_, k| k * k),
        }
    }

    fn moment_by_quadrature(&self, g: impl Fn(f64, f64) -> f64) -> f64 {
        quad::integrate_pieces(
            |u| g(u, self.eval(u)),
            -1.5,
            1.5,
            &[-1.0, 0.0, 1.0],
            1e-13,
        )
        .unwrap_or(f64::NAN)
    }

    /// `k_α(u) = α⁻¹ k(u/α)`.
    pub fn eval_rescaled(&self, alpha: f64, u: f64) -> Result<f64> {
        check_bandwidth(alpha)?;
        Ok(self.eval(u / alpha) / alpha)
    }

    /// Pointwise comparison on a fine grid; used to check that a product
    /// kernel's first factor is the univariate kernel (K.1).
    pub fn same_as(&self, other: &UnivariateKernel) -> bool {
        match (&self.shape, &other.shape) {
            (Shape::Uniform, Shape::Uniform) | (Shape::Epanechnikov, Shape::Epanechnikov) => true,
            (Shape::Custom { eval: a, .. }, Shape::Custom { eval: b, .. }) if Arc::ptr_eq(a, b) => {
                true
            }
            _ => (0..=400).all(|i| {
                let u = -1.2 + 2.4 * i as f64 / 400.0;
                (self.eval(u) - other.eval(u)).abs() < 1e-12
            }),
        }
    }
}

pub(crate) fn check_bandwidth(h: f64) -> Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidBandwidth(h))
    }
}

/// Product kernel `k̃(x, y) = k₁(x) k₂(y)` on `[-1, 1]²`.
#[derive(Debug, Clone)]
pub struct BivariateKernel {
    pub first: UnivariateKernel,
    pub second: UnivariateKernel,
}

impl BivariateKernel {
    pub fn product(first: UnivariateKernel, second: UnivariateKernel) -> Self {
        Self { first, second }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.first.eval(x) * self.second.eval(y)
    }

    /// `∫∫ w₁² k̃`, the first-coordinate second moment.
    pub fn second_moment_first(&self) -> f64 {
        self.first.second_moment()
    }

    /// `∫∫ w₂² k̃`, the second-coordinate second moment.
    pub fn second_moment_second(&self) -> f64 {
        self.second.second_moment()
    }
}

/// Smoothing parameters: `alpha` in the time direction, `beta` in the mark
/// direction (only the bivariate estimator uses `beta`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bandwidths {
    pub alpha: f64,
    pub beta: Option<f64>,
}

impl Bandwidths {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        check_bandwidth(alpha)?;
        check_bandwidth(beta)?;
        Ok(Self {
            alpha,
            beta: Some(beta),
        })
    }

    pub fn time_only(alpha: f64) -> Result<Self> {
        check_bandwidth(alpha)?;
        Ok(Self { alpha, beta: None })
    }

    pub fn beta(&self) -> Result<f64> {
        self.beta
            .ok_or_else(|| Error::InvalidArgument("mark bandwidth beta is required".into()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Condition {
    /// Marginalising `k̃` over its second argument gives `k`.
    K1,
    /// Symmetric kernels supported on `[-1, 1]`.
    K2,
    /// Zero first moments, equal second moments.
    K3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionCheck {
    pub condition: Condition,
    pub passed: bool,
    pub residual: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<ConditionCheck>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, condition: Condition) -> &ConditionCheck {
        self.checks
            .iter()
            .find(|c| c.condition == condition)
            .expect("every condition is checked")
    }

    pub fn failures(&self) -> impl Iterator<Item = &ConditionCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

const VALIDATION_TOL: f64 = 1e-10;

fn integral(k: &UnivariateKernel, g: impl Fn(f64, f64) -> f64) -> f64 {
    quad::integrate_pieces(
        |u| g(u, k.eval(u)),
        -1.5,
        1.5,
        &[-1.0, 0.0, 1.0],
        1e-13,
    )
    .unwrap_or(f64::NAN)
}

fn probe_grid() -> impl Iterator<Item = f64> {
    (0..=200).map(|i| i as f64 / 200.0)
}

/// Checks K.1–K.3 for a product kernel, reporting the measured residual for
/// each condition. Never fails; failures are carried in the report.
pub fn validate_conditions(kt: &BivariateKernel) -> ValidationReport {
    let first = &kt.first;
    let second = &kt.second;

    // K.1: ∫ k̃(x, w) dw = k₁(x)·∫k₂ must reproduce k₁.
    let mass2 = integral(second, |_, k| k);
    let k1_sup = probe_grid()
        .map(|u| first.eval(2.0 * u - 1.0).abs())
        .fold(0.0, f64::max);
    let k1_residual = (mass2 - 1.0).abs() * k1_sup;
    let k1 = ConditionCheck {
        condition: Condition::K1,
        passed: k1_residual <= VALIDATION_TOL,
        residual: k1_residual,
        detail: format!("mass of second factor = {mass2}"),
    };

    // K.2: unit mass, symmetry, vanishing outside [-1, 1].
    let mut k2_residual: f64 = 0.0;
    let mut notes = Vec::new();
    for (label, k) in [("first", first), ("second", second)] {
        let mass = integral(k, |_, v| v);
        let asym = probe_grid()
            .map(|u| (k.eval(u) - k.eval(-u)).abs())
            .fold(0.0, f64::max);
        let outside = (1..=100)
            .map(|i| 1.0 + 0.5 * i as f64 / 100.0)
            .map(|u| k.eval(u).abs().max(k.eval(-u).abs()))
            .fold(0.0, f64::max);
        let negative = probe_grid()
            .map(|u| (-k.eval(2.0 * u - 1.0)).max(0.0))
            .fold(0.0, f64::max);
        let r = (mass - 1.0).abs().max(asym).max(outside).max(negative);
        if r > VALIDATION_TOL {
            notes.push(format!(
                "{label} factor: mass={mass}, asymmetry={asym:e}, outside={outside:e}"
            ));
        }
        k2_residual = k2_residual.max(r);
    }
    let k2 = ConditionCheck {
        condition: Condition::K2,
        passed: k2_residual <= VALIDATION_TOL,
        residual: k2_residual,
        detail: notes.join("; "),
    };

    // K.3: for a product kernel, ∫∫ w₁ k̃ = m₁(k₁)·∫k₂ and so on.
    let mass1 = integral(first, |_, k| k);
    let m1_first = integral(first, |u, k| u * k) * mass2;
    let m1_second = integral(second, |u, k| u * k) * mass1;
    let m2_first = integral(first, |u, k| u * u * k) * mass2;
    let m2_second = integral(second, |u, k| u * u * k) * mass1;
    let k3_residual = m1_first
        .abs()
        .max(m1_second.abs())
        .max((m2_first - m2_second).abs());
    let k3 = ConditionCheck {
        condition: Condition::K3,
        passed: k3_residual <= VALIDATION_TOL,
        residual: k3_residual,
        detail: format!("m2 = ({m2_first}, {m2_second})"),
    };

    ValidationReport {
        checks: vec![k1, k2, k3],
    }
}
