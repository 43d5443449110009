//! Plug-in inverse estimators of `F₀(t, z)` built from kernel estimates of
//! the observable (sub-)densities.
//!
//! Both estimators share the denominator `ĝ(t₀) = n⁻¹ Σ k_α(t₀ − Tᵢ)`:
//!
//! * [`f_hat1`] smooths in time only, counting marks `Zᵢ ≤ z₀` exactly;
//! * [`f_hat2`] smooths marks with the second factor of a product kernel and
//!   integrates the resulting sub-density over `[0, z₀]` in closed form.
//!
//! Every sum runs over the time window `[t₀ − α, t₀ + α]` only, which the
//! [`Sample`] ordering makes a pair of binary searches.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::kernels::{validate_conditions, BivariateKernel, Bandwidths, KernelFamily, UnivariateKernel};
use crate::scenarios::Sample;

pub const DEFAULT_G_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct EstimatorConfig {
    pub kernel1: UnivariateKernel,
    pub kernel2: BivariateKernel,
    pub bandwidths: Bandwidths,
    pub g_floor: f64,
    /// Lower end of the mark integral in `F̂⁽²⁾`. The default `−∞` keeps the
    /// smoothed mass that spills below the smallest mark; `0` truncates it.
    pub mark_lower: f64,
}

impl EstimatorConfig {
    /// Custom kernels are checked against K.1–K.3 here and rejected if any
    /// condition fails.
    pub fn new(
        kernel1: UnivariateKernel,
        kernel2: BivariateKernel,
        bandwidths: Bandwidths,
    ) -> Result<Self> {
        let any_custom = [&kernel1, &kernel2.first, &kernel2.second]
            .iter()
            .any(|k| k.family() == KernelFamily::Custom);
        if any_custom {
            let report = validate_conditions(&kernel2);
            if let Some(bad) = report.failures().next() {
                return Err(Error::InvalidKernel(format!(
                    "{:?} (residual {:e}) {}",
                    bad.condition, bad.residual, bad.detail
                )));
            }
            if kernel1.family() == KernelFamily::Custom {
                let single = validate_conditions(&BivariateKernel::product(
                    kernel1.clone(),
                    kernel1.clone(),
                ));
                if !single.get(crate::kernels::Condition::K2).passed {
                    return Err(Error::InvalidKernel(format!("K2 for {}", kernel1.name())));
                }
            }
        }
        Ok(Self {
            kernel1,
            kernel2,
            bandwidths,
            g_floor: DEFAULT_G_FLOOR,
            mark_lower: f64::NEG_INFINITY,
        })
    }

    /// Epanechnikov in time and the Epanechnikov product kernel for marks.
    pub fn epanechnikov(bandwidths: Bandwidths) -> Self {
        let k = UnivariateKernel::epanechnikov();
        Self {
            kernel1: k.clone(),
            kernel2: BivariateKernel::product(k.clone(), k),
            bandwidths,
            g_floor: DEFAULT_G_FLOOR,
            mark_lower: f64::NEG_INFINITY,
        }
    }

    pub fn uniform(bandwidths: Bandwidths) -> Self {
        let k = UnivariateKernel::uniform();
        Self {
            kernel1: k.clone(),
            kernel2: BivariateKernel::product(k.clone(), k),
            bandwidths,
            g_floor: DEFAULT_G_FLOOR,
            mark_lower: f64::NEG_INFINITY,
        }
    }

    pub fn with_g_floor(mut self, g_floor: f64) -> Self {
        self.g_floor = g_floor;
        self
    }

    pub fn with_mark_lower(mut self, mark_lower: f64) -> Self {
        self.mark_lower = mark_lower;
        self
    }

    pub fn with_bandwidths(&self, bandwidths: Bandwidths) -> Self {
        Self {
            bandwidths,
            ..self.clone()
        }
    }

    fn check_k1(&self) -> Result<()> {
        if self.kernel1.same_as(&self.kernel2.first) {
            Ok(())
        } else {
            Err(Error::KernelMismatch)
        }
    }
}

/// Which plug-in estimator to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EstimatorKind {
    F1,
    F2,
}

impl EstimatorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorKind::F1 => "F1",
            EstimatorKind::F2 => "F2",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "F1" => Ok(EstimatorKind::F1),
            "F2" => Ok(EstimatorKind::F2),
            other => Err(Error::InvalidArgument(format!("unknown estimator `{other}`"))),
        }
    }

    pub fn evaluate(self, sample: &Sample, config: &EstimatorConfig, t0: f64, z0: f64) -> Result<f64> {
        match self {
            EstimatorKind::F1 => f_hat1(sample, config, t0, z0),
            EstimatorKind::F2 => f_hat2(sample, config, t0, z0),
        }
    }
}

fn ensure_nonempty(sample: &Sample) -> Result<()> {
    if sample.is_empty() {
        Err(Error::EmptySample)
    } else {
        Ok(())
    }
}

fn time_window(sample: &Sample, t0: f64, alpha: f64) -> &[crate::scenarios::Observation] {
    sample.window(t0 - alpha, t0 + alpha)
}

fn check_floor(g: f64, floor: f64) -> Result<()> {
    if g >= floor {
        Ok(())
    } else {
        Err(Error::UnstableDenominator { g_hat: g, floor })
    }
}

/// `ĝ(t₀) = n⁻¹ Σ k_α(t₀ − Tᵢ)`.
pub fn g_hat(sample: &Sample, config: &EstimatorConfig, t0: f64) -> f64 {
    let alpha = config.bandwidths.alpha;
    let k = &config.kernel1;
    let sum: f64 = time_window(sample, t0, alpha)
        .iter()
        .map(|o| k.eval((t0 - o.t) / alpha))
        .sum();
    sum / (alpha * sample.len() as f64)
}

/// `ĝ′(t₀) = n⁻¹ Σ α⁻² k′((t₀ − Tᵢ)/α)`.
pub fn g_hat_prime(sample: &Sample, config: &EstimatorConfig, t0: f64) -> Result<f64> {
    let alpha = config.bandwidths.alpha;
    let k = &config.kernel1;
    if !k.has_derivative() {
        return Err(Error::DerivativeUnavailable(k.name().to_string()));
    }
    let mut sum = 0.0;
    for o in time_window(sample, t0, alpha) {
        sum += k.derivative((t0 - o.t) / alpha)?;
    }
    Ok(sum / (alpha * alpha * sample.len() as f64))
}

/// `ĥ₀(t₀) = n⁻¹ Σ (1 − Δᵢ) k_α(t₀ − Tᵢ)`.
pub fn h0_hat(sample: &Sample, config: &EstimatorConfig, t0: f64) -> f64 {
    let alpha = config.bandwidths.alpha;
    let k = &config.kernel1;
    let sum: f64 = time_window(sample, t0, alpha)
        .iter()
        .filter(|o| !o.delta)
        .map(|o| k.eval((t0 - o.t) / alpha))
        .sum();
    sum / (alpha * sample.len() as f64)
}

/// Time-smoothed plug-in estimator:
/// `Σ 1{Zᵢ ≤ z₀} Δᵢ k_α(t₀ − Tᵢ) / Σ k_α(t₀ − Tᵢ)`.
pub fn f_hat1(sample: &Sample, config: &EstimatorConfig, t0: f64, z0: f64) -> Result<f64> {
    ensure_nonempty(sample)?;
    let alpha = config.bandwidths.alpha;
    let k = &config.kernel1;
    let mut num = 0.0;
    let mut den = 0.0;
    for o in time_window(sample, t0, alpha) {
        let w = k.eval((t0 - o.t) / alpha);
        den += w;
        num += if o.delta && o.z <= z0 { w } else { 0.0 };
    }
    let scale = alpha * sample.len() as f64;
    check_floor(den / scale, config.g_floor)?;
    Ok(num / den)
}

/// The uniform-kernel estimator written as a ratio of counts: uncensored
/// records in the window with mark at most `z₀`, over all records in the
/// window.
pub fn f_hat1_counting(sample: &Sample, t0: f64, z0: f64, alpha: f64) -> Result<f64> {
    ensure_nonempty(sample)?;
    crate::kernels::check_bandwidth(alpha)?;
    let window = time_window(sample, t0, alpha);
    let total = window.iter().filter(|o| (t0 - o.t).abs() <= alpha).count();
    if total == 0 {
        return Err(Error::UnstableDenominator {
            g_hat: 0.0,
            floor: 0.0,
        });
    }
    let hits = window
        .iter()
        .filter(|o| (t0 - o.t).abs() <= alpha && o.delta && o.z <= z0)
        .count();
    Ok(hits as f64 / total as f64)
}

/// `n⁻¹ Σ Δᵢ k_α(t₀ − Tᵢ) ∫_lower^upper k_β(z − Zᵢ) dz`, the time-smoothed
/// uncensored sub-density integrated over a mark range. Infinite limits are
/// allowed.
pub fn h1_mass(
    sample: &Sample,
    config: &EstimatorConfig,
    t0: f64,
    lower: f64,
    upper: f64,
) -> Result<f64> {
    let alpha = config.bandwidths.alpha;
    let beta = config.bandwidths.beta()?;
    let k1 = &config.kernel2.first;
    let k2 = &config.kernel2.second;
    let mut sum = 0.0;
    for o in time_window(sample, t0, alpha).iter().filter(|o| o.delta) {
        let w = k1.eval((t0 - o.t) / alpha);
        if w != 0.0 {
            sum += w * (k2.antiderivative((upper - o.z) / beta)
                - k2.antiderivative((lower - o.z) / beta));
        }
    }
    Ok(sum / (alpha * sample.len() as f64))
}

/// Bivariate-smoothed plug-in estimator: `∫_{lower}^{z₀} ĥ₁(t₀, z) dz / ĝ(t₀)`
/// with `lower = config.mark_lower`.
pub fn f_hat2(sample: &Sample, config: &EstimatorConfig, t0: f64, z0: f64) -> Result<f64> {
    ensure_nonempty(sample)?;
    config.check_k1()?;
    let g = g_hat(sample, config, t0);
    check_floor(g, config.g_floor)?;
    Ok(h1_mass(sample, config, t0, config.mark_lower, z0)? / g)
}

/// Lebesgue density of the bivariate estimator,
/// `(ĝ ∂₁ĥ₁ − ĝ′ ĥ₁) / ĝ²`, using analytic kernel derivatives.
pub fn f2_density(sample: &Sample, config: &EstimatorConfig, t0: f64, z0: f64) -> Result<f64> {
    ensure_nonempty(sample)?;
    config.check_k1()?;
    let alpha = config.bandwidths.alpha;
    let beta = config.bandwidths.beta()?;
    let k1 = &config.kernel2.first;
    let k2 = &config.kernel2.second;
    if !k1.has_derivative() {
        return Err(Error::DerivativeUnavailable(k1.name().to_string()));
    }
    let n = sample.len() as f64;
    let (mut g, mut g_prime, mut h1, mut d1_h1) = (0.0, 0.0, 0.0, 0.0);
    for o in time_window(sample, t0, alpha) {
        let u = (t0 - o.t) / alpha;
        let kv = k1.eval(u);
        let dv = k1.derivative(u)?;
        g += kv;
        g_prime += dv;
        if o.delta {
            let m = k2.eval((z0 - o.z) / beta);
            h1 += kv * m;
            d1_h1 += dv * m;
        }
    }
    let g = g / (alpha * n);
    check_floor(g, config.g_floor)?;
    let g_prime = g_prime / (alpha * alpha * n);
    let h1 = h1 / (alpha * beta * n);
    let d1_h1 = d1_h1 / (alpha * alpha * beta * n);
    Ok((g * d1_h1 - g_prime * h1) / (g * g))
}

fn csv_cell(v: Result<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Evaluates both estimators and the density on a grid, emitting
/// `t,z,F1,F2,f2` CSV. Cells that cannot be evaluated are left empty.
pub fn grid_csv(sample: &Sample, config: &EstimatorConfig, ts: &[f64], zs: &[f64]) -> String {
    let mut out = String::from("t,z,F1,F2,f2\n");
    for &t in ts {
        for &z in zs {
            let _ = writeln!(
                out,
                "{t},{z},{},{},{}",
                csv_cell(f_hat1(sample, config, t, z)),
                csv_cell(f_hat2(sample, config, t, z)),
                csv_cell(f2_density(sample, config, t, z)),
            );
        }
    }
    out
}
