//! Limiting bias and variance constants, Monte Carlo normality and
//! equivalence diagnostics, and the smooth mean functional.
//!
//! Statistics are on the `n^{2/5}` scale: `n^{2/5}(F̂(t₀, z₀) − F₀(t₀, z₀))`
//! is asymptotically `N(μ, σ²)` for `α = c·n^{−1/5}`.

use std::fmt::Write as _;

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::estimators::{f_hat1, f_hat2, EstimatorConfig, EstimatorKind};
use crate::kernels::{Bandwidths, BivariateKernel, UnivariateKernel};
use crate::quad;
use crate::scenarios::{sample, Sample, Scenario};
use crate::simulation::{check_failure_rate, mean_and_se, replicate, sample_variance, Replications};

/// Below this the bias bracket counts as zero.
pub const DEGENERATE_TOL: f64 = 1e-12;

/// `±C·n^{−1/6}` envelope constant for the equivalence diagnostic.
pub const EQUIVALENCE_ENVELOPE: f64 = 1.5;

/// `α_n = c₁·n^{−1/5}`, `β_n = c₂·n^{−β}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandwidthSchedule {
    pub c1: f64,
    pub c2: f64,
    pub beta_exponent: f64,
}

impl BandwidthSchedule {
    pub fn new(c1: f64, c2: f64, beta_exponent: f64) -> Result<Self> {
        if !(c1 > 0.0 && c1.is_finite()) {
            return Err(Error::InvalidBandwidth(c1));
        }
        if !(c2 > 0.0 && c2.is_finite()) {
            return Err(Error::InvalidBandwidth(c2));
        }
        if !(beta_exponent > 0.0 && beta_exponent < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "beta exponent {beta_exponent} outside (0, 1)"
            )));
        }
        Ok(Self {
            c1,
            c2,
            beta_exponent,
        })
    }

    pub fn alpha(&self, n: usize) -> f64 {
        self.c1 * (n as f64).powf(-0.2)
    }

    pub fn beta(&self, n: usize) -> f64 {
        self.c2 * (n as f64).powf(-self.beta_exponent)
    }

    pub fn bandwidths(&self, n: usize) -> Result<Bandwidths> {
        Bandwidths::new(self.alpha(n), self.beta(n))
    }
}

/// Bandwidths for a Monte Carlo run: fixed values, or a schedule in `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandwidthSpec {
    Fixed(Bandwidths),
    Schedule(BandwidthSchedule),
}

impl BandwidthSpec {
    pub fn at(&self, n: usize) -> Result<Bandwidths> {
        match self {
            BandwidthSpec::Fixed(bw) => Ok(*bw),
            BandwidthSpec::Schedule(s) => s.bandwidths(n),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticParams {
    pub mu1: f64,
    pub sigma2: f64,
    pub mu2: f64,
    pub point: (f64, f64),
    /// The first-order bias bracket vanishes; the bias is of smaller order.
    pub degenerate: bool,
}

/// `∂₁²F₀ + 2g′∂₁F₀/g` at the point.
pub fn bias_bracket(scenario: &dyn Scenario, point: (f64, f64)) -> Result<f64> {
    let (t0, z0) = point;
    let g = scenario.g(t0);
    if !(g > 0.0) {
        return Err(Error::ZeroCensoringDensity(t0));
    }
    Ok(scenario.d11(t0, z0) + 2.0 * scenario.g_prime(t0) * scenario.d1(t0, z0) / g)
}

/// `μ₁ = ½c²m₂(k){∂₁²F₀ + 2g′∂₁F₀/g}` and `σ² = c⁻¹F₀(1 − F₀)∫k²/g`.
/// `mu2` is set equal to `mu1`.
pub fn mu1_sigma2(
    scenario: &dyn Scenario,
    point: (f64, f64),
    c: f64,
    kernel: &UnivariateKernel,
) -> Result<AsymptoticParams> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidBandwidth(c));
    }
    let (t0, z0) = point;
    let bracket = bias_bracket(scenario, point)?;
    let f = scenario.cdf(t0, z0);
    let mu1 = 0.5 * c * c * kernel.second_moment() * bracket;
    let sigma2 = f * (1.0 - f) * kernel.l2_norm_sq() / (c * scenario.g(t0));
    Ok(AsymptoticParams {
        mu1,
        sigma2,
        mu2: mu1,
        point,
        degenerate: bracket.abs() < DEGENERATE_TOL,
    })
}

/// Bias of `F̂⁽²⁾` under a schedule: adds `½c₂²m₂(k̃)∂₂²F₀` when `β = 1/5`.
pub fn mu2(
    scenario: &dyn Scenario,
    point: (f64, f64),
    schedule: &BandwidthSchedule,
    kernel2: &BivariateKernel,
) -> Result<f64> {
    let b = schedule.beta_exponent;
    if b < 0.2 - 1e-12 {
        return Err(Error::Divergence(b));
    }
    let base = mu1_sigma2(scenario, point, schedule.c1, &kernel2.first)?.mu1;
    if (b - 0.2).abs() <= 1e-12 {
        let c2 = schedule.c2;
        Ok(base + 0.5 * c2 * c2 * kernel2.second_moment_second() * scenario.d22(point.0, point.1))
    } else {
        Ok(base)
    }
}

/// Full limiting constants for `kind` under `spec` at sample size `n`.
///
/// Fixed bandwidths are read as `α = c·n^{−1/5}`; the mark bandwidth of a
/// fixed pair is treated as negligible.
pub fn reference_params(
    scenario: &dyn Scenario,
    kind: EstimatorKind,
    point: (f64, f64),
    n: usize,
    spec: &BandwidthSpec,
    config: &EstimatorConfig,
) -> Result<AsymptoticParams> {
    match spec {
        BandwidthSpec::Fixed(bw) => {
            let c = bw.alpha * (n as f64).powf(0.2);
            mu1_sigma2(scenario, point, c, &config.kernel1)
        }
        BandwidthSpec::Schedule(s) => {
            let mut p = mu1_sigma2(scenario, point, s.c1, &config.kernel1)?;
            if kind == EstimatorKind::F2 {
                p.mu2 = mu2(scenario, point, s, &config.kernel2)?;
            }
            Ok(p)
        }
    }
}

/// Kolmogorov–Smirnov distance between the empirical law of `values` and
/// `N(mu, sigma2)`.
pub fn ks_normal(values: &[f64], mu: f64, sigma2: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("no values".into()));
    }
    let normal = Normal::new(mu, sigma2.sqrt())
        .map_err(|e| Error::InvalidArgument(format!("reference normal: {e}")))?;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = normal.cdf(x);
        d = d.max((i as f64 + 1.0) / m - f).max(f - i as f64 / m);
    }
    Ok(d.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloSummary {
    /// `n^{2/5}(F̂ − F₀)` per successful replication, in replication order.
    pub values: Vec<f64>,
    pub m: usize,
    pub failures: usize,
    pub ks_distance: f64,
    pub mean: f64,
    pub variance: f64,
    /// Mean squared error of `F̂` itself (not rescaled).
    pub mean_sq_error: f64,
    pub std_err_of_mse: f64,
    pub reference_mu: f64,
    pub reference_sigma2: f64,
}

impl MonteCarloSummary {
    fn from_values(values: Vec<f64>, failures: usize, n: usize, mu: f64, sigma2: f64) -> Result<Self> {
        let ks_distance = ks_normal(&values, mu, sigma2)?;
        let (mean, _) = mean_and_se(&values);
        let variance = if values.len() > 1 {
            sample_variance(&values, mean)
        } else {
            f64::NAN
        };
        let scale = (n as f64).powf(-0.8);
        let sq: Vec<f64> = values.iter().map(|v| v * v * scale).collect();
        let (mean_sq_error, std_err_of_mse) = mean_and_se(&sq);
        Ok(Self {
            m: values.len(),
            values,
            failures,
            ks_distance,
            mean,
            variance,
            mean_sq_error,
            std_err_of_mse,
            reference_mu: mu,
            reference_sigma2: sigma2,
        })
    }

    /// `(z, y)` pairs: standard normal quantiles against sorted statistics.
    /// The reference line is `y = μ + zσ`.
    pub fn qq(&self) -> Vec<(f64, f64)> {
        let std = Normal::new(0.0, 1.0).expect("standard normal");
        let mut sorted = self.values.clone();
        sorted.sort_by(f64::total_cmp);
        let m = sorted.len() as f64;
        sorted
            .into_iter()
            .enumerate()
            .map(|(i, y)| (std.inverse_cdf((i as f64 + 0.5) / m), y))
            .collect()
    }

    pub fn values_csv(&self) -> String {
        let mut out = String::from("replicate,statistic\n");
        for (i, v) in self.values.iter().enumerate() {
            let _ = writeln!(out, "{i},{v}");
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        format!(
            "m,ks,mu,sigma2\n{},{},{},{}\n",
            self.m, self.ks_distance, self.reference_mu, self.reference_sigma2
        )
    }

    pub fn qq_csv(&self) -> String {
        let mut out = String::from("normal_quantile,statistic,reference\n");
        let sd = self.reference_sigma2.sqrt();
        for (z, y) in self.qq() {
            let _ = writeln!(out, "{z},{y},{}", self.reference_mu + z * sd);
        }
        out
    }
}

/// `m` replications of `n^{2/5}(F̂ − F₀(point))`, compared against the
/// limiting normal law. The reference mean is `μ₂` for `F̂⁽²⁾` under a
/// schedule and `μ₁` otherwise.
#[allow(clippy::too_many_arguments)]
pub fn mc_normality(
    scenario: &dyn Scenario,
    kind: EstimatorKind,
    point: (f64, f64),
    n: usize,
    m: usize,
    spec: &BandwidthSpec,
    config: &EstimatorConfig,
    seed: u64,
) -> Result<MonteCarloSummary> {
    if m < 2 {
        return Err(Error::InvalidArgument("need at least two replications".into()));
    }
    let params = reference_params(scenario, kind, point, n, spec, config)?;
    let cfg = config.with_bandwidths(spec.at(n)?);
    let truth = scenario.cdf(point.0, point.1);
    let rate = (n as f64).powf(0.4);
    let reps = replicate(m, seed, |s| {
        let data = sample(scenario, n, s)?;
        Ok(rate * (kind.evaluate(&data, &cfg, point.0, point.1)? - truth))
    });
    reps.check_failure_rate()?;
    let failures = reps.failures();
    let mu = match kind {
        EstimatorKind::F1 => params.mu1,
        EstimatorKind::F2 => params.mu2,
    };
    MonteCarloSummary::from_values(reps.values, failures, n, mu, params.sigma2)
}

/// `n^{2/5}(F̂⁽²⁾ − F̂⁽¹⁾)` on one sample, with `α`, `β` from the schedule.
pub fn difference_statistic(
    data: &Sample,
    point: (f64, f64),
    schedule: &BandwidthSchedule,
    config: &EstimatorConfig,
) -> Result<f64> {
    let n = data.len();
    let cfg = config.with_bandwidths(schedule.bandwidths(n)?);
    let f1 = f_hat1(data, &cfg, point.0, point.1)?;
    let f2 = f_hat2(data, &cfg, point.0, point.1)?;
    Ok((n as f64).powf(0.4) * (f2 - f1))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalencePoint {
    pub n: usize,
    pub diff: f64,
    pub envelope: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceCurve {
    pub points: Vec<EquivalencePoint>,
    pub fraction_inside: f64,
}

impl EquivalenceCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,diff,envelope\n");
        for p in &self.points {
            let _ = writeln!(out, "{},{},{}", p.n, p.diff, p.envelope);
        }
        out
    }
}

/// One replication of the difference statistic per `n` in `n_grid` (the
/// `i`-th size uses seed `seed + i`), and the fraction inside `±C·n^{−1/6}`.
pub fn equivalence_curve(
    scenario: &dyn Scenario,
    point: (f64, f64),
    n_grid: &[usize],
    schedule: &BandwidthSchedule,
    config: &EstimatorConfig,
    envelope_c: f64,
    seed: u64,
) -> Result<EquivalenceCurve> {
    if n_grid.is_empty() {
        return Err(Error::InvalidArgument("empty n grid".into()));
    }
    let diffs = crate::simulation::replicate_with(n_grid.len(), seed, |s| {
        let n = n_grid[(s - seed) as usize];
        let data = sample(scenario, n, s)?;
        difference_statistic(&data, point, schedule, config)
    });
    let mut points = Vec::with_capacity(n_grid.len());
    for (&n, d) in n_grid.iter().zip(diffs) {
        points.push(EquivalencePoint {
            n,
            diff: d?,
            envelope: envelope_c * (n as f64).powf(-1.0 / 6.0),
        });
    }
    let inside = points.iter().filter(|p| p.diff.abs() <= p.envelope).count();
    Ok(EquivalenceCurve {
        fraction_inside: inside as f64 / points.len() as f64,
        points,
    })
}

/// `m` replications of the difference statistic at a single `n`.
pub fn mc_difference(
    scenario: &dyn Scenario,
    point: (f64, f64),
    n: usize,
    m: usize,
    schedule: &BandwidthSchedule,
    config: &EstimatorConfig,
    seed: u64,
) -> Result<Replications> {
    let reps = replicate(m, seed, |s| {
        let data = sample(scenario, n, s)?;
        difference_statistic(&data, point, schedule, config)
    });
    reps.check_failure_rate()?;
    Ok(reps)
}

/// Number of midpoints used to integrate `1 − F̂` over the time support.
pub const MEAN_FUNCTIONAL_POINTS: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanEstimate {
    pub value: f64,
    /// Grid points whose window was empty and borrowed the nearest
    /// evaluable value.
    pub fallbacks: usize,
}

/// `∫₀¹ (1 − F̂⁽¹⁾(x, ∞)) dx` with the Uniform kernel.
pub fn mean_functional(sample: &Sample, alpha: f64) -> Result<MeanEstimate> {
    mean_functional_on(sample, alpha, 0.0, 1.0, MEAN_FUNCTIONAL_POINTS)
}

/// Midpoint rule for `∫ (1 − F̂⁽¹⁾(x, ∞)) dx` over `[lo, hi]`.
pub fn mean_functional_on(
    sample: &Sample,
    alpha: f64,
    lo: f64,
    hi: f64,
    points: usize,
) -> Result<MeanEstimate> {
    crate::kernels::check_bandwidth(alpha)?;
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    if !(hi > lo) || points == 0 {
        return Err(Error::InvalidArgument("empty integration range".into()));
    }
    let obs = sample.observations();
    let mut prefix = Vec::with_capacity(obs.len() + 1);
    prefix.push(0usize);
    for o in obs {
        prefix.push(prefix.last().unwrap() + o.delta as usize);
    }
    let h = (hi - lo) / points as f64;
    let values: Vec<Option<f64>> = (0..points)
        .map(|j| {
            let x = lo + (j as f64 + 0.5) * h;
            let a = obs.partition_point(|o| o.t < x - alpha);
            let b = obs.partition_point(|o| o.t <= x + alpha);
            (b > a).then(|| (prefix[b] - prefix[a]) as f64 / (b - a) as f64)
        })
        .collect();
    let known: Vec<usize> = (0..points).filter(|&j| values[j].is_some()).collect();
    if known.is_empty() {
        return Err(Error::UnstableDenominator {
            g_hat: 0.0,
            floor: 0.0,
        });
    }
    let mut fallbacks = 0;
    let mut sum = 0.0;
    for (j, v) in values.iter().enumerate() {
        let f = match v {
            Some(f) => *f,
            None => {
                fallbacks += 1;
                let k = known.partition_point(|&i| i < j);
                let nearest = match (k.checked_sub(1).map(|p| known[p]), known.get(k)) {
                    (Some(l), Some(&r)) => {
                        if j - l <= r - j {
                            l
                        } else {
                            r
                        }
                    }
                    (Some(l), None) => l,
                    (None, Some(&r)) => r,
                    (None, None) => unreachable!(),
                };
                values[nearest].unwrap()
            }
        };
        sum += 1.0 - f;
    }
    Ok(MeanEstimate {
        value: sum * h,
        fallbacks,
    })
}

/// `∫ (1 − F₀(t, ∞)) dt` over the time support, i.e. `E X` when the
/// support starts at zero.
pub fn true_mean(scenario: &dyn Scenario) -> Result<f64> {
    let s = scenario.support();
    let tail = quad::integrate(|t| 1.0 - scenario.marginal_x(t), s.t_min, s.t_max, 1e-12)?;
    Ok(s.t_min + tail)
}

/// Information lower bound `∫ F₀(t, ∞)(1 − F₀(t, ∞))/g(t) dt` for the mean.
pub fn efficient_variance(scenario: &dyn Scenario) -> Result<f64> {
    let s = scenario.support();
    quad::integrate(
        |t| {
            let f = scenario.marginal_x(t);
            let num = f * (1.0 - f);
            if num == 0.0 {
                0.0
            } else {
                num / scenario.g(t)
            }
        },
        s.t_min,
        s.t_max,
        1e-12,
    )
    .map_err(|e| Error::Quadrature(format!("efficient variance: {e}")))
}

/// Bandwidth for the mean functional as a power of `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaRule {
    NegThird,
    NegFifth,
    /// `α = n^{−p}`.
    Exponent(f64),
}

impl AlphaRule {
    pub fn exponent(self) -> f64 {
        match self {
            AlphaRule::NegThird => 1.0 / 3.0,
            AlphaRule::NegFifth => 0.2,
            AlphaRule::Exponent(p) => p,
        }
    }

    pub fn alpha(self, n: usize) -> f64 {
        (n as f64).powf(-self.exponent())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalSummary {
    /// `√n(μ̂ − μ_F)` per successful replication.
    pub values: Vec<f64>,
    pub m: usize,
    pub failures: usize,
    pub mean: f64,
    pub variance: f64,
    pub efficient_variance: f64,
    /// `variance / efficient_variance`.
    pub variance_ratio: f64,
    pub fallbacks: usize,
}

impl FunctionalSummary {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("replicate,statistic\n");
        for (i, v) in self.values.iter().enumerate() {
            let _ = writeln!(out, "{i},{v}");
        }
        out
    }
}

/// `m` replications of `√n(μ̂ − μ_F)` for the mean functional.
pub fn mc_functional(
    scenario: &dyn Scenario,
    n: usize,
    m: usize,
    rule: AlphaRule,
    seed: u64,
) -> Result<FunctionalSummary> {
    if m < 2 {
        return Err(Error::InvalidArgument("need at least two replications".into()));
    }
    let truth = true_mean(scenario)?;
    let v = efficient_variance(scenario)?;
    let alpha = rule.alpha(n);
    let s = scenario.support();
    let root_n = (n as f64).sqrt();
    let results = crate::simulation::replicate_with(m, seed, |sd| {
        let data = sample(scenario, n, sd)?;
        let est = mean_functional_on(&data, alpha, s.t_min, s.t_max, MEAN_FUNCTIONAL_POINTS)?;
        Ok::<_, Error>((root_n * (s.t_min + est.value - truth), est.fallbacks))
    });
    let mut values = Vec::with_capacity(m);
    let mut failures = 0;
    let mut fallbacks = 0;
    for r in results {
        match r {
            Ok((val, fb)) => {
                values.push(val);
                fallbacks += fb;
            }
            Err(_) => failures += 1,
        }
    }
    check_failure_rate(failures, m)?;
    let (mean, _) = mean_and_se(&values);
    let variance = sample_variance(&values, mean);
    Ok(FunctionalSummary {
        m: values.len(),
        values,
        failures,
        mean,
        variance,
        efficient_variance: v,
        variance_ratio: variance / v,
        fallbacks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::{scenario_a, scenario_b, Observation};

    fn epa() -> UnivariateKernel {
        UnivariateKernel::epanechnikov()
    }

    fn fd_d1(s: &dyn Scenario, x: f64, z: f64) -> f64 {
        let h = 1e-5;
        (s.cdf(x + h, z) - s.cdf(x - h, z)) / (2.0 * h)
    }

    fn fd_d11(s: &dyn Scenario, x: f64, z: f64) -> f64 {
        let h = 1e-4;
        (s.cdf(x + h, z) - 2.0 * s.cdf(x, z) + s.cdf(x - h, z)) / (h * h)
    }

    #[test]
    fn mu1_sigma2_scenario_b() {
        let b = scenario_b();
        let c = 0.09 * 5000f64.powf(0.2);
        let p = mu1_sigma2(&b, (0.5, 0.5), c, &epa()).unwrap();
        // independent oracle: finite-difference partials in the formula
        let bracket = fd_d11(&b, 0.5, 0.5) + 2.0 * 2.0 * fd_d1(&b, 0.5, 0.5) / 1.0;
        assert!((bracket - 2.0).abs() < 1e-5);
        let mu_fd = 0.5 * c * c * 0.2 * bracket;
        assert!((p.mu1 - mu_fd).abs() < 1e-5);
        assert!((p.mu1 - 0.0489).abs() < 5e-4, "{}", p.mu1);
        let f = quad::integrate(
            |x| quad::integrate(|y| b.density(x, y), 0.0, 0.5, 1e-12).unwrap(),
            0.0,
            0.5,
            1e-12,
        )
        .unwrap();
        let k2 = quad::integrate(|u| epa().eval(u).powi(2), -1.0, 1.0, 1e-12).unwrap();
        let s2 = f * (1.0 - f) * k2 / c;
        assert!((p.sigma2 - s2).abs() < 1e-10);
        assert!((p.sigma2 - 0.1328).abs() < 5e-4, "{}", p.sigma2);
        assert!(!p.degenerate);
        assert_eq!(p.mu2, p.mu1);
    }

    #[test]
    fn degenerate_bias_in_scenario_a() {
        for &(t, z) in &[(0.3, 0.4), (0.5, 0.5), (0.8, 0.1)] {
            let p = mu1_sigma2(&scenario_a(), (t, z), 0.5, &epa()).unwrap();
            assert_eq!(p.mu1, 0.0);
            assert!(p.degenerate);
            assert!(p.sigma2 > 0.0);
        }
        let p = mu1_sigma2(&scenario_b(), (0.5, 0.5), 0.5, &epa()).unwrap();
        assert!(!p.degenerate);
    }

    #[test]
    fn zero_censoring_density() {
        assert!(matches!(
            mu1_sigma2(&scenario_b(), (0.0, 0.5), 0.5, &epa()),
            Err(Error::ZeroCensoringDensity(_))
        ));
    }

    #[test]
    fn mu2_regimes() {
        let b = scenario_b();
        let k = BivariateKernel::product(epa(), epa());
        let at = |beta| BandwidthSchedule::new(0.5, 0.5, beta).unwrap();
        let m1 = mu1_sigma2(&b, (0.5, 0.5), 0.5, &epa()).unwrap().mu1;
        let inc = mu2(&b, (0.5, 0.5), &at(0.2), &k).unwrap() - m1;
        // ∂₂²F₀ by finite differences
        let h = 1e-4;
        let d22 = (b.cdf(0.5, 0.5 + h) - 2.0 * b.cdf(0.5, 0.5) + b.cdf(0.5, 0.5 - h)) / (h * h);
        assert!((inc - 0.5 * 0.25 * 0.2 * d22).abs() < 1e-6);
        assert!((inc - 0.0125).abs() < 1e-12);
        assert_eq!(mu2(&b, (0.5, 0.5), &at(1.0 / 3.0), &k).unwrap(), m1);
        assert!(matches!(
            mu2(&b, (0.5, 0.5), &at(0.1), &k),
            Err(Error::Divergence(_))
        ));
    }

    #[test]
    fn schedule_validation() {
        assert!(BandwidthSchedule::new(0.0, 1.0, 0.2).is_err());
        assert!(BandwidthSchedule::new(1.0, -1.0, 0.2).is_err());
        assert!(BandwidthSchedule::new(1.0, 1.0, 1.0).is_err());
        let s = BandwidthSchedule::new(0.5, 0.5, 1.0 / 3.0).unwrap();
        assert!((s.alpha(100_000) - 0.5 * 0.1).abs() < 1e-12);
        assert!((s.beta(1000) - 0.05).abs() < 1e-12);
    }

    #[test]
    fn ks_distance_known_cases() {
        // one point at the median: D = 1/2
        assert!((ks_normal(&[0.0], 0.0, 1.0).unwrap() - 0.5).abs() < 1e-15);
        let far = ks_normal(&[100.0, 101.0], 0.0, 1.0).unwrap();
        assert!((far - 1.0).abs() < 1e-12);
        // exact quantiles at (i - ½)/m give D = 1/(2m)
        let std = Normal::new(0.0, 1.0).unwrap();
        let v: Vec<f64> = (0..50).map(|i| std.inverse_cdf((i as f64 + 0.5) / 50.0)).collect();
        assert!((ks_normal(&v, 0.0, 1.0).unwrap() - 0.01).abs() < 1e-9);
    }

    #[test]
    fn normality_plumbing_with_two_replications() {
        let cfg = EstimatorConfig::epanechnikov(Bandwidths::time_only(0.2).unwrap());
        let spec = BandwidthSpec::Fixed(Bandwidths::time_only(0.2).unwrap());
        let s = mc_normality(&scenario_b(), EstimatorKind::F1, (0.5, 0.5), 500, 2, &spec, &cfg, 3).unwrap();
        assert_eq!(s.values.len(), 2);
        assert_eq!(s.m, 2);
        assert!(s.ks_distance.is_finite() && (0.0..=1.0).contains(&s.ks_distance));
        assert_eq!(s.qq().len(), 2);
        assert!(s.values_csv().starts_with("replicate,statistic\n"));
        assert!(s.summary_csv().starts_with("m,ks,mu,sigma2\n2,"));
        assert!(mc_normality(&scenario_b(), EstimatorKind::F1, (0.5, 0.5), 500, 1, &spec, &cfg, 3).is_err());
    }

    #[test]
    fn efficient_variance_values() {
        // symbolic: ¼∫[(x + 1) − ½x(x + 1)²] = 19/96
        let vb = efficient_variance(&scenario_b()).unwrap();
        assert!((vb - 19.0 / 96.0).abs() < 1e-6);
        assert!((vb - 0.19792).abs() < 1e-5);
        let va = efficient_variance(&scenario_a()).unwrap();
        assert!((va - 1.0 / 6.0).abs() < 1e-6);
    }

    #[test]
    fn true_means() {
        // f_X(x) = x + ½, so E X = ∫ x(x + ½) = 7/12
        assert!((true_mean(&scenario_b()).unwrap() - 7.0 / 12.0).abs() < 1e-10);
        assert!((true_mean(&scenario_a()).unwrap() - 0.5).abs() < 1e-10);
    }

    #[test]
    fn mean_functional_degenerate_sample() {
        let obs: Vec<Observation> = (0..50)
            .map(|i| Observation {
                t: 0.5 + 1e-4 * i as f64,
                z: 0.3,
                delta: true,
            })
            .collect();
        let s = Sample::from_observations(obs).unwrap();
        let est = mean_functional(&s, 0.01).unwrap();
        assert!(est.value.abs() < 1e-12);
        assert!(est.fallbacks > 1500);
    }

    #[test]
    fn mean_functional_against_direct_sum() {
        let s = sample(&scenario_b(), 400, 8).unwrap();
        let alpha = 0.08;
        let est = mean_functional_on(&s, alpha, 0.0, 1.0, 200).unwrap();
        // direct O(n) evaluation at each midpoint
        let mut sum = 0.0;
        for j in 0..200 {
            let x = (j as f64 + 0.5) / 200.0;
            let win: Vec<_> = s
                .observations()
                .iter()
                .filter(|o| (o.t - x).abs() <= alpha)
                .collect();
            assert!(!win.is_empty());
            let f = win.iter().filter(|o| o.delta).count() as f64 / win.len() as f64;
            sum += 1.0 - f;
        }
        assert!((est.value - sum / 200.0).abs() < 1e-12);
        assert_eq!(est.fallbacks, 0);
    }

    #[test]
    fn mean_functional_rate() {
        let n = 10_000;
        let s = sample(&scenario_b(), n, 21).unwrap();
        let est = mean_functional(&s, AlphaRule::NegThird.alpha(n)).unwrap();
        let v = efficient_variance(&scenario_b()).unwrap();
        assert!((est.value - 7.0 / 12.0).abs() < 4.0 * (v / n as f64).sqrt());
    }

    #[test]
    fn functional_plumbing() {
        let s = mc_functional(&scenario_b(), 200, 2, AlphaRule::NegThird, 5).unwrap();
        assert_eq!(s.values.len(), 2);
        assert!(s.mean.is_finite() && s.variance.is_finite());
        assert!(mc_functional(&scenario_b(), 200, 1, AlphaRule::NegThird, 5).is_err());
    }

    #[test]
    fn equivalence_curve_shape() {
        let sched = BandwidthSchedule::new(0.5, 0.5, 1.0 / 3.0).unwrap();
        let cfg = EstimatorConfig::epanechnikov(sched.bandwidths(1000).unwrap());
        let grid = [1000, 2000, 4000];
        let c = equivalence_curve(&scenario_b(), (0.5, 0.5), &grid, &sched, &cfg, EQUIVALENCE_ENVELOPE, 1).unwrap();
        assert_eq!(c.points.len(), 3);
        assert!((c.points[0].envelope - 1.5 * 1000f64.powf(-1.0 / 6.0)).abs() < 1e-12);
        assert!((0.0..=1.0).contains(&c.fraction_inside));
        assert!(c.to_csv().starts_with("n,diff,envelope\n1000,"));
        // replication i uses seed + i
        let direct = difference_statistic(&sample(&scenario_b(), 2000, 2).unwrap(), (0.5, 0.5), &sched, &cfg).unwrap();
        assert_eq!(direct, c.points[1].diff);
    }
}
