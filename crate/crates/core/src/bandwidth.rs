//! Smoothed-bootstrap local bandwidth selection at a point.
//!
//! An oversmoothed pilot `(ĝ₀, F̂₀)` is fitted to the data. Each bootstrap
//! sample draws `(X*, Y*)` from the clipped, renormalised pilot density
//! `f̂⁽²⁾` by rejection on the support box and `T*` from `ĝ₀` by inverse CDF;
//! the estimators are then evaluated over the bandwidth grids and their
//! squared deviations from `F̂₀(t₀, z₀)` averaged.

use std::fmt::Write as _;

use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::estimators::{f2_density, f_hat1, f_hat2, EstimatorConfig, EstimatorKind};
use crate::kernels::Bandwidths;
use crate::scenarios::{rng_for, Observation, Sample, Scenario, SupportBox};
use crate::simulation::{check_failure_rate, replicate_with};

const ENVELOPE_GRID: usize = 200;
const ENVELOPE_SAFETY: f64 = 1.1;
const CDF_TABLE: usize = 4097;
const MAX_PROPOSALS: usize = 10_000_000;

/// `0.4·(100/n)^{1/5}`, the oversmoothed pilot bandwidth for size `n`.
pub fn default_pilot(n: usize) -> f64 {
    0.4 * (100.0 / n as f64).powf(0.2)
}

/// `0.05, 0.10, …, 1.00`.
pub fn default_alpha_grid() -> Vec<f64> {
    (1..=20).map(|i| i as f64 * 0.05).collect()
}

/// `0.10, 0.15, …, 0.80`.
pub fn default_beta_grid() -> Vec<f64> {
    (2..=16).map(|i| i as f64 * 0.05).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapPlan {
    pub alpha0: f64,
    pub beta0: f64,
    pub replications: usize,
    pub alpha_grid: Vec<f64>,
    pub beta_grid: Vec<f64>,
    pub point: (f64, f64),
    pub seed: u64,
}

fn check_grid(name: &str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument(format!("{name} grid is empty")));
    }
    if grid.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidArgument(format!("{name} grid must be positive")));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(format!(
            "{name} grid must be strictly increasing"
        )));
    }
    Ok(())
}

impl BootstrapPlan {
    pub fn new(
        alpha0: f64,
        beta0: f64,
        replications: usize,
        alpha_grid: Vec<f64>,
        beta_grid: Vec<f64>,
        point: (f64, f64),
        seed: u64,
    ) -> Result<Self> {
        crate::kernels::check_bandwidth(alpha0)?;
        crate::kernels::check_bandwidth(beta0)?;
        if replications == 0 {
            return Err(Error::InvalidArgument("need at least one bootstrap replication".into()));
        }
        check_grid("alpha", &alpha_grid)?;
        check_grid("beta", &beta_grid)?;
        Ok(Self {
            alpha0,
            beta0,
            replications,
            alpha_grid,
            beta_grid,
            point,
            seed,
        })
    }
}

/// Samplers for the bootstrap world.
#[derive(Debug, Clone)]
pub struct PilotModel {
    sample: Sample,
    config: EstimatorConfig,
    support: SupportBox,
    /// `(t, CDF(t))` of `ĝ₀` restricted to the support.
    t_table: Vec<(f64, f64)>,
    envelope: f64,
    /// `F̂₀(t₀, z₀)` is read off this model by [`PilotModel::value`].
    pub alpha0: f64,
    pub beta0: f64,
}

/// Fits `ĝ₀` and `F̂₀` with pilot bandwidths `(alpha0, beta0)`.
pub fn fit_pilot(
    sample: &Sample,
    alpha0: f64,
    beta0: f64,
    config: &EstimatorConfig,
    support: SupportBox,
) -> Result<PilotModel> {
    let config = config.with_bandwidths(Bandwidths::new(alpha0, beta0)?);
    if !config.kernel1.has_derivative() {
        return Err(Error::DerivativeUnavailable(config.kernel1.name().to_string()));
    }
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }

    let k = &config.kernel1;
    let cdf = |t: f64| -> f64 {
        sample
            .observations()
            .iter()
            .map(|o| k.antiderivative((t - o.t) / alpha0))
            .sum::<f64>()
    };
    let (lo, hi) = (support.t_min, support.t_max);
    let base = cdf(lo);
    let mass = cdf(hi) - base;
    if !(mass > 0.0) {
        return Err(Error::DegeneratePilot);
    }
    let t_table: Vec<(f64, f64)> = (0..CDF_TABLE)
        .map(|i| {
            let t = lo + (hi - lo) * i as f64 / (CDF_TABLE - 1) as f64;
            (t, ((cdf(t) - base) / mass).clamp(0.0, 1.0))
        })
        .collect();

    let mut model = PilotModel {
        sample: sample.clone(),
        config,
        support,
        t_table,
        envelope: 0.0,
        alpha0,
        beta0,
    };
    let mut max: f64 = 0.0;
    for i in 0..ENVELOPE_GRID {
        for j in 0..ENVELOPE_GRID {
            let x = support.t_min + (support.t_max - support.t_min) * i as f64 / (ENVELOPE_GRID - 1) as f64;
            let y = support.z_min + (support.z_max - support.z_min) * j as f64 / (ENVELOPE_GRID - 1) as f64;
            max = max.max(model.density(x, y));
        }
    }
    if !(max > 0.0) {
        return Err(Error::DegeneratePilot);
    }
    model.envelope = ENVELOPE_SAFETY * max;
    Ok(model)
}

impl PilotModel {
    /// Pilot density clipped at zero; points where it cannot be evaluated
    /// count as zero.
    pub fn density(&self, x: f64, y: f64) -> f64 {
        match f2_density(&self.sample, &self.config, x, y) {
            Ok(v) if v.is_finite() => v.max(0.0),
            _ => 0.0,
        }
    }

    /// `F̂₀(t, z)`.
    pub fn value(&self, t: f64, z: f64) -> Result<f64> {
        f_hat2(&self.sample, &self.config, t, z)
    }

    pub fn envelope(&self) -> f64 {
        self.envelope
    }

    pub fn support(&self) -> SupportBox {
        self.support
    }

    /// Draws `T*` from `ĝ₀` truncated to the support.
    pub fn draw_time(&self, rng: &mut dyn RngCore) -> f64 {
        let u: f64 = rng.gen();
        let table = &self.t_table;
        let i = table.partition_point(|&(_, c)| c < u).clamp(1, table.len() - 1);
        let (t0, c0) = table[i - 1];
        let (t1, c1) = table[i];
        if c1 > c0 {
            t0 + (t1 - t0) * (u - c0) / (c1 - c0)
        } else {
            t0
        }
    }

    /// Draws `(X*, Y*)` by rejection. `envelope` is raised in place when a
    /// proposal exceeds it; the return value counts such refreshes.
    pub fn draw_hidden(&self, rng: &mut dyn RngCore, envelope: &mut f64) -> Result<((f64, f64), usize)> {
        let s = self.support;
        let mut refreshes = 0;
        for _ in 0..MAX_PROPOSALS {
            let x = s.t_min + (s.t_max - s.t_min) * rng.gen::<f64>();
            let y = s.z_min + (s.z_max - s.z_min) * rng.gen::<f64>();
            let u: f64 = rng.gen();
            let f = self.density(x, y);
            if f > *envelope {
                *envelope = ENVELOPE_SAFETY * f;
                refreshes += 1;
            }
            if u * *envelope <= f {
                return Ok(((x, y), refreshes));
            }
        }
        Err(Error::DegeneratePilot)
    }

    /// One bootstrap sample of size `n`, plus the number of envelope
    /// refreshes it triggered.
    pub fn resample(&self, n: usize, seed: u64) -> Result<(Sample, usize)> {
        let mut rng = rng_for(seed);
        let mut envelope = self.envelope;
        let mut refreshes = 0;
        let mut obs = Vec::with_capacity(n);
        for _ in 0..n {
            let ((x, y), r) = self.draw_hidden(&mut rng, &mut envelope)?;
            refreshes += r;
            let t = self.draw_time(&mut rng);
            obs.push(Observation::censor(x, y, t));
        }
        Ok((Sample::from_observations(obs)?.with_seed(seed), refreshes))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapRow {
    pub kind: EstimatorKind,
    pub alpha: f64,
    /// `None` for `F̂⁽¹⁾`.
    pub beta: Option<f64>,
    /// Mean squared deviation from the pilot value.
    pub mse_hat: f64,
    /// Mean squared deviation from the true `F₀`, when known.
    pub mse_tilde: Option<f64>,
    pub failures: usize,
    pub replications: usize,
}

impl BootstrapRow {
    /// At most 1% failed replications and a finite estimate.
    pub fn is_valid(&self) -> bool {
        check_failure_rate(self.failures, self.replications).is_ok() && self.mse_hat.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapTable {
    pub rows: Vec<BootstrapRow>,
    pub pilot_value: f64,
    pub envelope_refreshes: usize,
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl BootstrapTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("estimator,alpha,beta,mse_hat,mse_tilde,failures\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.kind.as_str(),
                r.alpha,
                opt_cell(r.beta),
                r.mse_hat,
                opt_cell(r.mse_tilde),
                r.failures
            );
        }
        out
    }

    pub fn rows_for(&self, kind: EstimatorKind) -> impl Iterator<Item = &BootstrapRow> {
        self.rows.iter().filter(move |r| r.kind == kind)
    }
}

/// Smoothed-bootstrap MSE for `F̂⁽¹⁾` over the α grid and `F̂⁽²⁾` over the
/// α×β grid. With `truth`, the deviation from the true `F₀` is reported too.
pub fn bootstrap_mse(
    sample: &Sample,
    plan: &BootstrapPlan,
    config: &EstimatorConfig,
    support: SupportBox,
    truth: Option<&dyn Scenario>,
) -> Result<BootstrapTable> {
    let pilot = fit_pilot(sample, plan.alpha0, plan.beta0, config, support)?;
    let (t0, z0) = plan.point;
    let pilot_value = pilot.value(t0, z0)?;
    let true_value = truth.map(|s| s.cdf(t0, z0));

    let mut candidates: Vec<(EstimatorKind, Bandwidths)> = Vec::new();
    for &a in &plan.alpha_grid {
        candidates.push((EstimatorKind::F1, Bandwidths::time_only(a)?));
    }
    for &a in &plan.alpha_grid {
        for &b in &plan.beta_grid {
            candidates.push((EstimatorKind::F2, Bandwidths::new(a, b)?));
        }
    }
    let configs: Vec<EstimatorConfig> = candidates
        .iter()
        .map(|(_, bw)| config.with_bandwidths(*bw))
        .collect();

    let n = sample.len();
    let per_rep = replicate_with(plan.replications, plan.seed, |s| {
        let (boot, refreshes) = pilot.resample(n, s)?;
        let values: Vec<Option<f64>> = candidates
            .iter()
            .zip(&configs)
            .map(|((kind, _), cfg)| {
                let v = match kind {
                    EstimatorKind::F1 => f_hat1(&boot, cfg, t0, z0),
                    EstimatorKind::F2 => f_hat2(&boot, cfg, t0, z0),
                };
                v.ok().filter(|v| v.is_finite())
            })
            .collect();
        Ok::<_, Error>((values, refreshes))
    });

    let mut envelope_refreshes = 0;
    let per_rep: Vec<Option<Vec<Option<f64>>>> = per_rep
        .into_iter()
        .map(|r| {
            r.ok().map(|(v, refreshes)| {
                envelope_refreshes += refreshes;
                v
            })
        })
        .collect();

    let rows = candidates
        .iter()
        .enumerate()
        .map(|(j, (kind, bw))| {
            let values: Vec<f64> = per_rep
                .iter()
                .filter_map(|rep| rep.as_ref().and_then(|v| v[j]))
                .collect();
            let mean_sq = |target: f64| {
                values.iter().map(|v| (v - target).powi(2)).sum::<f64>() / values.len() as f64
            };
            BootstrapRow {
                kind: *kind,
                alpha: bw.alpha,
                beta: bw.beta,
                mse_hat: if values.is_empty() { f64::NAN } else { mean_sq(pilot_value) },
                mse_tilde: true_value.filter(|_| !values.is_empty()).map(mean_sq),
                failures: plan.replications - values.len(),
                replications: plan.replications,
            }
        })
        .collect();
    Ok(BootstrapTable {
        rows,
        pilot_value,
        envelope_refreshes,
    })
}

/// Valid row of `kind` with the smallest `mse_hat`; ties go to the smallest
/// α, then the smallest β.
pub fn select(rows: &[BootstrapRow], kind: EstimatorKind) -> Result<&BootstrapRow> {
    rows.iter()
        .filter(|r| r.kind == kind && r.is_valid())
        .min_by(|a, b| {
            a.mse_hat
                .total_cmp(&b.mse_hat)
                .then(a.alpha.total_cmp(&b.alpha))
                .then(a.beta.unwrap_or(0.0).total_cmp(&b.beta.unwrap_or(0.0)))
        })
        .ok_or(Error::SelectionFailure)
}
