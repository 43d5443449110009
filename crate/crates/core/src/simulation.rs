//! Seeded replication engine and Monte Carlo mean squared error studies.
//!
//! Replication `r` of a study with base seed `s` draws its data from
//! `rng_for(s + r)`. Work is spread over the current rayon pool but results
//! are gathered in replication order, so every reduction is bit-identical
//! whatever the number of worker threads.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::{EstimatorConfig, EstimatorKind};
use crate::kernels::Bandwidths;
use crate::scenarios::{sample, Scenario};

/// Seed of replication `r` under base seed `seed`.
pub fn replication_seed(seed: u64, r: usize) -> u64 {
    seed.wrapping_add(r as u64)
}

/// Runs `f(seed + r)` for `r in 0..m` and returns the outputs in order.
pub fn replicate_with<T, F>(m: usize, seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync,
{
    (0..m)
        .into_par_iter()
        .map(|r| f(replication_seed(seed, r)))
        .collect()
}

/// Outcome of `m` scalar replications.
#[derive(Debug, Clone, PartialEq)]
pub struct Replications {
    /// Successful values, in replication order.
    pub values: Vec<f64>,
    /// Indices of failed replications.
    pub failed: Vec<usize>,
    pub first_error: Option<Error>,
    pub total: usize,
}

impl Replications {
    pub fn from_results(results: Vec<Result<f64>>) -> Self {
        let total = results.len();
        let mut values = Vec::with_capacity(total);
        let mut failed = Vec::new();
        let mut first_error = None;
        for (i, r) in results.into_iter().enumerate() {
            match r {
                Ok(v) => values.push(v),
                Err(e) => {
                    failed.push(i);
                    first_error.get_or_insert(e);
                }
            }
        }
        Replications {
            values,
            failed,
            first_error,
            total,
        }
    }

    pub fn failures(&self) -> usize {
        self.failed.len()
    }

    /// A run is invalid once more than 1% of its replications fail.
    pub fn check_failure_rate(&self) -> Result<()> {
        check_failure_rate(self.failures(), self.total)
    }
}

pub fn check_failure_rate(failures: usize, total: usize) -> Result<()> {
    if failures * 100 > total {
        Err(Error::TooManyFailures { failures, total })
    } else {
        Ok(())
    }
}

pub fn replicate<F>(m: usize, seed: u64, f: F) -> Replications
where
    F: Fn(u64) -> Result<f64> + Sync,
{
    Replications::from_results(replicate_with(m, seed, f))
}

/// Sample mean and its standard error (sample standard deviation over √m).
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let m = values.len();
    if m == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / m as f64;
    if m < 2 {
        return (mean, f64::NAN);
    }
    (mean, (sample_variance(values, mean) / m as f64).sqrt())
}

/// Unbiased sample variance around a precomputed mean.
pub fn sample_variance(values: &[f64], mean: f64) -> f64 {
    let m = values.len();
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m as f64 - 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MseEstimate {
    pub kind: EstimatorKind,
    pub bandwidths: Bandwidths,
    /// Mean of the squared errors over successful replications.
    pub mse: f64,
    /// Standard error of that mean.
    pub se: f64,
    pub failures: usize,
    pub replications: usize,
}

/// Monte Carlo MSE of one estimator at `(t₀, z₀)` against the true `F₀`.
pub fn mc_mse(
    scenario: &dyn Scenario,
    kind: EstimatorKind,
    point: (f64, f64),
    n: usize,
    replications: usize,
    config: &EstimatorConfig,
    seed: u64,
) -> Result<MseEstimate> {
    let rows = mc_mse_grid(
        scenario,
        point,
        n,
        replications,
        config,
        &[(kind, config.bandwidths)],
        seed,
    )?;
    let row = rows.into_iter().next().expect("one candidate");
    check_failure_rate(row.failures, row.replications)?;
    Ok(row)
}

/// Monte Carlo MSE for several (estimator, bandwidth) candidates. Every
/// candidate is evaluated on the same simulated samples. Rows carry their
/// failure counts; callers decide whether to reject a candidate.
pub fn mc_mse_grid(
    scenario: &dyn Scenario,
    point: (f64, f64),
    n: usize,
    replications: usize,
    config: &EstimatorConfig,
    candidates: &[(EstimatorKind, Bandwidths)],
    seed: u64,
) -> Result<Vec<MseEstimate>> {
    if replications == 0 {
        return Err(Error::InvalidArgument("need at least one replication".into()));
    }
    let truth = scenario.cdf(point.0, point.1);
    let configs: Vec<EstimatorConfig> = candidates
        .iter()
        .map(|(_, bw)| config.with_bandwidths(*bw))
        .collect();
    let per_rep: Vec<Result<Vec<Option<f64>>>> = replicate_with(replications, seed, |s| {
        let data = sample(scenario, n, s)?;
        Ok(candidates
            .iter()
            .zip(&configs)
            .map(|((kind, _), cfg)| {
                kind.evaluate(&data, cfg, point.0, point.1)
                    .ok()
                    .map(|v| (v - truth).powi(2))
            })
            .collect())
    });
    let per_rep: Vec<Vec<Option<f64>>> = per_rep.into_iter().collect::<Result<_>>()?;
    Ok(candidates
        .iter()
        .enumerate()
        .map(|(j, (kind, bw))| {
            let sq: Vec<f64> = per_rep.iter().filter_map(|row| row[j]).collect();
            let (mse, se) = mean_and_se(&sq);
            MseEstimate {
                kind: *kind,
                bandwidths: *bw,
                mse,
                se,
                failures: replications - sq.len(),
                replications,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::scenario_b;

    #[test]
    fn reduction_is_independent_of_thread_count() {
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| {
                    let cfg = EstimatorConfig::epanechnikov(Bandwidths::new(0.2, 0.1).unwrap());
                    mc_mse(&scenario_b(), EstimatorKind::F2, (0.5, 0.5), 300, 40, &cfg, 9).unwrap()
                })
        };
        let a = run(1);
        let b = run(4);
        assert_eq!(a.mse.to_bits(), b.mse.to_bits());
        assert_eq!(a.se.to_bits(), b.se.to_bits());
    }

    #[test]
    fn failure_policy() {
        assert!(check_failure_rate(1, 100).is_ok());
        assert!(check_failure_rate(2, 100).is_err());
        assert!(check_failure_rate(0, 1).is_ok());
        let r = replicate(200, 0, |s| {
            if s % 50 == 0 {
                Err(Error::EmptySample)
            } else {
                Ok(s as f64)
            }
        });
        assert_eq!(r.failures(), 4);
        assert_eq!(r.values.len(), 196);
        assert!(matches!(
            r.check_failure_rate(),
            Err(Error::TooManyFailures { failures: 4, total: 200 })
        ));
    }

    #[test]
    fn mean_and_se_known_values() {
        let (m, se) = mean_and_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        let (m, se) = mean_and_se(&[3.0]);
        assert_eq!(m, 3.0);
        assert!(se.is_nan());
    }

    #[test]
    fn grid_shares_samples() {
        let cfg = EstimatorConfig::epanechnikov(Bandwidths::new(0.2, 0.1).unwrap());
        let cands = [
            (EstimatorKind::F1, Bandwidths::time_only(0.2).unwrap()),
            (EstimatorKind::F1, Bandwidths::time_only(0.2).unwrap()),
        ];
        let rows = mc_mse_grid(&scenario_b(), (0.4, 0.4), 200, 20, &cfg, &cands, 1).unwrap();
        assert_eq!(rows[0].mse, rows[1].mse);
        assert_eq!(rows[0].failures, 0);
    }
}
