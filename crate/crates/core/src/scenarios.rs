//! Analytic truth models and exact sampling of current status data with a
//! continuous mark.
//!
//! A hidden pair `(X, Y)` is drawn from `F₀` and an inspection time `T` from
//! `g`, independently. Only `W = (T, Z, Δ)` with `Δ = 1{X ≤ T}` and `Z = ΔY`
//! is kept; the hidden pair never reaches a [`Sample`].

use std::fmt::Write as _;
use std::io::BufRead;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Seeded generator used throughout the crate. Replication `r` of a study
/// with base seed `s` always uses `rng_for(s + r)`.
pub fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportBox {
    pub t_min: f64,
    pub t_max: f64,
    pub z_min: f64,
    pub z_max: f64,
}

impl SupportBox {
    pub const UNIT: SupportBox = SupportBox {
        t_min: 0.0,
        t_max: 1.0,
        z_min: 0.0,
        z_max: 1.0,
    };

    pub fn contains(&self, t: f64, z: f64) -> bool {
        t >= self.t_min && t <= self.t_max && z >= self.z_min && z <= self.z_max
    }

    pub fn area(&self) -> f64 {
        (self.t_max - self.t_min) * (self.z_max - self.z_min)
    }
}

/// A truth model: the joint distribution `F₀` of event time and mark, the
/// censoring density `g`, and the derivatives the asymptotic formulas need.
pub trait Scenario: Send + Sync {
    fn name(&self) -> &str;
    fn support(&self) -> SupportBox;

    /// `F₀(x, z)`.
    fn cdf(&self, x: f64, z: f64) -> f64;
    /// `f₀(x, z)`.
    fn density(&self, x: f64, z: f64) -> f64;
    /// `∂₁F₀`.
    fn d1(&self, x: f64, z: f64) -> f64;
    /// `∂₁²F₀`.
    fn d11(&self, x: f64, z: f64) -> f64;
    /// `∂₂F₀`.
    fn d2(&self, x: f64, z: f64) -> f64;
    /// `∂₂²F₀`.
    fn d22(&self, x: f64, z: f64) -> f64;
    /// `F₀(x, ∞)`.
    fn marginal_x(&self, x: f64) -> f64;

    fn g(&self, t: f64) -> f64;
    fn g_prime(&self, t: f64) -> f64;
    fn g_second(&self, t: f64) -> f64;

    /// Draws the hidden pair `(X, Y)`.
    fn draw_hidden(&self, rng: &mut dyn RngCore) -> (f64, f64);
    /// Draws an inspection time from `g`.
    fn draw_censoring(&self, rng: &mut dyn RngCore) -> f64;
}

fn clamp01(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}

fn inside01(v: f64) -> bool {
    (0.0..=1.0).contains(&v)
}

/// Independent uniforms: `F₀(x, y) = xy`, `g = 1` on `[0, 1]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct IndependentUniform;

impl Scenario for IndependentUniform {
    fn name(&self) -> &str {
        "A"
    }
    fn support(&self) -> SupportBox {
        SupportBox::UNIT
    }
    fn cdf(&self, x: f64, z: f64) -> f64 {
        clamp01(x) * clamp01(z)
    }
    fn density(&self, x: f64, z: f64) -> f64 {
        if inside01(x) && inside01(z) {
            1.0
        } else {
            0.0
        }
    }
    fn d1(&self, x: f64, z: f64) -> f64 {
        if inside01(x) {
            clamp01(z)
        } else {
            0.0
        }
    }
    fn d11(&self, _x: f64, _z: f64) -> f64 {
        0.0
    }
    fn d2(&self, x: f64, z: f64) -> f64 {
        if inside01(z) {
            clamp01(x)
        } else {
            0.0
        }
    }
    fn d22(&self, _x: f64, _z: f64) -> f64 {
        0.0
    }
    fn marginal_x(&self, x: f64) -> f64 {
        clamp01(x)
    }
    fn g(&self, t: f64) -> f64 {
        if inside01(t) {
            1.0
        } else {
            0.0
        }
    }
    fn g_prime(&self, _t: f64) -> f64 {
        0.0
    }
    fn g_second(&self, _t: f64) -> f64 {
        0.0
    }
    fn draw_hidden(&self, rng: &mut dyn RngCore) -> (f64, f64) {
        (rng.gen::<f64>(), rng.gen::<f64>())
    }
    fn draw_censoring(&self, rng: &mut dyn RngCore) -> f64 {
        rng.gen::<f64>()
    }
}

/// `F₀(x, y) = ½xy(x + y)` on `[0, 1]²` (density `x + y`), `g(t) = 2t`.
#[derive(Debug, Clone, Copy, Default)]
pub struct LinearDensity;

impl LinearDensity {
    /// Inverse of `F_X(x) = ½x(x + 1)`.
    pub fn inverse_marginal_x(u: f64) -> f64 {
        0.5 * ((1.0 + 8.0 * u).sqrt() - 1.0)
    }

    /// Inverse of the conditional CDF `(xy + y²/2) / (x + ½)` in `y`.
    pub fn inverse_conditional_y(x: f64, u: f64) -> f64 {
        (x * x + u * (2.0 * x + 1.0)).sqrt() - x
    }
}

impl Scenario for LinearDensity {
    fn name(&self) -> &str {
        "B"
    }
    fn support(&self) -> SupportBox {
        SupportBox::UNIT
    }
    fn cdf(&self, x: f64, z: f64) -> f64 {
        let (x, z) = (clamp01(x), clamp01(z));
        0.5 * x * z * (x + z)
    }
    fn density(&self, x: f64, z: f64) -> f64 {
        if inside01(x) && inside01(z) {
            x + z
        } else {
            0.0
        }
    }
    fn d1(&self, x: f64, z: f64) -> f64 {
        if inside01(x) {
            let z = clamp01(z);
            x * z + 0.5 * z * z
        } else {
            0.0
        }
    }
    fn d11(&self, x: f64, z: f64) -> f64 {
        if inside01(x) {
            clamp01(z)
        } else {
            0.0
        }
    }
    fn d2(&self, x: f64, z: f64) -> f64 {
        if inside01(z) {
            let x = clamp01(x);
            x * z + 0.5 * x * x
        } else {
            0.0
        }
    }
    fn d22(&self, x: f64, z: f64) -> f64 {
        if inside01(z) {
            clamp01(x)
        } else {
            0.0
        }
    }
    fn marginal_x(&self, x: f64) -> f64 {
        let x = clamp01(x);
        0.5 * x * (x + 1.0)
    }
    fn g(&self, t: f64) -> f64 {
        if inside01(t) {
            2.0 * t
        } else {
            0.0
        }
    }
    fn g_prime(&self, t: f64) -> f64 {
        if inside01(t) {
            2.0
        } else {
            0.0
        }
    }
    fn g_second(&self, _t: f64) -> f64 {
        0.0
    }
    fn draw_hidden(&self, rng: &mut dyn RngCore) -> (f64, f64) {
        let x = Self::inverse_marginal_x(rng.gen::<f64>());
        let y = Self::inverse_conditional_y(x, rng.gen::<f64>());
        (x, y)
    }
    fn draw_censoring(&self, rng: &mut dyn RngCore) -> f64 {
        rng.gen::<f64>().sqrt()
    }
}

pub fn scenario_a() -> IndependentUniform {
    IndependentUniform
}

pub fn scenario_b() -> LinearDensity {
    LinearDensity
}

/// Resolves a scenario id (`A` or `B`).
pub fn scenario_by_id(id: &str) -> Result<Box<dyn Scenario>> {
    match id.trim().to_ascii_uppercase().as_str() {
        "A" => Ok(Box::new(IndependentUniform)),
        "B" => Ok(Box::new(LinearDensity)),
        other => Err(Error::InvalidArgument(format!("unknown scenario `{other}`"))),
    }
}

/// One censored record `(T, Z, Δ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub t: f64,
    pub z: f64,
    pub delta: bool,
}

impl Observation {
    /// Builds the observable record from hidden `(x, y)` and inspection time `t`.
    pub fn censor(x: f64, y: f64, t: f64) -> Self {
        let delta = x <= t;
        Observation {
            t,
            z: if delta { y } else { 0.0 },
            delta,
        }
    }

    fn check(&self, index: usize) -> Result<()> {
        let bad = |reason: &str| {
            Err(Error::InvalidObservation {
                index,
                reason: reason.to_string(),
            })
        };
        if !self.t.is_finite() || !self.z.is_finite() {
            return bad("non-finite value");
        }
        if self.t < 0.0 {
            return bad("negative inspection time");
        }
        if self.z < 0.0 {
            return bad("negative mark");
        }
        if !self.delta && self.z != 0.0 {
            return bad("censored record with nonzero mark");
        }
        Ok(())
    }
}

/// The observed data. Records are kept ordered by inspection time so the
/// estimators can restrict every kernel sum to the window `[t₀ − α, t₀ + α]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    observations: Vec<Observation>,
    seed: Option<u64>,
}

impl Sample {
    pub fn from_observations(mut observations: Vec<Observation>) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::EmptySample);
        }
        for (i, o) in observations.iter().enumerate() {
            o.check(i)?;
        }
        observations.sort_by(|a, b| a.t.total_cmp(&b.t));
        Ok(Sample {
            observations,
            seed: None,
        })
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    /// Records with `lo ≤ T ≤ hi`.
    pub fn window(&self, lo: f64, hi: f64) -> &[Observation] {
        let start = self.observations.partition_point(|o| o.t < lo);
        let end = self.observations.partition_point(|o| o.t <= hi);
        &self.observations[start..end.max(start)]
    }

    pub fn fraction_uncensored(&self) -> f64 {
        self.observations.iter().filter(|o| o.delta).count() as f64 / self.len() as f64
    }

    pub fn max_mark(&self) -> f64 {
        self.observations.iter().map(|o| o.z).fold(0.0, f64::max)
    }

    /// Writes `t,z,delta` CSV with shortest round-trip float formatting.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,z,delta\n");
        for o in &self.observations {
            let _ = writeln!(out, "{},{},{}", o.t, o.z, u8::from(o.delta));
        }
        out
    }

    pub fn from_csv<R: BufRead>(reader: R) -> Result<Self> {
        let mut observations = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::InvalidArgument(e.to_string()))?;
            let line = line.trim();
            if lineno == 0 {
                if line != "t,z,delta" {
                    return Err(Error::InvalidArgument(format!(
                        "expected header `t,z,delta`, found `{line}`"
                    )));
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            let parse = |s: &str| {
                s.trim().parse::<f64>().map_err(|_| {
                    Error::InvalidArgument(format!("line {}: bad number `{s}`", lineno + 1))
                })
            };
            if fields.len() != 3 {
                return Err(Error::InvalidArgument(format!(
                    "line {}: expected 3 fields",
                    lineno + 1
                )));
            }
            let delta = match fields[2].trim() {
                "0" => false,
                "1" => true,
                other => {
                    return Err(Error::InvalidArgument(format!(
                        "line {}: delta must be 0 or 1, got `{other}`",
                        lineno + 1
                    )))
                }
            };
            observations.push(Observation {
                t: parse(fields[0])?,
                z: parse(fields[1])?,
                delta,
            });
        }
        Self::from_observations(observations)
    }
}

/// Draws `n` censored records; the same `(scenario, n, seed)` always gives
/// the same sample.
pub fn sample(scenario: &dyn Scenario, n: usize, seed: u64) -> Result<Sample> {
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let mut rng = rng_for(seed);
    let observations = (0..n)
        .map(|_| {
            let (x, y) = scenario.draw_hidden(&mut rng);
            let t = scenario.draw_censoring(&mut rng);
            Observation::censor(x, y, t)
        })
        .collect();
    let mut s = Sample::from_observations(observations)?;
    s.seed = Some(seed);
    Ok(s)
}

/// `h_{F₀}(t, z, δ) = δ g(t) ∂₂F₀(t, z) + (1 − δ) g(t)(1 − F₀(t, ∞))`.
pub fn observation_density(scenario: &dyn Scenario, t: f64, z: f64, delta: bool) -> Result<f64> {
    if !scenario.support().contains(t, z) {
        return Err(Error::OutOfSupport { t, z });
    }
    let g = scenario.g(t);
    Ok(if delta {
        g * scenario.d2(t, z)
    } else {
        g * (1.0 - scenario.marginal_x(t))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenario_a_values() {
        let a = scenario_a();
        assert_eq!(a.cdf(0.5, 0.5), 0.25);
        for z in [0.0, 0.3, 1.0, 4.0] {
            assert_eq!(a.cdf(0.0, z), 0.0);
        }
        assert_eq!(a.density(0.3, 0.7), 1.0);
        // g(t)·∂₂F₀ = t
        for t in [0.1, 0.5, 0.9] {
            assert!((observation_density(&a, t, 0.4, true).unwrap() - t).abs() < 1e-15);
        }
    }

    #[test]
    fn scenario_b_values() {
        let b = scenario_b();
        assert!((b.cdf(0.5, 0.5) - 0.125).abs() < 1e-15);
        assert!((b.d11(0.5, 0.5) - 0.5).abs() < 1e-15);
        assert_eq!(b.marginal_x(1.0), 1.0);
        assert!((observation_density(&b, 0.5, 0.5, true).unwrap() - 0.375).abs() < 1e-15);
        assert!((observation_density(&b, 0.5, 0.0, false).unwrap() - 0.625).abs() < 1e-15);
        assert!(matches!(
            observation_density(&b, 1.5, 0.2, true),
            Err(Error::OutOfSupport { .. })
        ));
    }

    #[test]
    fn partials_match_finite_differences() {
        let h = 1e-4;
        let scenarios: [&dyn Scenario; 2] = [&scenario_a(), &scenario_b()];
        for s in scenarios {
            for i in 1..10 {
                for j in 1..10 {
                    let (x, z) = (i as f64 / 10.0, j as f64 / 10.0);
                    let d1 = (s.cdf(x + h, z) - s.cdf(x - h, z)) / (2.0 * h);
                    let d2 = (s.cdf(x, z + h) - s.cdf(x, z - h)) / (2.0 * h);
                    let d11 =
                        (s.cdf(x + h, z) - 2.0 * s.cdf(x, z) + s.cdf(x - h, z)) / (h * h);
                    let d22 =
                        (s.cdf(x, z + h) - 2.0 * s.cdf(x, z) + s.cdf(x, z - h)) / (h * h);
                    let mixed = (s.cdf(x + h, z + h) - s.cdf(x + h, z - h) - s.cdf(x - h, z + h)
                        + s.cdf(x - h, z - h))
                        / (4.0 * h * h);
                    assert!((s.d1(x, z) - d1).abs() < 1e-5);
                    assert!((s.d2(x, z) - d2).abs() < 1e-5);
                    assert!((s.d11(x, z) - d11).abs() < 1e-5);
                    assert!((s.d22(x, z) - d22).abs() < 1e-5);
                    assert!((s.density(x, z) - mixed).abs() < 1e-5);
                    let gp = (s.g(x + h) - s.g(x - h)) / (2.0 * h);
                    assert!((s.g_prime(x) - gp).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn cdf_shape_on_grid() {
        let scenarios: [&dyn Scenario; 2] = [&scenario_a(), &scenario_b()];
        let grid: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
        for s in scenarios {
            for &v in &grid {
                assert_eq!(s.cdf(0.0, v), 0.0);
                assert_eq!(s.cdf(v, 0.0), 0.0);
            }
            for w in grid.windows(2) {
                for u in grid.windows(2) {
                    let mass = s.cdf(w[1], u[1]) - s.cdf(w[1], u[0]) - s.cdf(w[0], u[1])
                        + s.cdf(w[0], u[0]);
                    assert!(mass >= -1e-12);
                    assert!(s.cdf(w[1], u[0]) >= s.cdf(w[0], u[0]));
                    assert!(s.cdf(u[0], w[1]) >= s.cdf(u[0], w[0]));
                }
            }
            let mass = crate::quad::integrate(|t| s.g(t), 0.0, 1.0, 1e-12).unwrap();
            assert!((mass - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn observation_density_has_unit_mass() {
        let scenarios: [&dyn Scenario; 2] = [&scenario_a(), &scenario_b()];
        for s in scenarios {
            let upper = crate::quad::integrate(
                |t| {
                    crate::quad::integrate(
                        |z| observation_density(s, t, z, true).unwrap(),
                        0.0,
                        1.0,
                        1e-12,
                    )
                    .unwrap()
                },
                0.0,
                1.0,
                1e-10,
            )
            .unwrap();
            let lower = crate::quad::integrate(
                |t| observation_density(s, t, 0.0, false).unwrap(),
                0.0,
                1.0,
                1e-12,
            )
            .unwrap();
            assert!((upper + lower - 1.0).abs() < 1e-6, "{}", s.name());
        }
    }

    #[test]
    fn sampling_is_deterministic_and_censored() {
        let b = scenario_b();
        let s1 = sample(&b, 500, 42).unwrap();
        let s2 = sample(&b, 500, 42).unwrap();
        assert_eq!(s1, s2);
        assert_ne!(s1, sample(&b, 500, 43).unwrap());
        assert_eq!(s1.seed(), Some(42));
        for o in s1.observations() {
            assert!(o.t >= 0.0 && o.z >= 0.0);
            if !o.delta {
                assert_eq!(o.z, 0.0);
            }
        }
        let one = sample(&b, 1, 7).unwrap();
        assert_eq!(one.len(), 1);
        assert!(matches!(sample(&b, 0, 7), Err(Error::EmptySample)));
    }

    #[test]
    fn uncensored_fractions() {
        let a = sample(&scenario_a(), 100_000, 1).unwrap();
        assert!((a.fraction_uncensored() - 0.5).abs() < 0.005);
        // ∫₀¹ ½t(t+1)·2t dt = 1/4 + 1/3 = 7/12
        let b = sample(&scenario_b(), 100_000, 2).unwrap();
        let p = crate::quad::integrate(
            |t| LinearDensity.marginal_x(t) * LinearDensity.g(t),
            0.0,
            1.0,
            1e-12,
        )
        .unwrap();
        assert!((p - 7.0 / 12.0).abs() < 1e-12);
        assert!((b.fraction_uncensored() - p).abs() < 0.005);
    }

    #[test]
    fn inverse_cdfs_invert() {
        for i in 0..=100 {
            let u = i as f64 / 100.0;
            let x = LinearDensity::inverse_marginal_x(u);
            assert!((0.5 * x * (x + 1.0) - u).abs() < 1e-14);
            assert!(inside01(x));
            for xc in [0.0, 0.3, 1.0] {
                let y = LinearDensity::inverse_conditional_y(xc, u);
                assert!((-1e-15..=1.0 + 1e-15).contains(&y));
                assert!(((xc * y + 0.5 * y * y) / (xc + 0.5) - u).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn csv_round_trip() {
        let s = sample(&scenario_b(), 50, 3).unwrap();
        let text = s.to_csv();
        assert!(text.starts_with("t,z,delta\n"));
        let back = Sample::from_csv(text.as_bytes()).unwrap();
        assert_eq!(back.observations(), s.observations());
        assert!(Sample::from_csv("t,z,delta\n0.5,0.2,0\n".as_bytes()).is_err());
        assert!(Sample::from_csv("a,b\n".as_bytes()).is_err());
    }

    #[test]
    fn window_is_inclusive() {
        let obs = [0.1, 0.2, 0.3, 0.4]
            .iter()
            .map(|&t| Observation { t, z: 0.0, delta: false })
            .collect();
        let s = Sample::from_observations(obs).unwrap();
        assert_eq!(s.window(0.2, 0.3).len(), 2);
        assert_eq!(s.window(0.5, 0.9).len(), 0);
        assert_eq!(s.window(0.0, 1.0).len(), 4);
    }
}
