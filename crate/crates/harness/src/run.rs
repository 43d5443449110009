//! Experiment dispatch: typed settings from a [`Config`], one module call
//! per experiment, CSV outputs and a manifest.

use std::fmt::Write as _;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use csmark::asymptotics::{
    equivalence_curve, mc_functional, mc_normality, AlphaRule, BandwidthSchedule, BandwidthSpec,
    EQUIVALENCE_ENVELOPE,
};
use csmark::bandwidth::{
    bootstrap_mse, default_alpha_grid, default_beta_grid, default_pilot, select, BootstrapPlan,
};
use csmark::estimators::{grid_csv, DEFAULT_G_FLOOR};
use csmark::scenarios::{sample, scenario_by_id, Sample, Scenario};
use csmark::simulation::{check_failure_rate, mc_mse, mc_mse_grid, MseEstimate};
use csmark::{Bandwidths, BivariateKernel, EstimatorConfig, EstimatorKind, UnivariateKernel};
use thiserror::Error;

use crate::config::{Config, ConfigError};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Core(#[from] csmark::Error),
    #[error("{context}: {source}")]
    Io {
        context: String,
        source: std::io::Error,
    },
}

impl HarnessError {
    /// 2 for bad input, 3 for failures while running, 1 for I/O.
    pub fn exit_code(&self) -> u8 {
        use csmark::Error as E;
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Core(
                E::InvalidBandwidth(_)
                | E::InvalidArgument(_)
                | E::InvalidKernel(_)
                | E::KernelMismatch
                | E::Divergence(_)
                | E::InvalidObservation { .. }
                | E::EmptySample
                | E::DerivativeUnavailable(_),
            ) => 2,
            HarnessError::Core(_) => 3,
            HarnessError::Io { .. } => 1,
        }
    }
}

fn io(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> HarnessError {
    let context = context.into();
    move |source| HarnessError::Io { context, source }
}

fn invalid(key: &str, message: impl Into<String>) -> HarnessError {
    HarnessError::Config(ConfigError::Invalid {
        key: key.to_string(),
        message: message.into(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Simulate,
    EstimateGrid,
    McNormality,
    McMse,
    Equivalence,
    Functional,
    BwSelect,
    Table1,
}

impl Experiment {
    pub const ALL: [Experiment; 8] = [
        Experiment::Simulate,
        Experiment::EstimateGrid,
        Experiment::McNormality,
        Experiment::McMse,
        Experiment::Equivalence,
        Experiment::Functional,
        Experiment::BwSelect,
        Experiment::Table1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Simulate => "simulate",
            Experiment::EstimateGrid => "estimate-grid",
            Experiment::McNormality => "mc-normality",
            Experiment::McMse => "mc-mse",
            Experiment::Equivalence => "equivalence",
            Experiment::Functional => "functional",
            Experiment::BwSelect => "bw-select",
            Experiment::Table1 => "table1",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == s.trim())
    }

    /// Keys this experiment reads, besides the common ones.
    fn keys(self) -> &'static [&'static str] {
        match self {
            Experiment::Simulate => &["n"],
            Experiment::EstimateGrid => &["n", "data", "alpha", "beta", "t_grid", "z_grid"],
            Experiment::McNormality => &[
                "estimator", "point", "n", "m", "alpha", "beta", "c1", "c2", "beta_exponent",
            ],
            Experiment::McMse => &["estimator", "point", "n", "m", "alpha", "beta"],
            Experiment::Equivalence => &["point", "n_grid", "c1", "c2", "beta_exponent", "envelope"],
            Experiment::Functional => &["n", "m", "alpha_rule"],
            Experiment::BwSelect => &[
                "n", "data", "point", "replications", "alpha0", "beta0", "alpha_grid", "beta_grid",
            ],
            Experiment::Table1 => &["points", "ns", "m", "alpha_grid", "beta_grid"],
        }
    }
}

const COMMON_KEYS: [&str; 8] = [
    "experiment",
    "scenario",
    "seed",
    "kernel",
    "mark_kernel",
    "g_floor",
    "mark_lower",
    "output",
];

/// Settings shared by every experiment.
struct Common {
    scenario: Box<dyn Scenario>,
    seed: u64,
    estimator: EstimatorConfig,
}

fn positive_count(config: &Config, key: &str, default: usize) -> Result<usize, HarnessError> {
    let v = config.parse_or::<usize>(key, default)?;
    if v == 0 {
        return Err(invalid(key, "must be positive"));
    }
    Ok(v)
}

fn positive(config: &Config, key: &str, default: f64) -> Result<f64, HarnessError> {
    let v = config.parse_or::<f64>(key, default)?;
    if !(v > 0.0 && v.is_finite()) {
        return Err(invalid(key, format!("must be positive, got {v}")));
    }
    Ok(v)
}

fn point(config: &Config, key: &str, default: (f64, f64)) -> Result<(f64, f64), HarnessError> {
    match config.points_or(key, vec![default])?[..] {
        [p] => Ok(p),
        _ => Err(invalid(key, "expected a single `t, z` point")),
    }
}

fn common(config: &Config) -> Result<Common, HarnessError> {
    let scenario = scenario_by_id(config.get("scenario").unwrap_or("B"))?;
    let seed = config.parse_or::<u64>("seed", 1)?;
    let k1 = UnivariateKernel::from_id(config.get("kernel").unwrap_or("epanechnikov"))?;
    let k2 = match config.get("mark_kernel") {
        Some(id) => UnivariateKernel::from_id(id)?,
        None => k1.clone(),
    };
    let g_floor = positive(config, "g_floor", DEFAULT_G_FLOOR)?;
    let mark_lower = config.parse_or::<f64>("mark_lower", f64::NEG_INFINITY)?;
    // bandwidths are replaced per experiment
    let placeholder = Bandwidths::new(0.1, 0.1)?;
    let estimator = EstimatorConfig::new(k1.clone(), BivariateKernel::product(k1, k2), placeholder)?
        .with_g_floor(g_floor)
        .with_mark_lower(mark_lower);
    Ok(Common {
        scenario,
        seed,
        estimator,
    })
}

fn check_keys(config: &Config, experiment: Experiment) -> Result<(), HarnessError> {
    for key in config.keys() {
        if !COMMON_KEYS.contains(&key) && !experiment.keys().contains(&key) {
            return Err(HarnessError::Config(ConfigError::Value {
                key: key.to_string(),
                line: config.line_of(key).unwrap_or(0),
                message: format!("not a setting of `{}`", experiment.name()),
            }));
        }
    }
    if let Some(e) = config.get("experiment") {
        if Experiment::from_name(e) != Some(experiment) {
            return Err(invalid(
                "experiment",
                format!("config is for `{e}`, invoked as `{}`", experiment.name()),
            ));
        }
    }
    Ok(())
}

/// Files produced by one run, as `(file name, contents)`.
pub struct Outputs {
    pub files: Vec<(String, String)>,
    /// Extra `key = value` lines for the manifest.
    pub notes: Vec<(String, String)>,
}

impl Outputs {
    fn new() -> Self {
        Outputs {
            files: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn file(mut self, name: &str, body: String) -> Self {
        self.files.push((name.to_string(), body));
        self
    }

    fn note(mut self, key: &str, value: impl ToString) -> Self {
        self.notes.push((key.to_string(), value.to_string()));
        self
    }
}

fn load_or_simulate(config: &Config, c: &Common, default_n: usize) -> Result<Sample, HarnessError> {
    match config.get("data") {
        Some(path) => {
            let f = fs::File::open(path).map_err(io(format!("opening {path}")))?;
            Ok(Sample::from_csv(BufReader::new(f))?)
        }
        None => {
            let n = positive_count(config, "n", default_n)?;
            Ok(sample(c.scenario.as_ref(), n, c.seed)?)
        }
    }
}

fn kind(config: &Config) -> Result<EstimatorKind, HarnessError> {
    Ok(EstimatorKind::parse(config.get("estimator").unwrap_or("F1"))?)
}

fn mse_csv(rows: &[MseEstimate]) -> String {
    let mut out = String::from("estimator,alpha,beta,mse,se,failures,replications\n");
    for r in rows {
        let beta = match r.kind {
            EstimatorKind::F1 => String::new(),
            EstimatorKind::F2 => r.bandwidths.beta.map(|b| b.to_string()).unwrap_or_default(),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.kind.as_str(),
            r.bandwidths.alpha,
            beta,
            r.mse,
            r.se,
            r.failures,
            r.replications
        );
    }
    out
}

fn default_n_grid() -> Vec<f64> {
    (0..=40).map(|i| 10f64.powf(3.0 + i as f64 * 0.05).round()).collect()
}

/// Runs `experiment` and returns its outputs without touching the disk.
pub fn execute(experiment: Experiment, config: &Config) -> Result<Outputs, HarnessError> {
    check_keys(config, experiment)?;
    let c = common(config)?;
    let scen = c.scenario.as_ref();
    match experiment {
        Experiment::Simulate => {
            let n = positive_count(config, "n", 1000)?;
            let s = sample(scen, n, c.seed)?;
            Ok(Outputs::new()
                .note("uncensored_fraction", s.fraction_uncensored())
                .file("sample.csv", s.to_csv()))
        }
        Experiment::EstimateGrid => {
            let s = load_or_simulate(config, &c, 1000)?;
            let bw = Bandwidths::new(positive(config, "alpha", 0.2)?, positive(config, "beta", 0.1)?)?;
            let ts = config.list_or("t_grid", (1..=9).map(|i| i as f64 / 10.0).collect())?;
            let zs = config.list_or("z_grid", (1..=9).map(|i| i as f64 / 10.0).collect())?;
            let cfg = c.estimator.with_bandwidths(bw);
            Ok(Outputs::new().file("grid.csv", grid_csv(&s, &cfg, &ts, &zs)))
        }
        Experiment::McNormality => {
            let kind = kind(config)?;
            let p = point(config, "point", (0.5, 0.5))?;
            let n = positive_count(config, "n", 5000)?;
            let m = positive_count(config, "m", 1000)?;
            let spec = if config.get("c1").is_some() {
                BandwidthSpec::Schedule(BandwidthSchedule::new(
                    positive(config, "c1", 0.5)?,
                    positive(config, "c2", 0.5)?,
                    config.parse_or("beta_exponent", 0.2)?,
                )?)
            } else {
                BandwidthSpec::Fixed(Bandwidths::new(
                    positive(config, "alpha", 0.09)?,
                    positive(config, "beta", 0.029)?,
                )?)
            };
            let s = mc_normality(scen, kind, p, n, m, &spec, &c.estimator, c.seed)?;
            Ok(Outputs::new()
                .note("failures", s.failures)
                .note("mean", s.mean)
                .note("variance", s.variance)
                .file("statistics.csv", s.values_csv())
                .file("summary.csv", s.summary_csv())
                .file("qq.csv", s.qq_csv()))
        }
        Experiment::McMse => {
            let kind = kind(config)?;
            let p = point(config, "point", (0.4, 0.4))?;
            let n = positive_count(config, "n", 5000)?;
            let m = positive_count(config, "m", 250)?;
            let bw = Bandwidths::new(positive(config, "alpha", 0.15)?, positive(config, "beta", 0.1)?)?;
            let cfg = c.estimator.with_bandwidths(bw);
            let est = mc_mse(scen, kind, p, n, m, &cfg, c.seed)?;
            Ok(Outputs::new().file("mse.csv", mse_csv(&[est])))
        }
        Experiment::Equivalence => {
            let p = point(config, "point", (0.5, 0.5))?;
            let grid = config.list_or("n_grid", default_n_grid())?;
            if grid.iter().any(|&n| !(n >= 1.0 && n.fract() == 0.0)) {
                return Err(invalid("n_grid", "sizes must be positive integers"));
            }
            let grid: Vec<usize> = grid.into_iter().map(|n| n as usize).collect();
            let schedule = BandwidthSchedule::new(
                positive(config, "c1", 0.5)?,
                positive(config, "c2", 0.5)?,
                config.parse_or("beta_exponent", 1.0 / 3.0)?,
            )?;
            let envelope = positive(config, "envelope", EQUIVALENCE_ENVELOPE)?;
            let curve = equivalence_curve(scen, p, &grid, &schedule, &c.estimator, envelope, c.seed)?;
            let summary = format!(
                "sizes,fraction_inside,envelope_constant\n{},{},{}\n",
                curve.points.len(),
                curve.fraction_inside,
                envelope
            );
            Ok(Outputs::new()
                .file("equivalence.csv", curve.to_csv())
                .file("equivalence_summary.csv", summary))
        }
        Experiment::Functional => {
            let n = positive_count(config, "n", 10_000)?;
            let m = positive_count(config, "m", 500)?;
            let rule = match config.get("alpha_rule").unwrap_or("third") {
                "third" => AlphaRule::NegThird,
                "fifth" => AlphaRule::NegFifth,
                other => match other.parse::<f64>() {
                    Ok(p) if p > 0.0 && p < 1.0 => AlphaRule::Exponent(p),
                    _ => return Err(invalid("alpha_rule", "expected `third`, `fifth` or an exponent in (0, 1)")),
                },
            };
            let s = mc_functional(scen, n, m, rule, c.seed)?;
            let summary = format!(
                "m,mean_scaled_error,variance,efficient_variance,variance_ratio,failures,fallbacks\n{},{},{},{},{},{},{}\n",
                s.m, s.mean, s.variance, s.efficient_variance, s.variance_ratio, s.failures, s.fallbacks
            );
            Ok(Outputs::new()
                .file("functional.csv", s.to_csv())
                .file("functional_summary.csv", summary))
        }
        Experiment::BwSelect => {
            let data = load_or_simulate(config, &c, 100)?;
            let truth = config.get("data").is_none().then_some(scen);
            let pilot = default_pilot(data.len());
            let plan = BootstrapPlan::new(
                positive(config, "alpha0", pilot)?,
                positive(config, "beta0", pilot)?,
                positive_count(config, "replications", 500)?,
                config.list_or("alpha_grid", default_alpha_grid())?,
                config.list_or("beta_grid", default_beta_grid())?,
                point(config, "point", (0.5, 0.5))?,
                c.seed,
            )?;
            let table = bootstrap_mse(&data, &plan, &c.estimator, scen.support(), truth)?;
            let mut chosen = String::from("estimator,alpha,beta,mse_hat\n");
            for kind in [EstimatorKind::F1, EstimatorKind::F2] {
                let r = select(&table.rows, kind)?;
                let beta = r.beta.map(|b| b.to_string()).unwrap_or_default();
                let _ = writeln!(chosen, "{},{},{},{}", kind.as_str(), r.alpha, beta, r.mse_hat);
            }
            Ok(Outputs::new()
                .note("pilot_value", table.pilot_value)
                .note("envelope_refreshes", table.envelope_refreshes)
                .file("bootstrap.csv", table.to_csv())
                .file("selection.csv", chosen))
        }
        Experiment::Table1 => table1(config, &c),
    }
}

fn table1(config: &Config, c: &Common) -> Result<Outputs, HarnessError> {
    let points = config.points_or("points", vec![(0.4, 0.4), (0.6, 0.6)])?;
    let ns = config.list_or("ns", vec![500.0, 1000.0, 5000.0, 10000.0])?;
    if ns.iter().any(|&n| !(n >= 1.0 && n.fract() == 0.0)) {
        return Err(invalid("ns", "sizes must be positive integers"));
    }
    let m = positive_count(config, "m", 250)?;
    let alphas = config.list_or("alpha_grid", (1..=8).map(|i| i as f64 * 0.05).collect())?;
    let betas = config.list_or("beta_grid", (1..=5).map(|i| i as f64 * 0.05).collect())?;
    if alphas.is_empty() || betas.is_empty() {
        return Err(invalid("alpha_grid", "bandwidth grids must be nonempty"));
    }
    let mut candidates = Vec::new();
    for &a in &alphas {
        candidates.push((EstimatorKind::F1, Bandwidths::time_only(a)?));
    }
    for &a in &alphas {
        for &b in &betas {
            candidates.push((EstimatorKind::F2, Bandwidths::new(a, b)?));
        }
    }

    let mut out = String::from("point,n,estimator,alpha,beta,mse,se\n");
    let mut failed = 0;
    for &p in &points {
        for &n in &ns {
            let n = n as usize;
            let rows = mc_mse_grid(c.scenario.as_ref(), p, n, m, &c.estimator, &candidates, c.seed);
            for kind in [EstimatorKind::F1, EstimatorKind::F2] {
                let best = rows.as_ref().ok().and_then(|rows| {
                    rows.iter()
                        .filter(|r| r.kind == kind && r.mse.is_finite())
                        .filter(|r| check_failure_rate(r.failures, r.replications).is_ok())
                        .min_by(|a, b| {
                            a.mse
                                .total_cmp(&b.mse)
                                .then(a.bandwidths.alpha.total_cmp(&b.bandwidths.alpha))
                        })
                });
                let cell = format!("\"{},{}\",{},{}", p.0, p.1, n, kind.as_str());
                match best {
                    Some(r) => {
                        let beta = match kind {
                            EstimatorKind::F1 => String::new(),
                            EstimatorKind::F2 => r.bandwidths.beta.map(|b| b.to_string()).unwrap_or_default(),
                        };
                        let _ = writeln!(out, "{cell},{},{beta},{},{}", r.bandwidths.alpha, r.mse, r.se);
                    }
                    None => {
                        failed += 1;
                        let _ = writeln!(out, "{cell},,,,");
                    }
                }
            }
        }
    }
    Ok(Outputs::new().note("failed_cells", failed).file("table1.csv", out))
}

/// Runs the experiment and writes its files plus `manifest.txt` to `out`.
pub fn run(experiment: Experiment, config: &Config, out: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    let outputs = execute(experiment, config)?;
    fs::create_dir_all(out).map_err(io(format!("creating {}", out.display())))?;
    let mut written = Vec::new();
    for (name, body) in &outputs.files {
        let path = out.join(name);
        fs::write(&path, body).map_err(io(format!("writing {}", path.display())))?;
        written.push(path);
    }
    let mut manifest = format!(
        "tool = csmark {VERSION}\nexperiment = {}\nseed = {}\noutputs = {}\n",
        experiment.name(),
        config.parse_or::<u64>("seed", 1)?,
        outputs
            .files
            .iter()
            .map(|(n, _)| n.as_str())
            .collect::<Vec<_>>()
            .join(", ")
    );
    for (k, v) in &outputs.notes {
        let _ = writeln!(manifest, "{k} = {v}");
    }
    manifest.push_str("\n# configuration\n");
    manifest.push_str(&config.to_text());
    let path = out.join("manifest.txt");
    fs::write(&path, manifest).map_err(io(format!("writing {}", path.display())))?;
    written.push(path);
    Ok(written)
}
