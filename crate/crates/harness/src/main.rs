use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use csmark_harness::{run, Config, Experiment};

#[derive(Parser)]
#[command(name = "csmark", version, about = "Current status continuous mark experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Flat `key = value` configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Base seed; overrides the config
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory; overrides `output` in the config (default `out`)
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads (results do not depend on this)
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Draw one censored sample
    Simulate,
    /// Evaluate F1, F2 and the density on a grid
    EstimateGrid,
    /// Monte Carlo check of asymptotic normality
    McNormality,
    /// Monte Carlo mean squared error at a point
    McMse,
    /// Difference between the two estimators across sample sizes
    Equivalence,
    /// Mean functional against its information bound
    Functional,
    /// Smoothed-bootstrap bandwidth selection
    BwSelect,
    /// Minimum-MSE cells over bandwidth grids
    Table1,
}

impl Command {
    fn experiment(self) -> Experiment {
        match self {
            Command::Simulate => Experiment::Simulate,
            Command::EstimateGrid => Experiment::EstimateGrid,
            Command::McNormality => Experiment::McNormality,
            Command::McMse => Experiment::McMse,
            Command::Equivalence => Experiment::Equivalence,
            Command::Functional => Experiment::Functional,
            Command::BwSelect => Experiment::BwSelect,
            Command::Table1 => Experiment::Table1,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let text = match &cli.config {
        Some(path) => match fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("error: reading {}: {e}", path.display());
                return ExitCode::from(2);
            }
        },
        None => String::new(),
    };
    let mut config = match Config::parse(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: configuration: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(seed) = cli.seed {
        config.set("seed", &seed.to_string());
    }
    let out = cli
        .out
        .clone()
        .or_else(|| config.get("output").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(2);
        }
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(1);
        }
    };

    let experiment = cli.command.experiment();
    match pool.install(|| run(experiment, &config, &out)) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
