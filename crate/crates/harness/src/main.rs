use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use saea_harness::runner::describe;
use saea_harness::{run_experiment, write_outputs, ExperimentConfig, HarnessError, Settings};

#[derive(Parser)]
#[command(
    name = "saea",
    version,
    about = "Replicated experiments with surrogate-assisted genetic algorithms"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one method on one function (lists are accepted too).
    Run(Overrides),
    /// Run the full grid described by a config file (--config is required).
    Grid(Overrides),
}

/// Every flag maps onto a config key and wins over the file.
#[derive(Args, Default)]
struct Overrides {
    /// canonical, dafhea, dafhea2 or prefrank (comma list allowed)
    #[arg(long)]
    method: Option<String>,
    /// sphere, ellipsoidal, schwefel, rosenbrock or rastrigin (comma list allowed)
    #[arg(long)]
    function: Option<String>,
    /// Problem dimension (comma list allowed)
    #[arg(long)]
    dim: Option<String>,
    /// Add N(0, 1) observation noise
    #[arg(long)]
    noisy: bool,
    #[arg(long)]
    generations: Option<usize>,
    #[arg(long)]
    replicates: Option<usize>,
    /// Base seed; replicate r uses seed + r
    #[arg(long)]
    seed: Option<u64>,
    /// True-evaluation budget per run
    #[arg(long)]
    budget: Option<usize>,
    /// Stop a run once its clean-scored best reaches this value
    #[arg(long)]
    target: Option<f64>,
    /// Config file read before the flags are applied
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv, markdown or both
    #[arg(long)]
    format: Option<String>,
    /// Any config assignment, e.g. --set dafhea.training_window=80
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Overrides {
    fn settings(&self) -> Result<Settings, HarnessError> {
        let mut s = Settings::new();
        let pairs: [(&str, Option<String>); 11] = [
            ("methods", self.method.clone()),
            ("functions", self.function.clone()),
            ("dims", self.dim.clone()),
            ("noisy", self.noisy.then(|| "true".to_string())),
            ("generations", self.generations.map(|v| v.to_string())),
            ("replicates", self.replicates.map(|v| v.to_string())),
            ("seed", self.seed.map(|v| v.to_string())),
            ("budget", self.budget.map(|v| v.to_string())),
            ("target", self.target.map(|v| v.to_string())),
            ("out", self.out.as_ref().map(|p| p.display().to_string())),
            ("format", self.format.clone()),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                s.set(key, &v);
            }
        }
        for assignment in &self.set {
            let (k, v) = assignment
                .split_once('=')
                .ok_or_else(|| HarnessError::Config(format!("--set expects KEY=VALUE, got '{assignment}'")))?;
            s.set(k.trim(), v.trim());
        }
        Ok(s)
    }
}

fn resolve(file: Option<&PathBuf>, overrides: &Overrides) -> Result<ExperimentConfig, HarnessError> {
    let mut settings = match file {
        Some(path) => Settings::load(path)?,
        None => Settings::new(),
    };
    settings.extend(&overrides.settings()?);
    ExperimentConfig::from_settings(&settings)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let cfg = match &cli.command {
        Command::Run(o) => resolve(o.config.as_ref(), o),
        Command::Grid(o) => match &o.config {
            Some(path) => resolve(Some(path), o),
            None => Err(HarnessError::Config("grid needs --config FILE".into())),
        },
    };
    let cfg = match cfg {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };

    let output = run_experiment(&cfg);
    for row in &output.rows {
        println!("{}", describe(row));
    }
    match write_outputs(&cfg, &output) {
        Ok(paths) => {
            for p in paths {
                println!("wrote {}", p.display());
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    if output.is_complete() {
        ExitCode::SUCCESS
    } else {
        let failed = output.failures().count();
        eprintln!("{failed} replicate(s) failed; see failures.txt");
        ExitCode::from(2)
    }
}
