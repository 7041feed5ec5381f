//! Experiment configuration.
//!
//! The file format is one `key = value` pair per line. Blank lines are
//! ignored and `#` starts a comment that runs to the end of the line. Later
//! assignments to a key replace earlier ones, which is also how command-line
//! flags override the file. Recognised keys:
//!
//! | key           | value                                              | default   |
//! |---------------|----------------------------------------------------|-----------|
//! | `methods`     | comma list of `canonical`, `dafhea`, `dafhea2`, `prefrank` | required |
//! | `functions`   | comma list of `sphere`, `ellipsoidal`, `schwefel`, `rosenbrock`, `rastrigin` | required |
//! | `dims`        | comma list of dimensions                           | required  |
//! | `noisy`       | `false`, `true` or `both`                          | `false`   |
//! | `replicates`  | runs per cell                                      | `10`      |
//! | `seed`        | base seed; replicate `r` runs with `seed + r`      | `0`       |
//! | `generations` | generation limit for every method                  | method default |
//! | `budget`      | true-evaluation budget per run                     | none      |
//! | `target`      | stop once the clean-scored best reaches this value | none      |
//! | `out`         | output directory                                   | `results` |
//! | `format`      | `csv`, `markdown` or `both`                        | `both`    |
//!
//! Keys of the form `<method>.<parameter>` override one parameter of one
//! method, e.g. `dafhea.training_window = 80` (see [`apply_override`]).

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use saea_core::control::ProbeScale;
use saea_core::optimizers::{Method, MethodConfig, ResidualThreshold, TrainingSampling, TrainingSelection};
use saea_core::{FunctionId, NoiseSpec, ProblemSpec};

use crate::error::{HarnessError, Result};

/// Raw `key = value` assignments in the order they were made.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    entries: Vec<(String, String)>,
}

impl Settings {
    pub fn new() -> Self {
        Settings::default()
    }

    /// Parses the flat config format; `origin` names the source in errors.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut settings = Settings::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(HarnessError::Syntax {
                    origin: origin.to_string(),
                    line: i + 1,
                    message: format!("expected `key = value`, found `{line}`"),
                });
            };
            let key = key.trim();
            if key.is_empty() {
                return Err(HarnessError::Syntax {
                    origin: origin.to_string(),
                    line: i + 1,
                    message: "empty key".into(),
                });
            }
            settings.set(key, value.trim());
        }
        Ok(settings)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Settings::parse(&text, &path.display().to_string())
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    /// Appends every assignment of `other`, so its values win.
    pub fn extend(&mut self, other: &Settings) {
        self.entries.extend(other.entries.iter().cloned());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .rev()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(k, _)| k.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    Csv,
    Markdown,
    #[default]
    Both,
}

impl FromStr for ReportFormat {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            "both" => Ok(ReportFormat::Both),
            other => Err(HarnessError::config(format!("unknown report format '{other}'"))),
        }
    }
}

/// One (method, function, dimension, noise) combination of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub method: Method,
    pub function: FunctionId,
    pub dimension: usize,
    pub noisy: bool,
}

impl Cell {
    pub fn spec(&self) -> Result<ProblemSpec> {
        let spec = ProblemSpec::new(self.function, self.dimension)?;
        Ok(if self.noisy {
            spec.with_noise(NoiseSpec::default())?
        } else {
            spec
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodOverride {
    pub method: Method,
    pub key: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub cells: Vec<Cell>,
    pub replicates: usize,
    pub base_seed: u64,
    pub generations: Option<usize>,
    pub budget: Option<usize>,
    pub target: Option<f64>,
    pub overrides: Vec<MethodOverride>,
    pub out: PathBuf,
    pub format: ReportFormat,
}

const GLOBAL_KEYS: [&str; 11] = [
    "methods",
    "functions",
    "dims",
    "noisy",
    "replicates",
    "seed",
    "generations",
    "budget",
    "target",
    "out",
    "format",
];

fn list<T>(settings: &Settings, key: &str, parse: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    let raw = settings
        .get(key)
        .ok_or_else(|| HarnessError::config(format!("missing required key '{key}'")))?;
    let items = raw
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(parse)
        .collect::<Result<Vec<T>>>()?;
    if items.is_empty() {
        return Err(HarnessError::config(format!("'{key}' is empty")));
    }
    Ok(items)
}

fn number<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| HarnessError::config(format!("'{key}': cannot parse '{value}'")))
}

fn optional<T: FromStr>(settings: &Settings, key: &str) -> Result<Option<T>> {
    match settings.get(key) {
        None => Ok(None),
        Some(v) if v.eq_ignore_ascii_case("none") => Ok(None),
        Some(v) => number(key, v).map(Some),
    }
}

impl ExperimentConfig {
    /// Builds and validates a configuration; every key, method, function and
    /// override is checked before anything runs.
    pub fn from_settings(settings: &Settings) -> Result<Self> {
        for key in settings.keys() {
            if !GLOBAL_KEYS.contains(&key) && !key.contains('.') {
                return Err(HarnessError::config(format!("unknown key '{key}'")));
            }
        }
        let methods = list(settings, "methods", |s| Ok(s.parse::<Method>()?))?;
        let functions = list(settings, "functions", |s| Ok(s.parse::<FunctionId>()?))?;
        let dims = list(settings, "dims", |s| {
            let n: usize = number("dims", s)?;
            if n == 0 {
                return Err(HarnessError::config("dimensions must be ≥ 1"));
            }
            Ok(n)
        })?;
        let noise_levels: Vec<bool> = match settings.get("noisy").unwrap_or("false").to_ascii_lowercase().as_str() {
            "false" | "no" | "0" => vec![false],
            "true" | "yes" | "1" => vec![true],
            "both" => vec![false, true],
            other => {
                return Err(HarnessError::config(format!(
                    "'noisy' must be false, true or both, got '{other}'"
                )))
            }
        };

        let mut cells = Vec::new();
        for &method in &methods {
            for &function in &functions {
                for &dimension in &dims {
                    for &noisy in &noise_levels {
                        cells.push(Cell {
                            method,
                            function,
                            dimension,
                            noisy,
                        });
                    }
                }
            }
        }

        let replicates = optional(settings, "replicates")?.unwrap_or(10);
        if replicates == 0 {
            return Err(HarnessError::config("replicates must be ≥ 1"));
        }
        let budget: Option<usize> = optional(settings, "budget")?;
        if budget == Some(0) {
            return Err(HarnessError::config("budget must be ≥ 1"));
        }
        let target: Option<f64> = optional(settings, "target")?;
        if target.is_some_and(f64::is_nan) {
            return Err(HarnessError::config("target must be a number"));
        }

        let mut overrides = Vec::new();
        for (key, value) in &settings.entries {
            let Some((method, param)) = key.split_once('.') else {
                continue;
            };
            let method: Method = method
                .parse()
                .map_err(|_| HarnessError::config(format!("'{key}': unknown method '{method}'")))?;
            overrides.push(MethodOverride {
                method,
                key: param.to_string(),
                value: value.clone(),
            });
        }

        let cfg = ExperimentConfig {
            cells,
            replicates,
            base_seed: optional(settings, "seed")?.unwrap_or(0),
            generations: optional(settings, "generations")?,
            budget,
            target,
            overrides,
            out: PathBuf::from(settings.get("out").unwrap_or("results")),
            format: settings.get("format").map_or(Ok(ReportFormat::Both), str::parse)?,
        };
        for cell in &cfg.cells {
            cfg.method_config(cell)?;
        }
        Ok(cfg)
    }

    /// Seed of replicate `r`; identical across cells.
    pub fn seed(&self, replicate: usize) -> u64 {
        self.base_seed.wrapping_add(replicate as u64)
    }

    /// Fully resolved optimizer configuration for `cell`.
    pub fn method_config(&self, cell: &Cell) -> Result<MethodConfig> {
        let spec = cell.spec()?;
        let mut cfg = MethodConfig::defaults(cell.method, &spec);
        if let Some(g) = self.generations {
            cfg.population_mut().max_generations = g;
        }
        for o in self.overrides.iter().filter(|o| o.method == cell.method) {
            apply_override(&mut cfg, &o.key, &o.value)?;
        }
        match &cfg {
            MethodConfig::Canonical(c) => c.validate()?,
            MethodConfig::Dafhea(c) => c.validate()?,
            MethodConfig::Dafhea2(c) => c.validate()?,
            MethodConfig::PrefRank(c) => c.validate()?,
        }
        Ok(cfg)
    }
}

/// Sets one named parameter. Every method accepts the population keys
/// `generations`, `population`, `oversampling`, `recombination_rate`,
/// `mutation_rate`, `mutation_scale`, `tournament_size`, `elite_count` and
/// `blend_alpha`. Method-specific keys:
///
/// * `dafhea`: `svr_c`, `svr_epsilon`, `svr_tolerance`, `clusters`,
///   `training_window`, `training_selection` (`recent` | `best`),
///   `retune_period`, `rho_sigma`, `rho_distance`, `rho_sparseness`,
///   `neighbours`, `delta_threshold`, `expansion_steps`, `probe_fraction`
/// * `dafhea2`: `svr_c`, `svr_epsilon`, `svr_tolerance`, `max_models`,
///   `residual_mad`, `residual_absolute`, `min_subset`, `retrain_period`,
///   `offspring`, `training_window`
/// * `prefrank`: `c`, `training_size`, `validation_period` (`never` allowed),
///   `sampling`, `sampling_std`, `zoom_threshold`
pub fn apply_override(cfg: &mut MethodConfig, key: &str, value: &str) -> Result<()> {
    let pop = cfg.population_mut();
    let handled = match key {
        "generations" => {
            pop.max_generations = number(key, value)?;
            true
        }
        "population" => {
            pop.population_size = number(key, value)?;
            true
        }
        "oversampling" => {
            pop.oversampling = number(key, value)?;
            true
        }
        "recombination_rate" => {
            pop.recombination_rate = number(key, value)?;
            true
        }
        "mutation_rate" => {
            pop.mutation_rate = number(key, value)?;
            true
        }
        "mutation_scale" => {
            pop.mutation_scale = number(key, value)?;
            true
        }
        "tournament_size" => {
            pop.tournament_size = number(key, value)?;
            true
        }
        "elite_count" => {
            pop.elite_count = number(key, value)?;
            true
        }
        "blend_alpha" => {
            pop.blend_alpha = number(key, value)?;
            true
        }
        _ => false,
    };
    if handled {
        return Ok(());
    }
    let method = cfg.method();
    let unknown = || HarnessError::config(format!("'{method}.{key}' is not a known parameter"));
    match cfg {
        MethodConfig::Canonical(_) => return Err(unknown()),
        MethodConfig::Dafhea(c) => match key {
            "svr_c" => c.svr.c = number(key, value)?,
            "svr_epsilon" => c.svr.epsilon = number(key, value)?,
            "svr_tolerance" => c.svr.tolerance = number(key, value)?,
            "clusters" => c.initial_clusters = Some(number(key, value)?),
            "training_window" => c.training_window = Some(number(key, value)?),
            "training_selection" => {
                c.training_selection = match value.trim() {
                    "recent" => TrainingSelection::Recent,
                    "best" => TrainingSelection::Best,
                    other => return Err(HarnessError::config(format!("'{key}': unknown selection '{other}'"))),
                }
            }
            "retune_period" => c.retune_period = number(key, value)?,
            "rho_sigma" => c.merit.rho_sigma = number(key, value)?,
            "rho_distance" => c.merit.rho_distance = number(key, value)?,
            "rho_sparseness" => c.merit.rho_sparseness = number(key, value)?,
            "neighbours" => c.update.k = number(key, value)?,
            "delta_threshold" => c.update.delta_threshold = number(key, value)?,
            "expansion_steps" => c.update.max_expansion_steps = number(key, value)?,
            "probe_fraction" => c.update.probe_scale = ProbeScale::DomainFraction(number(key, value)?),
            _ => return Err(unknown()),
        },
        MethodConfig::Dafhea2(c) => match key {
            "svr_c" => c.models.svr.c = number(key, value)?,
            "svr_epsilon" => c.models.svr.epsilon = number(key, value)?,
            "svr_tolerance" => c.models.svr.tolerance = number(key, value)?,
            "max_models" => c.models.max_models = number(key, value)?,
            "residual_mad" => c.models.threshold = ResidualThreshold::MadMultiple(number(key, value)?),
            "residual_absolute" => c.models.threshold = ResidualThreshold::Absolute(number(key, value)?),
            "min_subset" => c.models.min_subset = number(key, value)?,
            "retrain_period" => c.retrain_period = number(key, value)?,
            "offspring" => c.offspring = Some(number(key, value)?),
            "training_window" => c.training_window = Some(number(key, value)?),
            _ => return Err(unknown()),
        },
        MethodConfig::PrefRank(c) => match key {
            "c" => c.c = number(key, value)?,
            "training_size" => c.training_size = number(key, value)?,
            "validation_period" => {
                c.validation_period = if value.trim() == "never" {
                    usize::MAX
                } else {
                    number(key, value)?
                }
            }
            "sampling" => c.sampling = value.parse::<TrainingSampling>()?,
            "sampling_std" => c.sampling_std = number(key, value)?,
            "zoom_threshold" => c.zoom_threshold = number(key, value)?,
            _ => return Err(unknown()),
        },
    }
    Ok(())
}
