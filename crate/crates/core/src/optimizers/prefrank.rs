use std::collections::VecDeque;

use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{meta, Method, RunResult, RunState, StopCriteria, TerminationReason};
use crate::benchmark::{FunctionId, Objective, Problem, ProblemSpec};
use crate::error::{Error, Result};
use crate::evolution::{breed, elites, init_population, FitnessRecord, Individual, PopulationConfig};
use crate::kernel::KernelSpec;
use crate::ordinal::{train_ordinal, OrdinalConfig, PairStrategy, RankingModel};

/// Where the initial training points are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainingSampling {
    /// Normal distribution around the function's known optimum.
    OptimumCentered,
    /// Normal distribution around the mean of the initial population.
    PopulationCentered,
}

impl TrainingSampling {
    pub fn name(self) -> &'static str {
        match self {
            TrainingSampling::OptimumCentered => "optimum_centered",
            TrainingSampling::PopulationCentered => "population_centered",
        }
    }
}

impl std::str::FromStr for TrainingSampling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "optimum_centered" | "origin" => Ok(TrainingSampling::OptimumCentered),
            "population_centered" | "population" => Ok(TrainingSampling::PopulationCentered),
            other => Err(Error::InvalidArgument(format!("unknown sampling mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrefRankConfig {
    pub population: PopulationConfig,
    pub kernel: KernelSpec,
    pub c: f64,
    /// Initial training set size, also the length of the sliding training window.
    pub training_size: usize,
    /// Generations between surrogate validations; `usize::MAX` never updates.
    pub validation_period: usize,
    /// Kernel used once the population has contracted.
    pub zoom_kernel: Option<KernelSpec>,
    /// Zoom in once every coordinate's population std falls below this
    /// fraction of its range.
    pub zoom_threshold: f64,
    pub sampling: TrainingSampling,
    /// Standard deviation of the initial training distribution.
    pub sampling_std: f64,
    pub strategy: PairStrategy,
}

impl PrefRankConfig {
    /// Defaults with the kernel suited to the problem's function.
    pub fn for_problem(spec: &ProblemSpec) -> Self {
        let kernel = match spec.function {
            FunctionId::Sphere | FunctionId::Ellipsoidal | FunctionId::Schwefel => KernelSpec::polynomial(2),
            FunctionId::Rosenbrock => KernelSpec::polynomial(4),
            FunctionId::Rastrigin => KernelSpec::gaussian(0.01),
        };
        PrefRankConfig {
            population: PopulationConfig::for_dimension(spec.dimension),
            kernel,
            c: 1.0e6,
            training_size: 60,
            validation_period: 2,
            zoom_kernel: Some(KernelSpec::gaussian(0.01)),
            zoom_threshold: 0.01,
            sampling: TrainingSampling::PopulationCentered,
            sampling_std: 1.0,
            strategy: PairStrategy::Adjacent,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.population.validate()?;
        self.kernel.validate()?;
        if let Some(k) = &self.zoom_kernel {
            k.validate()?;
        }
        if !(self.c > 0.0) || self.training_size < 2 || self.validation_period == 0 {
            return Err(Error::InvalidArgument(
                "PrefRank needs C > 0, training size ≥ 2 and validation period ≥ 1".into(),
            ));
        }
        if !(self.zoom_threshold >= 0.0) || !(self.sampling_std > 0.0) {
            return Err(Error::InvalidArgument(
                "zoom threshold must be ≥ 0 and sampling std > 0".into(),
            ));
        }
        Ok(())
    }

    fn ordinal(&self) -> OrdinalConfig {
        OrdinalConfig {
            c: self.c,
            strategy: self.strategy,
            ..OrdinalConfig::default()
        }
    }
}

fn rescore(pop: &mut [Individual], model: &RankingModel) {
    for ind in pop.iter_mut() {
        ind.fitness = Some(FitnessRecord::surrogate(-model.score(&ind.genome)));
    }
}

fn contracted(pop: &[Individual], spec: &ProblemSpec, threshold: f64) -> bool {
    let n = pop.len() as f64;
    (0..spec.dimension).all(|d| {
        let mean = pop.iter().map(|i| i.genome[d]).sum::<f64>() / n;
        let var = pop.iter().map(|i| (i.genome[d] - mean).powi(2)).sum::<f64>() / n;
        var.sqrt() < threshold * spec.range(d)
    })
}

/// GA whose selection is driven by a kernel ordinal-regression ranking.
///
/// The surrogate only orders candidates (fitness = −score). Every
/// `validation_period` generations the top-ranked unevaluated member is truly
/// evaluated, its rank error against the truly evaluated set is recorded, and
/// the model is retrained on a sliding window of the latest true evaluations.
pub fn run_prefrank(spec: &ProblemSpec, cfg: &PrefRankConfig, stop: &StopCriteria, seed: u64) -> Result<RunResult> {
    let mut problem = Problem::new(spec.clone(), seed)?;
    run_prefrank_on(&mut problem, cfg, stop, seed)
}

pub fn run_prefrank_on<O: Objective + ?Sized>(
    objective: &mut O,
    cfg: &PrefRankConfig,
    stop: &StopCriteria,
    seed: u64,
) -> Result<RunResult> {
    cfg.validate()?;
    let mut state = RunState::new(objective, stop)?;
    let spec = state.spec();
    let pc = &cfg.population;
    let ocfg = cfg.ordinal();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut pop = init_population(&spec, pc.population_size, &mut rng);
    let center: Vec<f64> = match cfg.sampling {
        TrainingSampling::OptimumCentered => spec.known_optimum().0,
        TrainingSampling::PopulationCentered => (0..spec.dimension)
            .map(|d| pop.iter().map(|i| i.genome[d]).sum::<f64>() / pop.len() as f64)
            .collect(),
    };
    let normal = Normal::new(0.0, cfg.sampling_std).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut window: VecDeque<(Vec<f64>, f64)> = VecDeque::with_capacity(cfg.training_size + 1);
    for _ in 0..cfg.training_size {
        let mut x: Vec<f64> = center.iter().map(|c| c + normal.sample(&mut rng)).collect();
        spec.clamp(&mut x);
        let Some(v) = state.evaluate(&x)? else { break };
        window.push_back((x, v));
    }
    if window.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "budget leaves {} initial training points; at least 2 are needed",
            window.len()
        )));
    }

    let train = |window: &VecDeque<(Vec<f64>, f64)>, kernel: KernelSpec| {
        let (x, y): (Vec<Vec<f64>>, Vec<f64>) = window.iter().cloned().unzip();
        train_ordinal(&x, &y, kernel, &ocfg)
    };
    let mut kernel = cfg.kernel;
    let mut model = train(&window, kernel)?;
    rescore(&mut pop, &model);
    state.record(0, &pop, None, None, false);

    let mut generation = 0;
    let mut zoomed_at = None;
    let mut validations = 0usize;
    let mut rank_error_sum = 0.0;
    let mut retrain_failures = 0usize;
    while generation < pc.max_generations && state.halted().is_none() {
        generation += 1;
        state.ledger.set_generation(generation);
        let mut next = elites(&pop, pc.elite_count)?;
        let carried = next.first().map(|e| e.genome.clone());
        let children = breed(&pop, &spec, pc, pc.population_size - next.len(), &mut rng)?;
        next.extend(children.into_iter().map(Individual::new));
        pop = next;
        rescore(&mut pop, &model);

        let mut retrained = false;
        if generation % cfg.validation_period == 0 {
            let order = model.rank(&pop.iter().map(|i| i.genome.as_slice()).collect::<Vec<_>>());
            let archive = state.ledger.archive();
            let pick = order
                .into_iter()
                .find(|&i| archive.iter().all(|e| e.point != pop[i].genome));
            if let Some(pick) = pick {
                let x = pop[pick].genome.clone();
                let Some(v) = state.evaluate(&x)? else { break };
                let s = model.score(&x);
                let estimated = window.iter().filter(|(p, _)| model.score(p) > s).count();
                let actual = window.iter().filter(|(_, y)| *y < v).count();
                rank_error_sum += estimated.abs_diff(actual) as f64;
                validations += 1;

                window.push_back((x, v));
                if window.len() > cfg.training_size {
                    window.pop_front();
                }
                if zoomed_at.is_none() {
                    if let Some(zk) = cfg.zoom_kernel {
                        if contracted(&pop, &spec, cfg.zoom_threshold) {
                            kernel = zk;
                            zoomed_at = Some(generation);
                        }
                    }
                }
                match train(&window, kernel) {
                    Ok(m) => {
                        model = m;
                        retrained = true;
                        rescore(&mut pop, &model);
                    }
                    Err(e) => {
                        warn!("ranking model retraining failed ({e}); keeping the previous model");
                        retrain_failures += 1;
                    }
                }
            }
        }
        let best_predicted = pop.iter().map(|i| i.fitness.unwrap().value).reduce(f64::min);
        state.record(generation, &pop, best_predicted, carried, retrained);
    }

    let termination = state.halted().unwrap_or(TerminationReason::MaxGenerations);
    let metadata = vec![
        meta("sampling", cfg.sampling.name()),
        meta("kernel", cfg.kernel),
        meta(
            "zoom_generation",
            zoomed_at.map_or_else(|| "none".to_string(), |g| g.to_string()),
        ),
        meta("validations", validations),
        meta(
            "mean_rank_error",
            if validations > 0 {
                format!("{:.3}", rank_error_sum / validations as f64)
            } else {
                "none".to_string()
            },
        ),
        meta("retrain_failures", retrain_failures),
    ];
    state.finish(Method::PrefRank, None, &pop, generation, termination, metadata)
}
