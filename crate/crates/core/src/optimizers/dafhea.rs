use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{evaluate_all, meta, Method, RunResult, RunState, StopCriteria, TerminationReason};
use crate::benchmark::{Objective, Problem, ProblemSpec};
use crate::control::{
    assign_merit, form_clusters, targeted_update, value_std, ArchiveEntry, EvaluationLedger, MeritWeights, ProbeScale,
    UpdatePolicy,
};
use crate::error::{Error, Result};
use crate::evolution::{breed, init_oversampled, select_top, FitnessRecord, Individual, PopulationConfig};
use crate::kernel::KernelSpec;
use crate::svr::{train_svr, SurrogateModel, SvrConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct DafheaConfig {
    pub population: PopulationConfig,
    pub svr: SvrConfig,
    pub merit: MeritWeights,
    pub update: UpdatePolicy,
    /// Clusters formed before adaptation; `None`: `max(2, round(√(N_a/2)))`.
    pub initial_clusters: Option<usize>,
    /// Generations between re-estimates of the kernel width.
    pub retune_period: usize,
    /// Archive entries used for training; `None`: `N_c`.
    pub training_window: Option<usize>,
    pub training_selection: TrainingSelection,
}

impl DafheaConfig {
    pub fn for_dimension(n: usize) -> Self {
        DafheaConfig {
            population: PopulationConfig::for_dimension(n),
            svr: SvrConfig {
                tolerance: 1.0e-3,
                ..SvrConfig::default()
            },
            merit: MeritWeights {
                rho_sigma: 0.01,
                rho_distance: 0.01,
                rho_sparseness: 0.001,
                ..MeritWeights::default()
            },
            update: UpdatePolicy {
                k: 2,
                max_expansion_steps: 1,
                probe_scale: ProbeScale::PopulationSpread,
                ..UpdatePolicy::default()
            },
            initial_clusters: Some(2),
            retune_period: 20,
            training_window: Some(50),
            training_selection: TrainingSelection::Best,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.population.validate()?;
        self.svr.validate()?;
        self.merit.validate()?;
        self.update.validate()?;
        if self.retune_period == 0 {
            return Err(Error::InvalidArgument("retune period must be ≥ 1".into()));
        }
        if self.initial_clusters == Some(0) || self.training_window.is_some_and(|w| w < 2) {
            return Err(Error::InvalidArgument(
                "initial cluster count must be ≥ 1 and training window ≥ 2".into(),
            ));
        }
        Ok(())
    }

    pub fn cluster_count(&self) -> usize {
        self.initial_clusters.unwrap_or_else(|| {
            let half = self.population.population_size as f64 / 2.0;
            (half.sqrt().round() as usize).max(2)
        })
    }

    pub fn window(&self) -> usize {
        self.training_window
            .unwrap_or_else(|| self.population.oversampled_size())
    }
}

/// Fits the SVR on the training window, retrying once with a relaxed
/// tolerance if the solver does not converge.
pub(crate) fn fit_surrogate(points: &[&[f64]], values: &[f64], cfg: &SvrConfig) -> Result<SurrogateModel> {
    match train_svr(points, values, cfg) {
        Err(Error::Convergence { iterations, residual }) => {
            warn!("SVR did not converge ({iterations} iterations, residual {residual:e}); retrying relaxed");
            let relaxed = SvrConfig {
                tolerance: cfg.tolerance * 100.0,
                max_iterations: cfg.max_iterations.saturating_mul(10),
                ..cfg.clone()
            };
            train_svr(points, values, &relaxed)
        }
        other => other,
    }
}

/// Which archive entries form the surrogate's training set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainingSelection {
    /// The most recent true evaluations.
    Recent,
    /// The lowest true values found so far.
    Best,
}

pub(crate) fn training_entries(
    ledger: &EvaluationLedger,
    window: usize,
    selection: TrainingSelection,
) -> Vec<&ArchiveEntry> {
    match selection {
        TrainingSelection::Recent => ledger.recent(window).iter().collect(),
        TrainingSelection::Best => {
            let archive = ledger.archive();
            let mut idx: Vec<usize> = (0..archive.len()).collect();
            if idx.len() > window {
                idx.select_nth_unstable_by(window - 1, |&a, &b| {
                    archive[a].value.total_cmp(&archive[b].value).then(a.cmp(&b))
                });
                idx.truncate(window);
                idx.sort_unstable();
            }
            idx.into_iter().map(|i| &archive[i]).collect()
        }
    }
}

fn train_on_window<O: Objective + ?Sized>(
    state: &RunState<'_, O>,
    window: usize,
    selection: TrainingSelection,
    cfg: &SvrConfig,
    kernel: KernelSpec,
) -> Result<SurrogateModel> {
    let recent = training_entries(&state.ledger, window, selection);
    let points: Vec<&[f64]> = recent.iter().map(|e| e.point.as_slice()).collect();
    let values: Vec<f64> = recent.iter().map(|e| e.value).collect();
    let cfg = SvrConfig {
        kernel: Some(kernel),
        ..cfg.clone()
    };
    fit_surrogate(&points, &values, &cfg)
}

/// SVR-assisted GA with clustering-based evolution control.
///
/// Per generation: offspring are scored by the surrogate, clustered, given
/// an exploration merit that drives selection, and a targeted subset is
/// truly evaluated before the surrogate is retrained on the most recent
/// archive entries. The best archived point is re-evaluated once at the end.
pub fn run_dafhea(spec: &ProblemSpec, cfg: &DafheaConfig, stop: &StopCriteria, seed: u64) -> Result<RunResult> {
    let mut problem = Problem::new(spec.clone(), seed)?;
    run_dafhea_on(&mut problem, cfg, stop, seed)
}

pub fn run_dafhea_on<O: Objective + ?Sized>(
    objective: &mut O,
    cfg: &DafheaConfig,
    stop: &StopCriteria,
    seed: u64,
) -> Result<RunResult> {
    cfg.validate()?;
    let mut state = RunState::new(objective, stop)?;
    let spec = state.spec();
    let pc = &cfg.population;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let window = cfg.window();

    let pool = init_oversampled(&spec, pc, &mut rng);
    let evaluated = evaluate_all(&mut state, pool.into_iter().map(|i| i.genome).collect())?;
    let mut pop = select_top(&evaluated, pc.population_size.min(evaluated.len()))?;
    state.record(0, &pop, None, Some(pop[0].genome.clone()), false);

    let kernel_for = |state: &RunState<'_, O>| {
        let recent = training_entries(&state.ledger, window, cfg.training_selection);
        let points: Vec<&[f64]> = recent.iter().map(|e| e.point.as_slice()).collect();
        cfg.svr.resolve_kernel(&points)
    };
    let mut kernel = kernel_for(&state);
    let mut model = train_on_window(&state, window, cfg.training_selection, &cfg.svr, kernel)?;
    let mut generation = 0;
    let mut retunes = 1usize;
    let mut surrogate_scored = 0usize;
    while generation < pc.max_generations && state.halted().is_none() {
        generation += 1;
        state.ledger.set_generation(generation);
        let surrogate = &model;

        // elite: best archived point, then the best truly evaluated members
        let best = state.archive_best().expect("archive seeded").clone();
        let mut next = vec![Individual::with_fitness(
            best.point.clone(),
            FitnessRecord::true_eval(best.value),
        )];
        let mut known: Vec<&Individual> = pop
            .iter()
            .filter(|i| i.fitness.is_some_and(|f| f.is_true()) && i.genome != best.point)
            .collect();
        known.sort_by(|a, b| a.fitness.unwrap().value.total_cmp(&b.fitness.unwrap().value));
        next.extend(known.into_iter().take(pc.elite_count.saturating_sub(1)).cloned());

        let children = breed(&pop, &spec, pc, pc.population_size - next.len(), &mut rng)?;
        surrogate_scored += children.len();
        for child in children {
            let predicted = surrogate.predict(&child)?;
            next.push(Individual::with_fitness(child, FitnessRecord::surrogate(predicted)));
        }
        pop = next;

        let threshold = match cfg.merit.sigma_threshold {
            Some(t) => t,
            None => value_std(&pop)?,
        };
        let clusters = form_clusters(&pop, cfg.cluster_count(), threshold, &mut rng)?;
        assign_merit(&mut pop, &clusters, &state.ledger, &spec, &cfg.merit)?;
        let best_predicted = pop
            .iter()
            .filter(|i| !i.fitness.unwrap().is_true())
            .map(|i| i.fitness.unwrap().value)
            .reduce(f64::min);

        let outcome = targeted_update(&clusters, &pop, state.objective, &mut state.ledger, &cfg.update, |x| {
            surrogate.predict(x)
        })?;
        state.sync();
        for e in &outcome.evaluations {
            if let Some(i) = e.population_index {
                pop[i].fitness = Some(FitnessRecord::true_eval(e.value));
            }
        }
        let halted = state.halted().is_some();
        if !halted {
            if generation % cfg.retune_period == 0 {
                kernel = kernel_for(&state);
                retunes += 1;
            }
            model = train_on_window(&state, window, cfg.training_selection, &cfg.svr, kernel)?;
        }
        let elite = pop[0].genome.clone();
        state.record(generation, &pop, best_predicted, Some(elite), !halted);
    }

    // re-verify the reported best with one more true evaluation
    let best = state.archive_best().expect("archive seeded").clone();
    let verified = state.evaluate(&best.point)?.unwrap_or(best.value);
    let termination = state.halted().unwrap_or(TerminationReason::MaxGenerations);
    let metadata = vec![
        meta("clusters", cfg.cluster_count()),
        meta("training_window", window),
        meta("kernel", kernel),
        meta("kernel_retunes", retunes),
        meta("surrogate_evaluations", surrogate_scored),
    ];
    state.finish(
        Method::Dafhea,
        Some((best.point, verified)),
        &pop,
        generation,
        termination,
        metadata,
    )
}
