use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{evaluate_all, meta, Method, RunResult, RunState, StopCriteria, TerminationReason};
use crate::benchmark::{Objective, Problem, ProblemSpec};
use crate::error::Result;
use crate::evolution::{
    best_index, breed, elites, init_oversampled, select_top, FitnessRecord, Individual, PopulationConfig,
};

/// Baseline GA: every fitness is a true evaluation.
///
/// The initial `N_c` pool is evaluated and its `N_a` best form the first
/// population; each generation then carries the elites and evaluates
/// `N_a − elite_count` offspring.
pub fn run_canonical_ga(
    spec: &ProblemSpec,
    cfg: &PopulationConfig,
    stop: &StopCriteria,
    seed: u64,
) -> Result<RunResult> {
    let mut problem = Problem::new(spec.clone(), seed)?;
    run_canonical_ga_on(&mut problem, cfg, stop, seed)
}

pub fn run_canonical_ga_on<O: Objective + ?Sized>(
    objective: &mut O,
    cfg: &PopulationConfig,
    stop: &StopCriteria,
    seed: u64,
) -> Result<RunResult> {
    cfg.validate()?;
    let mut state = RunState::new(objective, stop)?;
    let spec = state.spec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let pool = init_oversampled(&spec, cfg, &mut rng);
    let evaluated = evaluate_all(&mut state, pool.into_iter().map(|i| i.genome).collect())?;
    let mut pop = select_top(&evaluated, cfg.population_size.min(evaluated.len()))?;
    let elite = pop[0].genome.clone();
    state.check_incumbent(&elite)?;
    state.record(0, &pop, None, Some(elite), false);

    let mut generation = 0;
    while generation < cfg.max_generations && state.halted().is_none() {
        generation += 1;
        state.ledger.set_generation(generation);
        let mut next = elites(&pop, cfg.elite_count)?;
        let elite_len = next.len();
        let carried = next.first().map(|e| e.genome.clone());
        let children = breed(&pop, &spec, cfg, cfg.population_size - next.len(), &mut rng)?;
        let mut complete = true;
        for child in children {
            match state.evaluate(&child)? {
                Some(v) => next.push(Individual::with_fitness(child, FitnessRecord::true_eval(v))),
                None => {
                    complete = false;
                    break;
                }
            }
            if state.halted().is_some() {
                complete = next.len() == cfg.population_size;
                break;
            }
        }
        if !complete {
            // partial generation: offspring compete with the previous population
            let mut merged = next.split_off(elite_len);
            merged.extend(pop);
            next = select_top(&merged, cfg.population_size.min(merged.len()))?;
        }
        pop = next;
        let incumbent = pop[best_index(&pop)?].genome.clone();
        state.check_incumbent(&incumbent)?;
        state.record(generation, &pop, None, carried, false);
    }

    let termination = state.halted().unwrap_or(TerminationReason::MaxGenerations);
    // noisy runs report the elite, which is never re-evaluated
    let incumbent = if spec.is_noisy() {
        let b = &pop[best_index(&pop)?];
        Some((b.genome.clone(), b.fitness()?.value))
    } else {
        None
    };
    let metadata = vec![
        meta("population", cfg.population_size),
        meta("oversampling", cfg.oversampling),
    ];
    state.finish(Method::Canonical, incumbent, &pop, generation, termination, metadata)
}
