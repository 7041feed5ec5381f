use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::dafhea::fit_surrogate;
use super::{evaluate_all, meta, Method, RunResult, RunState, StopCriteria, TerminationReason};
use crate::benchmark::{Objective, Problem, ProblemSpec};
use crate::error::{Error, Result};
use crate::evolution::{breed, init_oversampled, select_top, FitnessRecord, Individual, PopulationConfig};
use crate::kernel::squared_distance;
use crate::svr::{SurrogateModel, SvrConfig};

/// Residual bound under which a training point is absorbed by a model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ResidualThreshold {
    /// Fixed bound in objective units.
    Absolute(f64),
    /// Multiple of the robust residual spread (`1.4826 × MAD`), never below
    /// the model's ε-tube.
    MadMultiple(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiModelConfig {
    pub svr: SvrConfig,
    pub max_models: usize,
    pub threshold: ResidualThreshold,
    /// Smallest point set a model is fitted on; smaller leftovers join the last model.
    pub min_subset: usize,
}

impl Default for MultiModelConfig {
    fn default() -> Self {
        MultiModelConfig {
            svr: SvrConfig::default(),
            max_models: 3,
            threshold: ResidualThreshold::MadMultiple(3.0),
            min_subset: 5,
        }
    }
}

impl MultiModelConfig {
    pub fn validate(&self) -> Result<()> {
        self.svr.validate()?;
        if self.max_models == 0 || self.min_subset == 0 {
            return Err(Error::InvalidArgument(
                "model count and minimum subset size must be ≥ 1".into(),
            ));
        }
        let t = match self.threshold {
            ResidualThreshold::Absolute(t) | ResidualThreshold::MadMultiple(t) => t,
        };
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "residual threshold must be > 0, got {t}"
            )));
        }
        Ok(())
    }
}

/// One member of a model set together with the points assigned to it.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelPart {
    pub model: SurrogateModel,
    /// Indices into the training data.
    pub indices: Vec<usize>,
    pub points: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiModel {
    pub parts: Vec<ModelPart>,
    /// Peeling failed and a single model on all data was used instead.
    pub fallback: bool,
}

impl MultiModel {
    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        self.parts[assign_model(&self.parts, x)].model.predict(x)
    }
}

/// Index of the part owning the training point nearest to `x`; lower index on ties.
pub fn assign_model(parts: &[ModelPart], x: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (m, part) in parts.iter().enumerate() {
        for p in &part.points {
            let d = squared_distance(p, x);
            if d < best_d {
                best_d = d;
                best = m;
            }
        }
    }
    best
}

fn part_on<P: AsRef<[f64]>>(x: &[P], y: &[f64], indices: Vec<usize>, svr: &SvrConfig) -> Result<ModelPart> {
    let points: Vec<Vec<f64>> = indices.iter().map(|&i| x[i].as_ref().to_vec()).collect();
    let targets: Vec<f64> = indices.iter().map(|&i| y[i]).collect();
    let model = fit_surrogate(&points.iter().map(Vec::as_slice).collect::<Vec<_>>(), &targets, svr)?;
    Ok(ModelPart { model, indices, points })
}

fn median(mut v: Vec<f64>) -> f64 {
    let mid = v.len() / 2;
    let (_, m, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    *m
}

fn residual_bound(threshold: ResidualThreshold, residuals: &[f64], model: &SurrogateModel, tol: f64) -> f64 {
    match threshold {
        ResidualThreshold::Absolute(t) => t,
        ResidualThreshold::MadMultiple(k) => {
            let med = median(residuals.to_vec());
            let mad = median(residuals.iter().map(|r| (r - med).abs()).collect());
            let tube = (model.epsilon + 10.0 * tol) * model.transform.scale;
            (k * 1.4826 * mad).max(tube)
        }
    }
}

/// Fits up to `max_models` SVR models by successive peeling: a model is fitted
/// on the remaining data, the points it explains within the residual bound
/// are assigned to it (and it is refitted on them), and the rest carry on to
/// the next model. Leftovers after the last slot, or smaller than
/// `min_subset`, join the last model. Every point ends up in exactly one part.
pub fn fit_multi_model<P: AsRef<[f64]>>(x: &[P], y: &[f64], cfg: &MultiModelConfig) -> Result<MultiModel> {
    cfg.validate()?;
    if x.len() < 2 || x.len() != y.len() {
        return Err(Error::InvalidArgument(format!(
            "multi-model fit needs ≥ 2 points with one target each (got {} points, {} targets)",
            x.len(),
            y.len()
        )));
    }
    let mut remaining: Vec<usize> = (0..x.len()).collect();
    let mut parts: Vec<ModelPart> = Vec::new();
    let mut fallback = false;
    let join_last = |parts: &mut Vec<ModelPart>, rest: &[usize]| -> Result<()> {
        let last = parts.pop().expect("a part exists");
        let mut indices = last.indices;
        indices.extend_from_slice(rest);
        indices.sort_unstable();
        parts.push(part_on(x, y, indices, &cfg.svr)?);
        Ok(())
    };

    while !remaining.is_empty() {
        if parts.len() + 1 == cfg.max_models {
            parts.push(part_on(x, y, std::mem::take(&mut remaining), &cfg.svr)?);
            break;
        }
        let part = part_on(x, y, remaining.clone(), &cfg.svr)?;
        let residuals = remaining
            .iter()
            .map(|&i| Ok(y[i] - part.model.predict(x[i].as_ref())?))
            .collect::<Result<Vec<f64>>>()?;
        let needed = cfg.min_subset.min(remaining.len());
        let mut bound = residual_bound(cfg.threshold, &residuals, &part.model, cfg.svr.tolerance);
        let absorb = |bound: f64| -> Vec<usize> {
            remaining
                .iter()
                .zip(&residuals)
                .filter(|(_, r)| r.abs() <= bound)
                .map(|(&i, _)| i)
                .collect()
        };
        let mut absorbed = absorb(bound);
        if absorbed.len() < needed {
            bound *= 2.0;
            absorbed = absorb(bound);
        }
        if absorbed.len() < needed {
            if parts.is_empty() {
                warn!("residual bound {bound:e} absorbs no training point; using a single model");
                fallback = true;
                parts.push(part);
            } else {
                join_last(&mut parts, &remaining)?;
            }
            break;
        }
        if absorbed.len() == remaining.len() {
            parts.push(part);
            break;
        }
        remaining.retain(|i| !absorbed.contains(i));
        parts.push(part_on(x, y, absorbed, &cfg.svr)?);
        if !remaining.is_empty() && remaining.len() < cfg.min_subset {
            join_last(&mut parts, &remaining)?;
            break;
        }
    }
    Ok(MultiModel { parts, fallback })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dafhea2Config {
    pub population: PopulationConfig,
    pub models: MultiModelConfig,
    /// Generations between full true evaluations of the population and refits.
    pub retrain_period: usize,
    /// Offspring scored by the models each generation; `None`: `N_c`.
    pub offspring: Option<usize>,
    /// Most recent archive entries used for fitting; `None`: `N_c`.
    pub training_window: Option<usize>,
}

impl Dafhea2Config {
    pub fn for_dimension(n: usize) -> Self {
        Dafhea2Config {
            population: PopulationConfig::for_dimension(n),
            models: MultiModelConfig {
                svr: SvrConfig {
                    c: 1.0,
                    epsilon: 0.05,
                    ..SvrConfig::default()
                },
                ..MultiModelConfig::default()
            },
            retrain_period: 5,
            offspring: None,
            training_window: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.population.validate()?;
        self.models.validate()?;
        if self.retrain_period == 0 {
            return Err(Error::InvalidArgument("retraining period must be ≥ 1".into()));
        }
        if self.offspring.is_some_and(|o| o + 1 < self.population.population_size) {
            return Err(Error::InvalidArgument(
                "offspring count must fill the population next to the elite".into(),
            ));
        }
        if self.training_window.is_some_and(|w| w < 2) {
            return Err(Error::InvalidArgument("training window must be ≥ 2".into()));
        }
        Ok(())
    }

    pub fn offspring_count(&self) -> usize {
        self.offspring.unwrap_or_else(|| self.population.oversampled_size())
    }

    pub fn window(&self) -> usize {
        self.training_window
            .unwrap_or_else(|| self.population.oversampled_size())
    }
}

fn fit_window<O: Objective + ?Sized>(state: &RunState<'_, O>, cfg: &Dafhea2Config) -> Result<MultiModel> {
    let recent = state.ledger.recent(cfg.window());
    let points: Vec<&[f64]> = recent.iter().map(|e| e.point.as_slice()).collect();
    let values: Vec<f64> = recent.iter().map(|e| e.value).collect();
    fit_multi_model(&points, &values, &cfg.models)
}

/// Multi-model SVR-assisted GA for noisy objectives.
///
/// Each generation the offspring are scored by the model owning their nearest
/// training point; the elite plus the best-predicted offspring form the next
/// population. Every `retrain_period` generations the whole population,
/// elite included, is truly evaluated, the elite becomes the best of those
/// evaluations, and the model set is refitted.
pub fn run_dafhea2(spec: &ProblemSpec, cfg: &Dafhea2Config, stop: &StopCriteria, seed: u64) -> Result<RunResult> {
    let mut problem = Problem::new(spec.clone(), seed)?;
    run_dafhea2_on(&mut problem, cfg, stop, seed)
}

pub fn run_dafhea2_on<O: Objective + ?Sized>(
    objective: &mut O,
    cfg: &Dafhea2Config,
    stop: &StopCriteria,
    seed: u64,
) -> Result<RunResult> {
    cfg.validate()?;
    let mut state = RunState::new(objective, stop)?;
    let spec = state.spec();
    let pc = &cfg.population;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let pool = init_oversampled(&spec, pc, &mut rng);
    let evaluated = evaluate_all(&mut state, pool.into_iter().map(|i| i.genome).collect())?;
    let mut pop = select_top(&evaluated, pc.population_size.min(evaluated.len()))?;
    let mut elite = pop[0].clone();
    state.check_incumbent(&elite.genome)?;
    state.record(0, &pop, None, Some(elite.genome.clone()), false);

    let mut models = fit_window(&state, cfg)?;
    let mut model_counts = vec![models.len()];
    let mut fallbacks = usize::from(models.fallback);
    let mut generation = 0;
    while generation < pc.max_generations && state.halted().is_none() {
        generation += 1;
        state.ledger.set_generation(generation);
        let carried = elite.genome.clone();

        let mut children = breed(&pop, &spec, pc, cfg.offspring_count(), &mut rng)?
            .into_iter()
            .map(|g| {
                let v = models.predict(&g)?;
                Ok(Individual::with_fitness(g, FitnessRecord::surrogate(v)))
            })
            .collect::<Result<Vec<_>>>()?;
        children.sort_by(|a, b| a.fitness.unwrap().value.total_cmp(&b.fitness.unwrap().value));
        let best_predicted = children.first().map(|c| c.fitness.unwrap().value);
        children.truncate(pc.population_size - 1);
        pop = std::iter::once(elite.clone()).chain(children).collect();

        let retrain = generation % cfg.retrain_period == 0;
        if retrain {
            let mut fresh: Option<Individual> = None;
            for ind in pop.iter_mut() {
                let Some(v) = state.evaluate(&ind.genome)? else { break };
                ind.fitness = Some(FitnessRecord::true_eval(v));
                if fresh.as_ref().is_none_or(|f| v < f.fitness.unwrap().value) {
                    fresh = Some(ind.clone());
                }
                if state.halted().is_some() {
                    break;
                }
            }
            if let Some(f) = fresh {
                elite = f;
            }
            state.check_incumbent(&elite.genome)?;
            if state.halted().is_none() {
                models = fit_window(&state, cfg)?;
                model_counts.push(models.len());
                fallbacks += usize::from(models.fallback);
            }
        }
        state.record(generation, &pop, best_predicted, Some(carried), retrain);
    }

    let termination = state.halted().unwrap_or(TerminationReason::MaxGenerations);
    let incumbent = if spec.is_noisy() {
        Some((elite.genome.clone(), elite.fitness()?.value))
    } else {
        None
    };
    let mean_models = model_counts.iter().sum::<usize>() as f64 / model_counts.len() as f64;
    let metadata = vec![
        meta("retrain_period", cfg.retrain_period),
        meta("offspring", cfg.offspring_count()),
        meta("max_models", cfg.models.max_models),
        meta("mean_models", format!("{mean_models:.3}")),
        meta("single_model_fallbacks", fallbacks),
    ];
    state.finish(Method::Dafhea2, incumbent, &pop, generation, termination, metadata)
}
