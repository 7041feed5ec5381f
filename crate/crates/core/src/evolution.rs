//! Real-coded genetic algorithm primitives shared by every optimizer.
//!
//! Minimization throughout. Operators clamp every genome they produce to
//! the problem bounds.

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::benchmark::ProblemSpec;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitnessSource {
    TrueEval,
    Surrogate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitnessRecord {
    /// True objective value, or the surrogate's prediction `f_a`.
    pub value: f64,
    pub source: FitnessSource,
    /// Exploration-adjusted merit `f_m`; only set on surrogate records.
    pub merit: Option<f64>,
}

impl FitnessRecord {
    pub fn true_eval(value: f64) -> Self {
        FitnessRecord {
            value,
            source: FitnessSource::TrueEval,
            merit: None,
        }
    }

    pub fn surrogate(value: f64) -> Self {
        FitnessRecord {
            value,
            source: FitnessSource::Surrogate,
            merit: None,
        }
    }

    pub fn is_true(&self) -> bool {
        self.source == FitnessSource::TrueEval
    }

    /// Key used by parent selection: merit when present, else value.
    pub fn selection_key(&self) -> f64 {
        self.merit.unwrap_or(self.value)
    }

    /// Key used to identify the best individual (elitism, reporting).
    pub fn best_key(&self) -> f64 {
        self.value
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub genome: Vec<f64>,
    pub fitness: Option<FitnessRecord>,
}

impl Individual {
    pub fn new(genome: Vec<f64>) -> Self {
        Individual { genome, fitness: None }
    }

    pub fn with_fitness(genome: Vec<f64>, fitness: FitnessRecord) -> Self {
        Individual {
            genome,
            fitness: Some(fitness),
        }
    }

    pub fn fitness(&self) -> Result<&FitnessRecord> {
        self.fitness
            .as_ref()
            .ok_or_else(|| Error::InvalidState("individual has no fitness record".into()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PopulationConfig {
    /// Actual population size `N_a`.
    pub population_size: usize,
    /// `N_c = oversampling × N_a` individuals are drawn initially.
    pub oversampling: usize,
    pub recombination_rate: f64,
    /// Per-gene mutation probability.
    pub mutation_rate: f64,
    /// Gaussian mutation standard deviation as a fraction of each coordinate range.
    pub mutation_scale: f64,
    pub tournament_size: usize,
    pub elite_count: usize,
    pub max_generations: usize,
    /// Blend-crossover extension factor (BLX-α).
    pub blend_alpha: f64,
}

impl PopulationConfig {
    /// Defaults for an `n`-dimensional problem: population `N_a = 10n` and a
    /// per-gene mutation rate of `1/N_a`.
    pub fn for_dimension(n: usize) -> Self {
        let n = n.max(1);
        PopulationConfig {
            population_size: 10 * n,
            oversampling: 5,
            recombination_rate: 0.9,
            mutation_rate: 1.0 / (10 * n) as f64,
            mutation_scale: 0.1,
            tournament_size: 2,
            elite_count: 1,
            max_generations: 1000,
            blend_alpha: 0.5,
        }
    }

    pub fn oversampled_size(&self) -> usize {
        self.oversampling * self.population_size
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidArgument(m));
        if self.population_size < 2 {
            return fail(format!("population size must be ≥ 2, got {}", self.population_size));
        }
        if self.oversampling < 1 {
            return fail("oversampling factor must be ≥ 1".into());
        }
        for (name, r) in [
            ("recombination rate", self.recombination_rate),
            ("mutation rate", self.mutation_rate),
        ] {
            if !(0.0..=1.0).contains(&r) {
                return fail(format!("{name} must lie in [0, 1], got {r}"));
            }
        }
        if !(self.mutation_scale >= 0.0 && self.mutation_scale.is_finite()) {
            return fail(format!("mutation scale must be ≥ 0, got {}", self.mutation_scale));
        }
        if self.tournament_size < 1 || self.tournament_size > self.population_size {
            return fail(format!(
                "tournament size {} must lie in [1, {}]",
                self.tournament_size, self.population_size
            ));
        }
        if self.elite_count >= self.population_size {
            return fail(format!(
                "elite count {} must be smaller than the population {}",
                self.elite_count, self.population_size
            ));
        }
        if !(self.blend_alpha >= 0.0 && self.blend_alpha.is_finite()) {
            return fail(format!("blend alpha must be ≥ 0, got {}", self.blend_alpha));
        }
        Ok(())
    }
}

/// `size` genomes drawn uniformly inside the bounds.
pub fn init_population<R: Rng + ?Sized>(spec: &ProblemSpec, size: usize, rng: &mut R) -> Vec<Individual> {
    (0..size)
        .map(|_| {
            let genome = (0..spec.dimension)
                .map(|i| rng.random_range(spec.lower[i]..=spec.upper[i]))
                .collect();
            Individual::new(genome)
        })
        .collect()
}

/// The `N_c`-sized oversampled initial pool, fitness unset.
pub fn init_oversampled<R: Rng + ?Sized>(spec: &ProblemSpec, cfg: &PopulationConfig, rng: &mut R) -> Vec<Individual> {
    init_population(spec, cfg.oversampled_size(), rng)
}

fn sorted_indices(pool: &[Individual], key: impl Fn(&FitnessRecord) -> f64) -> Result<Vec<usize>> {
    let keys = pool
        .iter()
        .map(|ind| ind.fitness().map(&key))
        .collect::<Result<Vec<f64>>>()?;
    let mut order: Vec<usize> = (0..pool.len()).collect();
    // stable: ties keep index order
    order.sort_by(|&a, &b| keys[a].total_cmp(&keys[b]));
    Ok(order)
}

/// The `k` individuals with the smallest objective value, best first.
pub fn select_top(pool: &[Individual], k: usize) -> Result<Vec<Individual>> {
    if k > pool.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot select {k} individuals from a pool of {}",
            pool.len()
        )));
    }
    let order = sorted_indices(pool, FitnessRecord::best_key)?;
    Ok(order[..k].iter().map(|&i| pool[i].clone()).collect())
}

/// Index of the best individual by [`FitnessRecord::best_key`] (first on ties).
pub fn best_index(pop: &[Individual]) -> Result<usize> {
    sorted_indices(pop, FitnessRecord::best_key)?
        .first()
        .copied()
        .ok_or_else(|| Error::InvalidState("empty population".into()))
}

/// Winner of a uniform tournament of `cfg.tournament_size` distinct contestants.
pub fn tournament_select<'a, R: Rng + ?Sized>(
    pop: &'a [Individual],
    cfg: &PopulationConfig,
    rng: &mut R,
) -> Result<&'a Individual> {
    if pop.is_empty() {
        return Err(Error::InvalidState("tournament on an empty population".into()));
    }
    let size = cfg.tournament_size.clamp(1, pop.len());
    let mut winner: Option<(usize, f64)> = None;
    for i in index::sample(rng, pop.len(), size) {
        let key = pop[i].fitness()?.selection_key();
        winner = match winner {
            Some((w, wk)) if wk < key || (wk == key && w < i) => Some((w, wk)),
            _ => Some((i, key)),
        };
    }
    Ok(&pop[winner.expect("non-empty tournament").0])
}

/// Per-gene BLX-α blend crossover applied with probability `recombination_rate`;
/// otherwise the parents are copied.
pub fn recombine<R: Rng + ?Sized>(
    p1: &[f64],
    p2: &[f64],
    spec: &ProblemSpec,
    cfg: &PopulationConfig,
    rng: &mut R,
) -> (Vec<f64>, Vec<f64>) {
    if !rng.random_bool(cfg.recombination_rate) {
        return (p1.to_vec(), p2.to_vec());
    }
    let mut c1 = Vec::with_capacity(p1.len());
    let mut c2 = Vec::with_capacity(p2.len());
    for (&a, &b) in p1.iter().zip(p2) {
        let (lo, hi) = (a.min(b), a.max(b));
        let ext = cfg.blend_alpha * (hi - lo);
        if ext == 0.0 && lo == hi {
            c1.push(a);
            c2.push(b);
        } else {
            c1.push(rng.random_range(lo - ext..=hi + ext));
            c2.push(rng.random_range(lo - ext..=hi + ext));
        }
    }
    spec.clamp(&mut c1);
    spec.clamp(&mut c2);
    (c1, c2)
}

/// Gaussian perturbation of each gene with probability `mutation_rate`.
pub fn mutate<R: Rng + ?Sized>(genome: &mut [f64], spec: &ProblemSpec, cfg: &PopulationConfig, rng: &mut R) {
    if cfg.mutation_rate == 0.0 || cfg.mutation_scale == 0.0 {
        return;
    }
    for (i, g) in genome.iter_mut().enumerate() {
        if rng.random_bool(cfg.mutation_rate) {
            let sd = cfg.mutation_scale * spec.range(i);
            let step: f64 = Normal::new(0.0, sd).expect("finite sd").sample(rng);
            *g = (*g + step).clamp(spec.lower[i], spec.upper[i]);
        }
    }
}

/// `count` offspring genomes from tournament parents, recombination and mutation.
pub fn breed<R: Rng + ?Sized>(
    pop: &[Individual],
    spec: &ProblemSpec,
    cfg: &PopulationConfig,
    count: usize,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    let mut children = Vec::with_capacity(count + 1);
    while children.len() < count {
        let p1 = tournament_select(pop, cfg, rng)?;
        let p2 = tournament_select(pop, cfg, rng)?;
        let (mut c1, mut c2) = recombine(&p1.genome, &p2.genome, spec, cfg, rng);
        mutate(&mut c1, spec, cfg, rng);
        mutate(&mut c2, spec, cfg, rng);
        children.push(c1);
        if children.len() < count {
            children.push(c2);
        }
    }
    Ok(children)
}

/// Elites by best key, carried unchanged (first `elite_count` entries of the result).
pub fn elites(pop: &[Individual], count: usize) -> Result<Vec<Individual>> {
    select_top(pop, count.min(pop.len()))
}

/// One generational step: `elite_count` best carried over unchanged, the rest
/// bred and scored by `fitness_fn` as one batch.
pub fn evolve_one_generation<R, F>(
    pop: &[Individual],
    spec: &ProblemSpec,
    cfg: &PopulationConfig,
    mut fitness_fn: F,
    rng: &mut R,
) -> Result<Vec<Individual>>
where
    R: Rng + ?Sized,
    F: FnMut(&[Vec<f64>]) -> Result<Vec<FitnessRecord>>,
{
    let mut next = elites(pop, cfg.elite_count)?;
    let children = breed(pop, spec, cfg, pop.len() - next.len(), rng)?;
    let records = fitness_fn(&children)?;
    if records.len() != children.len() {
        return Err(Error::InvalidState(format!(
            "fitness function returned {} records for {} children",
            records.len(),
            children.len()
        )));
    }
    next.extend(
        children
            .into_iter()
            .zip(records)
            .map(|(g, f)| Individual::with_fitness(g, f)),
    );
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmark::FunctionId;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pop_with(values: &[f64]) -> Vec<Individual> {
        values
            .iter()
            .enumerate()
            .map(|(i, &v)| Individual::with_fitness(vec![i as f64], FitnessRecord::true_eval(v)))
            .collect()
    }

    #[test]
    fn oversampled_size_and_bounds() {
        let spec = ProblemSpec::new(FunctionId::Sphere, 5).unwrap();
        let cfg = PopulationConfig::for_dimension(5);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pool = init_oversampled(&spec, &cfg, &mut rng);
        assert_eq!(pool.len(), 250);
        assert!(pool.iter().all(|i| spec.contains(&i.genome) && i.fitness.is_none()));

        let mut again = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(pool, init_oversampled(&spec, &cfg, &mut again));
    }

    #[test]
    fn ten_thousand_draws_inside_bounds() {
        let spec = ProblemSpec::new(FunctionId::Rosenbrock, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        assert!(init_population(&spec, 10_000, &mut rng)
            .iter()
            .all(|i| spec.contains(&i.genome)));
    }

    #[test]
    fn select_top_orders_and_breaks_ties_by_index() {
        let pool = pop_with(&[3.0, 1.0, 2.0]);
        let top = select_top(&pool, 2).unwrap();
        let vals: Vec<f64> = top.iter().map(|i| i.fitness.unwrap().value).collect();
        assert_eq!(vals, vec![1.0, 2.0]);

        let all = select_top(&pool, 3).unwrap();
        assert_eq!(all.len(), 3);

        let tied = pop_with(&[1.0, 1.0, 2.0]);
        assert_eq!(select_top(&tied, 1).unwrap()[0].genome, vec![0.0]);

        assert!(matches!(select_top(&pool, 4), Err(Error::InvalidArgument(_))));
        let unset = vec![Individual::new(vec![0.0])];
        assert!(matches!(select_top(&unset, 1), Err(Error::InvalidState(_))));
    }

    #[test]
    fn tournament_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cfg = PopulationConfig::for_dimension(1);
        let pair = pop_with(&[5.0, 1.0]);
        for _ in 0..50 {
            assert_eq!(
                tournament_select(&pair, &cfg, &mut rng).unwrap().fitness.unwrap().value,
                1.0
            );
        }

        let pop = pop_with(&[4.0, 2.0, 9.0, 0.5, 3.0]);
        let full = PopulationConfig {
            tournament_size: 5,
            ..PopulationConfig::for_dimension(1)
        };
        for _ in 0..50 {
            assert_eq!(
                tournament_select(&pop, &full, &mut rng).unwrap().fitness.unwrap().value,
                0.5
            );
        }
        assert!(matches!(
            tournament_select(&[], &cfg, &mut rng),
            Err(Error::InvalidState(_))
        ));
    }

    #[test]
    fn tournament_uses_merit_when_present() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cfg = PopulationConfig::for_dimension(1);
        let mut pop = pop_with(&[1.0, 2.0]);
        pop[1].fitness = Some(FitnessRecord {
            merit: Some(0.0),
            ..FitnessRecord::surrogate(2.0)
        });
        assert_eq!(tournament_select(&pop, &cfg, &mut rng).unwrap().genome, vec![1.0]);
        // but the best individual is identified by value
        assert_eq!(best_index(&pop).unwrap(), 0);
    }

    #[test]
    fn zero_rates_are_identity() {
        let spec = ProblemSpec::new(FunctionId::Sphere, 3).unwrap();
        let cfg = PopulationConfig {
            recombination_rate: 0.0,
            mutation_rate: 0.0,
            ..PopulationConfig::for_dimension(3)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p1 = vec![1.0, 2.0, 3.0];
        let p2 = vec![-1.0, 0.5, 4.0];
        let (c1, c2) = recombine(&p1, &p2, &spec, &cfg, &mut rng);
        assert_eq!((c1, c2), (p1.clone(), p2));
        let mut g = p1.clone();
        mutate(&mut g, &spec, &cfg, &mut rng);
        assert_eq!(g, p1);
    }

    #[test]
    fn blend_of_identical_parents_is_the_parent() {
        let spec = ProblemSpec::new(FunctionId::Sphere, 3).unwrap();
        let cfg = PopulationConfig {
            recombination_rate: 1.0,
            ..PopulationConfig::for_dimension(3)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = vec![0.3, -4.0, 5.12];
        for _ in 0..20 {
            let (c1, c2) = recombine(&p, &p, &spec, &cfg, &mut rng);
            assert_eq!(c1, p);
            assert_eq!(c2, p);
        }
    }

    #[test]
    fn elite_survives_a_generation() {
        let spec = ProblemSpec::new(FunctionId::Sphere, 2).unwrap();
        let cfg = PopulationConfig::for_dimension(2);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pop: Vec<Individual> = init_population(&spec, 20, &mut rng)
            .into_iter()
            .map(|i| {
                let v = spec.evaluate_clean(&i.genome).unwrap();
                Individual::with_fitness(i.genome, FitnessRecord::true_eval(v))
            })
            .collect();
        let best = pop[best_index(&pop).unwrap()].clone();
        let next = evolve_one_generation(
            &pop,
            &spec,
            &cfg,
            |gs| Ok(gs.iter().map(|_| FitnessRecord::true_eval(7.0)).collect()),
            &mut rng,
        )
        .unwrap();
        assert_eq!(next.len(), pop.len());
        assert_eq!(next[0], best);
        assert!(next[1..].iter().all(|i| i.fitness.unwrap().value == 7.0));
    }

    #[test]
    fn config_validation() {
        assert!(PopulationConfig::for_dimension(5).validate().is_ok());
        let bad = PopulationConfig {
            population_size: 1,
            ..PopulationConfig::for_dimension(5)
        };
        assert!(bad.validate().is_err());
        let bad = PopulationConfig {
            mutation_rate: 1.5,
            ..PopulationConfig::for_dimension(5)
        };
        assert!(bad.validate().is_err());
    }
}
