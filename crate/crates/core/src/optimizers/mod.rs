//! The four end-to-end optimizers and the bookkeeping they share: stop
//! criteria, the per-run evaluation state, per-generation traces and the
//! [`RunResult`] they all return.

mod canonical;
mod dafhea;
mod dafhea2;
mod prefrank;

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

pub use canonical::{run_canonical_ga, run_canonical_ga_on};
pub use dafhea::{run_dafhea, run_dafhea_on, DafheaConfig, TrainingSelection};
pub use dafhea2::{
    assign_model, fit_multi_model, run_dafhea2, run_dafhea2_on, Dafhea2Config, ModelPart, MultiModel, MultiModelConfig,
    ResidualThreshold,
};
pub use prefrank::{run_prefrank, run_prefrank_on, PrefRankConfig, TrainingSampling};

use crate::benchmark::{Objective, Problem, ProblemSpec};
use crate::control::{ArchiveEntry, EvaluationLedger};
use crate::error::{Error, Result};
use crate::evolution::{Individual, PopulationConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Canonical,
    Dafhea,
    Dafhea2,
    PrefRank,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Canonical, Method::Dafhea, Method::Dafhea2, Method::PrefRank];

    pub fn name(self) -> &'static str {
        match self {
            Method::Canonical => "canonical",
            Method::Dafhea => "dafhea",
            Method::Dafhea2 => "dafhea2",
            Method::PrefRank => "prefrank",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method '{s}'")))
    }
}

/// Extra stop conditions on top of the generation limit. The first one to
/// trigger ends the run.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StopCriteria {
    /// Maximum number of true evaluations.
    pub budget: Option<usize>,
    /// Stop once the best (clean-scored) fitness is at or below this value.
    pub target: Option<f64>,
}

impl StopCriteria {
    pub fn validate(&self) -> Result<()> {
        if self.budget == Some(0) {
            return Err(Error::InvalidArgument("evaluation budget must be ≥ 1".into()));
        }
        if self.target.is_some_and(f64::is_nan) {
            return Err(Error::InvalidArgument("target fitness is NaN".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminationReason {
    MaxGenerations,
    Budget,
    Target,
}

impl fmt::Display for TerminationReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TerminationReason::MaxGenerations => "max-generations",
            TerminationReason::Budget => "budget",
            TerminationReason::Target => "target",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRecord {
    pub generation: usize,
    /// Best true value observed so far.
    pub best_true: Option<f64>,
    /// Best surrogate value in the population, when the method uses one.
    pub best_predicted: Option<f64>,
    /// Mean of the population's fitness values as the method sees them.
    pub mean_fitness: f64,
    pub ledger_count: usize,
    /// Genome carried as elite into this generation.
    pub elite: Option<Vec<f64>>,
    /// Surrogate models were refitted at the end of this generation.
    pub retrained: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub method: Method,
    pub best_point: Vec<f64>,
    /// True (possibly noisy) value observed at `best_point`.
    pub best_fitness: f64,
    /// Noise-free value at `best_point`; equals `best_fitness` on clean problems.
    pub best_clean: f64,
    /// Noise-free mean over the final population.
    pub mean_fitness: f64,
    pub true_evaluations: usize,
    /// Ledger count when the target was first met, if a target was set and met.
    pub evaluations_to_target: Option<usize>,
    pub generations: usize,
    pub termination: TerminationReason,
    /// The run was cut short by the evaluation budget.
    pub truncated: bool,
    pub trace: Vec<GenerationRecord>,
    pub metadata: Vec<(String, String)>,
}

impl RunResult {
    pub fn metadata_value(&self, key: &str) -> Option<&str> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Columns `generation,best_true,best_predicted,ledger_count,mean_fitness`;
    /// unknown values are left empty.
    pub fn write_trace_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "generation,best_true,best_predicted,ledger_count,mean_fitness")?;
        let opt = |v: Option<f64>| v.map(|v| format!("{v:e}")).unwrap_or_default();
        for r in &self.trace {
            writeln!(
                w,
                "{},{},{},{},{:e}",
                r.generation,
                opt(r.best_true),
                opt(r.best_predicted),
                r.ledger_count,
                r.mean_fitness
            )?;
        }
        Ok(())
    }
}

/// A fully specified configuration for one of the four methods.
#[derive(Debug, Clone, PartialEq)]
pub enum MethodConfig {
    Canonical(PopulationConfig),
    Dafhea(DafheaConfig),
    Dafhea2(Dafhea2Config),
    PrefRank(PrefRankConfig),
}

impl MethodConfig {
    /// Defaults of `method` for `spec`.
    pub fn defaults(method: Method, spec: &ProblemSpec) -> Self {
        match method {
            Method::Canonical => MethodConfig::Canonical(PopulationConfig::for_dimension(spec.dimension)),
            Method::Dafhea => MethodConfig::Dafhea(DafheaConfig::for_dimension(spec.dimension)),
            Method::Dafhea2 => MethodConfig::Dafhea2(Dafhea2Config::for_dimension(spec.dimension)),
            Method::PrefRank => MethodConfig::PrefRank(PrefRankConfig::for_problem(spec)),
        }
    }

    pub fn method(&self) -> Method {
        match self {
            MethodConfig::Canonical(_) => Method::Canonical,
            MethodConfig::Dafhea(_) => Method::Dafhea,
            MethodConfig::Dafhea2(_) => Method::Dafhea2,
            MethodConfig::PrefRank(_) => Method::PrefRank,
        }
    }

    pub fn population(&self) -> &PopulationConfig {
        match self {
            MethodConfig::Canonical(p) => p,
            MethodConfig::Dafhea(c) => &c.population,
            MethodConfig::Dafhea2(c) => &c.population,
            MethodConfig::PrefRank(c) => &c.population,
        }
    }

    pub fn population_mut(&mut self) -> &mut PopulationConfig {
        match self {
            MethodConfig::Canonical(p) => p,
            MethodConfig::Dafhea(c) => &mut c.population,
            MethodConfig::Dafhea2(c) => &mut c.population,
            MethodConfig::PrefRank(c) => &mut c.population,
        }
    }

    pub fn run(&self, spec: &ProblemSpec, stop: &StopCriteria, seed: u64) -> Result<RunResult> {
        let mut problem = Problem::new(spec.clone(), seed)?;
        self.run_on(&mut problem, stop, seed)
    }

    pub fn run_on<O: Objective + ?Sized>(
        &self,
        objective: &mut O,
        stop: &StopCriteria,
        seed: u64,
    ) -> Result<RunResult> {
        match self {
            MethodConfig::Canonical(c) => run_canonical_ga_on(objective, c, stop, seed),
            MethodConfig::Dafhea(c) => run_dafhea_on(objective, c, stop, seed),
            MethodConfig::Dafhea2(c) => run_dafhea2_on(objective, c, stop, seed),
            MethodConfig::PrefRank(c) => run_prefrank_on(objective, c, stop, seed),
        }
    }
}

/// Evaluation state of one run: the ledger, the best archived entry and
/// the stop conditions.
pub(crate) struct RunState<'a, O: ?Sized> {
    pub objective: &'a mut O,
    pub ledger: EvaluationLedger,
    pub trace: Vec<GenerationRecord>,
    stop: StopCriteria,
    noisy: bool,
    synced: usize,
    best: Option<usize>,
    to_target: Option<usize>,
}

impl<'a, O: Objective + ?Sized> RunState<'a, O> {
    pub fn new(objective: &'a mut O, stop: &StopCriteria) -> Result<Self> {
        stop.validate()?;
        let noisy = objective.spec().is_noisy();
        Ok(RunState {
            objective,
            ledger: EvaluationLedger::new(stop.budget),
            trace: Vec::new(),
            stop: *stop,
            noisy,
            synced: 0,
            best: None,
            to_target: None,
        })
    }

    pub fn spec(&self) -> ProblemSpec {
        self.objective.spec().clone()
    }

    /// One true evaluation; `None` when the budget is spent.
    pub fn evaluate(&mut self, x: &[f64]) -> Result<Option<f64>> {
        match self.ledger.evaluate(self.objective, x) {
            Ok(v) => {
                self.sync();
                Ok(Some(v))
            }
            Err(Error::BudgetExhausted { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    }

    /// Takes note of archive entries added directly through the ledger.
    pub fn sync(&mut self) {
        let archive = self.ledger.archive();
        for i in self.synced..archive.len() {
            let v = archive[i].value;
            if self.best.is_none_or(|b| v < archive[b].value) {
                self.best = Some(i);
            }
            if !self.noisy && self.to_target.is_none() && self.stop.target.is_some_and(|t| v <= t) {
                self.to_target = Some(i + 1);
            }
        }
        self.synced = archive.len();
    }

    /// On noisy problems the target is checked on the clean value of the
    /// method's incumbent; this scoring is not a true evaluation.
    pub fn check_incumbent(&mut self, x: &[f64]) -> Result<()> {
        if self.noisy && self.to_target.is_none() {
            if let Some(t) = self.stop.target {
                if self.objective.score(x)? <= t {
                    self.to_target = Some(self.ledger.count());
                }
            }
        }
        Ok(())
    }

    pub fn archive_best(&self) -> Option<&ArchiveEntry> {
        self.best.map(|b| &self.ledger.archive()[b])
    }

    pub fn halted(&self) -> Option<TerminationReason> {
        if self.stop.target.is_some() && self.to_target.is_some() {
            Some(TerminationReason::Target)
        } else if self.ledger.is_exhausted() {
            Some(TerminationReason::Budget)
        } else {
            None
        }
    }

    pub fn record(
        &mut self,
        generation: usize,
        pop: &[Individual],
        best_predicted: Option<f64>,
        elite: Option<Vec<f64>>,
        retrained: bool,
    ) {
        let values: Vec<f64> = pop.iter().filter_map(|i| i.fitness.map(|f| f.value)).collect();
        let mean_fitness = if values.is_empty() {
            f64::NAN
        } else {
            values.iter().sum::<f64>() / values.len() as f64
        };
        self.trace.push(GenerationRecord {
            generation,
            best_true: self.archive_best().map(|e| e.value),
            best_predicted,
            mean_fitness,
            ledger_count: self.ledger.count(),
            elite,
            retrained,
        });
    }

    /// Assembles the result. `incumbent` is the method's own choice of best
    /// point with its observed value; `None` selects the best archived entry.
    pub fn finish(
        self,
        method: Method,
        incumbent: Option<(Vec<f64>, f64)>,
        final_population: &[Individual],
        generations: usize,
        termination: TerminationReason,
        metadata: Vec<(String, String)>,
    ) -> Result<RunResult> {
        let (best_point, best_fitness) = match incumbent {
            Some(inc) => inc,
            None => {
                let e = self
                    .archive_best()
                    .ok_or_else(|| Error::InvalidState("run finished without any true evaluation".into()))?;
                (e.point.clone(), e.value)
            }
        };
        let best_clean = self.objective.score(&best_point)?;
        let mean_fitness = if final_population.is_empty() {
            best_clean
        } else {
            let mut sum = 0.0;
            for ind in final_population {
                sum += self.objective.score(&ind.genome)?;
            }
            sum / final_population.len() as f64
        };
        Ok(RunResult {
            method,
            best_point,
            best_fitness,
            best_clean,
            mean_fitness,
            true_evaluations: self.ledger.count(),
            evaluations_to_target: self.to_target,
            generations,
            termination,
            truncated: termination == TerminationReason::Budget,
            trace: self.trace,
            metadata,
        })
    }
}

/// Truly evaluates `genomes` in order until the budget runs out.
pub(crate) fn evaluate_all<O: Objective + ?Sized>(
    state: &mut RunState<'_, O>,
    genomes: Vec<Vec<f64>>,
) -> Result<Vec<Individual>> {
    use crate::evolution::FitnessRecord;
    let mut out = Vec::with_capacity(genomes.len());
    for g in genomes {
        match state.evaluate(&g)? {
            Some(v) => out.push(Individual::with_fitness(g, FitnessRecord::true_eval(v))),
            None => break,
        }
    }
    Ok(out)
}

pub(crate) fn meta(key: &str, value: impl fmt::Display) -> (String, String) {
    (key.to_string(), value.to_string())
}
