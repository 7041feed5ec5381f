//! Evolution control for the SVR-assisted GA: the true-evaluation ledger,
//! distance-based clustering with adaptive cluster count, the exploration
//! merit, the relative accuracy check, and the targeted true-evaluation
//! update that feeds surrogate retraining.

use std::io::{self, Write};

use log::debug;
use rand::Rng;

use crate::benchmark::{Objective, ProblemSpec};
use crate::error::{Error, Result};
use crate::evolution::Individual;
use crate::kernel::{distance, squared_distance};

#[derive(Debug, Clone, PartialEq)]
pub struct ArchiveEntry {
    pub point: Vec<f64>,
    pub value: f64,
    pub generation: usize,
}

/// Counts and archives every true evaluation of a run.
///
/// All true evaluations go through [`EvaluationLedger::evaluate`], so the
/// count always equals the archive length and never passes the budget.
#[derive(Debug, Clone, Default)]
pub struct EvaluationLedger {
    archive: Vec<ArchiveEntry>,
    budget: Option<usize>,
    generation: usize,
}

impl EvaluationLedger {
    pub fn new(budget: Option<usize>) -> Self {
        EvaluationLedger {
            archive: Vec::new(),
            budget,
            generation: 0,
        }
    }

    pub fn count(&self) -> usize {
        self.archive.len()
    }

    pub fn budget(&self) -> Option<usize> {
        self.budget
    }

    pub fn remaining(&self) -> Option<usize> {
        self.budget.map(|b| b.saturating_sub(self.count()))
    }

    pub fn is_exhausted(&self) -> bool {
        self.remaining() == Some(0)
    }

    pub fn generation(&self) -> usize {
        self.generation
    }

    /// Stamp applied to subsequent archive entries.
    pub fn set_generation(&mut self, generation: usize) {
        self.generation = generation;
    }

    pub fn archive(&self) -> &[ArchiveEntry] {
        &self.archive
    }

    /// The last `n` archived entries (fewer if the archive is shorter).
    pub fn recent(&self, n: usize) -> &[ArchiveEntry] {
        &self.archive[self.archive.len().saturating_sub(n)..]
    }

    /// Lowest archived value; earliest entry on ties.
    pub fn best(&self) -> Option<&ArchiveEntry> {
        self.archive
            .iter()
            .reduce(|best, e| if e.value < best.value { e } else { best })
    }

    pub fn evaluate<O: Objective + ?Sized>(&mut self, objective: &mut O, x: &[f64]) -> Result<f64> {
        if let Some(budget) = self.budget {
            if self.count() >= budget {
                return Err(Error::BudgetExhausted { budget });
            }
        }
        let value = objective.evaluate(x)?;
        self.archive.push(ArchiveEntry {
            point: x.to_vec(),
            value,
            generation: self.generation,
        });
        Ok(value)
    }

    /// CSV with columns `x1..xn,value,generation`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let n = self.archive.first().map_or(0, |e| e.point.len());
        let mut header: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
        header.push("value".into());
        header.push("generation".into());
        writeln!(w, "{}", header.join(","))?;
        for e in &self.archive {
            for v in &e.point {
                write!(w, "{v:e},")?;
            }
            writeln!(w, "{:e},{}", e.value, e.generation)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    /// Population indices.
    pub members: Vec<usize>,
    pub centroid: Vec<f64>,
    /// Standard deviation of the members' (predicted) objective values.
    pub sigma: f64,
    /// `|members| / n`.
    pub sparseness: f64,
}

/// `|members| / n`; an empty cluster has sparseness 0.
pub fn sparseness(cluster: &Cluster, dimension: usize) -> f64 {
    if dimension == 0 {
        return 0.0;
    }
    cluster.members.len() as f64 / dimension as f64
}

fn kmeans_pp_seeds<R: Rng + ?Sized>(points: &[&[f64]], m: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut chosen = vec![false; points.len()];
    let first = rng.random_range(0..points.len());
    chosen[first] = true;
    let mut centers = vec![points[first].to_vec()];
    let mut d2: Vec<f64> = points.iter().map(|p| squared_distance(p, &centers[0])).collect();
    while centers.len() < m {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 {
                    pick = Some(i);
                    if target < w {
                        break;
                    }
                    target -= w;
                }
            }
            pick.expect("positive total weight")
        } else {
            // every point coincides with a center: take an unused index
            let free: Vec<usize> = (0..points.len()).filter(|&i| !chosen[i]).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen[next] = true;
        centers.push(points[next].to_vec());
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(squared_distance(p, &centers[centers.len() - 1]));
        }
    }
    centers
}

fn nearest_center(p: &[f64], centers: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, center) in centers.iter().enumerate() {
        let d = squared_distance(p, center);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

const KMEANS_MAX_ITERATIONS: usize = 50;

/// Lloyd's k-means with k-means++ seeding; returns the label of each point.
/// Labels may skip values when a cluster empties.
pub fn kmeans<R: Rng + ?Sized>(points: &[&[f64]], m: usize, rng: &mut R) -> Vec<usize> {
    let dim = points[0].len();
    let mut centers = kmeans_pp_seeds(points, m, rng);
    let mut labels: Vec<usize> = points.iter().map(|p| nearest_center(p, &centers)).collect();
    for _ in 0..KMEANS_MAX_ITERATIONS {
        let mut sums = vec![vec![0.0; dim]; m];
        let mut counts = vec![0usize; m];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(p.iter()) {
                *s += v;
            }
        }
        for c in 0..m {
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        let next: Vec<usize> = points.iter().map(|p| nearest_center(p, &centers)).collect();
        if next == labels {
            break;
        }
        labels = next;
    }
    labels
}

fn build_clusters(pop: &[Individual], labels: &[usize], m: usize) -> Result<Vec<Cluster>> {
    let dim = pop[0].genome.len();
    let mut clusters = Vec::with_capacity(m);
    for c in 0..m {
        let members: Vec<usize> = (0..pop.len()).filter(|&i| labels[i] == c).collect();
        if members.is_empty() {
            continue;
        }
        let mut centroid = vec![0.0; dim];
        for &i in &members {
            for (s, v) in centroid.iter_mut().zip(&pop[i].genome) {
                *s += v;
            }
        }
        let size = members.len() as f64;
        centroid.iter_mut().for_each(|s| *s /= size);
        let values = members
            .iter()
            .map(|&i| pop[i].fitness().map(|f| f.value))
            .collect::<Result<Vec<f64>>>()?;
        let mean = values.iter().sum::<f64>() / size;
        let sigma = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / size).sqrt();
        let mut cluster = Cluster {
            members,
            centroid,
            sigma,
            sparseness: 0.0,
        };
        cluster.sparseness = sparseness(&cluster, dim);
        clusters.push(cluster);
    }
    Ok(clusters)
}

/// Partitions `pop` into at most `m` distance-based clusters (empty clusters
/// are dissolved). Every individual needs a fitness record.
pub fn cluster_population<R: Rng + ?Sized>(pop: &[Individual], m: usize, rng: &mut R) -> Result<Vec<Cluster>> {
    if m == 0 || m > pop.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot form {m} clusters from {} individuals",
            pop.len()
        )));
    }
    let points: Vec<&[f64]> = pop.iter().map(|i| i.genome.as_slice()).collect();
    let labels = kmeans(&points, m, rng);
    build_clusters(pop, &labels, m)
}

/// `m + (number of clusters whose σ reaches the threshold)`. Clusters with
/// zero spread never count, so singletons never trigger a split.
pub fn adapt_cluster_count(clusters: &[Cluster], sigma_threshold: f64) -> usize {
    clusters.len()
        + clusters
            .iter()
            .filter(|c| c.sigma > 0.0 && c.sigma >= sigma_threshold)
            .count()
}

/// Clusters `pop` into `m` groups, then once into `m'` if some clusters are
/// too spread out. Never returns fewer clusters than the first pass.
pub fn form_clusters<R: Rng + ?Sized>(
    pop: &[Individual],
    m: usize,
    sigma_threshold: f64,
    rng: &mut R,
) -> Result<Vec<Cluster>> {
    let first = cluster_population(pop, m.min(pop.len()), rng)?;
    let grown = adapt_cluster_count(&first, sigma_threshold).min(pop.len());
    if grown <= first.len() {
        return Ok(first);
    }
    let second = cluster_population(pop, grown, rng)?;
    Ok(if second.len() >= first.len() { second } else { first })
}

/// Scaling factors for the merit terms, and where σ splits clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct MeritWeights {
    pub rho_sigma: f64,
    pub rho_distance: f64,
    pub rho_sparseness: f64,
    /// `None`: the standard deviation of predicted values across the population.
    pub sigma_threshold: Option<f64>,
    /// `None`: the length of the domain diagonal.
    pub distance_normalization: Option<f64>,
}

impl Default for MeritWeights {
    fn default() -> Self {
        MeritWeights {
            rho_sigma: 1.0,
            rho_distance: 1.0,
            rho_sparseness: 1.0,
            sigma_threshold: None,
            distance_normalization: None,
        }
    }
}

impl MeritWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, w) in [
            ("rho_sigma", self.rho_sigma),
            ("rho_distance", self.rho_distance),
            ("rho_sparseness", self.rho_sparseness),
        ] {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be ≥ 0, got {w}")));
            }
        }
        if let Some(n) = self.distance_normalization {
            if !(n > 0.0) {
                return Err(Error::InvalidArgument("distance normalization must be > 0".into()));
            }
        }
        Ok(())
    }
}

/// Prediction lowered by cluster spread `sigma`, archive distance `d` and
/// sparseness `s`; lower merit is more attractive.
pub fn merit(predicted: f64, sigma: f64, d: f64, s: f64, weights: &MeritWeights) -> f64 {
    predicted - weights.rho_sigma * sigma - weights.rho_distance * d - weights.rho_sparseness * s
}

/// Minimum Euclidean distance from `x` to any archived point, divided by
/// `normalization` and capped at 1.
pub fn min_distance_to_archive(x: &[f64], ledger: &EvaluationLedger, normalization: f64) -> Result<f64> {
    if ledger.count() == 0 {
        return Err(Error::InvalidState("distance to an empty archive".into()));
    }
    let d2 = ledger
        .archive()
        .iter()
        .map(|e| squared_distance(x, &e.point))
        .fold(f64::INFINITY, f64::min);
    Ok((d2.sqrt() / normalization).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccuracyDelta {
    pub percent: f64,
    /// Set when the true value is 0 and the absolute error (×100) was used.
    pub absolute_fallback: bool,
}

/// `δ = |(a_it − a_ip) / a_it| × 100`; falls back to `|a_ip| × 100` at `a_it = 0`.
pub fn accuracy_delta(a_true: f64, a_pred: f64) -> AccuracyDelta {
    if a_true == 0.0 {
        AccuracyDelta {
            percent: a_pred.abs() * 100.0,
            absolute_fallback: true,
        }
    } else {
        AccuracyDelta {
            percent: ((a_true - a_pred) / a_true).abs() * 100.0,
            absolute_fallback: false,
        }
    }
}

/// Sets the merit on every surrogate-scored individual.
///
/// `d_ij` and `s_i` are dimensionless; they are put on the objective scale
/// by multiplying their weights with the spread (max − min) of the values
/// in the current population.
pub fn assign_merit(
    pop: &mut [Individual],
    clusters: &[Cluster],
    ledger: &EvaluationLedger,
    spec: &ProblemSpec,
    weights: &MeritWeights,
) -> Result<()> {
    let values = pop
        .iter()
        .map(|i| i.fitness().map(|f| f.value))
        .collect::<Result<Vec<f64>>>()?;
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let spread = if hi > lo { hi - lo } else { 0.0 };
    let scaled = MeritWeights {
        rho_distance: weights.rho_distance * spread,
        rho_sparseness: weights.rho_sparseness * spread,
        ..weights.clone()
    };
    let norm = weights.distance_normalization.unwrap_or_else(|| spec.diagonal());
    for cluster in clusters {
        for &i in &cluster.members {
            let ind = &mut pop[i];
            let Some(rec) = ind.fitness.as_mut() else { continue };
            if rec.is_true() {
                rec.merit = None;
                continue;
            }
            let d = min_distance_to_archive(&ind.genome, ledger, norm)?;
            rec.merit = Some(merit(rec.value, cluster.sigma, d, cluster.sparseness, &scaled));
        }
    }
    Ok(())
}

/// Population standard deviation of the individuals' values.
pub fn value_std(pop: &[Individual]) -> Result<f64> {
    let values = pop
        .iter()
        .map(|i| i.fitness().map(|f| f.value))
        .collect::<Result<Vec<f64>>>()?;
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    Ok((values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt())
}

/// Step length of the axis-wise expansion probes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProbeScale {
    /// First probe at this fraction of each coordinate range.
    DomainFraction(f64),
    /// First probe at the population's standard deviation along the axis.
    PopulationSpread,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpdatePolicy {
    /// Nearest neighbours truly evaluated alongside each anchor point.
    pub k: usize,
    /// Relative accuracy (percent) that ends the expansion along an axis.
    pub delta_threshold: f64,
    pub max_expansion_steps: usize,
    /// Probe offsets double at every step starting from this scale.
    pub probe_scale: ProbeScale,
    /// Evaluate raw centroid coordinates instead of the member nearest to each centroid.
    pub evaluate_raw_centroids: bool,
}

impl Default for UpdatePolicy {
    fn default() -> Self {
        UpdatePolicy {
            k: 5,
            delta_threshold: 5.0,
            max_expansion_steps: 8,
            probe_scale: ProbeScale::DomainFraction(0.01),
            evaluate_raw_centroids: false,
        }
    }
}

impl UpdatePolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta_threshold > 0.0) {
            return Err(Error::InvalidArgument("δ threshold must be > 0".into()));
        }
        if let ProbeScale::DomainFraction(f) = self.probe_scale {
            if !(f > 0.0 && f.is_finite()) {
                return Err(Error::InvalidArgument("probe fraction must be > 0".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrueEvaluation {
    /// Population member this evaluation belongs to; `None` for probes and raw centroids.
    pub population_index: Option<usize>,
    pub point: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct UpdateOutcome {
    pub evaluations: Vec<TrueEvaluation>,
    /// Population index of the surrogate-best individual.
    pub surrogate_best: usize,
    pub probes: usize,
    pub budget_exhausted: bool,
}

struct Evaluator<'a, O: ?Sized> {
    objective: &'a mut O,
    ledger: &'a mut EvaluationLedger,
    known: Vec<bool>,
    out: UpdateOutcome,
}

impl<O: Objective + ?Sized> Evaluator<'_, O> {
    /// Returns `Ok(false)` once the budget runs out.
    fn eval(&mut self, point: &[f64], index: Option<usize>) -> Result<Option<f64>> {
        match self.ledger.evaluate(self.objective, point) {
            Ok(v) => {
                if let Some(i) = index {
                    self.known[i] = true;
                }
                self.out.evaluations.push(TrueEvaluation {
                    population_index: index,
                    point: point.to_vec(),
                    value: v,
                });
                Ok(Some(v))
            }
            Err(Error::BudgetExhausted { .. }) => {
                self.out.budget_exhausted = true;
                Ok(None)
            }
            Err(e) => Err(e),
        }
    }

    fn eval_member(&mut self, pop: &[Individual], i: usize) -> Result<bool> {
        if self.known[i] {
            return Ok(true);
        }
        Ok(self.eval(&pop[i].genome, Some(i))?.is_some())
    }

    /// The `k` members nearest to `center` that are not yet truly known.
    fn neighbours(&self, pop: &[Individual], center: &[f64], exclude: Option<usize>, k: usize) -> Vec<usize> {
        let mut cand: Vec<(f64, usize)> = (0..pop.len())
            .filter(|&i| Some(i) != exclude && !self.known[i])
            .map(|i| (squared_distance(&pop[i].genome, center), i))
            .collect();
        cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        cand.into_iter().take(k).map(|(_, i)| i).collect()
    }
}

/// Targeted true evaluations after surrogate scoring:
///
/// 1. the surrogate-best member (lowest `f_a`) and its `k` nearest neighbours,
/// 2. for every other cluster, the member nearest its centroid and that
///    member's `k` nearest neighbours,
/// 3. axis-wise probes from the surrogate-best point at doubling offsets until
///    the surrogate's relative error drops to `δ_threshold` or the step cap.
///
/// Members already carrying a true fitness are not re-evaluated. All
/// evaluations go through the ledger; a budget stop returns what was done so
/// far with `budget_exhausted` set.
pub fn targeted_update<O, F>(
    clusters: &[Cluster],
    pop: &[Individual],
    objective: &mut O,
    ledger: &mut EvaluationLedger,
    policy: &UpdatePolicy,
    predictor: F,
) -> Result<UpdateOutcome>
where
    O: Objective + ?Sized,
    F: Fn(&[f64]) -> Result<f64>,
{
    if pop.is_empty() || clusters.is_empty() {
        return Err(Error::InvalidState(
            "update needs a clustered, non-empty population".into(),
        ));
    }
    let spec = objective.spec().clone();
    let values = pop
        .iter()
        .map(|i| i.fitness().map(|f| f.value))
        .collect::<Result<Vec<f64>>>()?;
    let best = (0..pop.len())
        .min_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)))
        .expect("non-empty");
    let best_cluster = clusters
        .iter()
        .position(|c| c.members.contains(&best))
        .ok_or_else(|| Error::InvalidState("surrogate-best individual is in no cluster".into()))?;

    let known = pop
        .iter()
        .map(|i| i.fitness.as_ref().is_some_and(|f| f.is_true()))
        .collect();
    let mut ev = Evaluator {
        objective,
        ledger,
        known,
        out: UpdateOutcome {
            surrogate_best: best,
            ..UpdateOutcome::default()
        },
    };

    macro_rules! stop_if_exhausted {
        ($ok:expr) => {
            if !$ok {
                return Ok(ev.out);
            }
        };
    }

    // surrogate optimum and its neighbourhood
    let ok = ev.eval_member(pop, best)?;
    stop_if_exhausted!(ok);
    for nb in ev.neighbours(pop, &pop[best].genome, Some(best), policy.k) {
        let ok = ev.eval_member(pop, nb)?;
        stop_if_exhausted!(ok);
    }

    // every other cluster
    for (c, cluster) in clusters.iter().enumerate() {
        if c == best_cluster {
            continue;
        }
        if policy.evaluate_raw_centroids {
            let mut point = cluster.centroid.clone();
            spec.clamp(&mut point);
            let ok = ev.eval(&point, None)?.is_some();
            stop_if_exhausted!(ok);
            for nb in ev.neighbours(pop, &point, None, policy.k) {
                let ok = ev.eval_member(pop, nb)?;
                stop_if_exhausted!(ok);
            }
        } else {
            let anchor = *cluster
                .members
                .iter()
                .min_by(|&&a, &&b| {
                    squared_distance(&pop[a].genome, &cluster.centroid)
                        .total_cmp(&squared_distance(&pop[b].genome, &cluster.centroid))
                        .then(a.cmp(&b))
                })
                .expect("clusters are non-empty");
            let ok = ev.eval_member(pop, anchor)?;
            stop_if_exhausted!(ok);
            for nb in ev.neighbours(pop, &pop[anchor].genome, Some(anchor), policy.k) {
                let ok = ev.eval_member(pop, nb)?;
                stop_if_exhausted!(ok);
            }
        }
    }

    // axis-wise expansion around the surrogate optimum
    let origin = pop[best].genome.clone();
    for d in 0..spec.dimension {
        let base = match policy.probe_scale {
            ProbeScale::DomainFraction(f) => f * spec.range(d),
            ProbeScale::PopulationSpread => {
                let mean = pop.iter().map(|i| i.genome[d]).sum::<f64>() / pop.len() as f64;
                let var = pop.iter().map(|i| (i.genome[d] - mean).powi(2)).sum::<f64>() / pop.len() as f64;
                var.sqrt().max(1e-12 * spec.range(d))
            }
        };
        for step in 0..policy.max_expansion_steps {
            let offset = base * 2f64.powi(step as i32);
            let mut probe = origin.clone();
            probe[d] = if origin[d] + offset <= spec.upper[d] {
                origin[d] + offset
            } else {
                origin[d] - offset
            };
            spec.clamp(&mut probe);
            let Some(truth) = ev.eval(&probe, None)? else {
                return Ok(ev.out);
            };
            ev.out.probes += 1;
            let delta = accuracy_delta(truth, predictor(&probe)?);
            if delta.percent <= policy.delta_threshold {
                break;
            }
        }
    }
    debug!(
        "update: {} true evaluations ({} probes)",
        ev.out.evaluations.len(),
        ev.out.probes
    );
    Ok(ev.out)
}

/// Nearest archived distance, by linear scan; exposed for diagnostics.
pub fn nearest_archived(x: &[f64], ledger: &EvaluationLedger) -> Option<(usize, f64)> {
    ledger
        .archive()
        .iter()
        .enumerate()
        .map(|(i, e)| (i, distance(x, &e.point)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmark::{FunctionId, Problem};
    use crate::evolution::FitnessRecord;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ind(genome: Vec<f64>, v: f64) -> Individual {
        Individual::with_fitness(genome, FitnessRecord::surrogate(v))
    }

    #[test]
    fn merit_examples() {
        let w = MeritWeights::default();
        assert_eq!(merit(5.0, 1.0, 0.5, 2.0, &w), 1.5);
        let off = MeritWeights {
            rho_sigma: 0.0,
            rho_distance: 0.0,
            rho_sparseness: 0.0,
            ..MeritWeights::default()
        };
        assert_eq!(merit(3.25, 9.0, 0.7, 4.0, &off), 3.25);
        let any = MeritWeights {
            rho_sigma: 0.3,
            rho_distance: 7.0,
            rho_sparseness: 2.0,
            ..MeritWeights::default()
        };
        assert_eq!(merit(0.0, 0.0, 0.0, 0.0, &any), 0.0);
    }

    #[test]
    fn sparseness_examples() {
        let c = |k: usize| Cluster {
            members: (0..k).collect(),
            centroid: vec![],
            sigma: 0.0,
            sparseness: 0.0,
        };
        assert_eq!(sparseness(&c(10), 5), 2.0);
        assert_eq!(sparseness(&c(1), 20), 0.05);
        assert_eq!(sparseness(&c(0), 3), 0.0);
    }

    #[test]
    fn delta_examples() {
        assert_eq!(accuracy_delta(100.0, 90.0).percent, 10.0);
        assert_eq!(accuracy_delta(3.7, 3.7).percent, 0.0);
        assert_eq!(accuracy_delta(-50.0, -55.0).percent, 10.0);
        let z = accuracy_delta(0.0, 0.25);
        assert!(z.absolute_fallback);
        assert_eq!(z.percent, 25.0);
    }

    #[test]
    fn distance_examples() {
        let spec = ProblemSpec::with_bounds(FunctionId::Sphere, vec![0.0], vec![10.0]).unwrap();
        let mut p = Problem::clean(spec.clone());
        let mut ledger = EvaluationLedger::new(None);
        assert!(matches!(
            min_distance_to_archive(&[1.0], &ledger, spec.diagonal()),
            Err(Error::InvalidState(_))
        ));
        ledger.evaluate(&mut p, &[0.0]).unwrap();
        assert_eq!(min_distance_to_archive(&[5.0], &ledger, spec.diagonal()).unwrap(), 0.5);
        assert_eq!(min_distance_to_archive(&[0.0], &ledger, spec.diagonal()).unwrap(), 0.0);
    }

    #[test]
    fn ledger_budget_and_csv() {
        let spec = ProblemSpec::new(FunctionId::Sphere, 2).unwrap();
        let mut p = Problem::clean(spec);
        let mut ledger = EvaluationLedger::new(Some(2));
        ledger.set_generation(3);
        ledger.evaluate(&mut p, &[1.0, 0.0]).unwrap();
        ledger.evaluate(&mut p, &[0.5, 0.0]).unwrap();
        assert!(matches!(
            ledger.evaluate(&mut p, &[0.0, 0.0]),
            Err(Error::BudgetExhausted { budget: 2 })
        ));
        assert_eq!(ledger.count(), 2);
        assert_eq!(ledger.best().unwrap().value, 0.25);
        let mut out = Vec::new();
        ledger.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().next().unwrap(), "x1,x2,value,generation");
        assert_eq!(text.lines().nth(1).unwrap(), "1e0,0e0,1e0,3");
    }

    #[test]
    fn clustering_blobs_and_limits() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut pop = Vec::new();
        for i in 0..5 {
            pop.push(ind(vec![0.0 + 0.01 * i as f64, 0.0], i as f64));
            pop.push(ind(vec![100.0, 100.0 - 0.01 * i as f64], 10.0 + i as f64));
        }
        let clusters = cluster_population(&pop, 2, &mut rng).unwrap();
        assert_eq!(clusters.len(), 2);
        for c in &clusters {
            let first = pop[c.members[0]].genome[0] > 50.0;
            assert!(c.members.iter().all(|&i| (pop[i].genome[0] > 50.0) == first));
            assert_eq!(c.members.len(), 5);
            assert_eq!(c.sparseness, 2.5);
        }

        let one = cluster_population(&pop, 1, &mut rng).unwrap();
        assert_eq!(one.len(), 1);
        let mean_x = pop.iter().map(|i| i.genome[0]).sum::<f64>() / 10.0;
        assert!((one[0].centroid[0] - mean_x).abs() < 1e-12);

        let single = cluster_population(&pop, 10, &mut rng).unwrap();
        assert_eq!(single.len(), 10);
        assert!(single.iter().all(|c| c.members.len() == 1 && c.sigma == 0.0));
        assert_eq!(adapt_cluster_count(&single, 0.0), 10);

        assert!(matches!(
            cluster_population(&pop, 11, &mut rng),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn adapt_counts_spread_clusters() {
        let c = |sigma: f64| Cluster {
            members: vec![0, 1],
            centroid: vec![0.0],
            sigma,
            sparseness: 1.0,
        };
        let clusters = vec![c(0.1), c(2.0), c(0.5), c(3.0), c(0.2)];
        assert_eq!(adapt_cluster_count(&clusters, 1.0), 7);
        assert_eq!(adapt_cluster_count(&clusters, 10.0), 5);
    }

    fn sphere_population(n: usize, rng: &mut ChaCha8Rng) -> (ProblemSpec, Vec<Individual>) {
        let spec = ProblemSpec::new(FunctionId::Sphere, 2).unwrap();
        let pop = (0..n)
            .map(|_| {
                let g = vec![rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)];
                let v = crate::benchmark::sphere(&g);
                ind(g, v)
            })
            .collect();
        (spec, pop)
    }

    #[test]
    fn update_with_one_neighbour_two_clusters() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let (spec, pop) = sphere_population(10, &mut rng);
        let clusters = cluster_population(&pop, 2, &mut rng).unwrap();
        let mut p = Problem::clean(spec.clone());
        let mut ledger = EvaluationLedger::new(None);
        let policy = UpdatePolicy {
            k: 1,
            ..UpdatePolicy::default()
        };
        let out = targeted_update(&clusters, &pop, &mut p, &mut ledger, &policy, |x| {
            Ok(crate::benchmark::sphere(x))
        })
        .unwrap();
        let members = out.evaluations.iter().filter(|e| e.population_index.is_some()).count();
        assert!(members >= 4, "{members}");
        // exact surrogate: every axis stops after its first probe
        assert_eq!(out.probes, 2);
        assert_eq!(ledger.count(), out.evaluations.len());
    }

    #[test]
    fn update_respects_budget() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (spec, pop) = sphere_population(20, &mut rng);
        let clusters = cluster_population(&pop, 3, &mut rng).unwrap();
        let mut p = Problem::clean(spec);
        let mut ledger = EvaluationLedger::new(Some(4));
        let out = targeted_update(&clusters, &pop, &mut p, &mut ledger, &UpdatePolicy::default(), |_| {
            Ok(0.0)
        })
        .unwrap();
        assert!(out.budget_exhausted);
        assert_eq!(ledger.count(), 4);
        assert_eq!(out.evaluations.len(), 4);
    }

    #[test]
    fn merit_prefers_lower_prediction_within_a_cluster() {
        let spec = ProblemSpec::new(FunctionId::Sphere, 2).unwrap();
        let mut p = Problem::clean(spec.clone());
        let mut ledger = EvaluationLedger::new(None);
        ledger.evaluate(&mut p, &[0.0, 0.0]).unwrap();
        let mut pop = vec![ind(vec![1.0, 0.0], 3.0), ind(vec![0.0, 1.0], 2.0)];
        let clusters = vec![Cluster {
            members: vec![0, 1],
            centroid: vec![0.5, 0.5],
            sigma: 0.5,
            sparseness: 1.0,
        }];
        assign_merit(&mut pop, &clusters, &ledger, &spec, &MeritWeights::default()).unwrap();
        let m0 = pop[0].fitness.unwrap().merit.unwrap();
        let m1 = pop[1].fitness.unwrap().merit.unwrap();
        assert!(m1 < m0);
    }
}
