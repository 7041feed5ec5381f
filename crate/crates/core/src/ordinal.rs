//! Kernel ordinal regression over pairwise preferences.
//!
//! A pair `(i, j, r)` states that point `i` is better than point `j` when
//! `r = +1` (and worse when `r = −1`). The model learns a score `s(x)` in the
//! kernel feature space such that `r · (s(x_i) − s(x_j)) ≥ 1` with maximal
//! margin. The 2-norm soft margin is realised by training a hard-margin
//! machine on the augmented kernel `K + I/C`.
//!
//! Only the order induced by `s` carries meaning; higher score is better.

use log::{debug, warn};
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PairStrategy {
    /// Pairs between consecutive fitness levels after sorting (`m − 1` pairs
    /// for `m` distinct values).
    #[default]
    Adjacent,
    /// Every pair with differing fitness.
    FullPairwise,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PreferencePair {
    /// Lower training index of the two.
    pub i: usize,
    pub j: usize,
    /// `+1` when `i` is better (lower objective) than `j`, else `−1`.
    pub label: i8,
}

/// Preference pairs implied by `fitness` (minimization). Pairs joining two
/// bit-identical points with different fitness are dropped with a warning;
/// the count of dropped pairs is returned alongside.
pub fn build_pairs(
    points: &[Vec<f64>],
    fitness: &[f64],
    strategy: PairStrategy,
) -> Result<(Vec<PreferencePair>, usize)> {
    if points.len() != fitness.len() {
        return Err(Error::InvalidArgument(format!(
            "{} points but {} fitness values",
            points.len(),
            fitness.len()
        )));
    }
    if points.len() < 2 {
        return Err(Error::InvalidArgument(
            "ordinal regression needs at least 2 points".into(),
        ));
    }
    if fitness.iter().any(|f| f.is_nan()) {
        return Err(Error::InvalidArgument("NaN fitness value".into()));
    }

    let mut candidates: Vec<(usize, usize)> = Vec::new();
    match strategy {
        PairStrategy::FullPairwise => {
            for a in 0..points.len() {
                for b in a + 1..points.len() {
                    if fitness[a] != fitness[b] {
                        candidates.push((a, b));
                    }
                }
            }
        }
        PairStrategy::Adjacent => {
            let mut order: Vec<usize> = (0..points.len()).collect();
            order.sort_by(|&a, &b| fitness[a].total_cmp(&fitness[b]));
            // group equal values; link every member of a level to every member of the next
            let mut levels: Vec<Vec<usize>> = Vec::new();
            for idx in order {
                match levels.last_mut() {
                    Some(level) if fitness[level[0]] == fitness[idx] => level.push(idx),
                    _ => levels.push(vec![idx]),
                }
            }
            for w in levels.windows(2) {
                for &a in &w[0] {
                    for &b in &w[1] {
                        candidates.push((a.min(b), a.max(b)));
                    }
                }
            }
        }
    }
    if candidates.is_empty() {
        return Err(Error::InvalidArgument(
            "all fitness values are tied; no preference pairs can be formed".into(),
        ));
    }

    let mut dropped = 0;
    let mut pairs = Vec::with_capacity(candidates.len());
    for (i, j) in candidates {
        if points[i] == points[j] {
            warn!("inconsistent preference: points {i} and {j} coincide but differ in fitness; pair dropped");
            dropped += 1;
            continue;
        }
        let label = if fitness[i] < fitness[j] { 1 } else { -1 };
        pairs.push(PreferencePair { i, j, label });
    }
    pairs.sort_unstable();
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("every preference pair was inconsistent".into()));
    }
    Ok((pairs, dropped))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrdinalConfig {
    pub c: f64,
    pub strategy: PairStrategy,
    /// Stop when the largest projected-gradient entry falls below this.
    pub tolerance: f64,
    pub max_sweeps: usize,
}

impl Default for OrdinalConfig {
    fn default() -> Self {
        OrdinalConfig {
            c: 1.0e6,
            strategy: PairStrategy::Adjacent,
            tolerance: 1e-6,
            max_sweeps: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankingModel {
    pub kernel: KernelSpec,
    pub points: Vec<Vec<f64>>,
    pub pairs: Vec<PreferencePair>,
    /// Dual variable per pair.
    pub dual: Vec<f64>,
    pub c: f64,
    pub dropped_pairs: usize,
    pub converged: bool,
    /// Largest projected gradient at exit.
    pub gap: f64,
    /// Expansion weight per training point: `s(x) = Σ_p w_p k(x_p, x)`.
    weights: Vec<f64>,
}

/// Fits a ranking model to `fitness` (lower is better) at the given points.
pub fn train_ordinal(
    points: &[Vec<f64>],
    fitness: &[f64],
    kernel: KernelSpec,
    cfg: &OrdinalConfig,
) -> Result<RankingModel> {
    kernel.validate()?;
    if !(cfg.c > 0.0) {
        return Err(Error::InvalidArgument(format!("C must be > 0, got {}", cfg.c)));
    }
    let (pairs, dropped) = build_pairs(points, fitness, cfg.strategy)?;
    let dimension = points[0].len();
    if points.iter().any(|p| p.len() != dimension) {
        return Err(Error::InvalidArgument("training points differ in dimension".into()));
    }

    // Only points that appear in some pair enter the Gram matrix.
    let mut used: Vec<usize> = pairs.iter().flat_map(|p| [p.i, p.j]).collect();
    used.sort_unstable();
    used.dedup();
    let mut slot = vec![usize::MAX; points.len()];
    for (s, &p) in used.iter().enumerate() {
        slot[p] = s;
    }
    let u = used.len();
    let inv_c = 1.0 / cfg.c;
    let mut kt = vec![0.0; u * u];
    for a in 0..u {
        for b in a..u {
            let mut v = kernel.eval(&points[used[a]], &points[used[b]]);
            if a == b {
                v += inv_c;
            }
            kt[a * u + b] = v;
            kt[b * u + a] = v;
        }
    }
    let kv = |a: usize, b: usize| kt[slot[a] * u + slot[b]];

    let m = pairs.len();
    let mut q = vec![0.0; m * m];
    for k in 0..m {
        let pk = pairs[k];
        for l in k..m {
            let pl = pairs[l];
            let v = f64::from(pk.label)
                * f64::from(pl.label)
                * (kv(pk.i, pl.i) - kv(pk.i, pl.j) - kv(pk.j, pl.i) + kv(pk.j, pl.j));
            q[k * m + l] = v;
            q[l * m + k] = v;
        }
    }

    // min ½ αᵀQα − 1ᵀα, α ≥ 0: exact pivoting first, coordinate descent
    // to polish or as fallback when Q is singular
    let mut alpha = principal_pivoting(&q, m).unwrap_or_else(|| vec![0.0; m]);
    let mut q_alpha = vec![0.0f64; m];
    for (k, qa) in q_alpha.iter_mut().enumerate() {
        *qa = q[k * m..(k + 1) * m].iter().zip(&alpha).map(|(a, b)| a * b).sum();
    }
    let mut gap = f64::INFINITY;
    let mut converged = false;
    for _ in 0..cfg.max_sweeps {
        gap = 0.0;
        for k in 0..m {
            let g = q_alpha[k] - 1.0;
            let pg = if alpha[k] > 0.0 { g } else { g.min(0.0) };
            gap = f64::max(gap, pg.abs());
            let qkk = q[k * m + k];
            if pg == 0.0 || qkk <= 0.0 {
                continue;
            }
            let new = (alpha[k] - g / qkk).max(0.0);
            let delta = new - alpha[k];
            if delta != 0.0 {
                alpha[k] = new;
                let row = &q[k * m..(k + 1) * m];
                for (qa, qv) in q_alpha.iter_mut().zip(row) {
                    *qa += delta * qv;
                }
            }
        }
        if gap < cfg.tolerance {
            converged = true;
            break;
        }
    }
    if !converged {
        debug!(
            "ordinal regression stopped after {} sweeps with gap {gap:e}",
            cfg.max_sweeps
        );
    }

    let mut weights = vec![0.0; points.len()];
    for (p, a) in pairs.iter().zip(&alpha) {
        let w = a * f64::from(p.label);
        weights[p.i] += w;
        weights[p.j] -= w;
    }

    Ok(RankingModel {
        kernel,
        points: points.to_vec(),
        pairs,
        dual: alpha,
        c: cfg.c,
        dropped_pairs: dropped,
        converged,
        gap,
        weights,
    })
}

/// Block principal pivoting for the LCP `w = Qα − 1`, `α, w ≥ 0`, `αᵀw = 0`.
/// `None` when a principal block is not positive definite or pivoting stalls.
fn principal_pivoting(q: &[f64], m: usize) -> Option<Vec<f64>> {
    const FEAS: f64 = 1e-12;
    let mut free = vec![false; m];
    let mut alpha = vec![0.0; m];
    let mut best_infeasible = m + 1;
    let mut backups = 3;
    for _ in 0..(10 * m + 50) {
        let idx: Vec<usize> = (0..m).filter(|&k| free[k]).collect();
        alpha.iter_mut().for_each(|a| *a = 0.0);
        if !idx.is_empty() {
            let f = idx.len();
            let block = DMatrix::from_fn(f, f, |r, c| q[idx[r] * m + idx[c]]);
            let sol = block.cholesky()?.solve(&DVector::from_element(f, 1.0));
            for (&k, v) in idx.iter().zip(sol.iter()) {
                alpha[k] = *v;
            }
        }
        let infeasible: Vec<usize> = (0..m)
            .filter(|&k| {
                if free[k] {
                    alpha[k] < 0.0
                } else {
                    let w: f64 = idx.iter().map(|&l| q[k * m + l] * alpha[l]).sum::<f64>() - 1.0;
                    w < -FEAS
                }
            })
            .collect();
        if infeasible.is_empty() {
            return Some(alpha);
        }
        if infeasible.len() < best_infeasible {
            best_infeasible = infeasible.len();
            backups = 3;
            infeasible.iter().for_each(|&k| free[k] = !free[k]);
        } else if backups > 0 {
            backups -= 1;
            infeasible.iter().for_each(|&k| free[k] = !free[k]);
        } else {
            let k = *infeasible.last().expect("nonempty");
            free[k] = !free[k];
        }
    }
    None
}

impl RankingModel {
    /// Internal score; higher is better. Only its order is meaningful.
    pub fn score(&self, x: &[f64]) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .filter(|(_, w)| **w != 0.0)
            .map(|(p, w)| w * self.kernel.eval(p, x))
            .sum()
    }

    pub fn scores<P: AsRef<[f64]>>(&self, candidates: &[P]) -> Vec<f64> {
        candidates.iter().map(|c| self.score(c.as_ref())).collect()
    }

    /// Candidate indices best first; ties keep input order.
    pub fn rank<P: AsRef<[f64]>>(&self, candidates: &[P]) -> Vec<usize> {
        rank_by_scores(&self.scores(candidates))
    }
}

/// Indices ordered by descending score; stable on ties.
pub fn rank_by_scores(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order
}

/// Kendall rank correlation (τ-a) between two equally long sequences.
pub fn kendall_tau(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "kendall_tau needs equal lengths");
    let n = a.len();
    if n < 2 {
        return 1.0;
    }
    let mut s = 0i64;
    for i in 0..n {
        for j in i + 1..n {
            let x = (a[i] - a[j]).partial_cmp(&0.0).map_or(0, |o| o as i64);
            let y = (b[i] - b[j]).partial_cmp(&0.0).map_or(0, |o| o as i64);
            s += x * y;
        }
    }
    s as f64 / (n * (n - 1) / 2) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn neg(v: &[f64]) -> Vec<f64> {
        v.iter().map(|s| -s).collect()
    }

    #[test]
    fn three_point_line() {
        let pts = vec![vec![0.1], vec![0.5], vec![0.9]];
        let fit = vec![0.1, 0.5, 0.9];
        let cfg = OrdinalConfig::default();
        let m = train_ordinal(&pts, &fit, KernelSpec::Linear, &cfg).unwrap();
        let s = m.scores(&pts);
        assert!(s[0] > s[1] && s[1] > s[2], "{s:?}");
        assert_eq!(m.rank(&pts), vec![0, 1, 2]);
        assert_eq!(kendall_tau(&fit, &neg(&s)), 1.0);
    }

    #[test]
    fn single_pair() {
        let pts = vec![vec![2.0, -1.0], vec![0.5, 0.5]];
        let m = train_ordinal(&pts, &[3.0, 1.0], KernelSpec::polynomial(2), &OrdinalConfig::default()).unwrap();
        assert_eq!(m.pairs, vec![PreferencePair { i: 0, j: 1, label: -1 }]);
        assert!(m.score(&pts[1]) > m.score(&pts[0]));
    }

    #[test]
    fn tied_and_inconsistent_inputs() {
        let pts = vec![vec![0.0], vec![1.0], vec![2.0]];
        assert!(matches!(
            train_ordinal(&pts, &[1.0, 1.0, 1.0], KernelSpec::Linear, &OrdinalConfig::default()),
            Err(Error::InvalidArgument(_))
        ));

        let dup = vec![vec![0.0], vec![0.0], vec![2.0]];
        let (pairs, dropped) = build_pairs(&dup, &[1.0, 2.0, 3.0], PairStrategy::Adjacent).unwrap();
        assert_eq!(dropped, 1);
        assert_eq!(pairs, vec![PreferencePair { i: 1, j: 2, label: 1 }]);
    }

    #[test]
    fn adjacent_pairs_cover_tie_levels() {
        let pts: Vec<Vec<f64>> = (0..4).map(|i| vec![i as f64]).collect();
        let (pairs, _) = build_pairs(&pts, &[1.0, 2.0, 2.0, 3.0], PairStrategy::Adjacent).unwrap();
        assert_eq!(
            pairs,
            vec![
                PreferencePair { i: 0, j: 1, label: 1 },
                PreferencePair { i: 0, j: 2, label: 1 },
                PreferencePair { i: 1, j: 3, label: 1 },
                PreferencePair { i: 2, j: 3, label: 1 },
            ]
        );
        let (full, _) = build_pairs(&pts, &[1.0, 2.0, 2.0, 3.0], PairStrategy::FullPairwise).unwrap();
        assert_eq!(full.len(), 5);
    }

    #[test]
    fn rank_contracts() {
        let pts = vec![vec![0.0], vec![1.0], vec![2.0]];
        let m = train_ordinal(&pts, &[0.0, 1.0, 2.0], KernelSpec::Linear, &OrdinalConfig::default()).unwrap();
        assert_eq!(m.rank(&[vec![0.7]]), vec![0]);
        assert_eq!(m.rank(&[vec![2.0], vec![0.5], vec![0.5], vec![1.5]]), vec![1, 2, 3, 0]);
    }

    #[test]
    fn kendall_tau_values() {
        assert_eq!(kendall_tau(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]), 1.0);
        assert_eq!(kendall_tau(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), -1.0);
        assert!((kendall_tau(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]) - 1.0 / 3.0).abs() < 1e-15);
    }
}
