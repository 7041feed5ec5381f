//! ε-insensitive support vector regression trained by sequential minimal
//! optimization.
//!
//! The dual is solved in the doubled-variable form used by LIBSVM: with
//! `α, α* ∈ [0, C]^l`, minimize
//!
//! ```text
//! ½ (α − α*)ᵀ K (α − α*) + ε Σ (α + α*) − zᵀ (α − α*)   s.t.  Σ (α − α*) = 0
//! ```
//!
//! where `z` are the min-max normalized targets. Working-set selection uses
//! second-order information (Fan, Chen & Lin 2005).

use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::kernel::{gram, median_heuristic_variance, Gram, KernelSpec};

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SvrConfig {
    pub c: f64,
    pub epsilon: f64,
    /// `None` selects a Gaussian kernel whose variance is the squared median
    /// pairwise distance of the training inputs.
    pub kernel: Option<KernelSpec>,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SvrConfig {
    fn default() -> Self {
        SvrConfig {
            c: 100.0,
            epsilon: 1e-3,
            kernel: None,
            tolerance: 1e-6,
            max_iterations: 100_000,
        }
    }
}

impl SvrConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidArgument(format!("SVR C must be > 0, got {}", self.c)));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "SVR epsilon must be ≥ 0, got {}",
                self.epsilon
            )));
        }
        if !(self.tolerance > 0.0) || self.max_iterations == 0 {
            return Err(Error::InvalidArgument(
                "SVR tolerance must be > 0 and max iterations ≥ 1".into(),
            ));
        }
        if let Some(k) = &self.kernel {
            k.validate()?;
        }
        Ok(())
    }

    pub fn resolve_kernel<P: AsRef<[f64]>>(&self, points: &[P]) -> KernelSpec {
        self.kernel
            .unwrap_or_else(|| KernelSpec::gaussian(median_heuristic_variance(points)))
    }
}

/// Affine map between raw targets and the `[0, 1]` training scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetTransform {
    pub scale: f64,
    pub offset: f64,
}

impl TargetTransform {
    pub fn min_max(y: &[f64]) -> Self {
        let lo = y.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = hi - lo;
        TargetTransform {
            scale: if span > 0.0 && span.is_finite() { span } else { 1.0 },
            offset: lo,
        }
    }

    pub fn normalize(&self, y: f64) -> f64 {
        (y - self.offset) / self.scale
    }

    pub fn denormalize(&self, z: f64) -> f64 {
        z * self.scale + self.offset
    }
}

/// Solution of the ε-SVR dual on a precomputed Gram matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    /// `α` (first `l` entries) followed by `α*`.
    pub alpha: Vec<f64>,
    pub bias: f64,
    pub objective: f64,
    pub iterations: usize,
    /// Maximal KKT violation at exit.
    pub gap: f64,
}

impl DualSolution {
    /// `β_i = α_i − α*_i`
    pub fn coefficients(&self) -> Vec<f64> {
        let l = self.alpha.len() / 2;
        (0..l).map(|i| self.alpha[i] - self.alpha[i + l]).collect()
    }
}

/// `½ βᵀKβ + ε Σ|β| − zᵀβ`, the dual objective in coefficient form.
pub fn svr_dual_objective(k: &Gram, targets: &[f64], beta: &[f64], epsilon: f64) -> f64 {
    let l = beta.len();
    let mut quad = 0.0;
    for a in 0..l {
        if beta[a] == 0.0 {
            continue;
        }
        let row = k.row(a);
        let mut s = 0.0;
        for b in 0..l {
            s += row[b] * beta[b];
        }
        quad += beta[a] * s;
    }
    0.5 * quad + epsilon * beta.iter().map(|b| b.abs()).sum::<f64>()
        - targets.iter().zip(beta).map(|(z, b)| z * b).sum::<f64>()
}

/// SMO on the doubled ε-SVR dual.
pub fn solve_svr_dual(
    k: &Gram,
    targets: &[f64],
    c: f64,
    epsilon: f64,
    tolerance: f64,
    max_iterations: usize,
) -> Result<DualSolution> {
    let l = targets.len();
    if k.size() != l {
        return Err(Error::InvalidArgument(format!(
            "Gram matrix is {}x{} but there are {} targets",
            k.size(),
            k.size(),
            l
        )));
    }
    let n2 = 2 * l;
    let sign = |t: usize| if t < l { 1.0 } else { -1.0 };
    let point = |t: usize| if t < l { t } else { t - l };

    let mut alpha = vec![0.0; n2];
    let mut grad: Vec<f64> = (0..n2)
        .map(|t| {
            if t < l {
                epsilon - targets[t]
            } else {
                epsilon + targets[t - l]
            }
        })
        .collect();

    let diag: Vec<f64> = (0..l).map(|p| k.get(p, p)).collect();
    let mut iterations = 0;
    let mut gap;
    loop {
        let mut gmax = f64::NEG_INFINITY;
        let mut sel_i = None;
        for t in 0..n2 {
            if t < l {
                if alpha[t] < c && -grad[t] >= gmax {
                    gmax = -grad[t];
                    sel_i = Some(t);
                }
            } else if alpha[t] > 0.0 && grad[t] >= gmax {
                gmax = grad[t];
                sel_i = Some(t);
            }
        }

        let mut gmax2 = f64::NEG_INFINITY;
        let mut sel_j = None;
        let mut best_obj = f64::INFINITY;
        let (ki_row, kii) = match sel_i {
            Some(i) => (Some(k.row(point(i))), diag[point(i)]),
            None => (None, 0.0),
        };
        for t in 0..n2 {
            let pt = point(t);
            let diff = if t < l {
                if alpha[t] <= 0.0 {
                    continue;
                }
                gmax2 = gmax2.max(grad[t]);
                gmax + grad[t]
            } else {
                if alpha[t] >= c {
                    continue;
                }
                gmax2 = gmax2.max(-grad[t]);
                gmax - grad[t]
            };
            if let Some(row) = ki_row {
                if diff > 0.0 {
                    let mut quad = kii + diag[pt] - 2.0 * row[pt];
                    if quad <= 0.0 {
                        quad = TAU;
                    }
                    let obj = -(diff * diff) / quad;
                    if obj <= best_obj {
                        best_obj = obj;
                        sel_j = Some(t);
                    }
                }
            }
        }

        gap = gmax + gmax2;
        if gap < tolerance || sel_i.is_none() || sel_j.is_none() {
            break;
        }
        if iterations >= max_iterations {
            return Err(Error::Convergence {
                iterations,
                residual: gap,
            });
        }
        iterations += 1;

        let i = sel_i.unwrap();
        let j = sel_j.unwrap();
        let (yi, yj) = (sign(i), sign(j));
        let (pi, pj) = (point(i), point(j));
        let kij = k.get(pi, pj);
        let (kii, kjj) = (k.get(pi, pi), k.get(pj, pj));
        let (old_i, old_j) = (alpha[i], alpha[j]);

        if yi != yj {
            // Q_ij = yi yj K_ij = −K_ij
            let mut quad = kii + kjj + 2.0 * (yi * yj * kij);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = kii + kjj - 2.0 * (yi * yj * kij);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let di = alpha[i] - old_i;
        let dj = alpha[j] - old_j;
        let row_i = k.row(pi);
        let row_j = k.row(pj);
        let (ci, cj) = (yi * di, yj * dj);
        let (upper, lower) = grad.split_at_mut(l);
        for p in 0..l {
            let step = row_i[p] * ci + row_j[p] * cj;
            upper[p] += step;
            lower[p] -= step;
        }
    }

    // bias from free variables, else midpoint of the feasible interval
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    let mut free_sum = 0.0;
    let mut free = 0usize;
    for t in 0..n2 {
        let y = sign(t);
        let yg = y * grad[t];
        if alpha[t] >= c {
            if y < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    let rho = if free > 0 {
        free_sum / free as f64
    } else {
        (ub + lb) / 2.0
    };

    let beta: Vec<f64> = (0..l).map(|i| alpha[i] - alpha[i + l]).collect();
    let objective = svr_dual_objective(k, targets, &beta, epsilon);
    Ok(DualSolution {
        alpha,
        bias: -rho,
        objective,
        iterations,
        gap: gap.max(0.0),
    })
}

/// Trained regression surrogate; immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateModel {
    pub kernel: KernelSpec,
    pub support: Vec<Vec<f64>>,
    pub coefficients: Vec<f64>,
    pub bias: f64,
    pub transform: TargetTransform,
    pub epsilon: f64,
    pub c: f64,
    pub dual_objective: f64,
    pub iterations: usize,
    /// Largest absolute residual on the normalized training targets.
    pub max_residual: f64,
    dimension: usize,
}

pub fn train_svr<P: AsRef<[f64]>>(x: &[P], y: &[f64], cfg: &SvrConfig) -> Result<SurrogateModel> {
    cfg.validate()?;
    if x.len() != y.len() {
        return Err(Error::InvalidArgument(format!(
            "{} inputs but {} targets",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::InvalidArgument("SVR needs at least 2 training points".into()));
    }
    let dimension = x[0].as_ref().len();
    if x.iter().any(|p| p.as_ref().len() != dimension) {
        return Err(Error::InvalidArgument("training inputs differ in dimension".into()));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite training target".into()));
    }

    let transform = TargetTransform::min_max(y);
    let z: Vec<f64> = y.iter().map(|&v| transform.normalize(v)).collect();
    let kernel = cfg.resolve_kernel(x);
    let k = gram(&kernel, x);
    let sol = solve_svr_dual(&k, &z, cfg.c, cfg.epsilon, cfg.tolerance, cfg.max_iterations)?;
    let beta = sol.coefficients();

    let mut max_residual: f64 = 0.0;
    for (a, target) in z.iter().enumerate() {
        let f: f64 = k.row(a).iter().zip(&beta).map(|(kv, b)| kv * b).sum::<f64>() + sol.bias;
        max_residual = max_residual.max((f - target).abs());
    }

    let mut support = Vec::new();
    let mut coefficients = Vec::new();
    for (p, b) in x.iter().zip(&beta) {
        if *b != 0.0 {
            support.push(p.as_ref().to_vec());
            coefficients.push(*b);
        }
    }

    Ok(SurrogateModel {
        kernel,
        support,
        coefficients,
        bias: sol.bias,
        transform,
        epsilon: cfg.epsilon,
        c: cfg.c,
        dual_objective: sol.objective,
        iterations: sol.iterations,
        max_residual,
        dimension,
    })
}

impl SurrogateModel {
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Prediction on the normalized training scale.
    pub fn predict_normalized(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dimension {
            return Err(Error::InvalidArgument(format!(
                "query has {} coordinates, model expects {}",
                x.len(),
                self.dimension
            )));
        }
        Ok(self
            .support
            .iter()
            .zip(&self.coefficients)
            .map(|(s, b)| b * self.kernel.eval(s, x))
            .sum::<f64>()
            + self.bias)
    }

    /// De-normalized prediction `f_a(x)`.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        Ok(self.transform.denormalize(self.predict_normalized(x)?))
    }

    /// Plain-text dump, one field per line in this order:
    ///
    /// ```text
    /// svr-model 1
    /// kernel <linear | polynomial DEG OFFSET | gaussian VARIANCE>
    /// transform <scale> <offset>
    /// bias <b>
    /// epsilon <ε>
    /// c <C>
    /// support <count> <dimension>
    /// <coefficient> <x_1> ... <x_d>        (count lines)
    /// ```
    pub fn write_dump<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "svr-model 1")?;
        writeln!(w, "kernel {}", self.kernel)?;
        writeln!(w, "transform {:e} {:e}", self.transform.scale, self.transform.offset)?;
        writeln!(w, "bias {:e}", self.bias)?;
        writeln!(w, "epsilon {:e}", self.epsilon)?;
        writeln!(w, "c {:e}", self.c)?;
        writeln!(w, "support {} {}", self.support.len(), self.dimension)?;
        for (s, b) in self.support.iter().zip(&self.coefficients) {
            write!(w, "{b:e}")?;
            for v in s {
                write!(w, " {v:e}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_cfg(eps: f64) -> SvrConfig {
        SvrConfig {
            kernel: Some(KernelSpec::Linear),
            epsilon: eps,
            ..SvrConfig::default()
        }
    }

    #[test]
    fn constant_targets_predict_the_constant() {
        let x: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let y = vec![7.0; 6];
        for kernel in [None, Some(KernelSpec::Linear), Some(KernelSpec::polynomial(2))] {
            let cfg = SvrConfig {
                kernel,
                ..SvrConfig::default()
            };
            let m = train_svr(&x, &y, &cfg).unwrap();
            for q in [[0.0, 0.0], [2.5, -1.0], [100.0, 3.0]] {
                assert!((m.predict(&q).unwrap() - 7.0).abs() <= cfg.epsilon);
            }
            for p in &x {
                assert!((m.predict(p).unwrap() - 7.0).abs() <= cfg.epsilon);
            }
        }
    }

    #[test]
    fn linear_fit_of_a_line() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 / 19.0]).collect();
        let y: Vec<f64> = x.iter().map(|p| 2.0 * p[0]).collect();
        let m = train_svr(&x, &y, &linear_cfg(0.01)).unwrap();
        let p = m.predict(&[0.5]).unwrap();
        assert!((0.97..=1.03).contains(&p), "predict(0.5) = {p}");
    }

    #[test]
    fn target_scaling_scales_predictions() {
        let x: Vec<Vec<f64>> = (0..12)
            .map(|i| vec![(i as f64 * 0.37).sin(), i as f64 / 12.0])
            .collect();
        let y: Vec<f64> = x.iter().map(|p| p[0] * p[0] + 3.0 * p[1]).collect();
        let cfg = SvrConfig::default();
        let a = train_svr(&x, &y, &cfg).unwrap();

        // a power-of-two factor keeps the normalized targets bit-identical
        let y_pow2: Vec<f64> = y.iter().map(|v| v * 1024.0).collect();
        let b = train_svr(&x, &y_pow2, &cfg).unwrap();
        // 10³ perturbs the normalized targets by roundoff, so the solutions
        // agree to solver tolerance only
        let y_1e3: Vec<f64> = y.iter().map(|v| v * 1e3).collect();
        let c = train_svr(&x, &y_1e3, &cfg).unwrap();
        for q in [[0.1, 0.2], [-0.5, 0.9], [0.0, 0.0]] {
            let pa = a.predict(&q).unwrap();
            assert_eq!(b.predict(&q).unwrap(), 1024.0 * pa);
            let pc = c.predict(&q).unwrap();
            assert!((pc - 1e3 * pa).abs() <= 1e3 * a.transform.scale * 1e-5, "{pa} vs {pc}");
        }
    }

    #[test]
    fn prediction_is_the_kernel_expansion() {
        let x = vec![
            vec![0.0, 1.0],
            vec![1.0, 0.5],
            vec![0.3, 0.3],
            vec![0.9, 0.1],
            vec![0.5, 0.7],
        ];
        let y = vec![1.0, 2.5, 0.2, 1.7, 0.9];
        let m = train_svr(&x, &y, &SvrConfig::default()).unwrap();
        let q = [0.4, 0.6];
        let mut s = m.bias;
        for (sv, b) in m.support.iter().zip(&m.coefficients) {
            let d2: f64 = sv.iter().zip(&q).map(|(a, c)| (a - c) * (a - c)).sum();
            let KernelSpec::Gaussian { variance } = m.kernel else {
                panic!("default kernel is gaussian")
            };
            s += b * (-d2 / (2.0 * variance)).exp();
        }
        let expected = s * m.transform.scale + m.transform.offset;
        assert!((m.predict(&q).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn dual_feasibility() {
        let x: Vec<Vec<f64>> = (0..30)
            .map(|i| vec![(i as f64 * 0.7).cos(), (i as f64 * 1.3).sin()])
            .collect();
        let y: Vec<f64> = x.iter().map(|p| (3.0 * p[0]).sin() + p[1]).collect();
        let t = TargetTransform::min_max(&y);
        let z: Vec<f64> = y.iter().map(|v| t.normalize(*v)).collect();
        let k = gram(&KernelSpec::gaussian(0.5), &x);
        let c = 2.0;
        let sol = solve_svr_dual(&k, &z, c, 0.01, 1e-6, 100_000).unwrap();
        assert!(sol.alpha.iter().all(|a| (-1e-12..=c + 1e-12).contains(a)));
        assert!(sol.coefficients().iter().sum::<f64>().abs() < 1e-6);
        assert!(sol.gap < 1e-6);
    }

    #[test]
    fn errors() {
        let cfg = SvrConfig::default();
        assert!(train_svr(&[vec![0.0]], &[1.0], &cfg).is_err());
        assert!(train_svr(&[vec![0.0], vec![1.0]], &[1.0], &cfg).is_err());
        let m = train_svr(&[vec![0.0], vec![1.0]], &[1.0, 2.0], &cfg).unwrap();
        assert!(matches!(m.predict(&[0.0, 1.0]), Err(Error::InvalidArgument(_))));

        let x: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (0..40).map(|i| ((i * 7919) % 13) as f64).collect();
        let tight = SvrConfig {
            max_iterations: 1,
            epsilon: 0.0,
            ..SvrConfig::default()
        };
        assert!(matches!(train_svr(&x, &y, &tight), Err(Error::Convergence { .. })));
    }

    #[test]
    fn dump_layout() {
        let m = train_svr(&[vec![0.0], vec![1.0], vec![2.0]], &[0.0, 1.0, 4.0], &linear_cfg(0.0)).unwrap();
        let mut buf = Vec::new();
        m.write_dump(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "svr-model 1");
        assert_eq!(lines[1], "kernel linear");
        assert!(lines[2].starts_with("transform "));
        assert!(lines[3].starts_with("bias "));
        assert!(lines[6].starts_with(&format!("support {} 1", m.support.len())));
        assert_eq!(lines.len(), 7 + m.support.len());
    }
}
