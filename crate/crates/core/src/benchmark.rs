//! Scalable benchmark functions, their noisy variants, and the [`Objective`]
//! abstraction every optimizer evaluates through.
//!
//! All five functions are minimized and have a global minimum of `0.0`:
//!
//! | function    | form                                          | default bounds      | optimum |
//! |-------------|-----------------------------------------------|---------------------|---------|
//! | sphere      | `Σ x_i²`                                      | `[-5.12, 5.12]^n`   | `0`     |
//! | ellipsoidal | `Σ i·x_i²` (1-based `i`)                      | `[-5.12, 5.12]^n`   | `0`     |
//! | schwefel    | `Σ_i (Σ_{j≤i} x_j)²` (Schwefel 1.2)           | `[-65.536, 65.536]^n` | `0`   |
//! | rosenbrock  | `Σ 100(x_{i+1} − x_i²)² + (1 − x_i)²`         | `[-2.048, 2.048]^n` | `1`     |
//! | rastrigin   | `10n + Σ x_i² − 10 cos(2π x_i)`               | `[-5.12, 5.12]^n`   | `0`     |

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FunctionId {
    Sphere,
    Ellipsoidal,
    Schwefel,
    Rosenbrock,
    Rastrigin,
}

impl FunctionId {
    pub const ALL: [FunctionId; 5] = [
        FunctionId::Sphere,
        FunctionId::Ellipsoidal,
        FunctionId::Schwefel,
        FunctionId::Rosenbrock,
        FunctionId::Rastrigin,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FunctionId::Sphere => "sphere",
            FunctionId::Ellipsoidal => "ellipsoidal",
            FunctionId::Schwefel => "schwefel",
            FunctionId::Rosenbrock => "rosenbrock",
            FunctionId::Rastrigin => "rastrigin",
        }
    }

    /// Symmetric per-coordinate search interval used when none is configured.
    pub fn default_bounds(self) -> (f64, f64) {
        match self {
            FunctionId::Sphere | FunctionId::Ellipsoidal | FunctionId::Rastrigin => (-5.12, 5.12),
            FunctionId::Rosenbrock => (-2.048, 2.048),
            FunctionId::Schwefel => (-65.536, 65.536),
        }
    }

    /// Raw function value; `x` may have any length ≥ 1.
    pub fn apply(self, x: &[f64]) -> f64 {
        match self {
            FunctionId::Sphere => sphere(x),
            FunctionId::Ellipsoidal => ellipsoidal(x),
            FunctionId::Schwefel => schwefel_1_2(x),
            FunctionId::Rosenbrock => rosenbrock(x),
            FunctionId::Rastrigin => rastrigin(x),
        }
    }

    fn optimum_coordinate(self) -> f64 {
        match self {
            FunctionId::Rosenbrock => 1.0,
            _ => 0.0,
        }
    }
}

impl fmt::Display for FunctionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FunctionId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FunctionId::ALL
            .iter()
            .copied()
            .find(|f| f.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown function '{s}'")))
    }
}

pub fn sphere(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

pub fn ellipsoidal(x: &[f64]) -> f64 {
    x.iter().enumerate().map(|(i, v)| (i + 1) as f64 * v * v).sum()
}

pub fn schwefel_1_2(x: &[f64]) -> f64 {
    let mut prefix = 0.0;
    let mut total = 0.0;
    for v in x {
        prefix += v;
        total += prefix * prefix;
    }
    total
}

pub fn rosenbrock(x: &[f64]) -> f64 {
    x.windows(2)
        .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
        .sum()
}

pub fn rastrigin(x: &[f64]) -> f64 {
    10.0 * x.len() as f64 + x.iter().map(|v| v * v - 10.0 * (2.0 * PI * v).cos()).sum::<f64>()
}

/// Additive Gaussian observation noise `N(mean, variance)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub mean: f64,
    pub variance: f64,
    /// Stream identifier mixed into the run seed so noise draws never share
    /// state with the optimizer's own random stream.
    pub stream: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec {
            mean: 0.0,
            variance: 1.0,
            stream: 0x6e_6f69_7365,
        }
    }
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.variance > 0.0 && self.variance.is_finite()) || !self.mean.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "noise variance must be finite and > 0 (got mean {}, variance {})",
                self.mean, self.variance
            )));
        }
        Ok(())
    }
}

/// Identity, dimension, bounds and optional noise model of a test problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub function: FunctionId,
    pub dimension: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub noise: Option<NoiseSpec>,
}

impl ProblemSpec {
    pub fn new(function: FunctionId, dimension: usize) -> Result<Self> {
        let (lo, hi) = function.default_bounds();
        Self::with_bounds(function, vec![lo; dimension], vec![hi; dimension])
    }

    pub fn with_bounds(function: FunctionId, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let dimension = lower.len();
        if dimension == 0 {
            return Err(Error::InvalidArgument("dimension must be ≥ 1".into()));
        }
        if upper.len() != dimension {
            return Err(Error::InvalidArgument(format!(
                "bounds length mismatch: {} lower vs {} upper",
                dimension,
                upper.len()
            )));
        }
        let x_star = function.optimum_coordinate();
        for (i, (&lo, &hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "coordinate {i}: need finite lower < upper, got [{lo}, {hi}]"
                )));
            }
            if x_star < lo || x_star > hi {
                return Err(Error::InvalidArgument(format!(
                    "coordinate {i}: bounds [{lo}, {hi}] exclude the known optimum {x_star}"
                )));
            }
        }
        Ok(ProblemSpec {
            function,
            dimension,
            lower,
            upper,
            noise: None,
        })
    }

    pub fn with_noise(mut self, noise: NoiseSpec) -> Result<Self> {
        noise.validate()?;
        self.noise = Some(noise);
        Ok(self)
    }

    pub fn is_noisy(&self) -> bool {
        self.noise.is_some()
    }

    pub fn range(&self, i: usize) -> f64 {
        self.upper[i] - self.lower[i]
    }

    /// Length of the box diagonal; the largest distance between two feasible points.
    pub fn diagonal(&self) -> f64 {
        (0..self.dimension).map(|i| self.range(i).powi(2)).sum::<f64>().sqrt()
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for (i, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lower[i], self.upper[i]);
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dimension
            && x.iter()
                .enumerate()
                .all(|(i, v)| *v >= self.lower[i] && *v <= self.upper[i])
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dimension {
            return Err(Error::InvalidArgument(format!(
                "point has {} coordinates, problem dimension is {}",
                x.len(),
                self.dimension
            )));
        }
        for (i, &v) in x.iter().enumerate() {
            if !(v >= self.lower[i] && v <= self.upper[i]) {
                return Err(Error::OutOfDomain {
                    index: i,
                    value: v,
                    lower: self.lower[i],
                    upper: self.upper[i],
                });
            }
        }
        Ok(())
    }

    /// Deterministic objective value. Points must already be inside the bounds.
    pub fn evaluate_clean(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        Ok(self.function.apply(x))
    }

    pub fn known_optimum(&self) -> (Vec<f64>, f64) {
        (vec![self.function.optimum_coordinate(); self.dimension], 0.0)
    }
}

/// Anything an optimizer can spend true evaluations on.
///
/// `evaluate` is the expensive call that the evaluation ledger counts;
/// `score` is the noise-free value used only for reporting and never
/// feeds back into a search.
pub trait Objective {
    fn spec(&self) -> &ProblemSpec;

    fn evaluate(&mut self, x: &[f64]) -> Result<f64>;

    fn score(&self, x: &[f64]) -> Result<f64> {
        self.spec().evaluate_clean(x)
    }
}

/// A [`ProblemSpec`] bound to its own noise stream for one run.
#[derive(Debug, Clone)]
pub struct Problem {
    spec: ProblemSpec,
    noise: Option<(ChaCha8Rng, Normal<f64>)>,
}

impl Problem {
    /// `seed` is the run seed; the noise stream id from the spec selects an
    /// independent ChaCha stream under it.
    pub fn new(spec: ProblemSpec, seed: u64) -> Result<Self> {
        let noise = match spec.noise {
            Some(ns) => {
                ns.validate()?;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(ns.stream);
                let normal =
                    Normal::new(ns.mean, ns.variance.sqrt()).map_err(|e| Error::InvalidArgument(e.to_string()))?;
                Some((rng, normal))
            }
            None => None,
        };
        Ok(Problem { spec, noise })
    }

    pub fn clean(spec: ProblemSpec) -> Self {
        Problem {
            noise: None,
            spec: ProblemSpec { noise: None, ..spec },
        }
    }

    pub fn evaluate_clean(&self, x: &[f64]) -> Result<f64> {
        self.spec.evaluate_clean(x)
    }

    /// Clean value plus one fresh noise draw.
    pub fn evaluate_noisy(&mut self, x: &[f64]) -> Result<f64> {
        let clean = self.spec.evaluate_clean(x)?;
        let (rng, normal) = self.noise.as_mut().ok_or_else(|| {
            Error::InvalidState("noisy evaluation requested on a problem without a noise model".into())
        })?;
        Ok(clean + normal.sample(rng))
    }
}

impl Objective for Problem {
    fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    fn evaluate(&mut self, x: &[f64]) -> Result<f64> {
        if self.noise.is_some() {
            self.evaluate_noisy(x)
        } else {
            self.evaluate_clean(x)
        }
    }
}

/// Wraps an objective and counts every call that reaches it.
#[derive(Debug, Clone)]
pub struct CountingObjective<O> {
    inner: O,
    calls: usize,
}

impl<O: Objective> CountingObjective<O> {
    pub fn new(inner: O) -> Self {
        CountingObjective { inner, calls: 0 }
    }

    pub fn calls(&self) -> usize {
        self.calls
    }

    pub fn into_inner(self) -> O {
        self.inner
    }
}

impl<O: Objective> Objective for CountingObjective<O> {
    fn spec(&self) -> &ProblemSpec {
        self.inner.spec()
    }

    fn evaluate(&mut self, x: &[f64]) -> Result<f64> {
        self.calls += 1;
        self.inner.evaluate(x)
    }

    fn score(&self, x: &[f64]) -> Result<f64> {
        self.inner.score(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_values() {
        let s5 = ProblemSpec::new(FunctionId::Sphere, 5).unwrap();
        assert_eq!(s5.evaluate_clean(&[0.0; 5]).unwrap(), 0.0);
        let r5 = ProblemSpec::new(FunctionId::Rosenbrock, 5).unwrap();
        assert_eq!(r5.evaluate_clean(&[1.0; 5]).unwrap(), 0.0);
        let s2 = ProblemSpec::new(FunctionId::Sphere, 2).unwrap();
        assert_eq!(s2.evaluate_clean(&[1.0, 2.0]).unwrap(), 5.0);
        let e2 = ProblemSpec::new(FunctionId::Ellipsoidal, 2).unwrap();
        assert_eq!(e2.evaluate_clean(&[1.0, 1.0]).unwrap(), 3.0);
    }

    #[test]
    fn schwefel_hand_values() {
        // prefix sums 1, 3, 6 -> 1 + 9 + 36
        assert_eq!(schwefel_1_2(&[1.0, 2.0, 3.0]), 46.0);
        assert_eq!(schwefel_1_2(&[1.0, -1.0]), 1.0);
    }

    #[test]
    fn rastrigin_hand_value() {
        // each unit coordinate contributes 1 - 10cos(2π) = -9, plus 10 per dimension
        assert!((rastrigin(&[1.0, 1.0]) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn known_optima_evaluate_to_reported_value() {
        for f in FunctionId::ALL {
            for n in [1, 2, 5, 10, 20] {
                let spec = ProblemSpec::new(f, n).unwrap();
                let (x, fx) = spec.known_optimum();
                assert!(spec.contains(&x));
                assert!((spec.evaluate_clean(&x).unwrap() - fx).abs() <= 1e-12, "{f} n={n}");
            }
        }
        let (x, fx) = ProblemSpec::new(FunctionId::Rosenbrock, 20).unwrap().known_optimum();
        assert_eq!((x, fx), (vec![1.0; 20], 0.0));
        let (x, fx) = ProblemSpec::new(FunctionId::Schwefel, 5).unwrap().known_optimum();
        assert_eq!((x, fx), (vec![0.0; 5], 0.0));
    }

    #[test]
    fn dimension_mismatch_and_out_of_bounds() {
        let spec = ProblemSpec::new(FunctionId::Sphere, 3).unwrap();
        assert!(matches!(
            spec.evaluate_clean(&[0.0, 0.0]),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            spec.evaluate_clean(&[0.0, 6.0, 0.0]),
            Err(Error::OutOfDomain { index: 1, .. })
        ));
        assert!(matches!(
            spec.evaluate_clean(&[f64::NAN, 0.0, 0.0]),
            Err(Error::OutOfDomain { index: 0, .. })
        ));
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(ProblemSpec::new(FunctionId::Sphere, 0).is_err());
        assert!(ProblemSpec::with_bounds(FunctionId::Sphere, vec![1.0], vec![1.0]).is_err());
        // optimum at 1 lies outside [-2, 0.5]
        assert!(ProblemSpec::with_bounds(FunctionId::Rosenbrock, vec![-2.0], vec![0.5]).is_err());
        let spec = ProblemSpec::new(FunctionId::Sphere, 2).unwrap();
        let bad = NoiseSpec {
            variance: 0.0,
            ..NoiseSpec::default()
        };
        assert!(spec.with_noise(bad).is_err());
    }

    #[test]
    fn noisy_without_model_is_invalid_state() {
        let mut p = Problem::clean(ProblemSpec::new(FunctionId::Sphere, 2).unwrap());
        assert!(matches!(p.evaluate_noisy(&[0.0, 0.0]), Err(Error::InvalidState(_))));
    }

    #[test]
    fn noisy_calls_differ_and_tiny_variance_is_near_clean() {
        let spec = ProblemSpec::new(FunctionId::Sphere, 2)
            .unwrap()
            .with_noise(NoiseSpec::default())
            .unwrap();
        let mut p = Problem::new(spec.clone(), 1).unwrap();
        let a = p.evaluate(&[1.0, 1.0]).unwrap();
        let b = p.evaluate(&[1.0, 1.0]).unwrap();
        assert_ne!(a, b);

        let tiny = spec
            .with_noise(NoiseSpec {
                variance: 1e-12,
                ..NoiseSpec::default()
            })
            .unwrap();
        let mut p = Problem::new(tiny, 3).unwrap();
        for _ in 0..100 {
            assert!((p.evaluate(&[1.0, 1.0]).unwrap() - 2.0).abs() < 1e-5);
        }
    }

    #[test]
    fn function_names_round_trip() {
        for f in FunctionId::ALL {
            assert_eq!(f.name().parse::<FunctionId>().unwrap(), f);
        }
        assert!("griewank".parse::<FunctionId>().is_err());
    }
}
