//! Positive semi-definite kernels and Gram matrices.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    Linear,
    /// `(x·y + offset)^degree`
    Polynomial {
        degree: u32,
        offset: f64,
    },
    /// `exp(−‖x − y‖² / (2·variance))`
    Gaussian {
        variance: f64,
    },
}

impl KernelSpec {
    pub fn polynomial(degree: u32) -> Self {
        KernelSpec::Polynomial { degree, offset: 1.0 }
    }

    pub fn gaussian(variance: f64) -> Self {
        KernelSpec::Gaussian { variance }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Linear => Ok(()),
            KernelSpec::Polynomial { degree, offset } => {
                if degree == 0 || !(offset >= 0.0 && offset.is_finite()) {
                    Err(Error::InvalidArgument(format!(
                        "polynomial kernel needs degree ≥ 1 and offset ≥ 0 (got {degree}, {offset})"
                    )))
                } else {
                    Ok(())
                }
            }
            KernelSpec::Gaussian { variance } => {
                if variance > 0.0 && variance.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidArgument(format!(
                        "gaussian kernel variance must be > 0, got {variance}"
                    )))
                }
            }
        }
    }

    #[inline]
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            KernelSpec::Linear => dot(x, y),
            KernelSpec::Polynomial { degree, offset } => (dot(x, y) + offset).powi(degree as i32),
            KernelSpec::Gaussian { variance } => (-squared_distance(x, y) / (2.0 * variance)).exp(),
        }
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            KernelSpec::Linear => write!(f, "linear"),
            KernelSpec::Polynomial { degree, offset } => write!(f, "polynomial {degree} {offset:e}"),
            KernelSpec::Gaussian { variance } => write!(f, "gaussian {variance:e}"),
        }
    }
}

#[inline]
pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

#[inline]
pub fn squared_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

#[inline]
pub fn distance(x: &[f64], y: &[f64]) -> f64 {
    squared_distance(x, y).sqrt()
}

/// Dense symmetric matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Gram {
    n: usize,
    data: Vec<f64>,
}

impl Gram {
    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.data[a * self.n + b]
    }

    #[inline]
    pub fn row(&self, a: usize) -> &[f64] {
        &self.data[a * self.n..(a + 1) * self.n]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|a| self.row(a).to_vec()).collect()
    }
}

/// `K[a][b] = k(x_a, x_b)`; the upper triangle is computed and mirrored so the
/// result is exactly symmetric.
pub fn gram<P: AsRef<[f64]>>(kernel: &KernelSpec, points: &[P]) -> Gram {
    let n = points.len();
    let mut data = vec![0.0; n * n];
    for a in 0..n {
        for b in a..n {
            let v = kernel.eval(points[a].as_ref(), points[b].as_ref());
            data[a * n + b] = v;
            data[b * n + a] = v;
        }
    }
    Gram { n, data }
}

/// Squared median of pairwise Euclidean distances; falls back to 1.0 when all
/// points coincide.
pub fn median_heuristic_variance<P: AsRef<[f64]>>(points: &[P]) -> f64 {
    let mut d: Vec<f64> = Vec::with_capacity(points.len() * points.len().saturating_sub(1) / 2);
    for a in 0..points.len() {
        for b in a + 1..points.len() {
            d.push(distance(points[a].as_ref(), points[b].as_ref()));
        }
    }
    if d.is_empty() {
        return 1.0;
    }
    let mid = d.len() / 2;
    let (_, m, _) = d.select_nth_unstable_by(mid, f64::total_cmp);
    let m = *m;
    if m > 0.0 && m.is_finite() {
        m * m
    } else {
        1.0
    }
}
