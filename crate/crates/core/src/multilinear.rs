//! Simple multivectors stored by their factors.
//!
//! Norms and inner products go through Gram determinants, so nothing is ever
//! expanded in the `2^{2n+1}`-dimensional exterior algebra.

use crate::error::{Error, Result};
use crate::linalg;

/// A simple `m`-vector `a_1 ∧ ... ∧ a_m`.
#[derive(Clone, Debug, PartialEq)]
pub struct Blade {
    dim: usize,
    factors: Vec<Vec<f64>>,
}

impl Blade {
    pub fn new(dim: usize, factors: Vec<Vec<f64>>) -> Result<Self> {
        if factors.len() > dim {
            return Err(Error::UnsupportedGrade { grade: factors.len(), dim });
        }
        for f in &factors {
            if f.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: f.len() });
            }
        }
        Ok(Self { dim, factors })
    }

    /// `e_1 ∧ ... ∧ e_dim`.
    pub fn orientation(dim: usize) -> Self {
        Self { dim, factors: (0..dim).map(|i| linalg::unit(dim, i)).collect() }
    }

    pub fn grade(&self) -> usize {
        self.factors.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn factors(&self) -> &[Vec<f64>] {
        &self.factors
    }

    pub fn wedge(&self, other: &Blade) -> Result<Blade> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: other.dim });
        }
        let mut factors = self.factors.clone();
        factors.extend(other.factors.iter().cloned());
        Blade::new(self.dim, factors)
    }

    pub fn scaled(mut self, s: f64) -> Blade {
        if let Some(f) = self.factors.first_mut() {
            f.iter_mut().for_each(|x| *x *= s);
        }
        self
    }
}

/// `sqrt(det G)` with `G` the Gram matrix of the factors.
pub fn blade_norm(b: &Blade) -> f64 {
    let g = linalg::gram(&b.factors, &b.factors);
    linalg::det(&g).max(0.0).sqrt()
}

/// `<a, b> = det(<a_i, b_j>)`.
pub fn blade_inner(a: &Blade, b: &Blade) -> Result<f64> {
    if a.grade() != b.grade() {
        return Err(Error::GradeMismatch(a.grade(), b.grade()));
    }
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch { expected: a.dim, found: b.dim });
    }
    Ok(linalg::det(&linalg::gram(&a.factors, &b.factors)))
}

/// Hodge star with respect to the standard orientation, characterized by
/// `ξ ∧ *η = <ξ, η> e` for every `ξ` of the same grade as `η`.
pub fn hodge_star(b: &Blade) -> Result<Blade> {
    let dim = b.dim;
    let m = b.grade();
    if m == 0 || m == dim {
        return Err(Error::UnsupportedGrade { grade: m, dim });
    }
    let size = blade_norm(b);
    let scale = b.factors.iter().map(|f| linalg::norm(f)).fold(1.0, |acc, x| acc * x.max(1e-300));
    if size <= 1e-12 * scale {
        return Err(Error::DependentFactors);
    }
    // Gram-Schmidt keeps the orientation of the factor list.
    let q = linalg::orthonormalize(&b.factors, 1e-12).ok_or(Error::DependentFactors)?;
    let candidates: Vec<Vec<f64>> = (0..dim).map(|i| linalg::unit(dim, i)).collect();
    let complement = linalg::complete_orthonormal(&q, &candidates, dim);
    let mut full = q;
    full.extend(complement.iter().cloned());
    let frame = nalgebra::DMatrix::from_fn(dim, dim, |i, j| full[j][i]);
    let sign = linalg::det(&frame).signum();
    Blade::new(dim, complement).map(|c| c.scaled(sign * size))
}
