//! Arithmetic of the Heisenberg group `H^n` in symplectic coordinates.
//!
//! A point is a vector `(x_1, ..., x_{2n+1})` in the fixed Heisenberg basis.
//! The first `2n` coordinates form the horizontal layer `H_1`, the last one is
//! the center `H_2`. The group law is
//!
//! ```text
//! p q = p + q + [p, q] / 2,    [p, q] = omega(p_h, q_h) e_{2n+1},
//! omega(p, q) = sum_i (p_i q_{i+n} - p_{i+n} q_i).
//! ```

use std::fmt;
use std::ops::Mul;

use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::linalg;
use crate::tolerance;

pub(crate) type Coords = SmallVec<[f64; 8]>;

/// An element of `H^n`.
#[derive(Clone, PartialEq)]
pub struct Point {
    coords: Coords,
}

impl Point {
    /// Builds a point from `2n+1` finite coordinates, `n >= 1`.
    pub fn new(coords: &[f64]) -> Result<Self> {
        let len = coords.len();
        if len < 3 || len % 2 == 0 {
            return Err(Error::InvalidPoint(format!(
                "expected 2n+1 >= 3 coordinates, got {len}"
            )));
        }
        if let Some(bad) = coords.iter().find(|c| !c.is_finite()) {
            return Err(Error::InvalidPoint(format!("non-finite coordinate {bad}")));
        }
        Ok(Self { coords: Coords::from_slice(coords) })
    }

    pub(crate) fn from_coords(coords: Coords) -> Self {
        debug_assert!(coords.len() % 2 == 1);
        Self { coords }
    }

    pub fn origin(n: usize) -> Self {
        Self { coords: SmallVec::from_elem(0.0, 2 * n + 1) }
    }

    /// The basis vector `e_i`, with `i` zero-based.
    pub fn basis(n: usize, i: usize) -> Self {
        let mut p = Self::origin(n);
        p.coords[i] = 1.0;
        p
    }

    /// A point of `H_1` from its `2n` horizontal coordinates.
    pub fn horizontal(h: &[f64]) -> Result<Self> {
        let mut c: Vec<f64> = h.to_vec();
        c.push(0.0);
        Self::new(&c)
    }

    /// A point from horizontal coordinates and a vertical one.
    pub fn from_parts(h: &[f64], t: f64) -> Result<Self> {
        let mut c: Vec<f64> = h.to_vec();
        c.push(t);
        Self::new(&c)
    }

    pub fn n(&self) -> usize {
        self.coords.len() / 2
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.coords.to_vec()
    }

    pub fn horizontal_part(&self) -> &[f64] {
        &self.coords[..self.coords.len() - 1]
    }

    pub fn vertical_part(&self) -> f64 {
        self.coords[self.coords.len() - 1]
    }

    pub fn is_horizontal(&self) -> bool {
        self.vertical_part().abs() <= tolerance::algebraic()
    }

    /// Euclidean norm of the coordinate vector.
    pub fn euclidean_norm(&self) -> f64 {
        linalg::norm(&self.coords)
    }

    pub fn max_abs_diff(&self, other: &Point) -> f64 {
        self.coords
            .iter()
            .zip(other.coords.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    fn check_same(&self, other: &Point) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        Ok(())
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Point{:?}", self.coords.as_slice())
    }
}

/// The symplectic form on horizontal parts.
pub fn omega(p: &[f64], q: &[f64]) -> f64 {
    let n = p.len() / 2;
    let mut s = 0.0;
    for i in 0..n {
        s += p[i] * q[i + n] - p[i + n] * q[i];
    }
    s
}

fn product_unchecked(p: &Point, q: &Point) -> Point {
    let dim = p.dim();
    let mut c = Coords::with_capacity(dim);
    for i in 0..dim {
        c.push(p.coords[i] + q.coords[i]);
    }
    c[dim - 1] += 0.5 * omega(p.horizontal_part(), q.horizontal_part());
    Point { coords: c }
}

/// Group product `p q`.
pub fn product(p: &Point, q: &Point) -> Result<Point> {
    p.check_same(q)?;
    Ok(product_unchecked(p, q))
}

/// Group inverse; in these coordinates it is the negation.
pub fn inverse(p: &Point) -> Point {
    Point { coords: p.coords.iter().map(|c| -c).collect() }
}

/// Intrinsic dilation `delta_t`: horizontal coordinates scale by `t`, the
/// vertical one by `t^2`.
pub fn dilate(t: f64, p: &Point) -> Result<Point> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::NonPositiveScale(t));
    }
    Ok(dilate_unchecked(t, p))
}

pub(crate) fn dilate_unchecked(t: f64, p: &Point) -> Point {
    let dim = p.dim();
    let mut c: Coords = p.coords.iter().map(|x| t * x).collect();
    c[dim - 1] *= t;
    Point { coords: c }
}

/// Lie bracket `[p, q] = omega(p_h, q_h) e_{2n+1}`.
pub fn bracket(p: &Point, q: &Point) -> Result<Point> {
    p.check_same(q)?;
    let mut out = Point::origin(p.n());
    let last = out.dim() - 1;
    out.coords[last] = omega(p.horizontal_part(), q.horizontal_part());
    Ok(out)
}

/// The complex structure `J` on `H_1`: `J e_i = e_{n+i}`, `J e_{n+i} = -e_i`.
pub fn jmap(h: &Point) -> Result<Point> {
    if !h.is_horizontal() {
        return Err(Error::NotHorizontal(h.vertical_part()));
    }
    Ok(Point::from_coords(jmap_slice(h.horizontal_part()).into_iter().chain([0.0]).collect()))
}

pub(crate) fn jmap_slice(h: &[f64]) -> Vec<f64> {
    let n = h.len() / 2;
    let mut out = vec![0.0; 2 * n];
    for i in 0..n {
        out[n + i] = h[i];
        out[i] = -h[n + i];
    }
    out
}

impl Mul for &Point {
    type Output = Point;

    /// Group product. Panics on dimension mismatch; use [`product`] for a
    /// fallible version.
    fn mul(self, rhs: &Point) -> Point {
        assert_eq!(self.dim(), rhs.dim(), "product of points of different dimension");
        product_unchecked(self, rhs)
    }
}

/// An orthonormal symplectic basis `(v_1..v_n, w_1..w_n, e_{2n+1})`.
#[derive(Clone, Debug, PartialEq)]
pub struct HeisenbergBasis {
    n: usize,
    vectors: Vec<Point>,
}

impl HeisenbergBasis {
    /// Validates orthonormality and the symplectic relations.
    pub fn new(vectors: Vec<Point>) -> Result<Self> {
        let dim = vectors.len();
        if dim < 3 || dim % 2 == 0 {
            return Err(Error::InvalidPoint(format!("basis of {dim} vectors")));
        }
        let n = dim / 2;
        for v in &vectors {
            if v.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: v.dim() });
            }
        }
        let basis = Self { n, vectors };
        let (orth, symp) = basis.defects();
        let tol = 10.0 * tolerance::algebraic();
        if orth > tol {
            return Err(Error::NotOrthonormal(orth));
        }
        if symp > tol {
            return Err(Error::NotIsotropic(symp));
        }
        if (basis.vectors[dim - 1].vertical_part().abs() - 1.0).abs() > tol {
            return Err(Error::NotOrthonormal(basis.vectors[dim - 1].vertical_part()));
        }
        Ok(basis)
    }

    /// Largest deviations from orthonormality and from the symplectic
    /// relations `omega(v_i, w_j) = delta_ij`, `omega(v_i, v_j) = omega(w_i, w_j) = 0`.
    pub fn defects(&self) -> (f64, f64) {
        let n = self.n;
        let mut orth: f64 = 0.0;
        for (i, a) in self.vectors.iter().enumerate() {
            for (j, b) in self.vectors.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                orth = orth.max((linalg::dot(a.coords(), b.coords()) - target).abs());
            }
        }
        let mut symp: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let (vi, vj) = (&self.vectors[i], &self.vectors[j]);
                let (wi, wj) = (&self.vectors[n + i], &self.vectors[n + j]);
                let delta = if i == j { 1.0 } else { 0.0 };
                symp = symp
                    .max((omega(vi.horizontal_part(), wj.horizontal_part()) - delta).abs())
                    .max(omega(vi.horizontal_part(), vj.horizontal_part()).abs())
                    .max(omega(wi.horizontal_part(), wj.horizontal_part()).abs());
            }
        }
        (orth, symp)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn vectors(&self) -> &[Point] {
        &self.vectors
    }

    pub fn v(&self, i: usize) -> &Point {
        &self.vectors[i]
    }

    pub fn w(&self, i: usize) -> &Point {
        &self.vectors[self.n + i]
    }
}

/// Extends an orthonormal, isotropic family of horizontal vectors
/// `v_1..v_k` to a Heisenberg basis with `w_i = J v_i`. New `v` vectors are
/// picked from the orthogonal complement of `span(v) + J span(v)`.
pub fn extend_heisenberg_basis(v_basis: &[Point]) -> Result<HeisenbergBasis> {
    let Some(first) = v_basis.first() else {
        return Err(Error::InvalidParameter("empty horizontal family".into()));
    };
    let n = first.n();
    if v_basis.len() > n {
        return Err(Error::TooManyVectors { count: v_basis.len(), n });
    }
    let tol = 10.0 * tolerance::algebraic();
    let mut vs: Vec<Vec<f64>> = Vec::with_capacity(n);
    for v in v_basis {
        if v.n() != n {
            return Err(Error::DimensionMismatch { expected: first.dim(), found: v.dim() });
        }
        if !v.is_horizontal() {
            return Err(Error::NotHorizontal(v.vertical_part()));
        }
        vs.push(v.horizontal_part().to_vec());
    }
    for (i, a) in vs.iter().enumerate() {
        for (j, b) in vs.iter().enumerate() {
            let target = if i == j { 1.0 } else { 0.0 };
            let dev = (linalg::dot(a, b) - target).abs();
            if dev > tol {
                return Err(Error::NotOrthonormal(dev));
            }
            let om = omega(a, b).abs();
            if om > tol {
                return Err(Error::NotIsotropic(om));
            }
        }
    }
    let candidates: Vec<Vec<f64>> = (0..2 * n).map(|i| linalg::unit(2 * n, i)).collect();
    let mut span: Vec<Vec<f64>> = Vec::with_capacity(2 * n);
    for v in &vs {
        span.push(v.clone());
        span.push(jmap_slice(v));
    }
    while vs.len() < n {
        let added = linalg::complete_orthonormal(&span, &candidates, span.len() + 1);
        let Some(next) = added.into_iter().next() else {
            return Err(Error::NotOrthonormal(f64::NAN));
        };
        span.push(next.clone());
        span.push(jmap_slice(&next));
        vs.push(next);
    }
    let to_point = |h: &[f64]| Point::horizontal(h).expect("finite horizontal vector");
    let mut vectors: Vec<Point> = vs.iter().map(|v| to_point(v)).collect();
    vectors.extend(vs.iter().map(|v| to_point(&jmap_slice(v))));
    vectors.push(Point::basis(n, 2 * n));
    HeisenbergBasis::new(vectors)
}

/// Worst defects of the group axioms on seeded random samples.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AxiomReport {
    pub associativity: f64,
    pub inverse: f64,
    /// `δ_t(pq)` against `δ_t p δ_t q`, relative to `max(1, t)^2`.
    pub dilation: f64,
    /// Largest defect of extended Heisenberg bases.
    pub basis: f64,
    pub samples: usize,
    pub passed: bool,
}

/// Checks associativity, inverses and the dilation homomorphism on points
/// of `[-1, 1]^{2n+1}` for `n = 1, 2, 3`, and basis extension of random
/// isotropic families, against `tol`.
pub fn check_axioms(samples: usize, seed: u64, tol: f64) -> AxiomReport {
    use rand::Rng;
    let mut rng = crate::mc::stream_rng(seed, 0);
    let draw = |n: usize, rng: &mut crate::mc::McRng| -> Point {
        let c: Vec<f64> = (0..2 * n + 1).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Point::new(&c).expect("finite")
    };
    let (mut assoc, mut inv, mut dil, mut basis) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for i in 0..samples {
        let n = 1 + i % 3;
        let (p, q, r) = (draw(n, &mut rng), draw(n, &mut rng), draw(n, &mut rng));
        let t: f64 = rng.gen_range(0.1..3.0);
        assoc = assoc.max((&(&p * &q) * &r).max_abs_diff(&(&p * &(&q * &r))));
        inv = inv.max((&p * &inverse(&p)).max_abs_diff(&Point::origin(n)));
        let lhs = dilate_unchecked(t, &(&p * &q));
        let rhs = &dilate_unchecked(t, &p) * &dilate_unchecked(t, &q);
        dil = dil.max(lhs.max_abs_diff(&rhs) / t.max(1.0).powi(2));
    }
    for i in 0..(samples / 50).max(1) {
        let n = 1 + i % 3;
        let k = 1 + (i / 3) % n;
        let Ok(v) = crate::split::random_horizontal_subgroup(n, k, &mut rng) else { continue };
        let family: Vec<Point> = v.basis().iter().map(|b| Point::horizontal(b).expect("finite")).collect();
        match extend_heisenberg_basis(&family) {
            Ok(b) => {
                let (a, c) = b.defects();
                basis = basis.max(a).max(c);
            }
            Err(_) => basis = f64::INFINITY,
        }
    }
    let passed = assoc <= tol && inv <= tol && dil <= tol && basis <= tol;
    AxiomReport { associativity: assoc, inverse: inv, dilation: dil, basis, samples, passed }
}
