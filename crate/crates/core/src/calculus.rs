//! Horizontal derivatives along group lines, Pansu differentials and the
//! Jacobians `J_H f`, `J_V f`.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::expr::{self, Expr};
use crate::group::Point;
use crate::linalg;
use crate::metric::{to_sphere, HomogeneousDistance};
use crate::mc;
use crate::split::HorizontalSubgroup;
use crate::tolerance;

/// A real function on `H^n`.
pub trait ScalarFn: Send + Sync {
    fn eval(&self, p: &Point) -> Result<f64>;
}

impl<F> ScalarFn for F
where
    F: Fn(&Point) -> f64 + Send + Sync,
{
    fn eval(&self, p: &Point) -> Result<f64> {
        let v = self(p);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite(format!("function value at {p:?}")))
        }
    }
}

impl ScalarFn for Expr {
    fn eval(&self, p: &Point) -> Result<f64> {
        Ok(Expr::eval(self, p)?)
    }
}

/// `f = (f_1, ..., f_k)` on `H^n`.
#[derive(Clone)]
pub struct DefiningFunction {
    n: usize,
    components: Vec<Arc<dyn ScalarFn>>,
    labels: Vec<String>,
}

impl fmt::Debug for DefiningFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DefiningFunction").field("n", &self.n).field("components", &self.labels).finish()
    }
}

impl DefiningFunction {
    pub fn new(n: usize, components: Vec<Arc<dyn ScalarFn>>, labels: Vec<String>) -> Result<Self> {
        if components.is_empty() || components.len() > n {
            return Err(Error::InvalidParameter(format!(
                "need 1 <= k <= n components, got k = {} for n = {n}",
                components.len()
            )));
        }
        let labels = if labels.len() == components.len() {
            labels
        } else {
            (1..=components.len()).map(|i| format!("f{i}")).collect()
        };
        Ok(Self { n, components, labels })
    }

    /// Parses each component with [`expr::parse`].
    pub fn from_exprs<S: AsRef<str>>(n: usize, sources: &[S]) -> Result<Self> {
        let mut comps: Vec<Arc<dyn ScalarFn>> = Vec::with_capacity(sources.len());
        let mut labels = Vec::with_capacity(sources.len());
        for s in sources {
            comps.push(Arc::new(expr::parse(s.as_ref(), n)?));
            labels.push(s.as_ref().to_string());
        }
        Self::new(n, comps, labels)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn component(&self, i: usize) -> &dyn ScalarFn {
        self.components[i].as_ref()
    }

    pub fn eval(&self, p: &Point) -> Result<Vec<f64>> {
        if p.n() != self.n {
            return Err(Error::DimensionMismatch { expected: 2 * self.n + 1, found: p.dim() });
        }
        self.components.iter().map(|c| c.eval(p)).collect()
    }
}

/// A homogeneous homomorphism `H^n → R^k`, stored as a `k × 2n` matrix
/// acting on horizontal parts.
#[derive(Clone, Debug, PartialEq)]
pub struct HHomomorphism {
    matrix: DMatrix<f64>,
}

impl HHomomorphism {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.ncols() % 2 != 0 || matrix.ncols() == 0 {
            return Err(Error::InvalidParameter(format!("{} columns is not 2n", matrix.ncols())));
        }
        Ok(Self { matrix })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidParameter("ragged rows".into()));
        }
        Self::new(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn k(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.matrix.row(i).iter().copied().collect()
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.k()).map(|i| self.row(i)).collect()
    }

    pub fn apply(&self, p: &Point) -> Result<Vec<f64>> {
        if p.horizontal_part().len() != self.matrix.ncols() {
            return Err(Error::DimensionMismatch { expected: self.matrix.ncols() + 1, found: p.dim() });
        }
        Ok((0..self.k()).map(|i| linalg::dot(&self.row(i), p.horizontal_part())).collect())
    }

    /// `‖∇f_1 ∧ ... ∧ ∇f_k‖`.
    pub fn jacobian_h(&self) -> f64 {
        let rows = self.rows();
        linalg::det(&linalg::gram(&rows, &rows)).max(0.0).sqrt()
    }

    /// `‖∇_V f_1 ∧ ... ∧ ∇_V f_k‖`, equal to `|det(⟨∇f_i, v_j⟩)|` for an
    /// orthonormal basis of `V`.
    pub fn jacobian_v(&self, v: &HorizontalSubgroup) -> Result<f64> {
        if v.k() != self.k() {
            return Err(Error::DimensionMismatch { expected: self.k(), found: v.k() });
        }
        Ok(self.v_block(v).determinant().abs())
    }

    /// The `k × k` matrix `⟨∇f_i, v_j⟩`.
    pub fn v_block(&self, v: &HorizontalSubgroup) -> DMatrix<f64> {
        let rows = self.rows();
        linalg::gram(&rows, v.basis())
    }
}

/// Step used by [`horizontal_derivative`] when none is given.
pub fn default_step(x: &Point) -> f64 {
    1e-5 * (1.0 + x.euclidean_norm())
}

fn along(s: f64, v: &Point) -> Point {
    Point::from_parts(&linalg::scale(s, v.horizontal_part()), 0.0).expect("finite step")
}

fn line_quotient(f: &dyn ScalarFn, x: &Point, v: &Point, h: f64) -> Result<f64> {
    let plus = x * &along(h, v);
    let minus = x * &along(-h, v);
    Ok((f.eval(&plus)? - f.eval(&minus)?) / (2.0 * h))
}

/// `d/ds f(x · (s v))` at `s = 0`: a central difference along the group line
/// with one Richardson pass.
pub fn horizontal_derivative(f: &dyn ScalarFn, x: &Point, v: &Point, h: f64) -> Result<f64> {
    if !v.is_horizontal() {
        return Err(Error::NotHorizontal(v.vertical_part()));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidParameter(format!("step must be positive, got {h}")));
    }
    if x.n() != v.n() {
        return Err(Error::DimensionMismatch { expected: x.dim(), found: v.dim() });
    }
    let coarse = line_quotient(f, x, v, h)?;
    let fine = line_quotient(f, x, v, 0.5 * h)?;
    let d = (4.0 * fine - coarse) / 3.0;
    if d.is_finite() {
        Ok(d)
    } else {
        Err(Error::NonFinite("horizontal derivative".into()))
    }
}

/// `(X_1 f, ..., X_n f, Y_1 f, ..., Y_n f)` at `x`.
pub fn horizontal_gradient(f: &dyn ScalarFn, x: &Point) -> Result<Vec<f64>> {
    let n = x.n();
    let h = default_step(x);
    (0..2 * n).map(|i| horizontal_derivative(f, x, &Point::basis(n, i), h)).collect()
}

/// Derivative of `f` along the horizontal direction `u` (length `2n`).
pub fn directional(f: &dyn ScalarFn, x: &Point, u: &[f64]) -> Result<f64> {
    let v = Point::from_parts(u, 0.0)?;
    horizontal_derivative(f, x, &v, default_step(x))
}

/// `Df(x)`, whose rows are the horizontal gradients of the components.
pub fn pansu_differential(f: &DefiningFunction, x: &Point) -> Result<HHomomorphism> {
    if x.n() != f.n() {
        return Err(Error::DimensionMismatch { expected: 2 * f.n() + 1, found: x.dim() });
    }
    let rows: Vec<Vec<f64>> = (0..f.k()).map(|i| horizontal_gradient(f.component(i), x)).collect::<Result<_>>()?;
    HHomomorphism::from_rows(&rows)
}

pub fn jacobian_h(f: &DefiningFunction, x: &Point) -> Result<f64> {
    Ok(pansu_differential(f, x)?.jacobian_h())
}

pub fn jacobian_v(f: &DefiningFunction, x: &Point, v: &HorizontalSubgroup) -> Result<f64> {
    if v.k() != f.k() {
        return Err(Error::DimensionMismatch { expected: f.k(), found: v.k() });
    }
    pansu_differential(f, x)?.jacobian_v(v)
}

/// `J_H f`, `J_V f` and whether `J_V f` is below the degeneracy threshold.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jacobians {
    pub h: f64,
    pub v: f64,
    pub degenerate: bool,
}

pub fn jacobians(f: &DefiningFunction, x: &Point, v: &HorizontalSubgroup) -> Result<Jacobians> {
    let df = pansu_differential(f, x)?;
    let jv = df.jacobian_v(v)?;
    Ok(Jacobians { h: df.jacobian_h(), v: jv, degenerate: jv <= tolerance::DEGENERATE_JACOBIAN })
}

/// `max |f(x·w) − f(x) − L(w)| / ‖w‖` over seeded `w` on the sphere
/// `‖w‖ = s`, for each `s` in `scales`.
pub fn pansu_remainder(
    f: &DefiningFunction,
    x: &Point,
    l: &HHomomorphism,
    d: &HomogeneousDistance,
    scales: &[f64],
    samples: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let fx = f.eval(x)?;
    let n = x.n();
    let mut rng = mc::stream_rng(seed, 0xD1);
    let dirs: Vec<Point> = (0..samples)
        .map(|_| {
            let c: Vec<f64> = (0..2 * n + 1).map(|_| StandardNormal.sample(&mut rng)).collect();
            Point::new(&c)
        })
        .collect::<Result<_>>()?;
    scales
        .iter()
        .map(|&s| {
            let mut worst: f64 = 0.0;
            for u in &dirs {
                let w = to_sphere(d, u, s);
                let fw = f.eval(&(x * &w))?;
                let lw = l.apply(&w)?;
                let r: f64 = fw.iter().zip(&fx).zip(&lw).map(|((a, b), c)| (a - b - c).powi(2)).sum::<f64>().sqrt();
                worst = worst.max(r / s);
            }
            Ok(worst)
        })
        .collect()
}

/// Whether `values` decrease along the ladder, allowing each step to rise by
/// at most `jitter` relative or to stay below `floor`.
pub fn decreasing_with_jitter(values: &[f64], jitter: f64, floor: f64) -> bool {
    values.windows(2).all(|w| w[1] <= w[0] * (1.0 + jitter) || w[1] <= floor)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(c: &[f64]) -> Point {
        Point::new(c).unwrap()
    }

    fn ex(src: &str, n: usize) -> Expr {
        expr::parse(src, n).unwrap()
    }

    #[test]
    fn derivative_examples() {
        let f = ex("x1", 1);
        let d = horizontal_derivative(&f, &p(&[0.3, -2., 5.]), &Point::basis(1, 0), 1e-5).unwrap();
        assert!((d - 1.0).abs() < 1e-10);
        let f = ex("x1 + x3", 1);
        let x = p(&[-1., 0., 1.]);
        let d = horizontal_derivative(&f, &x, &Point::basis(1, 1), default_step(&x)).unwrap();
        assert!((d + 0.5).abs() < 1e-8);
        let c = |_: &Point| 4.0;
        assert!(horizontal_derivative(&c, &x, &Point::basis(1, 1), 1e-5).unwrap().abs() < 1e-12);
        assert!(horizontal_derivative(&f, &x, &Point::basis(1, 2), 1e-5).is_err());
        assert!(horizontal_derivative(&f, &x, &Point::basis(1, 0), 0.0).is_err());
    }

    #[test]
    fn gradient_examples() {
        let g = horizontal_gradient(&ex("x1", 1), &p(&[2., 3., 4.])).unwrap();
        assert!((g[0] - 1.0).abs() < 1e-10 && g[1].abs() < 1e-10);
        let g = horizontal_gradient(&ex("x1 + x3", 1), &p(&[-1., 0., 1.])).unwrap();
        assert!((g[0] - 1.0).abs() < 1e-8 && (g[1] + 0.5).abs() < 1e-8);
        let g = horizontal_gradient(&ex("x3", 1), &Point::origin(1)).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn jacobian_examples() {
        let f = DefiningFunction::from_exprs(1, &["x1 + x3"]).unwrap();
        let x = p(&[-1., 0., 1.]);
        assert!((jacobian_h(&f, &x).unwrap() - 1.25f64.sqrt()).abs() < 1e-8);
        let v1 = HorizontalSubgroup::coordinate(1, 1).unwrap();
        assert!((jacobian_v(&f, &x, &v1).unwrap() - 1.0).abs() < 1e-8);

        let plane = DefiningFunction::from_exprs(1, &["x1"]).unwrap();
        let v2 = HorizontalSubgroup::new(1, vec![vec![0., 1.]]).unwrap();
        assert!(jacobian_v(&plane, &x, &v2).unwrap() < 1e-10);
        assert!(jacobians(&plane, &x, &v2).unwrap().degenerate);
        assert!((jacobian_h(&plane, &x).unwrap() - 1.0).abs() < 1e-10);

        let f2 = DefiningFunction::from_exprs(2, &["x1", "x2"]).unwrap();
        let y = p(&[0.1, 0.2, 0.3, 0.4, 0.5]);
        assert!((jacobian_h(&f2, &y).unwrap() - 1.0).abs() < 1e-10);
        let v = HorizontalSubgroup::coordinate(2, 2).unwrap();
        assert!((jacobian_v(&f2, &y, &v).unwrap() - 1.0).abs() < 1e-10);
        assert!(jacobian_v(&f2, &y, &HorizontalSubgroup::coordinate(2, 1).unwrap()).is_err());
    }

    #[test]
    fn pansu_examples() {
        let f = DefiningFunction::from_exprs(1, &["x1"]).unwrap();
        let l = pansu_differential(&f, &p(&[1., 1., 1.])).unwrap();
        assert!((l.row(0)[0] - 1.0).abs() < 1e-10 && l.row(0)[1].abs() < 1e-10);
        let f = DefiningFunction::from_exprs(1, &["x1 + x3"]).unwrap();
        let l = pansu_differential(&f, &p(&[-1., 0., 1.])).unwrap();
        assert!((l.row(0)[0] - 1.0).abs() < 1e-8 && (l.row(0)[1] + 0.5).abs() < 1e-8);
    }

    #[test]
    fn remainder_decays() {
        let f = DefiningFunction::from_exprs(1, &["x1 + x3 + x2^2 - x1*x3"]).unwrap();
        let x = p(&[0.2, -0.3, 0.4]);
        let l = pansu_differential(&f, &x).unwrap();
        let d = HomogeneousDistance::koranyi(16.0).unwrap();
        let r = pansu_remainder(&f, &x, &l, &d, &[1e-1, 1e-2, 1e-3, 1e-4], 64, 7).unwrap();
        assert!(decreasing_with_jitter(&r, 0.2, 1e-7), "{r:?}");
        assert!(r[3] < 1e-2);
    }

    #[test]
    fn fd_matches_closed_form_fields() {
        // f = x1^2 x2 + x3^2 - 3 x2 x3 in H^1:
        // X f = 2 x1 x2 - x2/2 (2 x3 - 3 x2),  Y f = x1^2 - 3 x3 + x1/2 (2 x3 - 3 x2)
        let f = ex("x1^2*x2 + x3^2 - 3*x2*x3", 1);
        let mut rng = mc::stream_rng(1, 2);
        for _ in 0..200 {
            let c: Vec<f64> = (0..3).map(|_| rand::Rng::gen_range(&mut rng, -2.0..2.0)).collect();
            let (a, b, t) = (c[0], c[1], c[2]);
            let ft = 2.0 * t - 3.0 * b;
            let xf = 2.0 * a * b - 0.5 * b * ft;
            let yf = a * a - 3.0 * t + 0.5 * a * ft;
            let g = horizontal_gradient(&f, &p(&c)).unwrap();
            assert!((g[0] - xf).abs() < 1e-7 && (g[1] - yf).abs() < 1e-7);
        }
    }
}
