//! Horizontal and vertical subgroups and the factorization `x = π_W(x) π_V(x)`.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::group::{inverse, omega, Point};
use crate::linalg;
use crate::mc::{self, McPlan, McRng, MeasureEstimate};
use crate::metric::{to_sphere, HomogeneousDistance};
use crate::multilinear::{blade_norm, Blade};
use crate::tolerance;

fn check_orthonormal(basis: &[Vec<f64>], dim: usize) -> Result<()> {
    let tol = 10.0 * tolerance::algebraic();
    for (i, a) in basis.iter().enumerate() {
        if a.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: a.len() });
        }
        if a.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("subgroup basis".into()));
        }
        for (j, b) in basis.iter().enumerate().take(i + 1) {
            let target = if i == j { 1.0 } else { 0.0 };
            let dev = (linalg::dot(a, b) - target).abs();
            if dev > tol {
                return Err(Error::NotOrthonormal(dev));
            }
        }
    }
    Ok(())
}

fn embed(h: &[f64]) -> Vec<f64> {
    let mut v = h.to_vec();
    v.push(0.0);
    v
}

/// `V = span{v_1..v_k}` inside the first layer, with orthonormal, pairwise
/// `ω`-isotropic generators. `V` is abelian, so its exponential coordinates
/// are linear.
#[derive(Clone, Debug, PartialEq)]
pub struct HorizontalSubgroup {
    n: usize,
    basis: Vec<Vec<f64>>,
}

impl HorizontalSubgroup {
    /// `basis` lists horizontal vectors of length `2n`.
    pub fn new(n: usize, basis: Vec<Vec<f64>>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("n must be at least 1".into()));
        }
        if basis.is_empty() {
            return Err(Error::InvalidParameter("horizontal subgroup needs k >= 1".into()));
        }
        if basis.len() > n {
            return Err(Error::TooManyVectors { count: basis.len(), n });
        }
        check_orthonormal(&basis, 2 * n)?;
        let tol = 10.0 * tolerance::algebraic();
        for a in &basis {
            for b in &basis {
                let om = omega(a, b).abs();
                if om > tol {
                    return Err(Error::NotIsotropic(om));
                }
            }
        }
        Ok(Self { n, basis })
    }

    /// `span{e_1..e_k}`.
    pub fn coordinate(n: usize, k: usize) -> Result<Self> {
        Self::new(n, (0..k).map(|i| linalg::unit(2 * n, i)).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    /// `Σ s_j v_j`.
    pub fn point(&self, s: &[f64]) -> Point {
        let mut h = vec![0.0; 2 * self.n];
        for (c, v) in s.iter().zip(&self.basis) {
            linalg::axpy(*c, v, &mut h);
        }
        Point::from_parts(&h, 0.0).expect("finite combination")
    }

    pub fn coords(&self, p: &Point) -> Vec<f64> {
        self.basis.iter().map(|v| linalg::dot(v, p.horizontal_part())).collect()
    }

    pub fn blade(&self) -> Blade {
        Blade::new(2 * self.n + 1, self.basis.iter().map(|v| embed(v)).collect()).expect("valid blade")
    }
}

/// `W = span{w_1..w_m} ⊕ R e_{2n+1}` with orthonormal horizontal generators.
/// Coordinates on `W` are `(⟨p_h, w_1⟩, ..., ⟨p_h, w_m⟩, p_t)`.
#[derive(Clone, Debug, PartialEq)]
pub struct VerticalSubgroup {
    n: usize,
    basis: Vec<Vec<f64>>,
}

impl VerticalSubgroup {
    pub fn new(n: usize, basis: Vec<Vec<f64>>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("n must be at least 1".into()));
        }
        if basis.len() >= 2 * n {
            return Err(Error::InvalidParameter(format!(
                "vertical subgroup with {} horizontal generators in H^{n}",
                basis.len()
            )));
        }
        check_orthonormal(&basis, 2 * n)?;
        Ok(Self { n, basis })
    }

    /// `span{e_{k+1}..e_{2n}, e_{2n+1}}`.
    pub fn coordinate(n: usize, k: usize) -> Result<Self> {
        Self::new(n, (k..2 * n).map(|i| linalg::unit(2 * n, i)).collect())
    }

    /// Orthogonal complement of `V`.
    pub fn orthogonal_to(v: &HorizontalSubgroup) -> Result<Self> {
        let n = v.n();
        let candidates: Vec<Vec<f64>> = (0..2 * n).map(|i| linalg::unit(2 * n, i)).collect();
        Self::new(n, linalg::complete_orthonormal(v.basis(), &candidates, 2 * n))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Topological dimension `2n + 1 - k`.
    pub fn dim(&self) -> usize {
        self.basis.len() + 1
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    pub fn point(&self, coords: &[f64]) -> Result<Point> {
        if coords.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: coords.len() });
        }
        let mut h = vec![0.0; 2 * self.n];
        for (c, w) in coords.iter().zip(&self.basis) {
            linalg::axpy(*c, w, &mut h);
        }
        Point::from_parts(&h, coords[coords.len() - 1])
    }

    pub fn coords(&self, p: &Point) -> Vec<f64> {
        let mut c: Vec<f64> = self.basis.iter().map(|w| linalg::dot(w, p.horizontal_part())).collect();
        c.push(p.vertical_part());
        c
    }

    /// Euclidean distance from `p_h` to `span{w_i}`.
    pub fn residual(&self, p: &Point) -> f64 {
        let mut r = p.horizontal_part().to_vec();
        linalg::reject(&mut r, &self.basis);
        linalg::norm(&r)
    }

    pub fn contains(&self, p: &Point, tol: f64) -> bool {
        self.residual(p) <= tol * (1.0 + p.euclidean_norm())
    }

    /// `w_1 ∧ ... ∧ w_m ∧ e_{2n+1}`.
    pub fn blade(&self) -> Blade {
        let dim = 2 * self.n + 1;
        let mut f: Vec<Vec<f64>> = self.basis.iter().map(|w| embed(w)).collect();
        f.push(linalg::unit(dim, dim - 1));
        Blade::new(dim, f).expect("valid blade")
    }
}

/// A factorization `H^n = W ⋊ V`.
#[derive(Clone, Debug)]
pub struct Split {
    w: VerticalSubgroup,
    v: HorizontalSubgroup,
    // inverse of the stacked horizontal basis [v_1..v_k | w_1..w_m]
    stacked_inv: DMatrix<f64>,
    v_wedge_n: f64,
}

impl Split {
    pub fn new(w: VerticalSubgroup, v: HorizontalSubgroup) -> Result<Self> {
        let n = v.n();
        if w.n() != n {
            return Err(Error::DimensionMismatch { expected: 2 * n + 1, found: 2 * w.n() + 1 });
        }
        if w.basis().len() + v.k() != 2 * n {
            return Err(Error::DimensionMismatch { expected: 2 * n - v.k(), found: w.basis().len() });
        }
        let cols: Vec<&Vec<f64>> = v.basis().iter().chain(w.basis()).collect();
        let stacked = DMatrix::from_fn(2 * n, 2 * n, |i, j| cols[j][i]);
        let det = stacked.determinant();
        if det.abs() <= 1e-10 {
            return Err(Error::SingularSplit(det.abs()));
        }
        let stacked_inv = stacked.try_inverse().ok_or(Error::SingularSplit(det.abs()))?;
        let v_wedge_n = blade_norm(&v.blade().wedge(&w.blade())?);
        Ok(Self { w, v, stacked_inv, v_wedge_n })
    }

    /// `V = span{e_1..e_k}`, `W = span{e_{k+1}..e_{2n+1}}`.
    pub fn coordinate(n: usize, k: usize) -> Result<Self> {
        Self::new(VerticalSubgroup::coordinate(n, k)?, HorizontalSubgroup::coordinate(n, k)?)
    }

    /// `V` with its orthogonal complement.
    pub fn orthogonal(v: HorizontalSubgroup) -> Result<Self> {
        Self::new(VerticalSubgroup::orthogonal_to(&v)?, v)
    }

    pub fn n(&self) -> usize {
        self.v.n()
    }

    pub fn k(&self) -> usize {
        self.v.k()
    }

    pub fn w(&self) -> &VerticalSubgroup {
        &self.w
    }

    pub fn v(&self) -> &HorizontalSubgroup {
        &self.v
    }

    /// `‖V ∧ N‖` with `N` the unit blade of `W`.
    pub fn v_wedge_n(&self) -> f64 {
        self.v_wedge_n
    }

    pub fn is_orthogonal(&self) -> bool {
        self.v.basis().iter().all(|a| self.w.basis().iter().all(|b| linalg::dot(a, b).abs() <= 1e-12))
    }

    /// Coefficients of `x_h` along `(v_1..v_k)`.
    pub fn v_coords(&self, x: &Point) -> Vec<f64> {
        let h = nalgebra::DVector::from_column_slice(x.horizontal_part());
        let c = &self.stacked_inv * h;
        c.iter().take(self.k()).copied().collect()
    }

    pub fn pi_v(&self, x: &Point) -> Point {
        self.v.point(&self.v_coords(x))
    }

    pub fn pi_w(&self, x: &Point) -> Point {
        x * &inverse(&self.pi_v(x))
    }

    /// `(π_W(x), π_V(x))`, so that `π_W(x) π_V(x) = x`.
    pub fn project(&self, x: &Point) -> Result<(Point, Point)> {
        if x.n() != self.n() {
            return Err(Error::DimensionMismatch { expected: 2 * self.n() + 1, found: x.dim() });
        }
        let v = self.pi_v(x);
        let w = x * &inverse(&v);
        Ok((w, v))
    }

    /// `σ_x(w) = x w π_V(x)^{-1}`, an automorphism of `W`.
    pub fn sigma(&self, x: &Point, w: &Point) -> Result<Point> {
        if x.n() != self.n() || w.n() != self.n() {
            return Err(Error::DimensionMismatch { expected: 2 * self.n() + 1, found: w.dim() });
        }
        let r = self.w.residual(w);
        if r > 1e-10 * (1.0 + w.euclidean_norm()) {
            return Err(Error::NotInSubgroup(r));
        }
        Ok(&(x * w) * &inverse(&self.pi_v(x)))
    }
}

/// `‖V ∧ M‖ / ‖V ∧ N‖`, the factor by which `π_W` restricted to `M` scales
/// the Euclidean `(2n+1-k)`-measure.
pub fn restricted_projection_ratio(
    v: &HorizontalSubgroup,
    m: &VerticalSubgroup,
    w: &VerticalSubgroup,
) -> Result<f64> {
    let sm = Split::new(m.clone(), v.clone())?;
    let sw = Split::new(w.clone(), v.clone())?;
    Ok(sm.v_wedge_n() / sw.v_wedge_n())
}

/// An axis-aligned box `Π [lo_i, hi_i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoordBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl CoordBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch { expected: lo.len(), found: hi.len() });
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite()) {
            return Err(Error::InvalidParameter("box bounds must satisfy lo < hi".into()));
        }
        Ok(Self { lo, hi })
    }

    pub fn unit(dim: usize) -> Self {
        Self { lo: vec![0.0; dim], hi: vec![1.0; dim] }
    }

    pub fn symmetric(half_widths: &[f64]) -> Result<Self> {
        Self::new(half_widths.iter().map(|h| -h).collect(), half_widths.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim() && p.iter().zip(self.lo.iter().zip(&self.hi)).all(|(x, (a, b))| *a <= *x && *x <= *b)
    }

    pub fn sample(&self, rng: &mut McRng) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| rng.gen_range(*a..*b)).collect()
    }

    pub fn corners(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        (0..1usize << d)
            .map(|mask| (0..d).map(|i| if mask >> i & 1 == 1 { self.hi[i] } else { self.lo[i] }).collect())
            .collect()
    }
}

/// Outcome of the two Monte Carlo checks of the area transformation rule.
#[derive(Clone, Debug)]
pub struct ProjectionLemmaReport {
    pub ratio: f64,
    pub source_measure: f64,
    /// Mean Jacobian of the sampled map times the source measure.
    pub jacobian_estimate: MeasureEstimate,
    /// Indicator Monte Carlo of the image over a bounding box.
    pub indicator_estimate: MeasureEstimate,
    pub jacobian_rel_error: f64,
    pub indicator_rel_error: f64,
    pub passed: bool,
}

pub const PROJECTION_LEMMA_TOL: f64 = 0.02;

/// Samples `B ⊂ M` (in `M`-coordinates), pushes it to `W` with `π_W`
/// restricted to `M` and measures the image twice: through the sampled
/// Jacobian of the map and by an indicator over a bounding box, whose points
/// are pulled back with `π_M` restricted to `W`. Both are compared with
/// `ratio · H(B)`.
pub fn verify_projection_lemma(
    v: &HorizontalSubgroup,
    m: &VerticalSubgroup,
    w: &VerticalSubgroup,
    b: &CoordBox,
    n_samples: usize,
    seed: u64,
) -> Result<ProjectionLemmaReport> {
    let sm = Split::new(m.clone(), v.clone())?;
    let sw = Split::new(w.clone(), v.clone())?;
    if b.dim() != m.dim() {
        return Err(Error::DimensionMismatch { expected: m.dim(), found: b.dim() });
    }
    let ratio = sm.v_wedge_n() / sw.v_wedge_n();
    let source = b.volume();
    let forward = |a: &[f64]| -> Result<Vec<f64>> { Ok(w.coords(&sw.pi_w(&m.point(a)?))) };
    let back = |c: &[f64]| -> Result<Vec<f64>> { Ok(m.coords(&sm.pi_w(&w.point(c)?))) };

    let d = b.dim();
    let jac = mc::mean(McPlan::new(n_samples, mc::derive_seed(seed, 0)), source, |rng| {
        let a = b.sample(rng);
        let mut cols = Vec::with_capacity(d);
        for i in 0..d {
            let h = 1e-6 * (1.0 + a[i].abs());
            let mut ap = a.clone();
            let mut am = a.clone();
            ap[i] += h;
            am[i] -= h;
            let fp = forward(&ap)?;
            let fm = forward(&am)?;
            cols.push(fp.iter().zip(&fm).map(|(x, y)| (x - y) / (2.0 * h)).collect::<Vec<f64>>());
        }
        Ok(DMatrix::from_fn(d, d, |i, j| cols[j][i]).determinant().abs())
    })?;

    // bounding box of the image from the corners and a seeded cloud
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    let mut absorb = |p: &[f64]| {
        for i in 0..d {
            lo[i] = lo[i].min(p[i]);
            hi[i] = hi[i].max(p[i]);
        }
    };
    for c in b.corners() {
        absorb(&forward(&c)?);
    }
    let mut rng = mc::stream_rng(mc::derive_seed(seed, 1), 0);
    for _ in 0..n_samples.min(20_000) {
        absorb(&forward(&b.sample(&mut rng))?);
    }
    let margin: Vec<f64> = lo.iter().zip(&hi).map(|(a, z)| 0.05 * (z - a).max(1e-12)).collect();
    let bbox = CoordBox::new(
        lo.iter().zip(&margin).map(|(a, m)| a - m).collect(),
        hi.iter().zip(&margin).map(|(z, m)| z + m).collect(),
    )?;
    let ind = mc::mean(McPlan::new(n_samples, mc::derive_seed(seed, 2)), bbox.volume(), |rng| {
        let c = bbox.sample(rng);
        Ok(if b.contains(&back(&c)?) { 1.0 } else { 0.0 })
    })?;

    let target = ratio * source;
    let jacobian_rel_error = (jac.value / target - 1.0).abs();
    let indicator_rel_error = (ind.value / target - 1.0).abs();
    Ok(ProjectionLemmaReport {
        ratio,
        source_measure: source,
        jacobian_estimate: jac,
        indicator_estimate: ind,
        jacobian_rel_error,
        indicator_rel_error,
        passed: jacobian_rel_error <= PROJECTION_LEMMA_TOL && indicator_rel_error <= PROJECTION_LEMMA_TOL,
    })
}

/// Sampled `min ‖wv‖ / (‖w‖ + ‖v‖)` over `w ∈ W`, `v ∈ V` with homogeneous
/// norms up to `scale`. Pairs with `w = 0` or `v = 0` are skipped.
pub fn estimate_c0(s: &Split, d: &HomogeneousDistance, n_samples: usize, seed: u64, scale: f64) -> Result<f64> {
    if !(scale > 0.0) {
        return Err(Error::NonPositiveScale(scale));
    }
    let mut rng = mc::stream_rng(seed, 0xC0);
    let mut best: f64 = 1.0;
    for _ in 0..n_samples {
        let wc: Vec<f64> = (0..s.w().dim()).map(|_| StandardNormal.sample(&mut rng)).collect();
        let vc: Vec<f64> = (0..s.k()).map(|_| StandardNormal.sample(&mut rng)).collect();
        let rw = scale * rng.gen_range(0.0..1.0f64);
        let rv = scale * rng.gen_range(0.0..1.0f64);
        let w = s.w().point(&wc)?;
        let v = s.v().point(&vc);
        let (nw, nv) = (d.norm(&w), d.norm(&v));
        if nw == 0.0 || nv == 0.0 || rw == 0.0 || rv == 0.0 {
            continue;
        }
        let w = to_sphere(d, &w, rw);
        let v = to_sphere(d, &v, rv);
        best = best.min(d.norm(&(&w * &v)) / (rw + rv));
    }
    Ok(best)
}

fn gaussian(dim: usize, rng: &mut McRng) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

/// A uniformly oriented `k`-dimensional horizontal subgroup of `H^n`.
pub fn random_horizontal_subgroup(n: usize, k: usize, rng: &mut McRng) -> Result<HorizontalSubgroup> {
    if k == 0 || k > n {
        return Err(Error::TooManyVectors { count: k, n });
    }
    loop {
        let mut span: Vec<Vec<f64>> = Vec::new();
        let mut basis: Vec<Vec<f64>> = Vec::new();
        for _ in 0..k {
            let mut g = gaussian(2 * n, rng);
            linalg::reject(&mut g, &span);
            let nrm = linalg::norm(&g);
            if nrm < 1e-6 {
                break;
            }
            let u = linalg::scale(1.0 / nrm, &g);
            let mut ju = crate::group::jmap_slice(&u);
            linalg::reject(&mut ju, &span);
            linalg::reject(&mut ju, std::slice::from_ref(&u));
            span.push(u.clone());
            let jn = linalg::norm(&ju);
            span.push(linalg::scale(1.0 / jn, &ju));
            basis.push(u);
        }
        if basis.len() == k {
            return HorizontalSubgroup::new(n, basis);
        }
    }
}

/// A vertical subgroup complementary to `v`, obtained by tilting the
/// orthogonal complement of `v` towards `v` by random amounts up to `tilt`.
/// Draws are retried until `‖V ∧ N‖ >= 0.2`.
pub fn random_vertical_complement(v: &HorizontalSubgroup, tilt: f64, rng: &mut McRng) -> Result<VerticalSubgroup> {
    let perp = VerticalSubgroup::orthogonal_to(v)?;
    for _ in 0..1000 {
        let tilted: Vec<Vec<f64>> = perp
            .basis()
            .iter()
            .map(|w| {
                let mut t = w.clone();
                for vb in v.basis() {
                    linalg::axpy(tilt * rng.gen_range(-1.0..1.0), vb, &mut t);
                }
                t
            })
            .collect();
        let Some(ortho) = linalg::orthonormalize(&tilted, 1e-8) else { continue };
        let w = VerticalSubgroup::new(v.n(), ortho)?;
        if let Ok(s) = Split::new(w.clone(), v.clone()) {
            if s.v_wedge_n() >= 0.2 {
                return Ok(w);
            }
        }
    }
    Err(Error::InvalidParameter("could not draw an admissible complement".into()))
}
