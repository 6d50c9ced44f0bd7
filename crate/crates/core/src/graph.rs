//! Intrinsic graphs `Σ = {w φ(w)}` of level sets, solved with Newton's
//! method on `V`-coordinates, and the intrinsic calculus of `φ`.

use nalgebra::DMatrix;
use rand::Rng;

use crate::calculus::{
    decreasing_with_jitter, default_step, horizontal_derivative, pansu_differential, DefiningFunction,
    HHomomorphism, ScalarFn,
};
use crate::error::{Error, Result};
use crate::group::{inverse, omega, Point};
use crate::linalg;
use crate::mc;
use crate::metric::{to_sphere, HomogeneousDistance};
use crate::split::Split;
use crate::tolerance;

pub const MAX_NEWTON_ITERATIONS: usize = 50;

/// Axis box `center ± half` in `W`-coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct WBox {
    center: Vec<f64>,
    half: Vec<f64>,
}

impl WBox {
    pub fn new(center: Vec<f64>, half: Vec<f64>) -> Result<Self> {
        if center.len() != half.len() {
            return Err(Error::DimensionMismatch { expected: center.len(), found: half.len() });
        }
        if half.iter().any(|h| !(*h > 0.0 && h.is_finite())) || center.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("box half-widths must be positive and finite".into()));
        }
        Ok(Self { center, half })
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn half(&self) -> &[f64] {
        &self.half
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn contains(&self, c: &[f64]) -> bool {
        c.len() == self.dim()
            && c.iter()
                .zip(self.center.iter().zip(&self.half))
                .all(|(x, (m, h))| (x - m).abs() <= h * (1.0 + 1e-12))
    }

    /// Smallest distance from `c` to a face, relative to the half-width.
    pub fn relative_depth(&self, c: &[f64]) -> f64 {
        c.iter()
            .zip(self.center.iter().zip(&self.half))
            .map(|(x, (m, h))| 1.0 - (x - m).abs() / h)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn volume(&self) -> f64 {
        self.half.iter().map(|h| 2.0 * h).product()
    }
}

/// A level set `{f = level}` parametrized as an intrinsic graph over `U ⊂ W`.
#[derive(Clone, Debug)]
pub struct SurfaceModel {
    f: DefiningFunction,
    split: Split,
    level: Vec<f64>,
    domain: WBox,
    base: Point,
    /// Set once `base` is solved; continuation starts from it.
    has_base: bool,
}

impl SurfaceModel {
    /// The base point `x_0` is the graph point over the center of `domain`.
    pub fn new(f: DefiningFunction, split: Split, level: Vec<f64>, domain: WBox) -> Result<Self> {
        if f.n() != split.n() {
            return Err(Error::DimensionMismatch { expected: 2 * split.n() + 1, found: 2 * f.n() + 1 });
        }
        if f.k() != split.k() {
            return Err(Error::DimensionMismatch { expected: split.k(), found: f.k() });
        }
        if level.len() != f.k() {
            return Err(Error::DimensionMismatch { expected: f.k(), found: level.len() });
        }
        if domain.dim() != split.w().dim() {
            return Err(Error::DimensionMismatch { expected: split.w().dim(), found: domain.dim() });
        }
        let mut m = Self { f, split, level, domain, base: Point::origin(1), has_base: false };
        let c = m.split.w().point(m.domain.center())?;
        m.base = m.graph_map(&c)?;
        m.has_base = true;
        Ok(m)
    }

    pub fn f(&self) -> &DefiningFunction {
        &self.f
    }

    pub fn split(&self) -> &Split {
        &self.split
    }

    pub fn level(&self) -> &[f64] {
        &self.level
    }

    pub fn domain(&self) -> &WBox {
        &self.domain
    }

    pub fn base(&self) -> &Point {
        &self.base
    }

    pub fn n(&self) -> usize {
        self.split.n()
    }

    pub fn k(&self) -> usize {
        self.split.k()
    }

    /// `φ(w)`.
    pub fn phi(&self, w: &Point) -> Result<Point> {
        implicit_solve(self, w, &Point::origin(self.n()))
    }

    /// `Φ(w) = w φ(w)`.
    pub fn graph_map(&self, w: &Point) -> Result<Point> {
        graph_map(self, w)
    }

    /// `f(x) - level`.
    pub fn residual(&self, x: &Point) -> Result<Vec<f64>> {
        Ok(self.f.eval(x)?.iter().zip(&self.level).map(|(a, b)| a - b).collect())
    }

    fn check_domain(&self, w: &Point) -> Result<Vec<f64>> {
        let r = self.split.w().residual(w);
        if r > 1e-10 * (1.0 + w.euclidean_norm()) {
            return Err(Error::NotInSubgroup(r));
        }
        let c = self.split.w().coords(w);
        if !self.domain.contains(&c) {
            return Err(Error::DomainExit(format!("W-coordinates {c:?}")));
        }
        Ok(c)
    }
}

/// `φ(w)`: Newton's method for `f(w · Σ s_j v_j) = level` in `s ∈ R^k`,
/// started at `guess`. The Jacobian is the matrix of derivatives along
/// `v_1..v_k`, which is exact for the group line because `V` is abelian.
/// If Newton from `guess` fails (including a singular intermediate
/// Jacobian), the solution is continued along the segment from the center
/// of `U`, where `φ` is known.
pub fn implicit_solve(m: &SurfaceModel, w: &Point, guess: &Point) -> Result<Point> {
    let c = m.check_domain(w)?;
    match newton(m, w, guess) {
        Err(Error::NoConvergence { .. } | Error::NonFinite(_) | Error::DegenerateJacobian(_)) if m.has_base => {
            let wsub = m.split.w();
            let mut phi = m.split.pi_v(&m.base);
            for i in 1..=CONTINUATION_STEPS {
                let t = i as f64 / CONTINUATION_STEPS as f64;
                let ci: Vec<f64> = m.domain.center.iter().zip(&c).map(|(a, b)| a + t * (b - a)).collect();
                phi = newton(m, &wsub.point(&ci)?, &phi)?;
            }
            Ok(phi)
        }
        r => r,
    }
}

const CONTINUATION_STEPS: usize = 16;

fn newton(m: &SurfaceModel, w: &Point, guess: &Point) -> Result<Point> {
    let v = m.split.v();
    let mut s = v.coords(guess);
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_NEWTON_ITERATIONS {
        let x = w * &v.point(&s);
        let g = m.residual(&x)?;
        residual = g.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        if residual <= tolerance::SOLVER_RESIDUAL {
            return Ok(v.point(&s));
        }
        let jac = v_jacobian(m, &x)?;
        let det = jac.determinant().abs();
        if det <= tolerance::DEGENERATE_JACOBIAN {
            return Err(Error::DegenerateJacobian(det));
        }
        let step = linalg::solve(&jac, &g).ok_or(Error::DegenerateJacobian(det))?;
        // halve the step until the residual drops; keep the full step if none does
        let mut lambda = 1.0;
        let mut next: Vec<f64> = s.iter().zip(&step).map(|(a, d)| a - d).collect();
        for _ in 0..30 {
            let trial: Vec<f64> = s.iter().zip(&step).map(|(a, d)| a - lambda * d).collect();
            let r = m.residual(&(w * &v.point(&trial)))?.iter().fold(0.0f64, |a, b| a.max(b.abs()));
            if r < residual {
                next = trial;
                break;
            }
            lambda *= 0.5;
        }
        s = next;
        if s.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("Newton iterate".into()));
        }
    }
    Err(Error::NoConvergence { iterations: MAX_NEWTON_ITERATIONS, residual })
}

/// `(∂_{v_j} f_i)(x)`, only the `k × k` block Newton needs.
fn v_jacobian(m: &SurfaceModel, x: &Point) -> Result<DMatrix<f64>> {
    let k = m.k();
    let h = default_step(x);
    let dirs: Vec<Point> = m.split.v().basis().iter().map(|b| Point::from_parts(b, 0.0)).collect::<Result<_>>()?;
    let mut jac = DMatrix::zeros(k, k);
    for i in 0..k {
        for (j, d) in dirs.iter().enumerate() {
            jac[(i, j)] = horizontal_derivative(m.f.component(i), x, d, h)?;
        }
    }
    Ok(jac)
}

pub fn graph_map(m: &SurfaceModel, w: &Point) -> Result<Point> {
    let phi = m.phi(w)?;
    Ok(w * &phi)
}

/// Solves `φ` on a raster grid of `U` with `nodes` points per axis, using the
/// previous node as Newton guess. Returns `(W-coordinates, Φ(w))` pairs.
pub fn grid_solve(m: &SurfaceModel, nodes: usize) -> Result<Vec<(Vec<f64>, Point)>> {
    let d = m.domain.dim();
    let nodes = nodes.max(2);
    let total = nodes.pow(d as u32);
    let mut out = Vec::with_capacity(total);
    let mut guess = Point::origin(m.n());
    for idx in 0..total {
        let mut rem = idx;
        let c: Vec<f64> = (0..d)
            .map(|i| {
                let j = rem % nodes;
                rem /= nodes;
                let t = -1.0 + 2.0 * j as f64 / (nodes - 1) as f64;
                m.domain.center[i] + t * m.domain.half[i]
            })
            .collect();
        let w = m.split.w().point(&c)?;
        let phi = implicit_solve(m, &w, &guess)?;
        out.push((c, &w * &phi));
        guess = phi;
    }
    Ok(out)
}

/// `φ_x(w) = π_V(x) φ(σ_{x^{-1}}(w))`.
pub fn translated_phi(m: &SurfaceModel, x: &Point, w: &Point) -> Result<Point> {
    let s = &m.split;
    let pre = s.sigma(&inverse(x), w)?;
    Ok(&s.pi_v(x) * &m.phi(&pre)?)
}

/// The intrinsic differential `dφ`, as the `k × (2n-k)` matrix taking the
/// horizontal `W`-coordinates of `w` to the `V`-coordinates of `dφ(w)`.
#[derive(Clone, Debug, PartialEq)]
pub struct IntrinsicDifferential {
    matrix: DMatrix<f64>,
}

impl IntrinsicDifferential {
    pub fn new(matrix: DMatrix<f64>) -> Self {
        Self { matrix }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// `V`-coordinates of `dφ(w)`; the vertical coordinate of `w` is ignored.
    pub fn apply_coords(&self, wc: &[f64]) -> Vec<f64> {
        let h = nalgebra::DVector::from_iterator(self.matrix.ncols(), wc.iter().take(self.matrix.ncols()).copied());
        (&self.matrix * h).iter().copied().collect()
    }

    pub fn apply(&self, s: &Split, w: &Point) -> Point {
        s.v().point(&self.apply_coords(&s.w().coords(w)))
    }

    pub fn perturbed(&self, eps: f64) -> Self {
        Self { matrix: self.matrix.map(|x| x + eps) }
    }
}

/// `dφ = −(D_V f)^{-1} D_{W,h} f` at `x`.
pub fn intrinsic_differential(m: &SurfaceModel, x: &Point) -> Result<IntrinsicDifferential> {
    let df = pansu_differential(&m.f, x)?;
    intrinsic_from_pansu(&m.split, &df)
}

pub fn intrinsic_from_pansu(s: &Split, df: &HHomomorphism) -> Result<IntrinsicDifferential> {
    let dv = df.v_block(s.v());
    let det = dv.determinant().abs();
    if det <= tolerance::DEGENERATE_JACOBIAN {
        return Err(Error::DegenerateJacobian(det));
    }
    let dw = linalg::gram(&df.rows(), s.w().basis());
    let inv = dv.try_inverse().ok_or(Error::DegenerateJacobian(det))?;
    Ok(IntrinsicDifferential::new(-(inv * dw)))
}

/// The curve field on `W` for the horizontal direction `u`:
/// `u + (ω(φ(w), u) + ω(w_h, u)/2) e_{2n+1}`.
fn curve_velocity(m: &SurfaceModel, w: &Point, u: &[f64]) -> Result<Point> {
    let phi = m.phi(w)?;
    let t = omega(phi.horizontal_part(), u) + 0.5 * omega(w.horizontal_part(), u);
    Point::from_parts(u, t)
}

fn flow(m: &SurfaceModel, start: &Point, u: &[f64], t: f64, steps: usize) -> Result<Point> {
    let dt = t / steps as f64;
    let mut w = start.clone();
    for _ in 0..steps {
        let vel = curve_velocity(m, &w, u)?;
        let c: Vec<f64> = w.coords().iter().zip(vel.coords()).map(|(a, b)| a + dt * b).collect();
        w = Point::new(&c)?;
    }
    Ok(w)
}

/// Intrinsic derivatives of `φ` at `w̄`: for each horizontal generator
/// `u` of `W`, the derivative of `φ` along the integral curve of the field
/// above, by Euler steps of `h/8` and a central difference at `t = ±h`.
pub fn intrinsic_derivatives(m: &SurfaceModel, wbar: &Point, h: f64) -> Result<DMatrix<f64>> {
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("step must be positive, got {h}")));
    }
    let s = &m.split;
    let cols = s.w().basis().len();
    let mut out = DMatrix::zeros(m.k(), cols);
    for (j, u) in s.w().basis().iter().enumerate() {
        let plus = flow(m, wbar, u, h, 8)?;
        let minus = flow(m, wbar, u, -h, 8)?;
        let a = s.v().coords(&m.phi(&plus)?);
        let b = s.v().coords(&m.phi(&minus)?);
        for i in 0..m.k() {
            out[(i, j)] = (a[i] - b[i]) / (2.0 * h);
        }
    }
    Ok(out)
}

fn combinations(n: usize, r: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(r);
    fn rec(start: usize, n: usize, r: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == r {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, r, cur, out);
            cur.pop();
        }
    }
    rec(0, n, r, &mut cur, &mut out);
    out
}

/// `sqrt(1 + Σ (all ℓ × ℓ minors)^2)`.
pub fn intrinsic_jacobian(d: &IntrinsicDifferential) -> f64 {
    let a = d.matrix();
    let (rows, cols) = a.shape();
    let mut total = 1.0;
    for l in 1..=rows.min(cols) {
        for ri in combinations(rows, l) {
            for ci in combinations(cols, l) {
                let minor = DMatrix::from_fn(l, l, |i, j| a[(ri[i], ci[j])]);
                total += minor.determinant().powi(2);
            }
        }
    }
    total.sqrt()
}

/// Orthonormal basis of the horizontal kernel of `Df`.
pub fn horizontal_kernel(df: &HHomomorphism) -> Result<Vec<Vec<f64>>> {
    let rows = df.rows();
    let dim = df.matrix().ncols();
    let q = linalg::orthonormalize(&rows, 1e-10).ok_or(Error::RankDeficient(df.jacobian_h()))?;
    let candidates: Vec<Vec<f64>> = (0..dim).map(|i| linalg::unit(dim, i)).collect();
    Ok(linalg::complete_orthonormal(&q, &candidates, dim))
}

/// Largest principal-angle sine between `graph(dφ)` and `ker Df(x)`,
/// both taken together with `e_{2n+1}`.
pub fn kernel_alignment(m: &SurfaceModel, x: &Point) -> Result<f64> {
    let df = pansu_differential(&m.f, x)?;
    let dphi = intrinsic_from_pansu(&m.split, &df)?;
    let s = &m.split;
    let dim = 2 * m.n() + 1;
    let mut graph: Vec<Vec<f64>> = s
        .w()
        .basis()
        .iter()
        .enumerate()
        .map(|(j, u)| {
            let mut e = vec![0.0; s.w().dim()];
            e[j] = 1.0;
            let mut g = u.clone();
            linalg::axpy(1.0, s.v().point(&dphi.apply_coords(&e)).horizontal_part(), &mut g);
            g.push(0.0);
            g
        })
        .collect();
    graph.push(linalg::unit(dim, dim - 1));
    let graph = linalg::orthonormalize(&graph, 1e-12).ok_or(Error::DependentFactors)?;
    let mut kernel: Vec<Vec<f64>> = horizontal_kernel(&df)?
        .into_iter()
        .map(|mut v| {
            v.push(0.0);
            v
        })
        .collect();
    kernel.push(linalg::unit(dim, dim - 1));
    Ok(linalg::max_principal_sine(&graph, &kernel))
}

/// `‖V∧N‖ · J_H f / J_V f` at `x`.
pub fn area_integrand(m: &SurfaceModel, x: &Point) -> Result<f64> {
    let df = pansu_differential(&m.f, x)?;
    let jv = df.jacobian_v(m.split.v())?;
    if jv <= tolerance::DEGENERATE_JACOBIAN {
        return Err(Error::DegenerateJacobian(jv));
    }
    Ok(m.split.v_wedge_n() * df.jacobian_h() / jv)
}

/// Options shared by the chain-rule and uniform-differentiability checks.
#[derive(Clone)]
pub struct VerifyOptions<'a> {
    pub distance: HomogeneousDistance,
    pub samples: usize,
    pub seed: u64,
    /// Added to every entry of `dφ` (negative control).
    pub dphi_perturbation: f64,
    /// Function composed with `Φ` in the chain rule; `None` uses `f`.
    pub probe: Option<&'a dyn ScalarFn>,
}

impl Default for VerifyOptions<'_> {
    fn default() -> Self {
        Self {
            distance: HomogeneousDistance::koranyi(16.0).expect("valid constant"),
            samples: 64,
            seed: 0,
            dphi_perturbation: 0.0,
            probe: None,
        }
    }
}

pub const CHAIN_RULE_SCALES: [f64; 4] = [1e-1, 1e-2, 1e-3, 1e-4];

#[derive(Clone, Debug, PartialEq)]
pub struct ChainRuleReport {
    pub scales: Vec<f64>,
    pub ratios: Vec<f64>,
    /// `max |Df(x)(u dφ(u))| / ‖u‖` over sampled `u ∈ W`.
    pub kernel_defect: f64,
    pub level_set: bool,
    pub passed: bool,
}

/// Evaluation noise of a remainder quotient at scale `s`.
fn noise_floor(s: f64) -> f64 {
    1e-7 + 20.0 * tolerance::SOLVER_RESIDUAL / s
}

fn ladder_decreases(scales: &[f64], r: &[f64]) -> bool {
    scales.windows(2).zip(r.windows(2)).all(|(s, w)| decreasing_with_jitter(w, 0.2, noise_floor(s[1])))
}

/// Checks that `F = g∘Φ` satisfies
/// `|F(σ_x(w)) − F(x_W) − Dg(x)(w dφ(w))| = o(‖w‖)` along the scale ladder,
/// with `x = Φ(x_W)` and `g` the probe (default `f`). When `g = f` the map
/// `L` must vanish, i.e. `graph(dφ) ⊂ ker Df(x)`.
pub fn verify_chain_rule(
    m: &SurfaceModel,
    x_w: &Point,
    scales: &[f64],
    opts: &VerifyOptions<'_>,
) -> Result<ChainRuleReport> {
    let s = &m.split;
    let x = m.graph_map(x_w)?;
    let dphi = intrinsic_differential(m, &x)?.perturbed(opts.dphi_perturbation);
    let df = pansu_differential(&m.f, &x)?;
    let level_set = opts.probe.is_none();
    let mut rng = mc::stream_rng(opts.seed, 0xC4);
    let dirs: Vec<Point> = (0..opts.samples)
        .map(|_| {
            let c: Vec<f64> = (0..s.w().dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            s.w().point(&c)
        })
        .collect::<Result<_>>()?;

    let eval_probe = |p: &Point| -> Result<Vec<f64>> {
        match opts.probe {
            Some(g) => Ok(vec![g.eval(p)?]),
            None => m.f.eval(p),
        }
    };
    let dprobe = match opts.probe {
        Some(g) => HHomomorphism::from_rows(&[crate::calculus::horizontal_gradient(g, &x)?])?,
        None => df.clone(),
    };
    let lmap = |w: &Point| -> Result<Vec<f64>> {
        let moved = w * &dphi.apply(s, w);
        dprobe.apply(&moved)
    };

    let f0 = eval_probe(&x)?;
    let mut kernel_defect: f64 = 0.0;
    for u in &dirs {
        let moved = u * &dphi.apply(s, u);
        let val = df.apply(&moved)?;
        let nrm = opts.distance.norm(u).max(1e-300);
        kernel_defect = kernel_defect.max(val.iter().fold(0.0f64, |a, b| a.max(b.abs())) / nrm);
    }

    let mut ratios = Vec::with_capacity(scales.len());
    for &sc in scales {
        let mut worst: f64 = 0.0;
        for u in &dirs {
            let w = to_sphere(&opts.distance, u, sc);
            let sw = s.sigma(&x, &w)?;
            let fw = eval_probe(&m.graph_map(&sw)?)?;
            let lw = lmap(&w)?;
            let num = fw.iter().zip(&f0).zip(&lw).map(|((a, b), c)| (a - b - c).powi(2)).sum::<f64>().sqrt();
            worst = worst.max(num / sc);
        }
        ratios.push(worst);
    }
    let decays = ladder_decreases(scales, &ratios) && ratios.last().is_some_and(|r| *r < 1e-2);
    let passed = decays && (!level_set || kernel_defect <= 1e-8);
    Ok(ChainRuleReport { scales: scales.to_vec(), ratios, kernel_defect, level_set, passed })
}

pub const UID_DELTAS: [f64; 3] = [1e-1, 1e-2, 1e-3];

#[derive(Clone, Debug, PartialEq)]
pub struct UidReport {
    pub deltas: Vec<f64>,
    pub values: Vec<f64>,
    pub passed: bool,
}

/// Samples `sup_{w'} sup_{w} d(dφ_{w̄}(w), φ_{Φ(w')^{-1}}(w)) / ‖w‖` over
/// `‖w̄^{-1} w'‖ < δ` and `δ/10 <= ‖w‖ < δ` for each `δ`.
pub fn verify_uid(m: &SurfaceModel, wbar: &Point, deltas: &[f64], opts: &VerifyOptions<'_>) -> Result<UidReport> {
    let s = &m.split;
    let d = &opts.distance;
    let dphi = intrinsic_differential(m, &m.graph_map(wbar)?)?.perturbed(opts.dphi_perturbation);
    let mut rng = mc::stream_rng(opts.seed, 0x01D);
    let outer = (opts.samples as f64).sqrt().ceil() as usize;
    let draw = |rng: &mut mc::McRng| -> Result<(Point, f64)> {
        let c: Vec<f64> = (0..s.w().dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Ok((s.w().point(&c)?, rng.gen_range(0.0..1.0)))
    };
    let mut values = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let mut worst: f64 = 0.0;
        for _ in 0..outer {
            let (u, r) = draw(&mut rng)?;
            let wp = wbar * &to_sphere(d, &u, r * delta);
            let xp = m.graph_map(&wp)?;
            let base = s.pi_v(&xp);
            for _ in 0..outer {
                let (u, r) = draw(&mut rng)?;
                let w = to_sphere(d, &u, delta * (0.1 + 0.9 * r));
                // φ_{Φ(w')^{-1}}(w) = π_V(Φ(w'))^{-1} φ(σ_{Φ(w')}(w))
                let translated = &inverse(&base) * &m.phi(&s.sigma(&xp, &w)?)?;
                let lin = dphi.apply(s, &w);
                let gap = d.dist(&lin, &translated);
                worst = worst.max(gap / d.norm(&w));
            }
        }
        values.push(worst);
    }
    let passed = ladder_decreases(deltas, &values) && values.last().is_some_and(|v| *v < 1e-2);
    Ok(UidReport { deltas: deltas.to_vec(), values, passed })
}
