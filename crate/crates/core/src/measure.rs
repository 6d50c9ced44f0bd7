//! Spherical factors, the surface measure `μ` and its densities.
//!
//! `μ` is the pushforward under the graph map of
//! `‖V∧N‖ · (J_H f / J_V f)∘Φ` times Lebesgue measure in `W`-coordinates.
//! Ball measures are Monte Carlo integrals over a box of `W` that contains
//! `Φ^{-1}(B(y, t))`; the box is sized through the constant `c_0` of the
//! split, using `‖w v‖ >= c_0 ‖w‖`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::calculus::pansu_differential;
use crate::error::{Error, Result};
use crate::graph::{area_integrand, horizontal_kernel, SurfaceModel};
use crate::group::{dilate_unchecked, inverse, omega, Point};
use crate::linalg;
use crate::mc::{self, McPlan, MeasureEstimate};
use crate::metric::{sample_unit_ball, to_sphere, HomogeneousDistance};
use crate::multilinear::{blade_norm, Blade};
use crate::optim::NelderMead;
use crate::split::{estimate_c0, CoordBox, VerticalSubgroup};
use crate::tolerance;

/// `Tan(Σ, x) = ker Df(x)` as a vertical subgroup.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentCone {
    subgroup: VerticalSubgroup,
}

impl TangentCone {
    pub fn subgroup(&self) -> &VerticalSubgroup {
        &self.subgroup
    }

    /// `N_x`, the unit blade of the cone.
    pub fn blade(&self) -> Blade {
        self.subgroup.blade()
    }
}

pub fn tangent_cone(m: &SurfaceModel, x: &Point) -> Result<TangentCone> {
    let df = pansu_differential(m.f(), x)?;
    let jv = df.jacobian_v(m.split().v())?;
    if jv <= tolerance::DEGENERATE_JACOBIAN {
        return Err(Error::DegenerateJacobian(jv));
    }
    let kernel = horizontal_kernel(&df)?;
    for u in &kernel {
        let r = df.apply(&Point::from_parts(u, 0.0)?)?;
        let defect = r.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        if defect > 1e-8 {
            return Err(Error::RankDeficient(defect));
        }
    }
    Ok(TangentCone { subgroup: VerticalSubgroup::new(m.n(), kernel)? })
}

/// `J_H f(x) / J_V f(x)`.
pub fn density_ratio(m: &SurfaceModel, x: &Point) -> Result<f64> {
    let df = pansu_differential(m.f(), x)?;
    let jv = df.jacobian_v(m.split().v())?;
    if jv <= tolerance::DEGENERATE_JACOBIAN {
        return Err(Error::DegenerateJacobian(jv));
    }
    Ok(df.jacobian_h() / jv)
}

/// `J_H f / J_V f · ‖V ∧ N_x‖`, which equals 1 on the surface.
pub fn density_ratio_times_cone(m: &SurfaceModel, x: &Point) -> Result<f64> {
    let cone = tangent_cone(m, x)?;
    let vn = blade_norm(&m.split().v().blade().wedge(&cone.blade())?);
    Ok(density_ratio(m, x)? * vn)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SectionMethod {
    /// Fibre integration for multiradial distances, indicator otherwise.
    Auto,
    /// Integrates the exact vertical fibre length over the horizontal
    /// coordinates; needs a multiradial distance.
    Fibre,
    Indicator,
}

/// `H^p_E(Π ∩ B(z, 1))` in orthonormal `Π`-coordinates.
pub fn plane_ball_section_area(
    pi: &VerticalSubgroup,
    z: &Point,
    d: &HomogeneousDistance,
    n_samples: usize,
    seed: u64,
) -> Result<MeasureEstimate> {
    section_area_with(pi, z, d, n_samples, seed, SectionMethod::Auto)
}

pub fn section_area_with(
    pi: &VerticalSubgroup,
    z: &Point,
    d: &HomogeneousDistance,
    n_samples: usize,
    seed: u64,
    method: SectionMethod,
) -> Result<MeasureEstimate> {
    if z.n() != pi.n() {
        return Err(Error::DimensionMismatch { expected: 2 * pi.n() + 1, found: z.dim() });
    }
    let fibre = match method {
        SectionMethod::Auto => d.is_multiradial(),
        SectionMethod::Fibre if !d.is_multiradial() => {
            return Err(Error::InvalidDistance("fibre integration needs a multiradial distance".into()))
        }
        SectionMethod::Fibre => true,
        SectionMethod::Indicator => false,
    };
    let ext = d.extent();
    let basis = pi.basis();
    let zh = z.horizontal_part();
    // Π-coordinates of the projection of z_h and its distance to Π_h
    let uz: Vec<f64> = basis.iter().map(|b| linalg::dot(b, zh)).collect();
    let mut off = zh.to_vec();
    linalg::reject(&mut off, basis);
    if linalg::norm(&off) > ext.horizontal {
        return Ok(MeasureEstimate { value: 0.0, std_error: 0.0, n_samples, seed });
    }
    let in_plane = |u: &[f64]| -> Vec<f64> {
        let mut h = vec![0.0; zh.len()];
        for (c, b) in u.iter().zip(basis) {
            linalg::axpy(*c, b, &mut h);
        }
        h
    };
    let m = basis.len();
    let box_volume = (2.0 * ext.horizontal).powi(m as i32);
    let draw_u = |rng: &mut mc::McRng| -> Vec<f64> {
        uz.iter().map(|c| c + ext.horizontal * rng.gen_range(-1.0..1.0)).collect()
    };
    if fibre {
        let length = |h: &[f64]| -> f64 {
            let q: Vec<f64> = h.iter().zip(zh).map(|(a, b)| a - b).collect();
            let (down, up) = d.vertical_reach(&q).expect("multiradial");
            down + up
        };
        if m == 0 {
            return Ok(MeasureEstimate { value: length(&vec![0.0; zh.len()]), std_error: 0.0, n_samples, seed });
        }
        mc::mean(McPlan::new(n_samples, seed), box_volume, |rng| Ok(length(&in_plane(&draw_u(rng)))))
    } else {
        mc::mean(McPlan::new(n_samples, seed), box_volume * 2.0 * ext.vertical, |rng| {
            let h = in_plane(&draw_u(rng));
            let c = z.vertical_part() + 0.5 * omega(zh, &h);
            let p = Point::from_parts(&h, c + ext.vertical * rng.gen_range(-1.0..1.0))?;
            Ok(if d.dist(z, &p) <= 1.0 { 1.0 } else { 0.0 })
        })
    }
}

/// `H^p_E(P ∩ B(z, 1))` for a linear `p`-plane `P` of `R^{2n+1}` that need
/// not be a subgroup, by indicator Monte Carlo. `basis` must be orthonormal.
pub fn linear_section_area(
    basis: &[Vec<f64>],
    z: &Point,
    d: &HomogeneousDistance,
    n_samples: usize,
    seed: u64,
) -> Result<MeasureEstimate> {
    let q = linalg::orthonormalize(basis, 1e-10).ok_or(Error::DependentFactors)?;
    for (a, b) in q.iter().zip(basis) {
        let dev = a.iter().zip(b).fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs()));
        if dev > 1e-10 {
            return Err(Error::NotOrthonormal(dev));
        }
    }
    let ext = d.extent();
    let zh = linalg::norm(z.horizontal_part());
    let h = zh + ext.horizontal;
    let t = z.vertical_part().abs() + ext.vertical + 0.5 * zh * h;
    let bound = (h * h + t * t).sqrt();
    let p = basis.len();
    mc::mean(McPlan::new(n_samples, seed), (2.0 * bound).powi(p as i32), |rng| {
        let mut x = vec![0.0; z.dim()];
        for b in basis {
            linalg::axpy(bound * rng.gen_range(-1.0..1.0), b, &mut x);
        }
        Ok(if d.dist(z, &Point::new(&x)?) <= 1.0 { 1.0 } else { 0.0 })
    })
}

/// Sample budgets for the estimators of this module.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Budget {
    /// Samples per section-area evaluation inside the search.
    pub section_samples: usize,
    /// Samples for the final, independent section-area estimate.
    pub final_samples: usize,
    pub candidates: usize,
    pub refine_top: usize,
    pub nm_evals: usize,
    /// Raw draws per rung for the pooled Federer search.
    pub pool_samples: usize,
    /// Samples for each direct ball-measure estimate.
    pub ball_samples: usize,
    pub starts: usize,
}

impl Budget {
    pub fn low() -> Self {
        Self {
            section_samples: 1_000,
            final_samples: 20_000,
            candidates: 500,
            refine_top: 3,
            nm_evals: 60,
            pool_samples: 20_000,
            ball_samples: 30_000,
            starts: 8,
        }
    }

    pub fn high() -> Self {
        Self {
            section_samples: 10_000,
            final_samples: 1_000_000,
            candidates: 2_000,
            refine_top: 5,
            nm_evals: 300,
            pool_samples: 300_000,
            ball_samples: 800_000,
            starts: 32,
        }
    }
}

impl Default for Budget {
    fn default() -> Self {
        Self {
            section_samples: 4_000,
            final_samples: 200_000,
            candidates: 500,
            refine_top: 5,
            nm_evals: 150,
            pool_samples: 100_000,
            ball_samples: 200_000,
            starts: 32,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SphericalFactor {
    /// Fresh estimate at the maximizing center.
    pub value: MeasureEstimate,
    pub argmax: Point,
    /// Estimate at `z = 0` with the same samples as `value`.
    pub at_origin: MeasureEstimate,
}

/// `β_d(Π) = max_{‖z‖ <= 1} H_E(Π ∩ B(z, 1))`: seeded candidates in the
/// unit ball, Nelder–Mead refinement of the best few (common random numbers,
/// projection to the ball along dilations), then an independent estimate at
/// the winner.
pub fn spherical_factor(pi: &VerticalSubgroup, d: &HomogeneousDistance, budget: &Budget, seed: u64) -> Result<SphericalFactor> {
    let n = pi.n();
    let crn = mc::derive_seed(seed, 1);
    let objective = |z: &Point| -> Result<f64> { Ok(plane_ball_section_area(pi, z, d, budget.section_samples, crn)?.value) };
    let mut rng = mc::stream_rng(mc::derive_seed(seed, 0), 0);
    let mut scored: Vec<(f64, Point)> = Vec::with_capacity(budget.candidates + 1);
    let origin = Point::origin(n);
    scored.push((objective(&origin)?, origin.clone()));
    for _ in 0..budget.candidates.max(500) {
        let z = sample_unit_ball(d, n, &mut rng);
        scored.push((objective(&z)?, z));
    }
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.euclidean_norm().total_cmp(&b.1.euclidean_norm())));

    let project = |c: &mut [f64]| {
        if let Ok(p) = Point::new(c) {
            if d.norm(&p) > 1.0 {
                c.copy_from_slice(to_sphere(d, &p, 1.0).coords());
            }
        }
    };
    let nm = NelderMead { max_evals: budget.nm_evals, x_tol: 1e-4, f_tol: 0.0, initial_step: 0.1 };
    let mut best = scored[0].clone();
    for (_, start) in scored.iter().take(budget.refine_top.max(1)) {
        let r = nm.minimize(|c| Ok(-objective(&Point::new(c)?)?), start.coords(), project)?;
        let z = Point::new(&r.x)?;
        let v = -r.value;
        if v > best.0 || (v == best.0 && z.euclidean_norm() < best.1.euclidean_norm()) {
            best = (v, z);
        }
    }
    let fresh = mc::derive_seed(seed, 2);
    let value = plane_ball_section_area(pi, &best.1, d, budget.final_samples, fresh)?;
    let at_origin = plane_ball_section_area(pi, &origin, d, budget.final_samples, fresh)?;
    Ok(SphericalFactor { value, argmax: best.1, at_origin })
}

/// A surface together with a distance and the box-sizing constant.
#[derive(Clone, Debug)]
pub struct SurfaceMeasure<'a> {
    model: &'a SurfaceModel,
    distance: &'a HomogeneousDistance,
    c0: f64,
}

/// Safety factor applied to the sampled `c_0`, which overestimates the
/// true infimum.
pub const C0_SAFETY: f64 = 0.9;

impl<'a> SurfaceMeasure<'a> {
    pub fn new(model: &'a SurfaceModel, distance: &'a HomogeneousDistance, seed: u64) -> Result<Self> {
        let c0 = estimate_c0(model.split(), distance, 20_000, seed, 1.0)?;
        Ok(Self { model, distance, c0: C0_SAFETY * c0 })
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    /// `α = 2n + 2 - k`.
    pub fn alpha(&self) -> f64 {
        (2 * self.model.n() + 2 - self.model.k()) as f64
    }

    /// Box in `W`-coordinates around the origin containing every `ŵ` with
    /// `‖ŵ‖ <= r / c_0`.
    fn local_box(&self, r: f64) -> CoordBox {
        let ext = self.distance.extent();
        let s = r / self.c0;
        let dim = self.model.split().w().dim();
        let mut half = vec![ext.horizontal * s; dim];
        half[dim - 1] = ext.vertical * s * s;
        CoordBox::symmetric(&half).expect("positive radius")
    }

    /// Maps `ŵ` to `w = w_y · v_y ŵ v_y^{-1}`, so that
    /// `y^{-1} Φ(w) = ŵ · (v_y^{-1} φ(w))`. The map is affine with unit
    /// Jacobian in `W`-coordinates.
    fn placer(&self, y: &Point) -> Result<impl Fn(&[f64]) -> Result<Point> + Sync + '_> {
        let (wy, vy) = self.model.split().project(y)?;
        let vy_inv = inverse(&vy);
        let w = self.model.split().w();
        Ok(move |c: &[f64]| -> Result<Point> {
            let hat = w.point(c)?;
            Ok(&wy * &(&(&vy * &hat) * &vy_inv))
        })
    }

    fn check_box_in_domain(&self, bx: &CoordBox, place: &dyn Fn(&[f64]) -> Result<Point>) -> Result<()> {
        let w = self.model.split().w();
        for corner in bx.corners() {
            let c = w.coords(&place(&corner)?);
            if !self.model.domain().contains(&c) {
                return Err(Error::DomainExit(format!("ball region reaches W-coordinates {c:?}")));
            }
        }
        Ok(())
    }

    /// `μ(B(y, t))`.
    pub fn mu_ball(&self, y: &Point, t: f64, n_samples: usize, seed: u64) -> Result<MeasureEstimate> {
        if t == 0.0 {
            return Ok(MeasureEstimate { value: 0.0, std_error: 0.0, n_samples, seed });
        }
        if !(t > 0.0) {
            return Err(Error::NonPositiveScale(t));
        }
        let bx = self.local_box(t);
        let place = self.placer(y)?;
        self.check_box_in_domain(&bx, &place)?;
        let guess = self.model.split().pi_v(y);
        mc::mean(McPlan::new(n_samples, seed), bx.volume(), |rng| {
            let w = place(&bx.sample(rng))?;
            let x = &w * &crate::graph::implicit_solve(self.model, &w, &guess)?;
            if self.distance.dist(y, &x) <= t {
                area_integrand(self.model, &x)
            } else {
                Ok(0.0)
            }
        })
    }

    /// Surface samples covering `B(x, r)`, with their integrand weights.
    pub fn pool(&self, x: &Point, r: f64, raw: usize, seed: u64) -> Result<SurfacePool> {
        let bx = self.local_box(r);
        let place = self.placer(x)?;
        self.check_box_in_domain(&bx, &place)?;
        let guess = self.model.split().pi_v(x);
        let points = mc::collect(McPlan::new(raw, seed), |rng| {
            let w = place(&bx.sample(rng))?;
            let p = &w * &crate::graph::implicit_solve(self.model, &w, &guess)?;
            if self.distance.dist(x, &p) <= r {
                Ok(Some((p.clone(), area_integrand(self.model, &p)?)))
            } else {
                Ok(None)
            }
        })?;
        Ok(SurfacePool { points, volume: bx.volume(), raw, seed })
    }
}

/// `μ(B(y, t))` for a single query; see [`SurfaceMeasure::mu_ball`].
pub fn mu_ball(
    m: &SurfaceModel,
    y: &Point,
    t: f64,
    d: &HomogeneousDistance,
    n_samples: usize,
    seed: u64,
) -> Result<MeasureEstimate> {
    SurfaceMeasure::new(m, d, mc::derive_seed(seed, 0xC0))?.mu_ball(y, t, n_samples, seed)
}

/// Pre-solved surface points inside a ball `B(x, r)`; any ball `B(y, t)`
/// with `B(y, t) ⊂ B(x, r)` can be measured from the pool without new
/// Newton solves.
#[derive(Clone, Debug)]
pub struct SurfacePool {
    points: Vec<(Point, f64)>,
    volume: f64,
    raw: usize,
    seed: u64,
}

impl SurfacePool {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn mu_ball(&self, d: &HomogeneousDistance, y: &Point, t: f64) -> MeasureEstimate {
        let hits = self.points.iter().map(|(p, w)| if d.dist(y, p) <= t { *w } else { 0.0 });
        let padded = hits.chain(std::iter::repeat(0.0).take(self.raw - self.points.len()));
        mc::from_values(padded, self.volume, self.seed)
    }
}

/// Radii `t_j = t0 γ^j`, `j < rungs`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Schedule {
    pub t0: f64,
    pub gamma: f64,
    pub rungs: usize,
}

impl Default for Schedule {
    fn default() -> Self {
        Self { t0: 0.2, gamma: 0.5, rungs: 5 }
    }
}

impl Schedule {
    pub fn radii(&self) -> Vec<f64> {
        (0..self.rungs).map(|j| self.t0 * self.gamma.powi(j as i32)).collect()
    }
}

/// Density ratios `μ(B)/t^α` along a schedule.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityProfile {
    pub alpha: f64,
    pub scales: Vec<f64>,
    pub values: Vec<MeasureEstimate>,
    /// Ball centers attaining the values.
    pub centers: Vec<Point>,
    /// The last rung.
    pub limit: MeasureEstimate,
    /// Rung-to-rung drift of the last two values stays within 5%.
    pub converged: bool,
}

impl DensityProfile {
    fn from_rungs(alpha: f64, scales: Vec<f64>, values: Vec<MeasureEstimate>, centers: Vec<Point>) -> Self {
        let limit = *values.last().expect("at least one rung");
        let converged = match values.len() {
            0 | 1 => true,
            l => (values[l - 1].value / values[l - 2].value - 1.0).abs() <= 0.05,
        };
        Self { alpha, scales, values, centers, limit, converged }
    }

    /// `sup_{t_i <= t_j} value_i`, the sup over radii below each rung.
    pub fn envelope(&self) -> Vec<f64> {
        let mut env = vec![0.0; self.values.len()];
        let mut run = f64::NEG_INFINITY;
        for i in (0..self.values.len()).rev() {
            run = run.max(self.values[i].value);
            env[i] = run;
        }
        env
    }
}

fn check_on_surface(m: &SurfaceModel, x: &Point) -> Result<()> {
    let r = m.residual(x)?.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    if r > 1e-8 {
        return Err(Error::InvalidParameter(format!("point is not on the surface (|f - level| = {r:e})")));
    }
    Ok(())
}

/// `θ^α(μ, x)`: for each radius `t`, the sup of `μ(B(y,t))/t^α` over
/// `d(x,y) <= t`. Candidates are searched on a pooled sample of
/// `Φ^{-1}(B(x, 2t))` by multistart Nelder–Mead (starts at `y = x` and on
/// the sphere `d(x,y) = 0.9t`); the winner and `x` itself are then
/// re-estimated with fresh samples and the larger value is kept.
pub fn federer_density(
    m: &SurfaceModel,
    x: &Point,
    d: &HomogeneousDistance,
    schedule: &Schedule,
    budget: &Budget,
    seed: u64,
) -> Result<DensityProfile> {
    check_on_surface(m, x)?;
    let sm = SurfaceMeasure::new(m, d, mc::derive_seed(seed, 0xC0))?;
    let alpha = sm.alpha();
    let mut values = Vec::new();
    let mut centers = Vec::new();
    let mut rng = mc::stream_rng(mc::derive_seed(seed, 0x57), 0);
    for (j, &t) in schedule.radii().iter().enumerate() {
        let rung_seed = mc::derive_seed(seed, 100 + j as u64);
        let pool = sm.pool(x, 2.0 * t, budget.pool_samples, mc::derive_seed(rung_seed, 0))?;
        let scale = t.powf(alpha);
        let objective = |y: &Point| pool.mu_ball(d, y, t).value / scale;
        let project = |c: &mut [f64]| {
            if let Ok(y) = Point::new(c) {
                let rel = &inverse(x) * &y;
                let r = d.norm(&rel);
                if r > t {
                    c.copy_from_slice((x * &dilate_unchecked(t / r, &rel)).coords());
                }
            }
        };
        let mut starts = vec![x.clone()];
        for _ in 0..budget.starts {
            let g: Vec<f64> = (0..x.dim()).map(|_| StandardNormal.sample(&mut rng)).collect();
            starts.push(x * &to_sphere(d, &Point::new(&g)?, 0.9 * t));
        }
        let nm = NelderMead { max_evals: budget.nm_evals, x_tol: 1e-3 * t, f_tol: 0.0, initial_step: 0.3 * t };
        let mut best = (objective(x), x.clone());
        for s in &starts {
            let r = nm.minimize(|c| Ok(-objective(&Point::new(c)?)), s.coords(), project)?;
            let y = Point::new(&r.x)?;
            let v = -r.value;
            let closer = y.max_abs_diff(x) < best.1.max_abs_diff(x);
            if v > best.0 || (v == best.0 && closer) {
                best = (v, y);
            }
        }
        let fresh = mc::derive_seed(rung_seed, 1);
        let at_best = sm.mu_ball(&best.1, t, budget.ball_samples, fresh)?.scaled(1.0 / scale);
        let at_x = sm.mu_ball(x, t, budget.ball_samples, fresh)?.scaled(1.0 / scale);
        if at_best.value >= at_x.value {
            values.push(at_best);
            centers.push(best.1);
        } else {
            values.push(at_x);
            centers.push(x.clone());
        }
    }
    Ok(DensityProfile::from_rungs(alpha, schedule.radii(), values, centers))
}

/// `Θ^{*α}(μ, x)` along the schedule, with centered balls `B(x, t)`.
pub fn upper_density(
    m: &SurfaceModel,
    x: &Point,
    d: &HomogeneousDistance,
    schedule: &Schedule,
    budget: &Budget,
    seed: u64,
) -> Result<DensityProfile> {
    check_on_surface(m, x)?;
    let sm = SurfaceMeasure::new(m, d, mc::derive_seed(seed, 0xC0))?;
    let alpha = sm.alpha();
    let mut values = Vec::new();
    for (j, &t) in schedule.radii().iter().enumerate() {
        let s = mc::derive_seed(seed, 200 + j as u64);
        values.push(sm.mu_ball(x, t, budget.ball_samples, s)?.scaled(1.0 / t.powf(alpha)));
    }
    let centers = vec![x.clone(); values.len()];
    Ok(DensityProfile::from_rungs(alpha, schedule.radii(), values, centers))
}

/// Replaces the tangent plane in the `β` column, to confirm that the suite
/// can fail.
#[derive(Clone, Debug, PartialEq)]
pub enum NegativeControl {
    /// Orthonormal basis of a linear plane of `R^{2n+1}`.
    WrongPlane(Vec<Vec<f64>>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlowupRow {
    pub x: Point,
    pub theta: DensityProfile,
    pub beta: MeasureEstimate,
    pub upper: DensityProfile,
    pub h_tan: MeasureEstimate,
    pub theta_gap: f64,
    pub upper_gap: f64,
    /// `|θ − Θ*| / Θ*`, checked only for convex-ball distances.
    pub coincidence_gap: Option<f64>,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlowupReport {
    pub rows: Vec<BlowupRow>,
    pub passed: bool,
}

pub const BLOWUP_TOL: f64 = 0.05;

/// Compares the Federer density with `β_d(Tan(Σ, x))` and the upper density
/// with `H(Tan(Σ, x) ∩ B(0, 1))` at each point, and the two densities with
/// each other when the unit ball is convex.
pub fn verify_blowup_suite(
    m: &SurfaceModel,
    points: &[Point],
    d: &HomogeneousDistance,
    schedule: &Schedule,
    budget: &Budget,
    seed: u64,
    control: Option<&NegativeControl>,
) -> Result<BlowupReport> {
    let mut rows = Vec::with_capacity(points.len());
    for (i, x) in points.iter().enumerate() {
        let s = mc::derive_seed(seed, i as u64);
        let cone = tangent_cone(m, x)?;
        let theta = federer_density(m, x, d, schedule, budget, mc::derive_seed(s, 1))?;
        let upper = upper_density(m, x, d, schedule, budget, mc::derive_seed(s, 2))?;
        let beta = match control {
            None => spherical_factor(cone.subgroup(), d, budget, mc::derive_seed(s, 3))?.value,
            Some(NegativeControl::WrongPlane(basis)) => {
                linear_section_area(basis, &Point::origin(m.n()), d, budget.final_samples, mc::derive_seed(s, 3))?
            }
        };
        let h_tan =
            plane_ball_section_area(cone.subgroup(), &Point::origin(m.n()), d, budget.final_samples, mc::derive_seed(s, 4))?;
        let theta_gap = (theta.limit.value - beta.value).abs() / beta.value;
        let upper_gap = (upper.limit.value - h_tan.value).abs() / h_tan.value;
        let coincidence_gap =
            (d.convex_ball() == Some(true)).then(|| (theta.limit.value - upper.limit.value).abs() / upper.limit.value);
        let passed = theta_gap <= BLOWUP_TOL && upper_gap <= BLOWUP_TOL && coincidence_gap.is_none_or(|g| g <= BLOWUP_TOL);
        rows.push(BlowupRow { x: x.clone(), theta, beta, upper, h_tan, theta_gap, upper_gap, coincidence_gap, passed });
    }
    let passed = rows.iter().all(|r| r.passed);
    Ok(BlowupReport { rows, passed })
}

/// `μ(B)` for an ambient box `B`, by Monte Carlo over the whole domain `U`.
/// Fails with a domain exit if surface points of `B` come within 2% of the
/// boundary of `U`, since part of `Σ ∩ B` could then lie outside the chart.
pub fn ambient_box_measure(m: &SurfaceModel, ambient: &CoordBox, n_samples: usize, seed: u64) -> Result<MeasureEstimate> {
    if ambient.dim() != 2 * m.n() + 1 {
        return Err(Error::DimensionMismatch { expected: 2 * m.n() + 1, found: ambient.dim() });
    }
    let dom = m.domain();
    let lo: Vec<f64> = dom.center().iter().zip(dom.half()).map(|(c, h)| c - h).collect();
    let hi: Vec<f64> = dom.center().iter().zip(dom.half()).map(|(c, h)| c + h).collect();
    let u = CoordBox::new(lo, hi)?;
    let w = m.split().w();
    mc::mean(McPlan::new(n_samples, seed), u.volume(), |rng| {
        let c = u.sample(rng);
        let x = m.graph_map(&w.point(&c)?)?;
        if !ambient.contains(x.coords()) {
            return Ok(0.0);
        }
        if dom.relative_depth(&c) < 0.02 {
            return Err(Error::DomainExit(format!("Σ ∩ B reaches the boundary of U at {c:?}")));
        }
        area_integrand(m, &x)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::DefiningFunction;
    use crate::graph::WBox;
    use crate::split::Split;

    fn p(c: &[f64]) -> Point {
        Point::new(c).unwrap()
    }

    fn kor() -> HomogeneousDistance {
        HomogeneousDistance::koranyi(16.0).unwrap()
    }

    fn model(src: &str, half: f64) -> SurfaceModel {
        let f = DefiningFunction::from_exprs(1, &[src]).unwrap();
        let dom = WBox::new(vec![0.0, 0.0], vec![half, half]).unwrap();
        SurfaceModel::new(f, Split::coordinate(1, 1).unwrap(), vec![0.0], dom).unwrap()
    }

    /// `∫_0^1 sqrt(1 - y^4) dy` by composite Simpson after the substitution
    /// `y = 1 - s^2`, which removes the endpoint singularity.
    fn quarter_oracle() -> f64 {
        let g = |s: f64| {
            let y: f64 = 1.0 - s * s;
            (1.0 - y.powi(4)).max(0.0).sqrt() * 2.0 * s
        };
        let n = 20_000;
        let h = 1.0 / n as f64;
        let mut acc = g(0.0) + g(1.0);
        for i in 1..n {
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * g(i as f64 * h);
        }
        acc * h / 3.0
    }

    #[test]
    fn oracle_value() {
        assert!((quarter_oracle() - 0.874019).abs() < 1e-5);
    }

    #[test]
    fn tangent_cone_examples() {
        let plane = model("x1", 1.0);
        let c = tangent_cone(&plane, &p(&[0., 0.3, 0.2])).unwrap();
        let target = vec![vec![0.0, 1.0]];
        assert!(linalg::max_principal_sine(c.subgroup().basis(), &target) < 1e-8);

        let m = model("x1 + x3", 1.5);
        let c = tangent_cone(&m, &p(&[-1., 0., 1.])).unwrap();
        let s5 = 5f64.sqrt();
        assert!(linalg::max_principal_sine(c.subgroup().basis(), &[vec![1.0 / s5, 2.0 / s5]]) < 1e-8);

        let f = DefiningFunction::from_exprs(2, &["x1", "x2"]).unwrap();
        let dom = WBox::new(vec![0.0; 3], vec![1.0; 3]).unwrap();
        let m2 = SurfaceModel::new(f, Split::coordinate(2, 2).unwrap(), vec![0.0, 0.0], dom).unwrap();
        let c = tangent_cone(&m2, &Point::origin(2)).unwrap();
        let target = vec![vec![0., 0., 1., 0.], vec![0., 0., 0., 1.]];
        assert!(linalg::max_principal_sine(c.subgroup().basis(), &target) < 1e-8);
        assert_eq!(c.subgroup().dim(), 3);
    }

    #[test]
    fn density_ratio_examples() {
        let m = model("x1 + x3", 1.5);
        let x = p(&[-1., 0., 1.]);
        assert!((density_ratio(&m, &x).unwrap() - 1.25f64.sqrt()).abs() < 1e-8);
        assert!((density_ratio_times_cone(&m, &x).unwrap() - 1.0).abs() < 1e-8);
        let plane = model("x1", 1.0);
        assert!((density_ratio(&plane, &p(&[0., 0.5, 0.5])).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn section_area_matches_quadrature() {
        let pi = VerticalSubgroup::coordinate(1, 1).unwrap();
        let oracle = quarter_oracle();
        let fib = plane_ball_section_area(&pi, &Point::origin(1), &kor(), 50_000, 1).unwrap();
        assert!((fib.value / oracle - 1.0).abs() < 0.01, "{fib:?}");
        let ind = section_area_with(&pi, &Point::origin(1), &kor(), 200_000, 1, SectionMethod::Indicator).unwrap();
        assert!((ind.value / oracle - 1.0).abs() < 0.01, "{ind:?}");
        // fibre and indicator agree off-center as well
        let z = p(&[0.3, -0.2, 0.1]);
        let a = plane_ball_section_area(&pi, &z, &kor(), 50_000, 2).unwrap();
        let b = section_area_with(&pi, &z, &kor(), 200_000, 2, SectionMethod::Indicator).unwrap();
        assert!((a.value - b.value).abs() < 4.0 * (a.std_error + b.std_error), "{a:?} {b:?}");
    }

    #[test]
    fn section_area_far_and_seeds() {
        let pi = VerticalSubgroup::coordinate(1, 1).unwrap();
        let far = plane_ball_section_area(&pi, &p(&[3.0, 0.0, 0.0]), &kor(), 1000, 1).unwrap();
        assert_eq!(far.value, 0.0);
        let a = plane_ball_section_area(&pi, &Point::origin(1), &kor(), 20_000, 5).unwrap();
        let b = plane_ball_section_area(&pi, &Point::origin(1), &kor(), 20_000, 6).unwrap();
        assert!((a.value - b.value).abs() < 3.0 * (a.std_error * a.std_error + b.std_error * b.std_error).sqrt());
        assert_ne!(a.value, b.value);
    }

    #[test]
    fn spherical_factor_koranyi() {
        let pi = VerticalSubgroup::coordinate(1, 1).unwrap();
        let sf = spherical_factor(&pi, &kor(), &Budget::low(), 3).unwrap();
        assert!((sf.value.value / quarter_oracle() - 1.0).abs() < 0.01, "{sf:?}");
        assert!((sf.value.value / sf.at_origin.value - 1.0).abs() < 0.01);
    }

    #[test]
    fn mu_ball_scaling_on_plane() {
        let plane = model("x1", 2.0);
        let d = kor();
        let sm = SurfaceMeasure::new(&plane, &d, 1).unwrap();
        let a = sm.mu_ball(&Point::origin(1), 0.1, 100_000, 2).unwrap().scaled(1e3);
        let b = sm.mu_ball(&Point::origin(1), 0.4, 100_000, 2).unwrap().scaled(1.0 / 0.064);
        // same samples after dilation, so the ratios agree to round-off
        assert!((a.value / b.value - 1.0).abs() < 1e-9, "{a:?} {b:?}");
        assert!((a.value / quarter_oracle() - 1.0).abs() < 0.02);
        assert_eq!(sm.mu_ball(&Point::origin(1), 0.0, 10, 1).unwrap().value, 0.0);
    }

    #[test]
    fn mu_ball_on_tilted_surface() {
        let m = model("x1 + x3", 1.5);
        let x = m.graph_map(&p(&[0., 0., 1.])).unwrap();
        let e = mu_ball(&m, &x, 0.1, &kor(), 100_000, 4).unwrap();
        assert!(e.value > 0.0 && e.relative_error() < 0.02, "{e:?}");
        assert!(matches!(mu_ball(&m, &x, 1.0, &kor(), 100, 4), Err(Error::DomainExit(_))));
    }

    #[test]
    fn pool_agrees_with_direct_estimate() {
        let m = model("x1 + x3", 1.5);
        let d = kor();
        let sm = SurfaceMeasure::new(&m, &d, 1).unwrap();
        let x = m.graph_map(&p(&[0., 0.2, 0.3])).unwrap();
        let pool = sm.pool(&x, 0.2, 100_000, 8).unwrap();
        let a = pool.mu_ball(&d, &x, 0.1);
        let b = sm.mu_ball(&x, 0.1, 100_000, 9).unwrap();
        assert!((a.value - b.value).abs() < 4.0 * (a.std_error + b.std_error), "{a:?} {b:?}");
    }

    #[test]
    fn densities_on_plane_low_budget() {
        let plane = model("x1", 2.0);
        let d = kor().with_convex_ball(true);
        let sched = Schedule { t0: 0.2, gamma: 0.5, rungs: 2 };
        let x = p(&[0., 0.1, -0.2]);
        let th = federer_density(&plane, &x, &d, &sched, &Budget::low(), 1).unwrap();
        let up = upper_density(&plane, &x, &d, &sched, &Budget::low(), 1).unwrap();
        assert_eq!(th.alpha, 3.0);
        let oracle = quarter_oracle();
        assert!((th.limit.value / oracle - 1.0).abs() < 0.05, "{th:?}");
        assert!((up.limit.value / oracle - 1.0).abs() < 0.05, "{up:?}");
        assert!(up.limit.value <= th.limit.value + 3.0 * (up.limit.std_error + th.limit.std_error));
        let env = th.envelope();
        assert!(env.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn wrong_plane_section() {
        // horizontal plane span{e1, e2}: the Korányi section is the unit disk
        let basis = vec![vec![1., 0., 0.], vec![0., 1., 0.]];
        let e = linear_section_area(&basis, &Point::origin(1), &kor(), 100_000, 3).unwrap();
        assert!((e.value / std::f64::consts::PI - 1.0).abs() < 0.02, "{e:?}");
    }
}
