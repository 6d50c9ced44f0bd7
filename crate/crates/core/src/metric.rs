//! Homogeneous distances on `H^n`.
//!
//! A distance is determined by its homogeneous norm `‖x‖ = d(x, 0)` through
//! `d(x, y) = ‖x^{-1} y‖`. Two families are built in (Cygan-Korányi and
//! `d_∞`); anything else goes through [`HomogeneousDistance::custom`], which
//! refuses norms that fail [`validate_distance`].

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::group::{dilate_unchecked, inverse, Point};
use crate::linalg;
use crate::mc::{stream_rng, McRng};

/// Cygan-Korányi gauge `(|p_h|^4 + c p_t^2)^{1/4}`.
pub fn koranyi_norm(p: &Point, c: f64) -> f64 {
    let h2 = linalg::dot(p.horizontal_part(), p.horizontal_part());
    let t = p.vertical_part();
    (h2 * h2 + c * t * t).sqrt().sqrt()
}

/// `max{|p_h|, ε sqrt|p_t|}`.
pub fn dinf_norm(p: &Point, eps: f64) -> f64 {
    let h = linalg::norm(p.horizontal_part());
    h.max(eps * p.vertical_part().abs().sqrt())
}

pub type NormFn = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum NormFamily {
    Koranyi { c: f64 },
    Dinf { eps: f64 },
    Custom { name: String, eval: NormFn },
}

impl fmt::Debug for NormFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormFamily::Koranyi { c } => write!(f, "Koranyi {{ c: {c} }}"),
            NormFamily::Dinf { eps } => write!(f, "Dinf {{ eps: {eps} }}"),
            NormFamily::Custom { name, .. } => write!(f, "Custom {{ name: {name:?} }}"),
        }
    }
}

/// Bounds of the unit ball: `|p_h| <= horizontal`, `|p_t| <= vertical`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BallExtent {
    pub horizontal: f64,
    pub vertical: f64,
}

#[derive(Clone, Debug)]
pub struct HomogeneousDistance {
    family: NormFamily,
    multiradial: bool,
    vertically_symmetric: Vec<usize>,
    convex_ball: Option<bool>,
    extent: BallExtent,
}

impl HomogeneousDistance {
    pub fn koranyi(c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidParameter(format!("Koranyi constant must be positive, got {c}")));
        }
        Ok(Self {
            family: NormFamily::Koranyi { c },
            multiradial: true,
            vertically_symmetric: Vec::new(),
            convex_ball: None,
            extent: BallExtent { horizontal: 1.0, vertical: 1.0 / c.sqrt() },
        })
    }

    pub fn dinf(eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::InvalidParameter(format!("d_inf epsilon must be positive, got {eps}")));
        }
        Ok(Self {
            family: NormFamily::Dinf { eps },
            multiradial: true,
            vertically_symmetric: Vec::new(),
            convex_ball: None,
            extent: BallExtent { horizontal: 1.0, vertical: 1.0 / (eps * eps) },
        })
    }

    /// A user-supplied homogeneous norm. It is validated on `10^4` samples in
    /// `H^n` and rejected if any axiom check fails.
    pub fn custom(
        name: impl Into<String>,
        eval: NormFn,
        multiradial: bool,
        n: usize,
        seed: u64,
    ) -> Result<Self> {
        let name = name.into();
        let probe_extent = BallExtent { horizontal: f64::NAN, vertical: f64::NAN };
        let mut d = Self {
            family: NormFamily::Custom { name: name.clone(), eval },
            multiradial,
            vertically_symmetric: Vec::new(),
            convex_ball: None,
            extent: probe_extent,
        };
        d.extent = estimate_extent(&d, n, seed);
        let report = validate_distance(&d, n, 10_000, seed);
        if !report.passed {
            return Err(Error::InvalidDistance(format!("{name}: {report:?}")));
        }
        if multiradial {
            let err = multiradial_probe(&d, n, 2_000, seed);
            if err > 1e-10 {
                return Err(Error::InvalidDistance(format!(
                    "{name}: claimed multiradial but rotation defect is {err:e}"
                )));
            }
        }
        Ok(d)
    }

    pub fn norm(&self, p: &Point) -> f64 {
        match &self.family {
            NormFamily::Koranyi { c } => koranyi_norm(p, *c),
            NormFamily::Dinf { eps } => dinf_norm(p, *eps),
            NormFamily::Custom { eval, .. } => eval(p),
        }
    }

    pub fn dist(&self, x: &Point, y: &Point) -> f64 {
        self.norm(&(&inverse(x) * y))
    }

    pub fn family(&self) -> &NormFamily {
        &self.family
    }

    pub fn name(&self) -> String {
        match &self.family {
            NormFamily::Koranyi { c } => format!("koranyi(c={c})"),
            NormFamily::Dinf { eps } => format!("dinf(eps={eps})"),
            NormFamily::Custom { name, .. } => name.clone(),
        }
    }

    pub fn is_multiradial(&self) -> bool {
        self.multiradial
    }

    /// Dimensions `p` for which `p`-vertical symmetry is claimed. Multiradial
    /// distances are vertically symmetric for every `p`.
    pub fn is_vertically_symmetric(&self, p: usize) -> bool {
        self.multiradial || self.vertically_symmetric.contains(&p)
    }

    pub fn with_vertical_symmetry(mut self, dims: &[usize]) -> Self {
        self.vertically_symmetric = dims.to_vec();
        self
    }

    /// `None` until [`ball_convexity_probe`] has been recorded.
    pub fn convex_ball(&self) -> Option<bool> {
        self.convex_ball
    }

    pub fn with_convex_ball(mut self, convex: bool) -> Self {
        self.convex_ball = Some(convex);
        self
    }

    pub fn extent(&self) -> BallExtent {
        self.extent
    }

    /// For a horizontal offset `h`, the interval `[-down, up]` of vertical
    /// coordinates `τ` with `‖(h, τ)‖ <= 1`. Only available for multiradial
    /// distances, whose norm is monotone in `|τ|`.
    pub fn vertical_reach(&self, h: &[f64]) -> Option<(f64, f64)> {
        if !self.multiradial {
            return None;
        }
        let r = linalg::norm(h);
        match &self.family {
            NormFamily::Koranyi { c } => {
                let r4 = r * r * r * r;
                let reach = if r4 <= 1.0 { ((1.0 - r4) / c).sqrt() } else { 0.0 };
                Some((reach, reach))
            }
            NormFamily::Dinf { eps } => {
                let reach = if r <= 1.0 { 1.0 / (eps * eps) } else { 0.0 };
                Some((reach, reach))
            }
            NormFamily::Custom { eval, .. } => {
                let up = bisect_reach(|t| eval(&Point::from_parts(h, t).unwrap()), self.extent.vertical);
                let down = bisect_reach(|t| eval(&Point::from_parts(h, -t).unwrap()), self.extent.vertical);
                Some((down, up))
            }
        }
    }
}

fn bisect_reach(norm_at: impl Fn(f64) -> f64, bound: f64) -> f64 {
    if norm_at(0.0) > 1.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, bound.max(1e-12));
    while norm_at(hi) <= 1.0 {
        hi *= 2.0;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if norm_at(mid) <= 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

fn gaussian_point(rng: &mut McRng, n: usize) -> Point {
    let c: Vec<f64> = (0..2 * n + 1).map(|_| StandardNormal.sample(rng)).collect();
    Point::new(&c).expect("finite gaussian sample")
}

/// Rescales `p` by a dilation onto the sphere `‖·‖ = r`.
pub fn to_sphere(d: &HomogeneousDistance, p: &Point, r: f64) -> Point {
    let nrm = d.norm(p);
    if nrm == 0.0 {
        return p.clone();
    }
    dilate_unchecked(r / nrm, p)
}

fn estimate_extent(d: &HomogeneousDistance, n: usize, seed: u64) -> BallExtent {
    let mut rng = stream_rng(seed, 0xE7);
    let mut h: f64 = 0.0;
    let mut t: f64 = 0.0;
    let mut record = |p: &Point| {
        h = h.max(linalg::norm(p.horizontal_part()));
        t = t.max(p.vertical_part().abs());
    };
    for i in 0..=2 * n {
        record(&to_sphere(d, &Point::basis(n, i), 1.0));
    }
    for _ in 0..20_000 {
        let p = gaussian_point(&mut rng, n);
        record(&to_sphere(d, &p, 1.0));
    }
    BallExtent { horizontal: 1.1 * h, vertical: 1.1 * t }
}

/// Sampled axiom defects of a distance.
#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub max_triangle_violation: f64,
    pub max_homogeneity_error: f64,
    pub max_symmetry_error: f64,
    pub samples: usize,
    pub passed: bool,
}

pub const VALIDATION_TOL: f64 = 1e-9;

fn sample_validation_point(d: &HomogeneousDistance, rng: &mut McRng, n: usize) -> Point {
    // Half the draws are uniform in the box |p_h| <= 10, |p_t| <= 100; the
    // rest lie on random spheres, where near-equality cases concentrate.
    if rng.gen_bool(0.5) {
        let mut c: Vec<f64> = (0..2 * n).map(|_| rng.gen_range(-10.0..10.0)).collect();
        c.push(rng.gen_range(-100.0..100.0));
        Point::new(&c).expect("finite sample")
    } else {
        let p = gaussian_point(rng, n);
        let r = rng.gen_range(1e-3..10.0);
        to_sphere(d, &p, r)
    }
}

fn triangle_slack(d: &HomogeneousDistance, x: &Point, y: &Point) -> f64 {
    let nx = d.norm(x);
    let ny = d.norm(y);
    let denom = nx + ny;
    if denom == 0.0 {
        return 0.0;
    }
    (d.norm(&(x * y)) - denom) / denom
}

/// Checks homogeneity, `‖x^{-1}‖ = ‖x‖` and the triangle inequality
/// `‖xy‖ <= ‖x‖ + ‖y‖` on seeded samples of `H^n` within homogeneous radius
/// 10. The worst sampled triangle pairs are then pushed further by a seeded
/// local search. All defects are relative.
pub fn validate_distance(d: &HomogeneousDistance, n: usize, n_samples: usize, seed: u64) -> ValidationReport {
    let mut rng = stream_rng(seed, 0x7A11);
    let mut tri: f64 = 0.0;
    let mut hom: f64 = 0.0;
    let mut sym: f64 = 0.0;
    const KEEP: usize = 16;
    let mut worst: Vec<(f64, Point, Point)> = Vec::with_capacity(KEEP + 1);
    for _ in 0..n_samples {
        let x = sample_validation_point(d, &mut rng, n);
        let y = sample_validation_point(d, &mut rng, n);
        let nx = d.norm(&x);
        if nx > 0.0 {
            let r = 10f64.powf(rng.gen_range(-2.0..2.0));
            hom = hom.max((d.norm(&dilate_unchecked(r, &x)) - r * nx).abs() / (r * nx));
            sym = sym.max((d.norm(&inverse(&x)) - nx).abs() / nx);
        }
        let s = triangle_slack(d, &x, &y);
        tri = tri.max(s);
        if worst.len() < KEEP || s > worst[worst.len() - 1].0 {
            worst.push((s, x, y));
            worst.sort_by(|a, b| b.0.total_cmp(&a.0));
            worst.truncate(KEEP);
        }
    }
    for (mut best, mut x, mut y) in worst {
        let mut step = 0.1;
        for _ in 0..400 {
            let jitter = |p: &Point, rng: &mut McRng| {
                let scale = d.norm(p).max(1e-6);
                let c: Vec<f64> = p
                    .coords()
                    .iter()
                    .enumerate()
                    .map(|(i, v)| {
                        let s = if i == p.dim() - 1 { scale * scale } else { scale };
                        v + step * s * rng.gen_range(-1.0..1.0)
                    })
                    .collect();
                Point::new(&c).expect("finite perturbation")
            };
            let nx = jitter(&x, &mut rng);
            let ny = jitter(&y, &mut rng);
            let s = triangle_slack(d, &nx, &ny);
            if s > best {
                best = s;
                x = nx;
                y = ny;
            } else {
                step *= 0.98;
            }
        }
        tri = tri.max(best);
    }
    let passed = tri <= VALIDATION_TOL && hom <= VALIDATION_TOL && sym <= VALIDATION_TOL;
    ValidationReport {
        max_triangle_violation: tri.max(0.0),
        max_homogeneity_error: hom,
        max_symmetry_error: sym,
        samples: n_samples,
        passed,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    Koranyi,
    Dinf,
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "koranyi" => Ok(Family::Koranyi),
            "dinf" => Ok(Family::Dinf),
            other => Err(Error::InvalidParameter(format!("unknown distance family `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationReport {
    pub family: Family,
    pub parameter: f64,
    pub passed: bool,
    /// Whether the parameter inflated by 5% fails validation (`d_∞` only).
    pub rejected_above: Option<bool>,
    pub report: ValidationReport,
}

pub const CALIBRATION_SAMPLES: usize = 100_000;

/// For `d_∞`, the largest `ε` in `[0.1, 2]` passing validation (bisection);
/// for Korányi, the outcome of validating `c = 16`.
pub fn calibrate_constant(family: &str, n: usize, seed: u64) -> Result<CalibrationReport> {
    let family: Family = family.parse()?;
    calibrate_family(family, n, CALIBRATION_SAMPLES, seed)
}

pub fn calibrate_family(family: Family, n: usize, samples: usize, seed: u64) -> Result<CalibrationReport> {
    match family {
        Family::Koranyi => {
            let report = validate_distance(&HomogeneousDistance::koranyi(16.0)?, n, samples, seed);
            Ok(CalibrationReport { family, parameter: 16.0, passed: report.passed, rejected_above: None, report })
        }
        Family::Dinf => {
            let check = |eps: f64| -> Result<ValidationReport> {
                Ok(validate_distance(&HomogeneousDistance::dinf(eps)?, n, samples, seed))
            };
            let (mut lo, mut hi) = (0.1, 2.0);
            let eps = if check(hi)?.passed {
                hi
            } else {
                if !check(lo)?.passed {
                    return Err(Error::InvalidDistance("d_inf fails validation at eps = 0.1".into()));
                }
                while hi - lo > 1e-3 {
                    let mid = 0.5 * (lo + hi);
                    if check(mid)?.passed {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                lo
            };
            let report = check(eps)?;
            let above = check(1.05 * eps)?;
            Ok(CalibrationReport {
                family,
                parameter: eps,
                passed: report.passed,
                rejected_above: Some(!above.passed),
                report,
            })
        }
    }
}

/// Uniform sample of the unit ball `B(0,1)` by rejection from its extent box.
pub fn sample_unit_ball(d: &HomogeneousDistance, n: usize, rng: &mut McRng) -> Point {
    let e = d.extent();
    loop {
        let mut c: Vec<f64> = (0..2 * n).map(|_| rng.gen_range(-e.horizontal..=e.horizontal)).collect();
        c.push(rng.gen_range(-e.vertical..=e.vertical));
        let p = Point::new(&c).expect("finite sample");
        if d.norm(&p) <= 1.0 {
            return p;
        }
    }
}

/// Tests convexity of `B(0,1)` on sampled pairs: every Euclidean midpoint
/// must stay in `B(0, 1 + 1e-9)`.
pub fn ball_convexity_probe(d: &HomogeneousDistance, n: usize, n_samples: usize, seed: u64) -> Result<bool> {
    if n_samples == 0 {
        return Err(Error::InvalidParameter("convexity probe needs at least one sample".into()));
    }
    let mut rng = stream_rng(seed, 0xC0);
    for _ in 0..n_samples {
        let a = sample_unit_ball(d, n, &mut rng);
        let b = sample_unit_ball(d, n, &mut rng);
        let mid: Vec<f64> = a.coords().iter().zip(b.coords()).map(|(x, y)| 0.5 * (x + y)).collect();
        if d.norm(&Point::new(&mid)?) > 1.0 + 1e-9 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Random element of `O(2n)` from the QR factorization of a Gaussian matrix.
pub fn random_orthogonal(dim: usize, rng: &mut McRng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(dim, dim, |_, _| StandardNormal.sample(rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..dim {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Largest relative change of the norm under random rotations of `H_1`.
pub fn multiradial_probe(d: &HomogeneousDistance, n: usize, n_samples: usize, seed: u64) -> f64 {
    let mut rng = stream_rng(seed, 0x40);
    let mut worst: f64 = 0.0;
    for _ in 0..n_samples {
        let rot = random_orthogonal(2 * n, &mut rng);
        let p = gaussian_point(&mut rng, n);
        let h = nalgebra::DVector::from_column_slice(p.horizontal_part());
        let rh = &rot * h;
        let q = Point::from_parts(rh.as_slice(), p.vertical_part()).expect("finite rotation");
        let np = d.norm(&p);
        if np > 0.0 {
            worst = worst.max((d.norm(&q) - np).abs() / np);
        }
    }
    worst
}

/// A closed ball `B(center, radius)`.
#[derive(Clone, Debug)]
pub struct BallQuery {
    pub center: Point,
    pub radius: f64,
    pub distance: HomogeneousDistance,
}

impl BallQuery {
    pub fn new(center: Point, radius: f64, distance: HomogeneousDistance) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidParameter(format!("ball radius must be positive, got {radius}")));
        }
        Ok(Self { center, radius, distance })
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.distance.dist(&self.center, p) <= self.radius
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::dilate;

    fn p(c: &[f64]) -> Point {
        Point::new(c).unwrap()
    }

    #[test]
    fn koranyi_examples() {
        assert!((koranyi_norm(&p(&[0., 0., 1.]), 16.0) - 2.0).abs() < 1e-15);
        for c in [1.0, 16.0, 100.0] {
            assert_eq!(koranyi_norm(&p(&[1., 0., 0.]), c), 1.0);
        }
        let q = p(&[0.3, -0.7, 1.9]);
        let lhs = koranyi_norm(&dilate(3.0, &q).unwrap(), 16.0);
        assert!((lhs - 3.0 * koranyi_norm(&q, 16.0)).abs() < 1e-12);
    }

    #[test]
    fn dinf_examples() {
        assert_eq!(dinf_norm(&p(&[0., 0., 4.]), 1.0), 2.0);
        assert_eq!(dinf_norm(&p(&[3., 0., 0.]), 1.0), 3.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(HomogeneousDistance::koranyi(0.0).is_err());
        assert!(HomogeneousDistance::dinf(-1.0).is_err());
        assert!("euclid".parse::<Family>().is_err());
        assert!(calibrate_constant("euclid", 1, 0).is_err());
    }

    #[test]
    fn validation_separates_good_and_bad_constants() {
        let good = validate_distance(&HomogeneousDistance::koranyi(16.0).unwrap(), 1, 20_000, 1);
        assert!(good.passed, "{good:?}");
        let bad = validate_distance(&HomogeneousDistance::koranyi(1e6).unwrap(), 1, 20_000, 1);
        assert!(!bad.passed);
        assert!(bad.max_triangle_violation > 0.0);
    }

    #[test]
    fn dinf_threshold_is_two() {
        let r = calibrate_family(Family::Dinf, 1, 20_000, 4).unwrap();
        assert_eq!(r.parameter, 2.0);
        assert_eq!(r.rejected_above, Some(true));
    }

    #[test]
    fn vertical_reach_matches_norm() {
        let d = HomogeneousDistance::koranyi(16.0).unwrap();
        let h = [0.5, 0.2];
        let (down, up) = d.vertical_reach(&h).unwrap();
        assert!((d.norm(&p(&[0.5, 0.2, up])) - 1.0).abs() < 1e-12);
        assert!((d.norm(&p(&[0.5, 0.2, -down])) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn custom_distance_is_validated() {
        let c = 16.0;
        let good: NormFn = Arc::new(move |q: &Point| koranyi_norm(q, c));
        let d = HomogeneousDistance::custom("kor16", good, true, 1, 5).unwrap();
        assert!((d.extent().vertical - 0.25 * 1.1).abs() < 1e-3);
        let (down, up) = d.vertical_reach(&[0.5, 0.0]).unwrap();
        let exact = ((1.0 - 0.0625) / 16.0f64).sqrt();
        assert!((up - exact).abs() < 1e-9 && (down - exact).abs() < 1e-9);

        // Euclidean norm is not homogeneous for intrinsic dilations
        let bad: NormFn = Arc::new(|q: &Point| q.euclidean_norm());
        assert!(matches!(
            HomogeneousDistance::custom("euclid", bad, false, 1, 5),
            Err(Error::InvalidDistance(_))
        ));
    }

    #[test]
    fn convexity_probe() {
        let d = HomogeneousDistance::koranyi(16.0).unwrap();
        assert!(ball_convexity_probe(&d, 1, 2_000, 3).unwrap());
        assert!(ball_convexity_probe(&d, 1, 0, 3).is_err());
        // the gauge |h| + sqrt|t| is not a distance, but its unit ball is a
        // convenient non-convex shape for the probe
        let star: NormFn = Arc::new(|q: &Point| linalg::norm(q.horizontal_part()) + q.vertical_part().abs().sqrt());
        let mut d = HomogeneousDistance {
            family: NormFamily::Custom { name: "star".into(), eval: star },
            multiradial: true,
            vertically_symmetric: Vec::new(),
            convex_ball: None,
            extent: BallExtent { horizontal: f64::NAN, vertical: f64::NAN },
        };
        d.extent = estimate_extent(&d, 1, 2);
        assert!(!ball_convexity_probe(&d, 1, 2_000, 3).unwrap());
    }

    #[test]
    fn builtins_are_multiradial() {
        for d in [HomogeneousDistance::koranyi(16.0).unwrap(), HomogeneousDistance::dinf(1.0).unwrap()] {
            assert!(multiradial_probe(&d, 2, 500, 9) <= 1e-10);
        }
    }

    #[test]
    fn ball_query() {
        let d = HomogeneousDistance::koranyi(16.0).unwrap();
        let b = BallQuery::new(p(&[1., 0., 0.]), 0.5, d.clone()).unwrap();
        assert!(b.contains(&p(&[1.2, 0., 0.])));
        assert!(!b.contains(&p(&[0., 0., 0.])));
        assert!(BallQuery::new(p(&[0., 0., 0.]), 0.0, d).is_err());
    }
}
