//! End-to-end acceptance run: one PASS/FAIL line per criterion, each with
//! its runtime limit. Criteria run sequentially so the timings are honest.
//! Set `ACCEPTANCE_ONLY=3,7` to run a subset.

use std::io::Write;
use std::time::{Duration, Instant};

use heis_area::calculus::DefiningFunction;
use heis_area::expr::parse;
use heis_area::graph::{
    area_integrand, intrinsic_differential, intrinsic_jacobian, verify_chain_rule, SurfaceModel, VerifyOptions, WBox,
    CHAIN_RULE_SCALES,
};
use heis_area::group::{dilate, extend_heisenberg_basis, inverse, product, Point};
use heis_area::mc::{self, McRng};
use heis_area::measure::{
    ambient_box_measure, density_ratio, density_ratio_times_cone, spherical_factor, verify_blowup_suite, Budget,
    Schedule,
};
use heis_area::metric::{ball_convexity_probe, calibrate_constant, validate_distance, HomogeneousDistance};
use heis_area::split::{
    random_horizontal_subgroup, random_vertical_complement, restricted_projection_ratio, verify_projection_lemma,
    CoordBox, HorizontalSubgroup, Split, VerticalSubgroup,
};
use heis_area::surfaces::Shipped;
use rand::Rng;

const SEED: u64 = 20_240_611;

struct Outcome {
    passed: bool,
    detail: String,
}

fn kor() -> HomogeneousDistance {
    HomogeneousDistance::koranyi(16.0).unwrap()
}

fn random_point(n: usize, rng: &mut McRng) -> Point {
    let c: Vec<f64> = (0..2 * n + 1).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Point::new(&c).unwrap()
}

/// `∫_{-1}^{1} sqrt(1 - y^4) dy / 2` by Simpson after `y = 1 - s^2`.
fn section_oracle() -> f64 {
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

fn group_algebra() -> Outcome {
    let mut rng = mc::stream_rng(SEED, 1);
    let mut worst = 0.0f64;
    for i in 0..10_000 {
        let n = 1 + i % 3;
        let (p, q, r) = (random_point(n, &mut rng), random_point(n, &mut rng), random_point(n, &mut rng));
        let t = rng.gen_range(0.1..3.0);
        let lhs = product(&product(&p, &q).unwrap(), &r).unwrap();
        let rhs = product(&p, &product(&q, &r).unwrap()).unwrap();
        worst = worst.max(lhs.max_abs_diff(&rhs));
        worst = worst.max(product(&p, &inverse(&p)).unwrap().max_abs_diff(&Point::origin(n)));
        let dl = dilate(t, &product(&p, &q).unwrap()).unwrap();
        let dr = product(&dilate(t, &p).unwrap(), &dilate(t, &q).unwrap()).unwrap();
        worst = worst.max(dl.max_abs_diff(&dr) / t.max(1.0).powi(2));
    }
    let mut basis_defect = 0.0f64;
    for i in 0..200 {
        let n = 1 + i % 3;
        let k = 1 + (i / 3) % n;
        let v = random_horizontal_subgroup(n, k, &mut rng).unwrap();
        let family: Vec<Point> = v.basis().iter().map(|b| Point::from_parts(b, 0.0).unwrap()).collect();
        let (a, b) = extend_heisenberg_basis(&family).unwrap().defects();
        basis_defect = basis_defect.max(a).max(b);
    }
    Outcome {
        passed: worst <= 1e-12 && basis_defect <= 1e-12,
        detail: format!("max group defect {worst:.2e}, basis defect {basis_defect:.2e}"),
    }
}

fn distance_axioms() -> Outcome {
    let k = kor();
    let rk = validate_distance(&k, 1, 100_000, SEED);
    let cal = calibrate_constant("dinf", 1, SEED).unwrap();
    let dinf = HomogeneousDistance::dinf(cal.parameter).unwrap();
    let rd = validate_distance(&dinf, 1, 100_000, SEED + 1);
    let convex = ball_convexity_probe(&k, 1, 20_000, SEED).unwrap();
    let ok = |r: &heis_area::metric::ValidationReport| r.max_homogeneity_error <= 1e-12 && r.max_triangle_violation <= 1e-9;
    Outcome {
        passed: ok(&rk) && ok(&rd) && cal.passed && convex,
        detail: format!(
            "koranyi hom {:.1e} tri {:.1e}; dinf eps* = {} hom {:.1e} tri {:.1e}; koranyi ball convex {convex}",
            rk.max_homogeneity_error,
            rk.max_triangle_violation,
            cal.parameter,
            rd.max_homogeneity_error,
            rd.max_triangle_violation
        ),
    }
}

fn projection_lemma() -> Outcome {
    let mut rng = mc::stream_rng(SEED, 3);
    let mut worst = 0.0f64;
    let mut all = true;
    for i in 0..20 {
        let n = 1 + i % 2;
        let v = random_horizontal_subgroup(n, 1, &mut rng).unwrap();
        let m = random_vertical_complement(&v, 1.0, &mut rng).unwrap();
        let w = random_vertical_complement(&v, 1.0, &mut rng).unwrap();
        let b = CoordBox::unit(m.dim());
        let r = verify_projection_lemma(&v, &m, &w, &b, 200_000, mc::derive_seed(SEED, i as u64)).unwrap();
        worst = worst.max(r.jacobian_rel_error).max(r.indicator_rel_error);
        all &= r.passed;
    }
    // hand case: M tilted by a = 1 towards V = span{e_1}
    let v = HorizontalSubgroup::coordinate(1, 1).unwrap();
    let s2 = std::f64::consts::FRAC_1_SQRT_2;
    let m = VerticalSubgroup::new(1, vec![vec![s2, s2]]).unwrap();
    let w = VerticalSubgroup::coordinate(1, 1).unwrap();
    let ratio = restricted_projection_ratio(&v, &m, &w).unwrap();
    let hand = verify_projection_lemma(&v, &m, &w, &CoordBox::unit(2), 200_000, SEED).unwrap();
    let hand_err = (hand.indicator_estimate.value / s2 - 1.0).abs().max((hand.jacobian_estimate.value / s2 - 1.0).abs());
    Outcome {
        passed: all && (ratio - s2).abs() < 1e-12 && hand_err <= 0.02,
        detail: format!("worst relative error {worst:.3e} over 20 triples; hand ratio {ratio:.6}, MC error {hand_err:.3e}"),
    }
}

fn chain_rule() -> Outcome {
    // a smooth probe composed with the graph map, besides f itself
    let probe = parse("x1 + x2*x3 + x3^2", 1).unwrap();
    let mut passed = true;
    let mut parts = Vec::new();
    for s in Shipped::ALL {
        let m = s.model().unwrap();
        let w = m.split().w();
        for c in [[0.0, 0.5], [0.3, 1.0]] {
            let xw = w.point(&c).unwrap();
            let opts = VerifyOptions { seed: SEED, ..VerifyOptions::default() };
            let r = verify_chain_rule(&m, &xw, &CHAIN_RULE_SCALES, &opts).unwrap();
            let bad = VerifyOptions { dphi_perturbation: 0.1, ..opts.clone() };
            let neg = verify_chain_rule(&m, &xw, &CHAIN_RULE_SCALES, &bad).unwrap();
            let with_probe = VerifyOptions { probe: Some(&probe), ..opts.clone() };
            let g = verify_chain_rule(&m, &xw, &CHAIN_RULE_SCALES, &with_probe).unwrap();
            let last = r.ratios.last().unwrap().max(*g.ratios.last().unwrap());
            passed &= r.passed && g.passed && last < 1e-2 && r.kernel_defect <= 1e-8 && !neg.passed;
            parts.push(format!("{}: r = {last:.1e}, defect {:.1e}, control fails {}", s.name(), r.kernel_defect, !neg.passed));
        }
    }
    Outcome { passed, detail: parts.join("; ") }
}

fn surface_samples(m: &SurfaceModel, count: usize, seed: u64) -> Vec<Point> {
    let mut rng = mc::stream_rng(seed, 0);
    let dom = m.domain();
    (0..count)
        .map(|_| {
            let c: Vec<f64> =
                dom.center().iter().zip(dom.half()).map(|(c, h)| c + 0.9 * h * rng.gen_range(-1.0..1.0)).collect();
            m.graph_map(&m.split().w().point(&c).unwrap()).unwrap()
        })
        .collect()
}

fn claim_two() -> Outcome {
    let mut worst = 0.0f64;
    for s in Shipped::ALL {
        let m = s.model().unwrap();
        for x in surface_samples(&m, 100, SEED) {
            worst = worst.max((density_ratio_times_cone(&m, &x).unwrap() - 1.0).abs());
        }
    }
    let m = Shipped::Tilted.model().unwrap();
    let x = Point::new(&[-1.0, 0.0, 1.0]).unwrap();
    let hand = density_ratio(&m, &x).unwrap();
    let hand_ok = (hand - 5f64.sqrt() / 2.0).abs() <= 1e-6 && (density_ratio_times_cone(&m, &x).unwrap() - 1.0).abs() <= 1e-6;
    Outcome {
        passed: worst <= 1e-6 && hand_ok,
        detail: format!("max |ratio·‖V∧N_x‖ − 1| = {worst:.2e} over 200 points; J_H/J_V at (−1,0,1) = {hand:.8}"),
    }
}

fn integrand_identity() -> Outcome {
    let mut worst = 0.0f64;
    for s in Shipped::ALL {
        let m = s.model().unwrap();
        assert!(m.split().is_orthogonal());
        for x in surface_samples(&m, 100, SEED + 6) {
            let a = area_integrand(&m, &x).unwrap();
            let j = intrinsic_jacobian(&intrinsic_differential(&m, &x).unwrap());
            worst = worst.max((a - j).abs());
        }
    }
    let m = Shipped::Tilted.model().unwrap();
    let x = Point::new(&[-1.0, 0.0, 1.0]).unwrap();
    let hand = area_integrand(&m, &x).unwrap();
    let hand_j = intrinsic_jacobian(&intrinsic_differential(&m, &x).unwrap());
    let target = 5f64.sqrt() / 2.0;
    Outcome {
        passed: worst <= 1e-6 && (hand - target).abs() <= 1e-6 && (hand_j - target).abs() <= 1e-6,
        detail: format!("max |integrand − J^φφ| = {worst:.2e}; at (−1,0,1): {hand:.6} and {hand_j:.6}"),
    }
}

fn spherical_factors() -> Outcome {
    let budget = Budget::default();
    let d = kor().with_convex_ball(true);
    let oracle = section_oracle();
    let pi = VerticalSubgroup::coordinate(1, 1).unwrap();
    let sf = spherical_factor(&pi, &d, &budget, SEED).unwrap();
    let shortcut = (sf.value.value / sf.at_origin.value - 1.0).abs();
    let vs_oracle = (sf.value.value / oracle - 1.0).abs();
    let mut rng = mc::stream_rng(SEED, 7);
    let mut spreads = Vec::new();
    for n in [1, 2] {
        let values: Vec<f64> = (0..10)
            .map(|i| {
                let v = random_horizontal_subgroup(n, 1, &mut rng).unwrap();
                let w = VerticalSubgroup::orthogonal_to(&v).unwrap();
                spherical_factor(&w, &d, &budget, mc::derive_seed(SEED, 100 * n as u64 + i)).unwrap().value.value
            })
            .collect();
        let hi = values.iter().cloned().fold(f64::MIN, f64::max);
        let lo = values.iter().cloned().fold(f64::MAX, f64::min);
        spreads.push((hi - lo) / lo);
    }
    let spread = spreads.iter().cloned().fold(0.0, f64::max);
    Outcome {
        passed: shortcut <= 0.01 && vs_oracle <= 0.01 && spread <= 0.02,
        detail: format!(
            "β = {:.5} (oracle {oracle:.5}, error {vs_oracle:.2e}); β vs area at 0 {shortcut:.2e}; spread H^1 {:.2e}, H^2 {:.2e}",
            sf.value.value, spreads[0], spreads[1]
        ),
    }
}

fn blowup() -> Outcome {
    let d = kor().with_convex_ball(true);
    let mut passed = true;
    let mut parts = Vec::new();
    for (i, s) in Shipped::ALL.into_iter().enumerate() {
        let m = s.model().unwrap();
        let pts = s.points().unwrap();
        let r = verify_blowup_suite(&m, &pts, &d, &Schedule::default(), &Budget::default(), mc::derive_seed(SEED, i as u64), None)
            .unwrap();
        passed &= r.passed;
        for row in &r.rows {
            let _ = writeln!(
                std::io::stderr(),
                "  {} x={:?}: θ {:.4} β {:.4} Θ* {:.4} H {:.4} converged {}/{}",
                s.name(),
                row.x.coords(),
                row.theta.limit.value,
                row.beta.value,
                row.upper.limit.value,
                row.h_tan.value,
                row.theta.converged,
                row.upper.converged
            );
        }
        let worst = r
            .rows
            .iter()
            .map(|row| row.theta_gap.max(row.upper_gap).max(row.coincidence_gap.unwrap_or(0.0)))
            .fold(0.0, f64::max);
        parts.push(format!("{}: worst gap {worst:.3e}", s.name()));
    }
    Outcome { passed, detail: parts.join("; ") }
}

fn area_invariance() -> Outcome {
    let d = kor();
    let omega = spherical_factor(&VerticalSubgroup::coordinate(1, 1).unwrap(), &d, &Budget::default(), SEED).unwrap().value.value;
    let b = CoordBox::symmetric(&[0.5, 0.5, 0.5]).unwrap();
    let s2 = std::f64::consts::FRAC_1_SQRT_2;
    let tilted = Split::new(
        VerticalSubgroup::new(1, vec![vec![-s2, s2]]).unwrap(),
        HorizontalSubgroup::new(1, vec![vec![s2, s2]]).unwrap(),
    )
    .unwrap();
    let splits = [(Split::coordinate(1, 1).unwrap(), [0.6, 0.8]), (tilted, [0.85, 0.95])];
    let mut values = Vec::new();
    for (si, (split, half)) in splits.iter().enumerate() {
        for (fi, src) in ["x1 + x3", "(x1 + x3)*(1 + x2^2)"].iter().enumerate() {
            let f = DefiningFunction::from_exprs(1, &[src]).unwrap();
            let dom = WBox::new(vec![0.0, 0.0], half.to_vec()).unwrap();
            let m = SurfaceModel::new(f, split.clone(), vec![0.0], dom).unwrap();
            let e = ambient_box_measure(&m, &b, 400_000, mc::derive_seed(SEED, (2 * si + fi) as u64)).unwrap();
            values.push(e.value / omega);
        }
    }
    let hi = values.iter().cloned().fold(f64::MIN, f64::max);
    let lo = values.iter().cloned().fold(f64::MAX, f64::min);
    let spread = (hi - lo) / lo;
    Outcome {
        passed: spread <= 0.03,
        detail: format!("μ(B)/ω_d over 2 functions × 2 splits: {values:.4?}, spread {spread:.2e}"),
    }
}

#[test]
fn acceptance() {
    let only: Option<Vec<usize>> =
        std::env::var("ACCEPTANCE_ONLY").ok().map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    type Criterion = (usize, &'static str, u64, fn() -> Outcome);
    let criteria: [Criterion; 9] = [
        (1, "group and basis algebra", 5, group_algebra),
        (2, "distance axioms", 30, distance_axioms),
        (3, "projection Jacobian", 120, projection_lemma),
        (4, "chain rule", 30, chain_rule),
        (5, "density ratio identity", 10, claim_two),
        (6, "integrand identity", 10, integrand_identity),
        (7, "spherical factor", 180, spherical_factors),
        (8, "blow-up densities", 600, blowup),
        (9, "area invariance", 180, area_invariance),
    ];
    let mut failed = Vec::new();
    for (id, name, limit, run) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let out = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(limit);
        let ok = out.passed && in_time;
        // written to the handle directly so the line survives output capture
        let _ = writeln!(
            std::io::stderr(),
            "{} criterion {id} ({name}): {} [{:.1} s, limit {limit} s]",
            if ok { "PASS" } else { "FAIL" },
            out.detail,
            elapsed.as_secs_f64()
        );
        if !ok {
            failed.push(id);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
