use heis_area::calculus::DefiningFunction;
use heis_area::graph::{area_integrand, intrinsic_differential, intrinsic_jacobian, SurfaceModel, WBox};
use heis_area::measure::{
    density_ratio_times_cone, verify_blowup_suite, Budget, NegativeControl, Schedule,
};
use heis_area::metric::HomogeneousDistance;
use heis_area::split::Split;
use heis_area::surfaces::Shipped;
use proptest::prelude::*;

#[test]
fn wrong_plane_control_fails() {
    let m = Shipped::Tilted.model().unwrap();
    let x = Shipped::Tilted.points().unwrap().remove(0);
    let d = HomogeneousDistance::koranyi(16.0).unwrap();
    let sched = Schedule { t0: 0.1, gamma: 0.5, rungs: 2 };
    let control = NegativeControl::WrongPlane(vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]);
    let r = verify_blowup_suite(&m, std::slice::from_ref(&x), &d, &sched, &Budget::low(), 1, Some(&control)).unwrap();
    assert!(!r.passed);
    // π against roughly 0.874
    assert!(r.rows[0].theta_gap > 0.5, "{:?}", r.rows[0].theta_gap);
}

fn model(n: usize, a: f64, b: f64, c: f64) -> SurfaceModel {
    let src = if n == 1 {
        format!("x1 + {a}*x2^2 + {b}*x3 + {c}*x1*x2")
    } else {
        format!("x1 + {a}*x4^2 + {b}*x5 + {c}*x2*x3")
    };
    let f = DefiningFunction::from_exprs(n, &[src]).unwrap();
    let dim = 2 * n;
    SurfaceModel::new(f, Split::coordinate(n, 1).unwrap(), vec![0.0], WBox::new(vec![0.0; dim], vec![0.5; dim]).unwrap())
        .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn density_identities_on_random_surfaces(
        n in 1usize..=2,
        a in -0.5f64..0.5, b in -0.5f64..0.5, c in -0.5f64..0.5,
        w in proptest::collection::vec(-0.4f64..0.4, 4),
    ) {
        let m = model(n, a, b, c);
        let wp = m.split().w().point(&w[..2 * n]).unwrap();
        let x = m.graph_map(&wp).unwrap();
        prop_assert!((density_ratio_times_cone(&m, &x).unwrap() - 1.0).abs() < 1e-6);
        let j = intrinsic_jacobian(&intrinsic_differential(&m, &x).unwrap());
        prop_assert!((area_integrand(&m, &x).unwrap() - j).abs() < 1e-6);
    }

    #[test]
    fn graph_points_lie_on_the_level_set(
        a in -0.5f64..0.5, b in -0.5f64..0.5, c in -0.5f64..0.5,
        w in proptest::collection::vec(-0.5f64..0.5, 2),
    ) {
        let m = model(1, a, b, c);
        let x = m.graph_map(&m.split().w().point(&w).unwrap()).unwrap();
        prop_assert!(m.residual(&x).unwrap()[0].abs() <= 1e-10);
        let back = m.split().w().coords(&m.split().pi_w(&x));
        prop_assert!(back.iter().zip(&w).all(|(p, q)| (p - q).abs() < 1e-12));
    }
}
