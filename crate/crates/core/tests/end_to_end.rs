use geoaccel::axgd::{self, SolverParams};
use geoaccel::baselines::{reference_optimum, rgd_run, RgdParams};
use geoaccel::geodesic_map::MapFrame;
use geoaccel::manifold::{distance, AmbientPoint, CurvatureClass, Geometry};
use geoaccel::objectives::{FrechetObjective, ManifoldObjective, MappedObjective};
use geoaccel::reductions::{solve_gconvex_via_sc, solve_strongly_gconvex};
use geoaccel::sampling;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn frechet(g: Geometry, d: usize, r: f64, n: usize, seed: u64) -> (AmbientPoint, FrechetObjective) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = AmbientPoint::pole(d, CurvatureClass::unit(g));
    let reach = match g {
        Geometry::Hyperbolic => 0.9 * r,
        Geometry::Spherical => (0.9 * r).min(0.95 * (std::f64::consts::FRAC_PI_2 - r)),
    };
    let anchors: Vec<_> = (0..n)
        .map(|_| {
            let dist = reach * rng.random::<f64>();
            sampling::point_at_distance(&mut rng, &c, dist)
        })
        .collect();
    let weights = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
    (c.clone(), FrechetObjective::new(anchors, weights, &c, r).unwrap())
}

fn run_axgd(f: &FrechetObjective, c: &AmbientPoint, r: f64, eps: f64) -> (AmbientPoint, usize) {
    let frame = MapFrame::new(c, r).unwrap();
    let consts = frame.deformation_constants(f.smoothness()).unwrap();
    let params = SolverParams::auto(&consts, frame.r_tilde(), eps).unwrap();
    let mapped = MappedObjective::new(f, frame);
    let out = axgd::run(&mapped, &params, &mapped.frame().origin(), &mut |_| {}).unwrap();
    (mapped.frame().from_ball(&out.point).unwrap(), out.grad_evals)
}

#[test]
fn single_anchor_hyperbolic_instance() {
    let c = AmbientPoint::pole(2, CurvatureClass::hyperbolic());
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let anchor = sampling::point_at_distance(&mut rng, &c, 0.7);
    let f = FrechetObjective::uniform(vec![anchor.clone()], &c, 1.0).unwrap();
    let (x, _) = run_axgd(&f, &c, 1.0, 1e-4);
    assert!(f.value(&x) <= 1e-4);
    // F = d^2 / 2 here, so the gap bounds the distance
    assert!(distance(&x, &anchor) <= (2e-4f64).sqrt());
}

#[test]
fn all_solvers_agree_on_the_sphere() {
    // the regularizer needs a ball of diameter below pi/2
    let r = 0.7;
    let (c, f) = frechet(Geometry::Spherical, 4, r, 6, 5);
    let (x_star, f_star) = reference_optimum(&f, &c, r).unwrap();
    let eps = 1e-6;
    let (xa, _) = run_axgd(&f, &c, r, eps);
    let sc = solve_strongly_gconvex(&f, &c, r, eps, true, &mut |_| {}).unwrap();
    let gc = solve_gconvex_via_sc(&f, &c, r, None, eps, true, &mut |_| {}).unwrap();
    let rgd = rgd_run(&f, &c, r, &RgdParams::for_objective(&f, 100_000, 1e-10), &mut |_| {}).unwrap();
    for (name, x) in [("axgd", &xa), ("restart", &sc.point), ("reduce", &gc.point), ("rgd", &rgd.point)] {
        let gap = f.value(x) - f_star;
        assert!(gap <= eps, "{name}: {gap}");
        // strong convexity turns the gap into a distance bound
        let bound = (2.0 * (gap.max(0.0) + 1e-12) / f.strong_convexity()).sqrt();
        assert!(distance(x, &x_star) <= bound + 1e-6, "{name}");
    }
}

#[test]
fn acceleration_beats_gradient_descent_on_ill_conditioned_instances() {
    let (c, f) = frechet(Geometry::Hyperbolic, 2, 1.0, 5, 9);
    let mu = f.strong_convexity();
    let loose = geoaccel::objectives::WithModuli::new(&f, 1000.0 * mu, mu).unwrap();
    let (_, f_star) = reference_optimum(&f, &c, 1.0).unwrap();
    let eps = 1e-6;
    let sc = solve_strongly_gconvex(&loose, &c, 1.0, eps, true, &mut |_| {}).unwrap();
    let params = RgdParams {
        stop_below: Some(f_star + eps),
        ..RgdParams::for_objective(&loose, 10_000_000, 0.0)
    };
    let gd = rgd_run(&loose, &c, 1.0, &params, &mut |_| {}).unwrap();
    assert!(sc.value - f_star <= eps && gd.value - f_star <= eps);
    assert!(sc.grad_evals < gd.grad_evals, "{} vs {}", sc.grad_evals, gd.grad_evals);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn restart_meets_its_accuracy(seed in 0u64..10_000, n in 1usize..6, hyperbolic in any::<bool>(), r in 0.3f64..1.2) {
        let g = if hyperbolic { Geometry::Hyperbolic } else { Geometry::Spherical };
        let (c, f) = frechet(g, 3, r, n, seed);
        let (_, f_star) = reference_optimum(&f, &c, r).unwrap();
        let out = solve_strongly_gconvex(&f, &c, r, 1e-7, true, &mut |_| {}).unwrap();
        prop_assert!(out.value - f_star <= 1e-7);
        prop_assert!(distance(&out.point, &c) <= r + 1e-9);
    }
}
