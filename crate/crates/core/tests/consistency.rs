use hardy_lab::experiments::{
    ball_threshold_grid, default_probe_radii, density_demo, totally_unbounded_witness, verify_lemma_2_2, verify_lemma_4_2,
};
use hardy_lab::functions::{parse_holomorphic, HoloFn, SingularFunctionSpec};
use hardy_lab::geometry::{parse_domain, Domain};
use hardy_lab::norms::{
    classify, hardy_seminorm, intersection_metric, level_integral, membership_verdict, power_kernel_boundary_norm,
    scan, ApproachGrid, IntersectionMetricSpec, Membership, NormConfig, SpaceSpec, SurfaceSpec,
};
use hardy_lab::numerics::sphere_area;
use hardy_lab::quadrature::{level_set_sampler, LevelMethod};
use hardy_lab::vector::ComplexVector;
use hardy_lab::Complex64;

fn e1() -> ComplexVector {
    ComplexVector::basis(2, 0)
}

#[test]
fn constant_norm_is_the_sphere_area_root() {
    let cfg = NormConfig::default();
    let c = Complex64::new(3.0, -4.0);
    let f = HoloFn::constant(c);
    for p in [1.0, 2.0, 3.5] {
        let v = hardy_seminorm(&f, p, &ApproachGrid::default_monte_carlo(), &SurfaceSpec::Sphere { n: 2 }, &cfg).unwrap();
        let expected = 5.0 * sphere_area(2).powf(1.0 / p);
        assert!((v - expected).abs() <= 1e-12 * expected, "p {p}: {v} vs {expected}");
    }
}

#[test]
fn boundary_norm_of_the_power_kernel_matches_deep_scans() {
    let cfg = NormConfig::default();
    let f = HoloFn::singular(SingularFunctionSpec::power(e1(), 1.5).unwrap()).unwrap();
    for p in [1.0, 1.1] {
        let s = scan(&f, p, &ApproachGrid::default_zonal(), &SurfaceSpec::Sphere { n: 2 }, &cfg);
        assert!(s.failure.is_none(), "{:?}", s.failure);
        let deep = s.sup_root().0;
        let exact = power_kernel_boundary_norm(2, 1.5, p).unwrap();
        // the gap closes like (1 - r)^{2 - 4p/3}
        assert!(deep <= exact * (1.0 + 1e-9), "p {p}: {deep} above {exact}");
        assert!((exact - deep) <= 1e-3 * exact, "p {p}: {deep} vs {exact}");
    }
    assert!(power_kernel_boundary_norm(2, 1.5, 1.5).is_err());
}

#[test]
fn level_methods_agree_on_surface_area() {
    let d = Domain::ellipsoid(vec![1.0, 2.0]).unwrap();
    for eps in [0.2, 0.1, 0.05] {
        let one = |_: &[Complex64]| Ok(1.0);
        let a = level_set_sampler(&d, eps, LevelMethod::Parametrized, 100_000, 7).unwrap().integrate(&one).unwrap();
        let b = level_set_sampler(&d, eps, LevelMethod::ThinShell, 100_000, 7).unwrap().integrate(&one).unwrap();
        let z = (a.value - b.value).abs() / a.stderr.hypot(b.stderr);
        assert!(z <= 3.0, "eps {eps}: {} vs {} (z = {z})", a.value, b.value);
    }
}

#[test]
fn ball_levels_agree_between_zonal_and_sampled_paths() {
    let ball = Domain::unit_ball(2).unwrap();
    let f = HoloFn::singular(SingularFunctionSpec::levi_reciprocal(ball.clone(), e1()).unwrap()).unwrap();
    let zonal = NormConfig::default();
    let sampled = NormConfig { prefer_zonal: false, ..NormConfig::default() };
    for eps in [0.2, 0.05, 0.0125] {
        let a = level_integral(&f, 1.5, eps, &ball, LevelMethod::Parametrized, None, &zonal, 7).unwrap();
        let b = level_integral(&f, 1.5, eps, &ball, LevelMethod::Parametrized, None, &sampled, 7).unwrap();
        let z = (a.value - b.value).abs() / a.stderr.hypot(b.stderr);
        assert!(z <= 3.0, "eps {eps}: {} vs {} (z = {z})", a.value, b.value);
    }
}

#[test]
fn ball_as_ellipsoid_matches_the_cauchy_verdicts() {
    let cfg = NormConfig::default();
    let ball = parse_domain("ellipsoid:a=1,1").unwrap();
    let thresholds = verify_lemma_2_2(2, &e1(), 1.5, &cfg).unwrap();
    let levi = HoloFn::singular(SingularFunctionSpec::levi_reciprocal(ball.clone(), e1()).unwrap()).unwrap();
    let space = SpaceSpec::DomainHp { domain: ball.clone(), method: LevelMethod::Parametrized };
    for (label, p) in [("cauchy p=1.5", 1.5), ("cauchy p=2", 2.0), ("cauchy p=2.5", 2.5)] {
        let expected = thresholds.case(label).unwrap().membership;
        let got = membership_verdict(&levi, p, &space, &ApproachGrid::default_level(), &cfg).status;
        assert_eq!(got, expected, "{label}");
    }
    let report = verify_lemma_4_2(&ball, &e1(), &cfg).unwrap();
    assert!(report.pass());
    let critical = report.measurement("critical exponent").unwrap();
    assert!((1.9..=2.1).contains(&critical), "critical exponent {critical}");
}

#[test]
fn witnesses_reverify_by_direct_evaluation() {
    let ball = Domain::unit_ball(2).unwrap();
    let targets = hardy_lab::geometry::boundary_dense_sequence(&ball, 6, 3).unwrap();
    let f = targets.iter().fold(HoloFn::zero(), |acc, w| {
        acc.add(&HoloFn::singular(SingularFunctionSpec::power(w.clone(), 1.5).unwrap()).unwrap())
    });
    let report = totally_unbounded_witness(&f, &targets, 1e3, &default_probe_radii()).unwrap();
    assert!(report.all_found());
    for e in &report.entries {
        let probe = e.probe.as_ref().unwrap();
        assert!(ball.contains(&probe.z));
        assert!(f.eval(&probe.z).unwrap().norm() > 1e3);
        assert!(probe.z.distance(&e.target) < 1e-2);
    }
}

/// `d(g + phi / k, g)` along `k = 1, 64, 4096` for the Cauchy kernel, which lies
/// in every `H^p` with `p < 2`.
fn shrinking_distances(spec: &IntersectionMetricSpec) -> Vec<f64> {
    let cfg = NormConfig::default();
    let g = parse_holomorphic("poly:z1^2+3").unwrap();
    let phi = HoloFn::singular(SingularFunctionSpec::cauchy(e1()).unwrap()).unwrap();
    [1.0, 64.0, 4096.0]
        .iter()
        .map(|&k| {
            let f = g.add(&phi.scale(Complex64::new(1.0 / k, 0.0)));
            let m = intersection_metric(&f, &g, spec, &ball_threshold_grid(), &SurfaceSpec::Sphere { n: 2 }, &cfg)
                .unwrap();
            assert_eq!(m.unresolved, 0);
            m.value
        })
        .collect()
}

#[test]
fn metric_convergence_does_not_depend_on_the_exponents() {
    let standard = IntersectionMetricSpec::standard(Some(1.5), 8).unwrap();
    let other = IntersectionMetricSpec::custom(Some(1.5), (1..=8).map(|j| 1.5 - 0.5 / 3f64.powi(j)).collect()).unwrap();
    for spec in [standard, other] {
        let d = shrinking_distances(&spec);
        assert!(d.windows(2).all(|w| w[1] < w[0]), "{d:?}");
        assert!(d[2] < 0.005, "{d:?}");
    }
}

#[test]
fn metric_terms_are_linear_in_the_perturbation() {
    let cfg = NormConfig::default();
    let spec = IntersectionMetricSpec::standard(Some(1.5), 6).unwrap();
    let g = HoloFn::zero();
    let phi = HoloFn::singular(SingularFunctionSpec::cauchy(e1()).unwrap()).unwrap();
    let grid = ApproachGrid::default_zonal();
    let sphere = SurfaceSpec::Sphere { n: 2 };
    let one = intersection_metric(&phi, &g, &spec, &grid, &sphere, &cfg).unwrap();
    let tenth = intersection_metric(&phi.scale(Complex64::new(0.0, 0.1)), &g, &spec, &grid, &sphere, &cfg).unwrap();
    for (a, b) in one.terms.iter().zip(&tenth.terms) {
        assert!((b.seminorm - 0.1 * a.seminorm).abs() <= 1e-9 * a.seminorm, "p {}", a.p);
    }
    assert_eq!(intersection_metric(&phi, &phi, &spec, &grid, &sphere, &cfg).unwrap().value, 0.0);
}

#[test]
fn single_kernel_density_demo() {
    let cfg = NormConfig::default();
    let r = density_demo(&HoloFn::zero(), 2, 1.5, 0.1, 1, 20, &cfg).unwrap();
    assert!(r.pass);
    assert!(r.metric.value < 0.1 && r.metric_bound < 0.1);
    assert!(r.witness.all_found());
    let loose = density_demo(&HoloFn::zero(), 2, 1.5, 10.0, 1, 20, &cfg).unwrap();
    assert!(loose.pass && loose.halvings == 0);
}

#[test]
fn power_kernel_is_unbounded_at_its_exponent() {
    let cfg = NormConfig::default();
    let f = HoloFn::singular(SingularFunctionSpec::power(e1(), 1.5).unwrap()).unwrap();
    let s = scan(&f, 1.8, &ball_threshold_grid(), &SurfaceSpec::Sphere { n: 2 }, &cfg);
    let values = s.values();
    assert!(values.windows(2).all(|w| w[1] > w[0]));
    assert_eq!(Membership::from_class(classify(&s).class), Membership::Out);
}
