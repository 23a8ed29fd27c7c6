use std::f64::consts::FRAC_PI_2;

use hardy_lab::functions::{eval_cauchy, eval_levi_reciprocal, eval_log, eval_power, log_power_bound_holds};
use hardy_lab::geometry::{levi_polynomial, project_to_boundary, Domain};
use hardy_lab::norms::{classify, ApproachGrid, NormScan, ScanPoint};
use hardy_lab::numerics::sphere_area;
use hardy_lab::quadrature::{integrate_cap, integrate_sphere, IntegralEstimate, Method};
use hardy_lab::vector::{pairing, ComplexVector};
use hardy_lab::Complex64;
use proptest::prelude::*;

fn complex() -> impl Strategy<Value = Complex64> {
    (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(a, b)| Complex64::new(a, b))
}

fn vector(n: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec(complex(), n)
}

fn unit(n: usize) -> impl Strategy<Value = Vec<Complex64>> {
    vector(n).prop_filter_map("nonzero", |v| {
        let r = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        (r > 1e-3).then(|| v.into_iter().map(|c| c / r).collect())
    })
}

/// A point of the open ball at radius `t` along a random direction.
fn inside(n: usize) -> impl Strategy<Value = Vec<Complex64>> {
    (unit(n), 0.0..0.999_999f64).prop_map(|(u, t)| u.into_iter().map(|c| c * t).collect())
}

fn zonal_integrand(z: &[Complex64], zeta: &[Complex64], r: f64, s: f64) -> f64 {
    (Complex64::new(1.0, 0.0) - r * pairing(z, zeta)).norm().powf(-s)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pairing_is_conjugate_symmetric(z in vector(3), w in vector(3)) {
        let a = pairing(&z, &w);
        let b = pairing(&w, &z).conj();
        prop_assert!((a - b).norm() <= 1e-15 * (1.0 + a.norm()));
    }

    #[test]
    fn power_modulus_is_a_power_of_the_cauchy_modulus(zeta in unit(2), z in inside(2), q in 1.01..4.0f64) {
        let f = eval_cauchy(&zeta, &z).unwrap().norm();
        let phi = eval_power(&zeta, q, &z).unwrap().norm();
        let expected = f.powf(2.0 / q);
        prop_assert!((phi - expected).abs() <= 1e-10 * expected);
    }

    #[test]
    fn log_stays_on_the_principal_branch(zeta in unit(3), z in inside(3)) {
        let h = eval_log(&zeta, &z).unwrap();
        prop_assert!(h.im.abs() < FRAC_PI_2);
    }

    #[test]
    fn log_inequality_holds(e in 1e-9..30.0f64, p in prop::sample::select(vec![1.0, 2.0, 4.0]), k in prop::sample::select(vec![1u32, 2, 5])) {
        prop_assert!(log_power_bound_holds(e.exp(), p, k));
    }

    #[test]
    fn ball_levi_polynomial_is_twice_the_cauchy_denominator(zeta in unit(2), z in inside(2)) {
        let ball = Domain::unit_ball(2).unwrap();
        let q = levi_polynomial(&ball, &z, &zeta).unwrap();
        let expected = 2.0 * (Complex64::new(1.0, 0.0) - pairing(&z, &zeta));
        prop_assert!((q - expected).norm() <= 1e-12);
        let zeta_v = ComplexVector::new(zeta.clone());
        let r = eval_levi_reciprocal(&ball, &zeta_v, &z).unwrap();
        let c = eval_cauchy(&zeta, &z).unwrap() / 2.0;
        prop_assert!((r - c).norm() <= 1e-12 * c.norm());
    }

    #[test]
    fn levi_polynomial_is_holomorphic(zeta in unit(2), z in inside(2), a in 0.5..3.0f64) {
        let d = Domain::ellipsoid(vec![1.0, a]).unwrap();
        let w = project_to_boundary(&d, &zeta).unwrap();
        let h = 1e-5;
        for j in 0..2 {
            let shift = |dz: Complex64| {
                let mut p = z.clone();
                p[j] += dz;
                levi_polynomial(&d, &p, &w).unwrap()
            };
            // d/dzbar = (d/dx + i d/dy) / 2
            let dx = (shift(Complex64::new(h, 0.0)) - shift(Complex64::new(-h, 0.0))) / (2.0 * h);
            let dy = (shift(Complex64::new(0.0, h)) - shift(Complex64::new(0.0, -h))) / (2.0 * h);
            let dbar = (dx + Complex64::i() * dy) * 0.5;
            prop_assert!(dbar.norm() < 1e-6);
        }
    }

    #[test]
    fn sphere_estimates_are_linear_and_positive(zeta in unit(2), r in 0.05..0.95f64, s in 0.2..4.0f64, a in 0.1..3.0f64, b in 0.1..3.0f64, seed in 0u64..1000) {
        let g = |z: &[Complex64]| Ok(zonal_integrand(z, &zeta, r, s));
        let h = |z: &[Complex64]| Ok(z[0].norm_sqr());
        let combo = |z: &[Complex64]| Ok(a * g(z)? + b * h(z)?);
        let eg = integrate_sphere(&g, 2, 2000, seed).unwrap();
        let eh = integrate_sphere(&h, 2, 2000, seed).unwrap();
        let ec = integrate_sphere(&combo, 2, 2000, seed).unwrap();
        prop_assert!(eg.value >= 0.0 && eh.value >= 0.0);
        let expected = a * eg.value + b * eh.value;
        prop_assert!((ec.value - expected).abs() <= 1e-12 * expected);
    }

    #[test]
    fn power_means_increase_with_p(zeta in unit(2), r in 0.05..0.95f64, p1 in 0.3..3.0f64, dp in 0.05..2.0f64, seed in 0u64..1000) {
        // Holder's inequality holds exactly for the empirical measure of one sample set
        let area = sphere_area(2);
        let p2 = p1 + dp;
        let i1 = integrate_sphere(&|z: &[Complex64]| Ok(zonal_integrand(z, &zeta, r, p1)), 2, 1000, seed).unwrap();
        let i2 = integrate_sphere(&|z: &[Complex64]| Ok(zonal_integrand(z, &zeta, r, p2)), 2, 1000, seed).unwrap();
        let m1 = (i1.value / area).powf(1.0 / p1);
        let m2 = (i2.value / area).powf(1.0 / p2);
        prop_assert!(m1 <= m2 * (1.0 + 1e-12));
    }

    #[test]
    fn cap_and_complement_cover_the_sphere(zeta in unit(2), center in unit(2), radius in 0.2..1.8f64, seed in 0u64..1000) {
        let g = |z: &[Complex64]| Ok(zonal_integrand(z, &zeta, 0.5, 2.0));
        let cap = integrate_cap(&g, &center, radius, false, 4000, seed).unwrap();
        let rest = integrate_cap(&g, &center, radius, true, 4000, seed + 1).unwrap();
        let full = integrate_sphere(&g, 2, 4000, seed + 2).unwrap();
        let tol = 5.0 * (cap.stderr.powi(2) + rest.stderr.powi(2) + full.stderr.powi(2)).sqrt();
        prop_assert!((cap.value + rest.value - full.value).abs() <= tol);
    }

    #[test]
    fn classification_ignores_positive_scaling(slope in 0.0..3.0f64, power in 0.0..0.5f64, scale in 1e-3..1e3f64) {
        let grid = ApproachGrid::radial(2, 20).unwrap();
        let values: Vec<f64> = grid.ks().iter().map(|&k| {
            let x = k as f64 * std::f64::consts::LN_2;
            1.0 + slope * x + (power * x).exp()
        }).collect();
        let make = |c: f64| NormScan {
            p: 2.0,
            grid: grid.clone(),
            points: grid.ks().into_iter().zip(&values).map(|(k, v)| ScanPoint {
                k,
                param: grid.param(k),
                estimate: IntegralEstimate::new(c * v, 0.0, 1, Method::Deterministic, false),
            }).collect(),
            function: "model".into(),
            surface: "model".into(),
            failure: None,
        };
        let a = classify(&make(1.0));
        let b = classify(&make(scale));
        prop_assert_eq!(a.class, b.class);
    }

    #[test]
    fn grids_round_trip_through_text(k_min in 0u32..10, len in 6u32..18, eps0 in 0.01..0.5f64) {
        let r = ApproachGrid::radial(k_min + 1, k_min + len).unwrap();
        prop_assert_eq!(ApproachGrid::parse(&r.to_string()).unwrap(), r);
        let l = ApproachGrid::level(eps0, k_min, k_min + len).unwrap();
        prop_assert_eq!(ApproachGrid::parse(&l.to_string()).unwrap(), l);
    }
}
