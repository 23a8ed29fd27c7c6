//! The acceptance suite: ten criteria, each run under one seed.

use std::f64::consts::FRAC_PI_2;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::Rng;

use crate::error::{LabError, Result};
use crate::experiments::{
    containment_suite, density_lemma, local_bound_lemma, verify_lemma_2_2, verify_lemma_4_2, verify_lemma_4_3,
    verify_lemma_5_1, verify_log_rate, Check, LemmaReport,
};
use crate::functions::{eval_log, log_power_bound_holds, parse_holomorphic};
use crate::geometry::{
    check_levi_estimate, levi_form_min_eigenvalue, levi_polynomial, random_unit_vector, sample_levi_pairs, Domain,
};
use crate::norms::{intersection_metric, ApproachGrid, IntersectionMetricSpec, NormConfig, SurfaceSpec};
use crate::numerics::{chunk_rng, mix_seed, sphere_area};
use crate::quadrature::{
    integrate_cap, integrate_level_set, integrate_sphere, integrate_zonal, LevelMethod,
    LevelOptions, ZonalGrid,
};
use crate::vector::{pairing, ComplexVector};

/// Seeds every criterion must pass under.
pub const ACCEPTANCE_SEEDS: [u64; 3] = [7, 11, 13];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Criterion {
    pub id: u8,
    pub title: &'static str,
    pub limit: Option<Duration>,
}

const fn secs(s: u64) -> Option<Duration> {
    Some(Duration::from_secs(s))
}

pub const CRITERIA: [Criterion; 10] = [
    Criterion { id: 1, title: "ball thresholds for the Cauchy, log and power kernels", limit: secs(60) },
    Criterion { id: 2, title: "log-rate constancy of the Cauchy kernel at p = n", limit: None },
    Criterion { id: 3, title: "local bound off a cap", limit: secs(60) },
    Criterion { id: 4, title: "containment of local spaces under a change of defining function", limit: None },
    Criterion { id: 5, title: "Levi kernel exponents on the ellipsoid", limit: secs(300) },
    Criterion { id: 6, title: "exponential Levi kernel on the ellipsoid", limit: None },
    Criterion { id: 7, title: "harmonic kernel thresholds", limit: secs(120) },
    Criterion { id: 8, title: "Levi polynomial estimate", limit: None },
    Criterion { id: 9, title: "density construction", limit: secs(180) },
    Criterion { id: 10, title: "property suites", limit: None },
];

pub fn criterion(id: u8) -> Result<Criterion> {
    CRITERIA
        .iter()
        .find(|c| c.id == id)
        .copied()
        .ok_or_else(|| LabError::InvalidParameter(format!("no acceptance criterion {id}")))
}

#[derive(Debug, Clone)]
pub struct CriterionOutcome {
    pub criterion: Criterion,
    pub seed: u64,
    pub reports: Vec<LemmaReport>,
    pub error: Option<String>,
    pub runtime: Duration,
}

impl CriterionOutcome {
    pub fn within_limit(&self) -> bool {
        self.criterion.limit.is_none_or(|l| self.runtime <= l)
    }

    pub fn pass(&self) -> bool {
        self.error.is_none() && !self.reports.is_empty() && self.reports.iter().all(|r| r.pass()) && self.within_limit()
    }

    pub fn has_inconclusive(&self) -> bool {
        self.reports.iter().any(|r| r.has_inconclusive())
    }

    /// Failed cases and checks, for diagnostics.
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Some(e) = &self.error {
            out.push(format!("error: {e}"));
        }
        for r in &self.reports {
            for c in r.cases.iter().filter(|c| !c.pass) {
                out.push(format!("{} {}: expected {}, got {}", r.lemma_id, c.case, c.expected, c.verdict.class));
            }
            for c in r.checks.iter().filter(|c| !c.pass) {
                out.push(format!("{} {}: {} against {}", r.lemma_id, c.name, c.value, c.bound));
            }
        }
        if !self.within_limit() {
            out.push(format!("runtime {:?} over {:?}", self.runtime, self.criterion.limit.unwrap()));
        }
        out
    }

    /// One summary line.
    pub fn summary(&self) -> String {
        let status = if self.pass() { "PASS" } else { "FAIL" };
        let mut line = format!(
            "criterion {:>2} seed {:>2} {status} {:>8.2}s  {}",
            self.criterion.id,
            self.seed,
            self.runtime.as_secs_f64(),
            self.criterion.title
        );
        for f in self.failures() {
            line.push_str("\n    ");
            line.push_str(&f);
        }
        line
    }
}

/// Runs criterion `id` under `seed` with the default budget.
pub fn run_criterion(id: u8, seed: u64) -> Result<CriterionOutcome> {
    let criterion = criterion(id)?;
    let cfg = NormConfig::with_seed(seed);
    let start = Instant::now();
    let result = match id {
        1 => criterion_thresholds(&cfg),
        2 => criterion_log_rate(&cfg),
        3 => criterion_local_bound(&cfg),
        4 => containment_suite(&cfg),
        5 => criterion_levi_kernel(&cfg),
        6 => criterion_exponential_kernel(&cfg),
        7 => criterion_harmonic(&cfg),
        8 => criterion_levi_estimate(&cfg),
        9 => criterion_density(&cfg),
        _ => property_suites(&cfg),
    };
    let runtime = start.elapsed();
    let (reports, error) = match result {
        Ok(r) => (r, None),
        Err(e) => (Vec::new(), Some(e.to_string())),
    };
    Ok(CriterionOutcome { criterion, seed, reports, error, runtime })
}

fn e1() -> ComplexVector {
    ComplexVector::basis(2, 0)
}

fn ellipsoid_1_2() -> Result<Domain> {
    Domain::ellipsoid(vec![1.0, 2.0])
}

fn criterion_thresholds(cfg: &NormConfig) -> Result<Vec<LemmaReport>> {
    Ok(vec![verify_lemma_2_2(2, &e1(), 1.5, cfg)?])
}

fn criterion_log_rate(cfg: &NormConfig) -> Result<Vec<LemmaReport>> {
    Ok(vec![verify_log_rate(2, &e1(), cfg)?])
}

fn criterion_local_bound(cfg: &NormConfig) -> Result<Vec<LemmaReport>> {
    Ok(vec![local_bound_lemma(2, &e1(), &e1(), 0.5, cfg)?])
}

fn criterion_levi_kernel(cfg: &NormConfig) -> Result<Vec<LemmaReport>> {
    Ok(vec![verify_lemma_4_2(&ellipsoid_1_2()?, &e1(), cfg)?])
}

fn criterion_exponential_kernel(cfg: &NormConfig) -> Result<Vec<LemmaReport>> {
    Ok(vec![verify_lemma_4_3(&ellipsoid_1_2()?, &e1(), 1.5, cfg)?])
}

fn criterion_harmonic(cfg: &NormConfig) -> Result<Vec<LemmaReport>> {
    [3usize, 4]
        .iter()
        .map(|&n| {
            let mut y = vec![0.0; n];
            y[0] = 1.0;
            verify_lemma_5_1(n, &y, cfg)
        })
        .collect()
}

/// Number of sampled pairs for the Levi estimate.
pub const LEVI_PAIRS: usize = 10_000;

fn criterion_levi_estimate(cfg: &NormConfig) -> Result<Vec<LemmaReport>> {
    let start = Instant::now();
    let mut report = LemmaReport::new("4.levi", cfg);
    let ball = Domain::unit_ball(2)?;
    for (label, domain) in [("ball", ball.clone()), ("ellipsoid a=1,2", ellipsoid_1_2()?)] {
        let beta = levi_form_min_eigenvalue(&domain, 0.05, 200, cfg.seed)? / 3.0;
        let eta = 0.5 * domain.diameter();
        let pairs = sample_levi_pairs(&domain, eta, LEVI_PAIRS, cfg.seed)?;
        let r = check_levi_estimate(&domain, beta, eta, &pairs)?;
        report.checks.push(Check::at_most(format!("{label} violations"), r.violations as f64, 0.0));
        report.checks.push(Check::flag(format!("{label} pairs checked"), r.pairs_checked as f64, r.pairs_checked > 0));
        report.measurements.push((format!("{label} beta"), beta));
        report.measurements.push((format!("{label} worst margin"), r.worst_margin));
    }
    let eta = 0.5 * ball.diameter();
    let pairs = sample_levi_pairs(&ball, eta, LEVI_PAIRS, cfg.seed)?;
    let inflated = check_levi_estimate(&ball, 1.5, eta, &pairs)?;
    report.checks.push(Check::flag("ball beta=1.5 violations", inflated.violations as f64, inflated.violations >= 1));
    // on the ball Re Q - rho(zeta) + rho(z) = |zeta - z|^2
    let mut defect: f64 = 0.0;
    for (z, zeta) in &pairs {
        let margin = levi_polynomial(&ball, z, zeta)?.re - ball.rho(zeta) + ball.rho(z);
        defect = defect.max((margin - z.sub(zeta).norm_sqr()).abs());
    }
    report.checks.push(Check::at_most("ball margin identity defect", defect, 1e-12));
    report.runtime = start.elapsed();
    Ok(vec![report])
}

fn criterion_density(cfg: &NormConfig) -> Result<Vec<LemmaReport>> {
    let g = parse_holomorphic("poly:z1^2+3")?;
    Ok(vec![density_lemma(&g, 2, 1.5, 0.01, 4, 20, cfg)?])
}

/// Reference integrand `|1 - r <z, zeta>|^{-s}`.
fn zonal_integrand(z: &[Complex64], zeta: &[Complex64], r: f64, s: f64) -> f64 {
    (Complex64::new(1.0, 0.0) - r * pairing(z, zeta)).norm().powf(-s)
}

/// Quadrature, norm, metric and scalar invariants under one seed.
pub fn property_suites(cfg: &NormConfig) -> Result<Vec<LemmaReport>> {
    Ok(vec![quadrature_suite(cfg)?, norm_suite(cfg)?, function_suite(cfg)?])
}

fn quadrature_suite(cfg: &NormConfig) -> Result<LemmaReport> {
    let start = Instant::now();
    let mut report = LemmaReport::new("quadrature", cfg);
    let mut rng = chunk_rng(mix_seed(cfg.seed, 0x9e0), 0);
    let count = cfg.count;
    let seed = cfg.seed;

    // positivity over sphere, cap and level set
    let ellipsoid = ellipsoid_1_2()?;
    let mut smallest = f64::INFINITY;
    for i in 0..8u64 {
        let zeta = random_unit_vector(&mut rng, 2);
        let r = rng.random_range(0.1..0.95);
        let s = rng.random_range(0.5..4.0);
        let g = |z: &[Complex64]| Ok(zonal_integrand(z, &zeta, r, s));
        let sphere = integrate_sphere(&g, 2, count, seed + i)?;
        let cap = integrate_cap(&g, &zeta, 0.6, false, count, seed + i)?;
        let level = integrate_level_set(&g, &ellipsoid, 0.1, LevelMethod::Parametrized, &LevelOptions::new(count, seed + i))?;
        smallest = smallest.min(sphere.value).min(cap.value).min(level.value);
    }
    report.checks.push(Check::flag("positivity", smallest, smallest >= 0.0));

    // linearity for a fixed seed
    let zeta = e1();
    let (a, b) = (2.5, -0.75);
    let g = |z: &[Complex64]| Ok(zonal_integrand(z, zeta.as_slice(), 0.8, 2.0));
    let h = |z: &[Complex64]| Ok(z[1].norm_sqr());
    let combo = |z: &[Complex64]| Ok(a * g(z)? + b * h(z)?);
    let eg = integrate_sphere(&g, 2, count, seed)?;
    let eh = integrate_sphere(&h, 2, count, seed)?;
    let ec = integrate_sphere(&combo, 2, count, seed)?;
    let expected = a * eg.value + b * eh.value;
    let defect = (ec.value - expected).abs() / expected.abs().max(f64::MIN_POSITIVE);
    report.checks.push(Check::at_most("linearity relative defect", defect, 1e-12));

    // seed determinism
    let again = integrate_sphere(&g, 2, count, seed)?;
    let same = again.value.to_bits() == eg.value.to_bits() && again.stderr.to_bits() == eg.stderr.to_bits();
    report.checks.push(Check::flag("seed determinism", eg.value, same));

    // cap plus complement against the full sphere
    let off_axis = ComplexVector::new(vec![Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)]);
    let g = |z: &[Complex64]| Ok(zonal_integrand(z, off_axis.as_slice(), 0.9, 3.0));
    let cap = integrate_cap(&g, zeta.as_slice(), 0.7, false, count, seed)?;
    let rest = integrate_cap(&g, zeta.as_slice(), 0.7, true, count, mix_seed(seed, 1))?;
    let full = integrate_sphere(&g, 2, count, mix_seed(seed, 2))?;
    let gap = (cap.value + rest.value - full.value).abs();
    let tol = 3.0 * (cap.stderr.powi(2) + rest.stderr.powi(2) + full.stderr.powi(2)).sqrt();
    report.checks.push(Check::at_most("cap plus complement gap", gap, tol));

    // zonal against Monte Carlo on random zonal integrands
    let mut agree = 0;
    for i in 0..20u64 {
        let n = if i % 2 == 0 { 2 } else { 3 };
        let axis = random_unit_vector(&mut rng, n);
        let r = rng.random_range(0.05..0.9);
        let s = rng.random_range(0.5..2.0 * n as f64);
        let mc = integrate_sphere(&|z: &[Complex64]| Ok(zonal_integrand(z, &axis, r, s)), n, count, mix_seed(seed, 100 + i))?;
        let zonal = integrate_zonal(
            &|l: Complex64| Ok((Complex64::new(1.0, 0.0) - r * l).norm().powf(-s)),
            n,
            &ZonalGrid::default(),
            None,
        )?;
        if (zonal.value - mc.value).abs() <= 3.0 * mc.stderr {
            agree += 1;
        }
    }
    report.checks.push(Check::flag("zonal and Monte Carlo agree", agree as f64, agree >= 19));
    report.runtime = start.elapsed();
    Ok(report)
}

fn norm_suite(cfg: &NormConfig) -> Result<LemmaReport> {
    let start = Instant::now();
    let mut report = LemmaReport::new("norms", cfg);
    let mut rng = chunk_rng(mix_seed(cfg.seed, 0x9e1), 0);

    // power means increase with p on the normalized sphere
    let area = sphere_area(2);
    let mut worst: f64 = f64::NEG_INFINITY;
    for i in 0..10u64 {
        let zeta = random_unit_vector(&mut rng, 2);
        let r = rng.random_range(0.1..0.95);
        let p1 = rng.random_range(0.5..3.0);
        let p2 = p1 + rng.random_range(0.1..2.0);
        let seed = mix_seed(cfg.seed, 200 + i);
        let i1 = integrate_sphere(&|z: &[Complex64]| Ok(zonal_integrand(z, &zeta, r, p1)), 2, cfg.count, seed)?;
        let i2 = integrate_sphere(&|z: &[Complex64]| Ok(zonal_integrand(z, &zeta, r, p2)), 2, cfg.count, seed)?;
        let m1 = (i1.value / area).powf(1.0 / p1);
        let m2 = (i2.value / area).powf(1.0 / p2);
        let s1 = m1 * i1.relative_error() / p1;
        let s2 = m2 * i2.relative_error() / p2;
        worst = worst.max(m1 - m2 - 3.0 * s1.hypot(s2));
    }
    report.checks.push(Check::at_most("power mean monotonicity excess", worst, 0.0));

    // metric axioms on polynomials
    let f = parse_holomorphic("poly:z1^2+3")?;
    let g = parse_holomorphic("poly:2*z1*z2+z2-1")?;
    let spec = IntersectionMetricSpec::standard(Some(1.5), 20)?;
    let grid = ApproachGrid::default_monte_carlo();
    let sphere = SurfaceSpec::Sphere { n: 2 };
    let dff = intersection_metric(&f, &f, &spec, &grid, &sphere, cfg)?;
    let dfg = intersection_metric(&f, &g, &spec, &grid, &sphere, cfg)?;
    let dgf = intersection_metric(&g, &f, &spec, &grid, &sphere, cfg)?;
    report.checks.push(Check::at_most("d(f, f)", dff.value, 0.0));
    report.checks.push(Check::at_most("|d(f, g) - d(g, f)|", (dfg.value - dgf.value).abs(), 1e-12));
    report.checks.push(Check::flag("d(f, g) below 1", dfg.value, dfg.value < 1.0 && dgf.value < 1.0));
    report.runtime = start.elapsed();
    Ok(report)
}

fn function_suite(cfg: &NormConfig) -> Result<LemmaReport> {
    let start = Instant::now();
    let mut report = LemmaReport::new("functions", cfg);

    // (log x)^p <= (k!)^{p/k} x^{p/k}
    let mut failures = 0;
    let mut sampled = 0;
    for i in 0..=400 {
        let x = 10f64.powf(1e-6 + 12.0 * i as f64 / 400.0);
        for p in [1.0, 2.0, 4.0] {
            for k in [1u32, 2, 5] {
                sampled += 1;
                if !log_power_bound_holds(x, p, k) {
                    failures += 1;
                }
            }
        }
    }
    report.checks.push(Check::at_most("log inequality failures", failures as f64, 0.0));
    report.measurements.push(("log inequality samples".into(), sampled as f64));

    // principal branch of h on the ball
    let mut rng = chunk_rng(mix_seed(cfg.seed, 0x9e2), 0);
    let zeta = e1();
    let mut largest: f64 = 0.0;
    for i in 0..100_000 {
        let dir = random_unit_vector(&mut rng, 2);
        let radius = if i % 4 == 0 {
            1.0 - 10f64.powf(-rng.random_range(1.0..9.0))
        } else {
            rng.random::<f64>().powf(0.25)
        };
        let z: Vec<Complex64> = dir.iter().map(|c| c * radius).collect();
        largest = largest.max(eval_log(zeta.as_slice(), &z)?.im.abs());
    }
    report.checks.push(Check::flag("max |Im h|", largest, largest < FRAC_PI_2));
    report.measurements.push(("branch samples".into(), 100_000.0));
    report.runtime = start.elapsed();
    Ok(report)
}
