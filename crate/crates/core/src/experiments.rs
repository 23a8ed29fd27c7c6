//! End-to-end checks of membership thresholds and integral bounds, plus the
//! witness and density constructions.

use std::fmt;
use std::time::{Duration, Instant};

use num_complex::Complex64;

use crate::error::{LabError, Result};
use crate::functions::{HoloFn, SingularFunctionSpec};
use crate::geometry::{boundary_dense_sequence, random_unit_vector, Domain};
use crate::norms::{
    classify, growth_curvature, harmonic_scan, intersection_metric, level_scan_domain, local_scan_ball, power_kernel_boundary_norm, scan, verdict_of,
    ApproachGrid, DivergenceClass, DivergenceVerdict, IntersectionMetricSpec, Membership, MetricValue,
    NormConfig, NormScan, SurfaceSpec,
};
use crate::numerics::{chunk_rng, mix_seed, sphere_area};
use crate::quadrature::{BallRegion, LevelMethod};
use crate::vector::ComplexVector;

/// Expected outcome of one case.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Expectation {
    pub membership: Membership,
    /// Required growth class, when the claim pins it down.
    pub class: Option<DivergenceClass>,
}

impl Expectation {
    pub fn inside() -> Self {
        Self { membership: Membership::In, class: None }
    }

    pub fn outside() -> Self {
        Self { membership: Membership::Out, class: None }
    }

    pub fn outside_with(class: DivergenceClass) -> Self {
        Self { membership: Membership::Out, class: Some(class) }
    }

    pub fn matches(&self, verdict: &DivergenceVerdict) -> bool {
        Membership::from_class(verdict.class) == self.membership && self.class.is_none_or(|c| c == verdict.class)
    }
}

impl fmt::Display for Expectation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.class {
            Some(c) => write!(f, "{}:{}", self.membership, c),
            None => write!(f, "{}", self.membership),
        }
    }
}

/// One classified scan compared with its expected verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseResult {
    pub case: String,
    pub p: f64,
    pub expected: Expectation,
    pub verdict: DivergenceVerdict,
    pub membership: Membership,
    pub pass: bool,
    pub scan: NormScan,
}

/// A scalar check `value <= bound` (or a reported measurement when `bound` is infinite).
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, bound, pass: value <= bound }
    }

    pub fn flag(name: impl Into<String>, value: f64, pass: bool) -> Self {
        Self { name: name.into(), value, bound: f64::INFINITY, pass }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LemmaReport {
    pub lemma_id: String,
    pub cases: Vec<CaseResult>,
    pub checks: Vec<Check>,
    /// Reported values with no pass/fail attached.
    pub measurements: Vec<(String, f64)>,
    pub config: String,
    pub runtime: Duration,
}

impl LemmaReport {
    pub fn new(lemma_id: &str, cfg: &NormConfig) -> Self {
        Self {
            lemma_id: lemma_id.into(),
            cases: Vec::new(),
            checks: Vec::new(),
            measurements: Vec::new(),
            config: format!("count={};seed={}", cfg.count, cfg.seed),
            runtime: Duration::ZERO,
        }
    }

    pub fn pass(&self) -> bool {
        self.cases.iter().all(|c| c.pass) && self.checks.iter().all(|c| c.pass)
    }

    pub fn has_inconclusive(&self) -> bool {
        self.cases.iter().any(|c| c.membership == Membership::Inconclusive)
    }

    pub fn case(&self, label: &str) -> Option<&CaseResult> {
        self.cases.iter().find(|c| c.case == label)
    }

    pub fn measurement(&self, name: &str) -> Option<f64> {
        self.measurements.iter().find(|(k, _)| k == name).map(|(_, v)| *v)
    }

    pub fn push_scan(&mut self, case: String, expected: Expectation, scan: NormScan) -> &CaseResult {
        let p = scan.p;
        let mv = verdict_of(scan);
        let pass = expected.matches(&mv.verdict) && mv.scan.failure.is_none();
        self.cases.push(CaseResult {
            case,
            p,
            expected,
            membership: mv.status,
            verdict: mv.verdict,
            pass,
            scan: mv.scan,
        });
        self.cases.last().unwrap()
    }
}

/// Exponent label without binary noise, e.g. `1.2` rather than `1.2000000000000002`.
pub fn exponent_label(p: f64) -> String {
    format!("{}", (p * 1e9).round() / 1e9)
}

fn unit_point(zeta: &ComplexVector) -> Result<()> {
    if (zeta.norm_sqr() - 1.0).abs() > 1e-12 {
        return Err(LabError::OutsideDomain(format!("{zeta} is not on the unit sphere")));
    }
    Ok(())
}

/// Grid for the ball thresholds, `k = 4..20`.
pub fn ball_threshold_grid() -> ApproachGrid {
    ApproachGrid::Radial { k_min: 4, k_max: 20 }
}

/// Cauchy kernel at `{0.75n, n, 1.25n}`, its logarithm at `{2, 4, 8}` and the
/// power `|f|^{n/q}` at `{0.8q, q, 1.2q}` on the unit ball.
pub fn verify_lemma_2_2(n: usize, zeta: &ComplexVector, q: f64, cfg: &NormConfig) -> Result<LemmaReport> {
    let start = Instant::now();
    if n < 2 || zeta.dim() != n {
        return Err(LabError::InvalidParameter(format!("need n >= 2 and zeta in C^{n}")));
    }
    if !(q > 1.0 && q.is_finite()) {
        return Err(LabError::InvalidParameter(format!("q must exceed 1, got {q}")));
    }
    unit_point(zeta)?;
    let mut report = LemmaReport::new("2.2", cfg);
    let grid = ball_threshold_grid();
    let sphere = SurfaceSpec::Sphere { n };
    let nf = n as f64;
    let cauchy = HoloFn::singular(SingularFunctionSpec::cauchy(zeta.clone())?)?;
    let log = HoloFn::singular(SingularFunctionSpec::log(zeta.clone())?)?;
    let power = HoloFn::singular(SingularFunctionSpec::power(zeta.clone(), q)?)?;
    let cases: Vec<(&str, &HoloFn, f64, Expectation)> = vec![
        ("cauchy", &cauchy, 0.75 * nf, Expectation::inside()),
        ("cauchy", &cauchy, nf, Expectation::outside_with(DivergenceClass::LogDivergent)),
        ("cauchy", &cauchy, 1.25 * nf, Expectation::outside_with(DivergenceClass::PowerDivergent)),
        ("log", &log, 2.0, Expectation::inside()),
        ("log", &log, 4.0, Expectation::inside()),
        ("log", &log, 8.0, Expectation::inside()),
        ("power", &power, 0.8 * q, Expectation::inside()),
        ("power", &power, q, Expectation::outside()),
        ("power", &power, 1.2 * q, Expectation::outside()),
    ];
    for (name, f, p, expected) in cases {
        let s = scan(f, p, &grid, &sphere, cfg);
        report.push_scan(format!("{name} p={}", exponent_label(p)), expected, s);
    }
    report.runtime = start.elapsed();
    Ok(report)
}

/// Spread of `I(r_k) / log(1/(1 - r_k^2))` for the Cauchy kernel at `p = n`, `k = 10..20`.
pub fn verify_log_rate(n: usize, zeta: &ComplexVector, cfg: &NormConfig) -> Result<LemmaReport> {
    let start = Instant::now();
    unit_point(zeta)?;
    let mut report = LemmaReport::new("2.2-log-rate", cfg);
    let f = HoloFn::singular(SingularFunctionSpec::cauchy(zeta.clone())?)?;
    let grid = ApproachGrid::radial(10, 20)?;
    let s = scan(&f, n as f64, &grid, &SurfaceSpec::Sphere { n }, cfg);
    if let Some(e) = &s.failure {
        return Err(e.clone());
    }
    let ratios: Vec<f64> = s
        .points
        .iter()
        .map(|pt| pt.estimate.value / (1.0 / (1.0 - pt.param * pt.param)).ln())
        .collect();
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    report.checks.push(Check::at_most("ratio spread", (hi - lo) / mean, 0.15));
    report.checks.push(Check::flag("ratio positive", lo, lo > 0.0));
    report.measurements.push(("ratio mean".into(), mean));
    // over a short window log I is also nearly linear in k, so only divergence is required
    report.push_scan(format!("cauchy p={n}"), Expectation::outside(), s);
    report.runtime = start.elapsed();
    Ok(report)
}

/// Complement bound for the Cauchy kernel outside a cap containing its pole.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalBoundReport {
    /// `inf {1 - Re<z, zeta>}` over the complement of the cap within `Re<z, zeta> >= 0`.
    pub alpha: f64,
    /// `sigma(S) / min(alpha, 1)^n`.
    pub bound: f64,
    pub measured_sup: f64,
    pub complement: DivergenceVerdict,
    pub cap: DivergenceVerdict,
    pub complement_scan: Option<NormScan>,
    pub cap_scan: NormScan,
    pub pass: bool,
    pub runtime: Duration,
}

/// Minimizes `1 - Re<z, zeta>` over `{z in S : |z - center| >= radius, Re<z, zeta> >= 0}`.
///
/// Best of `samples` uniform points, then projected gradient steps. Returns
/// infinity when no sample is feasible.
pub fn minimize_alpha(zeta: &ComplexVector, center: &ComplexVector, radius: f64, samples: usize, seed: u64) -> f64 {
    let n = zeta.dim();
    let feasible = |z: &[Complex64]| -> bool { center.distance(z) >= radius && zeta.pairing(z).re >= 0.0 };
    // Re<z, zeta> = Re<zeta, z>
    let objective = |z: &[Complex64]| 1.0 - crate::vector::pairing(z, zeta).re;
    let mut rng = chunk_rng(mix_seed(seed, 0xa1fa), 0);
    let mut best: Option<(f64, Vec<Complex64>)> = None;
    for _ in 0..samples {
        let z = random_unit_vector(&mut rng, n);
        if feasible(&z) {
            let v = objective(&z);
            if best.as_ref().is_none_or(|(b, _)| v < *b) {
                best = Some((v, z));
            }
        }
    }
    let Some((mut value, mut z)) = best else {
        return f64::INFINITY;
    };
    // points of the sphere at distance `radius` from the centre satisfy Re<z, c> = kappa
    let kappa = 1.0 - 0.5 * radius * radius;
    let project = |z: &[Complex64]| -> Vec<Complex64> {
        let a = crate::vector::pairing(z, center);
        if a.re <= kappa {
            return z.to_vec();
        }
        let w: Vec<Complex64> = z.iter().zip(center.iter()).map(|(zi, ci)| zi - a * ci).collect();
        let wn = crate::vector::norm_sqr(&w).sqrt();
        let im2 = a.im * a.im;
        let rest = (1.0 - kappa * kappa - im2).max(0.0);
        let (im, scale) = if wn > 0.0 {
            (a.im, rest.sqrt() / wn)
        } else {
            ((1.0 - kappa * kappa).max(0.0).sqrt().copysign(a.im), 0.0)
        };
        let a2 = Complex64::new(kappa, im);
        let p: Vec<Complex64> = center.iter().zip(&w).map(|(ci, wi)| a2 * ci + wi * scale).collect();
        let r = crate::vector::norm_sqr(&p).sqrt();
        p.iter().map(|c| c / r).collect()
    };
    let mut step = 0.1;
    for _ in 0..400 {
        let moved: Vec<Complex64> = z.iter().zip(zeta.iter()).map(|(a, b)| a + b * step).collect();
        let r = crate::vector::norm_sqr(&moved).sqrt();
        let moved: Vec<Complex64> = moved.iter().map(|c| c / r).collect();
        let cand = project(&moved);
        let v = objective(&cand);
        if feasible(&cand) && v < value {
            value = v;
            z = cand;
        } else {
            step *= 0.5;
            if step < 1e-15 {
                break;
            }
        }
    }
    value
}

/// Cauchy kernel at `p = n` is bounded on the complement of a cap around its
/// pole by `sigma(S)/alpha^n`, but diverges on the cap.
pub fn verify_local_bound(
    n: usize,
    zeta: &ComplexVector,
    center: &ComplexVector,
    radius: f64,
    cfg: &NormConfig,
) -> Result<LocalBoundReport> {
    let start = Instant::now();
    unit_point(zeta)?;
    unit_point(center)?;
    if zeta.dim() != n || center.dim() != n {
        return Err(LabError::DimensionMismatch { expected: n, got: zeta.dim().min(center.dim()) });
    }
    if center.distance(zeta) >= radius {
        return Err(LabError::Inconsistent(format!("pole {zeta} lies outside the cap")));
    }
    let f = HoloFn::singular(SingularFunctionSpec::cauchy(zeta.clone())?)?;
    let p = n as f64;
    let grid = ApproachGrid::default_zonal();
    let cap_scan = local_scan_ball(&f, p, center, radius.min(2.0), false, &grid, cfg);
    let cap = classify(&cap_scan);
    let cap_divergent = cap.class.is_divergent() && cap_scan.failure.is_none();
    if radius >= 2.0 {
        // the cap is the whole sphere and the complement is empty
        let complement = DivergenceVerdict {
            class: DivergenceClass::Bounded,
            rate: 0.0,
            r2: 0.0,
            sup: Some(0.0),
            power_fit: None,
            log_fit: None,
            usable_points: 0,
            note: "empty complement".into(),
        };
        return Ok(LocalBoundReport {
            alpha: f64::INFINITY,
            bound: 0.0,
            measured_sup: 0.0,
            complement,
            cap,
            complement_scan: None,
            cap_scan,
            pass: cap_divergent,
            runtime: start.elapsed(),
        });
    }
    let alpha = minimize_alpha(zeta, center, radius, 1_000_000, cfg.seed);
    if alpha <= 0.0 {
        return Err(LabError::Inconsistent(format!("alpha = {alpha} is not positive")));
    }
    let bound = sphere_area(n) / alpha.min(1.0).powi(n as i32);
    let comp_scan = local_scan_ball(&f, p, center, radius, true, &grid, cfg);
    if let Some(e) = &comp_scan.failure {
        return Err(e.clone());
    }
    let complement = classify(&comp_scan);
    let measured_sup = comp_scan.values().into_iter().fold(0.0, f64::max);
    let pass = measured_sup <= bound * 1.05 && complement.class == DivergenceClass::Bounded && cap_divergent;
    Ok(LocalBoundReport {
        alpha,
        bound,
        measured_sup,
        complement,
        cap,
        complement_scan: Some(comp_scan),
        cap_scan,
        pass,
        runtime: start.elapsed(),
    })
}

/// Level grid `eps_k = 0.2 2^{-k}`, `k = 0..20`, for restricted scans whose
/// The local bound as a report: complement In, cap Out, and the measured
/// complement sup within 5% of `sigma(S)/alpha^n`.
pub fn local_bound_lemma(
    n: usize,
    zeta: &ComplexVector,
    center: &ComplexVector,
    radius: f64,
    cfg: &NormConfig,
) -> Result<LemmaReport> {
    let r = verify_local_bound(n, zeta, center, radius, cfg)?;
    let mut report = LemmaReport::new("2.5", cfg);
    let label = exponent_label(n as f64);
    if let Some(s) = r.complement_scan.clone() {
        report.push_scan(format!("complement p={label}"), Expectation::inside(), s);
    }
    report.push_scan(format!("cap p={label}"), Expectation::outside(), r.cap_scan.clone());
    report.checks.push(Check::at_most("complement sup", r.measured_sup, 1.05 * r.bound));
    report.measurements.push(("alpha".into(), r.alpha));
    report.measurements.push(("bound".into(), r.bound));
    report.runtime = r.runtime;
    Ok(report)
}

/// limits are approached like `eps^{1/2}`.
pub fn restricted_level_grid() -> ApproachGrid {
    ApproachGrid::Level { eps0: 0.2, k_min: 0, k_max: 20 }
}

/// Deepest admissible level grid, used to locate critical exponents.
pub fn deep_level_grid() -> ApproachGrid {
    ApproachGrid::Level { eps0: 0.2, k_min: 0, k_max: 27 }
}

/// Inputs of one containment check between two defining functions.
#[derive(Debug, Clone, PartialEq)]
pub struct ContainmentCase {
    pub rho: Domain,
    pub lambda: Domain,
    pub zeta: ComplexVector,
    pub f: HoloFn,
    pub p: f64,
    /// Radius of `U = B(zeta, u)` for the `rho` levels.
    pub u_radius: f64,
    /// Radius of `V = B(zeta, v)` for the `lambda` levels.
    pub v_radius: f64,
    pub grid: ApproachGrid,
}

/// Sup of the `lambda`-level scan over `V` against the sup of the `rho`-level
/// scan over `U`, reported as `kappa`.
pub fn verify_lemma_3_1(case: &ContainmentCase, cfg: &NormConfig) -> Result<LemmaReport> {
    let start = Instant::now();
    let mut report = LemmaReport::new("3.1", cfg);
    if !(case.v_radius > 0.0 && case.v_radius <= case.u_radius) {
        return Err(LabError::InvalidParameter("need 0 < v <= u".into()));
    }
    if (case.rho.rho(&case.zeta)).abs() > 1e-12 {
        return Err(LabError::OutsideDomain(format!("{} is not a boundary point", case.zeta)));
    }
    // both functions must cut out the same domain
    let boundary = boundary_dense_sequence(&case.rho, 256, mix_seed(cfg.seed, 0x31))?;
    let mut worst = 0.0f64;
    let mut inside = true;
    for w in &boundary {
        worst = worst.max(case.lambda.rho(w).abs());
        let z = w.scaled_real(0.9);
        inside &= case.lambda.rho(&z) < 0.0 && case.rho.rho(&z) < 0.0;
    }
    report.checks.push(Check::at_most("lambda on the rho boundary", worst, 1e-10));
    report.checks.push(Check::flag("common interior", if inside { 1.0 } else { 0.0 }, inside));
    let u = BallRegion::new(case.zeta.clone(), case.u_radius)?;
    let v = BallRegion::new(case.zeta.clone(), case.v_radius)?;
    let rho_scan = level_scan_domain(&case.f, case.p, &case.rho, LevelMethod::Parametrized, &case.grid, Some(u), cfg);
    let rho_pass = report.push_scan(format!("rho U p={}", exponent_label(case.p)), Expectation::inside(), rho_scan).pass;
    if !rho_pass {
        report.measurements.push(("kappa".into(), f64::NAN));
        report.runtime = start.elapsed();
        return Ok(report);
    }
    let lambda_scan =
        level_scan_domain(&case.f, case.p, &case.lambda, LevelMethod::Parametrized, &case.grid, Some(v), cfg);
    report.push_scan(format!("lambda V p={}", exponent_label(case.p)), Expectation::inside(), lambda_scan);
    let sup_of = |s: &NormScan| {
        s.points
            .iter()
            .map(|pt| (pt.estimate.value, pt.estimate.relative_error()))
            .fold((0.0, 0.0), |a, b| if b.0 > a.0 { b } else { a })
    };
    let (sr, er) = sup_of(&report.cases[0].scan);
    let (sl, el) = sup_of(&report.cases[1].scan);
    let kappa = sl / sr;
    let rel = (er * er + el * el).sqrt();
    let identity = case.rho == case.lambda && case.u_radius == case.v_radius;
    if identity {
        report.checks.push(Check::at_most("kappa", kappa, 1.0 + 3.0 * rel));
    } else {
        report.checks.push(Check::flag("kappa", kappa, kappa.is_finite() && kappa > 0.0));
    }
    report.measurements.push(("kappa".into(), kappa));
    report.measurements.push(("kappa relative stderr".into(), rel));
    report.measurements.push(("rho U sup".into(), sr));
    report.measurements.push(("lambda V sup".into(), sl));
    report.runtime = start.elapsed();
    Ok(report)
}

/// The three containment cases on the ellipsoid `a = (1, 2)` at `zeta = (1, 0)`:
/// the identity, `lambda = 2 rho` and `lambda = e^{x_1} rho`.
pub fn containment_suite(cfg: &NormConfig) -> Result<Vec<LemmaReport>> {
    let rho = Domain::ellipsoid(vec![1.0, 2.0])?;
    let zeta = ComplexVector::basis(2, 0);
    let f = HoloFn::singular(SingularFunctionSpec::levi_reciprocal(rho.clone(), zeta.clone())?)?;
    let lambdas = [
        (rho.clone(), 0.4),
        (crate::geometry::parse_domain("rescaled:base=ellipsoid:a=1,2;c=2")?, 0.2),
        (crate::geometry::parse_domain("warped:base=ellipsoid:a=1,2;u=x1")?, 0.2),
    ];
    lambdas
        .into_iter()
        .map(|(lambda, v_radius)| {
            let case = ContainmentCase {
                rho: rho.clone(),
                lambda,
                zeta: zeta.clone(),
                f: f.clone(),
                p: 1.5,
                u_radius: 0.4,
                v_radius,
                grid: restricted_level_grid(),
            };
            verify_lemma_3_1(&case, cfg)
        })
        .collect()
}

/// Outcome of a critical-exponent bisection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalExponent {
    /// Largest exponent seen without detected divergence.
    pub below: f64,
    /// Smallest exponent seen with detected divergence.
    pub above: f64,
    pub runs: usize,
}

impl CriticalExponent {
    pub fn estimate(&self) -> f64 {
        0.5 * (self.below + self.above)
    }
}

/// Whether a scan shows divergence: log or power growth, or, when no model
/// fits, a convex trend in `k` rather than a saturating one.
pub fn divergence_onset(scan: &NormScan) -> bool {
    let v = classify(scan);
    match v.class {
        DivergenceClass::Bounded => false,
        DivergenceClass::LogDivergent | DivergenceClass::PowerDivergent => true,
        DivergenceClass::Inconclusive => growth_curvature(scan).is_some_and(|c| c >= 0.0),
    }
}

/// Bisection on `p` for the onset of divergence.
pub fn bisect_critical_exponent(
    lo: f64,
    hi: f64,
    tolerance: f64,
    max_runs: usize,
    mut divergent: impl FnMut(f64) -> bool,
) -> CriticalExponent {
    let mut out = CriticalExponent { below: lo, above: hi, runs: 0 };
    while out.above - out.below > tolerance && out.runs < max_runs {
        let mid = 0.5 * (out.below + out.above);
        out.runs += 1;
        if divergent(mid) {
            out.above = mid;
        } else {
            out.below = mid;
        }
    }
    out
}

fn levi_ready(domain: &Domain, zeta: &ComplexVector) -> Result<usize> {
    if !domain.has_parametrized_levels() {
        return Err(LabError::UnsupportedDomain(format!("{domain} is not an ellipsoid")));
    }
    if domain.dim() != zeta.dim() {
        return Err(LabError::DimensionMismatch { expected: domain.dim(), got: zeta.dim() });
    }
    Ok(domain.dim())
}

fn agreement_check(report: &mut LemmaReport, name: &str, a: &NormScan, b: &NormScan) {
    let mut worst = 0.0f64;
    for (x, y) in a.points.iter().zip(&b.points) {
        let se = (x.estimate.stderr.powi(2) + y.estimate.stderr.powi(2)).sqrt();
        let diff = (x.estimate.value - y.estimate.value).abs();
        let z = if se > 0.0 { diff / se } else if diff == 0.0 { 0.0 } else { f64::INFINITY };
        worst = worst.max(z);
    }
    let complete = a.failure.is_none() && b.failure.is_none() && a.points.len() == b.points.len();
    report.checks.push(Check {
        name: name.into(),
        value: worst,
        bound: 3.0,
        pass: complete && worst <= 3.0,
    });
}

/// `1/Q` on an ellipsoid: In at `p = 1.5`, Out at `p = 2n - 1`, methods agree
/// for `eps >= 0.0125`, and the critical exponent is located by bisection.
pub fn verify_lemma_4_2(domain: &Domain, zeta: &ComplexVector, cfg: &NormConfig) -> Result<LemmaReport> {
    let start = Instant::now();
    let n = levi_ready(domain, zeta)?;
    let mut report = LemmaReport::new("4.2", cfg);
    let f = HoloFn::singular(SingularFunctionSpec::levi_reciprocal(domain.clone(), zeta.clone())?)?;
    let grid = ApproachGrid::default_level();
    let coarse = ApproachGrid::level(0.2, 0, 4)?;
    let top = (2 * n - 1) as f64;
    for (p, expected) in [(1.5, Expectation::inside()), (top, Expectation::outside_with(DivergenceClass::PowerDivergent))] {
        let s = level_scan_domain(&f, p, domain, LevelMethod::Parametrized, &grid, None, cfg);
        report.push_scan(format!("levi p={}", exponent_label(p)), expected, s);
        let mut mc = cfg.clone();
        mc.prefer_zonal = false;
        let par = level_scan_domain(&f, p, domain, LevelMethod::Parametrized, &coarse, None, &mc);
        let shell = level_scan_domain(&f, p, domain, LevelMethod::ThinShell, &coarse, None, cfg);
        agreement_check(&mut report, &format!("methods agree p={}", exponent_label(p)), &par, &shell);
    }
    let deep = deep_level_grid();
    let crit = bisect_critical_exponent(1.5, top, 0.1, 8, |p| {
        let s = level_scan_domain(&f, p, domain, LevelMethod::Parametrized, &deep, None, cfg);
        divergence_onset(&s)
    });
    report.measurements.push(("critical exponent".into(), crit.estimate()));
    report.measurements.push(("critical below".into(), crit.below));
    report.measurements.push(("critical above".into(), crit.above));
    report.runtime = start.elapsed();
    Ok(report)
}

/// Levi power `F^{-n/q}`: In at `p = 0.8q`, Out at `p = (2n-1)q/n` on `U = B(zeta, 0.4)`,
/// and the `0.8q` scan matches the `1/Q` scan at exponent `0.8n`.
pub fn verify_lemma_4_3(domain: &Domain, zeta: &ComplexVector, q: f64, cfg: &NormConfig) -> Result<LemmaReport> {
    let start = Instant::now();
    let n = levi_ready(domain, zeta)?;
    let nf = n as f64;
    if !(q > 1.0 && q < nf) {
        return Err(LabError::InvalidParameter(format!("q must lie in (1, {n}), got {q}")));
    }
    let mut report = LemmaReport::new("4.3", cfg);
    let h = HoloFn::singular(SingularFunctionSpec::levi_power(domain.clone(), zeta.clone(), q)?)?;
    let recip = HoloFn::singular(SingularFunctionSpec::levi_reciprocal(domain.clone(), zeta.clone())?)?;
    let grid = ApproachGrid::default_level();
    let low = 0.8 * q;
    let s = level_scan_domain(&h, low, domain, LevelMethod::Parametrized, &grid, None, cfg);
    let reference = level_scan_domain(&recip, 0.8 * nf, domain, LevelMethod::Parametrized, &grid, None, cfg);
    agreement_check(&mut report, "modulus identity", &s, &reference);
    report.push_scan(format!("levipower p={}", exponent_label(low)), Expectation::inside(), s);
    let high = (2.0 * nf - 1.0) * q / nf;
    let u = BallRegion::new(zeta.clone(), 0.4)?;
    let s = level_scan_domain(&h, high, domain, LevelMethod::Parametrized, &grid, Some(u), cfg);
    report.push_scan(format!("levipower U p={}", exponent_label(high)), Expectation::outside(), s);
    report.runtime = start.elapsed();
    Ok(report)
}

/// Harmonic kernel on the real ball: In at `0.85t`, Out at `t`, power growth
/// at `1.15t`, `t = (n-1)/(n-2)`, and Out at `t` on `U = B(y, 0.4)`.
pub fn verify_lemma_5_1(n: usize, y: &[f64], cfg: &NormConfig) -> Result<LemmaReport> {
    let start = Instant::now();
    if !(3..=5).contains(&n) || y.len() != n {
        return Err(LabError::InvalidParameter(format!("need n in 3..=5 and y in R^{n}")));
    }
    let mut report = LemmaReport::new("5.1", cfg);
    let t = (n as f64 - 1.0) / (n as f64 - 2.0);
    let grid = ApproachGrid::default_level();
    let cases = [
        (0.85 * t, None, Expectation::inside()),
        (t, None, Expectation::outside()),
        (1.15 * t, None, Expectation::outside_with(DivergenceClass::PowerDivergent)),
        (t, Some(0.4), Expectation::outside()),
    ];
    for (p, restriction, expected) in cases {
        let s = harmonic_scan(y, p, &grid, restriction);
        let label = match restriction {
            None => format!("harmonic n={n} p={}", exponent_label(p)),
            Some(r) => format!("harmonic n={n} U=B(y,{r}) p={}", exponent_label(p)),
        };
        report.push_scan(label, expected, s);
    }
    report.runtime = start.elapsed();
    Ok(report)
}

/// Radii `r_m = 1 - 10^{-m/2}`, `m = 1..=18`.
pub fn default_probe_radii() -> Vec<f64> {
    (1..=18).map(|m| 1.0 - 10f64.powf(-(m as f64) / 2.0)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct WitnessProbe {
    pub z: ComplexVector,
    pub r: f64,
    pub modulus: f64,
    /// `rho(z) = |z|^2 - 1`.
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WitnessEntry {
    pub target: ComplexVector,
    pub probe: Option<WitnessProbe>,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WitnessReport {
    pub bound: f64,
    pub entries: Vec<WitnessEntry>,
    /// Metric distance to the base function, for density constructions.
    pub metric_distance: Option<f64>,
}

impl WitnessReport {
    pub fn all_found(&self) -> bool {
        self.entries.iter().all(|e| e.probe.is_some())
    }
}

/// Probes `z = r zeta` along the inward ray for `|f(z)| > bound`, re-evaluating
/// every success.
pub fn totally_unbounded_witness(
    f: &HoloFn,
    targets: &[ComplexVector],
    bound: f64,
    radii: &[f64],
) -> Result<WitnessReport> {
    if !(bound > 0.0) {
        return Err(LabError::InvalidParameter("witness bound must be positive".into()));
    }
    let mut entries = Vec::with_capacity(targets.len());
    for target in targets {
        unit_point(target)?;
        let mut entry = WitnessEntry { target: target.clone(), probe: None, note: String::new() };
        for &r in radii {
            let z = target.scaled_real(r);
            match f.eval(&z) {
                Ok(v) if v.norm() > bound => {
                    let again = f.eval(&z)?.norm();
                    let rho = z.norm_sqr() - 1.0;
                    if again > bound && rho < 0.0 {
                        entry.probe = Some(WitnessProbe { z, r, modulus: again, rho });
                        break;
                    }
                }
                Ok(_) => {}
                Err(e) => {
                    entry.note = format!("evaluation failed at r = {r}: {e}");
                    break;
                }
            }
        }
        if entry.probe.is_none() && entry.note.is_empty() {
            entry.note = "schedule exhausted".into();
        }
        entries.push(entry);
    }
    Ok(WitnessReport { bound, entries, metric_distance: None })
}

/// Result of perturbing a base function by small multiples of power kernels.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityReport {
    pub coefficient: f64,
    pub halvings: usize,
    pub points: Vec<ComplexVector>,
    pub kernel_seminorm: f64,
    pub metric: MetricValue,
    /// Grid-free upper bound on `d(f, g)` from Minkowski and the boundary norms of `phi_q`.
    pub metric_bound: f64,
    pub witness: WitnessReport,
    pub delta: f64,
    pub pass: bool,
    pub runtime: Duration,
}

/// Witness bound used by the density construction.
pub const DENSITY_WITNESS_BOUND: f64 = 1e3;

/// Deepest radial level of the density metric scans. Sums of kernels near the
/// critical exponent need this range to separate log growth from power growth.
pub const DENSITY_METRIC_K_MAX: u32 = 20;

/// Builds `f = g + c sum_{j<=J} phi_{q, w_j}` with `d(f, g) < delta` and checks
/// that `|f|` exceeds the witness bound near every `w_j`.
pub fn density_demo(
    g: &HoloFn,
    n: usize,
    q: f64,
    delta: f64,
    count: usize,
    metric_terms: usize,
    cfg: &NormConfig,
) -> Result<DensityReport> {
    let start = Instant::now();
    if count == 0 || !(delta > 0.0) {
        return Err(LabError::InvalidParameter("need J >= 1 and delta > 0".into()));
    }
    g.check_dim(n)?;
    let ball = Domain::unit_ball(n)?;
    let points = boundary_dense_sequence(&ball, count, mix_seed(cfg.seed, 0xde45))?;
    let kernels = points
        .iter()
        .map(|w| HoloFn::singular(SingularFunctionSpec::power(w.clone(), q)?))
        .collect::<Result<Vec<_>>>()?;
    let spec = IntersectionMetricSpec::standard(Some(q), metric_terms)?;
    let grid = ApproachGrid::radial(2, DENSITY_METRIC_K_MAX)?;
    let sphere = SurfaceSpec::Sphere { n };
    let p_last = *spec.exponents.last().unwrap();
    let kernel_scan = scan(&kernels[0], p_last, &grid, &sphere, cfg);
    if let Some(e) = &kernel_scan.failure {
        return Err(e.clone());
    }
    let kernel_seminorm = kernel_scan.sup_root().0;
    let sum = kernels.iter().fold(HoloFn::zero(), |acc, k| acc.add(k));
    // seminorms scale linearly in c, so the unit sum is scanned once
    let unit = intersection_metric(&sum, &HoloFn::zero(), &spec, &grid, &sphere, cfg)?;
    let metric_at = |c: f64| -> (f64, f64) {
        let mut value = 0.0;
        let mut unc = spec.tail_bound();
        for (j, t) in unit.terms.iter().enumerate() {
            let w = 2f64.powi(-(j as i32 + 1));
            let s = c * t.seminorm;
            value += w * s / (1.0 + s);
            unc += w * c * t.seminorm_stderr / (1.0 + s).powi(2);
        }
        (value, unc)
    };
    let mut c = delta / (4.0 * count as f64 * (1.0 + kernel_seminorm));
    let mut halvings = 0;
    loop {
        let (v, u) = metric_at(c);
        if v + u < delta {
            break;
        }
        c *= 0.5;
        halvings += 1;
        if c < 1e-300 || halvings > 1100 {
            return Err(LabError::CoefficientSearch(format!(
                "no coefficient reaches d < {delta}; smallest tried {c:e}"
            )));
        }
    }
    let f = g.add(&sum.scale(Complex64::new(c, 0.0)));
    let metric = intersection_metric(&f, g, &spec, &grid, &sphere, cfg)?;
    let mut metric_bound = spec.tail_bound();
    for (j, &p) in spec.exponents.iter().enumerate() {
        let t = c * count as f64 * power_kernel_boundary_norm(n, q, p)?;
        metric_bound += 2f64.powi(-(j as i32 + 1)) * t / (1.0 + t);
    }
    let mut witness = totally_unbounded_witness(&f, &points, DENSITY_WITNESS_BOUND, &default_probe_radii())?;
    witness.metric_distance = Some(metric.value);
    let pass = metric.value < delta && witness.all_found();
    Ok(DensityReport {
        coefficient: c,
        halvings,
        points,
        kernel_seminorm,
        metric,
        metric_bound,
        witness,
        delta,
        pass,
        runtime: start.elapsed(),
    })
}

/// The density construction as a report: metric below `delta` and a witness
/// modulus above the bound near every point.
pub fn density_lemma(
    g: &HoloFn,
    n: usize,
    q: f64,
    delta: f64,
    count: usize,
    metric_terms: usize,
    cfg: &NormConfig,
) -> Result<LemmaReport> {
    let r = density_demo(g, n, q, delta, count, metric_terms, cfg)?;
    let mut report = LemmaReport::new("density", cfg);
    report.checks.push(Check::flag("metric below delta", r.metric.value, r.metric.value < delta));
    for (i, e) in r.witness.entries.iter().enumerate() {
        let modulus = e.probe.as_ref().map_or(0.0, |p| p.modulus);
        report.checks.push(Check::flag(format!("witness {}", i + 1), modulus, modulus > r.witness.bound));
    }
    report.measurements.push(("coefficient".into(), r.coefficient));
    report.measurements.push(("metric uncertainty".into(), r.metric.uncertainty));
    report.measurements.push(("metric bound".into(), r.metric_bound));
    report.measurements.push(("unresolved terms".into(), r.metric.unresolved as f64));
    report.runtime = r.runtime;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::parse_holomorphic;
    use approx::assert_relative_eq;

    #[test]
    fn alpha_matches_cap_geometry() {
        let zeta = ComplexVector::basis(2, 0);
        for eps in [0.3, 0.5, 1.0] {
            let a = minimize_alpha(&zeta, &zeta, eps, 20_000, 1);
            assert_relative_eq!(a, eps * eps / 2.0, max_relative = 1e-9);
        }
        let all = ComplexVector::basis(2, 1);
        assert_eq!(minimize_alpha(&zeta, &all, 2.5, 1000, 1), f64::INFINITY);
    }

    #[test]
    fn bisection_halves_until_tolerance() {
        let c = bisect_critical_exponent(1.5, 3.0, 0.1, 8, |p| p > 2.0);
        assert!(c.below <= 2.0 && 2.0 <= c.above);
        assert!(c.above - c.below <= 0.1);
        assert_eq!(c.runs, 4);
        let capped = bisect_critical_exponent(0.0, 100.0, 1e-9, 8, |p| p > 2.0);
        assert_eq!(capped.runs, 8);
    }

    #[test]
    fn witness_schedule_closed_forms() {
        let zeta = ComplexVector::basis(2, 0);
        let radii = default_probe_radii();
        let h = parse_holomorphic("log:zeta=1,0").unwrap();
        let rep = totally_unbounded_witness(&h, &[zeta.clone()], 10.0, &radii).unwrap();
        let probe = rep.entries[0].probe.as_ref().unwrap();
        // log(1/(1-r)) first exceeds 10 at 1 - r = 10^{-4.5}
        assert_relative_eq!(1.0 - probe.r, 10f64.powf(-4.5), max_relative = 1e-9);
        let phi = parse_holomorphic("power:q=1.5;zeta=1,0").unwrap();
        let rep = totally_unbounded_witness(&phi, &[zeta.clone()], 1e3, &radii).unwrap();
        let probe = rep.entries[0].probe.as_ref().unwrap();
        assert_relative_eq!(1.0 - probe.r, 10f64.powf(-2.5), max_relative = 1e-9);
        assert!(probe.modulus > 1e3 && probe.rho < 0.0);
        let one = parse_holomorphic("const:1").unwrap();
        let rep = totally_unbounded_witness(&one, &[zeta], 2.0, &radii).unwrap();
        assert!(!rep.all_found());
    }

    #[test]
    fn harmonic_thresholds() {
        let cfg = NormConfig::default();
        for n in [3usize, 4, 5] {
            let mut y = vec![0.0; n];
            y[0] = 1.0;
            let rep = verify_lemma_5_1(n, &y, &cfg).unwrap();
            for c in &rep.cases {
                assert!(c.pass, "{}: {:?}", c.case, c.verdict);
            }
        }
    }
}
