//! Hardy-norm scans along boundary-approaching grids, divergence classification,
//! membership verdicts, seminorms and the metric on intersections of Hardy spaces.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;

use crate::error::{LabError, Result};
use crate::functions::{eval_harmonic_kernel, HoloFn};
use crate::geometry::Domain;
use crate::numerics::{gauss_legendre, ln_gamma, pairwise_sum, push_mapped_rule, real_sphere_area, sphere_area};
use crate::quadrature::{
    cap_band, integrate_cap, integrate_level_set, integrate_sphere, integrate_sphere_focused,
    rings_for_scale, Band, BallRegion, IntegralEstimate, LevelMethod, LevelOptions, Method, ZonalGrid,
    ZonalRule, DEFAULT_COUNT,
};
use crate::vector::ComplexVector;

/// Smallest admissible distance to the boundary on a grid.
pub const MIN_GAP: f64 = 1e-9;

/// Boundary-approaching grid: radii `1 - 2^{-k}` or levels `eps0 2^{-k}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ApproachGrid {
    Radial { k_min: u32, k_max: u32 },
    Level { eps0: f64, k_min: u32, k_max: u32 },
}

impl ApproachGrid {
    pub fn radial(k_min: u32, k_max: u32) -> Result<Self> {
        let g = Self::Radial { k_min, k_max };
        g.validate()?;
        Ok(g)
    }

    pub fn level(eps0: f64, k_min: u32, k_max: u32) -> Result<Self> {
        let g = Self::Level { eps0, k_min, k_max };
        g.validate()?;
        Ok(g)
    }

    /// `k = 2..29`, the deepest radial grid with `1 - r >= 1e-9`.
    pub fn default_zonal() -> Self {
        Self::Radial { k_min: 2, k_max: 29 }
    }

    /// `k = 2..12` for Monte Carlo backed scans.
    pub fn default_monte_carlo() -> Self {
        Self::Radial { k_min: 2, k_max: 12 }
    }

    /// `eps_k = 0.2 2^{-k}`, `k = 0..12`.
    pub fn default_level() -> Self {
        Self::Level { eps0: 0.2, k_min: 0, k_max: 12 }
    }

    fn validate(&self) -> Result<()> {
        let (k_min, k_max) = self.range();
        if k_min >= k_max {
            return Err(LabError::InvalidParameter(format!("empty grid range {k_min}..{k_max}")));
        }
        match self {
            Self::Radial { k_min, .. } if *k_min == 0 => {
                Err(LabError::InvalidParameter("radial grids start at k >= 1".into()))
            }
            Self::Level { eps0, .. } if !(*eps0 > 0.0 && eps0.is_finite()) => {
                Err(LabError::InvalidParameter("level grid needs eps0 > 0".into()))
            }
            _ => {
                let last = self.gap(k_max);
                if last < MIN_GAP {
                    Err(LabError::InvalidParameter(format!(
                        "grid reaches {last:e} from the boundary, below {MIN_GAP:e}"
                    )))
                } else {
                    Ok(())
                }
            }
        }
    }

    pub fn range(&self) -> (u32, u32) {
        match *self {
            Self::Radial { k_min, k_max } | Self::Level { k_min, k_max, .. } => (k_min, k_max),
        }
    }

    pub fn ks(&self) -> Vec<u32> {
        let (a, b) = self.range();
        (a..=b).collect()
    }

    pub fn len(&self) -> usize {
        let (a, b) = self.range();
        (b - a + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Distance to the boundary parameter: `1 - r_k` or `eps_k`.
    pub fn gap(&self, k: u32) -> f64 {
        match *self {
            Self::Radial { .. } => 2f64.powi(-(k as i32)),
            Self::Level { eps0, .. } => eps0 * 2f64.powi(-(k as i32)),
        }
    }

    /// Grid parameter: `r_k` or `eps_k`.
    pub fn param(&self, k: u32) -> f64 {
        match *self {
            Self::Radial { .. } => 1.0 - 2f64.powi(-(k as i32)),
            Self::Level { .. } => self.gap(k),
        }
    }

    pub fn params(&self) -> Vec<f64> {
        self.ks().into_iter().map(|k| self.param(k)).collect()
    }

    /// Parses `radial:2..29` or `level:0.2:0..12`.
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || LabError::Parse(format!("invalid grid '{s}'"));
        let range = |r: &str| -> Result<(u32, u32)> {
            let (a, b) = r.split_once("..").ok_or_else(bad)?;
            Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
        };
        let parts: Vec<&str> = s.trim().split(':').collect();
        match parts.as_slice() {
            ["radial", r] => {
                let (a, b) = range(r)?;
                Self::radial(a, b)
            }
            ["level", e, r] => {
                let (a, b) = range(r)?;
                Self::level(e.parse().map_err(|_| bad())?, a, b)
            }
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for ApproachGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Radial { k_min, k_max } => write!(f, "radial:{k_min}..{k_max}"),
            Self::Level { eps0, k_min, k_max } => write!(f, "level:{eps0}:{k_min}..{k_max}"),
        }
    }
}

/// Where the p-th power means are taken.
#[derive(Debug, Clone, PartialEq)]
pub enum SurfaceSpec {
    /// Spheres `|z| = r` in `C^n`.
    Sphere { n: usize },
    /// Dilated caps `r G`, `G = S ∩ B(center, radius)`, or their complements.
    Cap { center: ComplexVector, radius: f64, complement: bool },
    /// Level sets `{rho = -eps}`, optionally intersected with a ball.
    Level { domain: Domain, method: LevelMethod, restriction: Option<BallRegion> },
}

impl SurfaceSpec {
    pub fn dim(&self) -> usize {
        match self {
            Self::Sphere { n } => *n,
            Self::Cap { center, .. } => center.dim(),
            Self::Level { domain, .. } => domain.dim(),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::Sphere { n } => format!("sphere:n={n}"),
            Self::Cap { center, radius, complement } => {
                let kind = if *complement { "cap-complement" } else { "cap" };
                format!("{kind}:center={center};radius={radius}")
            }
            Self::Level { domain, method, restriction } => match restriction {
                None => format!("level:{};method={}", domain, method.name()),
                Some(u) => format!("level:{};method={};U=B({},{})", domain, method.name(), u.center, u.radius),
            },
        }
    }
}

/// Quadrature settings shared by scans.
#[derive(Debug, Clone, PartialEq)]
pub struct NormConfig {
    pub count: usize,
    pub seed: u64,
    pub zonal: ZonalGrid,
    pub shell_hits: usize,
    pub shell_max_proposals: u64,
    /// Use the zonal fast path on spheres and caps whenever the integrand allows.
    pub prefer_zonal: bool,
}

impl Default for NormConfig {
    fn default() -> Self {
        Self {
            count: DEFAULT_COUNT,
            seed: 7,
            zonal: ZonalGrid::default(),
            shell_hits: 20_000,
            shell_max_proposals: 400_000_000,
            prefer_zonal: true,
        }
    }
}

impl NormConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }
}

/// One grid point of a scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanPoint {
    pub k: u32,
    pub param: f64,
    pub estimate: IntegralEstimate,
}

/// Integrals `I_k` along a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct NormScan {
    pub p: f64,
    pub grid: ApproachGrid,
    pub points: Vec<ScanPoint>,
    pub function: String,
    pub surface: String,
    /// Error that truncated the scan, if any.
    pub failure: Option<LabError>,
}

impl NormScan {
    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|pt| pt.estimate.value).collect()
    }

    pub fn is_complete(&self) -> bool {
        self.failure.is_none() && self.points.len() == self.grid.len()
    }

    /// `max_k I_k^{1/p}` and its propagated standard error.
    pub fn sup_root(&self) -> (f64, f64) {
        let mut best = (0.0, 0.0);
        for pt in &self.points {
            let v = pt.estimate.value.max(0.0);
            let root = v.powf(1.0 / self.p);
            if root > best.0 {
                let err = if v > 0.0 { root * pt.estimate.stderr / (self.p * v) } else { 0.0 };
                best = (root, err);
            }
        }
        best
    }
}

/// Over `r S` with unnormalized measure: `int |f(r z)|^p dsigma(z)`.
pub fn radial_integral(
    f: &HoloFn,
    p: f64,
    r: f64,
    surface: &SurfaceSpec,
    cfg: &NormConfig,
) -> Result<IntegralEstimate> {
    let plan = RadialPlan::new(f, surface, cfg)?;
    plan.integrate(f, p, r, cfg.seed)
}

struct RadialPlan {
    n: usize,
    zonal: Option<(ComplexVector, ZonalRule)>,
    cap: Option<(ComplexVector, f64, bool)>,
    centers: Vec<Vec<Complex64>>,
    count: usize,
}

impl RadialPlan {
    fn new(f: &HoloFn, surface: &SurfaceSpec, cfg: &NormConfig) -> Result<Self> {
        let n = surface.dim();
        f.check_dim(n)?;
        let axis = if cfg.prefer_zonal { f.zonal_axis(n) } else { None };
        let (zonal, cap) = match surface {
            SurfaceSpec::Sphere { .. } => {
                let z = match axis {
                    Some(a) => Some((a, ZonalRule::new(n, &cfg.zonal, Band::full())?)),
                    None => None,
                };
                (z, None)
            }
            SurfaceSpec::Cap { center, radius, complement } => {
                let c = center.normalized()?;
                let (lo, hi) = cap_band(*radius, *complement)?;
                let parallel = axis.map(|a| (a.pairing(&c).norm() - 1.0).abs() < 1e-12).unwrap_or(false);
                let z = if parallel {
                    Some((c.clone(), ZonalRule::new(n, &cfg.zonal, Band { lo, hi })?))
                } else {
                    None
                };
                (z, Some((c, *radius, *complement)))
            }
            SurfaceSpec::Level { .. } => {
                return Err(LabError::InvalidParameter("radial integrals need a sphere or cap".into()))
            }
        };
        let centers = f.singular_centers().into_iter().map(|c| c.into_inner()).collect();
        Ok(Self { n, zonal, cap, centers, count: cfg.count })
    }

    fn integrate(&self, f: &HoloFn, p: f64, r: f64, seed: u64) -> Result<IntegralEstimate> {
        if !(r > 0.0 && r < 1.0) {
            return Err(LabError::InvalidParameter(format!("radius {r} not in (0, 1)")));
        }
        if !(p >= 1.0 && p.is_finite()) {
            return Err(LabError::InvalidParameter(format!("exponent {p} must be >= 1")));
        }
        if let Some((axis, rule)) = &self.zonal {
            let g = |l: Complex64| -> Result<f64> {
                let z: Vec<Complex64> = axis.iter().map(|a| a * (l * r)).collect();
                Ok(f.eval(&z)?.norm().powf(p))
            };
            return rule.integrate(&g);
        }
        let g = |z: &[Complex64]| -> Result<f64> {
            let w: Vec<Complex64> = z.iter().map(|c| c * r).collect();
            Ok(f.eval(&w)?.norm().powf(p))
        };
        let est = match &self.cap {
            Some((c, radius, complement)) => integrate_cap(&g, c, *radius, *complement, self.count, seed)?,
            None if !self.centers.is_empty() => {
                integrate_sphere_focused(&g, &self.centers, rings_for_scale(1.0 - r), self.count, seed)?
            }
            None => integrate_sphere(&g, self.n, self.count, seed)?,
        };
        // plain Monte Carlo undersamples the boundary singularity; refuse noisy estimates
        if 1.0 - r < 1e-2 && est.relative_error() > 0.02 {
            return Err(LabError::VarianceGuard(est.relative_error()));
        }
        Ok(est)
    }
}

/// Level-set integral of `|f|^p`.
#[allow(clippy::too_many_arguments)]
pub fn level_integral(
    f: &HoloFn,
    p: f64,
    eps: f64,
    domain: &Domain,
    method: LevelMethod,
    restriction: Option<&BallRegion>,
    cfg: &NormConfig,
    seed: u64,
) -> Result<IntegralEstimate> {
    LevelPlan::new(f, domain, method, restriction, cfg)?.integrate(f, p, eps, seed)
}

struct LevelPlan<'a> {
    domain: &'a Domain,
    method: LevelMethod,
    restriction: Option<&'a BallRegion>,
    /// Spherical levels of a zonal integrand: axis, rule, `a` and `c` of `c (a|z|^2 - 1)`.
    zonal: Option<(ComplexVector, ZonalRule, f64, f64)>,
    opts: LevelOptions,
}

impl<'a> LevelPlan<'a> {
    fn new(
        f: &HoloFn,
        domain: &'a Domain,
        method: LevelMethod,
        restriction: Option<&'a BallRegion>,
        cfg: &NormConfig,
    ) -> Result<Self> {
        let n = domain.dim();
        f.check_dim(n)?;
        let mut opts = LevelOptions::new(cfg.count, cfg.seed);
        opts.shell_hits = cfg.shell_hits;
        opts.shell_max_proposals = cfg.shell_max_proposals;
        opts.restriction = restriction.cloned();
        opts.focus = f.singular_centers();
        let mut zonal = None;
        if cfg.prefer_zonal && method == LevelMethod::Parametrized && restriction.is_none() {
            let weights = domain.defining().core_weights();
            let round = weights.iter().all(|&a| a == weights[0]);
            if let (true, Some(c), Some(axis)) = (round, domain.defining().quadratic_scale(), f.zonal_axis(n)) {
                zonal = Some((axis, ZonalRule::new(n, &cfg.zonal, Band::full())?, weights[0], c));
            }
        }
        Ok(Self { domain, method, restriction, zonal, opts })
    }

    fn integrate(&self, f: &HoloFn, p: f64, eps: f64, seed: u64) -> Result<IntegralEstimate> {
        if !(p >= 1.0 && p.is_finite()) {
            return Err(LabError::InvalidParameter(format!("exponent {p} must be >= 1")));
        }
        if let Some((axis, rule, a, c)) = &self.zonal {
            let eps_max = self.domain.eps_max();
            if !(eps > 0.0 && eps < eps_max) {
                return Err(LabError::LevelOutOfRange { eps, eps_max });
            }
            // the level is the sphere of radius sqrt((1 - eps/c)/a)
            let radius = ((1.0 - eps / c) / a).sqrt();
            let g = |l: Complex64| -> Result<f64> {
                let z: Vec<Complex64> = axis.iter().map(|x| x * (l * radius)).collect();
                Ok(f.eval(&z)?.norm().powf(p))
            };
            let e = rule.integrate(&g)?;
            let jac = radius.powi(2 * self.domain.dim() as i32 - 1);
            return Ok(IntegralEstimate::new(e.value * jac, e.stderr * jac, e.count, Method::Zonal, e.overflowed));
        }
        let mut opts = self.opts.clone();
        opts.seed = seed;
        debug_assert_eq!(opts.restriction.as_ref(), self.restriction);
        let g = |z: &[Complex64]| -> Result<f64> { Ok(f.eval(z)?.norm().powf(p)) };
        integrate_level_set(&g, self.domain, eps, self.method, &opts)
    }
}

fn point_seed(seed: u64, k: u32) -> u64 {
    crate::numerics::mix_seed(seed, 0x5ca0_0000 + k as u64)
}

/// Integrals of `|f|^p` along the grid over the given surfaces.
pub fn scan(f: &HoloFn, p: f64, grid: &ApproachGrid, surface: &SurfaceSpec, cfg: &NormConfig) -> NormScan {
    let mut out = NormScan {
        p,
        grid: *grid,
        points: Vec::with_capacity(grid.len()),
        function: f.label(),
        surface: surface.label(),
        failure: None,
    };
    let result = (|| -> Result<()> {
        match (grid, surface) {
            (ApproachGrid::Radial { .. }, SurfaceSpec::Sphere { .. } | SurfaceSpec::Cap { .. }) => {
                let plan = RadialPlan::new(f, surface, cfg)?;
                for k in grid.ks() {
                    let r = grid.param(k);
                    let estimate = plan.integrate(f, p, r, point_seed(cfg.seed, k))?;
                    out.points.push(ScanPoint { k, param: r, estimate });
                }
                Ok(())
            }
            (ApproachGrid::Level { .. }, SurfaceSpec::Level { domain, method, restriction }) => {
                let plan = LevelPlan::new(f, domain, *method, restriction.as_ref(), cfg)?;
                for k in grid.ks() {
                    let eps = grid.param(k);
                    let estimate = plan.integrate(f, p, eps, point_seed(cfg.seed, k))?;
                    out.points.push(ScanPoint { k, param: eps, estimate });
                }
                Ok(())
            }
            _ => Err(LabError::InvalidParameter(
                "radial grids pair with spheres or caps, level grids with level sets".into(),
            )),
        }
    })();
    if let Err(e) = result {
        out.failure = Some(e);
    }
    out
}

/// Scan over dilated caps (or their complements) of the sphere.
pub fn local_scan_ball(
    f: &HoloFn,
    p: f64,
    center: &ComplexVector,
    radius: f64,
    complement: bool,
    grid: &ApproachGrid,
    cfg: &NormConfig,
) -> NormScan {
    scan(f, p, grid, &SurfaceSpec::Cap { center: center.clone(), radius, complement }, cfg)
}

/// Scan over level sets of a defining function, optionally restricted to a ball.
pub fn level_scan_domain(
    f: &HoloFn,
    p: f64,
    domain: &Domain,
    method: LevelMethod,
    grid: &ApproachGrid,
    restriction: Option<BallRegion>,
    cfg: &NormConfig,
) -> NormScan {
    scan(f, p, grid, &SurfaceSpec::Level { domain: domain.clone(), method, restriction }, cfg)
}

/// Boundary value `lim_{r->1} (int_S |phi_{q,w}(r zeta)|^p dsigma)^{1/p}` on the unit sphere
/// of `C^n`, finite for `p < q`: `(sigma(S) Gamma(n) Gamma(n-s) / Gamma(n-s/2)^2)^{1/p}`, `s = np/q`.
pub fn power_kernel_boundary_norm(n: usize, q: f64, p: f64) -> Result<f64> {
    if n == 0 || !(q > 1.0) || !(p > 0.0) {
        return Err(LabError::InvalidParameter(format!("need n >= 1, q > 1, p > 0; got n = {n}, q = {q}, p = {p}")));
    }
    if p >= q {
        return Err(LabError::NotInHp { p, verdict: format!("phi_q with q = {q} is unbounded in H^p") });
    }
    let nf = n as f64;
    let s = nf * p / q;
    let ln = sphere_area(n).ln() + ln_gamma(nf) + ln_gamma(nf - s) - 2.0 * ln_gamma(nf - s / 2.0);
    Ok((ln / p).exp())
}

/// `int_{|x|^2 = 1 - eps} |x - y|^{(2-n)p} dsigma(x)` on `R^n`, optionally restricted to `|x - y| < radius`.
pub fn harmonic_level_integral(y: &[f64], p: f64, eps: f64, restriction: Option<f64>) -> Result<IntegralEstimate> {
    let n = y.len();
    if n < 3 {
        return Err(LabError::InvalidParameter("harmonic scans need n >= 3".into()));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(LabError::LevelOutOfRange { eps, eps_max: 1.0 });
    }
    let ynorm: f64 = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    if (ynorm - 1.0).abs() > 1e-12 {
        return Err(LabError::OutsideDomain("y must lie on the unit sphere".into()));
    }
    let big_r = (1.0 - eps).sqrt();
    let gap = 1.0 - big_r;
    let theta_max = match restriction {
        None => PI,
        Some(rad) => {
            // (1 - R)^2 + 4 R sin^2(theta / 2) < rad^2
            let s2 = (rad * rad - gap * gap) / (4.0 * big_r);
            if s2 <= 0.0 {
                return Ok(IntegralEstimate::new(0.0, 0.0, 0, Method::Deterministic, false));
            }
            if s2 >= 1.0 {
                PI
            } else {
                2.0 * s2.sqrt().asin()
            }
        }
    };
    let expo = -0.5 * (n as f64 - 2.0) * p;
    let fibre = real_sphere_area(n - 1);
    // the sample point along theta is checked against the kernel evaluator once
    let probe_theta = 0.5 * theta_max;
    let probe_x: Vec<f64> = {
        let mut v = vec![0.0; n];
        v[0] = big_r * probe_theta.cos();
        v[1] = big_r * probe_theta.sin();
        v
    };
    let y_axis: Vec<f64> = {
        let mut v = vec![0.0; n];
        v[0] = 1.0;
        v
    };
    let kernel = eval_harmonic_kernel(&y_axis, &probe_x)?.powf(p);
    let integrand = |theta: f64| -> f64 {
        let d2 = gap * gap + 4.0 * big_r * (0.5 * theta).sin().powi(2);
        fibre * big_r.powi(n as i32 - 1) * theta.sin().powi(n as i32 - 2) * d2.powf(expo)
    };
    let d2p = gap * gap + 4.0 * big_r * (0.5 * probe_theta).sin().powi(2);
    debug_assert!((kernel - d2p.powf(expo)).abs() <= 1e-9 * kernel);
    let mut edges = vec![0.0];
    for j in (1..=50).rev() {
        let e = theta_max * 2f64.powi(-j);
        edges.push(e);
    }
    edges.push(theta_max);
    let rule = |order: usize| -> f64 {
        let (x, w) = gauss_legendre(order);
        let mut nodes = Vec::new();
        for pair in edges.windows(2) {
            push_mapped_rule(&x, &w, pair[0], pair[1], &mut nodes);
        }
        let terms: Vec<f64> = nodes.iter().map(|(t, wt)| wt * integrand(*t)).collect();
        pairwise_sum(&terms)
    };
    let fine = rule(16);
    let coarse = rule(8);
    Ok(IntegralEstimate::new(fine, (fine - coarse).abs(), 16 * 51, Method::Deterministic, false))
}

/// Scan of the harmonic kernel over level spheres `|x|^2 = 1 - eps`.
pub fn harmonic_scan(y: &[f64], p: f64, grid: &ApproachGrid, restriction: Option<f64>) -> NormScan {
    let mut out = NormScan {
        p,
        grid: *grid,
        points: Vec::new(),
        function: format!("harmonic:n={}", y.len()),
        surface: match restriction {
            None => "level:real-ball".to_string(),
            Some(r) => format!("level:real-ball;U=B(y,{r})"),
        },
        failure: None,
    };
    if !matches!(grid, ApproachGrid::Level { .. }) {
        out.failure = Some(LabError::InvalidParameter("harmonic scans use level grids".into()));
        return out;
    }
    for k in grid.ks() {
        let eps = grid.param(k);
        match harmonic_level_integral(y, p, eps, restriction) {
            Ok(estimate) => out.points.push(ScanPoint { k, param: eps, estimate }),
            Err(e) => {
                out.failure = Some(e);
                break;
            }
        }
    }
    out
}

/// Empirical growth class of a scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DivergenceClass {
    Bounded,
    LogDivergent,
    PowerDivergent,
    Inconclusive,
}

impl DivergenceClass {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Bounded => "Bounded",
            Self::LogDivergent => "LogDivergent",
            Self::PowerDivergent => "PowerDivergent",
            Self::Inconclusive => "Inconclusive",
        }
    }

    pub fn is_divergent(&self) -> bool {
        matches!(self, Self::LogDivergent | Self::PowerDivergent)
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "Bounded" => Ok(Self::Bounded),
            "LogDivergent" => Ok(Self::LogDivergent),
            "PowerDivergent" => Ok(Self::PowerDivergent),
            "Inconclusive" => Ok(Self::Inconclusive),
            other => Err(LabError::Parse(format!("unknown verdict '{other}'"))),
        }
    }
}

impl fmt::Display for DivergenceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Least-squares line `y = intercept + slope x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> LineFit {
    let m = x.len() as f64;
    if x.len() < 2 {
        return LineFit { slope: 0.0, intercept: y.first().copied().unwrap_or(0.0), r2: 0.0 };
    }
    let mx = x.iter().sum::<f64>() / m;
    let my = y.iter().sum::<f64>() / m;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return LineFit { slope: 0.0, intercept: my, r2: 0.0 };
    }
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) } else { 0.0 };
    LineFit { slope, intercept: my - slope * mx, r2 }
}

/// Classification of a scan with its fitted model.
#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceVerdict {
    pub class: DivergenceClass,
    /// Power exponent (per unit `log(1/gap)`) or log-model slope; zero otherwise.
    pub rate: f64,
    pub r2: f64,
    /// Largest value on the grid, reported for bounded scans.
    pub sup: Option<f64>,
    pub power_fit: Option<LineFit>,
    pub log_fit: Option<LineFit>,
    pub usable_points: usize,
    pub note: String,
}

pub const POWER_MIN_SLOPE: f64 = 0.05;
pub const FIT_MIN_R2: f64 = 0.98;
pub const TAIL_TOLERANCE: f64 = 0.05;
pub const MAX_RELATIVE_ERROR: f64 = 0.05;
pub const MIN_POINTS: usize = 6;

/// Classifies a scan as bounded, log-divergent or power-divergent.
///
/// Abscissae are `k log 2`, i.e. `log(1/gap)` up to a constant. The power
/// model is tried first, then the log model, then the tail test.
pub fn classify(scan: &NormScan) -> DivergenceVerdict {
    let mut verdict = DivergenceVerdict {
        class: DivergenceClass::Inconclusive,
        rate: 0.0,
        r2: 0.0,
        sup: None,
        power_fit: None,
        log_fit: None,
        usable_points: 0,
        note: String::new(),
    };
    let ln2 = std::f64::consts::LN_2;
    if scan.points.iter().any(|pt| pt.estimate.overflowed) {
        let valid: Vec<&ScanPoint> = scan
            .points
            .iter()
            .filter(|pt| !pt.estimate.overflowed && pt.estimate.value > 0.0)
            .collect();
        verdict.usable_points = valid.len();
        verdict.note = "overflow".into();
        if valid.len() >= 2 {
            let x: Vec<f64> = valid.iter().map(|pt| pt.k as f64 * ln2).collect();
            let y: Vec<f64> = valid.iter().map(|pt| pt.estimate.value.ln()).collect();
            let fit = fit_line(&x, &y);
            verdict.power_fit = Some(fit);
            verdict.r2 = fit.r2;
            if fit.slope > 0.0 {
                verdict.class = DivergenceClass::PowerDivergent;
                verdict.rate = fit.slope;
            }
        }
        return verdict;
    }
    let usable: Vec<&ScanPoint> = scan
        .points
        .iter()
        .filter(|pt| pt.estimate.value >= 0.0 && pt.estimate.relative_error() <= MAX_RELATIVE_ERROR)
        .collect();
    verdict.usable_points = usable.len();
    if usable.len() < MIN_POINTS {
        verdict.note = format!("only {} usable points", usable.len());
        return verdict;
    }
    let x: Vec<f64> = usable.iter().map(|pt| pt.k as f64 * ln2).collect();
    let v: Vec<f64> = usable.iter().map(|pt| pt.estimate.value).collect();
    if v.iter().all(|&a| a > 0.0) {
        let logs: Vec<f64> = v.iter().map(|a| a.ln()).collect();
        let fit = fit_line(&x, &logs);
        verdict.power_fit = Some(fit);
        if fit.slope > POWER_MIN_SLOPE && fit.r2 >= FIT_MIN_R2 {
            verdict.class = DivergenceClass::PowerDivergent;
            verdict.rate = fit.slope;
            verdict.r2 = fit.r2;
            return verdict;
        }
    }
    let fit = fit_line(&x, &v);
    verdict.log_fit = Some(fit);
    if fit.slope > 0.0 && fit.r2 >= FIT_MIN_R2 {
        verdict.class = DivergenceClass::LogDivergent;
        verdict.rate = fit.slope;
        verdict.r2 = fit.r2;
        return verdict;
    }
    let i23 = (2 * v.len()) / 3;
    let tail = &v[i23..];
    let tail_max = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if tail_max - v[i23] <= TAIL_TOLERANCE * tail_max {
        verdict.class = DivergenceClass::Bounded;
        verdict.sup = Some(v.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        verdict.r2 = fit.r2;
        return verdict;
    }
    verdict.note = "no model accepted".into();
    verdict.r2 = fit.r2;
    verdict
}

/// Curvature `c` of the least-squares parabola `I = a + b x + c x^2`, `x = k log 2`,
/// over the usable points of a scan. Negative values indicate saturation.
pub fn growth_curvature(scan: &NormScan) -> Option<f64> {
    let ln2 = std::f64::consts::LN_2;
    let pts: Vec<(f64, f64)> = scan
        .points
        .iter()
        .filter(|pt| !pt.estimate.overflowed && pt.estimate.relative_error() <= MAX_RELATIVE_ERROR)
        .map(|pt| (pt.k as f64 * ln2, pt.estimate.value))
        .collect();
    if pts.len() < MIN_POINTS {
        return None;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
    let design = nalgebra::DMatrix::from_fn(pts.len(), 3, |i, j| (pts[i].0 - mx).powi(j as i32));
    let rhs = nalgebra::DVector::from_iterator(pts.len(), pts.iter().map(|p| p.1));
    let coef = design.svd(true, true).solve(&rhs, 1e-14).ok()?;
    Some(coef[2])
}

/// Which norm a membership question refers to.
#[derive(Debug, Clone, PartialEq)]
pub enum SpaceSpec {
    BallHp { n: usize },
    LocalCap { center: ComplexVector, radius: f64 },
    DomainHp { domain: Domain, method: LevelMethod },
    DomainLocal { domain: Domain, method: LevelMethod, restriction: BallRegion },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Membership {
    In,
    Out,
    Inconclusive,
}

impl Membership {
    pub fn name(&self) -> &'static str {
        match self {
            Self::In => "In",
            Self::Out => "Out",
            Self::Inconclusive => "Inconclusive",
        }
    }

    pub fn from_class(class: DivergenceClass) -> Self {
        match class {
            DivergenceClass::Bounded => Self::In,
            DivergenceClass::LogDivergent | DivergenceClass::PowerDivergent => Self::Out,
            DivergenceClass::Inconclusive => Self::Inconclusive,
        }
    }
}

impl fmt::Display for Membership {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MembershipVerdict {
    pub status: Membership,
    pub verdict: DivergenceVerdict,
    pub scan: NormScan,
}

/// Decides membership from the classified scan: In iff bounded, Out iff divergent.
pub fn membership_verdict(
    f: &HoloFn,
    p: f64,
    space: &SpaceSpec,
    grid: &ApproachGrid,
    cfg: &NormConfig,
) -> MembershipVerdict {
    let surface = match space {
        SpaceSpec::BallHp { n } => SurfaceSpec::Sphere { n: *n },
        SpaceSpec::LocalCap { center, radius } => {
            SurfaceSpec::Cap { center: center.clone(), radius: *radius, complement: false }
        }
        SpaceSpec::DomainHp { domain, method } => {
            SurfaceSpec::Level { domain: domain.clone(), method: *method, restriction: None }
        }
        SpaceSpec::DomainLocal { domain, method, restriction } => SurfaceSpec::Level {
            domain: domain.clone(),
            method: *method,
            restriction: Some(restriction.clone()),
        },
    };
    verdict_of(scan(f, p, grid, &surface, cfg))
}

/// Membership of the harmonic kernel in the harmonic Hardy space (or its local version).
pub fn harmonic_membership(y: &[f64], p: f64, grid: &ApproachGrid, restriction: Option<f64>) -> MembershipVerdict {
    verdict_of(harmonic_scan(y, p, grid, restriction))
}

pub fn verdict_of(scan: NormScan) -> MembershipVerdict {
    let mut verdict = classify(&scan);
    if let Some(e) = &scan.failure {
        verdict.class = DivergenceClass::Inconclusive;
        verdict.note = format!("scan failed: {e}");
    }
    MembershipVerdict { status: Membership::from_class(verdict.class), verdict, scan }
}

/// `sup_k I_k^{1/p}` for a scan that classifies as bounded.
pub fn hardy_seminorm(
    f: &HoloFn,
    p: f64,
    grid: &ApproachGrid,
    surface: &SurfaceSpec,
    cfg: &NormConfig,
) -> Result<f64> {
    if f.is_zero() {
        return Ok(0.0);
    }
    let s = scan(f, p, grid, surface, cfg);
    if let Some(e) = s.failure.clone() {
        return Err(e);
    }
    let v = classify(&s);
    if v.class != DivergenceClass::Bounded {
        return Err(LabError::NotInHp { p, verdict: v.class.name().into() });
    }
    Ok(s.sup_root().0)
}

/// Exponents `p_1 < p_2 < ... < q` defining the metric.
#[derive(Debug, Clone, PartialEq)]
pub struct IntersectionMetricSpec {
    /// `None` stands for `q = infinity`.
    pub q: Option<f64>,
    pub exponents: Vec<f64>,
}

impl IntersectionMetricSpec {
    /// `p_j = q - (q - 1)/2^j` (or `j + 1` for infinite `q`), `j = 1..=terms`.
    pub fn standard(q: Option<f64>, terms: usize) -> Result<Self> {
        let exponents = (1..=terms)
            .map(|j| match q {
                Some(q) => q - (q - 1.0) * 2f64.powi(-(j as i32)),
                None => (j + 1) as f64,
            })
            .collect();
        Self::custom(q, exponents)
    }

    pub fn custom(q: Option<f64>, exponents: Vec<f64>) -> Result<Self> {
        if let Some(q) = q {
            if !(q > 1.0 && q.is_finite()) {
                return Err(LabError::InvalidParameter(format!("q must exceed 1, got {q}")));
            }
        }
        if exponents.is_empty() {
            return Err(LabError::InvalidParameter("metric needs at least one exponent".into()));
        }
        let increasing = exponents.windows(2).all(|w| w[0] < w[1]);
        let below = exponents.iter().all(|&p| p >= 1.0 && q.is_none_or(|q| p < q));
        if !increasing || !below {
            return Err(LabError::InvalidParameter(
                "exponents must increase strictly and stay in [1, q)".into(),
            ));
        }
        Ok(Self { q, exponents })
    }

    /// Bound on the omitted tail `sum_{j > J} 2^{-j}`.
    pub fn tail_bound(&self) -> f64 {
        2f64.powi(-(self.exponents.len() as i32))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricTerm {
    pub p: f64,
    pub seminorm: f64,
    pub seminorm_stderr: f64,
    pub class: DivergenceClass,
    pub term: f64,
}

/// A truncated metric value with its uncertainty.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricValue {
    pub value: f64,
    /// Propagated quadrature error plus the truncation tail.
    pub uncertainty: f64,
    pub terms: Vec<MetricTerm>,
    /// Terms whose scans were log-like or inconclusive; their grid supremum is used.
    pub unresolved: usize,
}

/// Truncated `d(f, g) = sum 2^{-j} s_j / (1 + s_j)` with `s_j` the grid seminorm of `f - g`.
///
/// Power-divergent terms are rejected. Scans at exponents close to `q` may look
/// log-like on a finite grid; such terms use the grid supremum and are counted
/// as unresolved.
pub fn intersection_metric(
    f: &HoloFn,
    g: &HoloFn,
    spec: &IntersectionMetricSpec,
    grid: &ApproachGrid,
    surface: &SurfaceSpec,
    cfg: &NormConfig,
) -> Result<MetricValue> {
    let h = f.sub(g);
    let mut out = MetricValue { value: 0.0, uncertainty: spec.tail_bound(), terms: Vec::new(), unresolved: 0 };
    if h.is_zero() {
        out.uncertainty = 0.0;
        return Ok(out);
    }
    let mut terms = Vec::new();
    let mut errs = Vec::new();
    for (j, &p) in spec.exponents.iter().enumerate() {
        let weight = 2f64.powi(-(j as i32 + 1));
        let s = scan(&h, p, grid, surface, cfg);
        if let Some(e) = &s.failure {
            return Err(LabError::NotInIntersection(format!("scan at p = {p} failed: {e}")));
        }
        let v = classify(&s);
        if v.class == DivergenceClass::PowerDivergent {
            return Err(LabError::NotInIntersection(format!("seminorm at p = {p} diverges")));
        }
        if v.class != DivergenceClass::Bounded {
            out.unresolved += 1;
        }
        let (sn, se) = s.sup_root();
        let term = weight * sn / (1.0 + sn);
        terms.push(term);
        errs.push(weight * se / (1.0 + sn).powi(2));
        out.terms.push(MetricTerm { p, seminorm: sn, seminorm_stderr: se, class: v.class, term });
    }
    out.value = pairwise_sum(&terms);
    out.uncertainty += pairwise_sum(&errs);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::parse_holomorphic;
    use crate::numerics::{chunk_rng, sphere_area};
    use approx::assert_relative_eq;
    use rand::Rng;

    fn synthetic(grid: ApproachGrid, values: Vec<f64>, rel: f64) -> NormScan {
        let points = grid
            .ks()
            .into_iter()
            .zip(values)
            .map(|(k, v)| ScanPoint {
                k,
                param: grid.param(k),
                estimate: IntegralEstimate::new(v, rel * v.abs(), 1000, Method::Deterministic, false),
            })
            .collect();
        NormScan { p: 2.0, grid, points, function: "synthetic".into(), surface: "synthetic".into(), failure: None }
    }

    #[test]
    fn grid_limits() {
        assert!(ApproachGrid::radial(2, 29).is_ok());
        assert!(ApproachGrid::radial(2, 30).is_err());
        assert!(ApproachGrid::level(0.2, 0, 12).is_ok());
        assert!(ApproachGrid::level(0.2, 0, 40).is_err());
        let g = ApproachGrid::parse("level:0.2:0..12").unwrap();
        assert_eq!(g, ApproachGrid::default_level());
        assert_eq!(ApproachGrid::parse(&g.to_string()).unwrap(), g);
        let params = ApproachGrid::default_zonal().params();
        assert!(params.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn synthetic_classification() {
        let grid = ApproachGrid::radial(4, 20).unwrap();
        let flat = synthetic(grid, vec![5.0; grid.len()], 0.001);
        assert_eq!(classify(&flat).class, DivergenceClass::Bounded);

        let mut rng = chunk_rng(3, 0);
        let logs: Vec<f64> = grid
            .ks()
            .iter()
            .map(|&k| 3.0 * k as f64 * std::f64::consts::LN_2 * (1.0 + 0.01 * (2.0 * rng.random::<f64>() - 1.0)))
            .collect();
        let v = classify(&synthetic(grid, logs, 0.01));
        assert_eq!(v.class, DivergenceClass::LogDivergent);
        assert!((v.rate - 3.0).abs() < 0.3);

        let powers: Vec<f64> = grid.ks().iter().map(|&k| 2f64.powf(0.5 * k as f64)).collect();
        let v = classify(&synthetic(grid, powers, 0.01));
        assert_eq!(v.class, DivergenceClass::PowerDivergent);
        assert!((v.rate - 0.5).abs() < 0.05);

        let noisy = synthetic(grid, vec![5.0; grid.len()], 0.2);
        assert_eq!(classify(&noisy).class, DivergenceClass::Inconclusive);
    }

    #[test]
    fn constant_function_scan_is_flat() {
        let f = HoloFn::constant(Complex64::new(1.0, 0.0));
        let s = scan(&f, 2.0, &ApproachGrid::radial(2, 8).unwrap(), &SurfaceSpec::Sphere { n: 2 }, &NormConfig::default());
        for pt in &s.points {
            assert_relative_eq!(pt.estimate.value, sphere_area(2), max_relative = 1e-13);
        }
        assert_eq!(classify(&s).class, DivergenceClass::Bounded);
        let norm = hardy_seminorm(&f.scale(Complex64::new(3.0, 0.0)), 2.0, &ApproachGrid::radial(2, 8).unwrap(), &SurfaceSpec::Sphere { n: 2 }, &NormConfig::default()).unwrap();
        assert_relative_eq!(norm, 3.0 * sphere_area(2).sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn cauchy_log_rate_matches_closed_form() {
        let f = parse_holomorphic("cauchy:zeta=1,0").unwrap();
        let cfg = NormConfig::default();
        for &r in &[0.5, 0.99, 1.0 - 1e-6] {
            let e = radial_integral(&f, 2.0, r, &SurfaceSpec::Sphere { n: 2 }, &cfg).unwrap();
            let exact = sphere_area(2) * (1.0 / (1.0 - r * r)).ln() / (r * r);
            assert_relative_eq!(e.value, exact, max_relative = 1e-8);
        }
    }

    #[test]
    fn harmonic_matches_closed_form_in_three_dimensions() {
        let y = [1.0, 0.0, 0.0];
        for &(p, eps) in &[(1.7, 0.1), (2.0, 1e-3), (2.3, 1e-4)] {
            let e = harmonic_level_integral(&y, p, eps, None).unwrap();
            let r: f64 = (1.0 - eps as f64).sqrt();
            let exact = PI * r * ((1.0 + r).powf(2.0 - p) - (1.0 - r).powf(2.0 - p)) / (1.0 - p / 2.0);
            let exact = if (p - 2.0).abs() < 1e-12 {
                2.0 * PI * r * ((1.0 + r) / (1.0 - r)).ln()
            } else {
                exact
            };
            assert_relative_eq!(e.value, exact, max_relative = 1e-9);
        }
    }

    #[test]
    fn metric_basics() {
        let f = parse_holomorphic("cauchy:zeta=1,0").unwrap();
        let spec = IntersectionMetricSpec::standard(Some(2.0), 4).unwrap();
        let grid = ApproachGrid::radial(2, 12).unwrap();
        let surface = SurfaceSpec::Sphere { n: 2 };
        let cfg = NormConfig::default();
        let d0 = intersection_metric(&f, &f, &spec, &grid, &surface, &cfg).unwrap();
        assert_eq!(d0.value, 0.0);
        let g = HoloFn::constant(Complex64::new(1.0, 0.0));
        let d1 = intersection_metric(&f, &g, &spec, &grid, &surface, &cfg).unwrap();
        let d2 = intersection_metric(&g, &f, &spec, &grid, &surface, &cfg).unwrap();
        assert_eq!(d1.value, d2.value);
        assert!(d1.value > 0.0 && d1.value < 1.0);
        assert!(IntersectionMetricSpec::custom(Some(2.0), vec![1.5, 1.2]).is_err());
        assert!(IntersectionMetricSpec::custom(Some(2.0), vec![1.5, 2.0]).is_err());
    }
}
