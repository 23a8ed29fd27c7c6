//! Integration over level sets `{rho = -eps}` of a defining function.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;

use super::disk::{rings_for_scale, RingGeometry};
use super::sphere::stratified_rings;
use super::{integrate_sphere_mapped, IntegralEstimate, Method};
use crate::error::{check_dim, LabError, Result};
use crate::geometry::{random_unit_vector, Domain};
use crate::numerics::{chunk_rng, factorial, mix_seed, ChunkedMoments, CHUNK};
use crate::vector::{distance, ComplexVector};

/// How a level-set integral is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LevelMethod {
    /// Exact parametrization of the level set by the unit sphere: linear for
    /// quadratic defining functions, radial for warped ones.
    Parametrized,
    /// Coarea formula on a thin shell around the level set.
    ThinShell,
}

impl LevelMethod {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "parametrized" => Ok(Self::Parametrized),
            "thin-shell" | "thinshell" => Ok(Self::ThinShell),
            other => Err(LabError::Parse(format!("unknown level method '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Parametrized => "parametrized",
            Self::ThinShell => "thin-shell",
        }
    }
}

/// An open Euclidean ball used to restrict level-set integrals.
#[derive(Debug, Clone, PartialEq)]
pub struct BallRegion {
    pub center: ComplexVector,
    pub radius: f64,
}

impl BallRegion {
    pub fn new(center: ComplexVector, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(LabError::InvalidParameter("restriction radius must be positive".into()));
        }
        Ok(Self { center, radius })
    }

    pub fn contains(&self, z: &[Complex64]) -> bool {
        distance(&self.center, z) < self.radius
    }
}

/// Settings for level-set integration.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelOptions {
    pub count: usize,
    pub seed: u64,
    /// Target number of shell hits for the thin-shell method.
    pub shell_hits: usize,
    /// Proposal cap for the thin-shell method.
    pub shell_max_proposals: u64,
    pub restriction: Option<BallRegion>,
    /// Boundary points near which the integrand concentrates.
    pub focus: Vec<ComplexVector>,
}

impl LevelOptions {
    pub fn new(count: usize, seed: u64) -> Self {
        Self {
            count,
            seed,
            shell_hits: 20_000,
            shell_max_proposals: 400_000_000,
            restriction: None,
            focus: Vec::new(),
        }
    }
}

pub(crate) fn check_level(domain: &Domain, eps: f64) -> Result<()> {
    let eps_max = domain.eps_max();
    if !(eps > 0.0 && eps < eps_max) {
        return Err(LabError::LevelOutOfRange { eps, eps_max });
    }
    Ok(())
}

/// Integrates `g` against the Euclidean surface measure of `{rho = -eps}` (within
/// the restriction, if any).
pub fn integrate_level_set(
    g: &dyn Fn(&[Complex64]) -> Result<f64>,
    domain: &Domain,
    eps: f64,
    method: LevelMethod,
    opts: &LevelOptions,
) -> Result<IntegralEstimate> {
    check_level(domain, eps)?;
    for f in &opts.focus {
        check_dim(domain.dim(), f.dim())?;
    }
    match method {
        LevelMethod::Parametrized => parametrized(g, domain, eps, opts),
        LevelMethod::ThinShell => thin_shell(g, domain, eps, opts),
    }
}

/// Semi-axes `s_j` of the ellipsoidal level `{sum a_j |z_j|^2 = 1 - eps/c}`.
pub(crate) fn level_axes(domain: &Domain, eps: f64) -> Result<Vec<f64>> {
    let c = domain.defining().quadratic_scale().ok_or_else(|| {
        LabError::UnsupportedDomain(format!("no exact level parametrization for {domain}"))
    })?;
    let t = 1.0 - eps / c;
    Ok(domain.defining().core_weights().iter().map(|a| (t / a).sqrt()).collect())
}

fn parametrized(
    g: &dyn Fn(&[Complex64]) -> Result<f64>,
    domain: &Domain,
    eps: f64,
    opts: &LevelOptions,
) -> Result<IntegralEstimate> {
    if domain.defining().quadratic_scale().is_none() {
        return star_shaped(g, domain, eps, opts);
    }
    let s = level_axes(domain, eps)?;
    let n = s.len();
    let area_factor: f64 = s.iter().map(|x| x * x).product();
    let jac = |w: &[Complex64]| -> f64 {
        let q: f64 = w.iter().zip(&s).map(|(c, sj)| c.norm_sqr() / (sj * sj)).sum();
        area_factor * q.sqrt()
    };
    let restriction = opts.restriction.clone();
    let weighted = |w: &[Complex64]| -> Result<f64> {
        let z: Vec<Complex64> = w.iter().zip(&s).map(|(c, sj)| c * *sj).collect();
        if let Some(u) = &restriction {
            if !u.contains(&z) {
                return Ok(0.0);
            }
        }
        Ok(g(&z)? * jac(w))
    };
    let mut est = match opts.focus.first() {
        Some(zeta) if opts.focus.len() == 1 => {
            let pre: Vec<Complex64> = zeta.iter().zip(&s).map(|(c, sj)| c / *sj).collect();
            let xi = ComplexVector::new(pre).normalized()?;
            let geom = RingGeometry::new(n, rings_for_scale(eps));
            stratified_rings(&weighted, &xi, &geom, opts.count, opts.seed, &|w| Ok(w.to_vec()), Method::Parametrized)?
        }
        _ => integrate_sphere_mapped(&weighted, n, opts.count, opts.seed)?,
    };
    est.method = Method::Parametrized;
    Ok(est)
}

/// Radius `t` with `rho(t v) = -eps` on the ray through the unit vector `v`.
///
/// Along rays from the origin the defining function crosses every level in
/// `(rho(0), 0)` once before the boundary radius of the core ellipsoid.
fn ray_root(domain: &Domain, v: &[Complex64], eps: f64, weights: &[f64]) -> Result<f64> {
    let rho = domain.defining();
    let q: f64 = v.iter().zip(weights).map(|(c, a)| a * c.norm_sqr()).sum();
    let mut hi = 1.0 / q.sqrt();
    let mut lo = 0.0;
    let point = |t: f64| -> Vec<Complex64> { v.iter().map(|c| c * t).collect() };
    let residual = |t: f64| rho.value(&point(t)) + eps;
    if residual(lo) >= 0.0 {
        return Err(LabError::LevelOutOfRange { eps, eps_max: -rho.value(&point(0.0)) });
    }
    let mut t = 0.5 * hi;
    for _ in 0..200 {
        let r = residual(t);
        if r < 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let z = point(t);
        let slope: f64 = (0..v.len()).map(|j| 2.0 * (rho.dz(&z, j) * v[j]).re).sum();
        let newton = t - r / slope;
        let next = if slope > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if (next - t).abs() <= 1e-15 * t.max(1e-300) || hi - lo <= 1e-15 * hi {
            return Ok(next);
        }
        t = next;
    }
    Err(LabError::NoConvergence(200))
}

/// Level sets of warped defining functions, written radially as `z = t(v) v`
/// with surface weight `t^{2n-1} |grad rho| / <grad rho, v>`.
fn star_shaped(
    g: &dyn Fn(&[Complex64]) -> Result<f64>,
    domain: &Domain,
    eps: f64,
    opts: &LevelOptions,
) -> Result<IntegralEstimate> {
    let n = domain.dim();
    let weights = domain.defining().core_weights();
    let rho = domain.defining();
    let restriction = opts.restriction.clone();
    let weighted = |v: &[Complex64]| -> Result<f64> {
        let t = ray_root(domain, v, eps, &weights)?;
        let z: Vec<Complex64> = v.iter().map(|c| c * t).collect();
        if let Some(u) = &restriction {
            if !u.contains(&z) {
                return Ok(0.0);
            }
        }
        let radial: f64 = (0..n).map(|j| 2.0 * (rho.dz(&z, j) * v[j]).re).sum();
        if radial <= 0.0 {
            return Err(LabError::Inconsistent(format!("level at eps = {eps} is not star-shaped")));
        }
        let jac = t.powi(2 * n as i32 - 1) * rho.gradient_norm(&z) / radial;
        Ok(g(&z)? * jac)
    };
    let mut est = match opts.focus.first() {
        Some(zeta) if opts.focus.len() == 1 => {
            let xi = zeta.normalized()?;
            let geom = RingGeometry::new(n, rings_for_scale(eps));
            stratified_rings(&weighted, &xi, &geom, opts.count, opts.seed, &|w| Ok(w.to_vec()), Method::Parametrized)?
        }
        _ => integrate_sphere_mapped(&weighted, n, opts.count, opts.seed)?,
    };
    est.method = Method::Parametrized;
    Ok(est)
}

struct ShellProposal {
    lo: Vec<f64>,
    hi: Vec<f64>,
    box_volume: f64,
    balls: Vec<(Vec<Complex64>, f64, f64)>,
    box_share: f64,
}

impl ShellProposal {
    fn density(&self, z: &[Complex64]) -> f64 {
        let n = z.len();
        let mut inside = true;
        for j in 0..n {
            if z[j].re < self.lo[j] || z[j].re > self.hi[j] || z[j].im < self.lo[n + j] || z[j].im > self.hi[n + j] {
                inside = false;
                break;
            }
        }
        let mut q = if inside { self.box_share / self.box_volume } else { 0.0 };
        for (c, s, share) in &self.balls {
            if distance(c, z) < *s {
                q += share / ball_volume(n, *s);
            }
        }
        q
    }
}

fn ball_volume(n: usize, s: f64) -> f64 {
    PI.powi(n as i32) * s.powi(2 * n as i32) / factorial(n)
}

fn thin_shell(
    g: &dyn Fn(&[Complex64]) -> Result<f64>,
    domain: &Domain,
    eps: f64,
    opts: &LevelOptions,
) -> Result<IntegralEstimate> {
    let n = domain.dim();
    let h = eps / 10.0;
    let bbox = domain.bounding_box();
    let mut lo: Vec<f64> = bbox.iter().map(|b| b.0).collect();
    let mut hi: Vec<f64> = bbox.iter().map(|b| b.1).collect();
    if let Some(u) = &opts.restriction {
        check_dim(n, u.center.dim())?;
        let xy = u.center.real_coords();
        for k in 0..2 * n {
            lo[k] = lo[k].max(xy[k] - u.radius);
            hi[k] = hi[k].min(xy[k] + u.radius);
        }
    }
    if lo.iter().zip(&hi).any(|(a, b)| a >= b) {
        return Err(LabError::ShellNotHit(0));
    }
    let box_volume: f64 = lo.iter().zip(&hi).map(|(a, b)| b - a).product();
    // focus balls halve in radius down to a few times the level's distance to the centre
    let mut balls = Vec::new();
    let mut top = 0.25 * domain.diameter();
    if let Some(u) = &opts.restriction {
        top = top.min(u.radius);
    }
    for c in &opts.focus {
        let grad = domain.defining().gradient_norm(c).max(1e-300);
        let floor = (4.0 * eps / grad).min(top);
        let mut s = top;
        loop {
            balls.push((c.as_slice().to_vec(), s, s));
            if s <= floor {
                break;
            }
            s *= 0.5;
        }
    }
    let box_share = if balls.is_empty() { 1.0 } else { 0.3 };
    let total_s: f64 = balls.iter().map(|b| b.2).sum();
    for b in balls.iter_mut() {
        b.2 = (1.0 - box_share) * b.2 / total_s;
    }
    let proposal = ShellProposal { lo, hi, box_volume, balls, box_share };
    // cumulative component shares for deterministic allocation within a chunk
    let mut cumulative = vec![proposal.box_share];
    for b in &proposal.balls {
        cumulative.push(cumulative.last().unwrap() + b.2);
    }
    let restriction = opts.restriction.clone();
    let mut moments = ChunkedMoments::default();
    let mut hits = 0usize;
    let mut overflow = false;
    let mut chunk = 0u64;
    let seed = mix_seed(opts.seed, 0x5be11);
    while hits < opts.shell_hits && (moments.count()) < opts.shell_max_proposals {
        let mut rng = chunk_rng(seed, chunk);
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        let mut comp = 0usize;
        for i in 0..CHUNK {
            let u = (i as f64 + 0.5) / CHUNK as f64;
            while comp + 1 < cumulative.len() && u > cumulative[comp] {
                comp += 1;
            }
            let z: Vec<Complex64> = if comp == 0 {
                (0..n)
                    .map(|j| {
                        Complex64::new(
                            proposal.lo[j] + (proposal.hi[j] - proposal.lo[j]) * rng.random::<f64>(),
                            proposal.lo[n + j] + (proposal.hi[n + j] - proposal.lo[n + j]) * rng.random::<f64>(),
                        )
                    })
                    .collect()
            } else {
                let (c, s, _) = &proposal.balls[comp - 1];
                let dir = random_unit_vector(&mut rng, n);
                let radius = s * rng.random::<f64>().powf(1.0 / (2 * n) as f64);
                c.iter().zip(&dir).map(|(a, b)| a + b * radius).collect()
            };
            let r = domain.rho(&z);
            if (r + eps).abs() >= h {
                continue;
            }
            if let Some(u) = &restriction {
                if !u.contains(&z) {
                    continue;
                }
            }
            hits += 1;
            let v = g(&z)? * domain.defining().gradient_norm(&z) / (2.0 * h) / proposal.density(&z);
            if !v.is_finite() || v.abs() > super::OVERFLOW {
                overflow = true;
            }
            sum += v;
            sum_sq += v * v;
        }
        moments.push_chunk(sum, sum_sq, CHUNK as u64);
        chunk += 1;
    }
    if hits == 0 {
        return Err(LabError::ShellNotHit(moments.count()));
    }
    let (mean, se) = moments.mean_and_stderr();
    Ok(IntegralEstimate::new(mean, se, moments.count(), Method::ThinShell, overflow))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::sphere_area;
    use crate::geometry::parse_domain;

    #[test]
    fn constant_on_ball_levels_matches_scaling() {
        let d = Domain::unit_ball(2).unwrap();
        for eps in [0.5, 0.1, 0.01] {
            let exact = (1.0 - eps as f64).powf(1.5) * sphere_area(2);
            let e = integrate_level_set(&|_| Ok(1.0), &d, eps, LevelMethod::Parametrized, &LevelOptions::new(2000, 1)).unwrap();
            assert!((e.value - exact).abs() < 1e-10 * exact);
            let mut o = LevelOptions::new(2000, 1);
            o.shell_hits = 20_000;
            let e = integrate_level_set(&|_| Ok(1.0), &d, eps, LevelMethod::ThinShell, &o).unwrap();
            // the shell average carries an O(h^2) bias on top of the noise
            assert!((e.value - exact).abs() < 3.0 * e.stderr + 1e-3 * exact, "eps {eps}: {e:?} vs {exact}");
        }
    }

    #[test]
    fn level_range_is_checked() {
        let d = Domain::ellipsoid(vec![1.0, 2.0]).unwrap();
        let o = LevelOptions::new(1000, 1);
        assert!(matches!(
            integrate_level_set(&|_| Ok(1.0), &d, 1.0, LevelMethod::Parametrized, &o),
            Err(LabError::LevelOutOfRange { .. })
        ));
    }

    #[test]
    fn warped_radial_levels_match_thin_shell() {
        let w = parse_domain("warped:base=ellipsoid:a=1,2;u=x1").unwrap();
        let g = |z: &[Complex64]| Ok(1.0 + z[1].norm_sqr());
        for eps in [0.2, 0.05] {
            let radial = integrate_level_set(&g, &w, eps, LevelMethod::Parametrized, &LevelOptions::new(50_000, 2)).unwrap();
            let shell = integrate_level_set(&g, &w, eps, LevelMethod::ThinShell, &LevelOptions::new(50_000, 2)).unwrap();
            let tol = 3.0 * (radial.stderr.powi(2) + shell.stderr.powi(2)).sqrt();
            assert!((radial.value - shell.value).abs() < tol, "eps {eps}: {radial:?} vs {shell:?}");
        }
    }

    #[test]
    fn radial_levels_lie_on_the_level_set() {
        let w = parse_domain("warped:base=ellipsoid:a=1,2;u=-0.5*y2").unwrap();
        let weights = w.defining().core_weights();
        let mut rng = chunk_rng(5, 0);
        for _ in 0..200 {
            let v = random_unit_vector(&mut rng, 2);
            let t = ray_root(&w, &v, 0.03, &weights).unwrap();
            let z: Vec<Complex64> = v.iter().map(|c| c * t).collect();
            assert!((w.rho(&z) + 0.03).abs() < 1e-13);
        }
    }

    #[test]
    fn covering_restriction_changes_nothing() {
        let d = Domain::ellipsoid(vec![1.0, 2.0]).unwrap();
        let g = |z: &[Complex64]| Ok(1.0 + z[0].re.powi(2));
        let o = LevelOptions::new(5000, 4);
        let full = integrate_level_set(&g, &d, 0.1, LevelMethod::Parametrized, &o).unwrap();
        let mut r = o.clone();
        r.restriction = Some(BallRegion::new(ComplexVector::zeros(2), 5.0).unwrap());
        let restricted = integrate_level_set(&g, &d, 0.1, LevelMethod::Parametrized, &r).unwrap();
        assert_eq!(full.value, restricted.value);
    }
}
