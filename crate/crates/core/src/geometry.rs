//! Domains given by defining functions, their complex derivatives, Levi
//! polynomials and boundary sampling.

use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, LabError, Result};
use crate::numerics::{chunk_rng, halton, mix_seed};
use crate::vector::{distance, norm_sqr, ComplexVector};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Real-linear form `u(z) = sum c_k x_k + sum c_{n+k} y_k` on `C^n = R^{2n}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearForm {
    coeffs: Vec<f64>,
}

impl LinearForm {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() || coeffs.len() % 2 != 0 {
            return Err(LabError::InvalidParameter(format!(
                "linear form needs 2n coefficients, got {}",
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(LabError::InvalidParameter("non-finite linear form coefficient".into()));
        }
        Ok(Self { coeffs })
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len() / 2
    }

    pub fn eval(&self, z: &[Complex64]) -> f64 {
        let n = self.dim();
        (0..n)
            .map(|j| self.coeffs[j] * z[j].re + self.coeffs[n + j] * z[j].im)
            .sum()
    }

    /// `du/dz_j = (c_j - i c_{n+j}) / 2`.
    pub fn dz(&self, j: usize) -> Complex64 {
        let n = self.dim();
        Complex64::new(0.5 * self.coeffs[j], -0.5 * self.coeffs[n + j])
    }

    /// Parses `x1`, `-0.5*y2`, `x1+0.3*y2` in dimension `n`.
    pub fn parse(s: &str, n: usize) -> Result<Self> {
        let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let bad = |why: &str| LabError::Parse(format!("invalid linear form '{s}': {why}"));
        if t.is_empty() {
            return Err(bad("empty"));
        }
        let mut terms = Vec::new();
        let mut start = 0;
        let bytes = t.as_bytes();
        for i in 1..bytes.len() {
            let c = bytes[i] as char;
            if (c == '+' || c == '-') && !matches!(bytes[i - 1] as char, 'e' | 'E' | '*') {
                terms.push(&t[start..i]);
                start = i;
            }
        }
        terms.push(&t[start..]);
        let mut coeffs = vec![0.0; 2 * n];
        for term in terms {
            let term = term.strip_prefix('+').unwrap_or(term);
            let (coef, var) = match term.rsplit_once('*') {
                Some((c, v)) => (c.parse::<f64>().map_err(|_| bad("coefficient"))?, v),
                None => match term.strip_prefix('-') {
                    Some(v) => (-1.0, v),
                    None => (1.0, term),
                },
            };
            let (offset, idx) = if let Some(i) = var.strip_prefix('x') {
                (0, i)
            } else if let Some(i) = var.strip_prefix('y') {
                (n, i)
            } else {
                return Err(bad("variable must be xK or yK"));
            };
            let k: usize = idx.parse().map_err(|_| bad("variable index"))?;
            if k == 0 || k > n {
                return Err(bad("variable index out of range"));
            }
            coeffs[offset + k - 1] += coef;
        }
        Self::new(coeffs)
    }
}

impl fmt::Display for LinearForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.dim();
        let mut first = true;
        for (idx, &c) in self.coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let var = if idx < n {
                format!("x{}", idx + 1)
            } else {
                format!("y{}", idx - n + 1)
            };
            let sep = if first || c < 0.0 { "" } else { "+" };
            if c == 1.0 {
                write!(f, "{sep}{var}")?;
            } else if c == -1.0 {
                write!(f, "-{var}")?;
            } else {
                write!(f, "{sep}{c}*{var}")?;
            }
            first = false;
        }
        if first {
            write!(f, "0*x1")?;
        }
        Ok(())
    }
}

/// A defining function `rho` with `Omega = {rho < 0}`.
#[derive(Debug, Clone, PartialEq)]
pub enum DefiningFunction {
    /// `|z|^2 - 1`.
    UnitBall { n: usize },
    /// `sum a_j |z_j|^2 - 1` with positive weights.
    Ellipsoid { weights: Vec<f64> },
    /// `c * base`.
    Rescaled { base: Box<DefiningFunction>, factor: f64 },
    /// `exp(u) * base` with `u` real-linear.
    Warped { base: Box<DefiningFunction>, multiplier: LinearForm },
}

/// Value and complex derivatives up to order two of a real function.
///
/// `mixed[j][k] = d^2/dz_j dzbar_k`, `holomorphic[j][k] = d^2/dz_j dz_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub dz: Vec<Complex64>,
    pub mixed: Vec<Vec<Complex64>>,
    pub holomorphic: Vec<Vec<Complex64>>,
}

impl Jet {
    fn zero(n: usize) -> Self {
        Self {
            value: 0.0,
            dz: vec![ZERO; n],
            mixed: vec![vec![ZERO; n]; n],
            holomorphic: vec![vec![ZERO; n]; n],
        }
    }

    /// Real gradient as a complex vector `d/dx_j + i d/dy_j = 2 conj(d/dz_j)`.
    pub fn real_gradient(&self) -> Vec<Complex64> {
        self.dz.iter().map(|d| 2.0 * d.conj()).collect()
    }

    /// Euclidean length of the real gradient.
    pub fn gradient_norm(&self) -> f64 {
        2.0 * norm_sqr(&self.dz).sqrt()
    }

    /// Largest deviation of the mixed Hessian from being Hermitian.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.dz.len();
        let mut worst: f64 = 0.0;
        for j in 0..n {
            for k in 0..n {
                worst = worst.max((self.mixed[j][k] - self.mixed[k][j].conj()).norm());
            }
        }
        worst
    }

    /// Smallest eigenvalue of the Hermitian mixed Hessian.
    pub fn min_levi_eigenvalue(&self) -> f64 {
        let n = self.dz.len();
        let mut m = DMatrix::<f64>::zeros(2 * n, 2 * n);
        for j in 0..n {
            for k in 0..n {
                let h = 0.5 * (self.mixed[j][k] + self.mixed[k][j].conj());
                m[(j, k)] = h.re;
                m[(n + j, n + k)] = h.re;
                m[(j, n + k)] = -h.im;
                m[(n + j, k)] = h.im;
            }
        }
        SymmetricEigen::new(m).eigenvalues.min()
    }
}

impl DefiningFunction {
    pub fn ball(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(LabError::InvalidParameter(format!("ball dimension must be >= 2, got {n}")));
        }
        Ok(Self::UnitBall { n })
    }

    pub fn ellipsoid(weights: Vec<f64>) -> Result<Self> {
        if weights.len() < 2 {
            return Err(LabError::InvalidParameter("ellipsoid dimension must be >= 2".into()));
        }
        if weights.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
            return Err(LabError::InvalidParameter("ellipsoid weights must be positive".into()));
        }
        Ok(Self::Ellipsoid { weights })
    }

    pub fn rescaled(base: DefiningFunction, factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(LabError::InvalidParameter("rescaling factor must be positive".into()));
        }
        Ok(Self::Rescaled { base: Box::new(base), factor })
    }

    pub fn warped(base: DefiningFunction, multiplier: LinearForm) -> Result<Self> {
        check_dim(base.dim(), multiplier.dim())?;
        Ok(Self::Warped { base: Box::new(base), multiplier })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::UnitBall { n } => *n,
            Self::Ellipsoid { weights } => weights.len(),
            Self::Rescaled { base, .. } | Self::Warped { base, .. } => base.dim(),
        }
    }

    /// Weights `a` of the ellipsoid `{sum a_j |z_j|^2 < 1}` bounding the zero set.
    pub fn core_weights(&self) -> Vec<f64> {
        match self {
            Self::UnitBall { n } => vec![1.0; *n],
            Self::Ellipsoid { weights } => weights.clone(),
            Self::Rescaled { base, .. } | Self::Warped { base, .. } => base.core_weights(),
        }
    }

    /// `Some(c)` when `rho = c (sum a_j |z_j|^2 - 1)`.
    pub fn quadratic_scale(&self) -> Option<f64> {
        match self {
            Self::UnitBall { .. } | Self::Ellipsoid { .. } => Some(1.0),
            Self::Rescaled { base, factor } => base.quadratic_scale().map(|c| c * factor),
            Self::Warped { .. } => None,
        }
    }

    pub fn value(&self, z: &[Complex64]) -> f64 {
        match self {
            Self::UnitBall { .. } => norm_sqr(z) - 1.0,
            Self::Ellipsoid { weights } => {
                weights.iter().zip(z).map(|(a, c)| a * c.norm_sqr()).sum::<f64>() - 1.0
            }
            Self::Rescaled { base, factor } => factor * base.value(z),
            Self::Warped { base, multiplier } => multiplier.eval(z).exp() * base.value(z),
        }
    }

    /// `d rho / dz_j`.
    pub fn dz(&self, z: &[Complex64], j: usize) -> Complex64 {
        match self {
            Self::UnitBall { .. } => z[j].conj(),
            Self::Ellipsoid { weights } => weights[j] * z[j].conj(),
            Self::Rescaled { base, factor } => *factor * base.dz(z, j),
            Self::Warped { base, multiplier } => {
                let m = multiplier.eval(z).exp();
                m * (multiplier.dz(j) * base.value(z) + base.dz(z, j))
            }
        }
    }

    /// Length of the real gradient.
    pub fn gradient_norm(&self, z: &[Complex64]) -> f64 {
        let s: f64 = (0..z.len()).map(|j| self.dz(z, j).norm_sqr()).sum();
        2.0 * s.sqrt()
    }

    /// Full second-order jet at `z`.
    pub fn jet(&self, z: &[Complex64]) -> Result<Jet> {
        check_dim(self.dim(), z.len())?;
        Ok(self.jet_unchecked(z))
    }

    fn jet_unchecked(&self, z: &[Complex64]) -> Jet {
        let n = z.len();
        match self {
            Self::UnitBall { .. } | Self::Ellipsoid { .. } => {
                let a = self.core_weights();
                let mut jet = Jet::zero(n);
                jet.value = self.value(z);
                for j in 0..n {
                    jet.dz[j] = a[j] * z[j].conj();
                    jet.mixed[j][j] = Complex64::new(a[j], 0.0);
                }
                jet
            }
            Self::Rescaled { base, factor } => {
                let mut jet = base.jet_unchecked(z);
                jet.value *= factor;
                jet.dz.iter_mut().for_each(|d| *d *= factor);
                for row in jet.mixed.iter_mut().chain(jet.holomorphic.iter_mut()) {
                    row.iter_mut().for_each(|d| *d *= factor);
                }
                jet
            }
            Self::Warped { base, multiplier } => {
                let b = base.jet_unchecked(z);
                let m = multiplier.eval(z).exp();
                let u: Vec<Complex64> = (0..n).map(|j| multiplier.dz(j)).collect();
                let mut jet = Jet::zero(n);
                jet.value = m * b.value;
                for j in 0..n {
                    let mj = m * u[j];
                    jet.dz[j] = mj * b.value + m * b.dz[j];
                    for k in 0..n {
                        let mk = m * u[k];
                        let mixed_m = m * u[j] * u[k].conj();
                        let holo_m = m * u[j] * u[k];
                        jet.mixed[j][k] = mixed_m * b.value
                            + mj * b.dz[k].conj()
                            + mk.conj() * b.dz[j]
                            + m * b.mixed[j][k];
                        jet.holomorphic[j][k] = holo_m * b.value
                            + mj * b.dz[k]
                            + mk * b.dz[j]
                            + m * b.holomorphic[j][k];
                    }
                }
                jet
            }
        }
    }
}

impl fmt::Display for DefiningFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::UnitBall { n } => write!(f, "ball:n={n}"),
            Self::Ellipsoid { weights } => {
                let w: Vec<String> = weights.iter().map(|a| a.to_string()).collect();
                write!(f, "ellipsoid:a={}", w.join(","))
            }
            Self::Rescaled { base, factor } => write!(f, "rescaled:base={base};c={factor}"),
            Self::Warped { base, multiplier } => write!(f, "warped:base={base};u={multiplier}"),
        }
    }
}

/// A bounded domain `{rho < 0}` together with its bounding box.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    defining: DefiningFunction,
    bbox: Vec<(f64, f64)>,
    strictly_psh: bool,
}

impl Domain {
    pub fn new(defining: DefiningFunction) -> Self {
        let a = defining.core_weights();
        let n = a.len();
        let mut bbox = vec![(0.0, 0.0); 2 * n];
        for j in 0..n {
            let r = 1.0 / a[j].sqrt();
            bbox[j] = (-r, r);
            bbox[n + j] = (-r, r);
        }
        let strictly_psh = defining.quadratic_scale().is_some();
        Self { defining, bbox, strictly_psh }
    }

    pub fn unit_ball(n: usize) -> Result<Self> {
        Ok(Self::new(DefiningFunction::ball(n)?))
    }

    pub fn ellipsoid(weights: Vec<f64>) -> Result<Self> {
        Ok(Self::new(DefiningFunction::ellipsoid(weights)?))
    }

    pub fn defining(&self) -> &DefiningFunction {
        &self.defining
    }

    pub fn dim(&self) -> usize {
        self.defining.dim()
    }

    /// Real box `[lo, hi]` per coordinate `(x_1..x_n, y_1..y_n)` containing the closure.
    pub fn bounding_box(&self) -> &[(f64, f64)] {
        &self.bbox
    }

    /// Whether the defining function is known to be strictly plurisubharmonic.
    pub fn is_strictly_psh(&self) -> bool {
        self.strictly_psh
    }

    pub fn rho(&self, z: &[Complex64]) -> f64 {
        self.defining.value(z)
    }

    pub fn contains(&self, z: &[Complex64]) -> bool {
        self.rho(z) < 0.0
    }

    /// Euclidean diameter of the closure.
    pub fn diameter(&self) -> f64 {
        let amin = self
            .defining
            .core_weights()
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        2.0 / amin.sqrt()
    }

    /// Supremum of `-rho` over the domain, which bounds admissible levels.
    pub fn eps_max(&self) -> f64 {
        match self.defining.quadratic_scale() {
            Some(c) => c,
            None => {
                // sampled estimate of -min rho; the centre is always a candidate
                let n = self.dim();
                let a = self.defining.core_weights();
                let mut best = -self.rho(&ComplexVector::zeros(n));
                for i in 1..=4096u64 {
                    let u = halton(i, 2 * n);
                    let z: Vec<Complex64> = (0..n)
                        .map(|j| {
                            let r = 1.0 / a[j].sqrt();
                            Complex64::new(r * (2.0 * u[j] - 1.0), r * (2.0 * u[n + j] - 1.0))
                        })
                        .collect();
                    let v = self.rho(&z);
                    if v < 0.0 {
                        best = best.max(-v);
                    }
                }
                best
            }
        }
    }

    /// Whether the level set `{rho = -eps}` has an exact ellipsoidal parametrization.
    pub fn has_parametrized_levels(&self) -> bool {
        self.defining.quadratic_scale().is_some()
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.defining.fmt(f)
    }
}

/// Parses `ball:n=2`, `ellipsoid:a=1,2`, `rescaled:base=<domain>;c=2`,
/// `warped:base=<domain>;u=x1`.
pub fn parse_domain(s: &str) -> Result<Domain> {
    Ok(Domain::new(parse_defining(s.trim())?))
}

fn parse_defining(s: &str) -> Result<DefiningFunction> {
    let (kind, rest) = s
        .split_once(':')
        .ok_or_else(|| LabError::Parse(format!("domain '{s}' lacks a kind prefix")))?;
    match kind {
        "ball" => {
            let n = single_param(rest, "n")?;
            let n: usize = n
                .parse()
                .map_err(|_| LabError::Parse(format!("invalid dimension in '{s}'")))?;
            DefiningFunction::ball(n)
        }
        "ellipsoid" => {
            let a = single_param(rest, "a")?;
            let weights = a
                .split(',')
                .map(|x| {
                    x.trim()
                        .parse::<f64>()
                        .map_err(|_| LabError::Parse(format!("invalid weight '{x}'")))
                })
                .collect::<Result<Vec<_>>>()?;
            DefiningFunction::ellipsoid(weights)
        }
        "rescaled" => {
            let (base, outer) = split_nested(rest, &["c"])?;
            let base = parse_defining(&base)?;
            let c = outer_param(&outer, "c", s)?
                .parse::<f64>()
                .map_err(|_| LabError::Parse(format!("invalid factor in '{s}'")))?;
            DefiningFunction::rescaled(base, c)
        }
        "warped" => {
            let (base, outer) = split_nested(rest, &["u"])?;
            let base = parse_defining(&base)?;
            let u = LinearForm::parse(&outer_param(&outer, "u", s)?, base.dim())?;
            DefiningFunction::warped(base, u)
        }
        other => Err(LabError::Parse(format!("unknown domain kind '{other}'"))),
    }
}

fn single_param(rest: &str, key: &str) -> Result<String> {
    let (k, v) = rest
        .split_once('=')
        .ok_or_else(|| LabError::Parse(format!("expected {key}=... in '{rest}'")))?;
    if k.trim() != key {
        return Err(LabError::Parse(format!("expected key '{key}', found '{k}'")));
    }
    Ok(v.trim().to_string())
}

/// Splits `base=<nested>;k=v;...` taking outer keys from the right.
fn split_nested(rest: &str, outer_keys: &[&str]) -> Result<(String, Vec<(String, String)>)> {
    let segments: Vec<&str> = rest.split(';').collect();
    let mut outer = Vec::new();
    let mut cut = segments.len();
    while cut > 1 {
        let seg = segments[cut - 1];
        match seg.split_once('=') {
            Some((k, v))
                if outer_keys.contains(&k.trim()) && !outer.iter().any(|(ok, _): &(String, String)| ok == k.trim()) =>
            {
                outer.push((k.trim().to_string(), v.trim().to_string()));
                cut -= 1;
            }
            _ => break,
        }
    }
    let base = segments[..cut].join(";");
    let base = base
        .trim()
        .strip_prefix("base=")
        .ok_or_else(|| LabError::Parse(format!("expected base=... in '{rest}'")))?
        .to_string();
    Ok((base, outer))
}

fn outer_param(outer: &[(String, String)], key: &str, whole: &str) -> Result<String> {
    outer
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.clone())
        .ok_or_else(|| LabError::Parse(format!("missing '{key}' in '{whole}'")))
}

/// Minimum Levi eigenvalue over a boundary neighbourhood `{|rho| <= width}`.
///
/// Errors with [`LabError::NotStrictlyPsh`] when the minimum is not positive.
pub fn levi_form_min_eigenvalue(domain: &Domain, width: f64, samples: usize, seed: u64) -> Result<f64> {
    if samples == 0 {
        return Err(LabError::InvalidParameter("need at least one sample".into()));
    }
    let points = boundary_dense_sequence(domain, samples, seed)?;
    let levels = [-width, -0.5 * width, 0.0, 0.5 * width, width];
    let score = |w: &[Complex64]| -> f64 {
        let jet = domain.defining.jet_unchecked(w);
        let g = jet.real_gradient();
        let g2 = norm_sqr(&g);
        levels
            .iter()
            .map(|&t| {
                // first-order move onto the level rho = t
                let z: Vec<Complex64> = w.iter().zip(&g).map(|(a, b)| a + b * (t / g2)).collect();
                domain.defining.jet_unchecked(&z).min_levi_eigenvalue()
            })
            .fold(f64::INFINITY, f64::min)
    };
    let mut scored: Vec<(f64, ComplexVector)> = points.into_iter().map(|w| (score(&w), w)).collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut worst = scored[0].0;
    // pattern search along the boundary from the most promising samples
    let n = domain.dim();
    for (start_score, start) in scored.into_iter().take(4) {
        let mut best = start_score;
        let mut xy = start.real_coords();
        let mut step = 0.25;
        while step > 1e-7 {
            let mut improved = false;
            for k in 0..2 * n {
                for sign in [1.0, -1.0] {
                    let mut trial = xy.clone();
                    trial[k] += sign * step;
                    let Ok(w) = project_to_boundary(domain, &ComplexVector::from_real_coords(&trial)?) else {
                        continue;
                    };
                    let v = score(&w);
                    if v < best {
                        best = v;
                        xy = w.real_coords();
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        worst = worst.min(best);
    }
    if worst > 0.0 {
        Ok(worst)
    } else {
        Err(LabError::NotStrictlyPsh(worst))
    }
}

/// Levi polynomial `Q(z, zeta) = -[2 sum rho_j(zeta)(z - zeta)_j + sum a_jk (z - zeta)_j (z - zeta)_k]`
/// with `a_jk` the holomorphic Hessian at `zeta`.
pub fn levi_polynomial(domain: &Domain, z: &[Complex64], zeta: &[Complex64]) -> Result<Complex64> {
    let n = domain.dim();
    check_dim(n, z.len())?;
    check_dim(n, zeta.len())?;
    let jet = domain.defining.jet_unchecked(zeta);
    Ok(levi_polynomial_from_jet(&jet, z, zeta))
}

pub(crate) fn levi_polynomial_from_jet(jet: &Jet, z: &[Complex64], zeta: &[Complex64]) -> Complex64 {
    let n = z.len();
    let mut lin = ZERO;
    let mut quad = ZERO;
    for j in 0..n {
        let dj = z[j] - zeta[j];
        lin += jet.dz[j] * dj;
        for k in 0..n {
            quad += jet.holomorphic[j][k] * dj * (z[k] - zeta[k]);
        }
    }
    -(2.0 * lin + quad)
}

/// Outcome of checking `Re Q(z, zeta) >= rho(zeta) - rho(z) + beta |zeta - z|^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct LeviEstimateReport {
    pub beta: f64,
    pub eta: f64,
    pub pairs_checked: usize,
    pub violations: usize,
    /// Smallest margin `Re Q - rho(zeta) + rho(z) - beta |zeta - z|^2`; margins
    /// within rounding of zero are reported as zero.
    pub worst_margin: f64,
}

impl LeviEstimateReport {
    pub fn holds(&self) -> bool {
        self.violations == 0
    }
}

/// Checks the quadratic lower bound on `Re Q` over the given pairs `(z, zeta)`.
///
/// Pairs with `|z - zeta| > eta` are skipped.
pub fn check_levi_estimate(
    domain: &Domain,
    beta: f64,
    eta: f64,
    pairs: &[(ComplexVector, ComplexVector)],
) -> Result<LeviEstimateReport> {
    if !(beta > 0.0 && eta > 0.0) {
        return Err(LabError::InvalidParameter("beta and eta must be positive".into()));
    }
    if pairs.is_empty() {
        return Err(LabError::InvalidParameter("no samples".into()));
    }
    let n = domain.dim();
    let mut report = LeviEstimateReport {
        beta,
        eta,
        pairs_checked: 0,
        violations: 0,
        worst_margin: f64::INFINITY,
    };
    for (z, zeta) in pairs {
        check_dim(n, z.dim())?;
        check_dim(n, zeta.dim())?;
        let d2 = z.sub(zeta).norm_sqr();
        if d2.sqrt() > eta {
            continue;
        }
        let q = levi_polynomial(domain, z, zeta)?.re;
        let rz = domain.rho(z);
        let rzeta = domain.rho(zeta);
        let mut margin = q - rzeta + rz - beta * d2;
        let tol = 64.0 * f64::EPSILON * (1.0 + q.abs() + rz.abs() + rzeta.abs() + beta * d2);
        if margin < 0.0 && margin >= -tol {
            margin = 0.0;
        }
        if margin < 0.0 {
            report.violations += 1;
        }
        report.pairs_checked += 1;
        report.worst_margin = report.worst_margin.min(margin);
    }
    if report.pairs_checked == 0 {
        report.worst_margin = 0.0;
    }
    Ok(report)
}

/// Pairs `(z, zeta)` with `zeta` on the boundary and `z` in the closure, `|z - zeta| <= eta`.
pub fn sample_levi_pairs(
    domain: &Domain,
    eta: f64,
    count: usize,
    seed: u64,
) -> Result<Vec<(ComplexVector, ComplexVector)>> {
    let n = domain.dim();
    let zetas = boundary_dense_sequence(domain, count, mix_seed(seed, 0x9a1e))?;
    let mut rng = chunk_rng(mix_seed(seed, 0x9a1f), 0);
    let mut out = Vec::with_capacity(count);
    for zeta in zetas {
        loop {
            let dir = random_unit_vector(&mut rng, n);
            let radius = eta * rng.random::<f64>().powf(1.0 / (2 * n) as f64);
            let z = ComplexVector::new(
                zeta.iter().zip(&dir).map(|(a, b)| a + b * radius).collect(),
            );
            if domain.rho(&z) <= 0.0 {
                out.push((z, zeta.clone()));
                break;
            }
        }
    }
    Ok(out)
}

pub(crate) fn random_unit_vector<R: Rng>(rng: &mut R, n: usize) -> Vec<Complex64> {
    loop {
        let v: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        let r = norm_sqr(&v).sqrt();
        if r > 1e-300 {
            return v.into_iter().map(|c| c / r).collect();
        }
    }
}

/// Maps a point of `[0,1)^{2n-1}` to the unit sphere of `C^n` (area preserving).
pub(crate) fn cube_to_sphere(u: &[f64], n: usize) -> Vec<Complex64> {
    let mut remaining = 1.0;
    let mut out = Vec::with_capacity(n);
    for j in 0..n {
        let m2 = if j + 1 == n {
            remaining
        } else {
            let expo = 1.0 / (n - 1 - j) as f64;
            let frac = remaining * (1.0 - (1.0 - u[j]).powf(expo));
            remaining -= frac;
            frac
        };
        let phase = 2.0 * std::f64::consts::PI * u[n - 1 + j];
        out.push(Complex64::from_polar(m2.max(0.0).sqrt(), phase));
    }
    out
}

/// Deterministic low-discrepancy sequence of boundary points.
///
/// A Halton sequence (with a seeded Cranley-Patterson shift) is mapped to the
/// sphere and projected radially onto the boundary.
pub fn boundary_dense_sequence(domain: &Domain, count: usize, seed: u64) -> Result<Vec<ComplexVector>> {
    let n = domain.dim();
    let dims = 2 * n - 1;
    let mut shift_rng = chunk_rng(mix_seed(seed, 0xb0d), 0);
    let shift: Vec<f64> = (0..dims).map(|_| shift_rng.random::<f64>()).collect();
    let mut out = Vec::with_capacity(count);
    for i in 1..=count as u64 {
        let h = halton(i, dims);
        let u: Vec<f64> = h.iter().zip(&shift).map(|(a, b)| (a + b).fract()).collect();
        let w = ComplexVector::new(cube_to_sphere(&u, n));
        out.push(project_to_boundary(domain, &w)?);
    }
    Ok(out)
}

/// Projects `z` onto the boundary: radially for the ellipsoidal zero sets used
/// here, followed by Newton steps along the gradient if needed.
pub fn project_to_boundary(domain: &Domain, z: &[Complex64]) -> Result<ComplexVector> {
    let n = domain.dim();
    check_dim(n, z.len())?;
    let a = domain.defining.core_weights();
    let q: f64 = a.iter().zip(z).map(|(a, c)| a * c.norm_sqr()).sum();
    if !(q > 0.0 && q.is_finite()) {
        return Err(LabError::InvalidParameter(
            "cannot project the origin onto the boundary".into(),
        ));
    }
    let t = 1.0 / q.sqrt();
    let radial: Vec<Complex64> = z.iter().map(|c| c * t).collect();
    newton_project(domain, &radial)
}

/// Newton iteration `z <- z - rho(z) grad / |grad|^2`.
pub fn newton_project(domain: &Domain, z: &[Complex64]) -> Result<ComplexVector> {
    const MAX_ITER: usize = 100;
    let mut z = z.to_vec();
    for _ in 0..MAX_ITER {
        let v = domain.rho(&z);
        if v.abs() <= 1e-12 {
            return Ok(ComplexVector::new(z));
        }
        let g: Vec<Complex64> = (0..z.len()).map(|j| 2.0 * domain.defining.dz(&z, j).conj()).collect();
        let g2 = norm_sqr(&g);
        if g2 == 0.0 {
            return Err(LabError::NoConvergence(0));
        }
        for (zj, gj) in z.iter_mut().zip(&g) {
            *zj -= gj * (v / g2);
        }
    }
    Err(LabError::NoConvergence(MAX_ITER))
}

/// Largest distance from any probe to its nearest point of `points`.
pub fn covering_radius(points: &[ComplexVector], probes: &[ComplexVector]) -> f64 {
    probes
        .iter()
        .map(|p| {
            points
                .iter()
                .map(|q| distance(p, q))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vector::parse_complex_vector;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn parses_and_round_trips_domains() {
        for s in [
            "ball:n=2",
            "ellipsoid:a=1,2",
            "rescaled:base=ball:n=3;c=2",
            "warped:base=ball:n=2;u=x1",
            "warped:base=ellipsoid:a=1,4;u=0.5*x1-y2",
            "rescaled:base=rescaled:base=ball:n=2;c=3;c=2",
        ] {
            let d = parse_domain(s).unwrap();
            assert_eq!(d.to_string(), s);
            assert_eq!(parse_domain(&d.to_string()).unwrap(), d);
        }
        assert!(parse_domain("ball:n=1").is_err());
        assert!(parse_domain("ellipsoid:a=1,-2").is_err());
        assert!(parse_domain("torus:n=2").is_err());
        assert!(parse_domain("rescaled:base=ball:n=2").is_err());
    }

    #[test]
    fn nested_rescaling_multiplies_factors() {
        let d = parse_domain("rescaled:base=rescaled:base=ball:n=2;c=3;c=2").unwrap();
        assert_eq!(d.defining().quadratic_scale(), Some(6.0));
        assert_eq!(d.eps_max(), 6.0);
    }

    #[test]
    fn ball_jet_is_exact() {
        let d = Domain::unit_ball(2).unwrap();
        let z = parse_complex_vector("0.3+0.4i,-0.2i").unwrap();
        let jet = d.defining().jet(&z).unwrap();
        assert_relative_eq!(jet.value, 0.25 + 0.04 - 1.0, epsilon = 1e-15);
        assert_eq!(jet.dz[0], c(0.3, -0.4));
        assert_eq!(jet.mixed[0][0], c(1.0, 0.0));
        assert_eq!(jet.mixed[0][1], c(0.0, 0.0));
        assert_eq!(jet.holomorphic[1][1], c(0.0, 0.0));
        assert_relative_eq!(jet.min_levi_eigenvalue(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn ball_levi_polynomial_closed_form() {
        let d = Domain::unit_ball(2).unwrap();
        let zeta = parse_complex_vector("0.6,0.8i").unwrap();
        let z = parse_complex_vector("0.1+0.2i,0.3").unwrap();
        let q = levi_polynomial(&d, &z, &zeta).unwrap();
        let expected = 2.0 * (1.0 - z.pairing(&zeta));
        assert_relative_eq!(q.re, expected.re, epsilon = 1e-14);
        assert_relative_eq!(q.im, expected.im, epsilon = 1e-14);
    }

    #[test]
    fn warped_multiplier_is_not_strictly_psh() {
        let d = parse_domain("warped:base=ball:n=2;u=x1").unwrap();
        let z = parse_complex_vector("-1,0").unwrap();
        let jet = d.defining().jet(&z).unwrap();
        assert!(jet.min_levi_eigenvalue().abs() < 1e-12);
        assert!(matches!(
            levi_form_min_eigenvalue(&d, 0.05, 200, 7),
            Err(LabError::NotStrictlyPsh(_))
        ));
        let e = levi_form_min_eigenvalue(&Domain::ellipsoid(vec![1.0, 2.0]).unwrap(), 0.05, 200, 7).unwrap();
        assert_relative_eq!(e, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn warped_gradient_matches_finite_differences() {
        let d = parse_domain("warped:base=ellipsoid:a=1,2;u=0.7*x1-0.4*y2").unwrap();
        let z = parse_complex_vector("0.3+0.1i,-0.2+0.25i").unwrap();
        let jet = d.defining().jet(&z).unwrap();
        let h = 1e-6;
        let xy = z.real_coords();
        for k in 0..4 {
            let mut p = xy.clone();
            let mut m = xy.clone();
            p[k] += h;
            m[k] -= h;
            let fd = (d.rho(&ComplexVector::from_real_coords(&p).unwrap())
                - d.rho(&ComplexVector::from_real_coords(&m).unwrap()))
                / (2.0 * h);
            let j = k % 2;
            let analytic = if k < 2 { 2.0 * jet.dz[j].re } else { -2.0 * jet.dz[j].im };
            assert!((fd - analytic).abs() < 1e-8, "coordinate {k}: {fd} vs {analytic}");
        }
    }

    #[test]
    fn projection_lands_on_boundary() {
        let d = parse_domain("warped:base=ellipsoid:a=1,2;u=x1").unwrap();
        let z = parse_complex_vector("0.2+0.1i,0.3").unwrap();
        let w = project_to_boundary(&d, &z).unwrap();
        assert!(d.rho(&w).abs() <= 1e-12);
        assert!(project_to_boundary(&d, &ComplexVector::zeros(2)).is_err());
        let off = parse_complex_vector("0.9,0.1").unwrap();
        let w = newton_project(&d, &off).unwrap();
        assert!(d.rho(&w).abs() <= 1e-12);
    }

    #[test]
    fn dense_sequence_covers_sphere() {
        let d = Domain::unit_ball(2).unwrap();
        let pts = boundary_dense_sequence(&d, 1000, 7).unwrap();
        let probes = boundary_dense_sequence(&d, 2000, 99_991).unwrap();
        let cov = covering_radius(&pts, &probes);
        assert!(cov < 0.35, "covering radius {cov}");
        for p in &pts {
            assert!(d.rho(p).abs() <= 1e-12);
        }
    }

    #[test]
    fn levi_margin_identity_for_ellipsoid() {
        let d = Domain::ellipsoid(vec![1.0, 2.0]).unwrap();
        let pairs = sample_levi_pairs(&d, 0.5, 200, 3).unwrap();
        for (z, zeta) in &pairs {
            let q = levi_polynomial(&d, z, zeta).unwrap().re;
            let margin = q - d.rho(zeta) + d.rho(z);
            let expected = (z[0] - zeta[0]).norm_sqr() + 2.0 * (z[1] - zeta[1]).norm_sqr();
            assert!((margin - expected).abs() < 1e-12);
        }
        let r = check_levi_estimate(&d, 1.0, 0.5, &pairs).unwrap();
        assert!(r.holds());
        assert!(r.worst_margin >= 0.0);
        let r = check_levi_estimate(&d, 3.0, 0.5, &pairs).unwrap();
        assert!(!r.holds());
        assert!(r.worst_margin < 0.0);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let d = Domain::unit_ball(2).unwrap();
        let z = ComplexVector::zeros(3);
        assert!(matches!(
            levi_polynomial(&d, &z, &z),
            Err(LabError::DimensionMismatch { expected: 2, got: 3 })
        ));
    }
}
