//! Explicit singular functions and finite linear combinations of them.

use std::fmt;

use num_complex::Complex64;

use crate::error::{check_dim, LabError, Result};
use crate::geometry::{parse_domain, Domain};
use crate::vector::{norm_sqr, pairing, parse_complex_vector, ComplexVector};

const BOUNDARY_TOL: f64 = 1e-12;

fn one() -> Complex64 {
    Complex64::new(1.0, 0.0)
}

/// Cached data of the Levi polynomial about a fixed boundary point.
#[derive(Debug, Clone, PartialEq)]
pub struct LeviKernel {
    domain: Domain,
    zeta: ComplexVector,
    dz: Vec<Complex64>,
    holomorphic: Vec<Vec<Complex64>>,
}

impl LeviKernel {
    pub fn new(domain: Domain, zeta: ComplexVector) -> Result<Self> {
        check_dim(domain.dim(), zeta.dim())?;
        if !domain.has_parametrized_levels() {
            return Err(LabError::UnsupportedDomain(format!(
                "Levi-polynomial functions need an ellipsoidal domain, got {domain}"
            )));
        }
        let r = domain.rho(&zeta);
        if r.abs() > BOUNDARY_TOL {
            return Err(LabError::OutsideDomain(format!(
                "zeta = {zeta} is not on the boundary (rho = {r:e})"
            )));
        }
        let jet = domain.defining().jet(&zeta)?;
        Ok(Self { domain, zeta, dz: jet.dz, holomorphic: jet.holomorphic })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn zeta(&self) -> &ComplexVector {
        &self.zeta
    }

    /// `Q(z, zeta)`.
    pub fn q(&self, z: &[Complex64]) -> Complex64 {
        let n = z.len();
        let mut lin = Complex64::new(0.0, 0.0);
        let mut quad = Complex64::new(0.0, 0.0);
        for j in 0..n {
            let dj = z[j] - self.zeta[j];
            lin += self.dz[j] * dj;
            for k in 0..n {
                quad += self.holomorphic[j][k] * dj * (z[k] - self.zeta[k]);
            }
        }
        -(2.0 * lin + quad)
    }

    fn zero_free_q(&self, z: &[Complex64]) -> Result<Complex64> {
        check_dim(self.zeta.dim(), z.len())?;
        let q = self.q(z);
        if q.re == 0.0 && q.im == 0.0 {
            return Err(LabError::Singularity);
        }
        if q.re <= 0.0 {
            return Err(LabError::OutsideZeroFreeRegion(q.re));
        }
        Ok(q)
    }

    /// Unit axis about which `Q(., zeta)` is a function of one pairing, if any.
    fn axis(&self) -> Option<ComplexVector> {
        let nonzero_holo = self.holomorphic.iter().flatten().any(|c| c.norm() != 0.0);
        if nonzero_holo {
            return None;
        }
        // Q = -2 sum dz_j (z_j - zeta_j) depends on <z, conj(dz)> only
        let v = ComplexVector::new(self.dz.iter().map(|c| c.conj()).collect());
        v.normalized().ok()
    }
}

/// The explicit singular functions.
#[derive(Debug, Clone, PartialEq)]
pub enum SingularFunctionSpec {
    /// `1 / (1 - <z, zeta>)`.
    Cauchy { zeta: ComplexVector },
    /// `log(1 / (1 - <z, zeta>))`, principal branch.
    Log { zeta: ComplexVector },
    /// `(1 - <z, zeta>)^{-n/q}`, principal branch.
    Power { zeta: ComplexVector, q: f64 },
    /// `1 / Q(z, zeta)`.
    LeviReciprocal(LeviKernel),
    /// `Q(z, zeta)^{-n/q}`, principal branch.
    LeviPower { kernel: LeviKernel, q: f64 },
    /// `|x - y|^{2-n}` on `R^n`.
    HarmonicKernel { y: Vec<f64> },
}

fn check_sphere_point(zeta: &ComplexVector) -> Result<()> {
    if zeta.dim() < 2 {
        return Err(LabError::InvalidParameter("dimension must be >= 2".into()));
    }
    let r = zeta.norm_sqr() - 1.0;
    if r.abs() > BOUNDARY_TOL {
        return Err(LabError::OutsideDomain(format!(
            "zeta = {zeta} is not on the unit sphere (|zeta|^2 - 1 = {r:e})"
        )));
    }
    Ok(())
}

fn check_exponent(q: f64) -> Result<()> {
    if q.is_finite() && q > 1.0 {
        Ok(())
    } else {
        Err(LabError::InvalidParameter(format!("q must exceed 1, got {q}")))
    }
}

impl SingularFunctionSpec {
    pub fn cauchy(zeta: ComplexVector) -> Result<Self> {
        check_sphere_point(&zeta)?;
        Ok(Self::Cauchy { zeta })
    }

    pub fn log(zeta: ComplexVector) -> Result<Self> {
        check_sphere_point(&zeta)?;
        Ok(Self::Log { zeta })
    }

    pub fn power(zeta: ComplexVector, q: f64) -> Result<Self> {
        check_sphere_point(&zeta)?;
        check_exponent(q)?;
        Ok(Self::Power { zeta, q })
    }

    pub fn levi_reciprocal(domain: Domain, zeta: ComplexVector) -> Result<Self> {
        Ok(Self::LeviReciprocal(LeviKernel::new(domain, zeta)?))
    }

    pub fn levi_power(domain: Domain, zeta: ComplexVector, q: f64) -> Result<Self> {
        check_exponent(q)?;
        Ok(Self::LeviPower { kernel: LeviKernel::new(domain, zeta)?, q })
    }

    pub fn harmonic(y: Vec<f64>) -> Result<Self> {
        if y.len() < 3 {
            return Err(LabError::InvalidParameter("harmonic kernel needs n >= 3".into()));
        }
        let r: f64 = y.iter().map(|v| v * v).sum::<f64>() - 1.0;
        if r.abs() > BOUNDARY_TOL {
            return Err(LabError::OutsideDomain(format!("|y|^2 - 1 = {r:e}")));
        }
        Ok(Self::HarmonicKernel { y })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Cauchy { zeta } | Self::Log { zeta } | Self::Power { zeta, .. } => zeta.dim(),
            Self::LeviReciprocal(k) | Self::LeviPower { kernel: k, .. } => k.zeta.dim(),
            Self::HarmonicKernel { y } => y.len(),
        }
    }

    /// The boundary point carrying the singularity.
    pub fn center(&self) -> ComplexVector {
        match self {
            Self::Cauchy { zeta } | Self::Log { zeta } | Self::Power { zeta, .. } => zeta.clone(),
            Self::LeviReciprocal(k) | Self::LeviPower { kernel: k, .. } => k.zeta.clone(),
            Self::HarmonicKernel { y } => ComplexVector::from_real(y),
        }
    }

    /// Evaluates a holomorphic kind at `z`.
    pub fn eval(&self, z: &[Complex64]) -> Result<Complex64> {
        match self {
            Self::Cauchy { zeta } => eval_cauchy(zeta, z),
            Self::Log { zeta } => eval_log(zeta, z),
            Self::Power { zeta, q } => eval_power(zeta, *q, z),
            Self::LeviReciprocal(k) => Ok(1.0 / k.zero_free_q(z)?),
            Self::LeviPower { kernel, q } => {
                let n = kernel.zeta.dim() as f64;
                Ok((-(n / q) * kernel.zero_free_q(z)?.ln()).exp())
            }
            Self::HarmonicKernel { .. } => Err(LabError::InvalidParameter(
                "the harmonic kernel is a function of real variables".into(),
            )),
        }
    }

    fn axis(&self) -> Option<ComplexVector> {
        match self {
            Self::Cauchy { zeta } | Self::Log { zeta } | Self::Power { zeta, .. } => Some(zeta.clone()),
            Self::LeviReciprocal(k) | Self::LeviPower { kernel: k, .. } => k.axis(),
            Self::HarmonicKernel { .. } => None,
        }
    }

    fn label(&self) -> String {
        match self {
            Self::Cauchy { zeta } => format!("cauchy:zeta={zeta}"),
            Self::Log { zeta } => format!("log:zeta={zeta}"),
            Self::Power { zeta, q } => format!("power:q={q};zeta={zeta}"),
            Self::LeviReciprocal(k) => format!("levi:domain={};zeta={}", k.domain, k.zeta),
            Self::LeviPower { kernel, q } => {
                format!("levipower:domain={};q={q};zeta={}", kernel.domain, kernel.zeta)
            }
            Self::HarmonicKernel { y } => {
                let ys: Vec<String> = y.iter().map(|v| v.to_string()).collect();
                format!("harmonic:n={};y={}", y.len(), ys.join(","))
            }
        }
    }
}

/// `1 - <z, zeta>` for `|z| < 1`.
fn cauchy_denominator(zeta: &[Complex64], z: &[Complex64]) -> Result<Complex64> {
    check_dim(zeta.len(), z.len())?;
    let r2 = norm_sqr(z);
    if r2 >= 1.0 {
        return Err(LabError::OutsideDomain(format!("|z|^2 = {r2} is not below 1")));
    }
    Ok(one() - pairing(z, zeta))
}

/// `f_zeta(z) = 1 / (1 - <z, zeta>)`.
pub fn eval_cauchy(zeta: &[Complex64], z: &[Complex64]) -> Result<Complex64> {
    Ok(1.0 / cauchy_denominator(zeta, z)?)
}

/// `log f_zeta(z)` with the principal branch.
pub fn eval_log(zeta: &[Complex64], z: &[Complex64]) -> Result<Complex64> {
    Ok(-cauchy_denominator(zeta, z)?.ln())
}

/// `exp((n/q) log f_zeta(z))`.
pub fn eval_power(zeta: &[Complex64], q: f64, z: &[Complex64]) -> Result<Complex64> {
    check_exponent(q)?;
    let n = zeta.len() as f64;
    Ok(((n / q) * eval_log(zeta, z)?).exp())
}

/// `1 / Q(z, zeta)` on an ellipsoidal domain.
pub fn eval_levi_reciprocal(domain: &Domain, zeta: &ComplexVector, z: &[Complex64]) -> Result<Complex64> {
    SingularFunctionSpec::levi_reciprocal(domain.clone(), zeta.clone())?.eval(z)
}

/// `Q(z, zeta)^{-n/q}` on an ellipsoidal domain.
pub fn eval_levi_power(domain: &Domain, zeta: &ComplexVector, q: f64, z: &[Complex64]) -> Result<Complex64> {
    SingularFunctionSpec::levi_power(domain.clone(), zeta.clone(), q)?.eval(z)
}

/// `|x - y|^{2-n}` for `x != y` in `R^n`, `n >= 3`.
pub fn eval_harmonic_kernel(y: &[f64], x: &[f64]) -> Result<f64> {
    check_dim(y.len(), x.len())?;
    let n = y.len();
    if n < 3 {
        return Err(LabError::InvalidParameter("harmonic kernel needs n >= 3".into()));
    }
    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    if d2 == 0.0 {
        return Err(LabError::Singularity);
    }
    Ok(d2.powf(-0.5 * (n as f64 - 2.0)))
}

/// Checks `(log x)^p <= (k!)^{p/k} x^{p/k}` for `x > 1`.
pub fn log_power_bound_holds(x: f64, p: f64, k: u32) -> bool {
    let kf = k as f64;
    let fact: f64 = (1..=k).map(|i| i as f64).product();
    let lhs = x.ln().powf(p);
    let rhs = fact.powf(p / kf) * x.powf(p / kf);
    lhs <= rhs * (1.0 + 1e-14)
}

/// Building block of a holomorphic expression.
#[derive(Debug, Clone, PartialEq)]
pub enum Atom {
    Constant,
    /// `prod z_j^{e_j}` with a not-all-zero exponent vector.
    Monomial(Vec<u32>),
    Singular(SingularFunctionSpec),
}

impl Atom {
    fn eval(&self, z: &[Complex64]) -> Result<Complex64> {
        match self {
            Atom::Constant => Ok(one()),
            Atom::Monomial(e) => {
                if e.len() > z.len() {
                    return Err(LabError::DimensionMismatch { expected: e.len(), got: z.len() });
                }
                Ok(z.iter().zip(e).map(|(c, &k)| c.powu(k)).product())
            }
            Atom::Singular(s) => s.eval(z),
        }
    }

    fn label(&self) -> String {
        match self {
            Atom::Constant => "1".into(),
            Atom::Monomial(e) => {
                let parts: Vec<String> = e
                    .iter()
                    .enumerate()
                    .filter(|(_, &k)| k > 0)
                    .map(|(j, &k)| if k == 1 { format!("z{}", j + 1) } else { format!("z{}^{k}", j + 1) })
                    .collect();
                parts.join("*")
            }
            Atom::Singular(s) => s.label(),
        }
    }
}

/// A finite linear combination `sum c_i atom_i` of holomorphic building blocks.
///
/// Like terms are merged exactly, so `f - f` is the zero function.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HoloFn {
    terms: Vec<(Complex64, Atom)>,
}

impl HoloFn {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: Complex64) -> Self {
        Self::zero().with_term(c, Atom::Constant)
    }

    pub fn monomial(exponents: Vec<u32>) -> Self {
        let atom = if exponents.iter().all(|&k| k == 0) {
            Atom::Constant
        } else {
            Atom::Monomial(exponents)
        };
        Self::zero().with_term(one(), atom)
    }

    pub fn singular(spec: SingularFunctionSpec) -> Result<Self> {
        if matches!(spec, SingularFunctionSpec::HarmonicKernel { .. }) {
            return Err(LabError::InvalidParameter(
                "the harmonic kernel is not holomorphic".into(),
            ));
        }
        Ok(Self::zero().with_term(one(), Atom::Singular(spec)))
    }

    fn with_term(mut self, c: Complex64, atom: Atom) -> Self {
        self.push_term(c, atom);
        self
    }

    fn push_term(&mut self, c: Complex64, atom: Atom) {
        if let Some(idx) = self.terms.iter().position(|(_, a)| *a == atom) {
            self.terms[idx].0 += c;
            if self.terms[idx].0 == Complex64::new(0.0, 0.0) {
                self.terms.remove(idx);
            }
        } else if c != Complex64::new(0.0, 0.0) {
            self.terms.push((c, atom));
        }
    }

    pub fn terms(&self) -> &[(Complex64, Atom)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&self, other: &HoloFn) -> HoloFn {
        let mut out = self.clone();
        for (c, a) in &other.terms {
            out.push_term(*c, a.clone());
        }
        out
    }

    pub fn sub(&self, other: &HoloFn) -> HoloFn {
        self.add(&other.scale(-one()))
    }

    pub fn scale(&self, s: Complex64) -> HoloFn {
        if s == Complex64::new(0.0, 0.0) {
            return HoloFn::zero();
        }
        HoloFn { terms: self.terms.iter().map(|(c, a)| (c * s, a.clone())).collect() }
    }

    pub fn eval(&self, z: &[Complex64]) -> Result<Complex64> {
        let mut acc = Complex64::new(0.0, 0.0);
        for (c, a) in &self.terms {
            acc += c * a.eval(z)?;
        }
        Ok(acc)
    }

    /// Dimension fixed by the singular terms, if any.
    pub fn dim(&self) -> Option<usize> {
        self.terms.iter().find_map(|(_, a)| match a {
            Atom::Singular(s) => Some(s.dim()),
            _ => None,
        })
    }

    /// Checks that the expression can be evaluated on `C^n`.
    pub fn check_dim(&self, n: usize) -> Result<()> {
        for (_, a) in &self.terms {
            match a {
                Atom::Constant => {}
                Atom::Monomial(e) if e.len() <= n => {}
                Atom::Monomial(e) => return Err(LabError::DimensionMismatch { expected: n, got: e.len() }),
                Atom::Singular(s) => check_dim(n, s.dim())?,
            }
        }
        Ok(())
    }

    /// A unit vector `xi` such that `f(z)` depends on `<z, xi>` only, if one exists.
    pub fn zonal_axis(&self, n: usize) -> Option<ComplexVector> {
        let mut axis: Option<ComplexVector> = None;
        for (_, atom) in &self.terms {
            let candidate = match atom {
                Atom::Constant => continue,
                Atom::Monomial(e) => {
                    let active: Vec<usize> = (0..e.len()).filter(|&j| e[j] > 0).collect();
                    if active.len() != 1 || e.len() > n {
                        return None;
                    }
                    ComplexVector::basis(n, active[0])
                }
                Atom::Singular(s) => s.axis()?,
            };
            if candidate.dim() != n {
                return None;
            }
            match &axis {
                None => axis = Some(candidate),
                Some(a) => {
                    if (a.pairing(&candidate).norm() - 1.0).abs() > 1e-12 {
                        return None;
                    }
                }
            }
        }
        Some(axis.unwrap_or_else(|| ComplexVector::basis(n, 0)))
    }

    /// Boundary points carrying singular terms.
    pub fn singular_centers(&self) -> Vec<ComplexVector> {
        let mut out: Vec<ComplexVector> = Vec::new();
        for (_, atom) in &self.terms {
            if let Atom::Singular(s) = atom {
                let c = s.center();
                if !out.iter().any(|o| o.distance(&c) < 1e-14) {
                    out.push(c);
                }
            }
        }
        out
    }

    pub fn label(&self) -> String {
        if self.terms.is_empty() {
            return "0".into();
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(c, a)| {
                if *c == one() {
                    a.label()
                } else if matches!(a, Atom::Constant) {
                    crate::vector::format_complex(*c)
                } else {
                    format!("({})*[{}]", crate::vector::format_complex(*c), a.label())
                }
            })
            .collect();
        parts.join(" + ")
    }
}

impl fmt::Display for HoloFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label())
    }
}

/// A parsed function: holomorphic expression or harmonic kernel.
#[derive(Debug, Clone, PartialEq)]
pub enum FunctionExpr {
    Holomorphic(HoloFn),
    Harmonic { y: Vec<f64> },
}

/// Parses `cauchy:zeta=1,0`, `log:zeta=..`, `power:q=1.5;zeta=1,0`,
/// `levi:domain=ellipsoid:a=1,2;zeta=1,0`, `levipower:domain=..;q=..;zeta=..`,
/// `harmonic:n=3;y=1,0,0`, `const:2`, `poly:z1^2+3`.
pub fn parse_function(s: &str) -> Result<FunctionExpr> {
    let s = s.trim();
    let (kind, rest) = s
        .split_once(':')
        .ok_or_else(|| LabError::Parse(format!("function '{s}' lacks a kind prefix")))?;
    let holo = |spec: Result<SingularFunctionSpec>| -> Result<FunctionExpr> {
        Ok(FunctionExpr::Holomorphic(HoloFn::singular(spec?)?))
    };
    match kind {
        "cauchy" => holo(SingularFunctionSpec::cauchy(zeta_param(rest)?)),
        "log" => holo(SingularFunctionSpec::log(zeta_param(rest)?)),
        "power" => {
            let (q, zeta) = q_and_zeta(rest)?;
            holo(SingularFunctionSpec::power(zeta, q))
        }
        "levi" | "levipower" => {
            let (domain_str, tail) = split_domain_param(rest)?;
            let domain = parse_domain(&domain_str)?;
            if kind == "levi" {
                holo(SingularFunctionSpec::levi_reciprocal(domain, zeta_param(&tail)?))
            } else {
                let (q, zeta) = q_and_zeta(&tail)?;
                holo(SingularFunctionSpec::levi_power(domain, zeta, q))
            }
        }
        "harmonic" => {
            let params = kv_params(rest)?;
            let n: usize = lookup(&params, "n")?
                .parse()
                .map_err(|_| LabError::Parse("invalid n".into()))?;
            let y = lookup(&params, "y")?
                .split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|_| LabError::Parse(format!("invalid y '{v}'"))))
                .collect::<Result<Vec<_>>>()?;
            check_dim(n, y.len())?;
            SingularFunctionSpec::harmonic(y.clone())?;
            Ok(FunctionExpr::Harmonic { y })
        }
        "const" => {
            let c = crate::vector::parse_complex(rest)?;
            Ok(FunctionExpr::Holomorphic(HoloFn::constant(c)))
        }
        "poly" => Ok(FunctionExpr::Holomorphic(parse_polynomial(rest)?)),
        other => Err(LabError::Parse(format!("unknown function kind '{other}'"))),
    }
}

/// Parses a holomorphic expression; rejects the harmonic kernel.
pub fn parse_holomorphic(s: &str) -> Result<HoloFn> {
    match parse_function(s)? {
        FunctionExpr::Holomorphic(f) => Ok(f),
        FunctionExpr::Harmonic { .. } => Err(LabError::Parse(format!("'{s}' is not holomorphic"))),
    }
}

fn kv_params(rest: &str) -> Result<Vec<(String, String)>> {
    rest.split(';')
        .map(|seg| {
            seg.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| LabError::Parse(format!("expected key=value, got '{seg}'")))
        })
        .collect()
}

fn lookup(params: &[(String, String)], key: &str) -> Result<String> {
    params
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.clone())
        .ok_or_else(|| LabError::Parse(format!("missing parameter '{key}'")))
}

fn zeta_param(rest: &str) -> Result<ComplexVector> {
    parse_complex_vector(&lookup(&kv_params(rest)?, "zeta")?)
}

fn q_and_zeta(rest: &str) -> Result<(f64, ComplexVector)> {
    let params = kv_params(rest)?;
    let q = lookup(&params, "q")?
        .parse::<f64>()
        .map_err(|_| LabError::Parse("invalid q".into()))?;
    Ok((q, parse_complex_vector(&lookup(&params, "zeta")?)?))
}

/// Splits `domain=<domain>;k=v;...`, where the domain string may itself contain `;`.
fn split_domain_param(rest: &str) -> Result<(String, String)> {
    let body = rest
        .strip_prefix("domain=")
        .ok_or_else(|| LabError::Parse(format!("expected domain=... in '{rest}'")))?;
    let segments: Vec<&str> = body.split(';').collect();
    let mut cut = segments.len();
    while cut > 1 {
        let key = segments[cut - 1].split('=').next().unwrap_or("").trim();
        if key == "zeta" || key == "q" {
            cut -= 1;
        } else {
            break;
        }
    }
    Ok((segments[..cut].join(";"), segments[cut..].join(";")))
}

fn parse_polynomial(s: &str) -> Result<HoloFn> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = |why: &str| LabError::Parse(format!("invalid polynomial '{s}': {why}"));
    if t.is_empty() {
        return Err(bad("empty"));
    }
    let bytes = t.as_bytes();
    let mut terms = Vec::new();
    let mut start = 0;
    for i in 1..bytes.len() {
        let c = bytes[i] as char;
        if (c == '+' || c == '-') && !matches!(bytes[i - 1] as char, 'e' | 'E' | '^' | '*') {
            terms.push(&t[start..i]);
            start = i;
        }
    }
    terms.push(&t[start..]);
    let mut vars: Vec<(usize, u32)> = Vec::new();
    let mut parsed: Vec<(f64, Vec<(usize, u32)>)> = Vec::new();
    let mut n = 0usize;
    for term in terms {
        let (sign, body) = match term.as_bytes()[0] as char {
            '-' => (-1.0, &term[1..]),
            '+' => (1.0, &term[1..]),
            _ => (1.0, term),
        };
        let mut coef = sign;
        vars.clear();
        for factor in body.split('*') {
            if let Some(rest) = factor.strip_prefix('z') {
                let (idx, pow) = match rest.split_once('^') {
                    Some((i, p)) => (i, p.parse::<u32>().map_err(|_| bad("exponent"))?),
                    None => (rest, 1),
                };
                let j: usize = idx.parse().map_err(|_| bad("variable index"))?;
                if j == 0 {
                    return Err(bad("variables are numbered from 1"));
                }
                n = n.max(j);
                vars.push((j - 1, pow));
            } else {
                coef *= factor.parse::<f64>().map_err(|_| bad("coefficient"))?;
            }
        }
        parsed.push((coef, vars.clone()));
    }
    let n = n.max(1);
    let mut out = HoloFn::zero();
    for (coef, vars) in parsed {
        let mut e = vec![0u32; n];
        for (j, p) in vars {
            e[j] += p;
        }
        let atom = if e.iter().all(|&k| k == 0) { Atom::Constant } else { Atom::Monomial(e) };
        out.push_term(Complex64::new(coef, 0.0), atom);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn e1() -> ComplexVector {
        ComplexVector::basis(2, 0)
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn cauchy_examples() {
        assert_eq!(eval_cauchy(&e1(), &ComplexVector::zeros(2)).unwrap(), one());
        let z = vec![c(0.5, 0.0), c(0.0, 0.5)];
        assert_relative_eq!(eval_cauchy(&e1(), &z).unwrap().re, 2.0, epsilon = 1e-15);
        assert!(matches!(eval_cauchy(&e1(), &[one(), c(0.0, 0.0)]), Err(LabError::OutsideDomain(_))));
    }

    #[test]
    fn cauchy_is_stable_near_the_pole() {
        let zeta = ComplexVector::new(vec![c(0.0, 0.0), c(0.0, 1.0)]);
        for k in 1..=9 {
            let gap = 10f64.powi(-k);
            let r = 1.0 - gap;
            let z = zeta.scaled_real(r);
            let v = eval_cauchy(&zeta, &z).unwrap();
            let exact = 1.0 / (1.0 - r);
            assert!(((v.re - exact) / exact).abs() < 1e-9, "gap {gap}");
        }
    }

    #[test]
    fn log_and_power_examples() {
        assert_eq!(eval_log(&e1(), &ComplexVector::zeros(2)).unwrap(), c(0.0, 0.0));
        let r = 0.75;
        let v = eval_log(&e1(), &e1().scaled_real(r)).unwrap();
        assert_relative_eq!(v.re, (1.0 / (1.0 - r)).ln(), epsilon = 1e-14);
        assert_eq!(v.im, 0.0);
        let v = eval_power(&e1(), 2.0, &e1().scaled_real(r)).unwrap();
        assert_relative_eq!(v.re, 4.0, epsilon = 1e-12);
        assert_eq!(eval_power(&e1(), 1.5, &ComplexVector::zeros(2)).unwrap(), one());
    }

    #[test]
    fn levi_examples() {
        let ball = Domain::unit_ball(2).unwrap();
        let z = e1().scaled_real(0.99);
        let v = eval_levi_reciprocal(&ball, &e1(), &z).unwrap();
        assert_relative_eq!(v.re, 1.0 / 0.02, max_relative = 1e-12);
        let ell = Domain::ellipsoid(vec![1.0, 2.0]).unwrap();
        let v = eval_levi_reciprocal(&ell, &e1(), &[c(0.9, 0.0), c(0.0, 0.0)]).unwrap();
        assert_relative_eq!(v.re, 5.0, max_relative = 1e-12);
        let v = eval_levi_power(&ball, &e1(), 2.0, &z).unwrap();
        assert_relative_eq!(v.re, 1.0 / 0.02, max_relative = 1e-12);
        let v = eval_levi_power(&ball, &e1(), 3.0, &ComplexVector::zeros(2)).unwrap();
        assert_relative_eq!(v.re, 2f64.powf(-2.0 / 3.0), max_relative = 1e-12);
        assert!(matches!(eval_levi_reciprocal(&ball, &e1(), &e1()), Err(LabError::Singularity)));
        let warped = parse_domain("warped:base=ball:n=2;u=x1").unwrap();
        assert!(matches!(
            eval_levi_reciprocal(&warped, &e1(), &ComplexVector::zeros(2)),
            Err(LabError::UnsupportedDomain(_))
        ));
        let outside = [c(1.5, 0.0), c(0.0, 0.0)];
        assert!(matches!(
            eval_levi_reciprocal(&ball, &e1(), &outside),
            Err(LabError::OutsideZeroFreeRegion(_))
        ));
    }

    #[test]
    fn harmonic_examples() {
        let y = [1.0, 0.0, 0.0];
        assert_relative_eq!(eval_harmonic_kernel(&y, &[0.5, 0.0, 0.0]).unwrap(), 2.0, epsilon = 1e-15);
        let y4 = [1.0, 0.0, 0.0, 0.0];
        assert_relative_eq!(eval_harmonic_kernel(&y4, &[0.5, 0.0, 0.0, 0.0]).unwrap(), 4.0, epsilon = 1e-14);
        assert!(matches!(eval_harmonic_kernel(&y, &y), Err(LabError::Singularity)));
    }

    #[test]
    fn harmonic_kernel_has_small_discrete_laplacian() {
        let y = [1.0, 0.0, 0.0];
        let x = [0.2, -0.3, 0.1];
        let h = 1e-3;
        let f0 = eval_harmonic_kernel(&y, &x).unwrap();
        let mut lap = 0.0;
        for k in 0..3 {
            let mut p = x;
            let mut m = x;
            p[k] += h;
            m[k] -= h;
            lap += eval_harmonic_kernel(&y, &p).unwrap() + eval_harmonic_kernel(&y, &m).unwrap() - 2.0 * f0;
        }
        lap /= h * h;
        let d2: f64 = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum();
        assert!(lap.abs() < 1e-3 * f0 / d2, "laplacian {lap}");
    }

    #[test]
    fn parses_function_strings() {
        for s in [
            "cauchy:zeta=1,0",
            "log:zeta=0.6,0.8i",
            "power:q=1.5;zeta=1,0",
            "levi:domain=ellipsoid:a=1,2;zeta=1,0",
            "levipower:domain=ellipsoid:a=1,2;q=2;zeta=1,0",
        ] {
            let f = parse_holomorphic(s).unwrap();
            assert_eq!(f.label(), s);
        }
        assert!(matches!(
            parse_function("harmonic:n=3;y=1,0,0").unwrap(),
            FunctionExpr::Harmonic { .. }
        ));
        assert!(parse_function("cauchy:zeta=1,1").is_err());
        assert!(parse_function("power:q=0.5;zeta=1,0").is_err());
        let p = parse_holomorphic("poly:z1^2+3").unwrap();
        assert_eq!(p.eval(&[c(2.0, 0.0), c(0.0, 0.0)]).unwrap(), c(7.0, 0.0));
        let k = parse_holomorphic("const:2").unwrap();
        assert_eq!(k.eval(&[c(0.3, 0.0), c(0.1, 0.0)]).unwrap(), c(2.0, 0.0));
    }

    #[test]
    fn subtraction_merges_like_terms() {
        let f = parse_holomorphic("cauchy:zeta=1,0").unwrap();
        assert!(f.sub(&f).is_zero());
        let g = f.add(&HoloFn::constant(one()));
        assert_eq!(g.sub(&f), HoloFn::constant(one()));
    }

    #[test]
    fn zonal_axes() {
        let f = parse_holomorphic("power:q=1.5;zeta=0.6,0.8i").unwrap();
        let axis = f.zonal_axis(2).unwrap();
        assert_eq!(axis, ComplexVector::new(vec![c(0.6, 0.0), c(0.0, 0.8)]));
        let g = f.add(&HoloFn::constant(c(3.0, 0.0)));
        assert!(g.zonal_axis(2).is_some());
        let h = f.add(&parse_holomorphic("cauchy:zeta=1,0").unwrap());
        assert!(h.zonal_axis(2).is_none());
        assert_eq!(h.singular_centers().len(), 2);
        let levi = parse_holomorphic("levi:domain=ellipsoid:a=1,2;zeta=1,0").unwrap();
        assert_eq!(levi.zonal_axis(2).unwrap(), e1());
        assert_eq!(HoloFn::monomial(vec![0, 2]).zonal_axis(2).unwrap(), ComplexVector::basis(2, 1));
        assert!(HoloFn::monomial(vec![1, 1]).zonal_axis(2).is_none());
    }

    #[test]
    fn log_power_bound_examples() {
        for &x in &[1.5, 10.0, 1e3, 1e8] {
            for &p in &[1.0, 2.0, 4.0] {
                for &k in &[1, 2, 5] {
                    assert!(log_power_bound_holds(x, p, k));
                }
            }
        }
    }
}
