//! Surface integration over spheres, caps and level sets.

mod disk;
mod level;
mod sphere;
mod zonal;

use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;

use crate::error::{LabError, Result};
use crate::geometry::{random_unit_vector, Domain};
use crate::numerics::{chunk_rng, sphere_area, ChunkedMoments, CHUNK};
use crate::vector::ComplexVector;

pub use disk::{band_weight, fibre_area, rings_for_scale, RingGeometry};
pub use level::{integrate_level_set, BallRegion, LevelMethod, LevelOptions};
pub use sphere::{integrate_cap, integrate_sphere, integrate_sphere_focused, MIN_COUNT};
pub use zonal::{integrate_zonal, Band, ZonalGrid, ZonalRule};

pub(crate) use level::level_axes;
pub(crate) use sphere::cap_band;

/// Integrand magnitudes above this are treated as overflow.
pub const OVERFLOW: f64 = 1e300;

/// Default Monte Carlo sample count per integral.
pub const DEFAULT_COUNT: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    SphereMonteCarlo,
    CapMonteCarlo,
    FocusedMonteCarlo,
    Zonal,
    Parametrized,
    ThinShell,
    Deterministic,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::SphereMonteCarlo => "sphere-mc",
            Method::CapMonteCarlo => "cap-mc",
            Method::FocusedMonteCarlo => "focused-mc",
            Method::Zonal => "zonal",
            Method::Parametrized => "parametrized",
            Method::ThinShell => "thin-shell",
            Method::Deterministic => "deterministic",
        }
    }

    pub fn is_monte_carlo(&self) -> bool {
        !matches!(self, Method::Zonal | Method::Deterministic)
    }
}

/// A surface integral with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegralEstimate {
    pub value: f64,
    pub stderr: f64,
    pub count: u64,
    pub method: Method,
    /// Set when some integrand value was non-finite or exceeded [`OVERFLOW`].
    pub overflowed: bool,
}

impl IntegralEstimate {
    pub fn new(value: f64, stderr: f64, count: u64, method: Method, overflowed: bool) -> Self {
        let overflowed = overflowed || !value.is_finite() || value.abs() > OVERFLOW;
        let stderr = if stderr.is_finite() { stderr.abs() } else { f64::INFINITY };
        Self { value, stderr, count, method, overflowed }
    }

    /// Standard error relative to the value (infinite for a zero value with noise).
    pub fn relative_error(&self) -> f64 {
        if self.value != 0.0 {
            self.stderr / self.value.abs()
        } else if self.stderr == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Mean, error and overflow flag of a Monte Carlo run.
#[derive(Debug, Clone, Copy)]
pub(crate) struct McResult {
    pub mean: f64,
    pub stderr: f64,
    pub count: u64,
    pub overflowed: bool,
}

impl McResult {
    pub fn scaled(&self, measure: f64, method: Method) -> IntegralEstimate {
        IntegralEstimate::new(measure * self.mean, measure * self.stderr, self.count, method, self.overflowed)
    }
}

/// Averages `draw` over `count` samples taken from counter-based chunk streams.
pub(crate) fn monte_carlo<F>(count: usize, seed: u64, mut draw: F) -> Result<McResult>
where
    F: FnMut(&mut ChaCha8Rng) -> Result<f64>,
{
    let mut moments = ChunkedMoments::default();
    let mut overflowed = false;
    let chunks = count.div_ceil(CHUNK);
    for c in 0..chunks {
        let mut rng = chunk_rng(seed, c as u64);
        let m = CHUNK.min(count - c * CHUNK);
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..m {
            let v = draw(&mut rng)?;
            if !v.is_finite() || v.abs() > OVERFLOW {
                overflowed = true;
            }
            sum += v;
            sum_sq += v * v;
        }
        moments.push_chunk(sum, sum_sq, m as u64);
    }
    let (mean, stderr) = moments.mean_and_stderr();
    Ok(McResult { mean, stderr, count: moments.count(), overflowed })
}

/// Uniform Monte Carlo over the sphere without the count floor.
pub(crate) fn integrate_sphere_mapped(
    g: &dyn Fn(&[Complex64]) -> Result<f64>,
    n: usize,
    count: usize,
    seed: u64,
) -> Result<IntegralEstimate> {
    let r = monte_carlo(count, seed, |rng| g(&random_unit_vector(rng, n)))?;
    Ok(r.scaled(sphere_area(n), Method::SphereMonteCarlo))
}

/// The surfaces integrated over.
#[derive(Debug, Clone, PartialEq)]
pub enum Surface {
    Sphere { n: usize },
    Cap { center: ComplexVector, radius: f64, complement: bool },
    Level { domain: Domain, eps: f64, method: LevelMethod, restriction: Option<BallRegion> },
}

/// A seeded node generator for one surface.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceSampler {
    pub surface: Surface,
    pub count: usize,
    pub seed: u64,
    pub focus: Vec<ComplexVector>,
}

impl SurfaceSampler {
    pub fn new(surface: Surface, count: usize, seed: u64) -> Result<Self> {
        if count < MIN_COUNT {
            return Err(LabError::InvalidParameter(format!("count must be at least {MIN_COUNT}")));
        }
        match &surface {
            Surface::Sphere { n } if *n < 1 => {
                return Err(LabError::InvalidParameter("dimension must be positive".into()))
            }
            Surface::Cap { radius, complement, .. } => {
                cap_band(*radius, *complement)?;
            }
            Surface::Level { domain, eps, method, .. } => {
                level::check_level(domain, *eps)?;
                if *method == LevelMethod::Parametrized && !domain.has_parametrized_levels() {
                    return Err(LabError::UnsupportedDomain(format!(
                        "no exact level parametrization for {domain}"
                    )));
                }
            }
            _ => {}
        }
        Ok(Self { surface, count, seed, focus: Vec::new() })
    }

    pub fn with_focus(mut self, focus: Vec<ComplexVector>) -> Self {
        self.focus = focus;
        self
    }

    /// Total surface measure, when known in closed form.
    pub fn total_measure(&self) -> Option<f64> {
        match &self.surface {
            Surface::Sphere { n } => Some(sphere_area(*n)),
            Surface::Cap { center, radius, complement } => {
                let (lo, hi) = cap_band(*radius, *complement).ok()?;
                Some(fibre_area(center.dim()) * band_weight(center.dim(), lo, hi))
            }
            Surface::Level { domain, eps, restriction: None, .. } => {
                let s = level_axes(domain, *eps).ok()?;
                if s.windows(2).all(|w| w[0] == w[1]) {
                    let r = s[0];
                    Some(sphere_area(s.len()) * r.powi(2 * s.len() as i32 - 1))
                } else {
                    None
                }
            }
            Surface::Level { .. } => None,
        }
    }

    pub fn integrate(&self, g: &dyn Fn(&[Complex64]) -> Result<f64>) -> Result<IntegralEstimate> {
        match &self.surface {
            Surface::Sphere { n } => {
                if self.focus.is_empty() {
                    integrate_sphere(g, *n, self.count, self.seed)
                } else {
                    let centers: Vec<Vec<Complex64>> = self.focus.iter().map(|c| c.as_slice().to_vec()).collect();
                    integrate_sphere_focused(g, &centers, 24, self.count, self.seed)
                }
            }
            Surface::Cap { center, radius, complement } => {
                integrate_cap(g, center, *radius, *complement, self.count, self.seed)
            }
            Surface::Level { domain, eps, method, restriction } => {
                let mut opts = LevelOptions::new(self.count, self.seed);
                opts.restriction = restriction.clone();
                opts.focus = self.focus.clone();
                integrate_level_set(g, domain, *eps, *method, &opts)
            }
        }
    }
}

/// Sampler for the level set `{rho = -eps}` of `domain`.
pub fn level_set_sampler(
    domain: &Domain,
    eps: f64,
    method: LevelMethod,
    count: usize,
    seed: u64,
) -> Result<SurfaceSampler> {
    SurfaceSampler::new(
        Surface::Level { domain: domain.clone(), eps, method, restriction: None },
        count,
        seed,
    )
}

/// Unit vector along `center`, used as a cap centre or zonal axis.
pub fn unit(center: &ComplexVector) -> Result<ComplexVector> {
    center.normalized()
}
