//! Monte Carlo integration over the unit sphere and spherical caps.

use num_complex::Complex64;

use super::disk::{fibre_area, lift, sample_band, band_weight, RingGeometry};
use super::{monte_carlo, IntegralEstimate, Method};
use crate::error::{LabError, Result};
use crate::geometry::random_unit_vector;
use crate::numerics::{mix_seed, sphere_area};
use crate::vector::pairing;

pub const MIN_COUNT: usize = 100;

fn check_count(count: usize) -> Result<()> {
    if count < MIN_COUNT {
        Err(LabError::InvalidParameter(format!("count must be at least {MIN_COUNT}, got {count}")))
    } else {
        Ok(())
    }
}

/// Plain Monte Carlo over `S^{2n-1}` with unnormalized surface measure.
pub fn integrate_sphere(
    g: &dyn Fn(&[Complex64]) -> Result<f64>,
    n: usize,
    count: usize,
    seed: u64,
) -> Result<IntegralEstimate> {
    check_count(count)?;
    if n < 1 {
        return Err(LabError::InvalidParameter("dimension must be positive".into()));
    }
    let area = sphere_area(n);
    let r = monte_carlo(count, seed, |rng| g(&random_unit_vector(rng, n)))?;
    Ok(r.scaled(area, Method::SphereMonteCarlo))
}

/// Cap `{z in S : |z - center| < radius}` as the band `Re <z, center> > 1 - radius^2/2`.
pub(crate) fn cap_band(radius: f64, complement: bool) -> Result<(f64, f64)> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(LabError::EmptyCap(format!("cap radius {radius} is not positive")));
    }
    let c = 1.0 - 0.5 * radius * radius;
    if complement {
        if c <= -1.0 {
            return Err(LabError::EmptyCap("the cap covers the whole sphere".into()));
        }
        Ok((-1.0, c))
    } else {
        Ok((c.max(-1.0), 1.0))
    }
}

/// Monte Carlo over a cap (or its complement) of the unit sphere.
pub fn integrate_cap(
    g: &dyn Fn(&[Complex64]) -> Result<f64>,
    center: &[Complex64],
    radius: f64,
    complement: bool,
    count: usize,
    seed: u64,
) -> Result<IntegralEstimate> {
    check_count(count)?;
    let n = center.len();
    if (pairing(center, center).re - 1.0).abs() > 1e-12 {
        return Err(LabError::InvalidParameter("cap centre must be a unit vector".into()));
    }
    let (lo, hi) = cap_band(radius, complement)?;
    let measure = fibre_area(n) * band_weight(n, lo, hi);
    if !(measure > 0.0) {
        return Err(LabError::EmptyCap(format!("cap of radius {radius} has zero measure")));
    }
    let r = monte_carlo(count, seed, |rng| {
        let l = sample_band(rng, n, lo, hi);
        g(&lift(rng, center, l))
    })?;
    Ok(r.scaled(measure, Method::CapMonteCarlo))
}

/// Importance-sampled Monte Carlo over the sphere with geometric rings about
/// each singular centre.
///
/// With one centre the rings are strata with equal budgets; with several, a
/// defensive mixture (uniform plus rings about every centre) is used.
pub fn integrate_sphere_focused(
    g: &dyn Fn(&[Complex64]) -> Result<f64>,
    centers: &[Vec<Complex64>],
    rings: usize,
    count: usize,
    seed: u64,
) -> Result<IntegralEstimate> {
    check_count(count)?;
    let n = centers
        .first()
        .map(|c| c.len())
        .ok_or_else(|| LabError::InvalidParameter("focused sampling needs a centre".into()))?;
    let geom = RingGeometry::new(n, rings);
    if centers.len() == 1 {
        stratified_rings(g, &centers[0], &geom, count, seed, &|z| Ok(z.to_vec()), Method::FocusedMonteCarlo)
    } else {
        mixture_rings(g, centers, &geom, count, seed)
    }
}

/// Stratified estimate over the rings about `xi` on the sphere, integrating
/// `g(map(z))` against the sphere measure.
pub(crate) fn stratified_rings(
    g: &dyn Fn(&[Complex64]) -> Result<f64>,
    xi: &[Complex64],
    geom: &RingGeometry,
    count: usize,
    seed: u64,
    map: &dyn Fn(&[Complex64]) -> Result<Vec<Complex64>>,
    method: Method,
) -> Result<IntegralEstimate> {
    let strata = geom.strata();
    let per = (count / strata).max(MIN_COUNT / 4);
    let fibre = fibre_area(xi.len());
    let mut value = 0.0;
    let mut var = 0.0;
    let mut overflow = false;
    let mut total = 0u64;
    for i in 0..strata {
        let r = monte_carlo(per, mix_seed(seed, i as u64), |rng| {
            let l = geom.sample(rng, i);
            let z = lift(rng, xi, l);
            g(&map(&z)?)
        })?;
        let mu = fibre * geom.weight(i);
        value += mu * r.mean;
        var += (mu * r.stderr).powi(2);
        overflow |= r.overflowed;
        total += per as u64;
    }
    Ok(IntegralEstimate::new(value, var.sqrt(), total, method, overflow))
}

fn mixture_rings(
    g: &dyn Fn(&[Complex64]) -> Result<f64>,
    centers: &[Vec<Complex64>],
    geom: &RingGeometry,
    count: usize,
    seed: u64,
) -> Result<IntegralEstimate> {
    let n = centers[0].len();
    let area = sphere_area(n);
    let fibre = fibre_area(n);
    let strata = geom.strata();
    // component 0 is uniform; then (centre, stratum) pairs
    let n_components = 1 + centers.len() * strata;
    let uniform_share = 0.2;
    let ring_share = (1.0 - uniform_share) / (centers.len() * strata) as f64;
    let density = |z: &[Complex64]| -> f64 {
        let mut q = uniform_share / area;
        for c in centers {
            let i = geom.stratum_of(pairing(z, c));
            q += ring_share / (fibre * geom.weight(i));
        }
        q
    };
    let uniform_count = ((count as f64) * uniform_share).ceil() as usize;
    let ring_count = (((count - uniform_count.min(count)) as f64) / (n_components - 1) as f64).ceil() as usize;
    let ring_count = ring_count.max(8);
    let mut parts = Vec::with_capacity(n_components);
    parts.push(monte_carlo(uniform_count.max(MIN_COUNT / 4), mix_seed(seed, 0), |rng| {
        let z = random_unit_vector(rng, n);
        Ok(g(&z)? / density(&z))
    })?);
    for (ci, c) in centers.iter().enumerate() {
        for i in 0..strata {
            let tag = 1 + (ci * strata + i) as u64;
            parts.push(monte_carlo(ring_count, mix_seed(seed, tag), |rng| {
                let l = geom.sample(rng, i);
                let z = lift(rng, c, l);
                Ok(g(&z)? / density(&z))
            })?);
        }
    }
    // balance-heuristic weights: each part estimates its share of the integral
    let mut value = 0.0;
    let mut var = 0.0;
    let mut total = 0;
    let mut overflow = false;
    for (k, r) in parts.iter().enumerate() {
        let share = if k == 0 { uniform_share } else { ring_share };
        value += share * r.mean;
        var += (share * r.stderr).powi(2);
        total += r.count;
        overflow |= r.overflowed;
    }
    Ok(IntegralEstimate::new(value, var.sqrt(), total, Method::FocusedMonteCarlo, overflow))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vector::ComplexVector;
    use approx::assert_relative_eq;

    fn e1() -> Vec<Complex64> {
        ComplexVector::basis(2, 0).into_inner()
    }

    #[test]
    fn sphere_constant_is_exact() {
        let e = integrate_sphere(&|_| Ok(1.0), 2, 1000, 7).unwrap();
        assert_relative_eq!(e.value, 2.0 * std::f64::consts::PI.powi(2), max_relative = 1e-14);
        assert!(e.stderr < 1e-10);
    }

    #[test]
    fn sphere_odd_integrand_is_near_zero() {
        let e = integrate_sphere(&|z| Ok(z[0].re), 2, 20_000, 11).unwrap();
        assert!(e.value.abs() < 4.0 * e.stderr);
    }

    #[test]
    fn too_few_samples_is_an_error() {
        assert!(integrate_sphere(&|_| Ok(1.0), 2, 99, 7).is_err());
    }

    #[test]
    fn cap_constant_is_exact_and_whole_cap_is_sphere() {
        let e = integrate_cap(&|_| Ok(1.0), &e1(), 2.0, false, 1000, 3).unwrap();
        assert_relative_eq!(e.value, sphere_area(2), max_relative = 1e-12);
        let small = integrate_cap(&|_| Ok(1.0), &e1(), 0.5, false, 1000, 3).unwrap();
        let big = integrate_cap(&|_| Ok(1.0), &e1(), 0.7, false, 1000, 3).unwrap();
        assert!(small.value < big.value);
        assert!(integrate_cap(&|_| Ok(1.0), &e1(), 2.5, true, 1000, 3).is_err());
        assert!(integrate_cap(&|_| Ok(1.0), &e1(), 0.0, false, 1000, 3).is_err());
    }

    #[test]
    fn cap_samples_lie_in_cap() {
        let bad = std::cell::Cell::new(0usize);
        let e1v = e1();
        integrate_cap(
            &|z| {
                let d: f64 = z.iter().zip(&e1v).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
                if d >= 0.5 + 1e-12 {
                    bad.set(bad.get() + 1);
                }
                Ok(1.0)
            },
            &e1v,
            0.5,
            false,
            2000,
            5,
        )
        .unwrap();
        assert_eq!(bad.get(), 0);
    }

    #[test]
    fn focused_matches_plain_for_smooth_integrands() {
        let g = |z: &[Complex64]| Ok(1.0 + z[0].norm_sqr());
        let plain = integrate_sphere(&g, 2, 50_000, 1).unwrap();
        let focused = integrate_sphere_focused(&g, &[e1()], 8, 50_000, 1).unwrap();
        let two = integrate_sphere_focused(&g, &[e1(), ComplexVector::basis(2, 1).into_inner()], 8, 50_000, 1).unwrap();
        let exact = 1.5 * sphere_area(2);
        for e in [plain, focused, two] {
            assert!((e.value - exact).abs() < 4.0 * e.stderr.max(1e-12), "{e:?}");
        }
    }
}
