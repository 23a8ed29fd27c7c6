//! Deterministic quadrature for integrands depending on `lambda = <z, xi>` only.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::disk::{band_weight, fibre_area};
use super::{IntegralEstimate, Method};
use crate::error::{LabError, Result};
use crate::numerics::{gauss_legendre, pairwise_sum, push_mapped_rule};

/// Panel layout of the tensor grid in `(|lambda|, arg lambda)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZonalGrid {
    /// Gauss-Legendre order per panel; the error estimate compares with half this order.
    pub order: usize,
    /// Radial panel edges `1 - 2^{-j}` for `j = 1..=radial_levels`.
    pub radial_levels: u32,
    /// Angular panels graded toward `arg lambda = 0` down to `pi 2^{-angular_levels}`.
    pub angular_levels: u32,
}

impl Default for ZonalGrid {
    fn default() -> Self {
        Self { order: 8, radial_levels: 40, angular_levels: 40 }
    }
}

impl ZonalGrid {
    fn validate(&self) -> Result<()> {
        if self.order < 2 || self.order % 2 != 0 {
            return Err(LabError::InvalidParameter("zonal order must be even and >= 2".into()));
        }
        if self.radial_levels < 2 || self.angular_levels < 2 {
            return Err(LabError::InvalidParameter("zonal grid needs at least two levels".into()));
        }
        Ok(())
    }
}

/// Restriction `lo < Re lambda <= hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    pub lo: f64,
    pub hi: f64,
}

impl Band {
    pub fn full() -> Self {
        Self { lo: -1.0, hi: 1.0 }
    }
}

/// Precomputed nodes `(lambda, weight)` for one dimension and band.
#[derive(Debug, Clone)]
pub struct ZonalRule {
    fine: Vec<(Complex64, f64)>,
    coarse: Vec<(Complex64, f64)>,
}

const SPLIT_LEVELS: i32 = 34;

fn radial_edges(grid: &ZonalGrid, splits: &[f64]) -> Vec<f64> {
    let mut edges = vec![0.0];
    edges.extend((1..=grid.radial_levels).map(|j| 1.0 - 2f64.powi(-(j as i32))));
    edges.push(1.0);
    for &s in splits {
        if !(s > 0.0 && s < 1.0) {
            continue;
        }
        let idx = match edges.iter().position(|&e| e >= s) {
            Some(i) => i,
            None => continue,
        };
        if edges[idx] == s {
            let (a, b) = (edges[idx - 1], edges.get(idx + 1).copied().unwrap_or(1.0));
            let mut extra: Vec<f64> = (1..=SPLIT_LEVELS)
                .flat_map(|j| {
                    let f = 2f64.powi(-j);
                    [s - (s - a) * f, s + (b - s) * f]
                })
                .collect();
            edges.append(&mut extra);
        } else {
            let (a, b) = (edges[idx - 1], edges[idx]);
            edges.push(s);
            for j in 1..=SPLIT_LEVELS {
                let f = 2f64.powi(-j);
                edges.push(s - (s - a) * f);
                edges.push(s + (b - s) * f);
            }
        }
        edges.sort_by(f64::total_cmp);
        edges.dedup();
    }
    edges
}

fn angular_edges(grid: &ZonalGrid) -> Vec<f64> {
    let mut edges = vec![0.0];
    for j in (2..=grid.angular_levels).rev() {
        edges.push(PI * 2f64.powi(-(j as i32)));
    }
    edges.extend([PI / 2.0, 0.75 * PI, PI]);
    edges
}

impl ZonalRule {
    pub fn new(n: usize, grid: &ZonalGrid, band: Band) -> Result<Self> {
        if n < 2 {
            return Err(LabError::InvalidParameter("zonal quadrature needs n >= 2".into()));
        }
        grid.validate()?;
        if band.hi <= band.lo {
            return Err(LabError::EmptyCap("empty band".into()));
        }
        let splits = [band.lo.abs(), band.hi.abs()];
        let redges = radial_edges(grid, &splits);
        let aedges = angular_edges(grid);
        let fine = Self::nodes(n, grid.order, &redges, &aedges, band);
        let coarse = Self::nodes(n, grid.order / 2, &redges, &aedges, band);
        let target = band_weight(n, band.lo, band.hi);
        let total: f64 = pairwise_sum(&fine.iter().map(|(_, w)| *w).collect::<Vec<_>>());
        let rel = (total - target).abs() / target;
        if !(rel <= 1e-10) {
            return Err(LabError::Calibration(rel));
        }
        // exact calibration onto the analytic measure, scaled to sphere units
        let scale = fibre_area(n) * target / total;
        let coarse_total: f64 = coarse.iter().map(|(_, w)| *w).sum();
        let coarse_scale = fibre_area(n) * target / coarse_total;
        Ok(Self {
            fine: fine.into_iter().map(|(l, w)| (l, w * scale)).collect(),
            coarse: coarse.into_iter().map(|(l, w)| (l, w * coarse_scale)).collect(),
        })
    }

    fn nodes(n: usize, order: usize, redges: &[f64], aedges: &[f64], band: Band) -> Vec<(Complex64, f64)> {
        let (x, w) = gauss_legendre(order);
        let mut radial = Vec::new();
        for pair in redges.windows(2) {
            push_mapped_rule(&x, &w, pair[0], pair[1], &mut radial);
        }
        let mut angular_ref = Vec::new();
        for pair in aedges.windows(2) {
            push_mapped_rule(&x, &w, pair[0], pair[1], &mut angular_ref);
        }
        let mut out = Vec::with_capacity(radial.len() * angular_ref.len() * 2);
        for &(rho, wr) in &radial {
            let th_a = (band.hi / rho).clamp(-1.0, 1.0).acos();
            let th_b = (band.lo / rho).clamp(-1.0, 1.0).acos();
            if th_b <= th_a {
                continue;
            }
            let jac = (th_b - th_a) / PI;
            let radial_weight = wr * rho * (1.0 - rho * rho).powi(n as i32 - 2);
            for &(t, wt) in &angular_ref {
                let theta = th_a + jac * t;
                let weight = radial_weight * wt * jac;
                out.push((Complex64::from_polar(rho, theta), weight));
                out.push((Complex64::from_polar(rho, -theta), weight));
            }
        }
        out
    }

    pub fn node_count(&self) -> usize {
        self.fine.len()
    }

    /// Integrates `g(lambda)` against the sphere measure pushed to the disk.
    pub fn integrate(&self, g: &dyn Fn(Complex64) -> Result<f64>) -> Result<IntegralEstimate> {
        let eval = |nodes: &[(Complex64, f64)]| -> Result<(f64, bool)> {
            let mut terms = Vec::with_capacity(nodes.len());
            let mut overflow = false;
            for &(l, w) in nodes {
                let v = g(l)?;
                if !v.is_finite() || v.abs() > super::OVERFLOW {
                    overflow = true;
                }
                terms.push(v * w);
            }
            Ok((pairwise_sum(&terms), overflow))
        };
        let (fine, of) = eval(&self.fine)?;
        let (coarse, oc) = eval(&self.coarse)?;
        Ok(IntegralEstimate::new(fine, (fine - coarse).abs(), self.fine.len() as u64, Method::Zonal, of || oc))
    }
}

/// One-shot zonal integration over the full sphere (or a band, when given).
pub fn integrate_zonal(
    g: &dyn Fn(Complex64) -> Result<f64>,
    n: usize,
    grid: &ZonalGrid,
    band: Option<Band>,
) -> Result<IntegralEstimate> {
    ZonalRule::new(n, grid, band.unwrap_or_else(Band::full))?.integrate(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::sphere_area;
    use approx::assert_relative_eq;

    #[test]
    fn constant_gives_sphere_area() {
        for n in 2..5 {
            let e = integrate_zonal(&|_| Ok(1.0), n, &ZonalGrid::default(), None).unwrap();
            assert_relative_eq!(e.value, sphere_area(n), max_relative = 1e-14);
        }
    }

    #[test]
    fn odd_integrand_vanishes() {
        let e = integrate_zonal(&|l| Ok(l.re), 2, &ZonalGrid::default(), None).unwrap();
        assert!(e.value.abs() < 1e-12);
    }

    #[test]
    fn matches_hypergeometric_closed_form() {
        // n = 2, |1 - r lambda|^{-2}: area * log(1/(1-r^2)) / r^2
        for &r in &[0.5, 0.9, 1.0 - 2f64.powi(-20), 1.0 - 2f64.powi(-29)] {
            let e = integrate_zonal(
                &|l: Complex64| Ok((Complex64::new(1.0, 0.0) - r * l).norm_sqr().recip()),
                2,
                &ZonalGrid::default(),
                None,
            )
            .unwrap();
            let exact = sphere_area(2) * (1.0 / (1.0 - r * r)).ln() / (r * r);
            assert_relative_eq!(e.value, exact, max_relative = 1e-8);
            assert!(e.stderr < 1e-4 * exact, "r {r}: stderr {} value {}", e.stderr, e.value);
        }
    }

    #[test]
    fn band_measures_are_calibrated() {
        for n in [2usize, 3] {
            for (lo, hi) in [(0.875, 1.0), (-1.0, 0.875), (-0.3, 0.4)] {
                let e = integrate_zonal(&|_| Ok(1.0), n, &ZonalGrid::default(), Some(Band { lo, hi })).unwrap();
                assert_relative_eq!(e.value, fibre_area(n) * band_weight(n, lo, hi), max_relative = 1e-13);
            }
        }
    }
}
