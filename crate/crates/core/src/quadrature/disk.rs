//! Sampling and measures in the reduced coordinate `lambda = <z, xi>`.
//!
//! For `z` uniform on the sphere of `C^n`, `lambda` has density proportional to
//! `(1 - |lambda|^2)^{n-2}` on the unit disk, and the sphere measure of
//! `{z : lambda in A}` is `area(S^{2n-3}) * int_A (1 - |lambda|^2)^{n-2} dA`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};

use crate::numerics::{beta_half, gauss_legendre, real_sphere_area, sin_power_integral};
use crate::vector::{norm_sqr, pairing};

/// Area of the fibre sphere `S^{2n-3}` (for `n = 1` this degenerates to 1).
pub fn fibre_area(n: usize) -> f64 {
    if n < 2 {
        1.0
    } else {
        real_sphere_area(2 * n - 2)
    }
}

/// `int_{lo < Re lambda <= hi} (1 - |lambda|^2)^{n-2} dA`.
pub fn band_weight(n: usize, lo: f64, hi: f64) -> f64 {
    let lo = lo.clamp(-1.0, 1.0);
    let hi = hi.clamp(-1.0, 1.0);
    if hi <= lo {
        return 0.0;
    }
    let k = 2 * n - 2;
    let big = sin_power_integral(k, lo.acos());
    let small = sin_power_integral(k, hi.acos());
    beta_half(n - 1) * (big - small)
}

/// Samples `lambda` from the disk weight restricted to `lo < Re lambda <= hi`.
pub fn sample_band<R: Rng>(rng: &mut R, n: usize, lo: f64, hi: f64) -> Complex64 {
    let k = 2 * n - 2;
    let th_small = hi.clamp(-1.0, 1.0).acos();
    let th_big = lo.clamp(-1.0, 1.0).acos();
    let f_small = sin_power_integral(k, th_small);
    let f_big = sin_power_integral(k, th_big);
    let target = f_small + rng.random::<f64>() * (f_big - f_small);
    // safeguarded Newton on F(theta) = target
    let (mut a, mut b) = (th_small, th_big);
    let mut th = 0.5 * (a + b);
    for _ in 0..100 {
        let f = sin_power_integral(k, th) - target;
        if f > 0.0 {
            b = th;
        } else {
            a = th;
        }
        let d = th.sin().powi(k as i32);
        let mut next = if d > 0.0 { th - f / d } else { 0.5 * (a + b) };
        if !(next > a && next < b) {
            next = 0.5 * (a + b);
        }
        if (next - th).abs() < 1e-15 * (1.0 + th.abs()) || b - a < 1e-15 {
            th = next;
            break;
        }
        th = next;
    }
    let x = th.cos();
    let half = (1.0 - x * x).max(0.0).sqrt();
    let t = if n == 2 {
        2.0 * rng.random::<f64>() - 1.0
    } else {
        let beta = Beta::new((n - 1) as f64, (n - 1) as f64).expect("valid beta parameters");
        2.0 * beta.sample(rng) - 1.0
    };
    Complex64::new(x, half * t)
}

/// Builds `z = lambda xi + sqrt(1 - |lambda|^2) v` with `v` uniform on the unit sphere of `xi^perp`.
pub fn lift<R: Rng>(rng: &mut R, xi: &[Complex64], lambda: Complex64) -> Vec<Complex64> {
    let n = xi.len();
    let s = (1.0 - lambda.norm_sqr()).max(0.0).sqrt();
    loop {
        let g: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        let c = pairing(&g, xi);
        let v: Vec<Complex64> = g.iter().zip(xi).map(|(a, b)| a - c * b).collect();
        let r = norm_sqr(&v).sqrt();
        if r > 1e-300 {
            return xi
                .iter()
                .zip(&v)
                .map(|(x, w)| lambda * x + w * (s / r))
                .collect();
        }
    }
}

fn cos_power_integral(k: usize, x: f64) -> f64 {
    match k {
        0 => x,
        1 => x.sin(),
        _ => {
            let kf = k as f64;
            x.cos().powi(k as i32 - 1) * x.sin() / kf + (kf - 1.0) / kf * cos_power_integral(k - 2, x)
        }
    }
}

fn binomial(m: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (m - i) as f64 / (i + 1) as f64)
}

/// `int (t (2 cos psi - t))^{n-2} dpsi` over `{psi : t <= 2 cos psi}`.
fn angular_weight(n: usize, t: f64) -> f64 {
    if t >= 2.0 {
        return 0.0;
    }
    let m = n - 2;
    let psi = (0.5 * t).acos();
    (0..=m)
        .map(|k| {
            binomial(m, k) * (2.0 * t).powi(k as i32) * (-t * t).powi((m - k) as i32)
                * 2.0
                * cos_power_integral(k, psi)
        })
        .sum()
}

/// Disk-weight measure of `{a < |1 - lambda| <= b}`.
pub fn ring_weight(n: usize, a: f64, b: f64) -> f64 {
    let (x, w) = gauss_legendre(16);
    let mut total = 0.0;
    let b = b.min(2.0);
    if a >= b {
        return 0.0;
    }
    if b > 1.0 {
        // near t = 2 the angular range closes like a square root: use t = 2 - u^2
        let lo = a.max(1.0);
        let (ua, ub) = ((2.0 - b).sqrt(), (2.0 - lo).sqrt());
        for (xi, wi) in x.iter().zip(&w) {
            let u = 0.5 * (ua + ub) + 0.5 * (ub - ua) * xi;
            let t = 2.0 - u * u;
            total += 0.5 * (ub - ua) * wi * t * angular_weight(n, t) * 2.0 * u;
        }
        if a >= 1.0 {
            return total;
        }
        return total + ring_weight(n, a, 1.0);
    }
    // 8 geometric sub-panels, plus the inner piece when a = 0
    let lo = if a > 0.0 { a } else { b * 1e-3 };
    let ratio = (b / lo).powf(1.0 / 8.0);
    let mut left = lo;
    for _ in 0..8 {
        let right = left * ratio;
        for (xi, wi) in x.iter().zip(&w) {
            let t = 0.5 * (left + right) + 0.5 * (right - left) * xi;
            total += 0.5 * (right - left) * wi * t * angular_weight(n, t);
        }
        left = right;
    }
    if a == 0.0 {
        for (xi, wi) in x.iter().zip(&w) {
            let t = 0.5 * lo * (1.0 + xi);
            total += 0.5 * lo * wi * t * angular_weight(n, t);
        }
    }
    total
}

/// Geometric rings `{b_{i+1} < |1 - lambda| <= b_i}` about `lambda = 1`, `b_i = 2^{1-i}`,
/// closed off by the inner disk `{|1 - lambda| <= b_R}`.
#[derive(Debug, Clone)]
pub struct RingGeometry {
    n: usize,
    edges: Vec<f64>,
    weights: Vec<f64>,
}

impl RingGeometry {
    pub fn new(n: usize, rings: usize) -> Self {
        let rings = rings.max(1);
        let mut edges: Vec<f64> = (0..=rings).map(|i| 2f64.powi(1 - i as i32)).collect();
        edges.push(0.0);
        let weights = (0..=rings).map(|i| ring_weight(n, edges[i + 1], edges[i])).collect();
        Self { n, edges, weights }
    }

    /// Number of strata (rings plus the inner disk).
    pub fn strata(&self) -> usize {
        self.weights.len()
    }

    /// Disk-weight measure of stratum `i`.
    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Stratum containing `lambda`.
    pub fn stratum_of(&self, lambda: Complex64) -> usize {
        let t = (Complex64::new(1.0, 0.0) - lambda).norm();
        if t <= 0.0 {
            return self.strata() - 1;
        }
        // b_i = 2^{1-i}: t in (b_{i+1}, b_i] gives i = ceil(-log2(t)) roughly; fix up exactly
        let mut i = ((1.0 - t.log2()).floor() as isize - 1).max(0) as usize;
        i = i.min(self.strata() - 1);
        while i > 0 && t > self.edges[i] {
            i -= 1;
        }
        while i + 1 < self.strata() && t <= self.edges[i + 1] {
            i += 1;
        }
        i
    }

    /// Samples `lambda` from the disk weight restricted to stratum `i`.
    pub fn sample<R: Rng>(&self, rng: &mut R, i: usize) -> Complex64 {
        let (a, b) = (self.edges[i + 1], self.edges[i]);
        let m = self.n as i32 - 2;
        let cap = (2.0 * b).min(1.0);
        loop {
            let u: f64 = rng.random();
            let t = (a * a + u * (b * b - a * a)).sqrt();
            let psi = PI * (rng.random::<f64>() - 0.5);
            let c = psi.cos();
            if t > 2.0 * c || t <= a {
                continue;
            }
            if m > 0 {
                let w = (t * (2.0 * c - t) / cap).powi(m);
                if rng.random::<f64>() >= w {
                    continue;
                }
            }
            return Complex64::new(1.0, 0.0) - Complex64::from_polar(t, psi);
        }
    }
}

/// Ring count for a singular scale `delta`: rings reach a few halvings below it.
pub fn rings_for_scale(delta: f64) -> usize {
    let r = (32.0 / delta.max(1e-300)).log2().ceil();
    r.clamp(4.0, 40.0) as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{chunk_rng, sphere_area};
    use approx::assert_relative_eq;

    #[test]
    fn band_weight_totals() {
        for n in 2..6 {
            assert_relative_eq!(
                fibre_area(n) * band_weight(n, -1.0, 1.0),
                sphere_area(n),
                max_relative = 1e-13
            );
            let w = band_weight(n, -1.0, 0.3) + band_weight(n, 0.3, 1.0);
            assert_relative_eq!(w, PI / (n - 1) as f64, max_relative = 1e-13);
        }
    }

    #[test]
    fn ring_weights_partition_the_disk() {
        for n in 2..5 {
            let g = RingGeometry::new(n, 30);
            assert_relative_eq!(g.total_weight(), PI / (n - 1) as f64, max_relative = 1e-12);
        }
    }

    #[test]
    fn ring_samples_land_in_their_stratum() {
        let g = RingGeometry::new(3, 12);
        let mut rng = chunk_rng(5, 0);
        for i in 0..g.strata() {
            for _ in 0..200 {
                let l = g.sample(&mut rng, i);
                assert!(l.norm_sqr() <= 1.0 + 1e-15);
                assert_eq!(g.stratum_of(l), i);
            }
        }
    }

    #[test]
    fn band_samples_respect_bounds() {
        let mut rng = chunk_rng(9, 0);
        for n in [2usize, 3] {
            for _ in 0..500 {
                let l = sample_band(&mut rng, n, 0.4, 0.9);
                assert!(l.re > 0.4 - 1e-12 && l.re <= 0.9 + 1e-12);
                assert!(l.norm_sqr() <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn lift_is_unit_and_has_the_right_pairing() {
        let mut rng = chunk_rng(1, 0);
        let xi = [Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)];
        let l = Complex64::new(0.3, -0.2);
        let z = lift(&mut rng, &xi, l);
        assert_relative_eq!(norm_sqr(&z), 1.0, epsilon = 1e-14);
        let p = pairing(&z, &xi);
        assert!((p - l).norm() < 1e-14);
    }
}
