//! Small numerical building blocks: Gauss-Legendre rules, sphere areas,
//! low-discrepancy sequences, seeded streams and pairwise reductions.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1, "Gauss-Legendre order must be positive");
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let m = order.div_ceil(2);
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (order as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(order, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(order, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[order - 1 - i] = x;
        weights[i] = w;
        weights[order - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(order: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if order == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=order {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = order as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss-Legendre rule mapped onto `[a, b]`, appended to `out` as `(node, weight)`.
pub fn push_mapped_rule(nodes: &[f64], weights: &[f64], a: f64, b: f64, out: &mut Vec<(f64, f64)>) {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    for (x, w) in nodes.iter().zip(weights) {
        out.push((mid + half * x, half * w));
    }
}

/// Surface area of the unit sphere `S^{2n-1}` in `C^n`: `2 pi^n / (n-1)!`.
pub fn sphere_area(n: usize) -> f64 {
    assert!(n >= 1);
    2.0 * PI.powi(n as i32) / factorial(n - 1)
}

/// Surface area of the real unit sphere `S^{d-1}` in `R^d`.
pub fn real_sphere_area(d: usize) -> f64 {
    2.0 * PI.powf(d as f64 / 2.0) / gamma(d as f64 / 2.0)
}

pub fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// Lanczos approximation of the gamma function for positive arguments.
pub fn gamma(x: f64) -> f64 {
    ln_gamma(x).exp()
}

pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + G + 0.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// SplitMix64 finalizer, used to derive independent sub-seeds.
pub fn mix_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based stream: the generator for chunk `chunk` under `seed`.
///
/// Every chunk of samples draws from its own stream, so results do not depend
/// on how chunks are scheduled.
pub fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

/// Samples per counter-based chunk.
pub const CHUNK: usize = 4096;

/// Pairwise (cascade) summation in a fixed tree order.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 16 {
        values.iter().sum()
    } else {
        let mid = values.len() / 2;
        pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
    }
}

/// Running first and second moments of chunk results, reduced pairwise.
#[derive(Debug, Clone, Default)]
pub struct ChunkedMoments {
    sums: Vec<f64>,
    sums_sq: Vec<f64>,
    counts: u64,
}

impl ChunkedMoments {
    pub fn push_chunk(&mut self, sum: f64, sum_sq: f64, count: u64) {
        self.sums.push(sum);
        self.sums_sq.push(sum_sq);
        self.counts += count;
    }

    pub fn count(&self) -> u64 {
        self.counts
    }

    /// Mean and standard error of the mean.
    pub fn mean_and_stderr(&self) -> (f64, f64) {
        let n = self.counts as f64;
        if self.counts == 0 {
            return (0.0, 0.0);
        }
        let mean = pairwise_sum(&self.sums) / n;
        let mean_sq = pairwise_sum(&self.sums_sq) / n;
        let var = (mean_sq - mean * mean).max(0.0) * n / (n - 1.0).max(1.0);
        (mean, (var / n).sqrt())
    }
}

const PRIMES: [u32; 24] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
];

/// Radical inverse of `index` in base `base`.
pub fn radical_inverse(mut index: u64, base: u32) -> f64 {
    let b = base as u64;
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while index > 0 {
        r += (index % b) as f64 * f;
        index /= b;
        f *= inv;
    }
    r
}

/// Point `index` of the Halton sequence in `dims` dimensions.
pub fn halton(index: u64, dims: usize) -> Vec<f64> {
    assert!(dims <= PRIMES.len(), "Halton dimension too large");
    (0..dims).map(|d| radical_inverse(index, PRIMES[d])).collect()
}

/// Beta function `B(1/2, m)` for positive integer `m`.
pub fn beta_half(m: usize) -> f64 {
    assert!(m >= 1);
    let mut b = 2.0;
    for k in 1..m {
        let kf = k as f64;
        b *= 2.0 * kf / (2.0 * kf + 1.0);
    }
    b
}

/// `int_0^theta sin^k(t) dt` for integer `k >= 0`.
pub fn sin_power_integral(k: usize, theta: f64) -> f64 {
    match k {
        0 => theta,
        1 => 1.0 - theta.cos(),
        _ => {
            let kf = k as f64;
            -theta.sin().powi(k as i32 - 1) * theta.cos() / kf
                + (kf - 1.0) / kf * sin_power_integral(k - 2, theta)
        }
    }
}
