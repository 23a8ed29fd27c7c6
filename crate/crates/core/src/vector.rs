//! Points of complex Euclidean space.

use std::fmt;
use std::ops::{Deref, Index};

use num_complex::Complex64;

use crate::error::{LabError, Result};

/// A point of `C^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexVector(Vec<Complex64>);

impl ComplexVector {
    pub fn new(coords: Vec<Complex64>) -> Self {
        Self(coords)
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![Complex64::new(0.0, 0.0); n])
    }

    /// Standard basis vector `e_k` (zero-based `k`).
    pub fn basis(n: usize, k: usize) -> Self {
        let mut v = Self::zeros(n);
        v.0[k] = Complex64::new(1.0, 0.0);
        v
    }

    pub fn from_real(coords: &[f64]) -> Self {
        Self(coords.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    /// Builds from real coordinates ordered `(x_1..x_n, y_1..y_n)`.
    pub fn from_real_coords(xy: &[f64]) -> Result<Self> {
        if xy.len() % 2 != 0 {
            return Err(LabError::InvalidParameter(format!(
                "odd number of real coordinates: {}",
                xy.len()
            )));
        }
        let n = xy.len() / 2;
        Ok(Self((0..n).map(|j| Complex64::new(xy[j], xy[n + j])).collect()))
    }

    /// Real coordinates ordered `(x_1..x_n, y_1..y_n)`.
    pub fn real_coords(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.0.iter().map(|c| c.re).collect();
        out.extend(self.0.iter().map(|c| c.im));
        out
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<Complex64> {
        self.0
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.0)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Hermitian pairing `sum z_j conj(w_j)`.
    pub fn pairing(&self, other: &[Complex64]) -> Complex64 {
        pairing(&self.0, other)
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        Self(self.0.iter().map(|c| c * s).collect())
    }

    pub fn scaled_real(&self, s: f64) -> Self {
        Self(self.0.iter().map(|c| c * s).collect())
    }

    pub fn sub(&self, other: &[Complex64]) -> Self {
        Self(self.0.iter().zip(other).map(|(a, b)| a - b).collect())
    }

    pub fn add(&self, other: &[Complex64]) -> Self {
        Self(self.0.iter().zip(other).map(|(a, b)| a + b).collect())
    }

    pub fn distance(&self, other: &[Complex64]) -> f64 {
        distance(&self.0, other)
    }

    /// Unit vector in the same direction; errors on the zero vector.
    pub fn normalized(&self) -> Result<Self> {
        let r = self.norm();
        if r == 0.0 || !r.is_finite() {
            return Err(LabError::InvalidParameter(
                "cannot normalize the zero vector".into(),
            ));
        }
        Ok(self.scaled_real(1.0 / r))
    }
}

impl Deref for ComplexVector {
    type Target = [Complex64];
    fn deref(&self) -> &[Complex64] {
        &self.0
    }
}

impl Index<usize> for ComplexVector {
    type Output = Complex64;
    fn index(&self, i: usize) -> &Complex64 {
        &self.0[i]
    }
}

impl From<Vec<Complex64>> for ComplexVector {
    fn from(v: Vec<Complex64>) -> Self {
        Self(v)
    }
}

impl fmt::Display for ComplexVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|c| format_complex(*c)).collect();
        write!(f, "{}", parts.join(","))
    }
}

pub fn format_complex(c: Complex64) -> String {
    if c.im == 0.0 {
        format!("{}", c.re)
    } else if c.re == 0.0 {
        format!("{}i", c.im)
    } else if c.im < 0.0 {
        format!("{}-{}i", c.re, -c.im)
    } else {
        format!("{}+{}i", c.re, c.im)
    }
}

pub fn norm_sqr(z: &[Complex64]) -> f64 {
    z.iter().map(|c| c.norm_sqr()).sum()
}

pub fn pairing(z: &[Complex64], w: &[Complex64]) -> Complex64 {
    z.iter().zip(w).map(|(a, b)| a * b.conj()).sum()
}

pub fn distance(z: &[Complex64], w: &[Complex64]) -> f64 {
    z.iter()
        .zip(w)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Parses a single complex number such as `1`, `-0.5`, `0.5i`, `0.3+0.4i`, `-i`.
pub fn parse_complex(s: &str) -> Result<Complex64> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || LabError::Parse(format!("invalid complex number '{s}'"));
    if t.is_empty() {
        return Err(bad());
    }
    if let Some(body) = t.strip_suffix('i') {
        // find the split between real and imaginary parts: last sign not after an exponent
        let bytes = body.as_bytes();
        let mut split = None;
        for idx in (1..bytes.len()).rev() {
            let ch = bytes[idx] as char;
            if (ch == '+' || ch == '-') && !matches!(bytes[idx - 1] as char, 'e' | 'E') {
                split = Some(idx);
                break;
            }
        }
        let (re_part, im_part) = match split {
            Some(idx) => (&body[..idx], &body[idx..]),
            None => ("", body),
        };
        let re = if re_part.is_empty() {
            0.0
        } else {
            re_part.parse::<f64>().map_err(|_| bad())?
        };
        let im = match im_part {
            "" | "+" => 1.0,
            "-" => -1.0,
            other => other.parse::<f64>().map_err(|_| bad())?,
        };
        Ok(Complex64::new(re, im))
    } else {
        Ok(Complex64::new(t.parse::<f64>().map_err(|_| bad())?, 0.0))
    }
}

/// Parses a comma-separated list of complex numbers.
pub fn parse_complex_vector(s: &str) -> Result<ComplexVector> {
    let coords = s
        .split(',')
        .map(parse_complex)
        .collect::<Result<Vec<_>>>()?;
    if coords.is_empty() {
        return Err(LabError::Parse("empty vector".into()));
    }
    Ok(ComplexVector::new(coords))
}
