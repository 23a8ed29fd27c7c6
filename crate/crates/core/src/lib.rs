//! Numerical laboratory for Hardy-type norms of singular holomorphic functions.

pub mod acceptance;
pub mod error;
pub mod experiments;
pub mod functions;
pub mod geometry;
pub mod norms;
pub mod numerics;
pub mod quadrature;
pub mod vector;

pub use error::{LabError, Result};
pub use num_complex::Complex64;
