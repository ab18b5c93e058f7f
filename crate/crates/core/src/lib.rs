//! Numerical laboratory for mesoscopic eigenvalue statistics of random band
//! matrices.
//!
//! - [`lattice`]: torus geometry, variance and phase profiles, profile constants.
//! - [`ensemble`]: reproducible sampling of Hermitian band matrices.
//! - [`cheb`]: Chebyshev and nonbacktracking expansions, expansion coefficients.
//! - [`stats`]: test functions, smoothed linear statistics, Monte Carlo estimators.
//! - [`theory`]: deterministic predictions (traces, dumbbell sum, asymptotic laws).

pub mod cheb;
pub mod ensemble;
pub mod error;
pub mod lattice;
pub mod linalg;
pub mod par;
pub mod special;
pub mod stats;
pub mod testfn;
pub mod theory;

pub use error::{Error, Result};
pub use num_complex::Complex64;
