//! Rayleigh–Schrödinger series for monotone quasiperiodic lattice operators.
//!
//! The crate computes eigenvalue and eigenvector perturbation series for
//! `H = V + εΦ¹ + ε²Φ² + …` with `V_n = f(x₀ + n·ω)`, expands them as sums over
//! weighted paths on a sheeted graph, regroups those paths into translational
//! equivalence classes, and checks the results against dense diagonalization
//! of truncated matrices. A separate pipeline conjugates operators whose
//! potential has a flat piece into ones with strictly monotone diagonal.

pub mod cancel;
pub mod error;
pub mod flatseg;
pub mod lattice;
pub mod model;
pub mod paths;
pub mod scalar;
pub mod series;
pub mod spectra;

pub use error::{Error, Result};
pub use lattice::Site;
pub use num_complex::Complex64 as C64;
