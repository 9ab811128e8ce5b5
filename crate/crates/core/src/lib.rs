//! Isogeometric (IGA) and refined isogeometric (rIGA) discretizations of the
//! Laplace eigenproblem on the unit hypercube, together with an
//! inertia-validated, spectrum-sliced, shift-and-invert Lanczos eigensolver
//! and the cost accounting used to compare the two discretizations.
//!
//! The pipeline is:
//!
//! 1. [`bspline`] builds per-direction spline spaces (optionally with C⁰
//!    separators inserted at dyadic knots),
//! 2. [`assembly`] produces 1D stiffness/mass matrices and composes the
//!    d-dimensional pencil `(K, M)` by Kronecker products,
//! 3. [`sparsela`] orders and factors shifted matrices `K - σM` and report
//!    their inertia and FLOP counts,
//! 4. [`eigensolver`] slices the spectrum and runs thick-restart Lanczos on
//!    each slice,
//! 5. [`verify`] compares against the exact eigenpairs and
//!    [`costmodel`] turns operation counters into IGA-vs-rIGA ratios.

pub mod assembly;
pub mod bspline;
pub mod costmodel;
pub mod counters;
pub mod eigensolver;
mod error;
pub mod quadrature;
pub mod sparse;
pub mod sparsela;
pub mod verify;

pub use error::{Error, Result};

/// Library version, recorded in experiment manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
