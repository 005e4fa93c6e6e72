//! Periodic Camassa-Holm equation and its higher-order hierarchy on the unit
//! torus: pseudo-spectral field operators, the elliptic factorization
//! `A_l = Lambda_pm Lambda~_pm`, exact differential-polynomial algebra for the
//! quadratic source terms, exact commutator calculus for `d_x^m D^k`, an
//! Eulerian solver with Lagrangian flow map, time-Taylor analyticity
//! machinery, and Hamiltonian multipeakon dynamics with collision
//! continuation.
//!
//! Floating-point kernels are generic over the scalar type through [`Real`];
//! concrete aliases ([`Field64`], [`PeakonState64`], ...) are exported at the
//! crate root. The symbolic modules ([`diffpoly`], [`commutator`]) work over
//! exact rationals and are not scalar-generic.

pub mod commutator;
pub mod diffpoly;
pub mod field;
pub mod flow;
pub mod operators;
pub mod peakon;
pub mod solver;
pub mod taylor;

mod real;

pub use field::{ComplexField, PeriodicField, PeriodicGrid};
pub use real::Real;

/// Double-precision field, the default for all solver work.
pub type Field64 = PeriodicField<f64>;
/// Single-precision field (relaxed internal guards, see [`Real`]).
pub type Field32 = PeriodicField<f32>;
/// Double-precision multipeakon configuration.
pub type PeakonState64 = peakon::PeakonState<f64>;
/// Double-precision Eulerian state.
pub type ChState64 = solver::ChState<f64>;

/// Errors shared by the library. Numerical breakdowns carry the time at
/// which they were detected so callers can report blow-up diagnostics.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("grid size {n} rejected: need an even n >= 8")]
    GridSize { n: usize },
    #[error("fields live on different grids ({a} vs {b} points)")]
    GridMismatch { a: usize, b: usize },
    #[error("direction xi = {xi} is within {dist:.3e} of 2*pi*Z; -i d/dx - xi is not invertible there")]
    ResonantDirection { xi: num_complex::Complex<f64>, dist: f64 },
    #[error("imaginary residue {residue:.3e} exceeds {tol:.3e}; field is not real")]
    ImaginaryResidue { residue: f64, tol: f64 },
    #[error("solution blew up at t = {time}: {reason}")]
    BlowUp { time: f64, reason: String },
    #[error("flow map lost injectivity at t = {time}: min d(xi)/dx = {min_slope:.3e}")]
    FlowDegenerate { time: f64, min_slope: f64 },
    #[error("enumeration would visit {terms} multi-indices (limit {limit})")]
    EnumerationTooLarge { terms: u128, limit: u128 },
    #[error("linear system for the antiderivative is inconsistent at order {l}")]
    NoAntiderivative { l: usize },
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Shorthand used throughout the numeric modules to lift literal constants
/// into the generic scalar type.
pub(crate) fn c<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("literal representable in every Real type")
}
