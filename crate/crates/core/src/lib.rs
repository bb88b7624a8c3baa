//! Numerical laboratory for quasiperiodic Schrödinger cocycles and their
//! finite-range duals.
//!
//! Module map:
//! - [`arithmetic`]: continued fractions, β proxy, ε₀-resonances.
//! - [`potential`] / [`cocycle`]: trigonometric potentials, Schrödinger and
//!   dual cocycles, Lyapunov spectra, acceleration, rotation number.
//! - [`operators`]: banded sections of the dual operator, determinants,
//!   Green's functions, spectrum sampling, averaged log-determinants.
//! - [`wedge`]: exterior-power minors, truncated determinants, block-minor
//!   expansion, numerator bounds.
//! - [`localization`]: eigenpairs, masked decay fits, regularity.
//! - [`reducibility`]: Bloch vectors and the almost-reducibility pipeline.

pub mod arithmetic;
pub mod cocycle;
pub mod error;
pub mod linalg;
pub mod localization;
pub mod numeric;
pub mod operators;
pub mod potential;
pub mod reducibility;
pub mod wedge;

pub use arithmetic::{ContinuedFraction, Frequency, ResonanceSet};
pub use cocycle::{CocycleKind, LyapunovSpectrum, QuasiperiodicCocycle};
pub use error::{Error, ErrorClass, Result};
pub use numeric::LogDet;
pub use operators::{GreensTable, TruncatedOperator};
pub use potential::TrigPolynomial;
pub use reducibility::{AnalyticTorusFunction, ConjugationReport};

pub use num_complex::Complex64;

/// Version string embedded in every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
