//! Dirac operators with Kirchhoff-type vertex conditions on periodic metric
//! graphs.
//!
//! The crate is organised bottom-up:
//!
//! * [`graph`] periodic graphs, the built-in examples and finite closures
//! * [`fields`] staggered grids, spinor fields and their norms
//! * [`dirac`] operator assembly, Bloch twisting and export
//! * [`spectra`] eigensolvers, band sweeps, the transfer-matrix oracle and
//!   spectral-calculus checks
//! * [`nonlinearity`] the power and asymptotically linear families
//! * [`variational`] the action functional and the bound-state solver

pub mod dirac;
pub mod error;
pub mod fields;
pub mod graph;
pub mod nonlinearity;
pub mod spectra;
pub mod variational;

pub(crate) mod sparse;

pub use num_complex::Complex64 as C64;

pub use error::{Error, Result};
