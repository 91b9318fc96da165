//! Coherent-phase-state distributions of a single optical mode, balanced
//! homodyne simulation and direct sampling of phase distributions from
//! quadrature data via pattern-function kernels.
//!
//! The numerical core (`special`, `quadrature`, `fock`, `kernel`) is generic
//! over [`Real`] (`f32`/`f64`); the aliases below fix `f64`.

// NaN-rejecting checks are written as negated comparisons
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimate;
pub mod fock;
pub mod homodyne;
pub mod kernel;
pub mod num;
pub mod quadrature;
pub mod special;

pub use error::{Error, Result};
pub use num::Real;

/// `f64` pure state.
pub type FockState = fock::FockState<f64>;
/// `f64` density matrix.
pub type DensityMatrix = fock::DensityMatrix<f64>;
/// `f64` phase grid.
pub type PhaseGrid = fock::PhaseGrid<f64>;
/// `f64` phase distribution.
pub type PhaseDistribution = fock::PhaseDistribution<f64>;
/// `f64` pattern-function table.
pub type KernelTable = kernel::KernelTable<f64>;
/// `f64` single-`eps` kernel.
pub type EpsilonKernel = kernel::EpsilonKernel<f64>;
