//! Numerical laboratory for a trait-structured, sexually reproducing
//! population under Fisher's infinitesimal model of inheritance.
//!
//! The density `n(t, x)` of a phenotypic trait `x` evolves by
//!
//! ```text
//! ∂t n = (1 + αI)² · T( (1 + αa)n / (1 + αI) ) − (1 + αI)² · n,   I = ∫ a n
//! ```
//!
//! where `T` is the bilinear reproduction operator (offspring drawn from
//! `Γ_{σ²}` around the midparent) and `a` is a selection function.
//!
//! Layout:
//!
//! - [`grid`], [`density`], [`atomic`], [`params`]: the discretization substrate.
//! - [`kernels`]: Gaussian densities and selection functions.
//! - [`transport`]: quantile functions and the 1-D Wasserstein metrics.
//! - [`reproduction`]: the operator `T` (spectral path, direct path, quadrature oracle).
//! - [`dynamics`]: explicit Euler time stepping and trajectory diagnostics.
//! - [`macroscale`]: the mean-trait field `F`, its roots and the ODE `Y' = F(Y)`.
//! - [`steady`]: steady states as fixed points of the one-generation map.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod atomic;
pub mod density;
pub mod dynamics;
mod error;
pub mod grid;
pub mod kernels;
pub mod macroscale;
pub mod params;
pub mod poly;
pub mod reproduction;
pub mod steady;
pub mod transport;

pub use atomic::{AtomicMeasure, Segment};
pub use density::Density;
pub use error::{Error, Result};
pub use grid::Grid;
pub use kernels::{gaussian_pdf, SelectionFn};
pub use params::ModelParams;
pub use poly::Polynomial;
pub use reproduction::{Backend, ReproPlan};
pub use transport::{Measure, QuantileFn};
