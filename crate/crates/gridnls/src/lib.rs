//! Ground states of doubly nonlinear Schrödinger energies on planar metric
//! grids, and their comparison with planar limit problems as the edge
//! length shrinks.
//!
//! The crate is organised bottom-up:
//!
//! - [`grid`]: the truncated square grid and its L-cells;
//! - [`periodic`]: nonlinear vertex sets and periodicity cells;
//! - [`field`]: discrete functions on the grid and their norms;
//! - [`energy`]: the grid energy, its gradient and Euler-Lagrange residuals;
//! - [`flow`]: the mass-constrained gradient flow shared by all problems;
//! - [`extension`]: the piecewise-affine extension to the plane;
//! - [`planar`]: the plane, line and strip limit problems on a raster;
//! - [`harness`]: epsilon sweeps, threshold bisection, phase tables.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod energy;
pub mod error;
pub mod extension;
pub mod field;
pub mod flow;
pub mod grid;
pub mod harness;
pub mod periodic;
pub mod planar;
mod power;

pub use error::{
    FieldError, GridError, HarnessError, ParamError, PlanarError, SolveError, VertexSetError,
};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/grids.md")]
    mod grids {}
    #[doc = include_str!("../../../book/src/vertex-sets.md")]
    mod vertex_sets {}
    #[doc = include_str!("../../../book/src/energy.md")]
    mod energy {}
    #[doc = include_str!("../../../book/src/solver.md")]
    mod solver {}
    #[doc = include_str!("../../../book/src/extension.md")]
    mod extension {}
    #[doc = include_str!("../../../book/src/planar.md")]
    mod planar {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
