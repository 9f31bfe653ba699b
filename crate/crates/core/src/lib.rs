//! Core of a 2D adaptive finite-element laboratory.
//!
//! The crate covers the whole numerical pipeline for the Poisson problem
//! `-Δu = f` on the unit square (Dirichlet data on `y = 0, 1`, Neumann data
//! on `x = 0, 1`):
//!
//! - [`mesh`]: quadtree meshes with 2:1 balance and hanging nodes,
//! - [`dofs`], [`assembly`]: degree-`p` tensor-product Lagrange elements and
//!   the condensed sparse system,
//! - [`linsolve`]: a deterministic sparse `LDLᵀ` direct solver,
//! - [`error_metrics`]: exact `L²` errors, Richardson recovery, Kelly
//!   indicators and observed orders,
//! - [`refine`]: fixed-fraction marking and the `E_ref`-oriented search for
//!   the smallest marking fraction,
//! - [`roundoff`], [`predictor`]: round-off power-law fits and the
//!   truncation/round-off total-error model.
//!
//! Only `alloc` is required; IO, timing and threads live in the companion
//! `amrlab` crate.
#![cfg_attr(not(test), no_std)]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

mod math;

pub mod assembly;
pub mod dofs;
pub mod error;
pub mod error_metrics;
pub mod lagrange;
pub mod linsolve;
pub mod mesh;
pub mod ordering;
pub mod pipeline;
pub mod predictor;
pub mod problem;
pub mod quadrature;
pub mod refine;
pub mod roundoff;
pub mod sparse;

pub use error::{Error, Result};
pub use error_metrics::{ConvergenceRecord, ErrorKind, ErrorSource, Strategy};
pub use mesh::{CellId, QuadMesh};
pub use pipeline::FemSolution;
pub use problem::{ExactSolution, ProblemSpec};
