//! Box-ball system (BBS) dynamics and their hydrodynamic description.
//!
//! The crate is organised bottom-up:
//!
//! - [`plf`] — exact algebra of piecewise-linear functions on `[0, ∞)`
//!   (evaluation, right-continuous inverse, composition, shifts), the carrier
//!   type for every integrated profile in the crate.
//! - [`bbs`] — finite ball configurations, the carrier construction of the
//!   one-step update, and the path encoding (walk, running maximum, records).
//! - [`codec`] — the soliton decomposition, slot coordinates, the
//!   configuration ↔ slot-decomposition bijection, and the linear slot-shift
//!   dynamics.
//! - [`speeds`] — effective soliton speeds: the speed system matrix, its
//!   transpose companion, determinant certificate, and the linear solve.
//! - [`scattering`] — the continuum scattering transform between spatial and
//!   effective coordinates, and the exact flow it linearises.
//! - [`hydro`] — density grids, smooth bump generators, PDE residual checks
//!   of the flow, and an independent upwind finite-volume integrator.
//! - [`empirics`] — Bernoulli slot sampling, empirical integrated profiles,
//!   deterministic scale-bound checks, and convergence experiments.

pub mod bbs;
pub mod codec;
pub mod empirics;
pub mod error;
pub mod hydro;
pub mod plf;
pub mod scattering;
pub mod speeds;

pub use error::{Error, ErrorCategory, Result};
