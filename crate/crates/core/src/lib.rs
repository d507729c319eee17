//! Relative spectral functions of multi-obstacle configurations.
//!
//! Everything is evaluated on the positive imaginary spectral axis `λ = iκ`,
//! where the free Green's functions are real, positive and exponentially
//! decaying. The Ξ functions are log-determinants of boundary layer operators
//! relative to their per-component diagonal parts; [`trace_formula`] turns
//! them into relative traces and Casimir energies.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod geometry;
pub mod layer_ops;
pub mod linalg;
pub mod multipole_oracle;
pub mod plates1d;
pub mod quadrature;
pub mod specfun;
pub mod trace_formula;
pub mod xi;

pub use error::{Error, Result};
