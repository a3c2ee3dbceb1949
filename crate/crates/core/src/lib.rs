//! Pseudospectral solver and diagnostics for the simplified Ericksen-Leslie
//! system of nematic liquid crystal flow on periodic boxes.
//!
//! The velocity `u` and the deviation `d` of the director `η + d` from a
//! constant unit vector `η` evolve by
//!
//! ```text
//! ∂_t u − Δu + ∇p = −(u·∇)u − Div(∇d ⊙ ∇d),   div u = 0,
//! ∂_t d − Δd      = −(u·∇)d + |∇d|² (η + d).
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod estimates;
pub mod initial_data;
pub mod mild;
pub mod nonlinearity;
pub mod semigroup;
pub mod snapshot;
pub mod spectral;
pub mod timestep;
pub mod trajectory;

pub use error::{Error, Result};
