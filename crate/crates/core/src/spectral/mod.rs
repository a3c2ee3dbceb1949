//! Periodic-box Fourier infrastructure.

mod fft;
mod field;
mod grid;
mod ops;

pub use field::{forward_transform, inverse_transform, RealField, SpectralField};
pub use grid::{wrap, Grid};
pub use ops::{
    apply_multiplier, dealias, derivative, derivative_tensor, divergence, gradient,
    heat_multiplier, homogeneous_sobolev_norm, is_retained, leray_project, lp_norm,
    lp_norm_samples, sobolev_norm, Lp,
};

pub(crate) use ops::dealias_in_place;
