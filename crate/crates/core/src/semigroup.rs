//! Heat and Stokes propagators, decay series and log-log fits.
//!
//! Half-space flows are realized on a periodic slab: a field sampled on
//! `x_N ∈ [0, L/2]` is extended evenly (Neumann) or oddly (Dirichlet) to the
//! full period, propagated, and restricted back.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::initial_data::random_low_mode_field;
use crate::spectral::{
    derivative, derivative_tensor, heat_multiplier, leray_project, lp_norm, lp_norm_samples,
    sobolev_norm, Grid, Lp, RealField, SpectralField,
};

/// Minimum number of samples accepted by [`decay_fit`].
pub const MIN_FIT_POINTS: usize = 5;
/// Pointwise tolerance on the boundary condition of a half-space field.
pub const BOUNDARY_TOL: f64 = 1e-10;

/// Stokes flow on the torus: heat flow after projection.
pub fn stokes_propagate(f: &SpectralField, t: f64) -> Result<SpectralField> {
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "time must be >= 0, got {t}"
        )));
    }
    heat_multiplier(&leray_project(f)?, t)
}

/// `e^{tΔ} e^{−|x|²/(4a)} = (a/(a+t))^{N/2} e^{−|x|²/(4(a+t))}` on `R^N`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianReference {
    pub amplitude: f64,
    /// Width parameter `a + t`.
    pub variance: f64,
    pub l2: f64,
    pub linf: f64,
}

pub fn gaussian_reference(a: f64, t: f64, dim: usize) -> GaussianReference {
    let variance = a + t;
    let amplitude = (a / variance).powf(dim as f64 / 2.0);
    let l2 = (amplitude * amplitude * (2.0 * PI * variance).powf(dim as f64 / 2.0)).sqrt();
    GaussianReference {
        amplitude,
        variance,
        l2,
        linf: amplitude,
    }
}

/// Domain on which a decay series was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Domain {
    Torus,
    WholeSpace,
    HalfSpace,
}

impl Domain {
    pub fn label(self) -> &'static str {
        match self {
            Self::Torus => "torus",
            Self::WholeSpace => "whole_space",
            Self::HalfSpace => "half_space",
        }
    }
}

/// What a decay series measures: `‖∇^j e^{tA} f‖_{L^q}` for `f ∈ L^p`.
#[derive(Clone, Debug, PartialEq)]
pub struct DecayMeta {
    pub dim: usize,
    pub p: Lp,
    pub q: Lp,
    pub j: usize,
    pub domain: Domain,
    /// Latest time at which the series stands in for the unbounded domain.
    pub horizon: Option<f64>,
}

impl DecayMeta {
    /// Whole-space rate `−j/2 − N/2·(1/p − 1/q)`.
    pub fn expected_slope(&self) -> f64 {
        -(self.j as f64) / 2.0 - self.dim as f64 / 2.0 * (self.p.reciprocal() - self.q.reciprocal())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecaySeries {
    times: Vec<f64>,
    norms: Vec<f64>,
    meta: DecayMeta,
}

impl DecaySeries {
    pub fn new(times: Vec<f64>, norms: Vec<f64>, meta: DecayMeta) -> Result<Self> {
        if times.len() != norms.len() {
            return Err(Error::Shape(format!(
                "{} times vs {} norms",
                times.len(),
                norms.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) || times.first().is_some_and(|t| !(*t > 0.0)) {
            return Err(Error::InvalidArgument(
                "times must be positive and strictly increasing".into(),
            ));
        }
        if norms.iter().any(|n| !(*n > 0.0 && n.is_finite())) {
            return Err(Error::InvalidArgument(
                "norms must be positive and finite".into(),
            ));
        }
        Ok(Self { times, norms, meta })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    pub fn meta(&self) -> &DecayMeta {
        &self.meta
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Least-squares fit of `log(norm)` against `log(t)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    /// Largest absolute log-residual.
    pub residual: f64,
    /// Window actually used, after clipping to the validity horizon.
    pub window: (f64, f64),
    pub points: usize,
}

pub fn decay_fit(series: &DecaySeries, window: (f64, f64)) -> Result<DecayFit> {
    let (lo, mut hi) = window;
    if let Some(h) = series.meta.horizon {
        if hi > h {
            log::warn!("fit window end {hi} clipped to validity horizon {h}");
            hi = h;
        }
    }
    let pts: Vec<(f64, f64)> = series
        .times
        .iter()
        .zip(&series.norms)
        .filter(|(t, _)| **t >= lo && **t <= hi)
        .map(|(t, n)| (t.ln(), n.ln()))
        .collect();
    let (slope, intercept, residual) = log_log_fit(&pts)?;
    Ok(DecayFit {
        slope,
        intercept,
        residual,
        window: (lo, hi),
        points: pts.len(),
    })
}

/// Ordinary least squares on `(x, y)` pairs; returns slope, intercept and max residual.
pub(crate) fn log_log_fit(pts: &[(f64, f64)]) -> Result<(f64, f64, f64)> {
    if pts.len() < MIN_FIT_POINTS {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_FIT_POINTS} points in the fit window, got {}",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument(
            "fit window holds a single time".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).abs())
        .fold(0.0, f64::max);
    Ok((slope, intercept, residual))
}

/// `n` logarithmically spaced times in `[t_min, t_max]`.
pub fn log_times(t_min: f64, t_max: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![t_min];
    }
    let (a, b) = (t_min.ln(), t_max.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// `L^q` norm of `∇^j f`, with `|∇^j f|` the Frobenius norm at each point.
pub fn derivative_norm(f: &SpectralField, j: usize, q: Lp) -> f64 {
    let g = derivative_tensor(f, j);
    match q {
        Lp::Two => lp_norm(&g, Lp::Two),
        _ => lp_norm_samples(&g.to_real(), q),
    }
}

/// `‖∇^j e^{tΔ} f‖_{L^q}` at each time, for data normalized in `L^p`.
pub fn torus_heat_series(
    f: &SpectralField,
    times: &[f64],
    p: Lp,
    q: Lp,
    j: usize,
) -> Result<DecaySeries> {
    let norms = times
        .par_iter()
        .map(|&t| Ok(derivative_norm(&heat_multiplier(f, t)?, j, q)))
        .collect::<Result<Vec<_>>>()?;
    let grid = f.grid();
    DecaySeries::new(
        times.to_vec(),
        norms,
        DecayMeta {
            dim: grid.dim(),
            p,
            q,
            j,
            domain: Domain::Torus,
            horizon: Some(grid.validity_horizon()),
        },
    )
}

/// Closed-form whole-space series of the Gaussian `e^{−|x|²/(4a)}`, `q ∈ {2, ∞}`.
pub fn gaussian_series(a: f64, dim: usize, times: &[f64], q: Lp) -> Result<DecaySeries> {
    let norms = times
        .iter()
        .map(|&t| {
            let g = gaussian_reference(a, t, dim);
            match q {
                Lp::Two => Ok(g.l2),
                Lp::Inf => Ok(g.linf),
                Lp::One => Ok((4.0 * PI * a).powf(dim as f64 / 2.0)),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    DecaySeries::new(
        times.to_vec(),
        norms,
        DecayMeta {
            dim,
            p: Lp::One,
            q,
            j: 0,
            domain: Domain::WholeSpace,
            horizon: None,
        },
    )
}

/// Boundary condition at `x_N = 0` (and, by reflection, at `x_N = L/2`).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Boundary {
    Neumann,
    Dirichlet,
}

impl Boundary {
    fn parity(self) -> f64 {
        match self {
            Self::Neumann => 1.0,
            Self::Dirichlet => -1.0,
        }
    }
}

/// Scalar field on the slab `x_N ∈ [0, L/2]` with `M/2 + 1` samples along `x_N`.
#[derive(Clone, Debug)]
pub struct HalfSpaceField {
    grid: Grid,
    values: Vec<f64>,
    bc: Boundary,
}

impl HalfSpaceField {
    /// Samples per periodic axis and along the normal axis.
    fn shape(grid: &Grid) -> (usize, usize) {
        let res = grid.res();
        (res.pow(grid.dim() as u32 - 1), res / 2 + 1)
    }

    pub fn new(grid: &Grid, values: Vec<f64>, bc: Boundary) -> Result<Self> {
        let (lateral, normal) = Self::shape(grid);
        if values.len() != lateral * normal {
            return Err(Error::Shape(format!(
                "expected {} slab samples, got {}",
                lateral * normal,
                values.len()
            )));
        }
        let field = Self {
            grid: grid.clone(),
            values,
            bc,
        };
        if bc == Boundary::Dirichlet {
            let scale = field.values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            let trace = field.boundary_trace();
            if trace > BOUNDARY_TOL * scale {
                return Err(Error::InvalidArgument(format!(
                    "Dirichlet field has boundary trace {trace:.3e}"
                )));
            }
        }
        Ok(field)
    }

    /// Samples `f` on the slab; Dirichlet samples on both walls are set to zero.
    pub fn from_fn(grid: &Grid, bc: Boundary, f: impl Fn(&[f64; 3]) -> f64) -> Self {
        let (lateral, normal) = Self::shape(grid);
        let dim = grid.dim();
        let h = grid.spacing();
        let res = grid.res();
        let mut values = vec![0.0; lateral * normal];
        for l in 0..lateral {
            for j in 0..normal {
                let mut x = [0.0; 3];
                let mut rem = l;
                for a in (0..dim - 1).rev() {
                    x[a] = (rem % res) as f64 * h;
                    rem /= res;
                }
                x[dim - 1] = j as f64 * h;
                let wall = j == 0 || j == normal - 1;
                values[l * normal + j] = if bc == Boundary::Dirichlet && wall {
                    0.0
                } else {
                    f(&x)
                };
            }
        }
        Self {
            grid: grid.clone(),
            values,
            bc,
        }
    }

    /// Random smooth field with the given boundary class.
    pub fn random<R: Rng>(grid: &Grid, bc: Boundary, rng: &mut R) -> Self {
        let full = random_low_mode_field(grid, 1, rng).to_real();
        let mut out = Self::restrict(&full, bc);
        if bc == Boundary::Dirichlet {
            out.zero_walls();
        }
        out
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn boundary(&self) -> Boundary {
        self.bc
    }

    fn zero_walls(&mut self) {
        let (_, normal) = Self::shape(&self.grid);
        for row in self.values.chunks_mut(normal) {
            row[0] = 0.0;
            row[normal - 1] = 0.0;
        }
    }

    /// Even or odd extension to the full periodic grid.
    pub fn extend(&self) -> SpectralField {
        let res = self.grid.res();
        let (_, normal) = Self::shape(&self.grid);
        let parity = self.bc.parity();
        let mut samples = Vec::with_capacity(self.grid.npoints());
        for row in self.values.chunks(normal) {
            for j in 0..res {
                samples.push(if j < normal {
                    row[j]
                } else {
                    parity * row[res - j]
                });
            }
        }
        RealField::new(&self.grid, 1, samples)
            .expect("slab extension shape")
            .to_spectral()
    }

    /// Restriction of full-grid samples to the slab.
    pub fn restrict(full: &RealField, bc: Boundary) -> Self {
        let grid = full.grid().clone();
        let res = grid.res();
        let (_, normal) = Self::shape(&grid);
        let values = full
            .component(0)
            .chunks(res)
            .flat_map(|row| row[..normal].iter().copied())
            .collect();
        Self { grid, values, bc }
    }

    /// `max |f|` on the wall `x_N = 0`.
    pub fn boundary_trace(&self) -> f64 {
        let (_, normal) = Self::shape(&self.grid);
        self.values
            .chunks(normal)
            .map(|row| row[0].abs())
            .fold(0.0, f64::max)
    }

    /// `max |∂_N f|` on the wall `x_N = 0`, with `∂_N` the spectral derivative of the extension.
    pub fn normal_derivative_at_wall(&self) -> f64 {
        let axis = self.grid.dim() - 1;
        let d = derivative(&self.extend(), axis).expect("normal axis");
        Self::restrict(&d.to_real(), self.bc).boundary_trace()
    }

    /// `H¹` norm over the slab (half the norm² of the extension).
    pub fn h1_norm(&self) -> f64 {
        sobolev_norm(&self.extend(), 1.0).expect("s = 1") / 2f64.sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Heat flow on the half-space with the field's boundary condition.
pub fn halfspace_propagate(f: &HalfSpaceField, t: f64) -> Result<HalfSpaceField> {
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "time must be >= 0, got {t}"
        )));
    }
    let flowed = heat_multiplier(&f.extend(), t)?;
    Ok(HalfSpaceField::restrict(&flowed.to_real(), f.bc))
}

/// `‖∂_N e^{tΔ_N} f − e^{tΔ_D} ∂_N f‖_{L^∞}` for a Neumann field `f`.
pub fn commutation_check(f: &HalfSpaceField, t: f64) -> Result<f64> {
    if f.bc != Boundary::Neumann {
        return Err(Error::InvalidArgument(
            "commutation check needs a Neumann field".into(),
        ));
    }
    let axis = f.grid.dim() - 1;
    let flowed = heat_multiplier(&f.extend(), t)?;
    let lhs = HalfSpaceField::restrict(&derivative(&flowed, axis)?.to_real(), Boundary::Dirichlet);
    let normal = HalfSpaceField::restrict(
        &derivative(&f.extend(), axis)?.to_real(),
        Boundary::Dirichlet,
    );
    let rhs = halfspace_propagate(&normal, t)?;
    Ok(lhs
        .values
        .iter()
        .zip(&rhs.values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}
