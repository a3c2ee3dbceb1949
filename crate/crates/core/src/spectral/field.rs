use num_complex::Complex64;
use rayon::prelude::*;

use super::fft::{fft_nd, Direction};
use super::grid::Grid;
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Multi-component field stored as Fourier coefficients.
///
/// Convention: `f(x) = Σ_k f̂_k e^{ik·x}`. Coefficients are component-major:
/// component `c` occupies `coeffs[c·M^N .. (c+1)·M^N]` in row-major mode order.
#[derive(Clone, Debug)]
pub struct SpectralField {
    grid: Grid,
    ncomp: usize,
    coeffs: Vec<Complex64>,
}

/// Grid samples of a multi-component real field, component-major.
#[derive(Clone, Debug)]
pub struct RealField {
    grid: Grid,
    ncomp: usize,
    values: Vec<f64>,
}

impl SpectralField {
    pub fn zeros(grid: &Grid, ncomp: usize) -> Self {
        Self {
            grid: grid.clone(),
            ncomp,
            coeffs: vec![ZERO; ncomp * grid.npoints()],
        }
    }

    pub fn from_coeffs(grid: &Grid, ncomp: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        if ncomp == 0 || coeffs.len() != ncomp * grid.npoints() {
            return Err(Error::Shape(format!(
                "expected {} coefficients for {ncomp} components, got {}",
                ncomp * grid.npoints(),
                coeffs.len()
            )));
        }
        Ok(Self {
            grid: grid.clone(),
            ncomp,
            coeffs,
        })
    }

    /// Builds a field by evaluating `f(x, out)` at every grid point.
    pub fn from_fn(grid: &Grid, ncomp: usize, f: impl Fn(&[f64; 3], &mut [f64])) -> Self {
        RealField::from_fn(grid, ncomp, f).to_spectral()
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn ncomp(&self) -> usize {
        self.ncomp
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    pub fn component(&self, c: usize) -> &[Complex64] {
        let n = self.grid.npoints();
        &self.coeffs[c * n..(c + 1) * n]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [Complex64] {
        let n = self.grid.npoints();
        &mut self.coeffs[c * n..(c + 1) * n]
    }

    /// Single-component copy of component `c`.
    pub fn extract(&self, c: usize) -> SpectralField {
        SpectralField {
            grid: self.grid.clone(),
            ncomp: 1,
            coeffs: self.component(c).to_vec(),
        }
    }

    /// Stacks single- or multi-component fields into one field.
    pub fn stack(parts: &[SpectralField]) -> Result<SpectralField> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Shape("cannot stack zero fields".into()))?;
        let mut coeffs = Vec::with_capacity(parts.iter().map(|p| p.coeffs.len()).sum());
        for p in parts {
            first.check_grid(p)?;
            coeffs.extend_from_slice(&p.coeffs);
        }
        Ok(SpectralField {
            grid: first.grid.clone(),
            ncomp: parts.iter().map(|p| p.ncomp).sum(),
            coeffs,
        })
    }

    pub(crate) fn check_grid(&self, other: &SpectralField) -> Result<()> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    pub(crate) fn check_same_shape(&self, other: &SpectralField) -> Result<()> {
        self.check_grid(other)?;
        if self.ncomp != other.ncomp {
            return Err(Error::Shape(format!(
                "component count {} vs {}",
                self.ncomp, other.ncomp
            )));
        }
        Ok(())
    }

    pub fn require_vector(&self) -> Result<()> {
        if self.ncomp != self.grid.dim() {
            return Err(Error::Shape(format!(
                "expected a vector field with {} components, got {}",
                self.grid.dim(),
                self.ncomp
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &SpectralField) -> Result<SpectralField> {
        self.check_same_shape(other)?;
        let mut out = self.clone();
        out.coeffs
            .iter_mut()
            .zip(&other.coeffs)
            .for_each(|(a, b)| *a += b);
        Ok(out)
    }

    pub fn sub(&self, other: &SpectralField) -> Result<SpectralField> {
        self.check_same_shape(other)?;
        let mut out = self.clone();
        out.coeffs
            .iter_mut()
            .zip(&other.coeffs)
            .for_each(|(a, b)| *a -= b);
        Ok(out)
    }

    /// `self += alpha · other`.
    pub fn axpy(&mut self, alpha: f64, other: &SpectralField) -> Result<()> {
        self.check_same_shape(other)?;
        self.coeffs
            .iter_mut()
            .zip(&other.coeffs)
            .for_each(|(a, b)| *a += b * alpha);
        Ok(())
    }

    pub fn scaled(&self, alpha: f64) -> SpectralField {
        let mut out = self.clone();
        out.scale(alpha);
        out
    }

    pub fn scale(&mut self, alpha: f64) {
        self.coeffs.iter_mut().for_each(|c| *c *= alpha);
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs
            .iter()
            .all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Largest coefficient modulus.
    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Largest violation of `f̂_{-k} = conj(f̂_k)` over all components.
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.grid.npoints();
        let mut worst: f64 = 0.0;
        for c in 0..self.ncomp {
            let block = &self.coeffs[c * n..(c + 1) * n];
            for (flat, v) in block.iter().enumerate() {
                let partner = block[self.grid.negate(flat)];
                worst = worst.max((v - partner.conj()).norm());
            }
        }
        worst
    }

    /// Grid samples via inverse transform; imaginary parts are dropped.
    pub fn to_real(&self) -> RealField {
        let n = self.grid.npoints();
        let mut values = vec![0.0; self.coeffs.len()];
        let mut work = vec![ZERO; n];
        for c in 0..self.ncomp {
            work.copy_from_slice(self.component(c));
            fft_nd(&self.grid, &mut work, Direction::Inverse);
            values[c * n..(c + 1) * n]
                .par_iter_mut()
                .zip(work.par_iter())
                .for_each(|(v, w)| *v = w.re);
        }
        RealField {
            grid: self.grid.clone(),
            ncomp: self.ncomp,
            values,
        }
    }
}

impl RealField {
    pub fn new(grid: &Grid, ncomp: usize, values: Vec<f64>) -> Result<Self> {
        if ncomp == 0 || values.len() != ncomp * grid.npoints() {
            return Err(Error::Shape(format!(
                "expected {} samples for {ncomp} components, got {}",
                ncomp * grid.npoints(),
                values.len()
            )));
        }
        Ok(Self {
            grid: grid.clone(),
            ncomp,
            values,
        })
    }

    pub fn zeros(grid: &Grid, ncomp: usize) -> Self {
        Self {
            grid: grid.clone(),
            ncomp,
            values: vec![0.0; ncomp * grid.npoints()],
        }
    }

    pub fn from_fn(grid: &Grid, ncomp: usize, f: impl Fn(&[f64; 3], &mut [f64])) -> Self {
        let n = grid.npoints();
        let mut values = vec![0.0; ncomp * n];
        let mut buf = vec![0.0; ncomp];
        for p in 0..n {
            f(&grid.point(p), &mut buf);
            for c in 0..ncomp {
                values[c * n + p] = buf[c];
            }
        }
        Self {
            grid: grid.clone(),
            ncomp,
            values,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn ncomp(&self) -> usize {
        self.ncomp
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn component(&self, c: usize) -> &[f64] {
        let n = self.grid.npoints();
        &self.values[c * n..(c + 1) * n]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.grid.npoints();
        &mut self.values[c * n..(c + 1) * n]
    }

    /// Euclidean magnitude across components at grid point `p`.
    pub fn magnitude_at(&self, p: usize) -> f64 {
        let n = self.grid.npoints();
        (0..self.ncomp)
            .map(|c| self.values[c * n + p].powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        (0..self.grid.npoints())
            .map(|p| self.magnitude_at(p))
            .collect()
    }

    pub fn to_spectral(&self) -> SpectralField {
        let n = self.grid.npoints();
        let inv = 1.0 / n as f64;
        let mut coeffs = vec![ZERO; self.values.len()];
        for c in 0..self.ncomp {
            let block = &mut coeffs[c * n..(c + 1) * n];
            block
                .par_iter_mut()
                .zip(self.component(c).par_iter())
                .for_each(|(o, &v)| *o = Complex64::new(v, 0.0));
            fft_nd(&self.grid, block, Direction::Forward);
            block.par_iter_mut().for_each(|o| *o *= inv);
        }
        SpectralField {
            grid: self.grid.clone(),
            ncomp: self.ncomp,
            coeffs,
        }
    }
}

/// Forward transform of real samples laid out component-major.
pub fn forward_transform(samples: &[f64], ncomp: usize, grid: &Grid) -> Result<SpectralField> {
    Ok(RealField::new(grid, ncomp, samples.to_vec())?.to_spectral())
}

/// Inverse transform to real grid samples.
pub fn inverse_transform(field: &SpectralField) -> RealField {
    field.to_real()
}
