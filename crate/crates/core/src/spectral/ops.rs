//! Fourier multipliers, projections and norms on the periodic box.

use num_complex::Complex64;
use rayon::prelude::*;

use super::field::{RealField, SpectralField};
use super::grid::Grid;
use crate::error::{Error, Result};

/// Supported Lebesgue exponents.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Lp {
    One,
    Two,
    Inf,
}

impl Lp {
    pub fn from_exponent(p: f64) -> Result<Self> {
        if p == 1.0 {
            Ok(Lp::One)
        } else if p == 2.0 {
            Ok(Lp::Two)
        } else if p.is_infinite() && p > 0.0 {
            Ok(Lp::Inf)
        } else {
            Err(Error::InvalidArgument(format!(
                "L^p norm supported only for p in {{1, 2, inf}}, got {p}"
            )))
        }
    }

    /// `1/p`.
    pub fn reciprocal(self) -> f64 {
        match self {
            Lp::One => 1.0,
            Lp::Two => 0.5,
            Lp::Inf => 0.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Lp::One => "1",
            Lp::Two => "2",
            Lp::Inf => "inf",
        }
    }
}

/// Multiplies every component by a real mode-wise multiplier `m(flat)`.
pub fn apply_multiplier(f: &SpectralField, m: impl Fn(usize) -> f64 + Sync) -> SpectralField {
    let mut out = f.clone();
    let n = f.grid().npoints();
    for c in 0..f.ncomp() {
        out.component_mut(c)
            .par_iter_mut()
            .enumerate()
            .for_each(|(flat, v)| *v *= m(flat));
    }
    debug_assert_eq!(out.coeffs().len(), n * f.ncomp());
    out
}

/// Spectral derivative `∂_axis`; the Nyquist plane along `axis` is zeroed.
pub fn derivative(f: &SpectralField, axis: usize) -> Result<SpectralField> {
    let grid = f.grid();
    if axis >= grid.dim() {
        return Err(Error::InvalidArgument(format!(
            "axis {axis} out of range for dimension {}",
            grid.dim()
        )));
    }
    let mut out = f.clone();
    for c in 0..f.ncomp() {
        differentiate_in_place(grid, out.component_mut(c), axis);
    }
    Ok(out)
}

fn differentiate_in_place(grid: &Grid, block: &mut [Complex64], axis: usize) {
    let res = grid.res();
    let nyq = res / 2;
    let stride = res.pow((grid.dim() - 1 - axis) as u32);
    let axis_k = grid.axis_wavenumbers();
    block.par_iter_mut().enumerate().for_each(|(flat, v)| {
        let i = (flat / stride) % res;
        if i == nyq {
            *v = Complex64::new(0.0, 0.0);
        } else {
            *v *= Complex64::new(0.0, axis_k[i]);
        }
    });
}

/// Gradient tensor: component `c·N + i` holds `∂_i f_c`.
pub fn gradient(f: &SpectralField) -> SpectralField {
    let grid = f.grid();
    let dim = grid.dim();
    let n = grid.npoints();
    let mut coeffs = Vec::with_capacity(f.ncomp() * dim * n);
    for c in 0..f.ncomp() {
        for axis in 0..dim {
            let mut block = f.component(c).to_vec();
            differentiate_in_place(grid, &mut block, axis);
            coeffs.extend_from_slice(&block);
        }
    }
    SpectralField::from_coeffs(grid, f.ncomp() * dim, coeffs).expect("gradient shape")
}

/// `∇^j f` as a flattened tensor (`j = 0` returns a copy).
pub fn derivative_tensor(f: &SpectralField, order: usize) -> SpectralField {
    (0..order).fold(f.clone(), |acc, _| gradient(&acc))
}

/// Divergence of a vector field.
pub fn divergence(f: &SpectralField) -> Result<SpectralField> {
    f.require_vector()?;
    let grid = f.grid();
    let mut out = SpectralField::zeros(grid, 1);
    for axis in 0..grid.dim() {
        let mut block = f.component(axis).to_vec();
        differentiate_in_place(grid, &mut block, axis);
        out.component_mut(0)
            .iter_mut()
            .zip(&block)
            .for_each(|(o, b)| *o += b);
    }
    Ok(out)
}

/// Leray (Helmholtz) projection onto divergence-free fields.
///
/// For `k ≠ 0`, `f̂ ↦ f̂ − k (k·f̂)/|k|²`; the mean mode passes through.
/// `k` is the derivative wavevector, so `div ∘ P` vanishes to roundoff.
pub fn leray_project(f: &SpectralField) -> Result<SpectralField> {
    f.require_vector()?;
    let grid = f.grid();
    let dim = grid.dim();
    let n = grid.npoints();
    let src = f.coeffs();
    let mut out = f.clone();
    // Work mode-by-mode; each mode touches `dim` strided entries.
    let updates: Vec<[Complex64; 3]> = (0..n)
        .into_par_iter()
        .map(|flat| {
            let mut res = [Complex64::new(0.0, 0.0); 3];
            for (c, r) in res.iter_mut().enumerate().take(dim) {
                *r = src[c * n + flat];
            }
            let k = grid.derivative_k_vec(flat);
            let k_sq: f64 = k.iter().map(|v| v * v).sum();
            if k_sq == 0.0 {
                return res;
            }
            let mut dot = Complex64::new(0.0, 0.0);
            for c in 0..dim {
                dot += res[c] * k[c];
            }
            let scale = dot / k_sq;
            for c in 0..dim {
                res[c] -= scale * k[c];
            }
            res
        })
        .collect();
    let dst = out.coeffs_mut();
    for (flat, vals) in updates.iter().enumerate() {
        for (c, v) in vals.iter().enumerate().take(dim) {
            dst[c * n + flat] = *v;
        }
    }
    Ok(out)
}

/// Heat semigroup `f̂_k ↦ e^{−|k|² t} f̂_k`.
pub fn heat_multiplier(f: &SpectralField, t: f64) -> Result<SpectralField> {
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "time must be >= 0, got {t}"
        )));
    }
    if t == 0.0 {
        return Ok(f.clone());
    }
    let k_sq = f.grid().k_sq();
    Ok(apply_multiplier(f, |flat| (-k_sq[flat] * t).exp()))
}

/// True when the mode survives the two-thirds truncation.
pub fn is_retained(grid: &Grid, flat: usize) -> bool {
    let res = grid.res() as i64;
    let modes = grid.modes(flat);
    modes[..grid.dim()].iter().all(|m| 3 * m.abs() <= res)
}

/// Two-thirds rule: zero every mode with some `|m_i| > M/3`.
pub fn dealias(f: &SpectralField) -> SpectralField {
    let grid = f.grid();
    apply_multiplier(f, |flat| if is_retained(grid, flat) { 1.0 } else { 0.0 })
}

pub(crate) fn dealias_in_place(f: &mut SpectralField) {
    let grid = f.grid().clone();
    for c in 0..f.ncomp() {
        f.component_mut(c)
            .par_iter_mut()
            .enumerate()
            .for_each(|(flat, v)| {
                if !is_retained(&grid, flat) {
                    *v = Complex64::new(0.0, 0.0);
                }
            });
    }
}

/// `( L^N Σ_k (1+|k|²)^s |f̂_k|² )^{1/2}`, summed over all components.
pub fn sobolev_norm(f: &SpectralField, s: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "Sobolev index must be >= 0, got {s}"
        )));
    }
    Ok(weighted_sum(f, |ksq| (1.0 + ksq).powf(s)).sqrt())
}

/// Homogeneous `( L^N Σ_k |k|^{2s} |f̂_k|² )^{1/2}`.
pub fn homogeneous_sobolev_norm(f: &SpectralField, s: f64) -> f64 {
    weighted_sum(f, |ksq| if ksq == 0.0 { 0.0 } else { ksq.powf(s) }).sqrt()
}

/// `L^N Σ_k w(|k|²) |f̂_k|²`, accumulated in a fixed order.
pub(crate) fn weighted_sum(f: &SpectralField, weight: impl Fn(f64) -> f64) -> f64 {
    let grid = f.grid();
    let n = grid.npoints();
    let k_sq = grid.k_sq();
    let weights: Vec<f64> = k_sq.iter().map(|&k| weight(k)).collect();
    let mut acc = 0.0;
    for c in 0..f.ncomp() {
        let block = &f.coeffs()[c * n..(c + 1) * n];
        acc += block
            .iter()
            .zip(&weights)
            .map(|(v, w)| w * v.norm_sqr())
            .sum::<f64>();
    }
    acc * grid.volume()
}

/// L^p norm; vector fields use the pointwise Euclidean magnitude.
///
/// `p = 2` is evaluated by Parseval, `p = 1` by grid quadrature with weight
/// `(L/M)^N`, `p = ∞` as the maximum over grid samples.
pub fn lp_norm(f: &SpectralField, p: Lp) -> f64 {
    match p {
        Lp::Two => weighted_sum(f, |_| 1.0).sqrt(),
        Lp::One | Lp::Inf => lp_norm_samples(&f.to_real(), p),
    }
}

/// L^p norm of grid samples (`p = 2` by quadrature).
pub fn lp_norm_samples(f: &RealField, p: Lp) -> f64 {
    let grid = f.grid();
    let n = grid.npoints();
    match p {
        Lp::One => grid.cell_volume() * (0..n).map(|i| f.magnitude_at(i)).sum::<f64>(),
        Lp::Two => {
            (grid.cell_volume() * (0..n).map(|i| f.magnitude_at(i).powi(2)).sum::<f64>()).sqrt()
        }
        Lp::Inf => (0..n).map(|i| f.magnitude_at(i)).fold(0.0, f64::max),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::forward_transform;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn grid3(m: usize) -> Grid {
        Grid::new(3, m, 2.0 * PI).unwrap()
    }

    fn sin_x1(grid: &Grid, ncomp: usize) -> SpectralField {
        SpectralField::from_fn(grid, ncomp, |x, out| {
            out.iter_mut().for_each(|o| *o = 0.0);
            out[0] = x[0].sin();
        })
    }

    #[test]
    fn constant_has_only_dc() {
        let g = grid3(8);
        let f = forward_transform(&vec![2.5; 512], 1, &g).unwrap();
        assert_relative_eq!(f.coeffs()[0].re, 2.5, epsilon = 1e-14);
        assert!(f.coeffs()[1..].iter().all(|c| c.norm() < 1e-14));
    }

    #[test]
    fn sine_coefficients() {
        let g = grid3(8);
        let f = sin_x1(&g, 1);
        let plus = g.flat(&[1, 0, 0]);
        let minus = g.flat(&[7, 0, 0]);
        assert!((f.coeffs()[plus] - Complex64::new(0.0, -0.5)).norm() < 1e-14);
        assert!((f.coeffs()[minus] - Complex64::new(0.0, 0.5)).norm() < 1e-14);
        assert!(f.symmetry_defect() < 1e-15);
    }

    #[test]
    fn derivative_of_sine() {
        let g = grid3(16);
        let f = sin_x1(&g, 1);
        let df = derivative(&f, 0).unwrap().to_real();
        let ddf = derivative(&derivative(&f, 0).unwrap(), 0)
            .unwrap()
            .to_real();
        for p in 0..g.npoints() {
            let x = g.point(p)[0];
            assert!((df.values()[p] - x.cos()).abs() < 1e-13);
            assert!((ddf.values()[p] + x.sin()).abs() < 1e-13);
        }
        let c = SpectralField::from_fn(&g, 1, |_, o| o[0] = 3.0);
        assert!(derivative(&c, 2).unwrap().max_abs_coeff() < 1e-15);
        assert!(derivative(&c, 3).is_err());
    }

    #[test]
    fn derivative_zeroes_nyquist() {
        let g = grid3(8);
        let mut f = SpectralField::zeros(&g, 1);
        let nyq = g.flat(&[4, 0, 0]);
        f.coeffs_mut()[nyq] = Complex64::new(1.0, 0.0);
        assert_eq!(derivative(&f, 0).unwrap().max_abs_coeff(), 0.0);
    }

    #[test]
    fn sobolev_norm_examples() {
        let g = grid3(16);
        let f = sin_x1(&g, 1);
        assert_relative_eq!(
            sobolev_norm(&f, 1.0).unwrap(),
            (8.0 * PI.powi(3)).sqrt(),
            max_relative = 1e-13
        );
        assert_relative_eq!(
            sobolev_norm(&f, 0.0).unwrap(),
            lp_norm(&f, Lp::Two),
            max_relative = 1e-14
        );
        assert_eq!(
            sobolev_norm(&SpectralField::zeros(&g, 3), 0.6).unwrap(),
            0.0
        );
        assert!(sobolev_norm(&f, -0.5).is_err());
    }

    #[test]
    fn lp_norm_examples() {
        let g = grid3(16);
        let f = sin_x1(&g, 1);
        // grid quadrature of |sin| on M points is (2π/M)·2cot(π/M)
        let discrete = 2.0 * PI / 16.0 * 2.0 / (PI / 16.0).tan() * (2.0 * PI).powi(2);
        assert_relative_eq!(lp_norm(&f, Lp::One), discrete, max_relative = 1e-12);
        let fine = sin_x1(&grid3(64), 1);
        assert_relative_eq!(
            lp_norm(&fine, Lp::One),
            4.0 * (2.0 * PI).powi(2),
            max_relative = 1e-3
        );
        let c = SpectralField::from_fn(&g, 1, |_, o| o[0] = -1.75);
        assert_relative_eq!(lp_norm(&c, Lp::Inf), 1.75, max_relative = 1e-14);
        let z = SpectralField::zeros(&g, 3);
        for p in [Lp::One, Lp::Two, Lp::Inf] {
            assert_eq!(lp_norm(&z, p), 0.0);
        }
        assert!(Lp::from_exponent(3.0).is_err());
        assert_eq!(Lp::from_exponent(f64::INFINITY).unwrap(), Lp::Inf);
    }

    #[test]
    fn leray_examples() {
        let g = grid3(16);
        let shear = SpectralField::from_fn(&g, 3, |x, o| {
            o[0] = x[1].sin();
            o[1] = 0.0;
            o[2] = 0.0;
        });
        let p = leray_project(&shear).unwrap();
        assert!(p.sub(&shear).unwrap().max_abs_coeff() < 1e-15);

        let grad = sin_x1(&g, 3);
        assert!(leray_project(&grad).unwrap().max_abs_coeff() < 1e-15);
        assert!(leray_project(&sin_x1(&g, 1)).is_err());
    }

    #[test]
    fn leray_keeps_mean() {
        let g = grid3(8);
        let c = SpectralField::from_fn(&g, 3, |_, o| {
            o[0] = 1.0;
            o[1] = -2.0;
            o[2] = 0.5;
        });
        let p = leray_project(&c).unwrap();
        assert!(p.sub(&c).unwrap().max_abs_coeff() < 1e-15);
    }

    #[test]
    fn heat_examples() {
        let g = grid3(16);
        let f = sin_x1(&g, 1);
        assert!(
            heat_multiplier(&f, 0.0)
                .unwrap()
                .sub(&f)
                .unwrap()
                .max_abs_coeff()
                == 0.0
        );
        let h = heat_multiplier(&f, 1.0).unwrap();
        assert!(h.sub(&f.scaled((-1.0f64).exp())).unwrap().max_abs_coeff() < 1e-16);
        let c = SpectralField::from_fn(&g, 1, |_, o| o[0] = 4.0);
        assert!(
            heat_multiplier(&c, 7.0)
                .unwrap()
                .sub(&c)
                .unwrap()
                .max_abs_coeff()
                < 1e-15
        );
        assert!(heat_multiplier(&f, -1e-3).is_err());
    }

    #[test]
    fn dealias_examples() {
        let g = grid3(16);
        let low = SpectralField::from_fn(&g, 1, |x, o| o[0] = (5.0 * x[0]).cos() + x[2].sin());
        assert!(dealias(&low).sub(&low).unwrap().max_abs_coeff() < 1e-15);
        let high = SpectralField::from_fn(&g, 1, |x, o| o[0] = (7.0 * x[1]).cos() * x[0].sin());
        assert!(dealias(&high).max_abs_coeff() < 1e-15);
    }
}
