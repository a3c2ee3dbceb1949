//! Pseudospectral right-hand sides of the projected system.
//!
//! Products are formed on grid samples and transformed back; outputs are
//! truncated with the two-thirds rule unless dealiasing is switched off.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::Result;
use crate::initial_data::EtaVector;
use crate::spectral::{
    dealias_in_place, derivative, gradient, leray_project, RealField, SpectralField,
};

/// Right-hand sides of the velocity and director equations.
#[derive(Clone, Debug)]
pub struct RhsPair {
    pub f_u: SpectralField,
    pub f_d: SpectralField,
}

/// Options shared by the nonlinear kernels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RhsOptions {
    pub dealias: bool,
}

impl Default for RhsOptions {
    fn default() -> Self {
        Self { dealias: true }
    }
}

fn finish(mut f: SpectralField, opts: RhsOptions) -> SpectralField {
    if opts.dealias {
        dealias_in_place(&mut f);
    }
    f
}

/// `(u·∇) w` from samples of `u` and of `∇w` (layout `c·N + i`).
fn transport_samples(u: &RealField, grad_w: &RealField) -> RealField {
    let grid = u.grid();
    let n = grid.npoints();
    let dim = grid.dim();
    let ncomp = grad_w.ncomp() / dim;
    let mut out = RealField::zeros(grid, ncomp);
    let uv = u.values();
    let gv = grad_w.values();
    for c in 0..ncomp {
        out.component_mut(c)
            .par_iter_mut()
            .enumerate()
            .for_each(|(p, o)| {
                let mut acc = 0.0;
                for i in 0..dim {
                    acc += uv[i * n + p] * gv[(c * dim + i) * n + p];
                }
                *o = acc;
            });
    }
    out
}

/// `T_ij = Σ_c ∂_i d_c ∂_j d_c` from gradient samples.
fn stress_samples(grad_d: &RealField) -> RealField {
    let grid = grad_d.grid();
    let n = grid.npoints();
    let dim = grid.dim();
    let g = grad_d.values();
    let mut out = RealField::zeros(grid, dim * dim);
    for i in 0..dim {
        for j in i..dim {
            let vals: Vec<f64> = (0..n)
                .into_par_iter()
                .map(|p| {
                    (0..dim)
                        .map(|c| g[(c * dim + i) * n + p] * g[(c * dim + j) * n + p])
                        .sum()
                })
                .collect();
            out.component_mut(i * dim + j).copy_from_slice(&vals);
            if i != j {
                out.component_mut(j * dim + i).copy_from_slice(&vals);
            }
        }
    }
    out
}

/// `|∇d|² (η + d)` from samples.
fn reaction_samples(d: &RealField, grad_d: &RealField, eta: &EtaVector) -> RealField {
    let grid = d.grid();
    let n = grid.npoints();
    let dim = grid.dim();
    let g = grad_d.values();
    let dv = d.values();
    let energy: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|p| (0..dim * dim).map(|c| g[c * n + p].powi(2)).sum())
        .collect();
    let mut out = RealField::zeros(grid, dim);
    for c in 0..dim {
        let e = eta.get(c);
        out.component_mut(c)
            .iter_mut()
            .enumerate()
            .for_each(|(p, o)| *o = energy[p] * (e + dv[c * n + p]));
    }
    out
}

/// `Σ_i ∂_i T_ij` of a spectral `N×N` tensor.
fn tensor_divergence(t: &SpectralField) -> SpectralField {
    let grid = t.grid();
    let dim = grid.dim();
    let mut out = SpectralField::zeros(grid, dim);
    for i in 0..dim {
        for j in 0..dim {
            let dij = derivative(&t.extract(i * dim + j), i).expect("axis in range");
            out.component_mut(j)
                .iter_mut()
                .zip(dij.coeffs())
                .for_each(|(o, v)| *o += v);
        }
    }
    out
}

/// `(u·∇) w`, dealiased.
pub fn convective(u: &SpectralField, w: &SpectralField) -> Result<SpectralField> {
    convective_with(u, w, RhsOptions::default())
}

pub fn convective_with(
    u: &SpectralField,
    w: &SpectralField,
    opts: RhsOptions,
) -> Result<SpectralField> {
    u.require_vector()?;
    u.check_grid(w)?;
    let prod = transport_samples(&u.to_real(), &gradient(w).to_real());
    Ok(finish(prod.to_spectral(), opts))
}

/// `Div(∇d ⊙ ∇d)` in tensor-divergence form, with the tensor dealiased.
pub fn ericksen_stress_div(d: &SpectralField) -> Result<SpectralField> {
    ericksen_stress_div_with(d, RhsOptions::default())
}

pub fn ericksen_stress_div_with(d: &SpectralField, opts: RhsOptions) -> Result<SpectralField> {
    d.require_vector()?;
    let t = finish(stress_samples(&gradient(d).to_real()).to_spectral(), opts);
    Ok(tensor_divergence(&t))
}

/// Alternate form `(Δd·∇d)_j = Σ_c Δd_c ∂_j d_c`; agrees with
/// [`ericksen_stress_div`] up to the gradient `∇(|∇d|²/2)`.
pub fn laplacian_transport_form(d: &SpectralField) -> Result<SpectralField> {
    d.require_vector()?;
    let grid = d.grid();
    let dim = grid.dim();
    let n = grid.npoints();
    let k_sq = grid.k_sq();
    let mut lap = d.clone();
    for c in 0..dim {
        lap.component_mut(c)
            .iter_mut()
            .enumerate()
            .for_each(|(flat, v)| *v *= -k_sq[flat]);
    }
    let lap_r = lap.to_real();
    let gd = gradient(d).to_real();
    let mut out = RealField::zeros(grid, dim);
    for j in 0..dim {
        let vals: Vec<f64> = (0..n)
            .map(|p| {
                (0..dim)
                    .map(|c| lap_r.values()[c * n + p] * gd.values()[(c * dim + j) * n + p])
                    .sum()
            })
            .collect();
        out.component_mut(j).copy_from_slice(&vals);
    }
    Ok(finish(out.to_spectral(), RhsOptions::default()))
}

/// `|∇d|² (η + d)` with `|∇d|² = Σ_{i,j} (∂_i d_j)²`, dealiased.
pub fn director_reaction(d: &SpectralField, eta: &EtaVector) -> Result<SpectralField> {
    director_reaction_with(d, eta, RhsOptions::default())
}

pub fn director_reaction_with(
    d: &SpectralField,
    eta: &EtaVector,
    opts: RhsOptions,
) -> Result<SpectralField> {
    d.require_vector()?;
    eta.check_grid(d.grid())?;
    let r = reaction_samples(&d.to_real(), &gradient(d).to_real(), eta);
    Ok(finish(r.to_spectral(), opts))
}

/// Full right-hand sides:
/// `f_u = −P[(u·∇)u + Div(∇d⊙∇d)]`, `f_d = −(u·∇)d + |∇d|²(η + d)`.
pub fn assemble_rhs(u: &SpectralField, d: &SpectralField, eta: &EtaVector) -> Result<RhsPair> {
    assemble_rhs_with(u, d, eta, RhsOptions::default())
}

pub fn assemble_rhs_with(
    u: &SpectralField,
    d: &SpectralField,
    eta: &EtaVector,
    opts: RhsOptions,
) -> Result<RhsPair> {
    let (g, f_d) = forcing_terms(u, d, eta, opts)?;
    let mut f_u = leray_project(&g)?;
    f_u.scale(-1.0);
    Ok(RhsPair { f_u, f_d })
}

/// Unprojected momentum forcing `g = (u·∇)u + Div(∇d⊙∇d)` together with `f_d`.
pub(crate) fn forcing_terms(
    u: &SpectralField,
    d: &SpectralField,
    eta: &EtaVector,
    opts: RhsOptions,
) -> Result<(SpectralField, SpectralField)> {
    u.require_vector()?;
    d.require_vector()?;
    u.check_grid(d)?;
    eta.check_grid(u.grid())?;

    let u_r = u.to_real();
    let gu_r = gradient(u).to_real();
    let d_r = d.to_real();
    let gd_r = gradient(d).to_real();

    let mut g = finish(transport_samples(&u_r, &gu_r).to_spectral(), opts);
    let stress = finish(stress_samples(&gd_r).to_spectral(), opts);
    g.axpy(1.0, &tensor_divergence(&stress))?;

    let mut f_d = finish(reaction_samples(&d_r, &gd_r, eta).to_spectral(), opts);
    f_d.axpy(
        -1.0,
        &finish(transport_samples(&u_r, &gd_r).to_spectral(), opts),
    )?;
    Ok((g, f_d))
}

/// Unprojected momentum nonlinearity `g = (u·∇)u + Div(∇d⊙∇d)`.
pub fn momentum_forcing(u: &SpectralField, d: &SpectralField) -> Result<SpectralField> {
    let mut g = convective(u, u)?;
    g.axpy(1.0, &ericksen_stress_div(d)?)?;
    Ok(g)
}

/// Zero-mean pressure solving `−Δp = div g`, so that `∇p = −(I − P) g`.
pub fn pressure_recover(u: &SpectralField, d: &SpectralField) -> Result<SpectralField> {
    Ok(pressure_from_forcing(&momentum_forcing(u, d)?))
}

/// `p̂_k = i (k·ĝ_k)/|k|²`, `p̂_0 = 0`.
pub fn pressure_from_forcing(g: &SpectralField) -> SpectralField {
    let grid = g.grid();
    let n = grid.npoints();
    let dim = grid.dim();
    let src = g.coeffs();
    let coeffs: Vec<Complex64> = (0..n)
        .into_par_iter()
        .map(|flat| {
            let k = grid.derivative_k_vec(flat);
            let k_sq: f64 = k.iter().map(|v| v * v).sum();
            if k_sq == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            let dot: Complex64 = (0..dim).map(|c| src[c * n + flat] * k[c]).sum();
            Complex64::new(0.0, 1.0) * dot / k_sq
        })
        .collect();
    SpectralField::from_coeffs(grid, 1, coeffs).expect("scalar shape")
}

/// Grid values of `2(η+d)·f_d − 2|∇d|²`, the forcing of `φ = |η+d|² − 1`
/// obtained by substituting the director equation into `(∂_t − Δ)φ`.
pub fn constraint_forcing(
    u: &SpectralField,
    d: &SpectralField,
    eta: &EtaVector,
) -> Result<RealField> {
    let rhs = assemble_rhs(u, d, eta)?;
    let grid = d.grid();
    let n = grid.npoints();
    let dim = grid.dim();
    let fd = rhs.f_d.to_real();
    let d_r = d.to_real();
    let gd = gradient(d).to_real();
    let mut out = RealField::zeros(grid, 1);
    out.values_mut().iter_mut().enumerate().for_each(|(p, o)| {
        let mut dot = 0.0;
        for c in 0..dim {
            dot += (eta.get(c) + d_r.values()[c * n + p]) * fd.values()[c * n + p];
        }
        let energy: f64 = (0..dim * dim).map(|c| gd.values()[c * n + p].powi(2)).sum();
        *o = 2.0 * dot - 2.0 * energy;
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::initial_data::{random_low_mode_field, small_data_family};
    use crate::spectral::{dealias, divergence, is_retained, lp_norm, sobolev_norm, Grid, Lp};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn grid(m: usize) -> Grid {
        Grid::new(3, m, 2.0 * PI).unwrap()
    }

    fn smooth(grid: &Grid, seed: u64, amp: f64) -> SpectralField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        dealias(&random_low_mode_field(grid, 3, &mut rng)).scaled(amp)
    }

    /// Direct convolution `Σ_{p+q=k} û_i(p) (i q_i) ŵ(q)` restricted to retained modes.
    fn convolution_oracle(u: &SpectralField, w: &SpectralField) -> SpectralField {
        let g = u.grid();
        let n = g.npoints();
        let res = g.res() as i64;
        let support = |f: &SpectralField, c: usize| -> Vec<(usize, Complex64)> {
            f.component(c)
                .iter()
                .enumerate()
                .filter(|(_, v)| v.norm() > 0.0)
                .map(|(i, v)| (i, *v))
                .collect()
        };
        let mut out = SpectralField::zeros(g, w.ncomp());
        for c in 0..w.ncomp() {
            let ws = support(w, c);
            for i in 0..3 {
                let us = support(u, i);
                for &(p, up) in &us {
                    let mp = g.modes(p);
                    for &(q, wq) in &ws {
                        let mq = g.modes(q);
                        let kq = g.k_vec(q)[i];
                        let mut idx = [0usize; 3];
                        let mut m = [0i64; 3];
                        for a in 0..3 {
                            m[a] = mp[a] + mq[a];
                            idx[a] = m[a].rem_euclid(res) as usize;
                        }
                        if m.iter().any(|x| 3 * x.abs() > res) {
                            continue;
                        }
                        let k = g.flat(&idx);
                        out.component_mut(c)[k] += up * wq * Complex64::new(0.0, kq);
                    }
                }
            }
        }
        for c in 0..w.ncomp() {
            for k in 0..n {
                if !is_retained(g, k) {
                    out.component_mut(c)[k] = Complex64::new(0.0, 0.0);
                }
            }
        }
        out
    }

    #[test]
    fn convective_trivial_cases() {
        let g = grid(16);
        let w = smooth(&g, 1, 1.0);
        let zero = SpectralField::zeros(&g, 3);
        assert_eq!(convective(&zero, &w).unwrap().max_abs_coeff(), 0.0);
        let shear = SpectralField::from_fn(&g, 3, |x, o| {
            o[0] = x[1].sin();
            o[1] = 0.0;
            o[2] = 0.0;
        });
        assert!(convective(&shear, &shear).unwrap().max_abs_coeff() < 1e-15);
    }

    #[test]
    fn convective_matches_convolution() {
        let g = grid(16);
        let u = smooth(&g, 2, 1.0);
        let w = smooth(&g, 3, 1.0);
        let got = convective(&u, &w).unwrap();
        let want = convolution_oracle(&u, &w);
        let err = got.sub(&want).unwrap().max_abs_coeff();
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn stress_of_single_mode() {
        let g = grid(16);
        let d = SpectralField::from_fn(&g, 3, |x, o| {
            o[0] = x[0].sin();
            o[1] = 0.0;
            o[2] = 0.0;
        });
        let want = SpectralField::from_fn(&g, 3, |x, o| {
            o[0] = -(2.0 * x[0]).sin();
            o[1] = 0.0;
            o[2] = 0.0;
        });
        let got = ericksen_stress_div(&d).unwrap();
        assert!(got.sub(&want).unwrap().max_abs_coeff() < 1e-14);
        let c = SpectralField::from_fn(&g, 3, |_, o| o.copy_from_slice(&[0.1, 0.2, 0.3]));
        assert!(ericksen_stress_div(&c).unwrap().max_abs_coeff() < 1e-15);
    }

    #[test]
    fn stress_forms_agree_after_projection() {
        let g = grid(32);
        let d = smooth(&g, 4, 0.3);
        let a = leray_project(&ericksen_stress_div(&d).unwrap()).unwrap();
        let b = leray_project(&laplacian_transport_form(&d).unwrap()).unwrap();
        let diff = lp_norm(&a.sub(&b).unwrap(), Lp::Two);
        assert!(diff <= 1e-8 * lp_norm(&a, Lp::Two), "{diff}");
    }

    #[test]
    fn reaction_examples() {
        let g = grid(16);
        let eta = EtaVector::last_axis(3);
        let eps = 1e-2;
        let d = SpectralField::from_fn(&g, 3, |x, o| {
            o[0] = eps * x[0].sin();
            o[1] = 0.0;
            o[2] = 0.0;
        });
        let want = SpectralField::from_fn(&g, 3, |x, o| {
            let e = eps * eps * x[0].cos().powi(2);
            o[0] = e * eps * x[0].sin();
            o[1] = 0.0;
            o[2] = e;
        });
        let got = director_reaction(&d, &eta).unwrap();
        assert!(got.sub(&want).unwrap().max_abs_coeff() < 1e-16);
        let c = SpectralField::from_fn(&g, 3, |_, o| o.copy_from_slice(&[0.3, 0.0, 0.1]));
        assert!(director_reaction(&c, &eta).unwrap().max_abs_coeff() < 1e-16);
        let z = SpectralField::zeros(&g, 3);
        assert_eq!(director_reaction(&z, &eta).unwrap().max_abs_coeff(), 0.0);
    }

    #[test]
    fn assembled_rhs_cases() {
        let g = grid(16);
        let eta = EtaVector::new(&[0.0, 0.6, 0.8]).unwrap();
        let z = SpectralField::zeros(&g, 3);
        let r = assemble_rhs(&z, &z, &eta).unwrap();
        assert_eq!(r.f_u.max_abs_coeff() + r.f_d.max_abs_coeff(), 0.0);
        let c = SpectralField::from_fn(&g, 3, |_, o| o.copy_from_slice(&[0.1, -0.2, 0.05]));
        let r = assemble_rhs(&z, &c, &eta).unwrap();
        assert!(r.f_u.max_abs_coeff() + r.f_d.max_abs_coeff() < 1e-16);

        let u = leray_project(&smooth(&g, 5, 0.5)).unwrap();
        let d = smooth(&g, 6, 0.2);
        let r = assemble_rhs(&u, &d, &eta).unwrap();
        let div = lp_norm(&divergence(&r.f_u).unwrap(), Lp::Two);
        assert!(div <= 1e-10 * sobolev_norm(&r.f_u, 1.0).unwrap());
    }

    #[test]
    fn transport_is_skew() {
        let g = grid(32);
        let u = leray_project(&smooth(&g, 7, 1.0)).unwrap();
        let w = smooth(&g, 8, 1.0);
        let tw = convective(&u, &w).unwrap();
        let inner: f64 = tw
            .coeffs()
            .iter()
            .zip(w.coeffs())
            .map(|(a, b)| (a * b.conj()).re)
            .sum::<f64>()
            * g.volume();
        let bound = 1e-8 * sobolev_norm(&u, 1.0).unwrap() * sobolev_norm(&w, 1.0).unwrap().powi(2);
        assert!(inner.abs() <= bound, "{inner} vs {bound}");
    }

    #[test]
    fn pressure_cases() {
        let g = grid(16);
        let z = SpectralField::zeros(&g, 3);
        assert_eq!(pressure_recover(&z, &z).unwrap().max_abs_coeff(), 0.0);

        // divergence-free forcing gives zero pressure
        let sol = leray_project(&smooth(&g, 9, 1.0)).unwrap();
        assert!(pressure_from_forcing(&sol).max_abs_coeff() < 1e-14);

        let u = leray_project(&smooth(&g, 10, 0.5)).unwrap();
        let d = smooth(&g, 11, 0.5);
        let p = pressure_recover(&u, &d).unwrap();
        assert_eq!(p.coeffs()[0].norm(), 0.0);
        let gf = momentum_forcing(&u, &d).unwrap();
        let grad_p = gradient(&p);
        let grad_part = gf.sub(&leray_project(&gf).unwrap()).unwrap();
        let resid = lp_norm(&grad_p.add(&grad_part).unwrap(), Lp::Two);
        assert!(resid <= 1e-8 * lp_norm(&gf, Lp::Two), "{resid}");
    }

    #[test]
    fn constraint_forcing_vanishes_on_sphere() {
        let g = grid(32);
        let eta = EtaVector::last_axis(3);
        let (u0, d0) = small_data_family(1e-2, 12, &g, eta, 0.6).unwrap();
        let (u, d) = (u0.u0, d0.d0);
        let forcing = constraint_forcing(&u, &d, &eta).unwrap();
        let sup = forcing.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(sup <= 1e-8, "{sup}");
    }
}
