//! Admissible initial data: unit-length directors `η + d₀` and solenoidal velocities.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::spectral::{
    divergence, leray_project, lp_norm, lp_norm_samples, sobolev_norm, Grid, Lp, RealField,
    SpectralField,
};

/// Pointwise tolerance on `| |η + d₀|² − 1 |`.
pub const SPHERE_TOL: f64 = 1e-12;
/// Relative tolerance on `‖div u‖_{L²} / ‖u‖_{H¹}`.
pub const DIVERGENCE_TOL: f64 = 1e-10;
/// Absolute divergence accepted regardless of the field size.
const ROUNDOFF_FLOOR: f64 = 1e-13;
/// Lower bound on `|η + d_raw|` accepted by [`make_sphere_valued`].
pub const MIN_NORMALIZABLE: f64 = 0.1;
/// Lattice radius of the random low-mode spectrum.
pub const RANDOM_MODE_RADIUS: i64 = 4;

/// Constant far-field director, normalized to unit length on construction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EtaVector {
    dim: usize,
    eta: [f64; 3],
}

impl EtaVector {
    pub fn new(components: &[f64]) -> Result<Self> {
        if !(components.len() == 2 || components.len() == 3) {
            return Err(Error::InvalidArgument(format!(
                "eta needs 2 or 3 components, got {}",
                components.len()
            )));
        }
        let norm = components.iter().map(|c| c * c).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::InvalidArgument(
                "eta must be a nonzero finite vector".into(),
            ));
        }
        let mut eta = [0.0; 3];
        for (e, c) in eta.iter_mut().zip(components) {
            *e = c / norm;
        }
        Ok(Self {
            dim: components.len(),
            eta,
        })
    }

    /// Unit vector along the last axis.
    pub fn last_axis(dim: usize) -> Self {
        let mut eta = [0.0; 3];
        eta[dim - 1] = 1.0;
        Self { dim, eta }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.eta[..self.dim]
    }

    pub fn get(&self, i: usize) -> f64 {
        self.eta[i]
    }

    /// A unit vector orthogonal to `η`.
    pub fn orthogonal(&self) -> [f64; 3] {
        let axis = (0..self.dim)
            .min_by(|&a, &b| self.eta[a].abs().total_cmp(&self.eta[b].abs()))
            .unwrap_or(0);
        let mut e = [0.0; 3];
        e[axis] = 1.0;
        let dot = self.eta[axis];
        for i in 0..self.dim {
            e[i] -= dot * self.eta[i];
        }
        let n = e.iter().map(|v| v * v).sum::<f64>().sqrt();
        e.iter_mut().for_each(|v| *v /= n);
        e
    }

    pub(crate) fn check_grid(&self, grid: &Grid) -> Result<()> {
        if self.dim != grid.dim() {
            return Err(Error::Shape(format!(
                "eta has {} components on a {}-D grid",
                self.dim,
                grid.dim()
            )));
        }
        Ok(())
    }
}

/// Director deviation `d₀` with `|η + d₀| = 1` at every grid point.
#[derive(Clone, Debug)]
pub struct DirectorData {
    pub d0: SpectralField,
    pub eta: EtaVector,
}

impl DirectorData {
    pub fn new(d0: SpectralField, eta: EtaVector) -> Result<Self> {
        d0.require_vector()?;
        eta.check_grid(d0.grid())?;
        let defect = sphere_defect(&d0, &eta);
        if defect > SPHERE_TOL {
            return Err(Error::InvalidArgument(format!(
                "director leaves the unit sphere by {defect:.3e}"
            )));
        }
        Ok(Self { d0, eta })
    }
}

/// Initial velocity with `‖div u₀‖_{L²} ≤ 1e-10 ‖u₀‖_{H¹}`.
#[derive(Clone, Debug)]
pub struct FlowData {
    pub u0: SpectralField,
}

impl FlowData {
    pub fn new(u0: SpectralField) -> Result<Self> {
        u0.require_vector()?;
        let div = lp_norm(&divergence(&u0)?, Lp::Two);
        let scale = sobolev_norm(&u0, 1.0)?;
        if div > DIVERGENCE_TOL * scale && div > ROUNDOFF_FLOOR {
            return Err(Error::InvalidArgument(format!(
                "velocity divergence {div:.3e} exceeds threshold"
            )));
        }
        Ok(Self { u0 })
    }

    pub fn zero(grid: &Grid) -> Self {
        Self {
            u0: SpectralField::zeros(grid, grid.dim()),
        }
    }
}

/// `max_x | |η + d(x)|² − 1 |` over grid points.
pub fn sphere_defect(d: &SpectralField, eta: &EtaVector) -> f64 {
    sphere_defect_samples(&d.to_real(), eta)
}

pub(crate) fn sphere_defect_samples(d: &RealField, eta: &EtaVector) -> f64 {
    let n = d.grid().npoints();
    let dim = d.ncomp();
    let vals = d.values();
    (0..n)
        .map(|p| {
            let sq: f64 = (0..dim)
                .map(|c| (eta.get(c) + vals[c * n + p]).powi(2))
                .sum();
            (sq - 1.0).abs()
        })
        .fold(0.0, f64::max)
}

/// Normalizes `η + d_raw` pointwise onto the unit sphere and returns `d₀ = v − η`.
pub fn make_sphere_valued(d_raw: &SpectralField, eta: EtaVector) -> Result<DirectorData> {
    d_raw.require_vector()?;
    eta.check_grid(d_raw.grid())?;
    let mut samples = d_raw.to_real();
    let grid = d_raw.grid().clone();
    let n = grid.npoints();
    let dim = grid.dim();
    let vals = samples.values_mut();
    let mut min_norm = f64::INFINITY;
    for p in 0..n {
        let mut v = [0.0; 3];
        for c in 0..dim {
            v[c] = eta.get(c) + vals[c * n + p];
        }
        let len = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        min_norm = min_norm.min(len);
        for c in 0..dim {
            vals[c * n + p] = v[c] / len - eta.get(c);
        }
    }
    if !(min_norm >= MIN_NORMALIZABLE) {
        return Err(Error::SingularNormalization {
            min_norm,
            bound: MIN_NORMALIZABLE,
        });
    }
    DirectorData::new(samples.to_spectral(), eta)
}

/// Leray-projects a raw velocity.
pub fn make_divergence_free(u_raw: &SpectralField) -> Result<FlowData> {
    FlowData::new(leray_project(u_raw)?)
}

/// Real random field with Gaussian coefficients on lattice modes `|m| ≤ 4`.
///
/// The draw order depends only on the lattice, not on the grid resolution, so
/// the same seed gives the same continuum function on every grid that can hold it.
pub fn random_low_mode_field<R: Rng>(grid: &Grid, ncomp: usize, rng: &mut R) -> SpectralField {
    let dim = grid.dim();
    let res = grid.res() as i64;
    let r = RANDOM_MODE_RADIUS;
    let mut out = SpectralField::zeros(grid, ncomp);
    let side = (2 * r + 1) as usize;
    let count = side.pow(dim as u32);
    for c in 0..ncomp {
        let block = out.component_mut(c);
        for lin in 0..count {
            let mut m = [0i64; 3];
            let mut rem = lin;
            for a in (0..dim).rev() {
                m[a] = (rem % side) as i64 - r;
                rem /= side;
            }
            let norm_sq: i64 = m[..dim].iter().map(|x| x * x).sum();
            if norm_sq > r * r || !is_canonical(&m[..dim]) {
                continue;
            }
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = if norm_sq == 0 {
                0.0
            } else {
                rng.sample(StandardNormal)
            };
            if m[..dim].iter().any(|x| 2 * x.abs() >= res) {
                continue;
            }
            let mut idx = [0usize; 3];
            let mut neg = [0usize; 3];
            for a in 0..dim {
                idx[a] = m[a].rem_euclid(res) as usize;
                neg[a] = (-m[a]).rem_euclid(res) as usize;
            }
            let v = Complex64::new(re, im);
            block[grid.flat(&idx)] = v;
            block[grid.flat(&neg)] = v.conj();
        }
    }
    out
}

/// First nonzero entry positive, or the zero vector.
fn is_canonical(m: &[i64]) -> bool {
    match m.iter().find(|&&x| x != 0) {
        Some(&x) => x > 0,
        None => true,
    }
}

/// Periodized Gaussian `Σ_k e^{−a|k|²} e^{ik·x}`, rescaled to unit grid L¹ norm.
pub fn gaussian_bump(grid: &Grid, a: f64) -> Result<SpectralField> {
    if !(a >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "bump width must be >= 0, got {a}"
        )));
    }
    let k_sq = grid.k_sq();
    let coeffs = k_sq
        .iter()
        .map(|&k| Complex64::new((-a * k).exp(), 0.0))
        .collect();
    let mut f = SpectralField::from_coeffs(grid, 1, coeffs)?;
    let l1 = lp_norm(&f, Lp::One);
    f.scale(1.0 / l1);
    Ok(f)
}

/// `‖u‖_{H^s} + ‖u‖_{L¹}`.
pub fn velocity_size(u: &SpectralField, s: f64) -> Result<f64> {
    Ok(sobolev_norm(u, s)? + lp_norm(u, Lp::One))
}

/// `‖d‖_{H^{s+1}} + ‖d‖_{L¹}`.
pub fn director_size(d: &SpectralField, s: f64) -> Result<f64> {
    let samples = d.to_real();
    Ok(sobolev_norm(d, s + 1.0)? + lp_norm_samples(&samples, Lp::One))
}

/// Shape of the small-data profile.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Profile {
    /// Seeded Gaussian coefficients on the low-mode lattice.
    Random { seed: u64 },
    /// Localized bump of width parameter `a` centred at the origin.
    Bump { a: f64 },
}

/// Default width parameter of the localized bump.
pub const BUMP_WIDTH: f64 = 0.01;

/// Seeded small data with `‖u₀‖_{H^s∩L¹} ≤ ε` and `‖d₀‖_{H^{s+1}∩L¹} ≤ ε`.
pub fn small_data_family(
    epsilon: f64,
    seed: u64,
    grid: &Grid,
    eta: EtaVector,
    s: f64,
) -> Result<(FlowData, DirectorData)> {
    small_data(epsilon, Profile::Random { seed }, grid, eta, s)
}

/// Small data of the given profile, rescaled to size `ε`.
pub fn small_data(
    epsilon: f64,
    profile: Profile,
    grid: &Grid,
    eta: EtaVector,
    s: f64,
) -> Result<(FlowData, DirectorData)> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    eta.check_grid(grid)?;
    let (u_raw, d_raw) = match profile {
        Profile::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = random_low_mode_field(grid, grid.dim(), &mut rng);
            let d = random_low_mode_field(grid, grid.dim(), &mut rng);
            (u, d)
        }
        Profile::Bump { a } => {
            let bump = gaussian_bump(grid, a)?;
            let along = |dir: &[f64]| {
                let parts: Vec<SpectralField> =
                    (0..grid.dim()).map(|c| bump.scaled(dir[c])).collect();
                SpectralField::stack(&parts)
            };
            let mut e1 = [0.0; 3];
            e1[0] = 1.0;
            (along(&e1)?, along(&eta.orthogonal())?)
        }
    };

    let flow = make_divergence_free(&u_raw)?;
    let flow = FlowData::new(rescale_linear(&flow.u0, epsilon, |u| velocity_size(u, s))?)?;
    let director = rescale_director(&d_raw, eta, epsilon, s)?;
    Ok((flow, director))
}

fn rescale_linear(
    f: &SpectralField,
    target: f64,
    size: impl Fn(&SpectralField) -> Result<f64>,
) -> Result<SpectralField> {
    let base = size(f)?;
    if base == 0.0 {
        return Err(Error::InvalidArgument(
            "raw field is identically zero".into(),
        ));
    }
    let mut c = target / base;
    for _ in 0..8 {
        if !c.is_normal() {
            return Err(Error::InvalidArgument(format!(
                "rescaling to epsilon = {target:e} underflows"
            )));
        }
        let out = f.scaled(c);
        let got = size(&out)?;
        if got == 0.0 {
            return Err(Error::InvalidArgument(format!(
                "rescaling to epsilon = {target:e} underflows"
            )));
        }
        if got <= target {
            return Ok(out);
        }
        c *= 1.0 - 4.0 * f64::EPSILON;
    }
    Err(Error::InvalidArgument(
        "rescaling failed to meet the bound".into(),
    ))
}

/// Largest `c` (by bisection) with `size(normalize(η + c·g) − η) ≤ ε`.
fn rescale_director(
    g: &SpectralField,
    eta: EtaVector,
    epsilon: f64,
    s: f64,
) -> Result<DirectorData> {
    let eval = |c: f64| -> Option<(DirectorData, f64)> {
        let data = make_sphere_valued(&g.scaled(c), eta).ok()?;
        let size = director_size(&data.d0, s).ok()?;
        Some((data, size))
    };
    let linear = director_size(g, s)?;
    if linear == 0.0 {
        return Err(Error::InvalidArgument(
            "raw director is identically zero".into(),
        ));
    }
    let mut hi = epsilon / linear;
    if !hi.is_normal() {
        return Err(Error::InvalidArgument(format!(
            "rescaling to epsilon = {epsilon:e} underflows"
        )));
    }
    let mut grown = 0;
    while let Some((_, size)) = eval(hi) {
        if size > epsilon {
            break;
        }
        hi *= 2.0;
        grown += 1;
        if grown > 200 {
            return Err(Error::InvalidArgument(
                "cannot bracket the director scale".into(),
            ));
        }
    }
    let mut lo = 0.0;
    let mut best: Option<DirectorData> = None;
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        match eval(mid) {
            Some((data, size)) if size <= epsilon => {
                lo = mid;
                best = Some(data);
            }
            _ => hi = mid,
        }
    }
    match best {
        Some(data) if lo.is_normal() && director_size(&data.d0, s)? > 0.0 => Ok(data),
        _ => Err(Error::InvalidArgument(format!(
            "rescaling to epsilon = {epsilon:e} underflows"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid() -> Grid {
        Grid::new(3, 16, 2.0 * PI).unwrap()
    }

    #[test]
    fn eta_is_normalized() {
        let eta = EtaVector::new(&[3.0, 0.0, 4.0]).unwrap();
        assert!((eta.get(0) - 0.6).abs() < 1e-15);
        assert!(EtaVector::new(&[0.0, 0.0, 0.0]).is_err());
        let o = eta.orthogonal();
        let dot: f64 = (0..3).map(|i| o[i] * eta.get(i)).sum();
        assert!(dot.abs() < 1e-15);
    }

    #[test]
    fn sphere_valued_trivial_cases() {
        let g = grid();
        let eta = EtaVector::last_axis(3);
        let zero = SpectralField::zeros(&g, 3);
        let d = make_sphere_valued(&zero, eta).unwrap();
        assert!(d.d0.max_abs_coeff() < 1e-16);

        let doubled = SpectralField::from_fn(&g, 3, |_, o| {
            o[0] = 0.0;
            o[1] = 0.0;
            o[2] = 1.0;
        });
        let d = make_sphere_valued(&doubled, eta).unwrap();
        assert!(d.d0.max_abs_coeff() < 1e-15);
    }

    #[test]
    fn sphere_valued_bump() {
        let g = grid();
        let eta = EtaVector::new(&[1.0, 1.0, 1.0]).unwrap();
        let raw = SpectralField::from_fn(&g, 3, |x, o| {
            let b = 0.4 * (-(x[0] - PI).powi(2) - (x[1] - PI).powi(2)).exp();
            o[0] = b;
            o[1] = -0.5 * b;
            o[2] = b * x[2].cos();
        });
        let d = make_sphere_valued(&raw, eta).unwrap();
        assert!(sphere_defect(&d.d0, &eta) <= SPHERE_TOL);
    }

    #[test]
    fn sphere_valued_rejects_near_antipode() {
        let g = grid();
        let eta = EtaVector::last_axis(3);
        let raw = SpectralField::from_fn(&g, 3, |_, o| {
            o[0] = 0.0;
            o[1] = 0.0;
            o[2] = -0.95;
        });
        assert!(matches!(
            make_sphere_valued(&raw, eta),
            Err(Error::SingularNormalization { .. })
        ));
    }

    #[test]
    fn divergence_free_cases() {
        let g = grid();
        let shear = SpectralField::from_fn(&g, 3, |x, o| {
            o[0] = x[2].sin();
            o[1] = x[0].cos();
            o[2] = 0.0;
        });
        let f = make_divergence_free(&shear).unwrap();
        assert!(f.u0.sub(&shear).unwrap().max_abs_coeff() < 1e-15);
        let grad = SpectralField::from_fn(&g, 3, |x, o| {
            o[0] = x[0].cos() * x[1].sin();
            o[1] = x[0].sin() * x[1].cos();
            o[2] = 0.0;
        });
        assert!(make_divergence_free(&grad).unwrap().u0.max_abs_coeff() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let raw = random_low_mode_field(&g, 3, &mut rng);
        assert!(make_divergence_free(&raw).is_ok());
        assert!(FlowData::new(raw).is_err());
    }

    #[test]
    fn random_field_is_real_and_resolution_independent() {
        let g16 = grid();
        let g32 = Grid::new(3, 32, 2.0 * PI).unwrap();
        let a = random_low_mode_field(&g16, 2, &mut ChaCha8Rng::seed_from_u64(5));
        let b = random_low_mode_field(&g32, 2, &mut ChaCha8Rng::seed_from_u64(5));
        assert!(a.symmetry_defect() == 0.0);
        assert!(
            (sobolev_norm(&a, 1.3).unwrap() / sobolev_norm(&b, 1.3).unwrap() - 1.0).abs() < 1e-13
        );
        let xa = a.to_real();
        let xb = b.to_real();
        // grid point (1,2,3) on the coarse grid is (2,4,6) on the fine one
        let pa = g16.flat(&[1, 2, 3]);
        let pb = g32.flat(&[2, 4, 6]);
        assert!((xa.values()[pa] - xb.values()[pb]).abs() < 1e-11);
    }

    #[test]
    fn small_data_meets_bounds() {
        let g = grid();
        let eta = EtaVector::last_axis(3);
        let s = 0.6;
        let (u, d) = small_data_family(0.01, 7, &g, eta, s).unwrap();
        let us = velocity_size(&u.u0, s).unwrap();
        let ds = director_size(&d.d0, s).unwrap();
        assert!(us > 0.0 && us <= 0.01, "{us}");
        assert!(ds > 0.0 && ds <= 0.01, "{ds}");
        assert!(us > 0.0099 && ds > 0.0099);
        assert!(sphere_defect(&d.d0, &eta) <= SPHERE_TOL);
    }

    #[test]
    fn small_data_is_deterministic_and_monotone() {
        let g = grid();
        let eta = EtaVector::last_axis(3);
        let (u1, d1) = small_data_family(0.02, 11, &g, eta, 0.6).unwrap();
        let (u2, d2) = small_data_family(0.02, 11, &g, eta, 0.6).unwrap();
        assert_eq!(u1.u0.coeffs(), u2.u0.coeffs());
        assert_eq!(d1.d0.coeffs(), d2.d0.coeffs());

        let mut last = (0.0, 0.0);
        for eps in [1e-6, 1e-4, 1e-2, 5e-2] {
            let (u, d) = small_data_family(eps, 11, &g, eta, 0.6).unwrap();
            let sizes = (
                velocity_size(&u.u0, 0.6).unwrap(),
                director_size(&d.d0, 0.6).unwrap(),
            );
            assert!(sizes.0 >= last.0 && sizes.1 >= last.1);
            last = sizes;
        }
        let (u, _) = small_data_family(1e-9, 11, &g, eta, 0.6).unwrap();
        assert!(velocity_size(&u.u0, 0.6).unwrap() <= 1e-9);
    }

    #[test]
    fn small_data_rejects_underflow() {
        let g = grid();
        let eta = EtaVector::last_axis(3);
        assert!(small_data_family(1e-320, 1, &g, eta, 0.6).is_err());
        assert!(small_data_family(0.0, 1, &g, eta, 0.6).is_err());
    }

    #[test]
    fn bump_has_unit_mass() {
        let g = grid();
        let b = gaussian_bump(&g, 0.3).unwrap();
        assert!((lp_norm(&b, Lp::One) - 1.0).abs() < 1e-13);
        let (u, d) = small_data(
            1e-3,
            Profile::Bump { a: 0.3 },
            &g,
            EtaVector::last_axis(3),
            0.6,
        )
        .unwrap();
        assert!(velocity_size(&u.u0, 0.6).unwrap() <= 1e-3);
        assert!(director_size(&d.d0, 0.6).unwrap() <= 1e-3);
    }
}
