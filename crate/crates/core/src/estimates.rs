//! Numerical instances of the product, bilinear, trilinear and smoothing inequalities.
//!
//! Checks whose proof chain has constant one report `margin = rhs − lhs` and
//! must stay nonnegative up to roundoff. The others report an empirical
//! constant `lhs/rhs` whose stability under grid refinement is what matters.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::initial_data::{random_low_mode_field, sphere_defect, EtaVector};
use crate::mild::Generator;
use crate::spectral::{
    gradient, heat_multiplier, homogeneous_sobolev_norm, leray_project, sobolev_norm, wrap, Grid,
    RealField, SpectralField,
};
use crate::trajectory::{trapezoid_weights, xst_norm, FieldSeries, Trajectory};

/// Relative slack granted to constant-one chains.
pub const ROUNDOFF_SLACK: f64 = 1e-8;
/// Bound on the smoothing ratio `lhs / ‖w₀‖_{H^s}`.
pub const SMOOTHING_FACTOR: f64 = 2.0;

#[derive(Clone, Debug, PartialEq)]
pub struct InequalityRecord {
    pub name: String,
    pub seed: Option<u64>,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs − lhs`.
    pub margin: f64,
    pub inputs_digest: String,
    pub grid_digest: String,
}

impl InequalityRecord {
    fn new(name: &str, lhs: f64, rhs: f64, inputs_digest: String, grid: &Grid) -> Self {
        Self {
            name: name.to_string(),
            seed: None,
            lhs,
            rhs,
            margin: rhs - lhs,
            inputs_digest,
            grid_digest: grid.digest(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    /// `lhs / rhs`, or zero when both vanish.
    pub fn ratio(&self) -> f64 {
        if self.rhs == 0.0 {
            if self.lhs == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            self.lhs / self.rhs
        }
    }

    /// `margin ≥ −slack·rhs`.
    pub fn passes(&self, slack: f64) -> bool {
        self.margin >= -slack * self.rhs
    }

    pub const CSV_HEADER: &'static str = "name,seed,lhs,rhs,margin,grid_digest";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:.16e},{:.16e},{:.16e},{}",
            self.name,
            self.seed.map_or(String::new(), |s| s.to_string()),
            self.lhs,
            self.rhs,
            self.margin,
            self.grid_digest
        )
    }
}

/// Short content digest of a set of fields.
pub fn digest_fields<'a>(fields: impl IntoIterator<Item = &'a SpectralField>) -> String {
    let mut h = Sha256::new();
    for f in fields {
        h.update(f.grid().digest().as_bytes());
        for c in f.coeffs() {
            h.update(c.re.to_le_bytes());
            h.update(c.im.to_le_bytes());
        }
    }
    h.finalize()[..8]
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn check_series(series: &[&FieldSeries]) -> Result<()> {
    let first = series[0];
    if first.is_empty() {
        return Err(Error::InvalidArgument("empty trajectory".into()));
    }
    for s in &series[1..] {
        if s.len() != first.len() || (s.dt - first.dt).abs() > 1e-12 * first.dt.abs() {
            return Err(Error::Shape("trajectories use different time grids".into()));
        }
        s.fields[0].check_grid(&first.fields[0])?;
    }
    Ok(())
}

/// `h^N Σ_x Π_i |f_i(x)|` over grid samples.
fn product_quadrature(factors: &[RealField]) -> f64 {
    let grid = factors[0].grid();
    let n = grid.npoints();
    let values: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|p| factors.iter().map(|f| f.magnitude_at(p)).product::<f64>())
        .collect();
    grid.cell_volume() * values.iter().sum::<f64>()
}

/// `∫₀^T ∫ |z| |∇w|` against `√T ‖z‖_{X^s_T} ‖w‖_{X^s_T}`.
pub fn check_bilinear_l1l1(z: &FieldSeries, w: &FieldSeries, s: f64) -> Result<InequalityRecord> {
    check_series(&[z, w])?;
    let weights = trapezoid_weights(z.len(), z.dt);
    let lhs: f64 = z
        .fields
        .iter()
        .zip(&w.fields)
        .zip(&weights)
        .map(|((zn, wn), om)| {
            if *om == 0.0 {
                0.0
            } else {
                om * product_quadrature(&[zn.to_real(), gradient(wn).to_real()])
            }
        })
        .sum();
    let rhs = z.horizon().sqrt() * xst_norm(z, s)? * xst_norm(w, s)?;
    let digest = digest_fields(z.fields.iter().chain(&w.fields));
    Ok(InequalityRecord::new(
        "bilinear_l1",
        lhs,
        rhs,
        digest,
        z.fields[0].grid(),
    ))
}

/// Largest `|m_i|` carrying a coefficient above roundoff.
fn bandwidth(f: &SpectralField) -> i64 {
    let floor = 1e-14 * f.max_abs_coeff();
    let grid = f.grid();
    let n = grid.npoints();
    let res = grid.res();
    let dim = grid.dim();
    let mut band = 0;
    for (i, v) in f.coeffs().iter().enumerate() {
        if v.norm() > floor {
            let idx = grid.indices(i % n);
            for a in idx.iter().take(dim) {
                band = band.max(wrap(*a, res).abs());
            }
        }
    }
    band
}

/// Copies the spectrum onto a finer grid of the same box.
fn zero_pad(f: &SpectralField, fine: &Grid) -> SpectralField {
    let grid = f.grid();
    let n = grid.npoints();
    let dim = grid.dim();
    let mut out = SpectralField::zeros(fine, f.ncomp());
    for c in 0..f.ncomp() {
        for (i, v) in f.component(c).iter().enumerate() {
            if v.norm_sqr() == 0.0 {
                continue;
            }
            let modes = grid.modes(i % n);
            let mut idx = [0usize; 3];
            for a in 0..dim {
                idx[a] = modes[a].rem_euclid(fine.res() as i64) as usize;
            }
            out.component_mut(c)[fine.flat(&idx)] = *v;
        }
    }
    out
}

/// Pointwise product `z·w` computed without aliasing; scalar factors broadcast.
pub fn exact_product(z: &SpectralField, w: &SpectralField) -> Result<SpectralField> {
    z.check_grid(w)?;
    let ncomp = z.ncomp().max(w.ncomp());
    if !(z.ncomp() == w.ncomp() || z.ncomp() == 1 || w.ncomp() == 1) {
        return Err(Error::Shape(format!(
            "cannot multiply {} by {} components",
            z.ncomp(),
            w.ncomp()
        )));
    }
    let grid = z.grid();
    let band = bandwidth(z) + bandwidth(w);
    let target = if 2 * band < grid.res() as i64 {
        grid.clone()
    } else {
        let mut res = grid.res();
        while 2 * band >= res as i64 {
            res *= 2;
        }
        Grid::new(grid.dim(), res, grid.box_len())?
    };
    let (zr, wr) = if target.same_as(grid) {
        (z.to_real(), w.to_real())
    } else {
        (
            zero_pad(z, &target).to_real(),
            zero_pad(w, &target).to_real(),
        )
    };
    let n = target.npoints();
    let mut out = RealField::zeros(&target, ncomp);
    for c in 0..ncomp {
        let zc = zr.component(if z.ncomp() == 1 { 0 } else { c });
        let wc = wr.component(if w.ncomp() == 1 { 0 } else { c });
        let dst = out.component_mut(c);
        for p in 0..n {
            dst[p] = zc[p] * wc[p];
        }
    }
    Ok(out.to_spectral())
}

/// Worst snapshot of `‖zw‖_{H^s}` against `‖z‖_{H^{s+1}}‖w‖_{H^s} + ‖w‖_{H^{s+1}}‖z‖_{H^s}`.
pub fn check_bilinear_product_hs(
    z: &FieldSeries,
    w: &FieldSeries,
    s: f64,
) -> Result<InequalityRecord> {
    check_series(&[z, w])?;
    let mut worst: Option<(f64, f64)> = None;
    for (zn, wn) in z.fields.iter().zip(&w.fields) {
        let lhs = sobolev_norm(&exact_product(zn, wn)?, s)?;
        let rhs = sobolev_norm(zn, s + 1.0)? * sobolev_norm(wn, s)?
            + sobolev_norm(wn, s + 1.0)? * sobolev_norm(zn, s)?;
        let ratio = if rhs > 0.0 { lhs / rhs } else { 0.0 };
        if worst.is_none_or(|(l, r)| ratio > if r > 0.0 { l / r } else { 0.0 }) {
            worst = Some((lhs, rhs));
        }
    }
    let (lhs, rhs) = worst.expect("nonempty series");
    let digest = digest_fields(z.fields.iter().chain(&w.fields));
    Ok(InequalityRecord::new(
        "product_hs",
        lhs,
        rhs,
        digest,
        z.fields[0].grid(),
    ))
}

fn embedding_cache() -> &'static Mutex<HashMap<(String, u64), f64>> {
    static CACHE: OnceLock<Mutex<HashMap<(String, u64), f64>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Sharp grid constant in `‖f‖_{L^∞} ≤ C ‖f‖_{H^{σ}}`, `σ = s + 1`, cached per grid.
///
/// The extremal field `ĥ_k = (1+|k|²)^{−σ}` peaks at the origin with
/// `h(0) = Σ_k (1+|k|²)^{−σ}` and `‖h‖_{H^σ}² = L^N Σ_k (1+|k|²)^{−σ}`; its
/// quotient is measured on the grid and equals `L^{−N/2} (Σ_k (1+|k|²)^{−σ})^{1/2}`.
pub fn embedding_constant(grid: &Grid, s: f64) -> f64 {
    let key = (grid.digest(), s.to_bits());
    if let Some(c) = embedding_cache().lock().expect("cache lock").get(&key) {
        return *c;
    }
    let sigma = s + 1.0;
    let coeffs = grid
        .k_sq()
        .iter()
        .map(|&k| Complex64::new((1.0 + k).powf(-sigma), 0.0))
        .collect();
    let h = SpectralField::from_coeffs(grid, 1, coeffs).expect("scalar field");
    let peak = h.to_real().values()[0];
    let c = peak / sobolev_norm(&h, sigma).expect("sigma > 0");
    embedding_cache().lock().expect("cache lock").insert(key, c);
    c
}

/// `∫₀^T ∫ |z||w||h|` against `T ‖z‖_{X^s_T} ‖w‖_{X^s_T} ‖h‖_{X^{s+1}_T} C_emb`.
pub fn check_trilinear(
    z: &FieldSeries,
    w: &FieldSeries,
    h: &FieldSeries,
    s: f64,
) -> Result<InequalityRecord> {
    let (lhs, base) = trilinear_parts(z, w, h, s)?;
    let grid = z.fields[0].grid();
    let rhs = base * embedding_constant(grid, s);
    let digest = digest_fields(z.fields.iter().chain(&w.fields).chain(&h.fields));
    Ok(InequalityRecord::new(
        "trilinear_l1",
        lhs,
        rhs,
        digest,
        grid,
    ))
}

/// Empirical constant `lhs / (T ‖z‖ ‖w‖ ‖h‖)` of the trilinear estimate.
pub fn trilinear_ratio(z: &FieldSeries, w: &FieldSeries, h: &FieldSeries, s: f64) -> Result<f64> {
    let (lhs, base) = trilinear_parts(z, w, h, s)?;
    Ok(if base > 0.0 { lhs / base } else { 0.0 })
}

fn trilinear_parts(
    z: &FieldSeries,
    w: &FieldSeries,
    h: &FieldSeries,
    s: f64,
) -> Result<(f64, f64)> {
    check_series(&[z, w, h])?;
    let weights = trapezoid_weights(z.len(), z.dt);
    let mut lhs = 0.0;
    for (n, om) in weights.iter().enumerate() {
        if *om == 0.0 {
            continue;
        }
        let parts = [&z.fields[n], &w.fields[n], &h.fields[n]].map(|f| f.to_real());
        lhs += om * product_quadrature(&parts);
    }
    let base = z.horizon() * xst_norm(z, s)? * xst_norm(w, s)? * xst_norm(h, s + 1.0)?;
    Ok((lhs, base))
}

/// `sup_t ‖e^{tA}w₀‖_{Ḣ^s} + (∫₀^T ‖e^{tA}w₀‖²_{Ḣ^{s+1}})^{1/2}` against `2‖w₀‖_{H^s}`.
///
/// The time integral is exact per mode: `|k|^{2s}(1 − e^{−2|k|²T})/2`.
pub fn check_smoothing(
    w0: &SpectralField,
    s: f64,
    horizon: f64,
    generator: Generator,
) -> Result<InequalityRecord> {
    if !(horizon >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "horizon must be >= 0, got {horizon}"
        )));
    }
    let w = match generator {
        Generator::Heat => w0.clone(),
        Generator::Stokes => leray_project(w0)?,
    };
    let grid = w.grid();
    let n = grid.npoints();
    let k_sq = grid.k_sq();
    let sup = homogeneous_sobolev_norm(&w, s);
    let integral: f64 = (0..w.ncomp())
        .map(|c| {
            w.component(c)
                .iter()
                .zip(k_sq.iter())
                .map(|(v, &k)| {
                    if k == 0.0 {
                        0.0
                    } else {
                        k.powf(s) * (1.0 - (-2.0 * k * horizon).exp()) / 2.0 * v.norm_sqr()
                    }
                })
                .sum::<f64>()
        })
        .sum::<f64>()
        * grid.volume();
    debug_assert_eq!(w.coeffs().len(), n * w.ncomp());
    let lhs = sup + integral.sqrt();
    let rhs = SMOOTHING_FACTOR * sobolev_norm(&w, s)?;
    Ok(InequalityRecord::new(
        "smoothing",
        lhs,
        rhs,
        digest_fields([w0]),
        grid,
    ))
}

/// `sup_x ||η + d(t_n, x)|² − 1|` at every snapshot.
pub fn constraint_residual(traj: &Trajectory, eta: &EtaVector) -> Vec<f64> {
    traj.director()
        .fields
        .iter()
        .map(|d| sphere_defect(d, eta))
        .collect()
}

/// Heat flow of a seeded low-mode field on `n_time + 1` nodes over `[0, horizon]`.
pub fn random_series(
    grid: &Grid,
    ncomp: usize,
    seed: u64,
    horizon: f64,
    n_time: usize,
) -> Result<FieldSeries> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = random_low_mode_field(grid, ncomp, &mut rng);
    let dt = horizon / n_time as f64;
    let fields = (0..=n_time)
        .map(|n| heat_multiplier(&f, n as f64 * dt))
        .collect::<Result<Vec<_>>>()?;
    FieldSeries::new(0.0, dt, fields)
}

/// Parameters shared by the seeded suites.
#[derive(Clone, Debug, PartialEq)]
pub struct SuiteConfig {
    pub s: f64,
    pub horizon: f64,
    pub n_time: usize,
    pub seeds: Vec<u64>,
}

impl SuiteConfig {
    pub fn new(s: f64, seeds: std::ops::Range<u64>) -> Self {
        Self {
            s,
            horizon: 1.0,
            n_time: 8,
            seeds: seeds.collect(),
        }
    }
}

/// Seed `k` of a suite draws its factors from seeds `3k`, `3k + 1`, `3k + 2`.
fn factor_seed(seed: u64, i: u64) -> u64 {
    3 * seed + i
}

pub fn bilinear_suite(grid: &Grid, cfg: &SuiteConfig) -> Result<Vec<InequalityRecord>> {
    let dim = grid.dim();
    cfg.seeds
        .par_iter()
        .map(|&seed| {
            let z = random_series(grid, dim, factor_seed(seed, 0), cfg.horizon, cfg.n_time)?;
            let w = random_series(grid, dim, factor_seed(seed, 1), cfg.horizon, cfg.n_time)?;
            Ok(check_bilinear_l1l1(&z, &w, cfg.s)?.with_seed(seed))
        })
        .collect()
}

pub fn product_suite(grid: &Grid, cfg: &SuiteConfig) -> Result<Vec<InequalityRecord>> {
    cfg.seeds
        .par_iter()
        .map(|&seed| {
            let z = random_series(grid, 1, factor_seed(seed, 0), cfg.horizon, cfg.n_time)?;
            let w = random_series(grid, 1, factor_seed(seed, 1), cfg.horizon, cfg.n_time)?;
            Ok(check_bilinear_product_hs(&z, &w, cfg.s)?.with_seed(seed))
        })
        .collect()
}

pub fn trilinear_suite(grid: &Grid, cfg: &SuiteConfig) -> Result<Vec<InequalityRecord>> {
    let dim = grid.dim();
    cfg.seeds
        .par_iter()
        .map(|&seed| {
            let z = random_series(grid, dim, factor_seed(seed, 0), cfg.horizon, cfg.n_time)?;
            let w = random_series(grid, dim, factor_seed(seed, 1), cfg.horizon, cfg.n_time)?;
            let h = random_series(grid, dim, factor_seed(seed, 2), cfg.horizon, cfg.n_time)?;
            Ok(check_trilinear(&z, &w, &h, cfg.s)?.with_seed(seed))
        })
        .collect()
}

/// Empirical trilinear constants, one per seed.
pub fn trilinear_ratios(grid: &Grid, cfg: &SuiteConfig) -> Result<Vec<f64>> {
    let dim = grid.dim();
    cfg.seeds
        .par_iter()
        .map(|&seed| {
            let z = random_series(grid, dim, factor_seed(seed, 0), cfg.horizon, cfg.n_time)?;
            let w = random_series(grid, dim, factor_seed(seed, 1), cfg.horizon, cfg.n_time)?;
            let h = random_series(grid, dim, factor_seed(seed, 2), cfg.horizon, cfg.n_time)?;
            trilinear_ratio(&z, &w, &h, cfg.s)
        })
        .collect()
}

pub fn smoothing_suite(
    grid: &Grid,
    cfg: &SuiteConfig,
    generator: Generator,
) -> Result<Vec<InequalityRecord>> {
    let dim = grid.dim();
    cfg.seeds
        .par_iter()
        .map(|&seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let w0 = random_low_mode_field(grid, dim, &mut rng);
            Ok(check_smoothing(&w0, cfg.s, cfg.horizon, generator)?.with_seed(seed))
        })
        .collect()
}

/// Largest `lhs/rhs` over a set of records.
pub fn max_ratio(records: &[InequalityRecord]) -> f64 {
    records.iter().map(|r| r.ratio()).fold(0.0, f64::max)
}
