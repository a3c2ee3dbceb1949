use std::fmt;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Periodic box `[0, L)^N` sampled with `M` points per axis.
///
/// Cloning is cheap: FFT plans and wavenumber tables are shared.
#[derive(Clone)]
pub struct Grid {
    inner: Arc<GridInner>,
}

struct GridInner {
    dim: usize,
    res: usize,
    box_len: f64,
    /// Wavenumber per 1-D index, `2π·wrap(i)/L`.
    axis_k: Vec<f64>,
    /// `|k|²` per flat mode index.
    k_sq: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Grid {
    pub fn new(dim: usize, res: usize, box_len: f64) -> Result<Self> {
        if !(dim == 2 || dim == 3) {
            return Err(Error::InvalidArgument(format!(
                "dimension must be 2 or 3, got {dim}"
            )));
        }
        if res < 8 || !res.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "resolution must be even and >= 8, got {res}"
            )));
        }
        if !(box_len.is_finite() && box_len > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "box length must be positive, got {box_len}"
            )));
        }
        if dim == 2 {
            log::warn!("dim = 2 is a smoke-test mode outside the N >= 3 regime of the theory");
        }
        let scale = 2.0 * std::f64::consts::PI / box_len;
        let axis_k: Vec<f64> = (0..res).map(|i| scale * wrap(i, res) as f64).collect();
        let npoints = res.pow(dim as u32);
        let mut k_sq = vec![0.0; npoints];
        for (flat, ks) in k_sq.iter_mut().enumerate() {
            let mut rem = flat;
            let mut acc = 0.0;
            for _ in 0..dim {
                let k = axis_k[rem % res];
                acc += k * k;
                rem /= res;
            }
            *ks = acc;
        }
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(res);
        let inverse = planner.plan_fft_inverse(res);
        Ok(Self {
            inner: Arc::new(GridInner {
                dim,
                res,
                box_len,
                axis_k,
                k_sq,
                forward,
                inverse,
            }),
        })
    }

    pub fn dim(&self) -> usize {
        self.inner.dim
    }

    pub fn res(&self) -> usize {
        self.inner.res
    }

    pub fn box_len(&self) -> f64 {
        self.inner.box_len
    }

    /// Number of grid points (equivalently, Fourier modes), `M^N`.
    pub fn npoints(&self) -> usize {
        self.inner.k_sq.len()
    }

    /// `L^N`.
    pub fn volume(&self) -> f64 {
        self.inner.box_len.powi(self.inner.dim as i32)
    }

    /// Quadrature weight of one grid cell, `(L/M)^N`.
    pub fn cell_volume(&self) -> f64 {
        (self.inner.box_len / self.inner.res as f64).powi(self.inner.dim as i32)
    }

    pub fn spacing(&self) -> f64 {
        self.inner.box_len / self.inner.res as f64
    }

    /// True when the grid lies inside the theory's hypotheses (N >= 3).
    pub fn is_theory_regime(&self) -> bool {
        self.inner.dim >= 3
    }

    /// Upper end of the time window in which torus heat flow mimics the whole space.
    pub fn validity_horizon(&self) -> f64 {
        self.inner.box_len * self.inner.box_len / 16.0
    }

    pub fn axis_wavenumbers(&self) -> &[f64] {
        &self.inner.axis_k
    }

    pub fn k_sq(&self) -> &[f64] {
        &self.inner.k_sq
    }

    /// Per-axis array indices of a flat mode index; axis 0 is the slowest.
    pub fn indices(&self, flat: usize) -> [usize; 3] {
        let res = self.inner.res;
        let dim = self.inner.dim;
        let mut out = [0usize; 3];
        let mut rem = flat;
        for axis in (0..dim).rev() {
            out[axis] = rem % res;
            rem /= res;
        }
        out
    }

    pub fn flat(&self, idx: &[usize]) -> usize {
        idx.iter()
            .take(self.inner.dim)
            .fold(0, |acc, &i| acc * self.inner.res + i)
    }

    /// Signed integer mode numbers of a flat index.
    pub fn modes(&self, flat: usize) -> [i64; 3] {
        let idx = self.indices(flat);
        let mut out = [0i64; 3];
        for a in 0..self.inner.dim {
            out[a] = wrap(idx[a], self.inner.res);
        }
        out
    }

    /// Wavevector of a flat mode index (unused axes are zero).
    pub fn k_vec(&self, flat: usize) -> [f64; 3] {
        let idx = self.indices(flat);
        let mut out = [0.0; 3];
        for a in 0..self.inner.dim {
            out[a] = self.inner.axis_k[idx[a]];
        }
        out
    }

    /// Wavevector seen by the spectral derivative: Nyquist components are zero.
    pub fn derivative_k_vec(&self, flat: usize) -> [f64; 3] {
        let idx = self.indices(flat);
        let nyq = self.inner.res / 2;
        let mut out = [0.0; 3];
        for a in 0..self.inner.dim {
            if idx[a] != nyq {
                out[a] = self.inner.axis_k[idx[a]];
            }
        }
        out
    }

    /// Flat index of the mode `-k`.
    pub fn negate(&self, flat: usize) -> usize {
        let res = self.inner.res;
        let idx = self.indices(flat);
        let mut neg = [0usize; 3];
        for a in 0..self.inner.dim {
            neg[a] = (res - idx[a]) % res;
        }
        self.flat(&neg)
    }

    /// Physical coordinate of a flat grid-point index.
    pub fn point(&self, flat: usize) -> [f64; 3] {
        let idx = self.indices(flat);
        let h = self.spacing();
        let mut out = [0.0; 3];
        for a in 0..self.inner.dim {
            out[a] = idx[a] as f64 * h;
        }
        out
    }

    /// Short content digest of the grid descriptor.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.inner.dim as u64).to_le_bytes());
        hasher.update((self.inner.res as u64).to_le_bytes());
        hasher.update(self.inner.box_len.to_bits().to_le_bytes());
        let out = hasher.finalize();
        out[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub(crate) fn forward_plan(&self) -> &Arc<dyn Fft<f64>> {
        &self.inner.forward
    }

    pub(crate) fn inverse_plan(&self) -> &Arc<dyn Fft<f64>> {
        &self.inner.inverse
    }

    pub fn same_as(&self, other: &Grid) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner) || self == other
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.inner.dim == other.inner.dim
            && self.inner.res == other.inner.res
            && self.inner.box_len.to_bits() == other.inner.box_len.to_bits()
    }
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("dim", &self.inner.dim)
            .field("res", &self.inner.res)
            .field("box_len", &self.inner.box_len)
            .finish()
    }
}

/// Maps an FFT index to the symmetric range `-M/2..M/2`.
pub fn wrap(i: usize, res: usize) -> i64 {
    if i >= res / 2 {
        i as i64 - res as i64
    } else {
        i as i64
    }
}
