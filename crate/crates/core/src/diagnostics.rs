//! Decay diagnostics on computed trajectories.

use crate::error::{Error, Result};
use crate::semigroup::{derivative_norm, log_log_fit};
use crate::spectral::{gradient, lp_norm, Lp, SpectralField};
use crate::trajectory::{xst_norm, FieldSeries, Trajectory};

/// Time-weighted norm pieces of a trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedNormReport {
    pub s: f64,
    pub k: usize,
    /// Early-time weight exponent `max(0, (N − 2(s − k))/4)`.
    pub alpha: f64,
    /// `sup_{t ≤ 2} t^α ‖w‖_{W^{k,∞}}`.
    pub early_sup: f64,
    /// `sup_{t ≥ 1} t^{N/2 + j/2} ‖∇^j w‖_{L^∞}` for `j = 0..=k+1`.
    pub late_sups: Vec<f64>,
    /// `‖w‖_{X^s_T}`.
    pub base_norm: f64,
}

impl WeightedNormReport {
    pub fn total(&self) -> f64 {
        self.base_norm + self.early_sup + self.late_sups.iter().sum::<f64>()
    }
}

/// `max(0, (N − 2(s − k))/4)`.
pub fn weight_exponent(dim: usize, s: f64, k: usize) -> f64 {
    ((dim as f64 - 2.0 * (s - k as f64)) / 4.0).max(0.0)
}

/// `Σ_{j ≤ k} ‖∇^j w‖_{L^∞}`.
pub fn w_k_inf(f: &SpectralField, k: usize) -> f64 {
    (0..=k).map(|j| derivative_norm(f, j, Lp::Inf)).sum()
}

pub fn weighted_norm(series: &FieldSeries, s: f64, k: usize) -> Result<WeightedNormReport> {
    let Some(first) = series.fields.first() else {
        return Err(Error::InvalidArgument("empty trajectory".into()));
    };
    let dim = first.grid().dim();
    let floor = dim as f64 / 2.0 - 1.0;
    if s - k as f64 <= floor {
        return Err(Error::Hypothesis(format!(
            "weighted norms need s - k > N/2 - 1, got s = {s}, k = {k}, N = {dim}"
        )));
    }
    let alpha = weight_exponent(dim, s, k);
    let mut early_sup: f64 = 0.0;
    let mut late_sups = vec![0.0f64; k + 2];
    for (n, f) in series.fields.iter().enumerate() {
        let t = series.time(n);
        if t <= 2.0 {
            let weight = if alpha == 0.0 { 1.0 } else { t.powf(alpha) };
            if weight > 0.0 {
                early_sup = early_sup.max(weight * w_k_inf(f, k));
            }
        }
        if t >= 1.0 {
            for (j, sup) in late_sups.iter_mut().enumerate() {
                let weight = t.powf(dim as f64 / 2.0 + j as f64 / 2.0);
                *sup = sup.max(weight * derivative_norm(f, j, Lp::Inf));
            }
        }
    }
    Ok(WeightedNormReport {
        s,
        k,
        alpha,
        early_sup,
        late_sups,
        base_norm: xst_norm(series, s)?,
    })
}

/// One fitted decay rate of `‖∇^j field‖_{L^∞}`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExponentFit {
    pub field: &'static str,
    pub j: usize,
    pub slope: f64,
    pub intercept: f64,
    pub residual: f64,
    /// Whole-space rate `−N/2 − j/2`.
    pub target: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecayExponents {
    pub window: (f64, f64),
    pub points: usize,
    pub fits: Vec<ExponentFit>,
}

impl DecayExponents {
    pub fn get(&self, field: &str, j: usize) -> Option<&ExponentFit> {
        self.fits.iter().find(|f| f.field == field && f.j == j)
    }

    pub const CSV_HEADER: &'static str =
        "field,j,slope,intercept,residual,target,window_lo,window_hi";

    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", Self::CSV_HEADER);
        for f in &self.fits {
            out.push_str(&format!(
                "{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                f.field,
                f.j,
                f.slope,
                f.intercept,
                f.residual,
                f.target,
                self.window.0,
                self.window.1
            ));
        }
        out
    }
}

/// Window clipped to `[1, horizon]` and to the last sampled time.
fn clip_window(window: (f64, f64), horizon: f64, last: f64) -> Result<(f64, f64)> {
    let (mut lo, mut hi) = window;
    if lo < 1.0 {
        log::warn!("decay window start {lo} raised to 1");
        lo = 1.0;
    }
    if hi > horizon {
        log::warn!("decay window end {hi} clipped to validity horizon {horizon}");
        hi = horizon;
    }
    hi = hi.min(last);
    if !(hi > lo) {
        return Err(Error::InvalidArgument(format!(
            "empty decay window [{lo}, {hi}]"
        )));
    }
    Ok((lo, hi))
}

const SAMPLED: [(&str, usize); 4] = [("u", 0), ("u", 1), ("d", 0), ("d", 1)];

/// Running record of `‖∇^j u‖_{L^∞}` and `‖∇^j d‖_{L^∞}`, `j ∈ {0, 1}`,
/// for runs too large to keep every state.
#[derive(Clone, Debug, Default)]
pub struct DecaySampler {
    times: Vec<f64>,
    norms: [Vec<f64>; 4],
}

impl DecaySampler {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, t: f64, u: &SpectralField, d: &SpectralField) {
        self.times.push(t);
        for (slot, (name, j)) in self.norms.iter_mut().zip(SAMPLED) {
            let f = if name == "u" { u } else { d };
            slot.push(derivative_norm(f, j, Lp::Inf));
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Log-log fits inside `window`, clipped to `[1, min(horizon, last time)]`.
    pub fn fit(&self, dim: usize, horizon: f64, window: (f64, f64)) -> Result<DecayExponents> {
        let Some(&last) = self.times.last() else {
            return Err(Error::InvalidArgument("no samples".into()));
        };
        let (lo, hi) = clip_window(window, horizon, last)?;
        let idx: Vec<usize> = (0..self.len())
            .filter(|&n| self.times[n] >= lo && self.times[n] <= hi)
            .collect();
        let mut fits = Vec::new();
        for (norms, (field, j)) in self.norms.iter().zip(SAMPLED) {
            let pts: Vec<(f64, f64)> = idx
                .iter()
                .map(|&n| (self.times[n].ln(), norms[n].ln()))
                .collect();
            let (slope, intercept, residual) = log_log_fit(&pts)?;
            fits.push(ExponentFit {
                field,
                j,
                slope,
                intercept,
                residual,
                target: -(dim as f64) / 2.0 - j as f64 / 2.0,
            });
        }
        Ok(DecayExponents {
            window: (lo, hi),
            points: idx.len(),
            fits,
        })
    }
}

/// Log-log slopes of `‖∇^j u‖_{L^∞}` and `‖∇^j d‖_{L^∞}`, `j ∈ {0, 1}`.
pub fn decay_exponents(traj: &Trajectory, window: (f64, f64)) -> Result<DecayExponents> {
    if traj.is_empty() {
        return Err(Error::InvalidArgument("empty trajectory".into()));
    }
    let grid = traj.velocity().fields[0].grid();
    let mut sampler = DecaySampler::new();
    for n in 0..traj.len() {
        let t = traj.time(n);
        if t >= window.0.max(1.0) && t <= window.1 {
            sampler.record(t, &traj.velocity().fields[n], &traj.director().fields[n]);
        }
    }
    if sampler.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no snapshots inside [{}, {}]",
            window.0, window.1
        )));
    }
    sampler.fit(grid.dim(), grid.validity_horizon(), window)
}

/// `½‖u‖²_{L²} + ½‖∇d‖²_{L²}`.
pub fn energy(u: &SpectralField, d: &SpectralField) -> f64 {
    0.5 * lp_norm(u, Lp::Two).powi(2) + 0.5 * lp_norm(&gradient(d), Lp::Two).powi(2)
}

pub fn energy_series(traj: &Trajectory) -> Vec<f64> {
    traj.velocity()
        .fields
        .iter()
        .zip(&traj.director().fields)
        .map(|(u, d)| energy(u, d))
        .collect()
}
