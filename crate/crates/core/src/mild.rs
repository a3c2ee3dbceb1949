//! Mild solutions: Duhamel quadrature, the Picard map and its iteration.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::initial_data::{DirectorData, EtaVector, FlowData};
use crate::nonlinearity::assemble_rhs;
use crate::spectral::{heat_multiplier, leray_project, SpectralField};
use crate::trajectory::{trapezoid_weights, y_norm, FieldSeries, Trajectory};

/// Ratio history length that signals a non-contracting map.
const DIVERGENCE_STREAK: usize = 3;

/// Linear part of the evolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Generator {
    Heat,
    Stokes,
}

/// Horizon, time grid and stopping rule of the Picard iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct PicardConfig {
    pub horizon: f64,
    /// Number of time intervals; the grid has `n_time + 1` nodes.
    pub n_time: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub s: f64,
}

impl PicardConfig {
    /// Config with `tol = 1e-9·(1 + data_norm)` and 50 iterations.
    pub fn new(horizon: f64, n_time: usize, s: f64, data_norm: f64) -> Self {
        Self {
            horizon,
            n_time,
            max_iter: 50,
            tol: default_tol(data_norm),
            s,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        if self.n_time < 8 {
            return Err(Error::InvalidArgument(format!(
                "need at least 8 time intervals, got {}",
                self.n_time
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "tolerance must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_time as f64
    }
}

pub fn default_tol(data_norm: f64) -> f64 {
    1e-9 * (1.0 + data_norm)
}

/// History of a Picard run. `diff_norms[n] = ‖S_{n+1} − S_n‖_Y` and
/// `ratios[n] = diff_norms[n] / diff_norms[n−1]` where the denominator is
/// above roundoff.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ContractionReport {
    pub iterate_norms: Vec<f64>,
    pub diff_norms: Vec<f64>,
    pub ratios: Vec<Option<f64>>,
    pub converged: bool,
}

impl ContractionReport {
    pub fn last_ratio(&self) -> Option<f64> {
        self.ratios.last().copied().flatten()
    }

    pub fn final_diff(&self) -> Option<f64> {
        self.diff_norms.last().copied()
    }

    /// Largest defined ratio.
    pub fn max_ratio(&self) -> Option<f64> {
        self.ratios.iter().flatten().copied().reduce(f64::max)
    }

    /// CSV with columns `iter,y_norm,diff_norm,ratio`; row `n` describes `S_n`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,y_norm,diff_norm,ratio\n");
        for (n, diff) in self.diff_norms.iter().enumerate() {
            let ratio = self.ratios[n].map_or(String::new(), |r| format!("{r:.16e}"));
            out.push_str(&format!(
                "{},{:.16e},{:.16e},{}\n",
                n + 1,
                self.iterate_norms[n + 1],
                diff,
                ratio
            ));
        }
        out
    }
}

fn prepare(f: &SpectralField, generator: Generator) -> Result<SpectralField> {
    match generator {
        Generator::Heat => Ok(f.clone()),
        Generator::Stokes => leray_project(f),
    }
}

/// `e^{A t_n} w₀ + Σ_m ω_m e^{A(t_n − t_m)} f_m`, trapezoidal weights `ω` on `[0, t_n]`.
pub fn duhamel_apply(
    w0: &SpectralField,
    rhs: &FieldSeries,
    t_index: usize,
    generator: Generator,
) -> Result<SpectralField> {
    if t_index >= rhs.len() {
        return Err(Error::InvalidArgument(format!(
            "time index {t_index} outside a series of {} nodes",
            rhs.len()
        )));
    }
    let t = rhs.dt * t_index as f64;
    let mut out = heat_multiplier(&prepare(w0, generator)?, t)?;
    let weights = trapezoid_weights(t_index + 1, rhs.dt);
    for (m, w) in weights.iter().enumerate() {
        if *w == 0.0 {
            continue;
        }
        let term = heat_multiplier(&prepare(&rhs.fields[m], generator)?, t - rhs.dt * m as f64)?;
        out.axpy(*w, &term)?;
    }
    Ok(out)
}

/// [`duhamel_apply`] at every node in one sweep:
/// `R_0 = w₀ + δ/2·f_0`, `R_n = e^{Aδ} R_{n−1} + δ f_n`, value `R_n − δ/2·f_n`.
pub fn duhamel_series(
    w0: &SpectralField,
    rhs: &FieldSeries,
    generator: Generator,
) -> Result<FieldSeries> {
    let Some(first) = rhs.fields.first() else {
        return Err(Error::InvalidArgument("empty forcing series".into()));
    };
    w0.check_same_shape(first)?;
    let dt = rhs.dt;
    let grid = w0.grid().clone();
    let factor: Vec<f64> = grid.k_sq().iter().map(|k2| (-k2 * dt).exp()).collect();
    let n = grid.npoints();
    let forcing: Vec<SpectralField> = rhs
        .fields
        .par_iter()
        .map(|f| prepare(f, generator))
        .collect::<Result<_>>()?;

    let mut acc = prepare(w0, generator)?;
    acc.axpy(0.5 * dt, &forcing[0])?;
    let mut out = Vec::with_capacity(forcing.len());
    out.push(prepare(w0, generator)?);
    for f in &forcing[1..] {
        acc.coeffs_mut()
            .par_iter_mut()
            .zip(f.coeffs().par_iter())
            .enumerate()
            .for_each(|(i, (a, fv))| *a = *a * factor[i % n] + fv * dt);
        let mut value = acc.clone();
        value.axpy(-0.5 * dt, f)?;
        out.push(value);
    }
    FieldSeries::new(rhs.t0, dt, out)
}

/// `Φ(w, θ)`: Duhamel flows of the data forced by the nonlinearities frozen along `state`.
pub fn picard_map(
    state: &Trajectory,
    u0: &FlowData,
    d0: &DirectorData,
    eta: &EtaVector,
) -> Result<Trajectory> {
    if state.is_empty() {
        return Err(Error::InvalidArgument("empty trajectory".into()));
    }
    let w = state.velocity();
    let theta = state.director();
    w.fields[0].check_grid(&u0.u0)?;
    theta.fields[0].check_grid(&d0.d0)?;
    let (f_u, f_d): (Vec<_>, Vec<_>) = w
        .fields
        .par_iter()
        .zip(theta.fields.par_iter())
        .map(|(wn, tn)| assemble_rhs(wn, tn, eta).map(|r| (r.f_u, r.f_d)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .unzip();
    let f_u = FieldSeries::new(w.t0, w.dt, f_u)?;
    let f_d = FieldSeries::new(w.t0, w.dt, f_d)?;
    let u = duhamel_series(&u0.u0, &f_u, Generator::Stokes)?;
    let d = duhamel_series(&d0.d0, &f_d, Generator::Heat)?;
    Trajectory::from_series(u, d, state.s())
}

fn zero_trajectory(u0: &FlowData, cfg: &PicardConfig) -> Result<Trajectory> {
    let zero = SpectralField::zeros(u0.u0.grid(), u0.u0.ncomp());
    let fields = vec![zero; cfg.n_time + 1];
    Trajectory::from_series(
        FieldSeries::new(0.0, cfg.dt(), fields.clone())?,
        FieldSeries::new(0.0, cfg.dt(), fields)?,
        cfg.s,
    )
}

/// `‖a − b‖_Y` of two trajectories on the same time grid.
pub fn y_distance(a: &Trajectory, b: &Trajectory) -> Result<f64> {
    y_norm(
        &a.velocity().sub(b.velocity())?,
        &a.director().sub(b.director())?,
        a.s(),
    )
}

/// Iterates [`picard_map`] from the semigroup flow of the data.
pub fn picard_solve(
    u0: &FlowData,
    d0: &DirectorData,
    eta: &EtaVector,
    cfg: &PicardConfig,
) -> Result<(Trajectory, ContractionReport)> {
    cfg.validate()?;
    let mut report = ContractionReport::default();
    let mut current = picard_map(&zero_trajectory(u0, cfg)?, u0, d0, eta)?;
    report.iterate_norms.push(current.y_norm()?);
    let mut streak = 0;

    for _ in 0..cfg.max_iter {
        let next = picard_map(&current, u0, d0, eta)?;
        let diff = y_distance(&next, &current)?;
        let scale = report.iterate_norms.last().copied().unwrap_or(0.0).max(1.0);
        let ratio = report
            .diff_norms
            .last()
            .filter(|prev| **prev > 10.0 * f64::EPSILON * scale)
            .map(|prev| diff / prev);
        report.iterate_norms.push(next.y_norm()?);
        report.diff_norms.push(diff);
        report.ratios.push(ratio);
        current = next;

        if diff.is_nan() || ratio.is_some_and(|r| r >= 1.0) {
            streak += 1;
        } else {
            streak = 0;
        }
        if streak >= DIVERGENCE_STREAK {
            log::warn!(
                "Picard iteration stopped after {} non-contracting steps",
                streak
            );
            return Err(Error::NonContraction {
                report: Box::new(report),
            });
        }
        if diff <= cfg.tol {
            report.converged = ratio.is_none_or(|r| r < 1.0);
            break;
        }
    }
    Ok((current, report))
}

/// `‖Φ(u, d) − (u, d)‖_Y`.
pub fn fixed_point_residual(
    traj: &Trajectory,
    u0: &FlowData,
    d0: &DirectorData,
    eta: &EtaVector,
) -> Result<f64> {
    y_distance(&picard_map(traj, u0, d0, eta)?, traj)
}
