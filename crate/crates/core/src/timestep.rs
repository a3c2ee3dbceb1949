//! First-order time stepping of the projected system.

use crate::error::{Error, Result};
use crate::initial_data::{DirectorData, EtaVector, FlowData};
use crate::nonlinearity::{forcing_terms, pressure_from_forcing, RhsOptions};
use crate::spectral::{leray_project, SpectralField};
use crate::trajectory::{SimState, Trajectory};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    /// Backward Euler for `Δ`, forward Euler for the nonlinearity.
    ImexEuler,
    /// Exact heat factor `e^{−|k|²dt}` applied to a forward Euler update.
    IntegratingFactorEuler,
}

impl Scheme {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "imex_euler" | "imex" => Some(Self::ImexEuler),
            "integrating_factor_euler" | "if_euler" => Some(Self::IntegratingFactorEuler),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::ImexEuler => "imex_euler",
            Self::IntegratingFactorEuler => "integrating_factor_euler",
        }
    }

    /// Per-step amplification of a mode with `|k|² = k_sq`.
    pub fn linear_factor(self, k_sq: f64, dt: f64) -> f64 {
        match self {
            Self::ImexEuler => 1.0 / (1.0 + dt * k_sq),
            Self::IntegratingFactorEuler => (-k_sq * dt).exp(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepConfig {
    pub dt: f64,
    pub t_end: f64,
    pub snapshot_every: usize,
    pub scheme: Scheme,
    pub dealias: bool,
    /// Drop the nonlinearity, leaving the pure linear flow.
    pub linear_only: bool,
}

impl StepConfig {
    pub fn new(dt: f64, t_end: f64, scheme: Scheme) -> Self {
        Self {
            dt,
            t_end,
            snapshot_every: 1,
            scheme,
            dealias: true,
            linear_only: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.t_end >= self.dt) {
            return Err(Error::InvalidArgument(format!(
                "t_end = {} is shorter than dt = {}",
                self.t_end, self.dt
            )));
        }
        if self.snapshot_every == 0 {
            return Err(Error::InvalidArgument(
                "snapshot_every must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Number of steps, `t_end/dt` rounded to the nearest integer.
    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    fn rhs_options(&self) -> RhsOptions {
        RhsOptions {
            dealias: self.dealias,
        }
    }
}

struct Forcing {
    /// Unprojected momentum forcing `g`.
    g: SpectralField,
    f_d: SpectralField,
}

fn forcing(state: &SimState, eta: &EtaVector, cfg: &StepConfig) -> Result<Forcing> {
    if cfg.linear_only {
        return Ok(Forcing {
            g: SpectralField::zeros(state.u.grid(), state.u.ncomp()),
            f_d: SpectralField::zeros(state.d.grid(), state.d.ncomp()),
        });
    }
    let (g, f_d) = forcing_terms(&state.u, &state.d, eta, cfg.rhs_options())?;
    Ok(Forcing { g, f_d })
}

fn advance(state: &SimState, f: &Forcing, cfg: &StepConfig, t_new: f64) -> Result<SimState> {
    let grid = state.u.grid();
    let factors: Vec<f64> = grid
        .k_sq()
        .iter()
        .map(|&k2| cfg.scheme.linear_factor(k2, cfg.dt))
        .collect();
    let n = grid.npoints();
    let update = |x: &SpectralField, force: &SpectralField, sign: f64| {
        let mut y = x.clone();
        y.coeffs_mut()
            .iter_mut()
            .zip(force.coeffs())
            .enumerate()
            .for_each(|(i, (v, fv))| *v = (*v + fv * (sign * cfg.dt)) * factors[i % n]);
        y
    };
    let u = leray_project(&update(&state.u, &f.g, -1.0))?;
    let d = update(&state.d, &f.f_d, 1.0);
    if !(u.is_finite() && d.is_finite()) {
        return Err(Error::Blowup {
            time: t_new,
            partial: Box::new(Trajectory::empty(0.0)),
        });
    }
    SimState::new(u, d, t_new)
}

/// One step from `state`; the nonlinearity is evaluated at the old state.
pub fn step(state: &SimState, eta: &EtaVector, cfg: &StepConfig) -> Result<SimState> {
    let f = forcing(state, eta, cfg)?;
    advance(state, &f, cfg, state.t + cfg.dt)
}

/// Runs to `t_end`, keeping every `snapshot_every`-th state with its pressure.
pub fn integrate(
    u0: &FlowData,
    d0: &DirectorData,
    eta: &EtaVector,
    cfg: &StepConfig,
    s: f64,
) -> Result<Trajectory> {
    integrate_observed(u0, d0, eta, cfg, s, |_| Ok(()))
}

/// [`integrate`] with a callback invoked on every state, including the initial one.
pub fn integrate_observed(
    u0: &FlowData,
    d0: &DirectorData,
    eta: &EtaVector,
    cfg: &StepConfig,
    s: f64,
    mut observe: impl FnMut(&SimState) -> Result<()>,
) -> Result<Trajectory> {
    cfg.validate()?;
    u0.u0.check_grid(&d0.d0)?;
    eta.check_grid(u0.u0.grid())?;
    let n_steps = cfg.n_steps();
    let mut traj = Trajectory::empty(s);
    let mut state = SimState::new(u0.u0.clone(), d0.d0.clone(), 0.0)?;

    for n in 0..=n_steps {
        observe(&state)?;
        let snapshot = n % cfg.snapshot_every == 0;
        if n == n_steps && !snapshot {
            break;
        }
        let f = forcing(&state, eta, cfg)?;
        if snapshot {
            let idx = traj.len();
            traj.push(state.clone())?;
            traj.set_pressure(idx, pressure_from_forcing(&f.g));
        }
        if n == n_steps {
            break;
        }
        state = match advance(&state, &f, cfg, (n + 1) as f64 * cfg.dt) {
            Ok(next) => next,
            Err(Error::Blowup { time, .. }) => {
                log::warn!("non-finite state at t = {time}");
                return Err(Error::Blowup {
                    time,
                    partial: Box::new(traj),
                });
            }
            Err(e) => return Err(e),
        };
    }
    Ok(traj)
}
