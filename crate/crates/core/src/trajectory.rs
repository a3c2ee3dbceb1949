//! Time-sampled fields on a uniform grid and the space-time norms built on them.

use crate::error::{Error, Result};
use crate::spectral::{sobolev_norm, SpectralField};

/// Relative tolerance for treating sample times as uniform.
const UNIFORM_TOL: f64 = 1e-9;

/// One snapshot of the system: velocity, director deviation and time.
#[derive(Clone, Debug)]
pub struct SimState {
    pub u: SpectralField,
    pub d: SpectralField,
    pub t: f64,
}

impl SimState {
    pub fn new(u: SpectralField, d: SpectralField, t: f64) -> Result<Self> {
        u.require_vector()?;
        d.require_vector()?;
        u.check_grid(&d)?;
        Ok(Self { u, d, t })
    }
}

/// Fields sampled at `t0 + n·dt`, `n = 0..len`.
#[derive(Clone, Debug)]
pub struct FieldSeries {
    pub t0: f64,
    pub dt: f64,
    pub fields: Vec<SpectralField>,
}

impl FieldSeries {
    pub fn new(t0: f64, dt: f64, fields: Vec<SpectralField>) -> Result<Self> {
        if fields.len() > 1 && !(dt > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "time step must be positive, got {dt}"
            )));
        }
        if let Some(first) = fields.first() {
            for f in &fields[1..] {
                first.check_same_shape(f)?;
            }
        }
        Ok(Self { t0, dt, fields })
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn time(&self, n: usize) -> f64 {
        self.t0 + n as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|n| self.time(n)).collect()
    }

    /// Length of the sampled interval.
    pub fn horizon(&self) -> f64 {
        self.dt * self.len().saturating_sub(1) as f64
    }

    pub fn sub(&self, other: &FieldSeries) -> Result<FieldSeries> {
        if self.len() != other.len() {
            return Err(Error::Shape(format!(
                "series lengths {} vs {}",
                self.len(),
                other.len()
            )));
        }
        let fields = self
            .fields
            .iter()
            .zip(&other.fields)
            .map(|(a, b)| a.sub(b))
            .collect::<Result<Vec<_>>>()?;
        Ok(FieldSeries {
            t0: self.t0,
            dt: self.dt,
            fields,
        })
    }
}

/// Trapezoidal weights on `n` uniform samples with spacing `dt`.
pub fn trapezoid_weights(n: usize, dt: f64) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![0.0],
        _ => (0..n)
            .map(|i| if i == 0 || i == n - 1 { 0.5 * dt } else { dt })
            .collect(),
    }
}

/// Discrete `L^∞((0,T);H^s) ∩ L²((0,T);H^{s+1})` norm:
/// `max_n ‖f_n‖_{H^s} + ( trapezoid ‖f_n‖²_{H^{s+1}} )^{1/2}`.
pub fn xst_norm(series: &FieldSeries, s: f64) -> Result<f64> {
    if series.is_empty() {
        return Err(Error::InvalidArgument("empty trajectory".into()));
    }
    let mut sup: f64 = 0.0;
    let mut integral = 0.0;
    let weights = trapezoid_weights(series.len(), series.dt);
    for (f, w) in series.fields.iter().zip(&weights) {
        sup = sup.max(sobolev_norm(f, s)?);
        if *w > 0.0 {
            integral += w * sobolev_norm(f, s + 1.0)?.powi(2);
        }
    }
    Ok(sup + integral.sqrt())
}

/// `‖(u, d)‖_Y = ‖u‖_{X^s_T} + ‖d‖_{X^{s+1}_T}`.
pub fn y_norm(u: &FieldSeries, d: &FieldSeries, s: f64) -> Result<f64> {
    Ok(xst_norm(u, s)? + xst_norm(d, s + 1.0)?)
}

/// Time-ordered sequence of states on a uniform time grid.
#[derive(Clone, Debug)]
pub struct Trajectory {
    u: FieldSeries,
    d: FieldSeries,
    pressure: Vec<Option<SpectralField>>,
    s: f64,
}

impl Trajectory {
    pub fn from_series(u: FieldSeries, d: FieldSeries, s: f64) -> Result<Self> {
        if u.len() != d.len() {
            return Err(Error::Shape(format!(
                "velocity has {} snapshots, director {}",
                u.len(),
                d.len()
            )));
        }
        if let (Some(a), Some(b)) = (u.fields.first(), d.fields.first()) {
            a.require_vector()?;
            b.require_vector()?;
            a.check_grid(b)?;
        }
        let n = u.len();
        Ok(Self {
            u,
            d,
            pressure: vec![None; n],
            s,
        })
    }

    pub fn from_states(states: Vec<SimState>, s: f64) -> Result<Self> {
        let t0 = states.first().map_or(0.0, |st| st.t);
        let dt = if states.len() > 1 {
            states[1].t - states[0].t
        } else {
            0.0
        };
        for (n, st) in states.iter().enumerate() {
            let expected = t0 + n as f64 * dt;
            if (st.t - expected).abs() > UNIFORM_TOL * dt.abs().max(1.0) {
                return Err(Error::InvalidArgument(format!(
                    "snapshot {n} at t = {} breaks the uniform time grid",
                    st.t
                )));
            }
        }
        let (us, ds): (Vec<_>, Vec<_>) = states.into_iter().map(|st| (st.u, st.d)).unzip();
        Self::from_series(
            FieldSeries::new(t0, dt, us)?,
            FieldSeries::new(t0, dt, ds)?,
            s,
        )
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn dt(&self) -> f64 {
        self.u.dt
    }

    pub fn time(&self, n: usize) -> f64 {
        self.u.time(n)
    }

    pub fn times(&self) -> Vec<f64> {
        self.u.times()
    }

    pub fn velocity(&self) -> &FieldSeries {
        &self.u
    }

    pub fn director(&self) -> &FieldSeries {
        &self.d
    }

    pub fn state(&self, n: usize) -> SimState {
        SimState {
            u: self.u.fields[n].clone(),
            d: self.d.fields[n].clone(),
            t: self.time(n),
        }
    }

    pub fn last_state(&self) -> Option<SimState> {
        self.len().checked_sub(1).map(|n| self.state(n))
    }

    pub fn pressure(&self, n: usize) -> Option<&SpectralField> {
        self.pressure.get(n).and_then(|p| p.as_ref())
    }

    pub fn set_pressure(&mut self, n: usize, p: SpectralField) {
        self.pressure[n] = Some(p);
    }

    /// Appends a snapshot; the time must continue the uniform grid.
    pub fn push(&mut self, state: SimState) -> Result<()> {
        let n = self.len();
        if n == 1 {
            let dt = state.t - self.u.t0;
            if !(dt > 0.0) {
                return Err(Error::InvalidArgument("times must increase".into()));
            }
            self.u.dt = dt;
            self.d.dt = dt;
        } else if n == 0 {
            self.u.t0 = state.t;
            self.d.t0 = state.t;
        } else {
            let expected = self.time(n);
            if (state.t - expected).abs() > UNIFORM_TOL * self.u.dt.max(1.0) {
                return Err(Error::InvalidArgument(format!(
                    "snapshot at t = {} breaks the uniform time grid",
                    state.t
                )));
            }
        }
        self.u.fields.push(state.u);
        self.d.fields.push(state.d);
        self.pressure.push(None);
        Ok(())
    }

    /// Empty trajectory to be filled with [`Trajectory::push`].
    pub fn empty(s: f64) -> Self {
        Self {
            u: FieldSeries {
                t0: 0.0,
                dt: 0.0,
                fields: vec![],
            },
            d: FieldSeries {
                t0: 0.0,
                dt: 0.0,
                fields: vec![],
            },
            pressure: vec![],
            s,
        }
    }

    /// `‖u‖_{X^s_T} + ‖d‖_{X^{s+1}_T}` with this trajectory's `s`.
    pub fn y_norm(&self) -> Result<f64> {
        y_norm(&self.u, &self.d, self.s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{heat_multiplier, Grid};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn zero_series_has_zero_norm() {
        let g = Grid::new(3, 8, 2.0 * PI).unwrap();
        let series = FieldSeries::new(0.0, 0.1, vec![SpectralField::zeros(&g, 3); 5]).unwrap();
        assert_eq!(xst_norm(&series, 0.6).unwrap(), 0.0);
        let empty = FieldSeries::new(0.0, 0.1, vec![]).unwrap();
        assert!(xst_norm(&empty, 0.6).is_err());
    }

    #[test]
    fn constant_in_time_closed_form() {
        let g = Grid::new(3, 8, 2.0 * PI).unwrap();
        let f = SpectralField::from_fn(&g, 1, |x, o| o[0] = x[0].sin() + 0.5 * (2.0 * x[1]).cos());
        let dt = 0.05;
        let series = FieldSeries::new(0.0, dt, vec![f.clone(); 21]).unwrap();
        let t = 20.0 * dt;
        let expected = sobolev_norm(&f, 0.6).unwrap() + t.sqrt() * sobolev_norm(&f, 1.6).unwrap();
        assert_relative_eq!(
            xst_norm(&series, 0.6).unwrap(),
            expected,
            max_relative = 1e-13
        );
    }

    #[test]
    fn heat_flow_of_single_mode_is_second_order() {
        // ‖sin x₁‖²_{H^σ} = 2^σ·4π³, decaying like e^{−2t}.
        let g = Grid::new(3, 8, 2.0 * PI).unwrap();
        let f = SpectralField::from_fn(&g, 1, |x, o| o[0] = x[0].sin());
        let s = 0.6;
        let t_end: f64 = 1.0;
        let exact = (2f64.powf(s) * 4.0 * PI.powi(3)).sqrt()
            + (2f64.powf(s + 1.0) * 4.0 * PI.powi(3) * (1.0 - (-2.0 * t_end).exp()) / 2.0).sqrt();
        let errs: Vec<f64> = [10usize, 20, 40]
            .iter()
            .map(|&n| {
                let dt = t_end / n as f64;
                let fields = (0..=n)
                    .map(|i| heat_multiplier(&f, i as f64 * dt).unwrap())
                    .collect();
                let series = FieldSeries::new(0.0, dt, fields).unwrap();
                (xst_norm(&series, s).unwrap() - exact).abs()
            })
            .collect();
        assert!(errs[0] < 1e-2 * exact);
        let r1 = errs[0] / errs[1];
        let r2 = errs[1] / errs[2];
        assert!(
            (3.5..4.5).contains(&r1) && (3.5..4.5).contains(&r2),
            "{r1} {r2}"
        );
    }

    #[test]
    fn from_states_rejects_irregular_times() {
        let g = Grid::new(3, 8, 2.0 * PI).unwrap();
        let z = SpectralField::zeros(&g, 3);
        let st = |t| SimState::new(z.clone(), z.clone(), t).unwrap();
        assert!(Trajectory::from_states(vec![st(0.0), st(0.1), st(0.3)], 0.6).is_err());
        let tr = Trajectory::from_states(vec![st(0.0), st(0.1), st(0.2)], 0.6).unwrap();
        assert_eq!(tr.len(), 3);
        assert_relative_eq!(tr.time(2), 0.2);
    }

    #[test]
    fn trapezoid_weights_sum_to_horizon() {
        let w = trapezoid_weights(11, 0.1);
        assert_relative_eq!(w.iter().sum::<f64>(), 1.0, max_relative = 1e-14);
        assert_eq!(trapezoid_weights(1, 0.1), vec![0.0]);
    }
}
