//! Plain-text experiment configuration: `key = value` lines with `#` comments.

use std::collections::HashSet;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::initial_data::{
    small_data, small_data_family, DirectorData, EtaVector, FlowData, Profile, BUMP_WIDTH,
};
use crate::spectral::{Grid, SpectralField};
use crate::timestep::{Scheme, StepConfig};

/// Every accepted key, in echo order.
pub const KEYS: [&str; 14] = [
    "dimension",
    "resolution",
    "box_len",
    "s",
    "eta",
    "scenario",
    "epsilon",
    "seed",
    "dt",
    "t_end",
    "snapshot_every",
    "solver",
    "dealias",
    "output_dir",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scenario {
    Zero,
    Random,
    Bump,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Self::Zero => "zero",
            Self::Random => "random",
            Self::Bump => "bump",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub dimension: usize,
    pub resolution: usize,
    pub box_len: f64,
    pub s: f64,
    pub eta: Vec<f64>,
    pub scenario: Scenario,
    pub epsilon: f64,
    pub seed: u64,
    pub dt: f64,
    pub t_end: f64,
    pub snapshot_every: usize,
    pub solver: Scheme,
    pub dealias: bool,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dimension: 3,
            resolution: 32,
            box_len: 2.0 * PI,
            s: 0.6,
            eta: vec![0.0, 0.0, 1.0],
            scenario: Scenario::Random,
            epsilon: 1e-2,
            seed: 0,
            dt: 1e-3,
            t_end: 1.0,
            snapshot_every: 100,
            solver: Scheme::ImexEuler,
            dealias: true,
            output_dir: PathBuf::from("out"),
        }
    }
}

fn parse_f64(value: &str) -> std::result::Result<f64, String> {
    let v = value.trim();
    let (coef, scale) = match v.strip_suffix("pi") {
        Some(head) => (head.trim().trim_end_matches('*').trim(), PI),
        None => (v, 1.0),
    };
    let c = if coef.is_empty() {
        1.0
    } else {
        coef.parse::<f64>()
            .map_err(|_| format!("not a number: {value:?}"))?
    };
    let out = c * scale;
    if out.is_finite() {
        Ok(out)
    } else {
        Err(format!("not a finite number: {value:?}"))
    }
}

fn parse_int<T: std::str::FromStr>(value: &str) -> std::result::Result<T, String> {
    value
        .trim()
        .parse()
        .map_err(|_| format!("not a nonnegative integer: {value:?}"))
}

fn parse_bool(value: &str) -> std::result::Result<bool, String> {
    match value.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(format!("not a boolean: {other:?}")),
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = HashSet::new();
        let mut eta_line = 0;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Config { line, msg };
            let Some((key, value)) = content.split_once('=') else {
                return Err(err(format!("expected `key = value`, got {content:?}")));
            };
            let key = key.trim();
            let value = value.trim();
            if !KEYS.contains(&key) {
                return Err(err(format!("unknown key {key:?}")));
            }
            if !seen.insert(key.to_string()) {
                return Err(err(format!("duplicate key {key:?}")));
            }
            match key {
                "dimension" => cfg.dimension = parse_int(value).map_err(err)?,
                "resolution" => cfg.resolution = parse_int(value).map_err(err)?,
                "box_len" => cfg.box_len = parse_f64(value).map_err(err)?,
                "s" => cfg.s = parse_f64(value).map_err(err)?,
                "eta" => {
                    eta_line = line;
                    cfg.eta = value
                        .split([',', ' '])
                        .filter(|p| !p.is_empty())
                        .map(parse_f64)
                        .collect::<std::result::Result<_, _>>()
                        .map_err(err)?;
                }
                "scenario" => {
                    cfg.scenario = match value {
                        "zero" => Scenario::Zero,
                        "random" => Scenario::Random,
                        "bump" => Scenario::Bump,
                        other => return Err(err(format!("unknown scenario {other:?}"))),
                    }
                }
                "epsilon" => cfg.epsilon = parse_f64(value).map_err(err)?,
                "seed" => cfg.seed = parse_int(value).map_err(err)?,
                "dt" => cfg.dt = parse_f64(value).map_err(err)?,
                "t_end" => cfg.t_end = parse_f64(value).map_err(err)?,
                "snapshot_every" => cfg.snapshot_every = parse_int(value).map_err(err)?,
                "solver" => {
                    cfg.solver = Scheme::parse(value)
                        .ok_or_else(|| err(format!("unknown solver {value:?}")))?
                }
                "dealias" => cfg.dealias = parse_bool(value).map_err(err)?,
                "output_dir" => cfg.output_dir = PathBuf::from(value),
                _ => unreachable!("key list checked above"),
            }
        }
        if !seen.contains("eta") {
            cfg.eta = vec![0.0; cfg.dimension];
            if let Some(last) = cfg.eta.last_mut() {
                *last = 1.0;
            }
        }
        cfg.validate(eta_line)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    fn validate(&self, eta_line: usize) -> Result<()> {
        let fail = |msg: String| Err(Error::Config { line: 0, msg });
        if let Err(e) = Grid::new(self.dimension, self.resolution, self.box_len) {
            return fail(e.to_string());
        }
        if self.eta.len() != self.dimension {
            return Err(Error::Config {
                line: eta_line,
                msg: format!(
                    "eta has {} components for dimension {}",
                    self.eta.len(),
                    self.dimension
                ),
            });
        }
        if let Err(e) = EtaVector::new(&self.eta) {
            return Err(Error::Config {
                line: eta_line,
                msg: e.to_string(),
            });
        }
        if !(self.s >= 0.0) {
            return fail(format!("s must be >= 0, got {}", self.s));
        }
        if self.scenario != Scenario::Zero && !(self.epsilon > 0.0) {
            return fail(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if let Err(e) = self.step_config().validate() {
            return fail(e.to_string());
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.dimension, self.resolution, self.box_len)
    }

    pub fn eta(&self) -> Result<EtaVector> {
        EtaVector::new(&self.eta)
    }

    pub fn step_config(&self) -> StepConfig {
        StepConfig {
            dt: self.dt,
            t_end: self.t_end,
            snapshot_every: self.snapshot_every,
            scheme: self.solver,
            dealias: self.dealias,
            linear_only: false,
        }
    }

    /// Initial data of the configured scenario.
    pub fn initial_data(&self) -> Result<(FlowData, DirectorData)> {
        let grid = self.grid()?;
        let eta = self.eta()?;
        match self.scenario {
            Scenario::Zero => Ok((
                FlowData::zero(&grid),
                DirectorData::new(SpectralField::zeros(&grid, grid.dim()), eta)?,
            )),
            Scenario::Random => small_data_family(self.epsilon, self.seed, &grid, eta, self.s),
            Scenario::Bump => small_data(
                self.epsilon,
                Profile::Bump { a: BUMP_WIDTH },
                &grid,
                eta,
                self.s,
            ),
        }
    }

    /// Canonical `key = value` echo, one line per key.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        let eta: Vec<String> = self.eta.iter().map(|e| format!("{e:.16e}")).collect();
        let _ = writeln!(out, "dimension = {}", self.dimension);
        let _ = writeln!(out, "resolution = {}", self.resolution);
        let _ = writeln!(out, "box_len = {:.16e}", self.box_len);
        let _ = writeln!(out, "s = {:.16e}", self.s);
        let _ = writeln!(out, "eta = {}", eta.join(", "));
        let _ = writeln!(out, "scenario = {}", self.scenario.name());
        let _ = writeln!(out, "epsilon = {:.16e}", self.epsilon);
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "dt = {:.16e}", self.dt);
        let _ = writeln!(out, "t_end = {:.16e}", self.t_end);
        let _ = writeln!(out, "snapshot_every = {}", self.snapshot_every);
        let _ = writeln!(out, "solver = {}", self.solver.name());
        let _ = writeln!(out, "dealias = {}", self.dealias);
        let _ = writeln!(out, "output_dir = {}", self.output_dir.display());
        out
    }
}
