//! Command-line front end: one subcommand per experiment, all outputs under
//! the configured `output_dir`.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::diagnostics::{decay_exponents, energy};
use crate::error::{Error, Result};
use crate::estimates::{
    bilinear_suite, constraint_residual, digest_fields, max_ratio, product_suite, smoothing_suite,
    trilinear_ratios, trilinear_suite, InequalityRecord, SuiteConfig, ROUNDOFF_SLACK,
};
use crate::initial_data::{director_size, gaussian_bump, velocity_size, BUMP_WIDTH};
use crate::mild::{fixed_point_residual, picard_solve, Generator, PicardConfig};
use crate::semigroup::{
    commutation_check, decay_fit, gaussian_series, log_times, torus_heat_series, Boundary,
    DecaySeries, HalfSpaceField, BOUNDARY_TOL,
};
use crate::snapshot;
use crate::spectral::{lp_norm, Grid, Lp, SpectralField};
use crate::timestep::integrate;
use crate::trajectory::{SimState, Trajectory};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_ASSERTION: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "nematic",
    version,
    about = "Nematic liquid crystal flow experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Time-step the coupled system and write snapshots.
    Simulate(Common),
    /// Solve the integral formulation by fixed-point iteration.
    Picard(PicardArgs),
    /// Decay rates of the heat semigroup and half-space commutation.
    SemigroupLab(LabArgs),
    /// Randomized checks of the bilinear, trilinear and smoothing estimates.
    Verify(VerifyArgs),
    /// Fit decay exponents to the snapshots of a finished simulation.
    DecayFit(DecayArgs),
    /// Summarize every CSV in the output directory.
    Report(Common),
}

#[derive(Args, Debug)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `output_dir` from the config file.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PicardArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 0.1)]
    horizon: f64,
    #[arg(long, default_value_t = 16)]
    n_time: usize,
    #[arg(long, default_value_t = 50)]
    max_iter: usize,
    /// Defaults to `1e-9·(1 + data size)`.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args, Debug)]
struct LabArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 30)]
    points: usize,
    #[arg(long, default_value_t = 20)]
    commutation_seeds: u64,
    /// Exit with status 2 if a slope or commutation defect is out of tolerance.
    #[arg(long)]
    check: bool,
    #[arg(long, default_value_t = 0.05)]
    slope_tol: f64,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 100)]
    seeds: u64,
    #[arg(long, default_value_t = 1.0)]
    horizon: f64,
    #[arg(long, default_value_t = 8)]
    n_time: usize,
    /// Resolution for the stability comparison; defaults to twice the config resolution.
    #[arg(long)]
    compare_resolution: Option<usize>,
    #[arg(long, default_value_t = 0.2)]
    stability_tol: f64,
}

#[derive(Args, Debug)]
struct DecayArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 1.0)]
    window_lo: f64,
    /// Defaults to the last snapshot time, clipped to `L²/16`.
    #[arg(long)]
    window_hi: Option<f64>,
    /// Exit with status 2 if a fitted rate misses its whole-space target.
    #[arg(long)]
    check: bool,
    #[arg(long, default_value_t = 0.15)]
    velocity_tol: f64,
    #[arg(long, default_value_t = 0.2)]
    gradient_tol: f64,
}

/// Parses `argv` (including the program name) and runs the chosen command.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_ASSERTION,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Blowup { .. } | Error::NonContraction { .. } => EXIT_DIVERGED,
        _ => EXIT_CONFIG,
    }
}

fn dispatch(command: Command) -> Result<bool> {
    match command {
        Command::Simulate(c) => Run::open("simulate", &c)?.simulate(),
        Command::Picard(a) => Run::open("picard", &a.common)?.picard(&a),
        Command::SemigroupLab(a) => Run::open("semigroup-lab", &a.common)?.semigroup_lab(&a),
        Command::Verify(a) => Run::open("verify", &a.common)?.verify(&a),
        Command::DecayFit(a) => Run::open("decay-fit", &a.common)?.decay_fit(&a),
        Command::Report(c) => Run::open("report", &c)?.report(),
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// One invocation: config, output directory and the manifest being built.
struct Run {
    command: &'static str,
    cfg: RunConfig,
    config_digest: String,
    dir: PathBuf,
    outputs: Vec<String>,
    inputs: Vec<(String, String)>,
    started: Instant,
}

impl Run {
    fn open(command: &'static str, common: &Common) -> Result<Self> {
        let text = fs::read_to_string(&common.config).map_err(|e| Error::Config {
            line: 0,
            msg: format!("cannot read {}: {e}", common.config.display()),
        })?;
        let mut cfg = RunConfig::parse(&text)?;
        if let Some(dir) = &common.output_dir {
            cfg.output_dir = dir.clone();
        }
        fs::create_dir_all(&cfg.output_dir)?;
        log::info!("{command}: output in {}", cfg.output_dir.display());
        Ok(Self {
            command,
            dir: cfg.output_dir.clone(),
            cfg,
            config_digest: sha256_hex(text.as_bytes()),
            outputs: Vec::new(),
            inputs: Vec::new(),
            started: Instant::now(),
        })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        fs::write(self.dir.join(name), contents)?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    fn write_snapshot(&mut self, name: String, field: &SpectralField, t: f64) -> Result<()> {
        snapshot::save(&self.dir.join(&name), field, t)?;
        self.outputs.push(name);
        Ok(())
    }

    fn finish(&self) -> Result<()> {
        let mut m = String::new();
        let _ = writeln!(m, "command = {}", self.command);
        let _ = writeln!(m, "version = {}", env!("CARGO_PKG_VERSION"));
        m.push_str(&self.cfg.echo());
        let _ = writeln!(m, "config_sha256 = {}", self.config_digest);
        for (name, digest) in &self.inputs {
            let _ = writeln!(m, "input {name} = {digest}");
        }
        for name in &self.outputs {
            let bytes = fs::read(self.dir.join(name))?;
            let _ = writeln!(m, "output {name} sha256 = {}", sha256_hex(&bytes));
        }
        let _ = writeln!(
            m,
            "wall_time_s = {:.3}",
            self.started.elapsed().as_secs_f64()
        );
        fs::write(self.dir.join("manifest.txt"), m)?;
        Ok(())
    }

    fn record_data(&mut self, u0: &SpectralField, d0: &SpectralField) {
        self.inputs
            .push(("initial_velocity".into(), digest_fields([u0])));
        self.inputs
            .push(("initial_director".into(), digest_fields([d0])));
    }

    fn write_trajectory(&mut self, traj: &Trajectory) -> Result<()> {
        let eta = self.cfg.eta()?;
        let defects = constraint_residual(traj, &eta);
        let mut csv = String::from("t,energy,constraint_defect,velocity_linf,director_linf\n");
        for n in 0..traj.len() {
            let SimState { u, d, t } = traj.state(n);
            let _ = writeln!(
                csv,
                "{t:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                energy(&u, &d),
                defects[n],
                lp_norm(&u, Lp::Inf),
                lp_norm(&d, Lp::Inf)
            );
            self.write_snapshot(format!("u_{n:06}.elsf"), &u, t)?;
            self.write_snapshot(format!("d_{n:06}.elsf"), &d, t)?;
        }
        self.write("series.csv", &csv)
    }

    fn simulate(mut self) -> Result<bool> {
        let (u0, d0) = self.cfg.initial_data()?;
        self.record_data(&u0.u0, &d0.d0);
        let eta = self.cfg.eta()?;
        match integrate(&u0, &d0, &eta, &self.cfg.step_config(), self.cfg.s) {
            Ok(traj) => {
                self.write_trajectory(&traj)?;
                self.finish()?;
                Ok(true)
            }
            Err(Error::Blowup { time, partial }) => {
                self.write_trajectory(&partial)?;
                self.finish()?;
                Err(Error::Blowup { time, partial })
            }
            Err(e) => Err(e),
        }
    }

    fn picard(mut self, args: &PicardArgs) -> Result<bool> {
        let (u0, d0) = self.cfg.initial_data()?;
        self.record_data(&u0.u0, &d0.d0);
        let eta = self.cfg.eta()?;
        let s = self.cfg.s;
        let size = velocity_size(&u0.u0, s)? + director_size(&d0.d0, s)?;
        let mut pc = PicardConfig::new(args.horizon, args.n_time, s, size);
        pc.max_iter = args.max_iter;
        if let Some(tol) = args.tol {
            pc.tol = tol;
        }
        match picard_solve(&u0, &d0, &eta, &pc) {
            Ok((traj, report)) => {
                self.write("picard.csv", &report.to_csv())?;
                let residual = fixed_point_residual(&traj, &u0, &d0, &eta)?;
                let mut summary =
                    String::from("horizon,n_time,tol,converged,residual,last_ratio\n");
                let _ = writeln!(
                    summary,
                    "{:.16e},{},{:.16e},{},{:.16e},{}",
                    pc.horizon,
                    pc.n_time,
                    pc.tol,
                    report.converged,
                    residual,
                    report
                        .last_ratio()
                        .map_or(String::new(), |r| format!("{r:.16e}"))
                );
                self.write("picard_summary.csv", &summary)?;
                self.finish()?;
                if !report.converged {
                    log::warn!("Picard iteration did not reach tolerance {}", pc.tol);
                }
                Ok(report.converged)
            }
            Err(Error::NonContraction { report }) => {
                self.write("picard.csv", &report.to_csv())?;
                self.finish()?;
                Err(Error::NonContraction { report })
            }
            Err(e) => Err(e),
        }
    }

    fn semigroup_lab(mut self, args: &LabArgs) -> Result<bool> {
        let grid = self.cfg.grid()?;
        let horizon = grid.validity_horizon();
        let window = (1.0, horizon);
        let times = log_times(1.0, horizon, args.points);
        let bump = gaussian_bump(&grid, BUMP_WIDTH)?;
        let dim = grid.dim();
        let mut series: Vec<DecaySeries> = Vec::new();
        for (q, j) in [(Lp::Two, 0), (Lp::Inf, 0), (Lp::Inf, 1)] {
            series.push(torus_heat_series(&bump, &times, Lp::One, q, j)?);
        }
        for q in [Lp::Two, Lp::Inf] {
            series.push(gaussian_series(BUMP_WIDTH, dim, &times, q)?);
        }

        let mut csv = String::from("t,norm,p,q,j,domain,slope_window_lo,slope_window_hi\n");
        let mut fits = String::from(
            "domain,p,q,j,slope,expected,intercept,residual,window_lo,window_hi,points\n",
        );
        let mut ok = true;
        for sr in &series {
            let meta = sr.meta();
            let fit = decay_fit(sr, window)?;
            for (t, v) in sr.times().iter().zip(sr.norms()) {
                let _ = writeln!(
                    csv,
                    "{t:.16e},{v:.16e},{},{},{},{},{:.16e},{:.16e}",
                    meta.p.label(),
                    meta.q.label(),
                    meta.j,
                    meta.domain.label(),
                    fit.window.0,
                    fit.window.1
                );
            }
            let expected = meta.expected_slope();
            let _ = writeln!(
                fits,
                "{},{},{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
                meta.domain.label(),
                meta.p.label(),
                meta.q.label(),
                meta.j,
                fit.slope,
                expected,
                fit.intercept,
                fit.residual,
                fit.window.0,
                fit.window.1,
                fit.points
            );
            if (fit.slope - expected).abs() > args.slope_tol {
                log::warn!(
                    "{} q={} j={} slope {:.4} vs {:.4}",
                    meta.domain.label(),
                    meta.q.label(),
                    meta.j,
                    fit.slope,
                    expected
                );
                ok = false;
            }
        }
        self.write("semigroup.csv", &csv)?;
        self.write("semigroup_fits.csv", &fits)?;

        let mut comm = String::from("seed,t,defect,h1_norm\n");
        for seed in 0..args.commutation_seeds {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = HalfSpaceField::random(&grid, Boundary::Neumann, &mut rng);
            let t = 0.1 * (1 + seed % 10) as f64;
            let defect = commutation_check(&f, t)?;
            let norm = f.h1_norm();
            let _ = writeln!(comm, "{seed},{t:.16e},{defect:.16e},{norm:.16e}");
            if defect > BOUNDARY_TOL * norm.max(1.0) {
                ok = false;
            }
        }
        self.write("commutation.csv", &comm)?;
        self.finish()?;
        Ok(ok || !args.check)
    }

    fn verify(mut self, args: &VerifyArgs) -> Result<bool> {
        let grid = self.cfg.grid()?;
        let fine_res = args.compare_resolution.unwrap_or(2 * grid.res());
        let fine = Grid::new(grid.dim(), fine_res, grid.box_len())?;
        let mut suite = SuiteConfig::new(self.cfg.s, 0..args.seeds);
        suite.horizon = args.horizon;
        suite.n_time = args.n_time;

        let mut records: Vec<InequalityRecord> = Vec::new();
        records.extend(bilinear_suite(&grid, &suite)?);
        records.extend(trilinear_suite(&grid, &suite)?);
        let heat = smoothing_suite(&grid, &suite, Generator::Heat)?;
        let stokes = smoothing_suite(&grid, &suite, Generator::Stokes)?;
        records.extend(heat.into_iter().map(|r| renamed(r, "smoothing_heat")));
        records.extend(stokes.into_iter().map(|r| renamed(r, "smoothing_stokes")));
        let mut ok = records.iter().all(|r| r.passes(ROUNDOFF_SLACK));
        let product = product_suite(&grid, &suite)?;

        let mut csv = format!("{}\n", InequalityRecord::CSV_HEADER);
        for r in records.iter().chain(&product) {
            let _ = writeln!(csv, "{}", r.csv_row());
        }
        self.write("verify.csv", &csv)?;

        let fine_product = product_suite(&fine, &suite)?;
        let coarse_tri = trilinear_ratios(&grid, &suite)?;
        let fine_tri = trilinear_ratios(&fine, &suite)?;
        let pairs = [
            ("product_hs", max_ratio(&product), max_ratio(&fine_product)),
            ("trilinear_l1", fold_max(&coarse_tri), fold_max(&fine_tri)),
        ];
        let mut stab = format!(
            "name,ratio_m{},ratio_m{},relative_change\n",
            grid.res(),
            fine.res()
        );
        for (name, coarse, fine) in pairs {
            let change = (fine - coarse).abs() / coarse.abs().max(f64::MIN_POSITIVE);
            let _ = writeln!(stab, "{name},{coarse:.16e},{fine:.16e},{change:.16e}");
            if change > args.stability_tol {
                log::warn!("{name} constant moved by {change:.3} between resolutions");
                ok = false;
            }
        }
        self.write("verify_stability.csv", &stab)?;
        self.finish()?;
        Ok(ok)
    }

    fn decay_fit(mut self, args: &DecayArgs) -> Result<bool> {
        let traj = load_trajectory(&self.dir, self.cfg.s)?;
        let hi = args.window_hi.unwrap_or(f64::INFINITY);
        let exps = decay_exponents(&traj, (args.window_lo, hi))?;
        self.write("decay_fit.csv", &exps.to_csv())?;
        self.finish()?;
        let mut ok = true;
        for (field, j, tol) in [("u", 0, args.velocity_tol), ("d", 1, args.gradient_tol)] {
            let fit = exps.get(field, j).expect("fits cover u and d, j = 0, 1");
            if !((fit.slope - fit.target).abs() <= tol) {
                log::warn!("{field} j={j}: slope {:.4} vs {:.4}", fit.slope, fit.target);
                ok = false;
            }
        }
        Ok(ok || !args.check)
    }

    fn report(mut self) -> Result<bool> {
        let mut names: Vec<String> = fs::read_dir(&self.dir)?
            .filter_map(|e| e.ok())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .filter(|n| n.ends_with(".csv") && n != "report.csv")
            .collect();
        names.sort();
        let mut out = String::from("source,metric,value\n");
        for name in &names {
            let text = fs::read_to_string(self.dir.join(name))?;
            for (metric, value) in summarize(name, &text) {
                let _ = writeln!(out, "{name},{metric},{value}");
            }
            self.inputs
                .push((name.clone(), sha256_hex(text.as_bytes())));
        }
        self.write("report.csv", &out)?;
        self.finish()?;
        Ok(true)
    }
}

fn renamed(mut r: InequalityRecord, name: &str) -> InequalityRecord {
    r.name = name.to_string();
    r
}

fn fold_max(v: &[f64]) -> f64 {
    v.iter().copied().fold(0.0, f64::max)
}

/// Rebuilds a trajectory from `u_NNNNNN.elsf` / `d_NNNNNN.elsf` pairs.
pub fn load_trajectory(dir: &Path, s: f64) -> Result<Trajectory> {
    let mut states = Vec::new();
    for n in 0.. {
        let u_path = dir.join(format!("u_{n:06}.elsf"));
        if !u_path.exists() {
            break;
        }
        let (u, t) = snapshot::load(&u_path)?;
        let (d, td) = snapshot::load(&dir.join(format!("d_{n:06}.elsf")))?;
        if t != td {
            return Err(Error::Format(format!(
                "snapshot {n}: velocity at t = {t}, director at t = {td}"
            )));
        }
        states.push(SimState::new(u, d, t)?);
    }
    if states.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no snapshots in {}",
            dir.display()
        )));
    }
    Trajectory::from_states(states, s)
}

fn column(text: &str, name: &str) -> Option<Vec<String>> {
    let mut lines = text.lines();
    let idx = lines.next()?.split(',').position(|h| h == name)?;
    Some(
        lines
            .map(|l| l.split(',').nth(idx).unwrap_or("").to_string())
            .collect(),
    )
}

fn floats(values: &[String]) -> Vec<f64> {
    values.iter().filter_map(|v| v.parse().ok()).collect()
}

/// Headline numbers of one output file.
fn summarize(name: &str, text: &str) -> Vec<(String, String)> {
    let rows = text.lines().count().saturating_sub(1);
    let mut out = vec![("rows".to_string(), rows.to_string())];
    let fmt = |v: f64| format!("{v:.16e}");
    match name {
        "picard.csv" => {
            if let Some(r) = column(text, "ratio") {
                let r = floats(&r);
                if let Some(last) = r.last() {
                    out.push(("last_ratio".into(), fmt(*last)));
                }
            }
            if let Some(d) = column(text, "diff_norm").map(|d| floats(&d)) {
                if let Some(last) = d.last() {
                    out.push(("final_diff".into(), fmt(*last)));
                }
            }
        }
        "verify.csv" => {
            if let (Some(names), Some(lhs), Some(rhs)) = (
                column(text, "name"),
                column(text, "lhs"),
                column(text, "rhs"),
            ) {
                let mut kinds: Vec<&String> = names.iter().collect();
                kinds.sort();
                kinds.dedup();
                for kind in kinds {
                    let worst = names
                        .iter()
                        .zip(floats(&lhs).iter().zip(floats(&rhs)))
                        .filter(|(n, _)| *n == kind)
                        .map(|(_, (l, r))| if r > 0.0 { l / r } else { 0.0 })
                        .fold(0.0, f64::max);
                    out.push((format!("{kind}_max_ratio"), fmt(worst)));
                }
            }
        }
        "semigroup_fits.csv" | "decay_fit.csv" => {
            let label: &[&str] = if name == "decay_fit.csv" {
                &["field", "j"]
            } else {
                &["domain", "q", "j"]
            };
            let cols: Vec<Vec<String>> = label.iter().filter_map(|c| column(text, c)).collect();
            if let Some(slopes) = column(text, "slope") {
                for (i, s) in slopes.iter().enumerate() {
                    let key: Vec<&str> = cols.iter().map(|c| c[i].as_str()).collect();
                    out.push((format!("slope_{}", key.join("_")), s.clone()));
                }
            }
        }
        "series.csv" => {
            for col in ["energy", "constraint_defect"] {
                if let Some(v) = column(text, col).map(|v| floats(&v)) {
                    if let Some(last) = v.last() {
                        out.push((format!("final_{col}"), fmt(*last)));
                    }
                    out.push((
                        format!("max_{col}"),
                        fmt(v.iter().copied().fold(0.0, f64::max)),
                    ));
                }
            }
        }
        _ => {}
    }
    out
}
