//! Command-line front end.
//!
//! Configuration is a flat `key = value` file (`#` starts a comment)
//! followed by `--set key=value` overrides. A `preset` key loads a named
//! parameter set first; other keys are applied in order.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::dynamics::{classify, default_horizon, AttractorVerdict};
use crate::error::Error;
use crate::exec::Execution;
use crate::integrator::{integrate, IntegrationConfig};
use crate::model::{nondimensionalize, steady_state_e2, CellState, ModelParameters, ParamName};
use crate::presets::{self, plausible_range};
use crate::stability::{hopf_point, stability_reports, HopfReport, StabilityReport};
use crate::sweep::{
    bifurcation_bracket, check_constellations, csv_header, evaluate_point, run_sweep_streaming, write_csv_row,
    Axis, SetCheck, SweepSpec, SweepSummary, DEFAULT_NUDGE, DEFAULT_POINTS,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "wbc-hopf", version, about = "White blood cell feedback model: stability, Hopf points, simulation and sweeps")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Flat key = value configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Output file; standard output when absent.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,

    /// Worker threads for sweeps and constellation checks (1 = sequential).
    #[arg(long, global = true, value_name = "N")]
    pub workers: Option<usize>,

    /// Report rates and times rescaled so that p1 = 1.
    #[arg(long, global = true)]
    pub rescaled: bool,

    /// Override a configuration key; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,

    /// Sweep summary path; defaults to `<out>.summary.json`, or standard
    /// error when writing the grid to standard output.
    #[arg(long, global = true, value_name = "PATH")]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Integrate and write the trajectory as CSV (t,u1,u2,u3).
    Simulate,
    /// Existence and stability of E0, E1 and E2 as JSON.
    Stability,
    /// Hopf point in p2 as JSON.
    Hopf,
    /// Grid sweep as CSV plus a JSON summary.
    Sweep,
    /// Long-run behaviour of one trajectory as JSON.
    Classify,
    /// Check the reference set and the nine oscillating constellations.
    Constellations,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Numerical(_) => EXIT_NUMERICAL,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Config(e.to_string())
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Everything a command needs, after parsing and overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub params: ModelParameters,
    pub initial: Option<CellState>,
    pub integration: IntegrationConfig,
    /// Classification horizon in days; derived from the parameters when absent.
    pub horizon: Option<f64>,
    pub vary: Vec<Axis>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: presets::reference(),
            initial: None,
            integration: IntegrationConfig::default(),
            horizon: None,
            vary: Vec::new(),
        }
    }
}

/// `key = value` pairs of a configuration text, in order.
pub fn parse_pairs(text: &str) -> CliResult<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| config_err(format!("line {}: expected key = value", no + 1)))?;
        out.push((k.trim().to_ascii_lowercase(), v.trim().to_string()));
    }
    Ok(out)
}

fn parse_f64(key: &str, v: &str) -> CliResult<f64> {
    v.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| config_err(format!("{key}: '{v}' is not a finite number")))
}

fn parse_usize(key: &str, v: &str) -> CliResult<usize> {
    v.parse::<usize>()
        .map_err(|_| config_err(format!("{key}: '{v}' is not a non-negative integer")))
}

/// Parses `name`, `name:lo:hi` or `name:lo:hi:points` items separated by
/// commas.
pub fn parse_vary(v: &str, points: usize, nudge: f64) -> CliResult<Vec<Axis>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| {
            let parts: Vec<&str> = item.split(':').map(str::trim).collect();
            let name: ParamName = parts[0].parse().map_err(|e: Error| config_err(e.to_string()))?;
            let (lo, hi) = match parts.len() {
                1 => plausible_range(name)
                    .ok_or_else(|| config_err(format!("vary: {name} needs explicit bounds")))?,
                3 | 4 => (parse_f64("vary", parts[1])?, parse_f64("vary", parts[2])?),
                _ => return Err(config_err(format!("vary: cannot parse '{item}'"))),
            };
            let n = if parts.len() == 4 { parse_usize("vary", parts[3])? } else { points };
            Ok(Axis { name, lo, hi, points: n, nudge })
        })
        .collect()
}

impl RunConfig {
    /// Applies pairs in order, with `preset` first and `vary` last so grid
    /// settings given after it still take effect.
    pub fn apply(&mut self, pairs: &[(String, String)]) -> CliResult<()> {
        for (k, v) in pairs.iter().filter(|(k, _)| k == "preset") {
            self.apply_preset(k, v)?;
        }
        let mut points = DEFAULT_POINTS;
        let mut nudge = DEFAULT_NUDGE;
        let mut vary = None;
        let mut initial = self.initial.map(CellState::to_array);
        for (k, v) in pairs {
            let key = k.as_str();
            match key {
                "preset" => {}
                "u1" | "u2" | "u3" => {
                    let i = (key.as_bytes()[1] - b'1') as usize;
                    initial.get_or_insert([f64::NAN; 3])[i] = parse_f64(key, v)?;
                }
                "t_end" => self.integration.t_end = parse_f64(key, v)?,
                "rel_tol" => self.integration.rel_tol = parse_f64(key, v)?,
                "abs_tol" => self.integration.abs_tol = parse_f64(key, v)?,
                "max_step" => self.integration.max_step = parse_f64(key, v)?,
                "initial_step" => self.integration.initial_step = parse_f64(key, v)?,
                "output_stride" => self.integration.output_stride = parse_f64(key, v)?,
                "max_steps" => self.integration.max_steps = parse_usize(key, v)?,
                "horizon" => self.horizon = Some(parse_f64(key, v)?),
                "grid_points" | "points" => points = parse_usize(key, v)?,
                "nudge" => nudge = parse_f64(key, v)?,
                "vary" => vary = Some(v.clone()),
                _ => match key.parse::<ParamName>() {
                    Ok(name) => self.params.set(name, parse_f64(key, v)?),
                    Err(_) => return Err(config_err(format!("unknown key '{key}'"))),
                },
            }
        }
        if let Some(u) = initial {
            if u.iter().any(|x| x.is_nan()) {
                return Err(config_err("initial state needs all of u1, u2, u3"));
            }
            self.initial = Some(CellState::from_array(u));
        }
        if let Some(v) = vary {
            self.vary = parse_vary(&v, points, nudge)?;
        } else {
            for a in &mut self.vary {
                a.nudge = nudge;
            }
        }
        Ok(())
    }

    fn apply_preset(&mut self, key: &str, name: &str) -> CliResult<()> {
        self.params = presets::by_name(name).ok_or_else(|| config_err(format!("{key}: unknown preset '{name}'")))?;
        self.initial = match name.trim().to_ascii_lowercase().as_str() {
            "fig3" | "fig3a" => Some(presets::FIG3_INITIAL_A),
            "fig3b" => Some(presets::FIG3_INITIAL_B[0]),
            _ => None,
        };
        Ok(())
    }

    /// Reads the config file (if any) and applies `--set` overrides.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> CliResult<Self> {
        let mut cfg = RunConfig::default();
        let mut pairs = match path {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| config_err(format!("{}: {e}", p.display())))?;
                parse_pairs(&text)?
            }
            None => Vec::new(),
        };
        for s in overrides {
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| config_err(format!("--set expects key=value, got '{s}'")))?;
            pairs.push((k.trim().to_ascii_lowercase(), v.trim().to_string()));
        }
        cfg.apply(&pairs)?;
        cfg.params.validate()?;
        Ok(cfg)
    }

    /// The configured initial state, or E2 with `u1` raised by 10%.
    pub fn initial_state(&self) -> CliResult<CellState> {
        match self.initial {
            Some(s) => Ok(s),
            None => steady_state_e2(&self.params)
                .map(|e| e.state.scaled([1.1, 1.0, 1.0]))
                .ok_or_else(|| config_err("no initial state given and E2 does not exist to start near")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityOutput {
    pub params: ModelParameters,
    pub rescaled: bool,
    pub reports: Vec<StabilityReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopfOutput {
    pub params: ModelParameters,
    pub rescaled: bool,
    /// Closed-form result; only for `d1 = d2 = 0`.
    pub closed_form: Option<HopfReport>,
    /// First Hurwitz sign change in `p2` located by bisection.
    pub p2_bracketed: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyOutput {
    pub params: ModelParameters,
    pub rescaled: bool,
    pub initial: CellState,
    pub horizon: f64,
    pub verdict: AttractorVerdict,
}

fn write_json<T: Serialize>(out: &mut dyn Write, value: &T) -> CliResult<()> {
    serde_json::to_writer_pretty(&mut *out, value).map_err(|e| CliError::Io(e.to_string()))?;
    writeln!(out)?;
    Ok(())
}

fn open_out(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            fs::File::create(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// Runs one command, writing its primary output to `out`.
pub fn run(cli: &Cli) -> CliResult<()> {
    let cfg = RunConfig::load(cli.config.as_deref(), &cli.set)?;
    let exec = match cli.workers {
        Some(0) => return Err(config_err("--workers must be at least 1")),
        Some(n) => Execution::with_workers(n),
        None => Execution::default(),
    };
    let mut out = open_out(cli.out.as_deref())?;
    match cli.command {
        Command::Simulate => cmd_simulate(&cfg, cli.rescaled, &mut out)?,
        Command::Stability => write_json(&mut out, &cmd_stability(&cfg, cli.rescaled)?)?,
        Command::Hopf => write_json(&mut out, &cmd_hopf(&cfg, cli.rescaled)?)?,
        Command::Classify => write_json(&mut out, &cmd_classify(&cfg, cli.rescaled)?)?,
        Command::Constellations => write_json(&mut out, &cmd_constellations(exec, cli.rescaled)?)?,
        Command::Sweep => {
            if cli.rescaled {
                return Err(config_err("--rescaled does not apply to sweep"));
            }
            let summary = cmd_sweep(&cfg, exec, &mut out)?;
            out.flush()?;
            let path = cli.summary.clone().or_else(|| {
                cli.out.as_ref().map(|p| {
                    let mut s = p.clone().into_os_string();
                    s.push(".summary.json");
                    PathBuf::from(s)
                })
            });
            match path {
                Some(p) => write_json(&mut open_out(Some(&p))?, &summary)?,
                None => write_json(&mut io::stderr().lock(), &summary)?,
            }
            for w in &summary.warnings {
                eprintln!("warning: {w}");
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// Writes the trajectory as CSV. Rescaled output multiplies times by `p1`.
pub fn cmd_simulate(cfg: &RunConfig, rescaled: bool, out: &mut dyn Write) -> CliResult<()> {
    let initial = cfg.initial_state()?;
    let traj = integrate(&cfg.params, &initial, &cfg.integration)?;
    let tscale = if rescaled { cfg.params.p1 } else { 1.0 };
    writeln!(out, "t,u1,u2,u3")?;
    for (t, s) in traj.times.iter().zip(&traj.states) {
        writeln!(out, "{:.16e},{:.16e},{:.16e},{:.16e}", t * tscale, s.u1, s.u2, s.u3)?;
    }
    Ok(())
}

fn effective(params: &ModelParameters, rescaled: bool) -> CliResult<ModelParameters> {
    Ok(if rescaled { nondimensionalize(params)? } else { *params })
}

pub fn cmd_stability(cfg: &RunConfig, rescaled: bool) -> CliResult<StabilityOutput> {
    let params = effective(&cfg.params, rescaled)?;
    Ok(StabilityOutput { params, rescaled, reports: stability_reports(&params)?.to_vec() })
}

/// Closed form when applicable, plus a bracketed sign change of the Hurwitz
/// value on `p2` in `(0, 2 p1)`.
pub fn cmd_hopf(cfg: &RunConfig, rescaled: bool) -> CliResult<HopfOutput> {
    let params = effective(&cfg.params, rescaled)?;
    let closed_form = if params.is_basic() {
        Some(hopf_point(params.a1, params.a2, params.d3, params.p1)?)
    } else {
        None
    };
    let n = 2000;
    let grid: Vec<f64> = (1..n).map(|i| 2.0 * params.p1 * i as f64 / n as f64).collect();
    let hurwitz: Vec<Option<f64>> = grid
        .iter()
        .map(|&p2| evaluate_point(&params.with(ParamName::P2, p2)).1)
        .collect();
    let p2_bracketed = (1..grid.len())
        .find(|&i| matches!((hurwitz[i - 1], hurwitz[i]), (Some(a), Some(b)) if a * b < 0.0))
        .map(|i| bifurcation_bracket(&params, grid[i - 1], grid[i]))
        .transpose()?;
    Ok(HopfOutput { params, rescaled, closed_form, p2_bracketed })
}

pub fn cmd_classify(cfg: &RunConfig, rescaled: bool) -> CliResult<ClassifyOutput> {
    let initial = cfg.initial_state()?;
    let horizon = cfg.horizon.unwrap_or_else(|| default_horizon(&cfg.params));
    let mut verdict = classify(&cfg.params, &initial, horizon)?;
    let (params, horizon) = if rescaled {
        verdict.period = verdict.period.map(|p| p * cfg.params.p1);
        (nondimensionalize(&cfg.params)?, horizon * cfg.params.p1)
    } else {
        (cfg.params, horizon)
    };
    Ok(ClassifyOutput { params, rescaled, initial, horizon, verdict })
}

/// Streams the grid as CSV and returns the summary.
pub fn cmd_sweep(cfg: &RunConfig, exec: Execution, out: &mut dyn Write) -> CliResult<SweepSummary> {
    if cfg.vary.is_empty() {
        return Err(config_err("sweep needs 'vary', e.g. vary = p1,a2,d3"));
    }
    let spec = SweepSpec::new(cfg.params, cfg.vary.clone());
    writeln!(out, "{}", csv_header(&spec))?;
    let mut io_err = None;
    let summary = run_sweep_streaming(&spec, exec, |row| {
        if let Err(e) = write_csv_row(out, row) {
            io_err = Some(e);
            return Err(Error::InvalidSweep("output failed".into()));
        }
        Ok(())
    });
    if let Some(e) = io_err {
        return Err(e.into());
    }
    Ok(summary?)
}

pub fn cmd_constellations(exec: Execution, rescaled: bool) -> CliResult<Vec<SetCheck>> {
    let mut checks = check_constellations(exec)?;
    if rescaled {
        for c in &mut checks {
            c.verdict.period = c.verdict.period.map(|p| p * c.params.p1);
            c.params = nondimensionalize(&c.params)?;
        }
    }
    Ok(checks)
}

/// Parses arguments, runs, reports errors on standard error and returns
/// the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match run(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("wbc-hopf: {e}");
            e.exit_code()
        }
    }
}
