//! Command-line surface.
//!
//! Exit codes: 0 success, 1 oracle verification failed, 2 validation,
//! 3 degenerate physics (escalated warnings under `--strict`), 4 io.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::coherence::{grid_for, sample_series, GridKind};
use crate::config::{parse_polarization, RunConfig};
use crate::error::{Error, Result};
use crate::estimator::{
    calibrate_amplitudes, degeneracy_warning, degenerate_spins, estimate_from_doubleprime,
    estimate_from_prime, sweep, AmplitudeCalibration, HEADLINE_HORIZON_US,
};
use crate::fixtures::Fixture;
use crate::hyperfine::AngularConvention;
use crate::io::{
    calibration_from_json, calibration_to_json, env_from_csv, env_from_json, env_to_csv, env_to_json,
    fmt_num, read_series, to_json_string, write_atomic, write_estimate, write_series,
};
use crate::lattice::{generate_sites, select_environment, set_polarizations, EnvironmentRealization};
use crate::oracle::{verify_closed_forms, BatteryConfig};
use crate::reproduce::{reproduce, Target};

#[derive(Debug, Parser)]
#[command(name = "nvpol", version, about = "NV-center coherence sampling and nuclear polarization bounds")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GridArg {
    Prime,
    Doubleprime,
    Continuous,
}

impl From<GridArg> for GridKind {
    fn from(g: GridArg) -> Self {
        match g {
            GridArg::Prime => GridKind::TPrime,
            GridArg::Doubleprime => GridKind::TDoublePrime,
            GridArg::Continuous => GridKind::Continuous,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConventionArg {
    AsGiven,
    TimesTwoPi,
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Magnetic field in tesla; repeat for sweeps.
    #[arg(long = "field", global = true)]
    pub fields: Vec<f64>,
    /// Uniform polarization or a comma-separated per-spin list.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub pol: Option<String>,
    #[arg(long, global = true, value_enum)]
    pub grid: Option<GridArg>,
    #[arg(long = "tmax-us", global = true)]
    pub tmax_us: Option<f64>,
    #[arg(long = "dt-us", global = true)]
    pub dt_us: Option<f64>,
    #[arg(long = "horizon-us", global = true)]
    pub horizon_us: Option<f64>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Treat degenerate-spin warnings as failures (exit 3).
    #[arg(long, global = true)]
    pub strict: bool,
    /// Environment CSV or JSON.
    #[arg(long, global = true)]
    pub env: Option<PathBuf>,
    /// Bundled coupling table: table1..table4.
    #[arg(long, global = true)]
    pub fixture: Option<String>,
    #[arg(long = "free-phase", global = true)]
    pub free_phase: bool,
    #[arg(long = "angular-convention", global = true, value_enum)]
    pub angular_convention: Option<ConventionArg>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a random bath on the diamond lattice and write it as CSV + JSON.
    Generate,
    /// Sample the coherence of an environment on a grid.
    Simulate,
    /// Polarization-product bound from a series file or an environment.
    Estimate {
        /// Series CSV (its JSON sidecar must sit next to it).
        #[arg(long)]
        series: Option<PathBuf>,
        /// Spin count for p̄.
        #[arg(long)]
        n: Option<usize>,
        /// Amplitude calibration JSON for t″ estimates.
        #[arg(long)]
        calibration: Option<PathBuf>,
        /// Measure the calibration with an unpolarized t′ run at the same field.
        #[arg(long)]
        auto_calibrate: bool,
    },
    /// One t′ estimate per field.
    Sweep,
    /// Regenerate figure data or the headline estimate.
    Reproduce {
        /// fig1..fig6, headline or all.
        target: String,
    },
    /// Check every closed form against the brute-force oracle.
    Verify {
        #[arg(long)]
        cases: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    VerificationFailed,
    Degenerate,
}

impl Status {
    pub fn code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::VerificationFailed => 1,
            Status::Degenerate => 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
    pub status: Status,
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io(_) => 4,
        Error::DegenerateSpin { .. } => 3,
        _ => 2,
    }
}

/// Config file (or defaults) with flags applied, validated.
pub fn resolve_config(common: &CommonArgs) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::from_path(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = Some(seed);
    }
    cfg.lattice.seed = cfg.effective_seed();
    if !common.fields.is_empty() {
        cfg.fields_t = common.fields.clone();
    }
    if let Some(p) = &common.pol {
        cfg.polarization = parse_polarization(p)?;
    }
    if let Some(g) = common.grid {
        cfg.grid.kind = g.into();
    }
    if let Some(t) = common.tmax_us {
        cfg.grid.t_max_us = t;
    }
    if let Some(dt) = common.dt_us {
        cfg.grid.dt_us = Some(dt);
    }
    if common.free_phase {
        cfg.grid.include_free_phase = true;
    }
    if let Some(h) = common.horizon_us {
        cfg.horizon_us = Some(h);
    }
    if let Some(out) = &common.out {
        cfg.io.out = Some(out.clone());
    }
    if let Some(env) = &common.env {
        cfg.io.env = Some(env.clone());
    }
    if let Some(f) = &common.fixture {
        cfg.io.fixture = Some(f.clone());
    }
    if let Some(conv) = common.angular_convention {
        cfg.constants.angular_convention = match conv {
            ConventionArg::AsGiven => AngularConvention::AsGiven,
            ConventionArg::TimesTwoPi => AngularConvention::TimesTwoPi,
        };
    }
    cfg.strict |= common.strict;
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(cfg: &RunConfig) -> PathBuf {
    cfg.io.out.clone().unwrap_or_else(|| PathBuf::from("out"))
}

/// Loads the configured environment at `field_t` with the configured polarizations.
pub fn load_environment(cfg: &RunConfig, field_t: f64) -> Result<EnvironmentRealization> {
    let env = match (&cfg.io.env, &cfg.io.fixture) {
        (Some(path), _) => {
            let text = fs::read_to_string(path)?;
            if path.extension().is_some_and(|e| e == "json") {
                env_from_json(&text)?.with_field(field_t)
            } else {
                env_from_csv(&text, field_t)?
            }
        }
        (None, Some(name)) => name.parse::<Fixture>()?.environment(field_t)?,
        (None, None) => {
            return Err(Error::Validation("no environment given: pass --env <file> or --fixture <table>".into()))
        }
    };
    set_polarizations(env, &cfg.polarization)
}

fn config_echo(cfg: &RunConfig) -> Result<Value> {
    Ok(serde_json::to_value(cfg)?)
}

fn degeneracy(cfg: &RunConfig, env: &EnvironmentRealization, field_t: f64, warnings: &mut Vec<String>) -> Result<()> {
    let idx = degenerate_spins(env, &cfg.constants, field_t)?;
    warnings.extend(degeneracy_warning(&idx, field_t));
    Ok(())
}

fn finish(cfg: &RunConfig, files: Vec<PathBuf>, warnings: Vec<String>) -> Outcome {
    let status = if cfg.strict && !warnings.iter().all(|w| w.starts_with("high-field")) {
        Status::Degenerate
    } else {
        Status::Ok
    };
    Outcome { files, warnings, status }
}

pub fn cmd_generate(cfg: &RunConfig) -> Result<Outcome> {
    let dir = out_dir(cfg);
    let sites = generate_sites(&cfg.lattice)?;
    let env = select_environment(&sites, &cfg.constants, &cfg.lattice, cfg.fields_t[0])?;
    let env = set_polarizations(env, &cfg.polarization)?;
    let csv_path = dir.join("environment.csv");
    let json_path = dir.join("environment.json");
    let manifest = dir.join("generate_manifest.json");
    write_atomic(&csv_path, env_to_csv(&env).as_bytes())?;
    write_atomic(&json_path, env_to_json(&env)?.as_bytes())?;
    let positions: Vec<Value> = env
        .spins
        .iter()
        .map(|s| json!(s.position.map(|p| p.as_array())))
        .collect();
    write_atomic(
        &manifest,
        to_json_string(json!({
            "sites_drawn": sites.len(),
            "spins_kept": env.len(),
            "positions_nm": positions,
            "constants": cfg.constants,
            "config": config_echo(cfg)?,
        }))?
        .as_bytes(),
    )?;
    Ok(finish(cfg, vec![csv_path, json_path, manifest], Vec::new()))
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<Outcome> {
    let field_t = cfg.fields_t[0];
    let env = load_environment(cfg, field_t)?;
    let mut warnings = Vec::new();
    degeneracy(cfg, &env, field_t, &mut warnings)?;
    let grid = grid_for(&env, &cfg.constants, cfg.grid.kind, cfg.grid.t_max_us, cfg.grid.dt_us)?;
    let series = sample_series(&env, &cfg.constants, &grid, cfg.grid.include_free_phase)?;
    let path = out_dir(cfg).join("series.csv");
    write_series(&path, &series, &cfg.constants, config_echo(cfg)?)?;
    Ok(finish(cfg, vec![path.clone(), crate::io::sidecar_path(&path)], warnings))
}

pub fn cmd_estimate(
    cfg: &RunConfig,
    series_path: Option<&Path>,
    n_flag: Option<usize>,
    calibration_path: Option<&Path>,
    auto_calibrate: bool,
) -> Result<Outcome> {
    let dir = out_dir(cfg);
    let n_requested = n_flag.or(cfg.n_spins);
    let mut warnings = Vec::new();
    let mut files = Vec::new();

    let (series, env) = match series_path.or(cfg.io.series.as_deref()) {
        Some(path) => {
            let (series, _) = read_series(path)?;
            let series = match cfg.horizon_us {
                Some(h) => series.truncated(h),
                None => series,
            };
            (series, None)
        }
        None => {
            let field_t = cfg.fields_t[0];
            let env = load_environment(cfg, field_t)?;
            degeneracy(cfg, &env, field_t, &mut warnings)?;
            let horizon = cfg.horizon_us.unwrap_or(HEADLINE_HORIZON_US);
            let grid = grid_for(&env, &cfg.constants, cfg.grid.kind, horizon, cfg.grid.dt_us)?;
            (sample_series(&env, &cfg.constants, &grid, false)?, Some(env))
        }
    };
    let n = match n_requested {
        Some(n) if n != series.n_spins => {
            return Err(Error::Validation(format!(
                "N = {n} does not match the {} spins of the environment",
                series.n_spins
            )))
        }
        _ => series.n_spins,
    };

    let estimate = match series.grid.kind {
        GridKind::TPrime => {
            if series.unpolarized {
                let cal = calibrate_amplitudes(&series)?;
                let path = dir.join("calibration.json");
                write_atomic(&path, calibration_to_json(&cal)?.as_bytes())?;
                files.push(path);
            }
            estimate_from_prime(&series, n)?
        }
        GridKind::TDoublePrime => {
            let calibration: Option<AmplitudeCalibration> = match (calibration_path.or(cfg.io.calibration.as_deref()), &env) {
                (Some(path), _) => Some(calibration_from_json(&fs::read_to_string(path)?)?),
                (None, Some(env)) if auto_calibrate => {
                    let unpolarized = set_polarizations(env.clone(), &crate::lattice::PolarizationSpec::Uniform(0.0))?;
                    let grid = grid_for(&unpolarized, &cfg.constants, GridKind::TPrime, cfg.grid.t_max_us, None)?;
                    Some(calibrate_amplitudes(&sample_series(&unpolarized, &cfg.constants, &grid, false)?)?)
                }
                (None, None) if auto_calibrate => {
                    return Err(Error::Validation("--auto-calibrate needs an environment, not a series file".into()))
                }
                _ => None,
            };
            estimate_from_doubleprime(&series, n, calibration.as_ref())?
        }
        GridKind::Continuous => {
            return Err(Error::Contract("estimation needs a t′ or t″ series, got a continuous one".into()))
        }
    };
    warnings.extend(estimate.warnings.iter().cloned());
    write_estimate(&dir, "estimate", &estimate, &cfg.constants, config_echo(cfg)?)?;
    files.push(dir.join("estimate.json"));
    files.push(dir.join("estimate_staircase.csv"));
    Ok(finish(cfg, files, warnings))
}

pub fn cmd_sweep(cfg: &RunConfig) -> Result<Outcome> {
    let dir = out_dir(cfg);
    let env = load_environment(cfg, cfg.fields_t[0])?;
    let horizon = cfg.horizon_us.unwrap_or(cfg.grid.t_max_us);
    let estimates = sweep(&env, &cfg.constants, &cfg.fields_t, &cfg.polarization, horizon)?;
    let mut files = Vec::new();
    let mut warnings = Vec::new();
    let mut summary = Vec::new();
    for est in &estimates {
        let stem = format!("sweep_B{}", fmt_num(est.field_t));
        write_estimate(&dir, &stem, est, &cfg.constants, config_echo(cfg)?)?;
        files.push(dir.join(format!("{stem}.json")));
        files.push(dir.join(format!("{stem}_staircase.csv")));
        warnings.extend(est.warnings.iter().cloned());
        summary.push(json!({"B_z": est.field_t, "p_bar": est.p_bar, "product_bound": est.product_bound}));
    }
    let path = dir.join("sweep.json");
    write_atomic(
        &path,
        to_json_string(json!({"horizon_us": horizon, "estimates": summary, "config": config_echo(cfg)?}))?.as_bytes(),
    )?;
    files.push(path);
    Ok(finish(cfg, files, warnings))
}

pub fn cmd_reproduce(cfg: &RunConfig, target: &str, tmax_flag: Option<f64>) -> Result<Outcome> {
    let target: Target = target.parse()?;
    let files = reproduce(target, &out_dir(cfg), &cfg.constants, tmax_flag, &config_echo(cfg)?)?;
    Ok(finish(cfg, files, Vec::new()))
}

pub fn cmd_verify(cfg: &RunConfig, cases: Option<usize>) -> Result<Outcome> {
    let mut battery = BatteryConfig::default();
    if let Some(seed) = cfg.seed {
        battery.seed = seed;
    }
    if let Some(cases) = cases {
        battery.single_spin_cases = cases;
    }
    let report = verify_closed_forms(&battery)?;
    let path = out_dir(cfg).join("verify.json");
    write_atomic(&path, to_json_string(serde_json::to_value(&report)?)?.as_bytes())?;
    let status = if report.passed { Status::Ok } else { Status::VerificationFailed };
    Ok(Outcome { files: vec![path], warnings: Vec::new(), status })
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    let cfg = resolve_config(&cli.common)?;
    match &cli.command {
        Command::Generate => cmd_generate(&cfg),
        Command::Simulate => cmd_simulate(&cfg),
        Command::Estimate { series, n, calibration, auto_calibrate } => {
            cmd_estimate(&cfg, series.as_deref(), *n, calibration.as_deref(), *auto_calibrate)
        }
        Command::Sweep => cmd_sweep(&cfg),
        Command::Reproduce { target } => cmd_reproduce(&cfg, target, cli.common.tmax_us),
        Command::Verify { cases } => cmd_verify(&cfg, *cases),
    }
}
