//! Deterministic bundles for the published figures and the headline estimate.
//!
//! | target   | environment   | field      | polarizations | grid / horizon              |
//! |----------|---------------|------------|---------------|-----------------------------|
//! | fig1     | table1        | 1 T        | 0.8, 0.6      | t′ to 250 μs                |
//! | fig2     | table1        | 1 T        | 0.8           | t′ to 50 μs + smooth curve  |
//! | fig3     | table1        | 0.25–5 T   | 0.8           | t′ staircases to 1600 μs    |
//! | fig4..6  | table2..4     | 3 T        | 0.8, 0.6      | t′ to 250 μs                |
//! | headline | table1        | 1 T        | 0.8           | t′ estimate at 219 μs       |

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde_json::{json, Value};

use crate::coherence::{
    build_grid, dressed_spins, grid_for, prime_envelope, sample_series, CoherenceSeries, GridKind,
    DEFAULT_T_MAX_US,
};
use crate::error::{Error, Result};
use crate::estimator::{estimate_from_prime, sweep, PolarizationEstimate, HEADLINE_HORIZON_US};
use crate::fixtures::{verify_fixtures, Fixture};
use crate::hyperfine::PhysicalConstants;
use crate::io::{fmt_num, to_json_string, write_atomic, write_estimate, write_series};
use crate::lattice::{set_polarizations, EnvironmentRealization, PolarizationSpec};

pub const FIG1_T_MAX_US: f64 = 250.0;
pub const FIG2_T_MAX_US: f64 = 50.0;
pub const FIG2_DT_US: f64 = 0.005;
pub const FIG3_FIELDS_T: [f64; 4] = [0.25, 0.75, 1.0, 5.0];
pub const APPENDIX_FIELD_T: f64 = 3.0;
pub const FIGURE_POLARIZATIONS: [f64; 2] = [0.8, 0.6];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Fig6,
    Headline,
    All,
}

impl Target {
    pub const EACH: [Target; 7] = [
        Target::Fig1,
        Target::Fig2,
        Target::Fig3,
        Target::Fig4,
        Target::Fig5,
        Target::Fig6,
        Target::Headline,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Target::Fig1 => "fig1",
            Target::Fig2 => "fig2",
            Target::Fig3 => "fig3",
            Target::Fig4 => "fig4",
            Target::Fig5 => "fig5",
            Target::Fig6 => "fig6",
            Target::Headline => "headline",
            Target::All => "all",
        }
    }
}

impl FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Target::EACH
            .into_iter()
            .chain([Target::All])
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Validation(format!("unknown reproduce target `{s}`")))
    }
}

/// ½·p^N, the coherence floor for a uniformly polarized bath.
pub fn uniform_floor(p: f64, n: usize) -> f64 {
    0.5 * p.abs().powi(n as i32)
}

pub fn polarized(fixture: Fixture, field_t: f64, p: f64) -> Result<EnvironmentRealization> {
    set_polarizations(fixture.environment(field_t)?, &PolarizationSpec::Uniform(p))
}

/// t′ series of a bundled table at one field and uniform polarization.
pub fn prime_series(
    fixture: Fixture,
    field_t: f64,
    p: f64,
    t_max_us: f64,
    constants: &PhysicalConstants,
) -> Result<CoherenceSeries> {
    let env = polarized(fixture, field_t, p)?;
    let grid = grid_for(&env, constants, GridKind::TPrime, t_max_us, None)?;
    sample_series(&env, constants, &grid, false)
}

/// The smooth ½∏|L_k(t′)| curve on a fine continuous grid.
pub fn envelope_curve(
    env: &EnvironmentRealization,
    constants: &PhysicalConstants,
    t_max_us: f64,
    dt_us: f64,
) -> Result<Vec<(f64, f64)>> {
    let (omega, spins) = dressed_spins(env, constants)?;
    let grid = build_grid(GridKind::Continuous, omega, t_max_us, Some(dt_us))?;
    Ok(grid.times().into_iter().map(|t| (t, prime_envelope(t, &spins))).collect())
}

pub fn headline_estimate(constants: &PhysicalConstants, horizon_us: f64) -> Result<PolarizationEstimate> {
    let series = prime_series(Fixture::Table1, 1.0, 0.8, horizon_us, constants)?;
    estimate_from_prime(&series, series.n_spins)
}

fn write_manifest(dir: &Path, target: Target, body: Value, files: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(format!("{}_manifest.json", target.name()));
    write_atomic(&path, to_json_string(body)?.as_bytes())?;
    files.push(path);
    Ok(())
}

fn figure_pair(
    dir: &Path,
    target: Target,
    fixture: Fixture,
    field_t: f64,
    t_max_us: f64,
    constants: &PhysicalConstants,
    config: &Value,
    files: &mut Vec<PathBuf>,
) -> Result<()> {
    let mut floors = serde_json::Map::new();
    let mut minima = serde_json::Map::new();
    for p in FIGURE_POLARIZATIONS {
        let series = prime_series(fixture, field_t, p, t_max_us, constants)?;
        let path = dir.join(format!("{}_p{}.csv", target.name(), fmt_num(p)));
        write_series(&path, &series, constants, config.clone())?;
        files.push(path);
        floors.insert(fmt_num(p), json!(uniform_floor(p, series.n_spins)));
        minima.insert(fmt_num(p), json!(series.min_abs()));
    }
    write_manifest(
        dir,
        target,
        json!({
            "target": target.name(),
            "fixture": fixture.name(),
            "B_z_T": field_t,
            "grid_kind": "t_prime",
            "t_max_us": t_max_us,
            "floors": floors,
            "min_abs": minima,
            "constants": constants,
            "config": config,
        }),
        files,
    )
}

/// Writes the bundle for `target` into `dir` and returns the files written.
pub fn reproduce(
    target: Target,
    dir: &Path,
    constants: &PhysicalConstants,
    t_max_override: Option<f64>,
    config: &Value,
) -> Result<Vec<PathBuf>> {
    verify_fixtures()?;
    let mut files = Vec::new();
    match target {
        Target::All => {
            for t in Target::EACH {
                files.extend(reproduce(t, dir, constants, t_max_override, config)?);
            }
        }
        Target::Fig1 => figure_pair(
            dir,
            target,
            Fixture::Table1,
            1.0,
            t_max_override.unwrap_or(FIG1_T_MAX_US),
            constants,
            config,
            &mut files,
        )?,
        Target::Fig4 | Target::Fig5 | Target::Fig6 => {
            let fixture = match target {
                Target::Fig4 => Fixture::Table2,
                Target::Fig5 => Fixture::Table3,
                _ => Fixture::Table4,
            };
            figure_pair(
                dir,
                target,
                fixture,
                APPENDIX_FIELD_T,
                t_max_override.unwrap_or(FIG1_T_MAX_US),
                constants,
                config,
                &mut files,
            )?
        }
        Target::Fig2 => {
            let t_max = t_max_override.unwrap_or(FIG2_T_MAX_US);
            let series = prime_series(Fixture::Table1, 1.0, 0.8, t_max, constants)?;
            let discrete = dir.join("fig2_discrete.csv");
            write_series(&discrete, &series, constants, config.clone())?;
            files.push(discrete);
            let env = polarized(Fixture::Table1, 1.0, 0.8)?;
            let mut csv = String::from("t_us,abs_rho01_envelope\n");
            for (t, v) in envelope_curve(&env, constants, t_max, FIG2_DT_US)? {
                csv.push_str(&format!("{},{}\n", fmt_num(t), fmt_num(v)));
            }
            let curve = dir.join("fig2_envelope.csv");
            write_atomic(&curve, csv.as_bytes())?;
            files.push(curve);
            write_manifest(
                dir,
                target,
                json!({
                    "target": "fig2",
                    "fixture": "table1",
                    "B_z_T": 1.0,
                    "p": 0.8,
                    "t_max_us": t_max,
                    "envelope_dt_us": FIG2_DT_US,
                    "floor": uniform_floor(0.8, env.len()),
                    "constants": constants,
                    "config": config,
                }),
                &mut files,
            )?;
        }
        Target::Fig3 => {
            let horizon = t_max_override.unwrap_or(DEFAULT_T_MAX_US);
            let env = Fixture::Table1.environment(1.0)?;
            let estimates = sweep(&env, constants, &FIG3_FIELDS_T, &PolarizationSpec::Uniform(0.8), horizon)?;
            let mut summary = Vec::new();
            for est in &estimates {
                let stem = format!("fig3_B{}", fmt_num(est.field_t));
                write_estimate(dir, &stem, est, constants, config.clone())?;
                files.push(dir.join(format!("{stem}.json")));
                files.push(dir.join(format!("{stem}_staircase.csv")));
                summary.push(json!({
                    "B_z_T": est.field_t,
                    "p_bar": est.p_bar,
                    "product_bound": est.product_bound,
                    "steps": est.staircase.len(),
                }));
            }
            write_manifest(
                dir,
                target,
                json!({
                    "target": "fig3",
                    "fixture": "table1",
                    "p": 0.8,
                    "horizon_us": horizon,
                    "fields": summary,
                    "constants": constants,
                    "config": config,
                }),
                &mut files,
            )?;
        }
        Target::Headline => {
            let horizon = t_max_override.unwrap_or(HEADLINE_HORIZON_US);
            let est = headline_estimate(constants, horizon)?;
            write_estimate(dir, "headline", &est, constants, config.clone())?;
            files.push(dir.join("headline.json"));
            files.push(dir.join("headline_staircase.csv"));
        }
    }
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn targets_parse() {
        for t in Target::EACH {
            assert_eq!(t.name().parse::<Target>().unwrap(), t);
        }
        assert_eq!("all".parse::<Target>().unwrap(), Target::All);
        assert!("fig7".parse::<Target>().is_err());
    }

    #[test]
    fn floors_match_published_values() {
        assert!((uniform_floor(0.8, 8) - 8.39e-2).abs() < 5e-5);
        assert!((uniform_floor(0.6, 8) - 8.40e-3).abs() < 5e-6);
    }

    #[test]
    fn envelope_matches_discrete_series_on_grid() {
        let c = PhysicalConstants::default();
        let series = prime_series(Fixture::Table1, 1.0, 0.8, 20.0, &c).unwrap();
        let env = polarized(Fixture::Table1, 1.0, 0.8).unwrap();
        let (_, spins) = dressed_spins(&env, &c).unwrap();
        for s in &series.samples {
            assert!((prime_envelope(s.t_us, &spins) - s.abs).abs() < 1e-12);
        }
    }
}
