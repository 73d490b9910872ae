//! File formats: environment CSV/JSON, coherence series CSV with a JSON
//! sidecar, estimate reports and staircase CSVs.
//!
//! Every float written by this module carries 9 significant digits.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::coherence::{CoherenceSample, CoherenceSeries, TimeGrid};
use crate::error::{Error, Result};
use crate::estimator::{AmplitudeCalibration, PolarizationEstimate};
use crate::hyperfine::{CouplingRow, PhysicalConstants};
use crate::lattice::{BathSpin, EnvironmentRealization};

pub const ENV_CSV_HEADER: &str = "k,r_nm,Azx_per_us,Azy_per_us,Azz_per_us,p";
pub const SERIES_CSV_HEADER: &str = "t_us,re_rho01,im_rho01,abs_rho01";
pub const STAIRCASE_CSV_HEADER: &str = "t_us,min_abs,p_bar_running";

/// Formats like C's `%.9g`.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Rounds to the value [`fmt_num`] would print.
pub fn round_sig(x: f64) -> f64 {
    if x.is_finite() {
        fmt_num(x).parse().unwrap_or(x)
    } else {
        x
    }
}

/// Rounds every float inside a JSON value to 9 significant digits.
pub fn normalize_numbers(value: Value) -> Value {
    match value {
        Value::Number(n) if n.is_f64() => {
            let x = round_sig(n.as_f64().unwrap_or(0.0));
            serde_json::Number::from_f64(x).map(Value::Number).unwrap_or(Value::Null)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(normalize_numbers).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, normalize_numbers(v))).collect()),
        other => other,
    }
}

pub fn to_json_string(value: Value) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&normalize_numbers(value))?;
    s.push('\n');
    Ok(s)
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)?;
    tmp.write_all(contents)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// One row of the environment table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvRow {
    pub k: usize,
    pub r_nm: Option<f64>,
    #[serde(rename = "Azx_per_us")]
    pub azx: f64,
    #[serde(rename = "Azy_per_us")]
    pub azy: f64,
    #[serde(rename = "Azz_per_us")]
    pub azz: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvJson {
    #[serde(rename = "B_z_T")]
    pub field_t: f64,
    pub spins: Vec<EnvRow>,
}

fn env_rows(env: &EnvironmentRealization) -> Vec<EnvRow> {
    env.spins
        .iter()
        .enumerate()
        .map(|(i, s)| EnvRow {
            k: i + 1,
            r_nm: s.coupling.r_nm,
            azx: s.coupling.azx,
            azy: s.coupling.azy,
            azz: s.coupling.azz,
            p: s.polarization,
        })
        .collect()
}

fn env_from_rows(rows: Vec<EnvRow>, field_t: f64) -> Result<EnvironmentRealization> {
    let spins = rows
        .into_iter()
        .map(|r| BathSpin {
            position: None,
            coupling: CouplingRow { azx: r.azx, azy: r.azy, azz: r.azz, r_nm: r.r_nm },
            polarization: r.p,
        })
        .collect();
    EnvironmentRealization::new(spins, field_t)
}

pub fn env_to_csv(env: &EnvironmentRealization) -> String {
    let mut out = String::from(ENV_CSV_HEADER);
    out.push('\n');
    for row in env_rows(env) {
        let r = row.r_nm.map(fmt_num).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            row.k,
            r,
            fmt_num(row.azx),
            fmt_num(row.azy),
            fmt_num(row.azz),
            fmt_num(row.p)
        );
    }
    out
}

/// Parses an environment table; the field is supplied by the caller.
pub fn env_from_csv(text: &str, field_t: f64) -> Result<EnvironmentRealization> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers()?.iter().collect::<Vec<_>>().join(",");
    if headers != ENV_CSV_HEADER {
        return Err(Error::Validation(format!(
            "environment CSV header must be `{ENV_CSV_HEADER}`, got `{headers}`"
        )));
    }
    let rows = reader.deserialize().collect::<std::result::Result<Vec<EnvRow>, _>>()?;
    env_from_rows(rows, field_t)
}

pub fn env_to_json(env: &EnvironmentRealization) -> Result<String> {
    to_json_string(serde_json::to_value(EnvJson { field_t: env.field_t, spins: env_rows(env) })?)
}

pub fn env_from_json(text: &str) -> Result<EnvironmentRealization> {
    let parsed: EnvJson = serde_json::from_str(text)?;
    env_from_rows(parsed.spins, parsed.field_t)
}

/// Short stable hash of an environment's serialized form and field.
pub fn env_fingerprint(env: &EnvironmentRealization) -> String {
    let mut hasher = Sha256::new();
    hasher.update(env_to_csv(env).as_bytes());
    hasher.update(format!("B_z_T={}", fmt_num(env.field_t)).as_bytes());
    hex::encode(hasher.finalize())[..16].to_string()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn series_to_csv(series: &CoherenceSeries) -> String {
    let mut out = String::from(SERIES_CSV_HEADER);
    out.push('\n');
    for s in &series.samples {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            fmt_num(s.t_us),
            fmt_num(s.rho01.re),
            fmt_num(s.rho01.im),
            fmt_num(s.abs)
        );
    }
    out
}

/// Metadata stored next to a series CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesMeta {
    pub grid: TimeGrid,
    #[serde(rename = "B_z_T")]
    pub field_t: f64,
    #[serde(rename = "N")]
    pub n_spins: usize,
    pub unpolarized: bool,
    pub env_fingerprint: String,
    pub include_free_phase: bool,
    pub constants: PhysicalConstants,
    #[serde(default)]
    pub config: Value,
}

pub fn series_meta(series: &CoherenceSeries, constants: &PhysicalConstants, config: Value) -> SeriesMeta {
    SeriesMeta {
        grid: series.grid.clone(),
        field_t: series.field_t,
        n_spins: series.n_spins,
        unpolarized: series.unpolarized,
        env_fingerprint: series.env_fingerprint.clone(),
        include_free_phase: series.include_free_phase,
        constants: *constants,
        config,
    }
}

/// Sidecar path for a series CSV: `foo.csv` → `foo.json`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

pub fn write_series(
    csv_path: &Path,
    series: &CoherenceSeries,
    constants: &PhysicalConstants,
    config: Value,
) -> Result<()> {
    write_atomic(csv_path, series_to_csv(series).as_bytes())?;
    let meta = series_meta(series, constants, config);
    write_atomic(&sidecar_path(csv_path), to_json_string(serde_json::to_value(meta)?)?.as_bytes())
}

#[derive(Debug, Deserialize)]
struct SeriesRow {
    t_us: f64,
    re_rho01: f64,
    im_rho01: f64,
    abs_rho01: f64,
}

/// Reads a series CSV and its sidecar.
pub fn read_series(csv_path: &Path) -> Result<(CoherenceSeries, SeriesMeta)> {
    let meta: SeriesMeta = serde_json::from_str(&fs::read_to_string(sidecar_path(csv_path))?)?;
    let mut reader = csv::Reader::from_path(csv_path)?;
    let samples = reader
        .deserialize()
        .map(|row| {
            let row: SeriesRow = row?;
            Ok(CoherenceSample {
                t_us: row.t_us,
                rho01: Complex64::new(row.re_rho01, row.im_rho01),
                abs: row.abs_rho01,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let series = CoherenceSeries {
        grid: meta.grid.clone(),
        field_t: meta.field_t,
        n_spins: meta.n_spins,
        unpolarized: meta.unpolarized,
        env_fingerprint: meta.env_fingerprint.clone(),
        include_free_phase: meta.include_free_phase,
        samples,
    };
    Ok((series, meta))
}

pub fn estimate_report(
    estimate: &PolarizationEstimate,
    constants: &PhysicalConstants,
    config: Value,
) -> Value {
    json!({
        "B_z": estimate.field_t,
        "grid_kind": estimate.grid_kind.label(),
        "horizon_us": estimate.horizon_us,
        "N": estimate.n_spins,
        "product_bound": estimate.product_bound,
        "p_bar": estimate.p_bar,
        "weighted_bound": estimate.weighted_bound,
        "calibration": estimate.calibration,
        "high_field_assumption": estimate.high_field_assumption,
        "staircase": estimate.staircase.iter().map(|s| [s.t_us, s.min_abs]).collect::<Vec<_>>(),
        "warnings": estimate.warnings,
        "constants": constants,
        "config": config,
    })
}

pub fn staircase_to_csv(estimate: &PolarizationEstimate) -> String {
    let mut out = String::from(STAIRCASE_CSV_HEADER);
    out.push('\n');
    for (step, p_bar) in estimate.staircase.iter().zip(estimate.running_p_bar()) {
        let _ = writeln!(out, "{},{},{}", fmt_num(step.t_us), fmt_num(step.min_abs), fmt_num(p_bar));
    }
    out
}

pub fn write_estimate(
    dir: &Path,
    stem: &str,
    estimate: &PolarizationEstimate,
    constants: &PhysicalConstants,
    config: Value,
) -> Result<()> {
    let report = estimate_report(estimate, constants, config);
    write_atomic(&dir.join(format!("{stem}.json")), to_json_string(report)?.as_bytes())?;
    write_atomic(&dir.join(format!("{stem}_staircase.csv")), staircase_to_csv(estimate).as_bytes())
}

pub fn calibration_to_json(cal: &AmplitudeCalibration) -> Result<String> {
    to_json_string(serde_json::to_value(cal)?)
}

pub fn calibration_from_json(text: &str) -> Result<AmplitudeCalibration> {
    Ok(serde_json::from_str(text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format() {
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(0.5), "0.5");
        assert_eq!(fmt_num(-0.017784), "-0.017784");
        assert_eq!(fmt_num(1600.0), "1600");
        assert_eq!(fmt_num(1.0 / 3.0), "0.333333333");
        assert_eq!(fmt_num(123456789.4), "123456789");
        assert_eq!(fmt_num(1.5e-7), "1.5e-7");
        assert_eq!(fmt_num(9.9999999999), "10");
        assert_eq!(fmt_num(2.0e12), "2e12");
    }

    #[test]
    fn env_csv_header_enforced() {
        let bad = "k,r,Azx,Azy,Azz,p\n1,1,0,0,0,0\n";
        assert!(matches!(env_from_csv(bad, 1.0), Err(Error::Validation(_))));
    }

    #[test]
    fn env_csv_missing_distance() {
        let text = format!("{ENV_CSV_HEADER}\n1,,0.1,0.2,0.3,0.5\n");
        let env = env_from_csv(&text, 1.0).unwrap();
        assert_eq!(env.spins[0].coupling.r_nm, None);
        assert_eq!(env_to_csv(&env), text);
    }

    #[test]
    fn env_csv_rejects_bad_polarization() {
        let text = format!("{ENV_CSV_HEADER}\n1,1.0,0.1,0.2,0.3,1.5\n");
        assert!(matches!(env_from_csv(&text, 1.0), Err(Error::InvalidAt { index: 0, .. })));
    }

    #[test]
    fn json_rejects_unknown_keys() {
        let text = r#"{"B_z_T": 1.0, "spins": [], "extra": 1}"#;
        assert!(env_from_json(text).is_err());
    }

    #[test]
    fn fingerprint_tracks_content() {
        let env = EnvironmentRealization::from_rows(vec![CouplingRow::new(0.1, 0.2, 0.3)], 1.0).unwrap();
        let a = env_fingerprint(&env);
        assert_eq!(a, env_fingerprint(&env.clone()));
        assert_ne!(a, env_fingerprint(&env.clone().with_field(2.0)));
    }
}
