//! Run configuration: a JSON document whose sections mirror the library
//! types. Unknown keys are rejected; command-line flags override values.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::coherence::{GridKind, DEFAULT_T_MAX_US};
use crate::error::{Error, Result};
use crate::hyperfine::PhysicalConstants;
use crate::lattice::{LatticeConfig, PolarizationSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub kind: GridKind,
    pub t_max_us: f64,
    pub dt_us: Option<f64>,
    pub include_free_phase: bool,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { kind: GridKind::TPrime, t_max_us: DEFAULT_T_MAX_US, dt_us: None, include_free_phase: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct IoSpec {
    /// Environment CSV or JSON file.
    pub env: Option<PathBuf>,
    /// Bundled table name, used when `env` is absent.
    pub fixture: Option<String>,
    /// Input series CSV for `estimate`.
    pub series: Option<PathBuf>,
    /// Amplitude calibration JSON for t″ estimates.
    pub calibration: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub constants: PhysicalConstants,
    pub lattice: LatticeConfig,
    pub fields_t: Vec<f64>,
    pub polarization: PolarizationSpec,
    pub grid: GridSpec,
    /// Estimation horizon, μs. Unset means 219 μs for estimates computed
    /// from an environment and the whole series for estimates read from file.
    pub horizon_us: Option<f64>,
    /// Spin count used for p̄; defaults to the environment's.
    pub n_spins: Option<usize>,
    pub io: IoSpec,
    pub seed: Option<u64>,
    pub strict: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            constants: PhysicalConstants::default(),
            lattice: LatticeConfig::default(),
            fields_t: vec![1.0],
            polarization: PolarizationSpec::Uniform(0.0),
            grid: GridSpec::default(),
            horizon_us: None,
            n_spins: None,
            io: IoSpec::default(),
            seed: None,
            strict: false,
        }
    }
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Validation(format!("config {}: {e}", path.display())))
    }

    /// Seed actually used for lattice generation.
    pub fn effective_seed(&self) -> u64 {
        self.seed.unwrap_or(self.lattice.seed)
    }

    pub fn validate(&self) -> Result<()> {
        self.constants.validate()?;
        self.lattice.validate()?;
        if self.fields_t.is_empty() {
            return Err(Error::Validation("at least one field is required".into()));
        }
        for (index, &b) in self.fields_t.iter().enumerate() {
            if !(b.is_finite() && b > 0.0) {
                return Err(Error::InvalidAt { index, message: format!("field {b} T must be positive") });
            }
        }
        match &self.polarization {
            PolarizationSpec::Uniform(p) if !(p.abs() <= 1.0) => {
                return Err(Error::Validation(format!("polarization {p} outside [-1, 1]")))
            }
            PolarizationSpec::PerSpin(list) => {
                if let Some(index) = list.iter().position(|p| !(p.abs() <= 1.0)) {
                    return Err(Error::InvalidAt { index, message: format!("polarization {} outside [-1, 1]", list[index]) });
                }
            }
            _ => {}
        }
        if !(self.grid.t_max_us.is_finite() && self.grid.t_max_us > 0.0) {
            return Err(Error::Validation(format!("t_max_us must be positive, got {}", self.grid.t_max_us)));
        }
        if self.grid.kind == GridKind::Continuous && !self.grid.dt_us.is_some_and(|dt| dt > 0.0) {
            return Err(Error::Validation("continuous grid needs a positive dt_us".into()));
        }
        if let Some(h) = self.horizon_us {
            if !(h.is_finite() && h > 0.0) {
                return Err(Error::Validation(format!("horizon_us must be positive, got {h}")));
            }
        }
        if self.n_spins == Some(0) {
            return Err(Error::Validation("n_spins must be at least 1".into()));
        }
        Ok(())
    }
}

/// Parses `0.8` as a uniform value and `0.8,0.7,...` as a per-spin list.
pub fn parse_polarization(text: &str) -> Result<PolarizationSpec> {
    let values = text
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|e| Error::Validation(format!("bad polarization `{s}`: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    Ok(match values.as_slice() {
        [single] => PolarizationSpec::Uniform(*single),
        _ => PolarizationSpec::PerSpin(values),
    })
}
