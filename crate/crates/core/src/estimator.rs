//! Polarization-product bounds from discretely sampled coherence.
//!
//! On t′ samples, 2·min|ρ01| bounds ∏|p_k| from above once every |a_k| ≥ |p_k|.
//! On t″ samples, 2·min|ρ01| bounds ∏|a_k||p_k| with no field condition; the
//! amplitude product is removed either by assuming it is 1 (high field) or by
//! dividing by a lower bound measured on an unpolarized t′ run at the same field.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coherence::{grid_for, sample_series, CoherenceSeries, GridKind};
use crate::error::{Error, Result};
use crate::hyperfine::{amplitude, larmor_frequency, PhysicalConstants};
use crate::lattice::{set_polarizations, EnvironmentRealization, PolarizationSpec};

/// |a_k| below this is reported as a degenerate (near-cancelled) spin.
pub const DEGENERATE_AMPLITUDE: f64 = 1e-3;

/// Headline horizon, μs.
pub const HEADLINE_HORIZON_US: f64 = 219.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StairStep {
    pub t_us: f64,
    pub min_abs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarizationEstimate {
    pub field_t: f64,
    pub grid_kind: GridKind,
    pub horizon_us: f64,
    pub n_spins: usize,
    /// Upper bound on ∏|p_k|.
    pub product_bound: f64,
    /// product_bound^(1/N).
    pub p_bar: f64,
    /// 2·min|ρ01(t″)| before de-weighting; t″ estimates only.
    pub weighted_bound: Option<f64>,
    /// Amplitude-product value divided out; t″ estimates only.
    pub calibration: Option<f64>,
    /// Set when the amplitude product was assumed to be 1.
    pub high_field_assumption: bool,
    pub staircase: Vec<StairStep>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl PolarizationEstimate {
    /// p̄ implied by each staircase step.
    pub fn running_p_bar(&self) -> Vec<f64> {
        let divisor = self.calibration.unwrap_or(1.0);
        self.staircase
            .iter()
            .map(|s| geometric_mean((2.0 * s.min_abs / divisor).min(1.0), self.n_spins))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeCalibration {
    /// 2·max|ρ01(t′)| of an unpolarized run; a lower bound on ∏|a_k|.
    pub amplitude_product_lower_bound: f64,
    pub field_t: f64,
    pub horizon_us: f64,
}

fn geometric_mean(product: f64, n: usize) -> f64 {
    product.max(0.0).powf(1.0 / n as f64)
}

fn require_discrete(series: &CoherenceSeries) -> Result<()> {
    if !series.grid.kind.is_discrete() {
        return Err(Error::Contract(
            "estimation is defined on the t′ and t″ grids only, not on continuous series".into(),
        ));
    }
    if series.is_empty() {
        return Err(Error::Contract("series has no samples".into()));
    }
    Ok(())
}

/// Running minimum of |ρ01|, emitted only at strict improvements.
pub fn running_min(series: &CoherenceSeries) -> Result<Vec<StairStep>> {
    require_discrete(series)?;
    let mut steps: Vec<StairStep> = Vec::new();
    for sample in &series.samples {
        match steps.last() {
            Some(last) if sample.abs >= last.min_abs => {}
            _ => steps.push(StairStep { t_us: sample.t_us, min_abs: sample.abs }),
        }
    }
    Ok(steps)
}

fn same_field(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

/// Bound and p̄ from a t′ series.
pub fn estimate_from_prime(series: &CoherenceSeries, n_spins: usize) -> Result<PolarizationEstimate> {
    if series.grid.kind != GridKind::TPrime {
        return Err(Error::Contract(format!(
            "t′ estimate given a {} series",
            series.grid.kind.label()
        )));
    }
    if n_spins == 0 {
        return Err(Error::Contract("spin count N must be at least 1".into()));
    }
    let staircase = running_min(series)?;
    let min_abs = staircase.last().map(|s| s.min_abs).unwrap_or(0.5);
    let product_bound = (2.0 * min_abs).min(1.0);
    Ok(PolarizationEstimate {
        field_t: series.field_t,
        grid_kind: GridKind::TPrime,
        horizon_us: series.grid.t_max_us,
        n_spins,
        product_bound,
        p_bar: geometric_mean(product_bound, n_spins),
        weighted_bound: None,
        calibration: None,
        high_field_assumption: false,
        staircase,
        warnings: Vec::new(),
    })
}

/// Lower bound on ∏|a_k| from an unpolarized t′ run.
pub fn calibrate_amplitudes(series: &CoherenceSeries) -> Result<AmplitudeCalibration> {
    if series.grid.kind != GridKind::TPrime {
        return Err(Error::Contract("amplitude calibration needs a t′ series".into()));
    }
    if !series.unpolarized {
        return Err(Error::Contract(
            "amplitude calibration needs an environment with every polarization zero".into(),
        ));
    }
    require_discrete(series)?;
    let max_abs = series.max_abs().unwrap_or(0.0);
    Ok(AmplitudeCalibration {
        amplitude_product_lower_bound: (2.0 * max_abs).min(1.0),
        field_t: series.field_t,
        horizon_us: series.grid.t_max_us,
    })
}

/// Bound and p̄ from a t″ series. `None` assumes ∏|a_k| = 1.
pub fn estimate_from_doubleprime(
    series: &CoherenceSeries,
    n_spins: usize,
    calibration: Option<&AmplitudeCalibration>,
) -> Result<PolarizationEstimate> {
    if series.grid.kind != GridKind::TDoublePrime {
        return Err(Error::Contract(format!(
            "t″ estimate given a {} series",
            series.grid.kind.label()
        )));
    }
    if n_spins == 0 {
        return Err(Error::Contract("spin count N must be at least 1".into()));
    }
    let divisor = match calibration {
        Some(cal) => {
            if !same_field(cal.field_t, series.field_t) {
                return Err(Error::Contract(format!(
                    "calibration taken at {} T but the series is at {} T",
                    cal.field_t, series.field_t
                )));
            }
            if !(cal.amplitude_product_lower_bound > 0.0) {
                return Err(Error::Domain(
                    "amplitude calibration is zero; cannot de-weight the t″ bound".into(),
                ));
            }
            cal.amplitude_product_lower_bound
        }
        None => 1.0,
    };
    let staircase = running_min(series)?;
    let min_abs = staircase.last().map(|s| s.min_abs).unwrap_or(0.5);
    let weighted_bound = (2.0 * min_abs).min(1.0);
    let mut warnings = Vec::new();
    let mut product_bound = weighted_bound / divisor;
    if product_bound > 1.0 {
        warnings.push(format!(
            "de-weighted bound {product_bound} exceeds 1; the calibration horizon is likely too short"
        ));
        product_bound = 1.0;
    }
    if calibration.is_none() {
        warnings.push("high-field assumption: amplitude product taken as 1".into());
    }
    Ok(PolarizationEstimate {
        field_t: series.field_t,
        grid_kind: GridKind::TDoublePrime,
        horizon_us: series.grid.t_max_us,
        n_spins,
        product_bound,
        p_bar: geometric_mean(product_bound, n_spins),
        weighted_bound: Some(weighted_bound),
        calibration: Some(divisor),
        high_field_assumption: calibration.is_none(),
        staircase,
        warnings,
    })
}

/// Indices of spins whose |a_k| at `field_t` falls below [`DEGENERATE_AMPLITUDE`].
pub fn degenerate_spins(
    env: &EnvironmentRealization,
    constants: &PhysicalConstants,
    field_t: f64,
) -> Result<Vec<usize>> {
    let omega = larmor_frequency(field_t, constants)?;
    Ok(env
        .spins
        .iter()
        .enumerate()
        .filter(|(_, s)| amplitude(&s.coupling, omega).map_or(true, |a| a.abs() < DEGENERATE_AMPLITUDE))
        .map(|(i, _)| i)
        .collect())
}

pub fn degeneracy_warning(indices: &[usize], field_t: f64) -> Option<String> {
    (!indices.is_empty()).then(|| {
        format!(
            "spins {indices:?} have |a_k| < {DEGENERATE_AMPLITUDE} at {field_t} T \
             (field cancels their Azz); a small change of the applied field rectifies this"
        )
    })
}

/// One t′ estimate per field, each on its own ω-locked grid.
pub fn sweep(
    env: &EnvironmentRealization,
    constants: &PhysicalConstants,
    fields_t: &[f64],
    polarization: &PolarizationSpec,
    horizon_us: f64,
) -> Result<Vec<PolarizationEstimate>> {
    if fields_t.is_empty() {
        return Err(Error::Validation("field sweep needs at least one field".into()));
    }
    let polarized = set_polarizations(env.clone(), polarization)?;
    fields_t
        .par_iter()
        .map(|&field_t| {
            let degenerate = degenerate_spins(&polarized, constants, field_t)?;
            let env_b = polarized.clone().with_field(field_t);
            let grid = grid_for(&env_b, constants, GridKind::TPrime, horizon_us, None)?;
            let series = sample_series(&env_b, constants, &grid, false)?;
            let mut estimate = estimate_from_prime(&series, env_b.len())?;
            estimate.warnings.extend(degeneracy_warning(&degenerate, field_t));
            Ok(estimate)
        })
        .collect()
}
