//! Closed-form qubit coherence under pure dephasing and its samplings on
//! field-locked time grids.
//!
//! On the t′ grid (cos(ωt/2) = 0) each factor reduces to
//! ±a_k sin(ω_k t/2) ∓ i p_k cos(ω_k t/2); on the t″ grid (sin(ωt/2) = 0)
//! to ±cos(ω_k t/2) ± i a_k p_k sin(ω_k t/2).

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hyperfine::{dress, larmor_frequency, DressedSpin, PhysicalConstants};
use crate::io::env_fingerprint;
use crate::lattice::EnvironmentRealization;

/// Default evolution horizon, μs.
pub const DEFAULT_T_MAX_US: f64 = 1600.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    Continuous,
    TPrime,
    #[serde(rename = "t_doubleprime")]
    TDoublePrime,
}

impl GridKind {
    pub fn is_discrete(self) -> bool {
        !matches!(self, GridKind::Continuous)
    }

    pub fn label(self) -> &'static str {
        match self {
            GridKind::Continuous => "continuous",
            GridKind::TPrime => "t_prime",
            GridKind::TDoublePrime => "t_doubleprime",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub kind: GridKind,
    /// Bath Larmor frequency the grid is locked to, rad/μs.
    pub omega: f64,
    pub t_max_us: f64,
    /// Step of the continuous grid, μs.
    pub dt_us: Option<f64>,
    pub n_start: u64,
}

impl TimeGrid {
    pub fn period(&self) -> f64 {
        TAU / self.omega
    }

    /// Time of grid index n.
    pub fn time_at(&self, n: u64) -> f64 {
        let n = n as f64;
        match self.kind {
            GridKind::TPrime => self.period() * (n + 0.5),
            GridKind::TDoublePrime => self.period() * n,
            GridKind::Continuous => self.dt_us.unwrap_or(0.0) * n,
        }
    }

    pub fn times(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut n = self.n_start;
        loop {
            let t = self.time_at(n);
            if t > self.t_max_us {
                break;
            }
            out.push(t);
            n += 1;
        }
        out
    }
}

pub fn build_grid(kind: GridKind, omega: f64, t_max_us: f64, dt_us: Option<f64>) -> Result<TimeGrid> {
    if !(omega.is_finite() && omega > 0.0) {
        return Err(Error::Domain(format!("grid needs omega > 0, got {omega}")));
    }
    if !(t_max_us.is_finite() && t_max_us > 0.0) {
        return Err(Error::Domain(format!("grid needs t_max > 0, got {t_max_us}")));
    }
    let dt_us = match kind {
        GridKind::Continuous => match dt_us {
            Some(dt) if dt.is_finite() && dt > 0.0 => Some(dt),
            other => {
                return Err(Error::Domain(format!(
                    "continuous grid needs a positive dt, got {other:?}"
                )))
            }
        },
        _ => None,
    };
    Ok(TimeGrid { kind, omega, t_max_us, dt_us, n_start: 0 })
}

/// L_k(t) for one nucleus.
pub fn single_spin_factor(t: f64, spin: &DressedSpin, omega: f64) -> Complex64 {
    let (s, c) = (omega * t * 0.5).sin_cos();
    let (sk, ck) = (spin.omega_k * t * 0.5).sin_cos();
    let re = spin.a_k * s * sk + c * ck;
    let im = spin.p_k * (spin.a_k * c * sk - s * ck);
    Complex64::new(re, im)
}

/// Dresses every spin of `env` at the environment's field. Returns ω and the spins.
pub fn dressed_spins(
    env: &EnvironmentRealization,
    constants: &PhysicalConstants,
) -> Result<(f64, Vec<DressedSpin>)> {
    env.validate()?;
    let omega = larmor_frequency(env.field_t, constants)?;
    let spins = env
        .spins
        .iter()
        .enumerate()
        .map(|(index, spin)| {
            dress(&spin.coupling, spin.polarization, omega).map_err(|e| match e {
                Error::DegenerateSpin { .. } => Error::DegenerateSpin { index },
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((omega, spins))
}

fn free_phase(t: f64, field_t: f64, constants: &PhysicalConstants) -> Complex64 {
    Complex64::from_polar(1.0, -constants.qubit_phase_rate(field_t) * t)
}

fn product_coherence(
    t: f64,
    omega: f64,
    spins: &[DressedSpin],
    phase: Option<Complex64>,
) -> Complex64 {
    let product = spins
        .iter()
        .fold(Complex64::new(1.0, 0.0), |acc, spin| acc * single_spin_factor(t, spin, omega));
    0.5 * phase.unwrap_or(Complex64::new(1.0, 0.0)) * product
}

/// ρ01(t) = ½·phase·∏ L_k(t).
pub fn coherence(
    t: f64,
    env: &EnvironmentRealization,
    constants: &PhysicalConstants,
    include_free_phase: bool,
) -> Result<Complex64> {
    let (omega, spins) = dressed_spins(env, constants)?;
    let phase = include_free_phase.then(|| free_phase(t, env.field_t, constants));
    Ok(product_coherence(t, omega, &spins, phase))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherenceSample {
    pub t_us: f64,
    pub rho01: Complex64,
    pub abs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceSeries {
    pub grid: TimeGrid,
    pub field_t: f64,
    pub n_spins: usize,
    /// True when every initial polarization of the source environment is zero.
    pub unpolarized: bool,
    pub env_fingerprint: String,
    pub include_free_phase: bool,
    pub samples: Vec<CoherenceSample>,
}

impl CoherenceSeries {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn min_abs(&self) -> Option<f64> {
        self.samples.iter().map(|s| s.abs).reduce(f64::min)
    }

    pub fn max_abs(&self) -> Option<f64> {
        self.samples.iter().map(|s| s.abs).reduce(f64::max)
    }

    /// Samples with t ≤ horizon.
    pub fn truncated(&self, horizon_us: f64) -> CoherenceSeries {
        let mut out = self.clone();
        out.samples.retain(|s| s.t_us <= horizon_us);
        out.grid.t_max_us = horizon_us.min(self.grid.t_max_us);
        out
    }
}

/// Evaluates the coherence at every time of `grid`.
pub fn sample_series(
    env: &EnvironmentRealization,
    constants: &PhysicalConstants,
    grid: &TimeGrid,
    include_free_phase: bool,
) -> Result<CoherenceSeries> {
    let (omega, spins) = dressed_spins(env, constants)?;
    if grid.kind.is_discrete() && ((grid.omega - omega) / omega).abs() > 1e-12 {
        return Err(Error::Contract(format!(
            "grid locked to omega = {} but the environment field gives {}",
            grid.omega, omega
        )));
    }
    let samples = grid
        .times()
        .into_iter()
        .map(|t| {
            let phase = include_free_phase.then(|| free_phase(t, env.field_t, constants));
            let rho01 = product_coherence(t, omega, &spins, phase);
            CoherenceSample { t_us: t, rho01, abs: rho01.norm() }
        })
        .collect();
    Ok(CoherenceSeries {
        grid: grid.clone(),
        field_t: env.field_t,
        n_spins: env.len(),
        unpolarized: env.is_unpolarized(),
        env_fingerprint: env_fingerprint(env),
        include_free_phase,
        samples,
    })
}

/// Convenience: the grid of `kind` locked to the environment's own field.
pub fn grid_for(
    env: &EnvironmentRealization,
    constants: &PhysicalConstants,
    kind: GridKind,
    t_max_us: f64,
    dt_us: Option<f64>,
) -> Result<TimeGrid> {
    build_grid(kind, larmor_frequency(env.field_t, constants)?, t_max_us, dt_us)
}

/// |L_k(t′)| = [(a_k² − p_k²) sin²(ω_k t′/2) + p_k²]^½.
pub fn abs_factor_prime(spin: &DressedSpin, t_prime: f64) -> f64 {
    let s = (spin.omega_k * t_prime * 0.5).sin();
    let a2 = spin.a_k * spin.a_k;
    let p2 = spin.p_k * spin.p_k;
    ((a2 - p2) * s * s + p2).max(0.0).sqrt()
}

/// |L_k(t″)| = [(1 − a_k² p_k²) cos²(ω_k t″/2) + a_k² p_k²]^½.
pub fn abs_factor_doubleprime(spin: &DressedSpin, t_doubleprime: f64) -> f64 {
    let c = (spin.omega_k * t_doubleprime * 0.5).cos();
    let ap2 = (spin.a_k * spin.p_k).powi(2);
    ((1.0 - ap2) * c * c + ap2).max(0.0).sqrt()
}

/// The smooth curve ½∏|L_k| with the t′ reduction applied at every t; it
/// coincides with |ρ01| on the t′ grid.
pub fn prime_envelope(t: f64, spins: &[DressedSpin]) -> f64 {
    0.5 * spins.iter().map(|s| abs_factor_prime(s, t)).product::<f64>()
}
