//! Secular dipolar hyperfine couplings and the per-nucleus dressed
//! parameters (effective precession frequency and amplitude) that enter the
//! conditional evolution of each bath spin.
//!
//! Units: frequencies in rad/μs, lengths in nm, fields in tesla.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// μ0/4π in T²·m³/J.
const MU0_OVER_4PI: f64 = 1.000_000_000_55e-7;
/// Free-electron gyromagnetic ratio in rad/(s·T).
const GAMMA_E_SI: f64 = 1.760_859_630_23e11;
/// ¹³C gyromagnetic ratio in rad/(s·T).
const GAMMA_C13_SI: f64 = 6.728_284e7;
/// Reduced Planck constant in J·s.
const HBAR_SI: f64 = 1.054_571_817e-34;

/// Dipolar prefactor (μ0/4π)·γe·γn·ħ converted to rad·nm³/μs (≈ 0.1249).
pub fn textbook_dipolar_prefactor() -> f64 {
    // m³/s -> nm³/μs
    MU0_OVER_4PI * GAMMA_E_SI * GAMMA_C13_SI * HBAR_SI * 1e27 * 1e-6
}

/// How the tabulated gyromagnetic ratios are turned into angular frequencies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AngularConvention {
    /// γ values are used verbatim as rad/(μs·T).
    #[default]
    AsGiven,
    /// γ values are read as MHz/T and multiplied by 2π.
    TimesTwoPi,
}

impl AngularConvention {
    pub fn factor(self) -> f64 {
        match self {
            AngularConvention::AsGiven => 1.0,
            AngularConvention::TimesTwoPi => std::f64::consts::TAU,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicalConstants {
    /// ¹³C gyromagnetic ratio, per μs per tesla.
    pub gamma_n: f64,
    /// Electron gyromagnetic ratio, per μs per tesla. Only enters the free qubit phase.
    pub gamma_e: f64,
    /// Zero-field splitting in GHz. Only enters the free qubit phase.
    pub delta_ghz: f64,
    /// Dipolar prefactor C in rad·nm³/μs.
    pub dipolar_prefactor: f64,
    pub angular_convention: AngularConvention,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        PhysicalConstants {
            gamma_n: 10.71,
            gamma_e: 28.08,
            delta_ghz: 2.87,
            dipolar_prefactor: textbook_dipolar_prefactor(),
            angular_convention: AngularConvention::AsGiven,
        }
    }
}

impl PhysicalConstants {
    pub fn with_convention(mut self, convention: AngularConvention) -> Self {
        self.angular_convention = convention;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("gamma_n", self.gamma_n),
            ("gamma_e", self.gamma_e),
            ("delta_ghz", self.delta_ghz),
            ("dipolar_prefactor", self.dipolar_prefactor),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::Validation(format!(
                    "constant {name} must be finite and strictly positive, got {value}"
                )));
            }
        }
        Ok(())
    }

    /// Angular frequency of the free qubit phase, (Δ − γe·Bz), in rad/μs.
    pub fn qubit_phase_rate(&self, field_t: f64) -> f64 {
        let delta_per_us = self.delta_ghz * 1e3;
        self.angular_convention.factor() * (delta_per_us - self.gamma_e * field_t)
    }
}

/// The z-row (A^{z,x}, A^{z,y}, A^{z,z}) of one nucleus' hyperfine tensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingRow {
    pub azx: f64,
    pub azy: f64,
    pub azz: f64,
    /// Qubit–nucleus distance in nm, informational.
    pub r_nm: Option<f64>,
}

impl CouplingRow {
    pub fn new(azx: f64, azy: f64, azz: f64) -> Self {
        CouplingRow { azx, azy, azz, r_nm: None }
    }

    pub fn with_distance(mut self, r_nm: f64) -> Self {
        self.r_nm = Some(r_nm);
        self
    }

    pub fn norm(&self) -> f64 {
        (self.azx * self.azx + self.azy * self.azy + self.azz * self.azz).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.azx.is_finite()
            && self.azy.is_finite()
            && self.azz.is_finite()
            && self.r_nm.map_or(true, f64::is_finite)
    }
}

/// Per-nucleus parameters of the closed-form coherence factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DressedSpin {
    pub omega_k: f64,
    pub a_k: f64,
    pub p_k: f64,
}

/// Secular dipolar row A^{z,j} = (C/r³)(δ_zj − 3 n_z n_j) for a displacement
/// given in the NV frame.
pub fn coupling_tensor_row(r_vec: [f64; 3], constants: &PhysicalConstants) -> Result<CouplingRow> {
    let r = (r_vec[0] * r_vec[0] + r_vec[1] * r_vec[1] + r_vec[2] * r_vec[2]).sqrt();
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::Domain(format!(
            "displacement must have finite nonzero length, got {r_vec:?}"
        )));
    }
    let n = [r_vec[0] / r, r_vec[1] / r, r_vec[2] / r];
    let scale = constants.dipolar_prefactor / (r * r * r);
    Ok(CouplingRow {
        azx: scale * (-3.0 * n[2] * n[0]),
        azy: scale * (-3.0 * n[2] * n[1]),
        azz: scale * (1.0 - 3.0 * n[2] * n[2]),
        r_nm: Some(r),
    })
}

/// Bath Larmor frequency ω = γn·Bz (times 2π under `TimesTwoPi`).
pub fn larmor_frequency(field_t: f64, constants: &PhysicalConstants) -> Result<f64> {
    if !(field_t.is_finite() && field_t > 0.0) {
        return Err(Error::Domain(format!(
            "magnetic field must be strictly positive, got {field_t} T"
        )));
    }
    Ok(constants.angular_convention.factor() * constants.gamma_n * field_t)
}

/// ω_k = sqrt(Azx² + Azy² + (ω + Azz)²).
pub fn effective_frequency(row: &CouplingRow, omega: f64) -> f64 {
    let longitudinal = omega + row.azz;
    (row.azx * row.azx + row.azy * row.azy + longitudinal * longitudinal).sqrt()
}

/// a_k = (ω + Azz)/ω_k.
///
/// Fails only when ω_k vanishes, i.e. the field exactly cancels Azz and the
/// transverse coupling is zero.
pub fn amplitude(row: &CouplingRow, omega: f64) -> Result<f64> {
    let omega_k = effective_frequency(row, omega);
    if omega_k == 0.0 {
        return Err(Error::DegenerateSpin { index: 0 });
    }
    Ok(((omega + row.azz) / omega_k).clamp(-1.0, 1.0))
}

pub fn dress(row: &CouplingRow, p_k: f64, omega: f64) -> Result<DressedSpin> {
    Ok(DressedSpin {
        omega_k: effective_frequency(row, omega),
        a_k: amplitude(row, omega)?,
        p_k,
    })
}

/// Dipolar parameters recovered from a tabulated coupling row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DipolarFit {
    /// Effective prefactor C_eff = x·r³ in rad·nm³/μs.
    pub c_eff: f64,
    /// Unit direction with n_z ≥ 0 (n and −n give the same row).
    pub direction: [f64; 3],
    /// Max-abs difference between the row and the one rebuilt from the fit.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ConsistencyReport {
    Consistent(DipolarFit),
    Inconsistent { reason: String },
}

/// Fits x = C_eff/r³ and a unit direction n to a row under the dipolar form.
///
/// From |A|² = x²(1 + 3n_z²) and Azz = x(1 − 3n_z²) the scale solves
/// 2x² − Azz·x − |A|² = 0; the positive root is kept and n back-solved.
pub fn table_consistency_check(row: &CouplingRow, tolerance: f64) -> Result<ConsistencyReport> {
    let r = match row.r_nm {
        Some(r) if r.is_finite() && r > 0.0 => r,
        _ => {
            return Err(Error::Contract(
                "table consistency check needs a positive distance r".into(),
            ))
        }
    };
    let norm_sq = row.azx * row.azx + row.azy * row.azy + row.azz * row.azz;
    let disc = row.azz * row.azz + 8.0 * norm_sq;
    let x = (row.azz + disc.sqrt()) / 4.0;
    if !(x > 0.0) {
        return Ok(ConsistencyReport::Inconsistent {
            reason: format!("non-positive dipolar scale x = {x}; a positive prefactor is impossible"),
        });
    }

    let nz_sq = (1.0 - row.azz / x) / 3.0;
    if nz_sq < -tolerance || nz_sq > 1.0 + tolerance {
        return Ok(ConsistencyReport::Inconsistent {
            reason: format!("n_z² = {nz_sq} lies outside [0, 1]"),
        });
    }
    let nz = nz_sq.clamp(0.0, 1.0).sqrt();
    let transverse = (row.azx * row.azx + row.azy * row.azy).sqrt();
    let (nx, ny) = if nz > 1e-12 {
        (-row.azx / (3.0 * x * nz), -row.azy / (3.0 * x * nz))
    } else if transverse <= tolerance {
        // In-plane site: the azimuth is not observable from the z-row.
        (1.0, 0.0)
    } else {
        return Ok(ConsistencyReport::Inconsistent {
            reason: "transverse coupling present for an in-plane direction".into(),
        });
    };

    let unit_defect = (nx * nx + ny * ny + nz * nz - 1.0).abs();
    let rebuilt = [
        x * (-3.0 * nz * nx),
        x * (-3.0 * nz * ny),
        x * (1.0 - 3.0 * nz * nz),
    ];
    let residual = (rebuilt[0] - row.azx)
        .abs()
        .max((rebuilt[1] - row.azy).abs())
        .max((rebuilt[2] - row.azz).abs());
    if unit_defect > tolerance || residual > tolerance {
        return Ok(ConsistencyReport::Inconsistent {
            reason: format!("no unit direction fits: |n|² defect {unit_defect:e}, residual {residual:e}"),
        });
    }
    Ok(ConsistencyReport::Consistent(DipolarFit {
        c_eff: x * r * r * r,
        direction: [nx, ny, nz],
        residual,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn consts() -> PhysicalConstants {
        PhysicalConstants::default()
    }

    #[test]
    fn textbook_prefactor_magnitude() {
        let c = textbook_dipolar_prefactor();
        assert!((c - 0.1249).abs() < 5e-4, "{c}");
    }

    #[test]
    fn axial_site() {
        let c = consts();
        let r = 1.3;
        let row = coupling_tensor_row([0.0, 0.0, r], &c).unwrap();
        let expect = -2.0 * c.dipolar_prefactor / r.powi(3);
        assert_eq!(row.azx, 0.0);
        assert_eq!(row.azy, 0.0);
        assert!((row.azz - expect).abs() < 1e-15);
    }

    #[test]
    fn in_plane_site() {
        let c = consts();
        let row = coupling_tensor_row([0.6, -0.8, 0.0], &c).unwrap();
        assert!(row.azx.abs() < 1e-15 && row.azy.abs() < 1e-15);
        assert!((row.azz - c.dipolar_prefactor).abs() < 1e-15);
    }

    #[test]
    fn magic_angle_kills_azz() {
        let nz = (1.0f64 / 3.0).sqrt();
        let nt = (2.0f64 / 3.0).sqrt();
        let row = coupling_tensor_row([nt, 0.0, nz], &consts()).unwrap();
        assert!(row.azz.abs() < 1e-15);
    }

    #[test]
    fn zero_displacement_is_domain_error() {
        assert!(matches!(coupling_tensor_row([0.0; 3], &consts()), Err(Error::Domain(_))));
    }

    #[test]
    fn larmor_values() {
        let c = consts();
        assert_eq!(larmor_frequency(1.0, &c).unwrap(), 10.71);
        assert_eq!(larmor_frequency(2.0, &c).unwrap(), 2.0 * larmor_frequency(1.0, &c).unwrap());
        assert!(larmor_frequency(0.0, &c).is_err());
        assert!(larmor_frequency(-1.0, &c).is_err());
        let two_pi = c.with_convention(AngularConvention::TimesTwoPi);
        assert!((larmor_frequency(1.0, &two_pi).unwrap() - 10.71 * std::f64::consts::TAU).abs() < 1e-12);
    }

    #[test]
    fn effective_frequency_edge_cases() {
        assert_eq!(effective_frequency(&CouplingRow::new(0.0, 0.0, 0.0), 3.5), 3.5);
        assert_eq!(effective_frequency(&CouplingRow::new(-0.7, 0.0, 0.0), 0.0), 0.7);
    }

    // table1, k = 3, evaluated by hand:
    // ω_k = sqrt(0.505446² + 0.135434² + 10.967915²) = 10.980412...
    // a_k = 10.967915 / ω_k = 0.998862...
    #[test]
    fn table_one_row_three() {
        let row = CouplingRow::new(0.505446, -0.135434, 0.257915);
        let wk = effective_frequency(&row, 10.71);
        assert!((wk - 10.9804).abs() < 1e-4, "{wk}");
        let a = amplitude(&row, 10.71).unwrap();
        assert!((a - 0.99886).abs() < 1e-5, "{a}");
    }

    #[test]
    fn amplitude_edge_cases() {
        assert_eq!(amplitude(&CouplingRow::new(0.0, 0.0, 0.0), 4.0).unwrap(), 1.0);
        let row = CouplingRow::new(0.3, 0.1, -2.0);
        assert_eq!(amplitude(&row, 2.0).unwrap(), 0.0);
        let degenerate = CouplingRow::new(0.0, 0.0, -2.0);
        assert!(matches!(amplitude(&degenerate, 2.0), Err(Error::DegenerateSpin { .. })));
    }

    #[test]
    fn consistency_round_trip() {
        let c = consts();
        let r_vec = [0.31, -0.52, 0.77];
        let row = coupling_tensor_row(r_vec, &c).unwrap();
        let r = row.r_nm.unwrap();
        match table_consistency_check(&row, 1e-9).unwrap() {
            ConsistencyReport::Consistent(fit) => {
                assert!((fit.c_eff - c.dipolar_prefactor).abs() < 1e-9);
                for j in 0..3 {
                    assert!((fit.direction[j] - r_vec[j] / r).abs() < 1e-9);
                }
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn consistency_flips_to_upper_hemisphere() {
        let c = consts();
        let row = coupling_tensor_row([0.2, 0.4, -0.9], &c).unwrap();
        let ConsistencyReport::Consistent(fit) = table_consistency_check(&row, 1e-9).unwrap() else {
            panic!()
        };
        assert!(fit.direction[2] > 0.0);
        assert!((fit.c_eff - c.dipolar_prefactor).abs() < 1e-9);
    }

    // Quadratic solve for table1 k=3 by hand: x = (0.257915 + sqrt(0.257915² + 8·0.340343))/4
    // = 0.48200, C_eff = x·1.03132³ ≈ 0.5287.
    #[test]
    fn consistency_table_one_row_three() {
        let row = CouplingRow::new(0.505446, -0.135434, 0.257915).with_distance(1.03132);
        let ConsistencyReport::Consistent(fit) = table_consistency_check(&row, 1e-6).unwrap() else {
            panic!()
        };
        assert!((fit.c_eff - 0.5287).abs() < 1e-3, "{}", fit.c_eff);
    }

    #[test]
    fn consistency_errors() {
        let zero = CouplingRow::new(0.0, 0.0, 0.0).with_distance(1.0);
        assert!(matches!(
            table_consistency_check(&zero, 1e-9).unwrap(),
            ConsistencyReport::Inconsistent { .. }
        ));
        let no_r = CouplingRow::new(0.1, 0.0, 0.0);
        assert!(matches!(table_consistency_check(&no_r, 1e-9), Err(Error::Contract(_))));
    }

    #[test]
    fn constants_validation() {
        assert!(consts().validate().is_ok());
        let bad = PhysicalConstants { gamma_n: 0.0, ..consts() };
        assert!(bad.validate().is_err());
    }
}
