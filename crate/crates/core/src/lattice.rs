//! Random ¹³C placement on the diamond lattice around an NV center and
//! selection of the effective bath.
//!
//! The vacancy sits at the origin and the nitrogen on the nearest-neighbour
//! site along crystal [111]. Positions are reported in the NV frame: z along
//! crystal [111], x along the projection of crystal [100] onto the plane
//! normal to z, y = z × x.

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hyperfine::{coupling_tensor_row, CouplingRow, PhysicalConstants};

/// Conventional cubic lattice constant of diamond, nm.
pub const DIAMOND_LATTICE_CONSTANT_NM: f64 = 0.3567;

/// Natural ¹³C abundance.
pub const NATURAL_ABUNDANCE: f64 = 0.011;

const FCC_BASIS: [[f64; 3]; 4] = [
    [0.0, 0.0, 0.0],
    [0.0, 0.5, 0.5],
    [0.5, 0.0, 0.5],
    [0.5, 0.5, 0.0],
];
const DIAMOND_OFFSETS: [[f64; 3]; 2] = [[0.0, 0.0, 0.0], [0.25, 0.25, 0.25]];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SelectionRule {
    #[default]
    StrongestCoupling,
    Nearest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LatticeConfig {
    pub seed: u64,
    pub supercell_radius_nm: f64,
    pub abundance: f64,
    pub max_spins: usize,
    pub selection_rule: SelectionRule,
    /// Sites closer than this are dropped. Contact hyperfine, which this
    /// model omits, matters within roughly 0.5 nm.
    pub exclusion_radius_nm: f64,
}

impl Default for LatticeConfig {
    fn default() -> Self {
        LatticeConfig {
            seed: 0,
            supercell_radius_nm: 2.6,
            abundance: NATURAL_ABUNDANCE,
            max_spins: 8,
            selection_rule: SelectionRule::StrongestCoupling,
            exclusion_radius_nm: 0.0,
        }
    }
}

impl LatticeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.abundance) {
            return Err(Error::Validation(format!(
                "abundance must lie in [0, 1], got {}",
                self.abundance
            )));
        }
        if !(self.supercell_radius_nm.is_finite() && self.supercell_radius_nm > 0.0) {
            return Err(Error::Validation(format!(
                "supercell radius must be positive, got {}",
                self.supercell_radius_nm
            )));
        }
        if self.max_spins == 0 {
            return Err(Error::Validation("max_spins must be at least 1".into()));
        }
        if !(self.exclusion_radius_nm.is_finite() && self.exclusion_radius_nm >= 0.0) {
            return Err(Error::Validation(format!(
                "exclusion radius must be non-negative, got {}",
                self.exclusion_radius_nm
            )));
        }
        Ok(())
    }
}

/// Displacement of a bath site from the vacancy, NV frame, nm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SitePosition(pub Vector3<f64>);

impl SitePosition {
    pub fn distance(&self) -> f64 {
        self.0.norm()
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.0.x, self.0.y, self.0.z]
    }
}

/// Rotation taking crystal-frame vectors into the NV frame (rows are the NV axes).
pub fn crystal_to_nv_frame() -> Matrix3<f64> {
    let z = Vector3::new(1.0, 1.0, 1.0).normalize();
    let x100 = Vector3::new(1.0, 0.0, 0.0);
    let x = (x100 - z * z.dot(&x100)).normalize();
    let y = z.cross(&x);
    Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()])
}

/// Every carbon site inside the spherical supercell, crystal frame, in a
/// fixed enumeration order. Vacancy and nitrogen positions are excluded.
fn candidate_carbon_sites(radius_nm: f64) -> Vec<Vector3<f64>> {
    let a = DIAMOND_LATTICE_CONSTANT_NM;
    let nitrogen = Vector3::new(0.25, 0.25, 0.25) * a;
    let m = (radius_nm / a).ceil() as i64 + 1;
    let mut sites = Vec::new();
    for i in -m..=m {
        for j in -m..=m {
            for k in -m..=m {
                let cell = Vector3::new(i as f64, j as f64, k as f64);
                for b in FCC_BASIS {
                    for d in DIAMOND_OFFSETS {
                        let frac = cell + Vector3::new(b[0] + d[0], b[1] + d[1], b[2] + d[2]);
                        let pos = frac * a;
                        let r = pos.norm();
                        if r == 0.0 || r > radius_nm || (pos - nitrogen).norm() < 1e-9 {
                            continue;
                        }
                        sites.push(pos);
                    }
                }
            }
        }
    }
    sites
}

/// Draws spinful sites with independent Bernoulli(abundance) trials.
pub fn generate_sites(config: &LatticeConfig) -> Result<Vec<SitePosition>> {
    config.validate()?;
    let rotation = crystal_to_nv_frame();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut out = Vec::new();
    for site in candidate_carbon_sites(config.supercell_radius_nm) {
        // one draw per candidate keeps the stream aligned across abundances
        let draw: f64 = rng.random();
        if draw >= config.abundance {
            continue;
        }
        let nv = rotation * site;
        if nv.norm() < config.exclusion_radius_nm {
            continue;
        }
        out.push(SitePosition(nv));
    }
    if out.is_empty() {
        return Err(Error::EmptyEnvironment);
    }
    Ok(out)
}

/// Number of candidate carbon sites for a supercell radius.
pub fn candidate_site_count(radius_nm: f64) -> usize {
    candidate_carbon_sites(radius_nm).len()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BathSpin {
    pub position: Option<SitePosition>,
    pub coupling: CouplingRow,
    /// Initial polarization p_k ∈ [−1, 1].
    pub polarization: f64,
}

/// A concrete bath: spins, couplings, initial polarizations, applied field.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentRealization {
    pub spins: Vec<BathSpin>,
    pub field_t: f64,
}

/// Either one value for every spin or a per-spin list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PolarizationSpec {
    Uniform(f64),
    PerSpin(Vec<f64>),
}

impl EnvironmentRealization {
    pub fn new(spins: Vec<BathSpin>, field_t: f64) -> Result<Self> {
        let env = EnvironmentRealization { spins, field_t };
        env.validate()?;
        Ok(env)
    }

    /// Builds an environment from bare coupling rows with zero polarization.
    pub fn from_rows(rows: Vec<CouplingRow>, field_t: f64) -> Result<Self> {
        let spins = rows
            .into_iter()
            .map(|coupling| BathSpin { position: None, coupling, polarization: 0.0 })
            .collect();
        Self::new(spins, field_t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.spins.is_empty() {
            return Err(Error::EmptyEnvironment);
        }
        for (index, spin) in self.spins.iter().enumerate() {
            if !spin.coupling.is_finite() {
                return Err(Error::InvalidAt { index, message: "non-finite coupling row".into() });
            }
            if !(spin.polarization.abs() <= 1.0) {
                return Err(Error::InvalidAt {
                    index,
                    message: format!("polarization {} outside [-1, 1]", spin.polarization),
                });
            }
        }
        if !self.field_t.is_finite() {
            return Err(Error::Validation(format!("non-finite field {}", self.field_t)));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    pub fn polarizations(&self) -> Vec<f64> {
        self.spins.iter().map(|s| s.polarization).collect()
    }

    pub fn is_unpolarized(&self) -> bool {
        self.spins.iter().all(|s| s.polarization == 0.0)
    }

    pub fn with_field(mut self, field_t: f64) -> Self {
        self.field_t = field_t;
        self
    }
}

/// Ranks sites, computes their couplings and keeps at most `max_spins`.
/// Polarizations start at zero.
pub fn select_environment(
    sites: &[SitePosition],
    constants: &PhysicalConstants,
    config: &LatticeConfig,
    field_t: f64,
) -> Result<EnvironmentRealization> {
    if sites.is_empty() {
        return Err(Error::EmptyEnvironment);
    }
    let mut ranked = sites
        .iter()
        .map(|site| Ok((*site, coupling_tensor_row(site.as_array(), constants)?)))
        .collect::<Result<Vec<_>>>()?;
    // stable sort: ties keep enumeration order
    match config.selection_rule {
        SelectionRule::StrongestCoupling => {
            ranked.sort_by(|a, b| b.1.norm().total_cmp(&a.1.norm()));
        }
        SelectionRule::Nearest => {
            ranked.sort_by(|a, b| a.0.distance().total_cmp(&b.0.distance()));
        }
    }
    ranked.truncate(config.max_spins);
    let spins = ranked
        .into_iter()
        .map(|(site, coupling)| BathSpin { position: Some(site), coupling, polarization: 0.0 })
        .collect();
    EnvironmentRealization::new(spins, field_t)
}

pub fn set_polarizations(
    mut env: EnvironmentRealization,
    spec: &PolarizationSpec,
) -> Result<EnvironmentRealization> {
    let values = match spec {
        PolarizationSpec::Uniform(p) => vec![*p; env.len()],
        PolarizationSpec::PerSpin(list) => {
            if list.len() != env.len() {
                return Err(Error::Validation(format!(
                    "{} polarizations given for {} spins",
                    list.len(),
                    env.len()
                )));
            }
            list.clone()
        }
    };
    for (index, p) in values.iter().enumerate() {
        if !(p.abs() <= 1.0) {
            return Err(Error::InvalidAt {
                index,
                message: format!("polarization {p} outside [-1, 1]"),
            });
        }
    }
    for (spin, p) in env.spins.iter_mut().zip(values) {
        spin.polarization = p;
    }
    Ok(env)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(seed: u64, abundance: f64) -> LatticeConfig {
        LatticeConfig { seed, abundance, supercell_radius_nm: 1.5, ..Default::default() }
    }

    #[test]
    fn zero_abundance_is_empty() {
        assert!(matches!(generate_sites(&cfg(1, 0.0)), Err(Error::EmptyEnvironment)));
    }

    #[test]
    fn full_abundance_returns_every_site() {
        let sites = generate_sites(&cfg(1, 1.0)).unwrap();
        assert_eq!(sites.len(), candidate_site_count(1.5));
        // diamond has 8 atoms per a³; a 1.5 nm ball holds ~ 8·(4/3)π·1.5³/a³ of them
        let expected = 8.0 * 4.0 / 3.0 * std::f64::consts::PI * 1.5f64.powi(3)
            / DIAMOND_LATTICE_CONSTANT_NM.powi(3);
        let ratio = sites.len() as f64 / expected;
        assert!((0.9..1.1).contains(&ratio), "{ratio}");
    }

    #[test]
    fn same_seed_same_sites() {
        let a = generate_sites(&cfg(42, 0.05)).unwrap();
        let b = generate_sites(&cfg(42, 0.05)).unwrap();
        assert_eq!(a, b);
        let c = generate_sites(&cfg(43, 0.05)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn vacancy_and_nitrogen_never_occupied() {
        let sites = generate_sites(&cfg(3, 1.0)).unwrap();
        let n_site = crystal_to_nv_frame() * Vector3::new(0.25, 0.25, 0.25) * DIAMOND_LATTICE_CONSTANT_NM;
        for s in &sites {
            assert!(s.distance() > 0.0);
            assert!((s.0 - n_site).norm() > 1e-9);
        }
        // nearest carbons: three remaining neighbours of the vacancy at a·√3/4
        let nn = DIAMOND_LATTICE_CONSTANT_NM * 3f64.sqrt() / 4.0;
        let count = sites.iter().filter(|s| (s.distance() - nn).abs() < 1e-9).count();
        assert_eq!(count, 3);
    }

    #[test]
    fn exclusion_radius_drops_near_sites() {
        let config = LatticeConfig { exclusion_radius_nm: 0.5, ..cfg(3, 1.0) };
        let sites = generate_sites(&config).unwrap();
        assert!(sites.iter().all(|s| s.distance() >= 0.5));
        assert!(sites.len() < candidate_site_count(1.5));
    }

    #[test]
    fn nv_axis_maps_to_z() {
        let rot = crystal_to_nv_frame();
        let a = DIAMOND_LATTICE_CONSTANT_NM;
        let v = rot * Vector3::new(a, a, a);
        let r = 3f64.sqrt() * a;
        assert!(v.x.abs() < 1e-12 && v.y.abs() < 1e-12 && (v.z - r).abs() < 1e-12);
        // right-handed orthonormal
        assert!((rot * rot.transpose() - Matrix3::identity()).norm() < 1e-14);
        assert!((rot.determinant() - 1.0).abs() < 1e-14);
        // x axis is the projection of [100]
        let x = rot * Vector3::new(1.0, 0.0, 0.0);
        assert!(x.y.abs() < 1e-14 && x.x > 0.0);
    }

    #[test]
    fn abundance_statistics() {
        let abundance = 0.011;
        let per_run = candidate_site_count(1.5);
        let mut hits = 0usize;
        let runs = 200u64;
        for seed in 0..runs {
            match generate_sites(&cfg(seed, abundance)) {
                Ok(s) => hits += s.len(),
                Err(Error::EmptyEnvironment) => {}
                Err(e) => panic!("{e}"),
            }
        }
        let trials = (per_run as u64 * runs) as f64;
        let frac = hits as f64 / trials;
        let sigma = (abundance * (1.0 - abundance) / trials).sqrt();
        assert!((frac - abundance).abs() < 3.0 * sigma, "{frac} vs {abundance} ± {sigma}");
    }

    #[test]
    fn selection_truncates_and_ranks() {
        let config = LatticeConfig { max_spins: 8, ..cfg(9, 0.2) };
        let sites = generate_sites(&config).unwrap();
        assert!(sites.len() >= 20);
        let env = select_environment(&sites[..20], &PhysicalConstants::default(), &config, 1.0).unwrap();
        assert_eq!(env.len(), 8);
        let norms: Vec<f64> = env.spins.iter().map(|s| s.coupling.norm()).collect();
        assert!(norms.windows(2).all(|w| w[0] >= w[1]));
        assert!(env.spins.iter().all(|s| s.polarization == 0.0));

        let all = LatticeConfig { max_spins: 100, selection_rule: SelectionRule::Nearest, ..config };
        let env = select_environment(&sites[..20], &PhysicalConstants::default(), &all, 1.0).unwrap();
        assert_eq!(env.len(), 20);
        let d: Vec<f64> = env.spins.iter().map(|s| s.position.unwrap().distance()).collect();
        assert!(d.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn nearer_site_on_same_ray_ranks_first() {
        let dir = Vector3::new(0.3, -0.2, 0.5).normalize();
        let far = SitePosition(dir * 2.0);
        let near = SitePosition(dir * 1.0);
        for rule in [SelectionRule::StrongestCoupling, SelectionRule::Nearest] {
            let config = LatticeConfig { selection_rule: rule, max_spins: 2, ..Default::default() };
            let env = select_environment(&[far, near], &PhysicalConstants::default(), &config, 1.0).unwrap();
            assert_eq!(env.spins[0].position, Some(near), "{rule:?}");
        }
    }

    #[test]
    fn polarization_assignment() {
        let rows = vec![CouplingRow::new(0.1, 0.0, 0.0); 8];
        let env = EnvironmentRealization::from_rows(rows, 1.0).unwrap();
        let env = set_polarizations(env, &PolarizationSpec::Uniform(0.8)).unwrap();
        assert!(env.polarizations().iter().all(|&p| p == 0.8));
        let env = set_polarizations(env, &PolarizationSpec::Uniform(0.0)).unwrap();
        assert!(env.is_unpolarized());

        let mut list = vec![0.5; 8];
        list[5] = 1.2;
        match set_polarizations(env.clone(), &PolarizationSpec::PerSpin(list)) {
            Err(Error::InvalidAt { index, .. }) => assert_eq!(index, 5),
            other => panic!("{other:?}"),
        }
        assert!(set_polarizations(env.clone(), &PolarizationSpec::Uniform(1.2)).is_err());
        assert!(set_polarizations(env, &PolarizationSpec::PerSpin(vec![0.1; 3])).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(LatticeConfig { abundance: 1.5, ..Default::default() }.validate().is_err());
        assert!(LatticeConfig { supercell_radius_nm: 0.0, ..Default::default() }.validate().is_err());
        assert!(LatticeConfig { max_spins: 0, ..Default::default() }.validate().is_err());
    }
}
