//! Brute-force reference for the closed forms: explicit conditional
//! propagators on the single-spin (2×2) and full-bath (2^N) Hilbert spaces,
//! exponentiated through Hermitian eigendecomposition.
//!
//! With the qubit in (|0⟩ + |1⟩)/√2 the bath evolves under H_E when the qubit
//! is in |0⟩ and under H_E + V when it is in |1⟩, so the (unphased) coherence is
//! ½·Tr[U0 R(0) U1†].

use nalgebra::{DMatrix, Matrix2, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coherence::{
    abs_factor_doubleprime, abs_factor_prime, dressed_spins, single_spin_factor,
};
use crate::error::{Error, Result};
use crate::hyperfine::{dress, CouplingRow, DressedSpin, PhysicalConstants};
use crate::lattice::EnvironmentRealization;

/// Largest bath the dense oracle accepts (2^12 = 4096 states).
pub const MAX_ORACLE_SPINS: usize = 12;

type C = Complex64;

fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

fn spin_ops() -> [Matrix2<C>; 3] {
    let h = 0.5;
    [
        Matrix2::new(c(0.0, 0.0), c(h, 0.0), c(h, 0.0), c(0.0, 0.0)),
        Matrix2::new(c(0.0, 0.0), c(0.0, -h), c(0.0, h), c(0.0, 0.0)),
        Matrix2::new(c(h, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-h, 0.0)),
    ]
}

/// Bath-spin Hamiltonians conditioned on the qubit state, rad/μs.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinHamiltonianPair {
    pub h0: Matrix2<C>,
    pub h1: Matrix2<C>,
}

impl SpinHamiltonianPair {
    pub fn new(row: &CouplingRow, omega: f64) -> Self {
        let [ix, iy, iz] = spin_ops();
        let h0 = iz * c(omega, 0.0);
        let h1 = h0 + ix * c(row.azx, 0.0) + iy * c(row.azy, 0.0) + iz * c(row.azz, 0.0);
        SpinHamiltonianPair { h0, h1 }
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let d0 = (self.h0 - self.h0.adjoint()).camax();
        let d1 = (self.h1 - self.h1.adjoint()).camax();
        d0.max(d1)
    }
}

/// ρ_k(0) = ½(𝟙 + 2 p_k I_z).
#[derive(Debug, Clone, PartialEq)]
pub struct SpinState(pub Matrix2<C>);

impl SpinState {
    pub fn new(p: f64) -> Self {
        SpinState(Matrix2::new(c(0.5 * (1.0 + p), 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.5 * (1.0 - p), 0.0)))
    }
}

fn expm_hermitian_2(h: &Matrix2<C>, t: f64) -> Matrix2<C> {
    let eig = SymmetricEigen::new(*h);
    let phases = Matrix2::from_diagonal(&eig.eigenvalues.map(|e| C::from_polar(1.0, -e * t)));
    eig.eigenvectors * phases * eig.eigenvectors.adjoint()
}

/// U_b = exp(−i H_b t) for both conditional Hamiltonians.
pub fn conditional_propagators(pair: &SpinHamiltonianPair, t: f64) -> (Matrix2<C>, Matrix2<C>) {
    (expm_hermitian_2(&pair.h0, t), expm_hermitian_2(&pair.h1, t))
}

/// exp(−i t ½ b·σ) = cos(|b|t/2) 𝟙 − i sin(|b|t/2) b̂·σ.
pub fn pauli_rotation(b: [f64; 3], t: f64) -> Matrix2<C> {
    let norm = (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt();
    if norm == 0.0 {
        return Matrix2::identity();
    }
    let (s, co) = (0.5 * norm * t).sin_cos();
    let (nx, ny, nz) = (b[0] / norm, b[1] / norm, b[2] / norm);
    Matrix2::new(
        c(co, -s * nz),
        c(-s * ny, -s * nx),
        c(s * ny, -s * nx),
        c(co, s * nz),
    )
}

pub fn unitarity_defect(u: &Matrix2<C>) -> f64 {
    (u * u.adjoint() - Matrix2::identity()).camax()
}

/// Tr[U0 ρ_k(0) U1†], the per-spin factor from explicit propagators.
pub fn oracle_single_factor(row: &CouplingRow, p: f64, omega: f64, t: f64) -> C {
    let pair = SpinHamiltonianPair::new(row, omega);
    let (u0, u1) = conditional_propagators(&pair, t);
    (u0 * SpinState::new(p).0 * u1.adjoint()).trace()
}

fn kron(a: &DMatrix<C>, b: &Matrix2<C>) -> DMatrix<C> {
    let (ra, ca) = a.shape();
    DMatrix::from_fn(ra * 2, ca * 2, |i, j| a[(i / 2, j / 2)] * b[(i % 2, j % 2)])
}

/// Operator acting as `op` on spin `k` of `n` and as identity elsewhere.
fn embed(op: &Matrix2<C>, k: usize, n: usize) -> DMatrix<C> {
    let id = Matrix2::<C>::identity();
    let mut out = DMatrix::from_element(1, 1, c(1.0, 0.0));
    for j in 0..n {
        out = kron(&out, if j == k { op } else { &id });
    }
    out
}

/// Dense full-bath oracle with cached eigendecompositions.
pub struct FullBathOracle {
    v0: DMatrix<C>,
    e0: Vec<f64>,
    v1: DMatrix<C>,
    e1: Vec<f64>,
    state: DMatrix<C>,
    field_t: f64,
    constants: PhysicalConstants,
}

impl FullBathOracle {
    pub fn new(env: &EnvironmentRealization, constants: &PhysicalConstants) -> Result<Self> {
        env.validate()?;
        let n = env.len();
        if n > MAX_ORACLE_SPINS {
            return Err(Error::Resource { spins: n, cap: MAX_ORACLE_SPINS });
        }
        let omega = crate::hyperfine::larmor_frequency(env.field_t, constants)?;
        let dim = 1usize << n;
        let [ix, iy, iz] = spin_ops();
        let mut h_env = DMatrix::zeros(dim, dim);
        let mut coupling = DMatrix::zeros(dim, dim);
        let mut state = DMatrix::from_element(1, 1, c(1.0, 0.0));
        for (k, spin) in env.spins.iter().enumerate() {
            h_env += embed(&iz, k, n) * c(omega, 0.0);
            let row = &spin.coupling;
            let local = ix * c(row.azx, 0.0) + iy * c(row.azy, 0.0) + iz * c(row.azz, 0.0);
            coupling += embed(&local, k, n);
            state = kron(&state, &SpinState::new(spin.polarization).0);
        }
        let eig0 = SymmetricEigen::new(h_env.clone());
        let eig1 = SymmetricEigen::new(h_env + coupling);
        Ok(FullBathOracle {
            e0: eig0.eigenvalues.iter().copied().collect(),
            v0: eig0.eigenvectors,
            e1: eig1.eigenvalues.iter().copied().collect(),
            v1: eig1.eigenvectors,
            state,
            field_t: env.field_t,
            constants: *constants,
        })
    }

    fn propagator(v: &DMatrix<C>, e: &[f64], t: f64) -> DMatrix<C> {
        let mut scaled = v.clone();
        for (j, &ej) in e.iter().enumerate() {
            let phase = C::from_polar(1.0, -ej * t);
            scaled.column_mut(j).iter_mut().for_each(|x| *x *= phase);
        }
        scaled * v.adjoint()
    }

    pub fn coherence(&self, t: f64, include_free_phase: bool) -> C {
        let u0 = Self::propagator(&self.v0, &self.e0, t);
        let u1 = Self::propagator(&self.v1, &self.e1, t);
        let trace = (u0 * &self.state * u1.adjoint()).trace();
        let phase = if include_free_phase {
            C::from_polar(1.0, -self.constants.qubit_phase_rate(self.field_t) * t)
        } else {
            c(1.0, 0.0)
        };
        0.5 * phase * trace
    }
}

/// ½·phase·Tr[U0 R(0) U1†] on the full 2^N space.
pub fn full_system_coherence(
    env: &EnvironmentRealization,
    constants: &PhysicalConstants,
    t: f64,
    include_free_phase: bool,
) -> Result<C> {
    Ok(FullBathOracle::new(env, constants)?.coherence(t, include_free_phase))
}

/// Signature of the closed-form per-spin factor under test.
pub type ClosedForm = fn(f64, &DressedSpin, f64) -> C;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub cases: usize,
    pub worst_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<CheckResult>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatteryConfig {
    pub seed: u64,
    pub single_spin_cases: usize,
    pub max_bath_spins: usize,
    pub baths_per_size: usize,
    pub times_per_bath: usize,
}

impl Default for BatteryConfig {
    fn default() -> Self {
        BatteryConfig {
            seed: 2024,
            single_spin_cases: 10_000,
            max_bath_spins: 6,
            baths_per_size: 2,
            times_per_bath: 100,
        }
    }
}

/// Random coupling row, polarization, Larmor frequency and time.
pub fn random_tuple(rng: &mut impl Rng) -> (CouplingRow, f64, f64, f64) {
    let row = CouplingRow::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    );
    let p = rng.random_range(-1.0..=1.0);
    let omega = rng.random_range(0.05..60.0);
    let t = rng.random_range(0.0..500.0);
    (row, p, omega, t)
}

/// Random bath of `n` spins with couplings on the scale of the bundled tables.
pub fn random_environment(rng: &mut impl Rng, n: usize, field_t: f64) -> EnvironmentRealization {
    let spins = (0..n)
        .map(|_| crate::lattice::BathSpin {
            position: None,
            coupling: CouplingRow::new(
                rng.random_range(-0.6..0.6),
                rng.random_range(-0.6..0.6),
                rng.random_range(-0.6..0.6),
            ),
            polarization: rng.random_range(-1.0..=1.0),
        })
        .collect();
    EnvironmentRealization { spins, field_t }
}

fn check(name: &str, deviations: impl IntoIterator<Item = f64>, tolerance: f64) -> CheckResult {
    let mut cases = 0;
    let mut worst = 0.0f64;
    for d in deviations {
        cases += 1;
        worst = if d.is_nan() { f64::INFINITY } else { worst.max(d) };
    }
    CheckResult { name: name.into(), cases, worst_deviation: worst, tolerance, passed: worst < tolerance }
}

/// Runs every oracle comparison against `closed_form`.
pub fn run_battery(config: &BatteryConfig, closed_form: ClosedForm) -> Result<VerifyReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let tuples: Vec<_> = (0..config.single_spin_cases).map(|_| random_tuple(&mut rng)).collect();

    let per_spin: Vec<(f64, f64, f64, f64)> = tuples
        .par_iter()
        .map(|(row, p, omega, t)| {
            let spin = dress(row, *p, *omega).expect("random rows are never degenerate");
            let closed = closed_form(*t, &spin, *omega);
            let pair = SpinHamiltonianPair::new(row, *omega);
            let (u0, u1) = conditional_propagators(&pair, *t);
            let oracle = (u0 * SpinState::new(*p).0 * u1.adjoint()).trace();
            let b = [row.azx, row.azy, omega + row.azz];
            let pauli = (pauli_rotation(b, *t) - u1).camax();
            let unitary = unitarity_defect(&u0).max(unitarity_defect(&u1));
            (
                (closed - oracle).norm(),
                pauli,
                unitary,
                pair.hermiticity_defect(),
            )
        })
        .collect();

    let mut checks = vec![
        check("single_spin_factor_vs_2x2_oracle", per_spin.iter().map(|d| d.0), 1e-10),
        check("eigen_vs_pauli_propagator", per_spin.iter().map(|d| d.1), 1e-10),
        check("propagator_unitarity", per_spin.iter().map(|d| d.2), 1e-13),
        check("hamiltonian_hermiticity", per_spin.iter().map(|d| d.3), 1e-14),
    ];

    // grid identities on t′ and t″
    let mut prime = Vec::new();
    let mut doubleprime = Vec::new();
    for (row, p, omega, _) in &tuples {
        let spin = dress(row, *p, *omega)?;
        let n = rng.random_range(0..1000u64) as f64;
        let period = std::f64::consts::TAU / omega;
        let tp = period * (n + 0.5);
        let tpp = period * n;
        prime.push((closed_form(tp, &spin, *omega).norm() - abs_factor_prime(&spin, tp)).abs());
        doubleprime.push((closed_form(tpp, &spin, *omega).norm() - abs_factor_doubleprime(&spin, tpp)).abs());
    }
    checks.push(check("t_prime_modulus_identity", prime, 1e-12));
    checks.push(check("t_doubleprime_modulus_identity", doubleprime, 1e-12));

    // full-bath factorization and phase-flag consistency
    let constants = PhysicalConstants::default();
    let mut baths = Vec::new();
    for n in 1..=config.max_bath_spins {
        for _ in 0..config.baths_per_size {
            let field = rng.random_range(0.05..3.0);
            let env = random_environment(&mut rng, n, field);
            let times: Vec<f64> = (0..config.times_per_bath).map(|_| rng.random_range(0.0..300.0)).collect();
            baths.push((env, times));
        }
    }
    let bath_results = baths
        .par_iter()
        .map(|(env, times)| {
            let oracle = FullBathOracle::new(env, &constants)?;
            let (omega, spins) = dressed_spins(env, &constants)?;
            let n = env.len() as f64;
            let mut fact = Vec::new();
            let mut flag = Vec::new();
            for &t in times {
                let closed = 0.5
                    * spins.iter().fold(c(1.0, 0.0), |acc, s| acc * closed_form(t, s, omega));
                let full = oracle.coherence(t, false);
                fact.push((full - closed).norm() / n);
                flag.push((oracle.coherence(t, true).norm() - full.norm()).abs());
            }
            Ok((fact, flag))
        })
        .collect::<Result<Vec<_>>>()?;
    checks.push(check(
        "full_bath_factorization_per_spin",
        bath_results.iter().flat_map(|r| r.0.iter().copied()),
        1e-9,
    ));
    checks.push(check(
        "free_phase_modulus_invariance",
        bath_results.iter().flat_map(|r| r.1.iter().copied()),
        1e-12,
    ));

    let passed = checks.iter().all(|c| c.passed);
    Ok(VerifyReport { seed: config.seed, passed, checks })
}

/// The battery against the shipped closed form.
pub fn verify_closed_forms(config: &BatteryConfig) -> Result<VerifyReport> {
    run_battery(config, single_spin_factor)
}
