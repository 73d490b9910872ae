use num_complex::Complex64 as C;
use proptest::prelude::*;

use nvpol::coherence::{
    build_grid, coherence, dressed_spins, grid_for, sample_series, single_spin_factor, GridKind,
};
use nvpol::estimator::{calibrate_amplitudes, estimate_from_doubleprime, estimate_from_prime};
use nvpol::hyperfine::{
    amplitude, coupling_tensor_row, dress, effective_frequency, table_consistency_check,
    ConsistencyReport, CouplingRow, PhysicalConstants,
};
use nvpol::io::{env_from_csv, env_from_json, env_to_csv, env_to_json};
use nvpol::lattice::{set_polarizations, BathSpin, EnvironmentRealization, PolarizationSpec};

fn row() -> impl Strategy<Value = CouplingRow> {
    (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0).prop_map(|(x, y, z)| CouplingRow::new(x, y, z))
}

fn bath(max: usize) -> impl Strategy<Value = Vec<(CouplingRow, f64)>> {
    prop::collection::vec((row(), -1.0f64..=1.0), 1..=max)
}

fn env_of(spins: &[(CouplingRow, f64)], field_t: f64) -> EnvironmentRealization {
    EnvironmentRealization {
        spins: spins
            .iter()
            .map(|(coupling, p)| BathSpin { position: None, coupling: *coupling, polarization: *p })
            .collect(),
        field_t,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn amplitude_is_bounded(r in row(), omega in 0.01f64..100.0) {
        let a = amplitude(&r, omega).unwrap();
        prop_assert!(a.abs() <= 1.0);
        let direct = (omega + r.azz) / effective_frequency(&r, omega);
        prop_assert!((a - direct).abs() < 1e-15);
    }

    #[test]
    fn high_field_limit(r in row()) {
        let omega = 1e6;
        prop_assert!(amplitude(&r, omega).unwrap() > 1.0 - 1e-10);
    }

    #[test]
    fn transverse_rotation_invariance(r in row(), phi in 0.0f64..std::f64::consts::TAU,
                                      p in -1.0f64..=1.0, omega in 0.1f64..50.0, t in 0.0f64..300.0) {
        let (s, c) = phi.sin_cos();
        let rotated = CouplingRow::new(c * r.azx - s * r.azy, s * r.azx + c * r.azy, r.azz);
        let a = dress(&r, p, omega).unwrap();
        let b = dress(&rotated, p, omega).unwrap();
        prop_assert!((a.omega_k - b.omega_k).abs() < 1e-12);
        prop_assert!((a.a_k - b.a_k).abs() < 1e-12);
        prop_assert!((single_spin_factor(t, &a, omega) - single_spin_factor(t, &b, omega)).norm() < 1e-9);
    }

    #[test]
    fn dipolar_inverse_cube(x in -1.0f64..1.0, y in -1.0f64..1.0, z in -1.0f64..1.0, scale in 0.2f64..5.0) {
        prop_assume!(x * x + y * y + z * z > 1e-2);
        let consts = PhysicalConstants::default();
        let near = coupling_tensor_row([x, y, z], &consts).unwrap();
        let far = coupling_tensor_row([scale * x, scale * y, scale * z], &consts).unwrap();
        let k = scale.powi(3);
        for (a, b) in [(near.azx, far.azx), (near.azy, far.azy), (near.azz, far.azz)] {
            prop_assert!((a - k * b).abs() < 1e-12 * (1.0 + a.abs()));
        }
        // |A|² = x²(1 + 3n_z²)
        let r = (x * x + y * y + z * z).sqrt();
        let xs = consts.dipolar_prefactor / r.powi(3);
        let nz = z / r;
        prop_assert!((near.norm().powi(2) - xs * xs * (1.0 + 3.0 * nz * nz)).abs() < 1e-12 * (1.0 + xs * xs));
    }

    #[test]
    fn consistency_check_recovers_prefactor(x in -1.0f64..1.0, y in -1.0f64..1.0, z in 0.05f64..1.0) {
        prop_assume!(x * x + y * y + z * z > 0.1);
        let consts = PhysicalConstants::default();
        let row = coupling_tensor_row([x, y, z], &consts).unwrap();
        match table_consistency_check(&row, 1e-9).unwrap() {
            ConsistencyReport::Consistent(fit) => {
                prop_assert!((fit.c_eff - consts.dipolar_prefactor).abs() < 1e-9);
                let r = (x * x + y * y + z * z).sqrt();
                prop_assert!((fit.direction[2] - z / r).abs() < 1e-7);
            }
            ConsistencyReport::Inconsistent { reason } => prop_assert!(false, "{}", reason),
        }
    }

    #[test]
    fn factor_modulus_and_conjugation(r in row(), p in -1.0f64..=1.0, omega in 0.05f64..60.0, t in 0.0f64..500.0) {
        let plus = dress(&r, p, omega).unwrap();
        let minus = dress(&r, -p, omega).unwrap();
        let l = single_spin_factor(t, &plus, omega);
        prop_assert!(l.norm() <= 1.0 + 1e-12);
        prop_assert!((single_spin_factor(t, &minus, omega) - l.conj()).norm() < 1e-14);
        prop_assert!((single_spin_factor(0.0, &plus, omega) - C::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn coherence_starts_at_half_and_stays_below(spins in bath(6), field in 0.05f64..5.0, t in 0.0f64..400.0) {
        let env = env_of(&spins, field);
        let consts = PhysicalConstants::default();
        prop_assert!((coherence(0.0, &env, &consts, true).unwrap() - C::new(0.5, 0.0)).norm() < 1e-15);
        let rho = coherence(t, &env, &consts, false).unwrap();
        prop_assert!(rho.norm() <= 0.5 + 1e-12);
        let with_phase = coherence(t, &env, &consts, true).unwrap();
        prop_assert!((rho.norm() - with_phase.norm()).abs() < 1e-12);
    }

    #[test]
    fn grid_instants_zero_the_carrier(omega in 0.1f64..60.0, t_max in 1.0f64..300.0) {
        let prime = build_grid(GridKind::TPrime, omega, t_max, None).unwrap();
        for t in prime.times() {
            prop_assert!((omega * t / 2.0).cos().abs() < 1e-11);
            prop_assert!(t <= t_max);
        }
        let dprime = build_grid(GridKind::TDoublePrime, omega, t_max, None).unwrap();
        let times = dprime.times();
        prop_assert_eq!(times[0], 0.0);
        for t in times {
            prop_assert!((omega * t / 2.0).sin().abs() < 1e-11);
        }
    }

    #[test]
    fn p_bar_never_increases_with_horizon(spins in bath(5), field in 0.2f64..3.0,
                                          h1 in 5.0f64..100.0, extra in 0.0f64..200.0) {
        let env = env_of(&spins, field);
        let consts = PhysicalConstants::default();
        let grid = grid_for(&env, &consts, GridKind::TPrime, h1 + extra, None).unwrap();
        let series = sample_series(&env, &consts, &grid, false).unwrap();
        let long = estimate_from_prime(&series, env.len()).unwrap();
        let short = estimate_from_prime(&series.truncated(h1), env.len()).unwrap();
        prop_assert!(long.p_bar <= short.p_bar + 1e-15);
        prop_assert!(long.product_bound <= 1.0);
        let steps = &long.staircase;
        for w in steps.windows(2) {
            prop_assert!(w[1].t_us > w[0].t_us && w[1].min_abs < w[0].min_abs);
        }
    }

    #[test]
    fn calibrated_estimate_is_sound(spins in prop::collection::vec((row(), 0.3f64..0.95), 1..=5),
                                    horizon in 20.0f64..200.0) {
        // field high enough for the polarization condition on every spin
        let mut field = 1.0;
        let env = loop {
            let env = env_of(&spins, field);
            let max_p = spins.iter().map(|s| s.1).fold(0.0, f64::max);
            let (_, d) = dressed_spins(&env, &PhysicalConstants::default()).unwrap();
            if d.iter().all(|s| s.a_k >= max_p) { break env; }
            field *= 2.0;
        };
        let consts = PhysicalConstants::default();
        let prod_p: f64 = spins.iter().map(|s| s.1).product();
        let unpol = set_polarizations(env.clone(), &PolarizationSpec::Uniform(0.0)).unwrap();
        let grid = grid_for(&unpol, &consts, GridKind::TPrime, horizon, None).unwrap();
        let cal = calibrate_amplitudes(&sample_series(&unpol, &consts, &grid, false).unwrap()).unwrap();
        let grid = grid_for(&env, &consts, GridKind::TDoublePrime, horizon, None).unwrap();
        let series = sample_series(&env, &consts, &grid, false).unwrap();
        let est = estimate_from_doubleprime(&series, env.len(), Some(&cal)).unwrap();
        prop_assert!(est.product_bound >= prod_p - 1e-12);
        let prime_grid = grid_for(&env, &consts, GridKind::TPrime, horizon, None).unwrap();
        let prime = estimate_from_prime(&sample_series(&env, &consts, &prime_grid, false).unwrap(), env.len()).unwrap();
        prop_assert!(prime.product_bound >= prod_p - 1e-12);
    }

    #[test]
    fn env_csv_and_json_roundtrip(spins in bath(8), field in 0.05f64..5.0) {
        let env = env_of(&spins, field);
        let csv = env_to_csv(&env);
        let back = env_from_csv(&csv, field).unwrap();
        prop_assert_eq!(env_to_csv(&back), csv);
        for (a, b) in env.spins.iter().zip(&back.spins) {
            prop_assert!((a.coupling.azz - b.coupling.azz).abs() <= 1e-8 * (1.0 + a.coupling.azz.abs()));
            prop_assert!((a.polarization - b.polarization).abs() <= 1e-8);
        }
        let json = env_to_json(&env).unwrap();
        let back = env_from_json(&json).unwrap();
        prop_assert_eq!(back.len(), env.len());
        prop_assert_eq!(env_to_json(&back).unwrap(), json);
        prop_assert!((back.field_t - field).abs() <= 1e-8 * field);
    }
}
