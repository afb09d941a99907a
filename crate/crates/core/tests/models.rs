mod common;

use common::{c, simpson, to_na};
use nonmarkov::measure::trajectory;
use nonmarkov::{
    evolve_state, random_mixed_state, trace_distance, DensityMatrix, Error, JCParams, RngSeed, SpinBathParams,
    StatePair, TimeGrid,
};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

#[test]
fn amplitude_matches_integro_differential_oracle() {
    let h = 4e-3;
    let n = 5000;
    for delta in [0.0, 2.5, 8.0] {
        let p = JCParams::weak_coupling(delta);
        let oracle = common::volterra_amplitude_extrapolated(0.01, 1.0, delta, h, n);
        let err =
            oracle.iter().enumerate().map(|(k, g)| (p.amplitude(k as f64 * h).unwrap() - g).norm()).fold(0.0, f64::max);
        assert!(err <= 1e-8, "Δ = {delta}: {err:e}");
    }
}

#[test]
fn amplitude_matches_oracle_at_strong_coupling() {
    // γ₀ > λ/2 makes the discriminant imaginary at resonance
    let h = 2e-3;
    let n = 5000;
    let p = JCParams::new(3.0, 1.0, 0.0).unwrap();
    let oracle = common::volterra_amplitude_extrapolated(3.0, 1.0, 0.0, h, n);
    let err =
        oracle.iter().enumerate().map(|(k, g)| (p.amplitude(k as f64 * h).unwrap() - g).norm()).fold(0.0, f64::max);
    assert!(err <= 1e-8, "{err:e}");
}

#[test]
fn rate_is_the_derivative_of_integrated_rate() {
    let p = JCParams::weak_coupling(5.0);
    let e = 1e-4;
    for k in 1..200 {
        let t = k as f64 * 0.1;
        let fd = (p.integrated_rate(t + e).unwrap() - p.integrated_rate(t - e).unwrap()) / (2.0 * e);
        assert!((fd - p.rate(t).unwrap()).abs() < 1e-9, "t = {t}");
    }
}

#[test]
fn amplitude_modulus_matches_quadrature_of_rate() {
    for delta in [0.0, 3.0, 5.0, 8.0] {
        let p = JCParams::weak_coupling(delta);
        let h = 1e-3;
        let rates: Vec<f64> = (0..=20_000).map(|k| p.rate(k as f64 * h).unwrap()).collect();
        for end in [2_000usize, 10_000, 20_000] {
            let gamma = simpson(&rates[..=end], h);
            let g = p.amplitude(end as f64 * h).unwrap();
            assert!((g.norm_sqr() - (-gamma).exp()).abs() <= 1e-7, "Δ = {delta}, t = {}", end as f64 * h);
        }
    }
}

#[test]
fn resonant_weak_coupling_rate_is_nonnegative() {
    let p = JCParams::weak_coupling(0.0);
    for k in 0..=60_000 {
        assert!(p.rate(k as f64 * 1e-3).unwrap() >= -1e-12);
    }
}

#[test]
fn detuned_rate_takes_negative_values() {
    for delta in [4.0, 5.0, 8.0] {
        let p = JCParams::weak_coupling(delta);
        let negative = (0..20_000).filter(|k| p.rate(*k as f64 * 1e-3).unwrap() < 0.0).count();
        assert!(negative > 0, "Δ = {delta}");
    }
}

#[test]
fn evolution_reproduces_the_analytic_solution_map() {
    for delta in [0.0, 5.0] {
        let p = JCParams::weak_coupling(delta);
        let gen = p.generator();
        let grid = TimeGrid::covering(20.0, 1e-3).unwrap();
        for seed in 0..3 {
            let rho0 = random_mixed_state(2, RngSeed(seed)).unwrap();
            let states = evolve_state(&gen, &rho0, &grid).unwrap();
            for k in (0..grid.len()).step_by(500) {
                let g = p.amplitude(grid.time(k)).unwrap();
                let m = states[k].matrix();
                let excited = g.norm_sqr() * rho0.matrix()[(0, 0)].re;
                let coherence = rho0.matrix()[(1, 0)] * g.norm();
                assert!((m[(0, 0)].re - excited).abs() <= 1e-6);
                assert!((m[(1, 0)] - coherence).norm() <= 1e-6);
            }
        }
    }
}

#[test]
fn negative_rate_windows_coincide_with_backflow() {
    for delta in [3.0, 4.0, 5.0, 8.0] {
        let p = JCParams::weak_coupling(delta);
        let h = 1e-3;
        let pair = StatePair::sigma_z_pair(2).unwrap();
        let traj = trajectory(&p.generator(), &pair, 20.0, h).unwrap();
        let eps = traj.default_threshold();
        let backflow: Vec<bool> = traj.sigma.iter().map(|s| *s > eps).collect();
        let negative: Vec<bool> = traj.times.iter().map(|t| p.rate(*t).unwrap() < 0.0).collect();
        let mismatches: Vec<usize> = (0..traj.len()).filter(|&k| backflow[k] != negative[k]).collect();
        // disagreement only at points adjacent to a sign change of γ
        for k in mismatches {
            let near_boundary =
                (k > 0 && negative[k - 1] != negative[k]) || (k + 1 < traj.len() && negative[k + 1] != negative[k]);
            assert!(near_boundary, "Δ = {delta}: mismatch at t = {}", traj.times[k]);
        }
    }
}

#[test]
fn canonical_sigma_identity_holds_on_the_grid() {
    let p = JCParams::weak_coupling(5.0);
    let pair = StatePair::sigma_z_pair(2).unwrap();
    let traj = trajectory(&p.generator(), &pair, 20.0, 1e-3).unwrap();
    let err = traj
        .times
        .iter()
        .zip(&traj.sigma)
        .map(|(t, s)| (s - p.canonical_pair_sigma(*t).unwrap()).abs())
        .fold(0.0, f64::max);
    assert!(err <= 5e-6, "{err:e}");
}

#[test]
fn spin_bath_coherence_matches_bath_enumeration() {
    let p = SpinBathParams::new(1.0, 20).unwrap();
    for t in [0.0, 0.05, 0.3, 0.7, std::f64::consts::FRAC_PI_2, 2.2] {
        let reference = common::spin_bath_coherence_by_enumeration(1.0, 20, t);
        assert!((reference - c(p.decoherence(t), 0.0)).norm() < 1e-12, "t = {t}");
    }
}

#[test]
fn spin_bath_matches_full_tensor_product_evolution() {
    for n in [1u32, 3, 4] {
        let p = SpinBathParams::new(0.7, n).unwrap();
        let rho0 = random_mixed_state(2, RngSeed(n as u64)).unwrap();
        for t in [0.2, 1.0, 2.9] {
            let reference = common::spin_bath_reduced_state(&to_na(rho0.matrix()), 0.7, n, t);
            let ours = to_na(p.evolve(&rho0, t).unwrap().matrix());
            assert!(common::max_abs(&(ours - reference)) < 1e-12, "N = {n}, t = {t}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn spin_bath_closed_form_distance(seed in any::<u64>()) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let p = SpinBathParams::new(1.0, 20).unwrap();
        let t = rng.gen_range(0.0..5.0);
        // two qubit states with population difference a and coherence difference b
        let r1 = common::bloch_ball_point(&mut rng);
        let r2 = common::bloch_ball_point(&mut rng);
        let rho1 = DensityMatrix::from_bloch(r1[0], r1[1], r1[2]).unwrap();
        let rho2 = DensityMatrix::from_bloch(r2[0], r2[1], r2[2]).unwrap();
        let a = 0.5 * (r1[2] - r2[2]);
        let b = Complex64::new(0.5 * (r1[0] - r2[0]), -0.5 * (r1[1] - r2[1]));
        let f = p.decoherence(t);
        let build = |r: [f64; 3]| {
            DensityMatrix::new(common::from_na(&common::qubit([f * r[0], f * r[1], r[2]]))).unwrap()
        };
        let explicit = trace_distance(&build(r1), &build(r2)).unwrap();
        prop_assert!((p.trace_distance(a, b, t) - explicit).abs() <= 1e-12);
        let evolved = trace_distance(&p.evolve(&rho1, t).unwrap(), &p.evolve(&rho2, t).unwrap()).unwrap();
        prop_assert!((evolved - explicit).abs() <= 1e-12);
    }
}

#[test]
fn spin_bath_rate_has_poles_and_negative_stretches() {
    let p = SpinBathParams::new(1.0, 20).unwrap();
    let pole = std::f64::consts::FRAC_PI_4;
    assert!(matches!(p.rate(pole), Err(Error::RatePole { .. })));
    assert!(p.rate(0.5).unwrap() > 0.0);
    assert!(p.rate(1.0).unwrap() < 0.0);
    // γ = −ḟ/(2f) wherever f ≠ 0
    for t in [0.1, 0.5, 1.0, 1.3, 2.0] {
        let e = 1e-6;
        // σ_z dephasing damps coherences at 2γ
        let fd = -(p.decoherence(t + e).abs().ln() - p.decoherence(t - e).abs().ln()) / (4.0 * e);
        assert!((fd - p.rate(t).unwrap()).abs() < 1e-5 * (1.0 + fd.abs()), "t = {t}");
    }
}

#[test]
fn invalid_parameters_are_rejected() {
    assert!(JCParams::new(-0.1, 1.0, 0.0).is_err());
    assert!(JCParams::new(0.1, 0.0, 0.0).is_err());
    assert!(JCParams::new(0.1, 1.0, f64::NAN).is_err());
    assert!(SpinBathParams::new(0.0, 3).is_err());
    assert!(SpinBathParams::new(1.0, 0).is_err());
    assert!(JCParams::weak_coupling(1.0).rate(-1.0).is_err());
}
