mod common;

use common::{bloch_ball_point, c, eigenvalues, to_na};
use nonmarkov::eigen::eigenvalues_2x2;
use nonmarkov::{
    hermitian_eigenvalues, random_mixed_state, random_pure_state, trace_distance, ComplexMatrix, DensityMatrix, RngSeed,
};
use proptest::prelude::*;
use rand::SeedableRng;

fn random_hermitian(d: usize, seed: u64) -> ComplexMatrix {
    use rand::Rng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut m = ComplexMatrix::zeros(d);
    for r in 0..d {
        m[(r, r)] = c(rng.gen_range(-3.0..3.0), 0.0);
        for col in r + 1..d {
            let z = c(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            m[(r, col)] = z;
            m[(col, r)] = z.conj();
        }
    }
    m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn eigenvalues_match_reference(d in 2usize..=8, seed in any::<u64>()) {
        let m = random_hermitian(d, seed);
        let mut ours = hermitian_eigenvalues(&m).unwrap();
        ours.sort_by(f64::total_cmp);
        let reference = eigenvalues(&to_na(&m));
        for (a, b) in ours.iter().zip(&reference) {
            prop_assert!((a - b).abs() <= 1e-11 * (1.0 + b.abs()), "{ours:?} vs {reference:?}");
        }
    }

    #[test]
    fn trace_distance_matches_reference(d in 2usize..=6, s1 in any::<u64>(), s2 in any::<u64>(), pure in any::<bool>()) {
        let r1 = if pure { random_pure_state(d, RngSeed(s1)).unwrap() } else { random_mixed_state(d, RngSeed(s1)).unwrap() };
        let r2 = random_mixed_state(d, RngSeed(s2)).unwrap();
        let ours = trace_distance(&r1, &r2).unwrap();
        prop_assert!((ours - common::trace_distance(&r1, &r2)).abs() < 1e-12);
    }

    #[test]
    fn qubit_closed_form_matches_reference(a in -5.0f64..5.0, b in -5.0f64..5.0, re in -5.0f64..5.0, im in -5.0f64..5.0) {
        let mut got = eigenvalues_2x2(a, b, c(re, im));
        got.sort_by(f64::total_cmp);
        let m = ComplexMatrix::from_rows([[c(a, 0.0), c(re, im)], [c(re, -im), c(b, 0.0)]]);
        let reference = eigenvalues(&to_na(&m));
        prop_assert!((got[0] - reference[0]).abs() < 1e-12 && (got[1] - reference[1]).abs() < 1e-12);
    }

    #[test]
    fn trace_distance_is_unitarily_invariant(s1 in any::<u64>(), s2 in any::<u64>(), s3 in any::<u64>()) {
        let d = 3;
        let r1 = random_mixed_state(d, RngSeed(s1)).unwrap();
        let r2 = random_mixed_state(d, RngSeed(s2)).unwrap();
        // unitary from the QR decomposition of a random complex matrix
        let g = to_na(random_mixed_state(d, RngSeed(s3)).unwrap().matrix()) + nalgebra::DMatrix::from_fn(d, d, |r, col| c(r as f64 - col as f64, (r * col) as f64));
        let u = g.qr().q();
        let rotate = |r: &DensityMatrix| {
            let m = &u * to_na(r.matrix()) * u.adjoint();
            let m = common::from_na(&((&m + m.adjoint()) * c(0.5, 0.0)));
            DensityMatrix::new(m).unwrap()
        };
        let before = trace_distance(&r1, &r2).unwrap();
        let after = trace_distance(&rotate(&r1), &rotate(&r2)).unwrap();
        prop_assert!((before - after).abs() < 1e-11);
    }
}

#[test]
fn metric_axioms_on_random_triples() {
    let mut checked = 0;
    for k in 0..1200u64 {
        let d = 2 + (k % 4) as usize;
        let s = RngSeed(k).derive(77);
        let draw = |i: u64| {
            if (k + i).is_multiple_of(2) {
                random_pure_state(d, s.derive(i)).unwrap()
            } else {
                random_mixed_state(d, s.derive(i)).unwrap()
            }
        };
        let (r1, r2, r3) = (draw(0), draw(1), draw(2));
        let d12 = trace_distance(&r1, &r2).unwrap();
        let d21 = trace_distance(&r2, &r1).unwrap();
        let d13 = trace_distance(&r1, &r3).unwrap();
        let d23 = trace_distance(&r2, &r3).unwrap();
        assert_eq!(d12.to_bits(), d21.to_bits());
        assert!((0.0..=1.0).contains(&d12));
        assert!(d13 <= d12 + d23 + 1e-10, "triangle: {d13} > {d12} + {d23}");
        assert_eq!(trace_distance(&r1, &r1).unwrap(), 0.0);
        let max_diff = (r1.matrix() - r2.matrix()).max_abs();
        assert_eq!(d12 == 0.0, max_diff <= 1e-10, "D = {d12}, max diff {max_diff}");
        checked += 1;
    }
    assert!(checked >= 1000);
}

#[test]
fn nearby_states_have_nonzero_distance() {
    let rho = random_mixed_state(3, RngSeed(4)).unwrap();
    let sigma = DensityMatrix::maximally_mixed(3);
    for eps in [1e-6, 1e-8, 1e-9] {
        let mut m = rho.matrix().scale_real(1.0 - eps);
        m.add_scaled(c(eps, 0.0), sigma.matrix());
        let near = DensityMatrix::new(m).unwrap();
        let dist = trace_distance(&rho, &near).unwrap();
        let reference = common::trace_distance(&rho, &near);
        assert!(dist > 0.0 && (dist - reference).abs() < 1e-14, "{eps}: {dist} vs {reference}");
    }
}

#[test]
fn orthogonal_pure_states_are_perfectly_distinguishable() {
    for k in 0..300u64 {
        let d = 2 + (k % 5) as usize;
        let a = random_pure_state(d, RngSeed(k)).unwrap();
        let b = random_pure_state(d, RngSeed(k + 10_000)).unwrap();
        // leading eigenvectors of the two projectors, then Gram-Schmidt
        let ket = |r: &DensityMatrix| {
            let m = to_na(r.matrix());
            let e = m.symmetric_eigen();
            let i = e.eigenvalues.imax();
            e.eigenvectors.column(i).into_owned()
        };
        let u = ket(&a);
        let v = ket(&b);
        let w = &v - &u * u.dotc(&v);
        let w = &w / c(w.norm(), 0.0);
        let p1 = DensityMatrix::pure(u.as_slice()).unwrap();
        let p2 = DensityMatrix::pure(w.as_slice()).unwrap();
        assert!((trace_distance(&p1, &p2).unwrap() - 1.0).abs() < 1e-10);
    }
}

#[test]
fn random_generators_always_emit_valid_states() {
    let mut draws = 0;
    for k in 0..50_000u64 {
        let d = 2 + (k % 3) as usize;
        for rho in [random_pure_state(d, RngSeed(k)).unwrap(), random_mixed_state(d, RngSeed(k)).unwrap()] {
            let m = to_na(rho.matrix());
            assert!((m.trace() - c(1.0, 0.0)).norm() <= 1e-12);
            assert!(common::max_abs(&(&m - m.adjoint())) <= 1e-12);
            assert!(eigenvalues(&m)[0] >= -1e-10);
            draws += 1;
        }
    }
    assert!(draws >= 100_000);
}

#[test]
fn sampling_is_reproducible_and_seed_sensitive() {
    assert_eq!(random_mixed_state(3, RngSeed(11)).unwrap(), random_mixed_state(3, RngSeed(11)).unwrap());
    assert_ne!(random_mixed_state(3, RngSeed(11)).unwrap(), random_mixed_state(3, RngSeed(12)).unwrap());
    assert_ne!(RngSeed(11).derive(0), RngSeed(11).derive(1));
    assert!(random_pure_state(1, RngSeed(0)).is_err());
}

#[test]
fn hilbert_schmidt_qubits_fill_the_bloch_ball_uniformly() {
    let n = 40_000;
    let radii: Vec<f64> = (0..n)
        .map(|k| {
            let (x, y, z) = random_mixed_state(2, RngSeed(k)).unwrap().bloch().unwrap();
            (x * x + y * y + z * z).sqrt()
        })
        .collect();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let reference: Vec<f64> = (0..n)
        .map(|_| {
            let p = bloch_ball_point(&mut rng);
            p.iter().map(|x| x * x).sum::<f64>().sqrt()
        })
        .collect();
    let mean_purity = |r: &[f64]| r.iter().map(|r| 0.5 * (1.0 + r * r)).sum::<f64>() / r.len() as f64;
    // uniform ball: E[r²] = 3/5, so mean purity 4/5 with standard error ~6e-4
    assert!((mean_purity(&radii) - 0.8).abs() < 4e-3);
    assert!((mean_purity(&radii) - mean_purity(&reference)).abs() < 5e-3);
    // two-sample Kolmogorov-Smirnov distance on r
    let mut a = radii.clone();
    let mut b = reference;
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let ks = (0..=50)
        .map(|i| {
            let x = i as f64 / 50.0;
            let fa = a.partition_point(|&r| r <= x) as f64 / n as f64;
            let fb = b.partition_point(|&r| r <= x) as f64 / n as f64;
            (fa - fb).abs()
        })
        .fold(0.0, f64::max);
    assert!(ks < 0.015, "KS distance {ks}");
}

#[test]
fn hilbert_schmidt_mean_purity_in_three_dimensions() {
    // E tr ρ² = 2d/(d² + 1) for the Hilbert-Schmidt ensemble
    let n = 20_000;
    let mean = (0..n).map(|k| random_mixed_state(3, RngSeed(k)).unwrap().purity()).sum::<f64>() / n as f64;
    assert!((mean - 0.6).abs() < 3e-3, "{mean}");
}

#[test]
fn haar_moments() {
    for d in [2usize, 3, 5] {
        let n = 20_000;
        let (mut m1, mut m2) = (0.0, 0.0);
        for k in 0..n {
            let p = random_pure_state(d, RngSeed(k)).unwrap().matrix()[(0, 0)].re;
            m1 += p;
            m2 += p * p;
        }
        let (m1, m2) = (m1 / n as f64, m2 / n as f64);
        assert!((m1 - 1.0 / d as f64).abs() < 8e-3, "d={d}: {m1}");
        assert!((m2 - 2.0 / (d * (d + 1)) as f64).abs() < 8e-3, "d={d}: {m2}");
        let rho = random_pure_state(d, RngSeed(3)).unwrap();
        assert!((rho.purity() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn invalid_states_are_rejected() {
    let not_psd = ComplexMatrix::from_rows([[c(1.5, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-0.5, 0.0)]]);
    assert!(DensityMatrix::new(not_psd).is_err());
    let bad_trace = ComplexMatrix::from_rows([[c(0.5, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.4, 0.0)]]);
    assert!(DensityMatrix::new(bad_trace).is_err());
    let non_herm = ComplexMatrix::from_rows([[c(0.5, 0.0), c(0.1, 0.0)], [c(0.0, 0.0), c(0.5, 0.0)]]);
    assert!(DensityMatrix::new(non_herm).is_err());
}
