//! Reference implementations used as test oracles. They share no code
//! with the library beyond its public data types.
#![allow(dead_code)]

use nalgebra::DMatrix;
use nonmarkov::{ComplexMatrix, DensityMatrix};
use num_complex::Complex64;

pub type NaMatrix = DMatrix<Complex64>;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn to_na(m: &ComplexMatrix) -> NaMatrix {
    let d = m.dim();
    NaMatrix::from_fn(d, d, |r, col| m[(r, col)])
}

pub fn from_na(m: &NaMatrix) -> ComplexMatrix {
    ComplexMatrix::from_row_major((0..m.nrows()).flat_map(|r| (0..m.ncols()).map(move |c| m[(r, c)])).collect())
        .unwrap()
}

/// Eigenvalues of a Hermitian matrix, ascending, via nalgebra.
pub fn eigenvalues(m: &NaMatrix) -> Vec<f64> {
    let herm = (m + m.adjoint()) * c(0.5, 0.0);
    let mut v: Vec<f64> = herm.symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn trace_distance(r1: &DensityMatrix, r2: &DensityMatrix) -> f64 {
    let diff = to_na(r1.matrix()) - to_na(r2.matrix());
    0.5 * eigenvalues(&diff).iter().map(|x| x.abs()).sum::<f64>()
}

/// Column-stacking superoperator of `−i[H,·] + Σ γ (A·A† − ½{A†A,·})`,
/// from `vec(XρY) = (Yᵀ ⊗ X) vec(ρ)`.
pub fn lindblad_superoperator(h: &NaMatrix, channels: &[(NaMatrix, f64)]) -> NaMatrix {
    let d = h.nrows();
    let id = NaMatrix::identity(d, d);
    let mut l = (id.kronecker(h) - h.transpose().kronecker(&id)) * c(0.0, -1.0);
    for (a, rate) in channels {
        let ada = a.adjoint() * a;
        let g = c(*rate, 0.0);
        l += (a.conjugate().kronecker(a)
            - id.kronecker(&ada) * c(0.5, 0.0)
            - ada.transpose().kronecker(&id) * c(0.5, 0.0))
            * g;
    }
    l
}

pub fn vectorize(m: &NaMatrix) -> nalgebra::DVector<Complex64> {
    let d = m.nrows();
    nalgebra::DVector::from_fn(d * d, |i, _| m[(i % d, i / d)])
}

pub fn unvectorize(v: &nalgebra::DVector<Complex64>, d: usize) -> NaMatrix {
    NaMatrix::from_fn(d, d, |r, col| v[r + col * d])
}

/// `exp(L t)` applied to `ρ`.
pub fn semigroup_evolve(l: &NaMatrix, rho: &NaMatrix, t: f64) -> NaMatrix {
    let e = (l * c(t, 0.0)).exp();
    unvectorize(&(e * vectorize(rho)), rho.nrows())
}

pub fn sigma_minus() -> NaMatrix {
    NaMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)])
}

pub fn sigma_z() -> NaMatrix {
    NaMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)])
}

/// Excited-state amplitude of the damped Jaynes-Cummings model from the
/// integro-differential equation `Ġ(t) = −∫₀ᵗ f(t−s) G(s) ds`,
/// `f(τ) = ½γ₀λ e^{−(λ−iΔ)τ}`, discretized by the implicit trapezoid
/// rule for both the quadrature and the time stepping. Returns `G` on
/// `t_k = k·h`, `k = 0..=n`.
pub fn volterra_amplitude(gamma0: f64, lambda: f64, delta: f64, h: f64, n: usize) -> Vec<Complex64> {
    let kappa = c(lambda, -delta);
    let f: Vec<Complex64> = (0..=n).map(|k| (-kappa * (k as f64 * h)).exp() * (0.5 * gamma0 * lambda)).collect();
    let mut g = vec![c(0.0, 0.0); n + 1];
    let mut v = vec![c(0.0, 0.0); n + 1];
    g[0] = c(1.0, 0.0);
    let denom = c(1.0, 0.0) + f[0] * (h * h / 4.0);
    for m in 1..=n {
        let mut s = f[m] * g[0] * 0.5;
        for j in 1..m {
            s += f[m - j] * g[j];
        }
        let s = -s * h;
        g[m] = (g[m - 1] + (v[m - 1] + s) * (0.5 * h)) / denom;
        v[m] = s - f[0] * g[m] * (0.5 * h);
    }
    g
}

/// Richardson-extrapolated Volterra solution on the coarse grid `k·h`.
pub fn volterra_amplitude_extrapolated(gamma0: f64, lambda: f64, delta: f64, h: f64, n: usize) -> Vec<Complex64> {
    let coarse = volterra_amplitude(gamma0, lambda, delta, h, n);
    let fine = volterra_amplitude(gamma0, lambda, delta, h / 2.0, 2 * n);
    coarse.iter().enumerate().map(|(k, gc)| (fine[2 * k] * 4.0 - gc) / 3.0).collect()
}

/// Coherence factor of the central spin: the average of
/// `exp(−2iAt Σₖ sₖ)` over all `2^n` bath configurations `sₖ = ±1`.
/// Configurations are tallied by total spin first so the final sum has
/// only `n + 1` terms.
pub fn spin_bath_coherence_by_enumeration(coupling: f64, n_spins: u32, t: f64) -> Complex64 {
    let total = 1u64 << n_spins;
    let mut tally = vec![0u64; n_spins as usize + 1];
    for config in 0..total {
        tally[config.count_ones() as usize] += 1;
    }
    let mut acc = c(0.0, 0.0);
    for (up, count) in tally.iter().enumerate() {
        let m = 2 * up as i64 - n_spins as i64;
        acc += c(0.0, -2.0 * coupling * t * m as f64).exp() * (*count as f64 / total as f64);
    }
    acc
}

/// Central spin reduced state from the full tensor-product evolution
/// under `H = A σ_z ⊗ Σₖ σ_z^{(k)}` with the bath maximally mixed.
pub fn spin_bath_reduced_state(rho0: &NaMatrix, coupling: f64, n_spins: u32, t: f64) -> NaMatrix {
    let nb = 1usize << n_spins;
    let z = sigma_z();
    let mut bath_sum = NaMatrix::zeros(nb, nb);
    for k in 0..n_spins as usize {
        let mut op = NaMatrix::identity(1, 1);
        for j in 0..n_spins as usize {
            let factor = if j == k { z.clone() } else { NaMatrix::identity(2, 2) };
            op = op.kronecker(&factor);
        }
        bath_sum += op;
    }
    let h = z.kronecker(&bath_sum) * c(coupling, 0.0);
    let u = (h * c(0.0, -t)).exp();
    let bath = NaMatrix::identity(nb, nb) * c(1.0 / nb as f64, 0.0);
    let full = &u * rho0.kronecker(&bath) * u.adjoint();
    NaMatrix::from_fn(2, 2, |r, col| (0..nb).map(|b| full[(r * nb + b, col * nb + b)]).sum())
}

/// Composite Simpson quadrature of samples on a uniform grid (odd length).
pub fn simpson(values: &[f64], h: f64) -> f64 {
    assert!(values.len() % 2 == 1 && values.len() >= 3);
    let n = values.len() - 1;
    let mut s = values[0] + values[n];
    for (k, v) in values.iter().enumerate().take(n).skip(1) {
        s += if k % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    s * h / 3.0
}

/// Uniform point in the unit Bloch ball by rejection.
pub fn bloch_ball_point(rng: &mut impl rand::Rng) -> [f64; 3] {
    loop {
        let p = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        if p.iter().map(|x: &f64| x * x).sum::<f64>() <= 1.0 {
            return p;
        }
    }
}

/// Qubit state with Bloch vector `r`, built entrywise.
pub fn qubit(r: [f64; 3]) -> NaMatrix {
    NaMatrix::from_row_slice(
        2,
        2,
        &[
            c(0.5 * (1.0 + r[2]), 0.0),
            c(0.5 * r[0], -0.5 * r[1]),
            c(0.5 * r[0], 0.5 * r[1]),
            c(0.5 * (1.0 - r[2]), 0.0),
        ],
    )
}

pub fn max_abs(m: &NaMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}
