//! Density matrices, the trace distance and seeded random states.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::eigen::{eigenvalues_2x2, hermitian_eigenvalues};
use crate::error::{Error, Result};
use crate::matrix::{pauli, ComplexMatrix, ONE, ZERO};

/// Acceptance thresholds for the density-matrix invariants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateTolerance {
    pub hermitian: f64,
    pub trace: f64,
    /// Most negative eigenvalue still accepted (stored as a positive number).
    pub positivity: f64,
}

impl StateTolerance {
    pub const STRICT: Self = Self { hermitian: 1e-12, trace: 1e-12, positivity: 1e-10 };
    /// Used for integrator output, where round-off and truncation error
    /// of order `1e-9` are expected.
    pub const EVOLVED: Self = Self { hermitian: 1e-12, trace: 1e-8, positivity: 1e-8 };
}

/// Hermitian, unit-trace, positive semidefinite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(ComplexMatrix);

impl DensityMatrix {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        Self::with_tolerance(m, StateTolerance::STRICT)
    }

    pub fn with_tolerance(m: ComplexMatrix, tol: StateTolerance) -> Result<Self> {
        if !m.is_finite() {
            return Err(Error::InvalidState("non-finite entries".into()));
        }
        let herm = m.hermiticity_defect();
        if herm > tol.hermitian {
            return Err(Error::InvalidState(format!("Hermiticity defect {herm:.3e}")));
        }
        let tr = m.trace();
        if (tr - ONE).norm() > tol.trace {
            return Err(Error::InvalidState(format!("trace {} + {}i differs from 1", tr.re, tr.im)));
        }
        let least = least_eigenvalue(&m)?;
        if least < -tol.positivity {
            return Err(Error::InvalidState(format!("negative eigenvalue {least:.3e}")));
        }
        Ok(Self(m))
    }

    /// `|ψ⟩⟨ψ|` for a (not necessarily normalized) ket.
    pub fn pure(ket: &[Complex64]) -> Result<Self> {
        let norm = ket.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if ket.len() < 2 || !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidArgument("ket must be non-zero with at least two components".into()));
        }
        let psi: Vec<Complex64> = ket.iter().map(|z| z / norm).collect();
        Self::new(ComplexMatrix::outer(&psi, &psi))
    }

    /// Computational basis projector `|k⟩⟨k|`.
    pub fn basis(dim: usize, k: usize) -> Result<Self> {
        if k >= dim {
            return Err(Error::InvalidArgument(format!("basis index {k} out of range for dim {dim}")));
        }
        Self::new(ComplexMatrix::unit(dim, k, k))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self(ComplexMatrix::identity(dim).scale_real(1.0 / dim as f64))
    }

    /// Qubit state `(I + r·σ)/2`; requires `|r| ≤ 1`.
    pub fn from_bloch(x: f64, y: f64, z: f64) -> Result<Self> {
        let m = ComplexMatrix::from_rows([
            [Complex64::new(0.5 * (1.0 + z), 0.0), Complex64::new(0.5 * x, -0.5 * y)],
            [Complex64::new(0.5 * x, 0.5 * y), Complex64::new(0.5 * (1.0 - z), 0.0)],
        ]);
        Self::new(m)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    #[inline]
    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    /// `tr ρ²`
    pub fn purity(&self) -> f64 {
        self.0.as_slice().iter().map(|z| z.norm_sqr()).sum()
    }

    /// Bloch vector `(tr ρσ_x, tr ρσ_y, tr ρσ_z)` of a qubit state.
    pub fn bloch(&self) -> Result<(f64, f64, f64)> {
        self.0.check_dim(2)?;
        let rho = &self.0;
        let x = (rho * &pauli::sigma_x()).trace().re;
        let y = (rho * &pauli::sigma_y()).trace().re;
        let z = (rho * &pauli::sigma_z()).trace().re;
        Ok((x, y, z))
    }
}

/// Free-function form of [`DensityMatrix::bloch`].
pub fn bloch_from_qubit(rho: &DensityMatrix) -> Result<(f64, f64, f64)> {
    rho.bloch()
}

fn least_eigenvalue(m: &ComplexMatrix) -> Result<f64> {
    if m.dim() == 2 {
        return Ok(eigenvalues_2x2(m[(0, 0)].re, m[(1, 1)].re, m[(0, 1)])[0]);
    }
    Ok(hermitian_eigenvalues(m)?[0])
}

/// Pair of initial states with an optional tag.
#[derive(Debug, Clone, PartialEq)]
pub struct StatePair {
    pub rho1: DensityMatrix,
    pub rho2: DensityMatrix,
    pub label: Option<String>,
}

impl StatePair {
    pub fn new(rho1: DensityMatrix, rho2: DensityMatrix) -> Result<Self> {
        if rho1.dim() != rho2.dim() {
            return Err(Error::DimensionMismatch { expected: rho1.dim(), found: rho2.dim() });
        }
        Ok(Self { rho1, rho2, label: None })
    }

    pub fn labelled(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn dim(&self) -> usize {
        self.rho1.dim()
    }

    pub fn swapped(&self) -> Self {
        Self { rho1: self.rho2.clone(), rho2: self.rho1.clone(), label: self.label.clone() }
    }

    /// `|0⟩⟨0|` and `|1⟩⟨1|`; for a qubit these are the `σ_z` eigenstates
    /// `|+⟩⟨+|` (excited) and `|−⟩⟨−|` (ground).
    pub fn sigma_z_pair(dim: usize) -> Result<Self> {
        Ok(Self::new(DensityMatrix::basis(dim, 0)?, DensityMatrix::basis(dim, 1)?)?.labelled("sigma_z"))
    }

    /// `(|0⟩ ± |1⟩)/√2`; antipodal points on the Bloch-sphere equator.
    pub fn sigma_x_pair(dim: usize) -> Result<Self> {
        let mut plus = vec![ZERO; dim];
        let mut minus = vec![ZERO; dim];
        plus[0] = ONE;
        plus[1] = ONE;
        minus[0] = ONE;
        minus[1] = -ONE;
        Ok(Self::new(DensityMatrix::pure(&plus)?, DensityMatrix::pure(&minus)?)?.labelled("sigma_x"))
    }

    /// Population difference `a = ρ₁⁺⁺ − ρ₂⁺⁺` and coherence difference
    /// `b = ρ₁⁺⁻ − ρ₂⁺⁻` of a qubit pair.
    pub fn population_and_coherence_difference(&self) -> Result<(f64, Complex64)> {
        self.rho1.matrix().check_dim(2)?;
        let (r1, r2) = (self.rho1.matrix(), self.rho2.matrix());
        Ok((r1[(0, 0)].re - r2[(0, 0)].re, r1[(0, 1)] - r2[(0, 1)]))
    }
}

/// `½ tr|m|` for a Hermitian matrix.
pub fn half_trace_norm(m: &ComplexMatrix) -> Result<f64> {
    let ev = if m.dim() == 2 {
        let deviation = m.hermiticity_defect();
        if deviation > crate::eigen::HERMITIAN_INPUT_TOL {
            return Err(Error::NotHermitian { deviation });
        }
        eigenvalues_2x2(m[(0, 0)].re, m[(1, 1)].re, m[(0, 1)]).to_vec()
    } else {
        hermitian_eigenvalues(m)?
    };
    Ok(0.5 * ev.iter().map(|l| l.abs()).sum::<f64>())
}

/// Flips the sign of `m` so that its first non-zero entry (row-major, real
/// part before imaginary part) is positive. `a − b` and `b − a` map to the
/// bit-identical matrix, which makes derived quantities exactly symmetric.
pub(crate) fn canonical_sign(m: &mut ComplexMatrix) {
    let lead = m.as_slice().iter().flat_map(|z| [z.re, z.im]).find(|v| *v != 0.0);
    if matches!(lead, Some(v) if v < 0.0) {
        for z in m.as_mut_slice() {
            *z = -*z;
        }
    }
}

/// `D(ρ₁, ρ₂) = ½ tr|ρ₁ − ρ₂|`, clamped to `[0, 1]`.
pub fn trace_distance(rho1: &DensityMatrix, rho2: &DensityMatrix) -> Result<f64> {
    if rho1.dim() != rho2.dim() {
        return Err(Error::DimensionMismatch { expected: rho1.dim(), found: rho2.dim() });
    }
    let mut diff = rho1.matrix() - rho2.matrix();
    canonical_sign(&mut diff);
    Ok(half_trace_norm(&diff)?.clamp(0.0, 1.0))
}

/// Seed for every random draw in the crate. Child seeds for parallel
/// workers come from [`RngSeed::derive`], so results never depend on
/// scheduling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSeed(pub u64);

impl RngSeed {
    /// Independent child seed for stream `index` (SplitMix64 finalizer over
    /// the parent seed and the index).
    pub fn derive(self, index: u64) -> Self {
        let mut z = self.0 ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        Self(z ^ (z >> 31))
    }

    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}

fn complex_gaussian(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im)
}

fn check_sample_dim(dim: usize) -> Result<()> {
    if dim < 2 {
        return Err(Error::InvalidArgument(format!("random states need dim >= 2, got {dim}")));
    }
    Ok(())
}

/// Haar-random pure state: a normalized vector of i.i.d. complex Gaussians.
pub fn random_pure_state(dim: usize, seed: RngSeed) -> Result<DensityMatrix> {
    check_sample_dim(dim)?;
    let mut rng = seed.rng();
    let ket: Vec<Complex64> = (0..dim).map(|_| complex_gaussian(&mut rng)).collect();
    DensityMatrix::pure(&ket)
}

/// Hilbert-Schmidt random mixed state `GG†/tr(GG†)` with `G` a square
/// Ginibre matrix.
pub fn random_mixed_state(dim: usize, seed: RngSeed) -> Result<DensityMatrix> {
    check_sample_dim(dim)?;
    let mut rng = seed.rng();
    let g = ComplexMatrix::from_row_major((0..dim * dim).map(|_| complex_gaussian(&mut rng)).collect())?;
    let w = (&g * &g.dagger()).hermitian_part();
    let tr = w.trace().re;
    DensityMatrix::new(w.scale_real(1.0 / tr))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plus() -> DensityMatrix {
        DensityMatrix::basis(2, 0).unwrap()
    }

    fn minus() -> DensityMatrix {
        DensityMatrix::basis(2, 1).unwrap()
    }

    #[test]
    fn trace_distance_examples() {
        let rho = random_mixed_state(3, RngSeed(4)).unwrap();
        assert_eq!(trace_distance(&rho, &rho).unwrap(), 0.0);
        assert!((trace_distance(&plus(), &minus()).unwrap() - 1.0).abs() < 1e-15);
        // diag(½, −½) has eigenvalues ±½, so D = ½(½ + ½)
        let d = trace_distance(&plus(), &DensityMatrix::maximally_mixed(2)).unwrap();
        assert!((d - 0.5).abs() < 1e-15);
    }

    #[test]
    fn trace_distance_dimension_mismatch() {
        let e = trace_distance(&plus(), &DensityMatrix::maximally_mixed(3));
        assert!(matches!(e, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn trace_distance_is_bitwise_symmetric() {
        for k in 0..50 {
            let a = random_mixed_state(4, RngSeed(k)).unwrap();
            let b = random_pure_state(4, RngSeed(1000 + k)).unwrap();
            assert_eq!(trace_distance(&a, &b).unwrap().to_bits(), trace_distance(&b, &a).unwrap().to_bits());
        }
    }

    #[test]
    fn invariant_checks() {
        let bad_trace = ComplexMatrix::from_real_diagonal(&[0.6, 0.6]);
        assert!(DensityMatrix::new(bad_trace).is_err());
        let negative = ComplexMatrix::from_real_diagonal(&[1.1, -0.1]);
        assert!(DensityMatrix::new(negative).is_err());
        let mut non_herm = ComplexMatrix::from_real_diagonal(&[0.5, 0.5]);
        non_herm[(0, 1)] = Complex64::new(0.1, 0.0);
        assert!(DensityMatrix::new(non_herm).is_err());
        assert!(DensityMatrix::from_bloch(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn bloch_vectors() {
        assert_eq!(DensityMatrix::maximally_mixed(2).bloch().unwrap(), (0.0, 0.0, 0.0));
        assert_eq!(plus().bloch().unwrap(), (0.0, 0.0, 1.0));
        let x = StatePair::sigma_x_pair(2).unwrap().rho1.bloch().unwrap();
        assert!((x.0 - 1.0).abs() < 1e-15 && x.1.abs() < 1e-15 && x.2.abs() < 1e-15);
        let y = DensityMatrix::from_bloch(0.0, 1.0, 0.0).unwrap().bloch().unwrap();
        assert!((y.1 - 1.0).abs() < 1e-15);
        assert!(bloch_from_qubit(&DensityMatrix::maximally_mixed(3)).is_err());
    }

    #[test]
    fn random_states_are_deterministic() {
        let seed = RngSeed(77);
        assert_eq!(random_pure_state(3, seed).unwrap(), random_pure_state(3, seed).unwrap());
        assert_eq!(random_mixed_state(3, seed).unwrap(), random_mixed_state(3, seed).unwrap());
        assert_ne!(random_pure_state(3, seed).unwrap(), random_pure_state(3, seed.derive(0)).unwrap());
        assert!(random_pure_state(1, seed).is_err());
        assert!(random_mixed_state(0, seed).is_err());
    }

    #[test]
    fn pure_states_have_unit_purity() {
        for k in 0..200 {
            let rho = random_pure_state(2 + (k as usize % 5), RngSeed(k)).unwrap();
            assert!((rho.purity() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn derived_seeds_are_distinct() {
        let base = RngSeed(1);
        let children: std::collections::HashSet<u64> = (0..10_000).map(|i| base.derive(i).0).collect();
        assert_eq!(children.len(), 10_000);
    }
}
