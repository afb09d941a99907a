//! Eigenvalues of small Hermitian matrices.
//!
//! `d = 2` uses the closed form; larger matrices go through cyclic complex
//! Jacobi rotations. Each rotation is a phase change that makes the pivot
//! `a_pq` real followed by an ordinary real plane rotation, so the iteration
//! is the textbook symmetric Jacobi method in disguise.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matrix::{ComplexMatrix, ZERO};

/// Maximum tolerated `‖m − m†‖_max` for eigenvalue input.
pub const HERMITIAN_INPUT_TOL: f64 = 1e-10;
/// Jacobi stops once the off-diagonal Frobenius norm falls below this
/// fraction of the full Frobenius norm.
pub const JACOBI_OFF_DIAGONAL_TOL: f64 = 1e-13;
const MAX_SWEEPS: usize = 64;

/// Eigen-decomposition `m = V Λ V†` with eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Column `k` is the eigenvector belonging to `values[k]`.
    pub vectors: ComplexMatrix,
}

impl HermitianEigen {
    /// `‖m − VΛV†‖_max`, the validation-mode check.
    pub fn reconstruction_residual(&self, m: &ComplexMatrix) -> f64 {
        let lambda = ComplexMatrix::from_real_diagonal(&self.values);
        let rebuilt = &(&self.vectors * &lambda) * &self.vectors.dagger();
        (m - &rebuilt).max_abs()
    }
}

/// Eigenvalues of the 2×2 Hermitian matrix `[[a, z], [z̄, b]]`, ascending.
#[inline]
pub fn eigenvalues_2x2(a: f64, b: f64, z: Complex64) -> [f64; 2] {
    let mean = 0.5 * (a + b);
    let radius = (0.5 * (a - b)).hypot(z.norm());
    [mean - radius, mean + radius]
}

fn check_hermitian(m: &ComplexMatrix) -> Result<()> {
    if !m.is_finite() {
        return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
    }
    let deviation = m.hermiticity_defect();
    if deviation > HERMITIAN_INPUT_TOL {
        return Err(Error::NotHermitian { deviation });
    }
    Ok(())
}

/// Real eigenvalues of a Hermitian matrix, sorted ascending.
pub fn hermitian_eigenvalues(m: &ComplexMatrix) -> Result<Vec<f64>> {
    check_hermitian(m)?;
    match m.dim() {
        1 => Ok(vec![m[(0, 0)].re]),
        2 => Ok(eigenvalues_2x2(m[(0, 0)].re, m[(1, 1)].re, m[(0, 1)]).to_vec()),
        _ => {
            let mut a = m.hermitian_part();
            jacobi_diagonalize(&mut a, None)?;
            let mut values: Vec<f64> = (0..a.dim()).map(|k| a[(k, k)].re).collect();
            values.sort_by(f64::total_cmp);
            Ok(values)
        }
    }
}

/// Full eigen-decomposition by Jacobi rotations (any dimension).
pub fn hermitian_eigen(m: &ComplexMatrix) -> Result<HermitianEigen> {
    check_hermitian(m)?;
    let n = m.dim();
    let mut a = m.hermitian_part();
    let mut v = ComplexMatrix::identity(n);
    jacobi_diagonalize(&mut a, Some(&mut v))?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    let values = order.iter().map(|&k| a[(k, k)].re).collect();
    let mut vectors = ComplexMatrix::zeros(n);
    for (new_col, &old_col) in order.iter().enumerate() {
        for r in 0..n {
            vectors[(r, new_col)] = v[(r, old_col)];
        }
    }
    Ok(HermitianEigen { values, vectors })
}

fn off_diagonal_norm(a: &ComplexMatrix) -> f64 {
    let n = a.dim();
    let mut s = 0.0;
    for r in 0..n {
        for c in 0..n {
            if r != c {
                s += a[(r, c)].norm_sqr();
            }
        }
    }
    s.sqrt()
}

fn jacobi_diagonalize(a: &mut ComplexMatrix, mut v: Option<&mut ComplexMatrix>) -> Result<()> {
    let n = a.dim();
    let scale = a.frobenius_norm();
    if scale == 0.0 {
        return Ok(());
    }
    let target = JACOBI_OFF_DIAGONAL_TOL * scale;

    for _ in 0..MAX_SWEEPS {
        if off_diagonal_norm(a) <= target {
            return Ok(());
        }
        for p in 0..n {
            for q in p + 1..n {
                rotate(a, v.as_deref_mut(), p, q);
            }
        }
    }
    let off_norm = off_diagonal_norm(a);
    if off_norm <= target {
        Ok(())
    } else {
        Err(Error::NonConvergence { sweeps: MAX_SWEEPS, off_norm })
    }
}

/// Annihilates `a[p][q]` with the unitary `U = diag(1, e^{-iφ}) · R(θ)`
/// acting on coordinates `(p, q)`; `a ← U† a U`, `v ← v U`.
fn rotate(a: &mut ComplexMatrix, v: Option<&mut ComplexMatrix>, p: usize, q: usize) {
    let z = a[(p, q)];
    let modulus = z.norm();
    if modulus == 0.0 {
        return;
    }
    let phase = (z / modulus).conj();
    let (app, aqq) = (a[(p, p)].re, a[(q, q)].re);

    let theta = (aqq - app) / (2.0 * modulus);
    let t =
        if theta.abs() > 1e150 { 0.5 / theta } else { theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt()) };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    let u_pp = Complex64::new(c, 0.0);
    let u_pq = Complex64::new(s, 0.0);
    let u_qp = phase * -s;
    let u_qq = phase * c;

    let n = a.dim();
    for k in 0..n {
        let (akp, akq) = (a[(k, p)], a[(k, q)]);
        a[(k, p)] = akp * u_pp + akq * u_qp;
        a[(k, q)] = akp * u_pq + akq * u_qq;
    }
    for k in 0..n {
        let (apk, aqk) = (a[(p, k)], a[(q, k)]);
        a[(p, k)] = u_pp.conj() * apk + u_qp.conj() * aqk;
        a[(q, k)] = u_pq.conj() * apk + u_qq.conj() * aqk;
    }
    a[(p, q)] = ZERO;
    a[(q, p)] = ZERO;
    a[(p, p)] = Complex64::new(app - t * modulus, 0.0);
    a[(q, q)] = Complex64::new(aqq + t * modulus, 0.0);

    if let Some(v) = v {
        for k in 0..n {
            let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
            v[(k, p)] = vkp * u_pp + vkq * u_qp;
            v[(k, q)] = vkp * u_pq + vkq * u_qq;
        }
    }
}
