//! Time-local master equations, their two-parameter propagators, and
//! complete-positivity / divisibility checks.
//!
//! The generator has the form
//!
//! ```text
//! K(t)ρ = −i[H(t), ρ] + Σᵢ γᵢ(t) [Aᵢ(t) ρ Aᵢ(t)† − ½{Aᵢ(t)†Aᵢ(t), ρ}]
//! ```
//!
//! with rates that may turn negative. Time ordering is realised by
//! composing classical RK4 steps; there is no adaptive step control.

use std::borrow::Cow;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::eigen::{eigenvalues_2x2, hermitian_eigenvalues};
use crate::error::{Error, Result};
use crate::matrix::{ComplexMatrix, I, ONE, ZERO};
use crate::state::{DensityMatrix, StateTolerance};

/// Tolerance for the Hermiticity of `H(t)`.
pub const HAMILTONIAN_HERMITIAN_TOL: f64 = 1e-10;
/// Maximum trace drift / Hermiticity-preservation defect of a propagator.
pub const PROPAGATOR_TOL: f64 = 1e-8;
/// Maximum `‖C − C†‖_max` for a Choi matrix.
pub const CHOI_HERMITIAN_TOL: f64 = 1e-9;
/// Default CP tolerance for divisibility verdicts.
pub const DEFAULT_CP_TOL: f64 = 1e-7;

pub type MatrixFn = dyn Fn(f64) -> ComplexMatrix + Send + Sync;
pub type RateFnPtr = dyn Fn(f64) -> Result<f64> + Send + Sync;

/// Operator-valued function of time.
#[derive(Clone)]
pub enum OperatorFn {
    Constant(ComplexMatrix),
    TimeDependent(Arc<MatrixFn>),
}

impl OperatorFn {
    pub fn at(&self, t: f64) -> Cow<'_, ComplexMatrix> {
        match self {
            Self::Constant(m) => Cow::Borrowed(m),
            Self::TimeDependent(f) => Cow::Owned(f(t)),
        }
    }
}

/// Real rate as a function of time. Evaluation may fail (poles,
/// vanishing amplitudes).
#[derive(Clone)]
pub enum RateFn {
    Constant(f64),
    TimeDependent(Arc<RateFnPtr>),
}

impl RateFn {
    pub fn at(&self, t: f64) -> Result<f64> {
        let g = match self {
            Self::Constant(g) => *g,
            Self::TimeDependent(f) => f(t)?,
        };
        if !g.is_finite() {
            return Err(Error::NonFiniteRate { t });
        }
        Ok(g)
    }
}

#[derive(Clone)]
pub struct Channel {
    pub jump: OperatorFn,
    pub rate: RateFn,
}

/// Data of a time-local generator: `H(t)` and the channels `(Aᵢ(t), γᵢ(t))`.
#[derive(Clone)]
pub struct GeneratorSpec {
    dim: usize,
    hamiltonian: Option<OperatorFn>,
    channels: Vec<Channel>,
}

impl fmt::Debug for GeneratorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeneratorSpec")
            .field("dim", &self.dim)
            .field("has_hamiltonian", &self.hamiltonian.is_some())
            .field("channels", &self.channels.len())
            .finish()
    }
}

impl GeneratorSpec {
    /// Generator with `H = 0` and no channels.
    pub fn new(dim: usize) -> Self {
        Self { dim, hamiltonian: None, channels: Vec::new() }
    }

    pub fn with_hamiltonian(mut self, h: OperatorFn) -> Self {
        self.hamiltonian = Some(h);
        self
    }

    pub fn with_channel(mut self, jump: OperatorFn, rate: RateFn) -> Self {
        self.channels.push(Channel { jump, rate });
        self
    }

    pub fn with_constant_channel(self, jump: ComplexMatrix, rate: f64) -> Self {
        self.with_channel(OperatorFn::Constant(jump), RateFn::Constant(rate))
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    /// Evaluates every time-dependent ingredient at `t`.
    pub fn at(&self, t: f64) -> Result<InstantGenerator> {
        let d = self.dim;
        let hamiltonian = match &self.hamiltonian {
            None => None,
            Some(h) => {
                let h = h.at(t).into_owned();
                h.check_dim(d)?;
                let deviation = h.hermiticity_defect();
                if deviation > HAMILTONIAN_HERMITIAN_TOL {
                    return Err(Error::NotHermitian { deviation });
                }
                Some(h)
            }
        };
        let mut terms = Vec::with_capacity(self.channels.len());
        for ch in &self.channels {
            let rate = ch.rate.at(t)?;
            let a = ch.jump.at(t).into_owned();
            a.check_dim(d)?;
            let a_dag = a.dagger();
            let a_dag_a = &a_dag * &a;
            terms.push(DissipatorTerm { rate, a, a_dag, a_dag_a });
        }
        Ok(InstantGenerator { dim: d, hamiltonian, terms })
    }
}

#[derive(Debug, Clone)]
struct DissipatorTerm {
    rate: f64,
    a: ComplexMatrix,
    a_dag: ComplexMatrix,
    a_dag_a: ComplexMatrix,
}

/// The generator frozen at one instant of time.
#[derive(Debug, Clone)]
pub struct InstantGenerator {
    dim: usize,
    hamiltonian: Option<ComplexMatrix>,
    terms: Vec<DissipatorTerm>,
}

impl InstantGenerator {
    pub fn apply(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        let mut out = match &self.hamiltonian {
            Some(h) => h.commutator(rho).scale(-I),
            None => ComplexMatrix::zeros(self.dim),
        };
        for term in &self.terms {
            if term.rate == 0.0 {
                continue;
            }
            let jump = &(&term.a * rho) * &term.a_dag;
            let anti = term.a_dag_a.anticommutator(rho);
            out.add_scaled(Complex64::new(term.rate, 0.0), &jump);
            out.add_scaled(Complex64::new(-0.5 * term.rate, 0.0), &anti);
        }
        out
    }
}

/// `K(t)ρ` for the generator `gen`.
pub fn apply_generator(gen: &GeneratorSpec, t: f64, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
    rho.check_dim(gen.dim)?;
    Ok(gen.at(t)?.apply(rho))
}

/// Uniform time grid `t_k = start + k·step`, `k = 0..len`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeGrid {
    start: f64,
    step: f64,
    len: usize,
}

impl TimeGrid {
    pub fn new(start: f64, step: f64, n_steps: usize) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() || !start.is_finite() {
            return Err(Error::InvalidArgument(format!("time step must be positive and finite, got {step}")));
        }
        Ok(Self { start, step, len: n_steps + 1 })
    }

    /// Grid on `[0, horizon]` with the given step; the last point is the
    /// largest multiple of `step` not exceeding `horizon` (up to 1e-9
    /// relative slack).
    pub fn covering(horizon: f64, step: f64) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidArgument(format!("horizon must be positive and finite, got {horizon}")));
        }
        let n = (horizon / step * (1.0 + 1e-9)).floor();
        if !(n >= 1.0) {
            return Err(Error::InvalidArgument(format!("step {step} exceeds horizon {horizon}")));
        }
        Self::new(0.0, step, n as usize)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn step(&self) -> f64 {
        self.step
    }

    #[inline]
    pub fn start(&self) -> f64 {
        self.start
    }

    #[inline]
    pub fn time(&self, k: usize) -> f64 {
        self.start + k as f64 * self.step
    }

    pub fn end(&self) -> f64 {
        self.time(self.len - 1)
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len).map(|k| self.time(k)).collect()
    }
}

fn rk4_step(
    start: &InstantGenerator,
    mid: &InstantGenerator,
    end: &InstantGenerator,
    rho: &ComplexMatrix,
    h: f64,
) -> ComplexMatrix {
    let half = Complex64::new(0.5 * h, 0.0);
    let k1 = start.apply(rho);
    let mut probe = rho.clone();
    probe.add_scaled(half, &k1);
    let k2 = mid.apply(&probe);
    let mut probe = rho.clone();
    probe.add_scaled(half, &k2);
    let k3 = mid.apply(&probe);
    let mut probe = rho.clone();
    probe.add_scaled(Complex64::new(h, 0.0), &k3);
    let k4 = end.apply(&probe);

    let mut out = rho.clone();
    let sixth = Complex64::new(h / 6.0, 0.0);
    let third = Complex64::new(h / 3.0, 0.0);
    out.add_scaled(sixth, &k1);
    out.add_scaled(third, &k2);
    out.add_scaled(third, &k3);
    out.add_scaled(sixth, &k4);
    out
}

/// Checks an evolved, already symmetrized state against the relaxed
/// density-matrix tolerances.
pub(crate) fn check_evolved(m: &ComplexMatrix, t: f64) -> Result<()> {
    let tol = StateTolerance::EVOLVED;
    if !m.is_finite() {
        return Err(Error::InvariantViolation { t, what: "non-finite state entries".into() });
    }
    let drift = (m.trace() - ONE).norm();
    if drift > tol.trace {
        return Err(Error::InvariantViolation { t, what: format!("trace drift {drift:.3e}") });
    }
    let least = if m.dim() == 2 {
        eigenvalues_2x2(m[(0, 0)].re, m[(1, 1)].re, m[(0, 1)])[0]
    } else {
        hermitian_eigenvalues(m).map_err(|e| Error::InvariantViolation { t, what: e.to_string() })?[0]
    };
    if least < -tol.positivity {
        return Err(Error::InvariantViolation { t, what: format!("state eigenvalue {least:.3e} below tolerance") });
    }
    Ok(())
}

/// RK4 solution of `dρ/dt = K(t)ρ` sampled on `grid`, starting from
/// `rho0` at `grid.start()`. Every output state is Hermitian-symmetrized
/// and re-validated; the first failure aborts with the offending time.
pub fn evolve_state(gen: &GeneratorSpec, rho0: &DensityMatrix, grid: &TimeGrid) -> Result<Vec<DensityMatrix>> {
    rho0.matrix().check_dim(gen.dim)?;
    let h = grid.step();
    let mut out = Vec::with_capacity(grid.len());
    out.push(rho0.clone());
    let mut rho = rho0.matrix().clone();
    let mut current = gen.at(grid.time(0))?;
    for k in 1..grid.len() {
        let t0 = grid.time(k - 1);
        let mid = gen.at(t0 + 0.5 * h)?;
        let end = gen.at(grid.time(k))?;
        rho = rk4_step(&current, &mid, &end, &rho, h);
        rho.symmetrize();
        let t = grid.time(k);
        check_evolved(&rho, t)?;
        out.push(DensityMatrix::with_tolerance(rho.clone(), StateTolerance::EVOLVED)?);
        current = end;
    }
    Ok(out)
}

/// Linear map on `d×d` matrices as a `d²×d²` superoperator acting on
/// column-stacked vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Propagator {
    dim: usize,
    pub t_start: f64,
    pub t_end: f64,
    superop: ComplexMatrix,
}

impl Propagator {
    pub fn identity(dim: usize, t: f64) -> Self {
        Self { dim, t_start: t, t_end: t, superop: ComplexMatrix::identity(dim * dim) }
    }

    /// Wraps a superoperator, checking trace and Hermiticity preservation.
    pub fn from_superoperator(dim: usize, t_start: f64, t_end: f64, superop: ComplexMatrix) -> Result<Self> {
        superop.check_dim(dim * dim)?;
        let p = Self { dim, t_start, t_end, superop };
        let tp = p.trace_preservation_defect();
        if tp > PROPAGATOR_TOL {
            return Err(Error::InvariantViolation { t: t_end, what: format!("trace preservation defect {tp:.3e}") });
        }
        let hp = p.hermiticity_preservation_defect();
        if hp > PROPAGATOR_TOL {
            return Err(Error::InvariantViolation {
                t: t_end,
                what: format!("Hermiticity preservation defect {hp:.3e}"),
            });
        }
        Ok(p)
    }

    fn from_images(dim: usize, t_start: f64, t_end: f64, images: &[ComplexMatrix]) -> Result<Self> {
        let n = dim * dim;
        let mut superop = ComplexMatrix::zeros(n);
        for j in 0..dim {
            for k in 0..dim {
                let col = j + k * dim;
                for (row, v) in images[j * dim + k].vectorize().into_iter().enumerate() {
                    superop[(row, col)] = v;
                }
            }
        }
        Self::from_superoperator(dim, t_start, t_end, superop)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn superoperator(&self) -> &ComplexMatrix {
        &self.superop
    }

    /// `Φ(m)` for an arbitrary matrix.
    pub fn apply(&self, m: &ComplexMatrix) -> Result<ComplexMatrix> {
        m.check_dim(self.dim)?;
        Ok(ComplexMatrix::from_vectorized(self.dim, &self.superop.apply(&m.vectorize())))
    }

    /// `Φ(ρ)` validated as a density matrix (integrator tolerances).
    pub fn apply_state(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        let mut out = self.apply(rho.matrix())?;
        out.symmetrize();
        check_evolved(&out, self.t_end)?;
        DensityMatrix::with_tolerance(out, StateTolerance::EVOLVED)
    }

    /// `self ∘ earlier`, i.e. first `earlier`, then `self`.
    pub fn compose(&self, earlier: &Propagator) -> Result<Propagator> {
        if self.dim != earlier.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: earlier.dim });
        }
        Ok(Self {
            dim: self.dim,
            t_start: earlier.t_start,
            t_end: self.t_end,
            superop: &self.superop * &earlier.superop,
        })
    }

    /// Image of the matrix unit `E_jk`.
    pub fn image_of_unit(&self, j: usize, k: usize) -> ComplexMatrix {
        let d = self.dim;
        let col = j + k * d;
        let column: Vec<Complex64> = (0..d * d).map(|row| self.superop[(row, col)]).collect();
        ComplexMatrix::from_vectorized(d, &column)
    }

    /// `max_jk |tr Φ(E_jk) − δ_jk|`, equivalently how far the adjoint map
    /// is from fixing the identity.
    pub fn trace_preservation_defect(&self) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for j in 0..d {
            for k in 0..d {
                let target = if j == k { ONE } else { ZERO };
                worst = worst.max((self.image_of_unit(j, k).trace() - target).norm());
            }
        }
        worst
    }

    /// `max_jk ‖Φ(E_jk)† − Φ(E_kj)‖_max`.
    pub fn hermiticity_preservation_defect(&self) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for j in 0..d {
            for k in j..d {
                let a = self.image_of_unit(j, k).dagger();
                let b = self.image_of_unit(k, j);
                worst = worst.max((&a - &b).max_abs());
            }
        }
        worst
    }
}

fn evolve_units(gen: &GeneratorSpec, t1: f64, t2: f64, h: f64) -> Result<Vec<ComplexMatrix>> {
    let d = gen.dim;
    let mut images: Vec<ComplexMatrix> =
        (0..d).flat_map(|j| (0..d).map(move |k| ComplexMatrix::unit(d, j, k))).collect();
    let n_steps = ((t2 - t1) / h - 1e-9).ceil().max(1.0) as usize;
    let step = (t2 - t1) / n_steps as f64;
    let mut current = gen.at(t1)?;
    for s in 0..n_steps {
        let t0 = t1 + s as f64 * step;
        let mid = gen.at(t0 + 0.5 * step)?;
        let end = gen.at(t1 + (s + 1) as f64 * step)?;
        for m in images.iter_mut() {
            *m = rk4_step(&current, &mid, &end, m, step);
        }
        current = end;
    }
    Ok(images)
}

/// `Φ(t₂, t₁)`, built by integrating every matrix unit from `t1` to `t2`
/// with RK4 steps no longer than `h`. `t1 == t2` gives the identity.
pub fn propagator_between(gen: &GeneratorSpec, t1: f64, t2: f64, h: f64) -> Result<Propagator> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {h}")));
    }
    if !(t1 <= t2) {
        return Err(Error::InvalidArgument(format!("propagator needs t1 <= t2, got t1 = {t1}, t2 = {t2}")));
    }
    if t1 == t2 {
        return Ok(Propagator::identity(gen.dim, t1));
    }
    let images = evolve_units(gen, t1, t2, h)?;
    Propagator::from_images(gen.dim, t1, t2, &images)
}

/// `C = Σ_jk E_jk ⊗ Φ(E_jk)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiMatrix {
    matrix: ComplexMatrix,
}

impl ChoiMatrix {
    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        hermitian_eigenvalues(&self.matrix)
    }

    pub fn least_eigenvalue(&self) -> Result<f64> {
        Ok(self.eigenvalues()?[0])
    }
}

pub fn choi_of(p: &Propagator) -> Result<ChoiMatrix> {
    let d = p.dim;
    let mut c = ComplexMatrix::zeros(d * d);
    for j in 0..d {
        for k in 0..d {
            let img = p.image_of_unit(j, k);
            for a in 0..d {
                for b in 0..d {
                    c[(j * d + a, k * d + b)] = img[(a, b)];
                }
            }
        }
    }
    let deviation = c.hermiticity_defect();
    if deviation > CHOI_HERMITIAN_TOL {
        return Err(Error::NotHermitian { deviation });
    }
    c.symmetrize();
    Ok(ChoiMatrix { matrix: c })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CpVerdict {
    pub is_cp: bool,
    pub least_eigenvalue: f64,
}

/// Complete positivity via the least Choi eigenvalue.
pub fn is_cp(p: &Propagator, tol: f64) -> Result<CpVerdict> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("CP tolerance must be positive, got {tol}")));
    }
    let least_eigenvalue = choi_of(p)?.least_eigenvalue()?;
    Ok(CpVerdict { is_cp: least_eigenvalue >= -tol, least_eigenvalue })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntervalVerdict {
    pub t_start: f64,
    pub t_end: f64,
    pub is_cp: bool,
    pub least_eigenvalue: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivisibilityReport {
    pub intervals: Vec<IntervalVerdict>,
    /// True iff every interval map is CP.
    pub divisible: bool,
}

/// Builds `Φ(t_{k+1}, t_k)` for every consecutive pair of grid points
/// (integration step at most `h`) and tests each for complete positivity.
pub fn divisibility_report(gen: &GeneratorSpec, grid: &TimeGrid, tol: f64, h: f64) -> Result<DivisibilityReport> {
    if grid.len() < 2 {
        return Err(Error::InvalidArgument("divisibility needs a grid of at least two points".into()));
    }
    let intervals = (0..grid.len() - 1)
        .into_par_iter()
        .map(|k| {
            let (t1, t2) = (grid.time(k), grid.time(k + 1));
            propagator_between(gen, t1, t2, h)
                .and_then(|p| is_cp(&p, tol))
                .map(|v| IntervalVerdict {
                    t_start: t1,
                    t_end: t2,
                    is_cp: v.is_cp,
                    least_eigenvalue: v.least_eigenvalue,
                })
                .map_err(|e| Error::Interval { index: k, source: Box::new(e) })
        })
        .collect::<Result<Vec<_>>>()?;
    let divisible = intervals.iter().all(|v| v.is_cp);
    Ok(DivisibilityReport { intervals, divisible })
}

/// The family `Φ(t_k, 0)` sampled on every point of a grid, from one RK4
/// sweep over the matrix units. Evolving many initial states through the
/// same generator then costs one matrix-vector product per grid point.
#[derive(Debug, Clone)]
pub struct SampledFlow {
    dim: usize,
    grid: TimeGrid,
    superops: Vec<ComplexMatrix>,
}

impl SampledFlow {
    pub fn new(gen: &GeneratorSpec, grid: &TimeGrid) -> Result<Self> {
        let d = gen.dim;
        let h = grid.step();
        let mut images: Vec<ComplexMatrix> =
            (0..d).flat_map(|j| (0..d).map(move |k| ComplexMatrix::unit(d, j, k))).collect();
        let mut superops = Vec::with_capacity(grid.len());
        superops.push(ComplexMatrix::identity(d * d));
        let mut current = gen.at(grid.time(0))?;
        for k in 1..grid.len() {
            let mid = gen.at(grid.time(k - 1) + 0.5 * h)?;
            let end = gen.at(grid.time(k))?;
            for m in images.iter_mut() {
                *m = rk4_step(&current, &mid, &end, m, h);
            }
            let p = Propagator::from_images(d, grid.time(0), grid.time(k), &images)?;
            superops.push(p.superop);
            current = end;
        }
        Ok(Self { dim: d, grid: *grid, superops })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn propagator(&self, k: usize) -> Propagator {
        Propagator {
            dim: self.dim,
            t_start: self.grid.start(),
            t_end: self.grid.time(k),
            superop: self.superops[k].clone(),
        }
    }

    /// Writes `Φ(t_k, 0)(ρ)` into `out` (same dimension), given the
    /// column-stacked input `vec_rho`.
    pub fn apply_into(&self, k: usize, vec_rho: &[Complex64], out: &mut ComplexMatrix) {
        let d = self.dim;
        let s = &self.superops[k];
        let n = d * d;
        let data = s.as_slice();
        for row in 0..n {
            let acc: Complex64 = data[row * n..(row + 1) * n].iter().zip(vec_rho).map(|(a, b)| a * b).sum();
            out[(row % d, row / d)] = acc;
        }
    }
}
