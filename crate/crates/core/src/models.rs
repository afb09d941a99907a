//! Exactly solvable two-level models.
//!
//! * Damped Jaynes-Cummings: a two-level atom coupled to a Lorentzian
//!   reservoir `J(ω) = γ₀λ²/2π[(ω₀ − Δ − ω)² + λ²]`. The excited-state
//!   amplitude `G(t)` obeys `G̈ + (λ − iΔ)Ġ + (γ₀λ/2)G = 0`, `G(0) = 1`,
//!   `Ġ(0) = 0`, and the time-local rate is `γ(t) = −2 Re(Ġ/G)`.
//! * Central spin in a bath of `N` spins (`H = A Σ σ_z σ_z⁽ᵏ⁾`, bath
//!   maximally mixed): coherences pick up `f(t) = cos^N(2At)`.
//! * The constant amplitude-damping semigroup as a Markovian reference.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{GeneratorSpec, OperatorFn, RateFn};
use crate::error::{Error, Result};
use crate::matrix::{pauli, ComplexMatrix};
use crate::state::{DensityMatrix, StateTolerance};

/// `|G(t)|` below this is treated as a zero crossing of the amplitude.
pub const AMPLITUDE_FLOOR: f64 = 1e-300;
/// Distance in phase `2At` below which the spin-bath rate counts as
/// sitting on a pole.
pub const POLE_GUARD: f64 = 1e-9;

/// Parameters of the damped Jaynes-Cummings model (all in inverse time).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JCParams {
    pub gamma0: f64,
    pub lambda: f64,
    pub delta: f64,
}

/// `sinh(z)/z`, accurate near zero.
fn sinhc(z: Complex64) -> Complex64 {
    if z.norm() < 1e-4 {
        let z2 = z * z;
        1.0 + z2 / 6.0 + z2 * z2 / 120.0
    } else {
        z.sinh() / z
    }
}

impl JCParams {
    pub fn new(gamma0: f64, lambda: f64, delta: f64) -> Result<Self> {
        if !(gamma0 > 0.0 && gamma0.is_finite()) {
            return Err(Error::InvalidArgument(format!("gamma0 must be positive, got {gamma0}")));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("lambda must be positive, got {lambda}")));
        }
        if !delta.is_finite() {
            return Err(Error::InvalidArgument("delta must be finite".into()));
        }
        Ok(Self { gamma0, lambda, delta })
    }

    /// Weak coupling `γ₀ = 0.01 λ` with `λ = 1`.
    pub fn weak_coupling(delta_over_lambda: f64) -> Self {
        Self { gamma0: 0.01, lambda: 1.0, delta: delta_over_lambda }
    }

    /// `κ = λ − iΔ`
    fn kappa(&self) -> Complex64 {
        Complex64::new(self.lambda, -self.delta)
    }

    /// `d = √(κ² − 2γ₀λ)` on the principal branch (`Re d ≥ 0`).
    fn discriminant(&self) -> Complex64 {
        let k = self.kappa();
        (k * k - 2.0 * self.gamma0 * self.lambda).sqrt()
    }

    fn check_time(t: f64) -> Result<()> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::InvalidArgument(format!("time must be finite and non-negative, got {t}")));
        }
        Ok(())
    }

    /// Excited-state amplitude `G(t)`.
    pub fn amplitude(&self, t: f64) -> Result<Complex64> {
        Self::check_time(t)?;
        let k = self.kappa();
        let d = self.discriminant();
        let x = d * (0.5 * t);
        if x.re.abs() < 300.0 {
            // e^{−κt/2}[cosh(dt/2) + κ(t/2)·sinhc(dt/2)]; d = 0 needs no special case
            Ok((-k * (0.5 * t)).exp() * (x.cosh() + k * (0.5 * t) * sinhc(x)))
        } else {
            let r = k / d;
            Ok(0.5 * ((d - k) * (0.5 * t)).exp() * ((1.0 + r) + (1.0 - r) * (-d * t).exp()))
        }
    }

    /// `Ġ(t)/G(t)`, computed without forming either factor's exponential.
    fn log_derivative(&self, t: f64) -> Complex64 {
        let k = self.kappa();
        let d = self.discriminant();
        let g = self.gamma0 * self.lambda;
        let x = d * (0.5 * t);
        if x.re.abs() < 300.0 {
            let s = sinhc(x) * (0.5 * t);
            -g * s / (x.cosh() + k * s)
        } else {
            let th = x.tanh();
            -g * th / (d + k * th)
        }
    }

    /// Time-local decay rate `γ(t) = −2 Re(Ġ/G)`.
    pub fn rate(&self, t: f64) -> Result<f64> {
        let modulus = self.amplitude(t)?.norm();
        if modulus < AMPLITUDE_FLOOR {
            return Err(Error::AmplitudeZero { t, modulus });
        }
        Ok(-2.0 * self.log_derivative(t).re)
    }

    /// `Γ(t) = ∫₀ᵗ γ = −2 ln|G(t)|`.
    pub fn integrated_rate(&self, t: f64) -> Result<f64> {
        let modulus = self.amplitude(t)?.norm();
        if modulus < AMPLITUDE_FLOOR {
            return Err(Error::AmplitudeZero { t, modulus });
        }
        Ok(-2.0 * modulus.ln() + 0.0)
    }

    /// `σ(t) = −γ(t) e^{−Γ(t)}` for the pair `|+⟩⟨+|`, `|−⟩⟨−|`.
    pub fn canonical_pair_sigma(&self, t: f64) -> Result<f64> {
        Ok(-self.rate(t)? * (-self.integrated_rate(t)?).exp())
    }

    /// `H = 0`, one channel `σ₋` with rate `γ(t)`.
    pub fn generator(&self) -> GeneratorSpec {
        let p = *self;
        GeneratorSpec::new(2).with_channel(
            OperatorFn::Constant(pauli::sigma_minus()),
            RateFn::TimeDependent(Arc::new(move |t| p.rate(t))),
        )
    }

    /// Same as [`JCParams::generator`] with the rate clamped at zero: a
    /// time-dependent Markovian process with the same positive stretches.
    pub fn clamped_generator(&self) -> GeneratorSpec {
        let p = *self;
        GeneratorSpec::new(2).with_channel(
            OperatorFn::Constant(pauli::sigma_minus()),
            RateFn::TimeDependent(Arc::new(move |t| Ok(p.rate(t)?.max(0.0)))),
        )
    }
}

/// Central spin coupled to `n_spins` bath spins with strength `coupling`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinBathParams {
    pub coupling: f64,
    pub n_spins: u32,
}

impl SpinBathParams {
    pub fn new(coupling: f64, n_spins: u32) -> Result<Self> {
        if !(coupling > 0.0 && coupling.is_finite()) {
            return Err(Error::InvalidArgument(format!("coupling A must be positive, got {coupling}")));
        }
        if n_spins < 1 {
            return Err(Error::InvalidArgument("spin bath needs at least one spin".into()));
        }
        Ok(Self { coupling, n_spins })
    }

    /// Length of one oscillation of `|f(t)|`: `π/(2A)`.
    pub fn period(&self) -> f64 {
        FRAC_PI_2 / self.coupling
    }

    /// Coherence factor `f(t) = cos^N(2At)`.
    pub fn decoherence(&self, t: f64) -> f64 {
        (2.0 * self.coupling * t).cos().powi(self.n_spins as i32)
    }

    /// `D(t) = √(a² + f(t)²|b|²)` for population difference `a` and
    /// coherence difference `b`.
    pub fn trace_distance(&self, a: f64, b: Complex64, t: f64) -> f64 {
        let f = self.decoherence(t);
        (a * a + f * f * b.norm_sqr()).sqrt()
    }

    /// Formal rate `γ(t) = AN tan(2At)`; undefined at `2At = π/2 mod π`.
    pub fn rate(&self, t: f64) -> Result<f64> {
        let phase = 2.0 * self.coupling * t;
        let k = ((phase - FRAC_PI_2) / PI).round();
        let pole_phase = FRAC_PI_2 + k * PI;
        if (phase - pole_phase).abs() < POLE_GUARD {
            return Err(Error::RatePole { t, pole: pole_phase / (2.0 * self.coupling) });
        }
        Ok(self.coupling * self.n_spins as f64 * phase.tan())
    }

    /// The formal master equation `H = 0`, `A = σ_z`, `γ(t) = AN tan(2At)`.
    /// Meant for evaluating signs of the rate, not for integrating across
    /// its poles.
    pub fn formal_generator(&self) -> GeneratorSpec {
        let p = *self;
        GeneratorSpec::new(2)
            .with_channel(OperatorFn::Constant(pauli::sigma_z()), RateFn::TimeDependent(Arc::new(move |t| p.rate(t))))
    }

    /// Exact reduced state at time `t`: populations fixed, coherences
    /// multiplied by `f(t)`.
    pub fn evolve(&self, rho0: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
        rho0.matrix().check_dim(2)?;
        let f = self.decoherence(t);
        let mut m: ComplexMatrix = rho0.matrix().clone();
        m[(0, 1)] *= f;
        m[(1, 0)] *= f;
        DensityMatrix::with_tolerance(m, StateTolerance::EVOLVED)
    }
}

/// Constant amplitude damping `H = 0`, `A = σ₋`, `γ = γ₀ ≥ 0`.
pub fn semigroup_generator(gamma0: f64) -> Result<GeneratorSpec> {
    if !(gamma0 >= 0.0) || !gamma0.is_finite() {
        return Err(Error::InvalidArgument(format!("semigroup rate must be non-negative, got {gamma0}")));
    }
    Ok(GeneratorSpec::new(2).with_constant_channel(pauli::sigma_minus(), gamma0))
}
