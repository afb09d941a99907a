use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("Jacobi eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:.3e})")]
    NonConvergence { sweeps: usize, off_norm: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("rate is not finite at t = {t}")]
    NonFiniteRate { t: f64 },

    #[error("amplitude G(t) vanishes at t = {t} (|G| = {modulus:.3e}); the rate is singular there")]
    AmplitudeZero { t: f64, modulus: f64 },

    #[error("rate has a pole at t = {pole} (queried t = {t})")]
    RatePole { t: f64, pole: f64 },

    #[error("invariant violated at t = {t}: {what}")]
    InvariantViolation { t: f64, what: String },

    #[error("interval {index}: {source}")]
    Interval {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("trajectory is empty")]
    EmptyTrajectory,

    #[error("all {count} state pairs failed; first failure: {first}")]
    AllPairsFailed { count: usize, first: String },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}
