//! Simulation of open quantum systems under time-local master equations
//! and the trace-distance measure of non-Markovianity.
//!
//! The measure sums, for a pair of initial states, the growth of their
//! trace distance over every interval in which it increases, and
//! maximizes that sum over pairs. Growth of distinguishability signals
//! information flowing back from the environment; Markovian (divisible)
//! dynamics never produce it.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dynamics;
pub mod eigen;
pub mod error;
pub mod io;
pub mod matrix;
pub mod measure;
pub mod models;
pub mod state;

pub use dynamics::{
    apply_generator, choi_of, divisibility_report, evolve_state, is_cp, propagator_between, ChoiMatrix, CpVerdict,
    DivisibilityReport, GeneratorSpec, OperatorFn, Propagator, RateFn, SampledFlow, TimeGrid,
};
pub use eigen::{hermitian_eigen, hermitian_eigenvalues};
pub use error::{Error, Result};
pub use matrix::ComplexMatrix;
pub use measure::{
    growth_intervals, n_for_pair, n_measure, sweep, trajectory, GrowthInterval, MeasureResult, MeasureSettings,
    PairEvolution, SweepRecord, TrajectoryGrid,
};
pub use models::{semigroup_generator, JCParams, SpinBathParams};
pub use state::{
    bloch_from_qubit, random_mixed_state, random_pure_state, trace_distance, DensityMatrix, RngSeed, StatePair,
};
