//! Rate of change of the trace distance, growth intervals and the
//! non-Markovianity functional
//!
//! ```text
//! N(Φ) = max over ρ₁,₂(0) of Σᵢ [D(bᵢ) − D(aᵢ)]
//! ```
//!
//! where `(aᵢ, bᵢ)` are the intervals on which `σ = dD/dt` is positive.
//! The time integral is truncated at a finite horizon and the maximum is
//! taken over a seeded sample of pairs plus a fixed list of canonical pairs.

use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{check_evolved, evolve_state, GeneratorSpec, SampledFlow, TimeGrid};
use crate::error::{Error, Result};
use crate::matrix::ComplexMatrix;
use crate::models::SpinBathParams;
use crate::state::{canonical_sign, half_trace_norm, random_mixed_state, random_pure_state, trace_distance};
use crate::state::{RngSeed, StatePair};

/// Relative part of the default σ threshold (times `max|σ|`).
pub const THRESHOLD_RELATIVE: f64 = 1e-9;
/// Absolute floor of the default σ threshold.
pub const THRESHOLD_FLOOR: f64 = 1e-12;
/// A last interval contributing more than this marks a diverging measure.
pub const DIVERGENCE_CONTRIBUTION: f64 = 0.5;

/// Anything that can evolve a pair of initial states and report their
/// trace distance on a time grid.
pub trait PairEvolution: Sync {
    fn dim(&self) -> usize;

    /// `D(ρ₁(t_k), ρ₂(t_k))` for every grid point.
    fn distance_series(&self, pair: &StatePair, grid: &TimeGrid) -> Result<Vec<f64>>;

    /// Optional faster evaluator for many pairs on the same grid.
    fn prepare(&self, _grid: &TimeGrid) -> Result<Option<Box<dyn PairEvolution + '_>>> {
        Ok(None)
    }
}

fn check_pair_dim(expected: usize, pair: &StatePair) -> Result<()> {
    if pair.dim() != expected {
        return Err(Error::DimensionMismatch { expected, found: pair.dim() });
    }
    Ok(())
}

impl PairEvolution for GeneratorSpec {
    fn dim(&self) -> usize {
        GeneratorSpec::dim(self)
    }

    fn distance_series(&self, pair: &StatePair, grid: &TimeGrid) -> Result<Vec<f64>> {
        check_pair_dim(GeneratorSpec::dim(self), pair)?;
        let first = evolve_state(self, &pair.rho1, grid)?;
        let second = evolve_state(self, &pair.rho2, grid)?;
        first.iter().zip(&second).map(|(a, b)| trace_distance(a, b)).collect()
    }

    fn prepare(&self, grid: &TimeGrid) -> Result<Option<Box<dyn PairEvolution + '_>>> {
        Ok(Some(Box::new(SampledFlow::new(self, grid)?)))
    }
}

impl PairEvolution for SampledFlow {
    fn dim(&self) -> usize {
        SampledFlow::dim(self)
    }

    fn distance_series(&self, pair: &StatePair, grid: &TimeGrid) -> Result<Vec<f64>> {
        check_pair_dim(SampledFlow::dim(self), pair)?;
        if grid != self.grid() {
            return Err(Error::InvalidArgument("sampled flow was built for a different grid".into()));
        }
        let d = SampledFlow::dim(self);
        let v1 = pair.rho1.matrix().vectorize();
        let v2 = pair.rho2.matrix().vectorize();
        let mut r1 = ComplexMatrix::zeros(d);
        let mut r2 = ComplexMatrix::zeros(d);
        let mut out = Vec::with_capacity(grid.len());
        for k in 0..grid.len() {
            let t = grid.time(k);
            self.apply_into(k, &v1, &mut r1);
            self.apply_into(k, &v2, &mut r2);
            r1.symmetrize();
            r2.symmetrize();
            check_evolved(&r1, t)?;
            check_evolved(&r2, t)?;
            let mut diff = &r1 - &r2;
            canonical_sign(&mut diff);
            out.push(half_trace_norm(&diff)?.clamp(0.0, 1.0));
        }
        Ok(out)
    }
}

impl PairEvolution for SpinBathParams {
    fn dim(&self) -> usize {
        2
    }

    fn distance_series(&self, pair: &StatePair, grid: &TimeGrid) -> Result<Vec<f64>> {
        check_pair_dim(2, pair)?;
        (0..grid.len())
            .map(|k| {
                let t = grid.time(k);
                trace_distance(&self.evolve(&pair.rho1, t)?, &self.evolve(&pair.rho2, t)?)
            })
            .collect()
    }
}

/// `D(t)` and `σ(t) = dD/dt` sampled on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryGrid {
    pub times: Vec<f64>,
    pub distances: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl TrajectoryGrid {
    /// Differentiates `distances` sampled on `grid`: central differences
    /// inside, second-order one-sided stencils at both ends.
    pub fn from_distances(grid: &TimeGrid, distances: Vec<f64>) -> Result<Self> {
        let n = distances.len();
        if n != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), found: n });
        }
        if n < 3 {
            return Err(Error::InvalidArgument(format!("trajectory needs at least 3 points, got {n}")));
        }
        if let Some(bad) = distances.iter().find(|d| !(-1e-10..=1.0 + 1e-10).contains(*d)) {
            return Err(Error::InvalidArgument(format!("trace distance {bad} outside [0, 1]")));
        }
        let h = grid.step();
        let mut sigma = Vec::with_capacity(n);
        sigma.push((-3.0 * distances[0] + 4.0 * distances[1] - distances[2]) / (2.0 * h));
        for k in 1..n - 1 {
            sigma.push((distances[k + 1] - distances[k - 1]) / (2.0 * h));
        }
        sigma.push((3.0 * distances[n - 1] - 4.0 * distances[n - 2] + distances[n - 3]) / (2.0 * h));
        Ok(Self { times: grid.times(), distances, sigma })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn step(&self) -> f64 {
        self.times[1] - self.times[0]
    }

    /// `max(THRESHOLD_RELATIVE · max|σ|, THRESHOLD_FLOOR)`.
    pub fn default_threshold(&self) -> f64 {
        let peak = self.sigma.iter().fold(0.0_f64, |m, s| m.max(s.abs()));
        (THRESHOLD_RELATIVE * peak).max(THRESHOLD_FLOOR)
    }

    /// Cubic Hermite interpolation of `D` using `σ` as the slope.
    fn distance_at(&self, t: f64) -> f64 {
        let h = self.step();
        let t0 = self.times[0];
        let last = self.len() - 1;
        let mut k = (((t - t0) / h).floor().max(0.0) as usize).min(last - 1);
        while k + 1 < last && t > self.times[k + 1] {
            k += 1;
        }
        while k > 0 && t < self.times[k] {
            k -= 1;
        }
        let s = ((t - self.times[k]) / h).clamp(0.0, 1.0);
        let (d0, d1) = (self.distances[k], self.distances[k + 1]);
        let (m0, m1) = (self.sigma[k] * h, self.sigma[k + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * d0 + (s3 - 2.0 * s2 + s) * m0 + (-2.0 * s3 + 3.0 * s2) * d1 + (s3 - s2) * m1
    }
}

/// Checks the horizon/step preconditions shared by every entry point.
fn measure_grid(horizon: f64, step: f64) -> Result<TimeGrid> {
    if !(step > 0.0) || !(horizon > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "horizon and step must be positive, got T = {horizon}, h = {step}"
        )));
    }
    if horizon / step < 10.0 * (1.0 - 1e-12) {
        return Err(Error::InvalidArgument(format!("horizon/step = {} is below 10", horizon / step)));
    }
    TimeGrid::covering(horizon, step)
}

/// Evolves both members of `pair` to `horizon` and records `D` and `σ`.
pub fn trajectory<E: PairEvolution + ?Sized>(
    process: &E,
    pair: &StatePair,
    horizon: f64,
    step: f64,
) -> Result<TrajectoryGrid> {
    let grid = measure_grid(horizon, step)?;
    TrajectoryGrid::from_distances(&grid, process.distance_series(pair, &grid)?)
}

/// Interval `(start, end)` on which `σ > 0`, with its trace-distance growth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthInterval {
    pub start: f64,
    pub end: f64,
    pub contribution: f64,
}

/// Maximal runs of grid points with `σ > threshold` (default
/// [`TrajectoryGrid::default_threshold`]). Inner endpoints are placed at
/// the linearly interpolated zero of `σ`; the contribution uses `D`
/// interpolated at those endpoints.
pub fn growth_intervals(traj: &TrajectoryGrid, threshold: Option<f64>) -> Result<Vec<GrowthInterval>> {
    if traj.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let eps = match threshold {
        Some(e) if e >= 0.0 => e,
        Some(e) => return Err(Error::InvalidArgument(format!("threshold must be non-negative, got {e}"))),
        None => traj.default_threshold(),
    };
    let sigma = &traj.sigma;
    let t = &traj.times;
    let last = traj.len() - 1;
    let mut out = Vec::new();
    let mut k = 0;
    while k <= last {
        if sigma[k] <= eps {
            k += 1;
            continue;
        }
        let first = k;
        while k < last && sigma[k + 1] > eps {
            k += 1;
        }
        let final_ = k;
        k += 1;

        let start = if first == 0 {
            t[0]
        } else {
            let (s0, s1) = (sigma[first - 1], sigma[first]);
            if s0 < 0.0 {
                t[first - 1] + (t[first] - t[first - 1]) * s0 / (s0 - s1)
            } else {
                t[first - 1]
            }
        };
        let end = if final_ == last {
            t[last]
        } else {
            let (s0, s1) = (sigma[final_], sigma[final_ + 1]);
            if s1 < 0.0 {
                t[final_] + (t[final_ + 1] - t[final_]) * s0 / (s0 - s1)
            } else {
                t[final_ + 1]
            }
        };
        let contribution = (traj.distance_at(end) - traj.distance_at(start)).max(0.0);
        out.push(GrowthInterval { start, end, contribution });
    }
    Ok(out)
}

/// Settings shared by [`n_for_pair`], [`n_measure`] and [`sweep`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeasureSettings {
    pub horizon: f64,
    pub step: f64,
    /// `None` selects the trajectory-relative default.
    pub threshold: Option<f64>,
    pub n_pairs: usize,
    pub seed: RngSeed,
}

impl MeasureSettings {
    pub fn new(horizon: f64, step: f64) -> Self {
        Self { horizon, step, threshold: None, n_pairs: 1000, seed: RngSeed(0) }
    }
}

/// `N` of one named pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairScore {
    pub label: String,
    pub n_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairFailure {
    pub index: usize,
    pub label: String,
    pub message: String,
}

/// Outcome of a measure evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureResult {
    /// Growth intervals of the best pair, sorted and disjoint.
    pub intervals: Vec<GrowthInterval>,
    pub n_value: f64,
    /// Truncation time actually used (last grid point).
    pub horizon: f64,
    pub best_pair: StatePair,
    pub samples_evaluated: usize,
    pub seed: RngSeed,
    /// The last growth interval still contributes more than
    /// [`DIVERGENCE_CONTRIBUTION`]: the untruncated measure diverges.
    pub diverging: bool,
    pub canonical: Vec<PairScore>,
    /// Best value among the random pairs only.
    pub sampled_max: Option<f64>,
    pub failures: Vec<PairFailure>,
}

struct PairOutcome {
    intervals: Vec<GrowthInterval>,
    n_value: f64,
}

fn evaluate_pair(
    process: &(impl PairEvolution + ?Sized),
    pair: &StatePair,
    grid: &TimeGrid,
    threshold: Option<f64>,
) -> Result<PairOutcome> {
    let traj = TrajectoryGrid::from_distances(grid, process.distance_series(pair, grid)?)?;
    let intervals = growth_intervals(&traj, threshold)?;
    let n_value = intervals.iter().map(|i| i.contribution).fold(0.0, |a, c| a + c);
    Ok(PairOutcome { intervals, n_value })
}

fn result_from(outcome: PairOutcome, pair: StatePair, grid: &TimeGrid, seed: RngSeed) -> MeasureResult {
    let diverging = outcome.intervals.last().is_some_and(|i| i.contribution > DIVERGENCE_CONTRIBUTION);
    MeasureResult {
        intervals: outcome.intervals,
        n_value: outcome.n_value,
        horizon: grid.end(),
        best_pair: pair,
        samples_evaluated: 1,
        seed,
        diverging,
        canonical: Vec::new(),
        sampled_max: None,
        failures: Vec::new(),
    }
}

/// Truncated `Σᵢ [D(bᵢ) − D(aᵢ)]` for a single pair.
pub fn n_for_pair<E: PairEvolution + ?Sized>(
    process: &E,
    pair: &StatePair,
    settings: &MeasureSettings,
) -> Result<MeasureResult> {
    let grid = measure_grid(settings.horizon, settings.step)?;
    let outcome = evaluate_pair(process, pair, &grid, settings.threshold)?;
    Ok(result_from(outcome, pair.clone(), &grid, settings.seed))
}

/// Canonical pairs always evaluated before the random sample.
pub fn canonical_pairs(dim: usize) -> Result<Vec<StatePair>> {
    Ok(vec![StatePair::sigma_z_pair(dim)?, StatePair::sigma_x_pair(dim)?])
}

/// Random pair number `index`. Kinds cycle pure/pure, pure/pure,
/// pure/mixed, mixed/mixed; every pair depends only on `(seed, index)`.
pub fn sample_pair(dim: usize, seed: RngSeed, index: usize) -> Result<StatePair> {
    let s = seed.derive(index as u64);
    let (a, b) = (s.derive(0), s.derive(1));
    let (rho1, rho2, kind) = match index % 4 {
        0 | 1 => (random_pure_state(dim, a)?, random_pure_state(dim, b)?, "pure/pure"),
        2 => (random_pure_state(dim, a)?, random_mixed_state(dim, b)?, "pure/mixed"),
        _ => (random_mixed_state(dim, a)?, random_mixed_state(dim, b)?, "mixed/mixed"),
    };
    Ok(StatePair::new(rho1, rho2)?.labelled(format!("sample {index} ({kind})")))
}

fn evaluate_all<P: PairEvolution + ?Sized>(
    evolution: &P,
    canonical: &[StatePair],
    grid: &TimeGrid,
    settings: &MeasureSettings,
) -> Vec<Result<(StatePair, PairOutcome), PairFailure>> {
    let n_canonical = canonical.len();
    (0..n_canonical + settings.n_pairs)
        .into_par_iter()
        .map(|i| {
            let pair = if i < n_canonical {
                Ok(canonical[i].clone())
            } else {
                sample_pair(evolution.dim(), settings.seed, i - n_canonical)
            };
            let label = match &pair {
                Ok(p) => p.label.clone().unwrap_or_default(),
                Err(_) => format!("sample {}", i - n_canonical),
            };
            pair.and_then(|pair| {
                let outcome = evaluate_pair(evolution, &pair, grid, settings.threshold)?;
                Ok((pair, outcome))
            })
            .map_err(|e| PairFailure { index: i, label, message: e.to_string() })
        })
        .collect()
}

/// Maximizes the truncated measure over the canonical pairs and
/// `n_pairs` random pairs. Pairs are evaluated in parallel and reduced in
/// index order; ties go to the earlier pair.
pub fn n_measure<E: PairEvolution + ?Sized>(process: &E, settings: &MeasureSettings) -> Result<MeasureResult> {
    if settings.n_pairs < 1 {
        return Err(Error::InvalidArgument("n_measure needs at least one sampled pair".into()));
    }
    let grid = measure_grid(settings.horizon, settings.step)?;
    let dim = process.dim();
    let prepared = process.prepare(&grid)?;
    let canonical = canonical_pairs(dim)?;
    let n_canonical = canonical.len();
    let outcomes = match &prepared {
        Some(p) => evaluate_all(p.as_ref(), &canonical, &grid, settings),
        None => evaluate_all(process, &canonical, &grid, settings),
    };

    let mut best: Option<(StatePair, PairOutcome)> = None;
    let mut canonical_scores = Vec::new();
    let mut sampled_max: Option<f64> = None;
    let mut failures = Vec::new();
    let mut evaluated = 0;
    for (i, outcome) in outcomes.into_iter().enumerate() {
        let (pair, outcome) = match outcome {
            Ok(ok) => ok,
            Err(failure) => {
                failures.push(failure);
                continue;
            }
        };
        evaluated += 1;
        if i < n_canonical {
            canonical_scores
                .push(PairScore { label: pair.label.clone().unwrap_or_default(), n_value: outcome.n_value });
        } else {
            sampled_max = Some(sampled_max.map_or(outcome.n_value, |m: f64| m.max(outcome.n_value)));
        }
        if best.as_ref().is_none_or(|(_, b)| outcome.n_value > b.n_value) {
            best = Some((pair, outcome));
        }
    }

    let Some((pair, outcome)) = best else {
        return Err(Error::AllPairsFailed {
            count: failures.len(),
            first: failures.first().map(|f| f.message.clone()).unwrap_or_default(),
        });
    };
    let mut result = result_from(outcome, pair, &grid, settings.seed);
    result.samples_evaluated = evaluated;
    result.canonical = canonical_scores;
    result.sampled_max = sampled_max;
    result.failures = failures;
    Ok(result)
}

/// One parameter point of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    pub parameter: f64,
    pub n_value: f64,
    /// Largest value over the random pairs alone.
    pub n_sampled_max: f64,
    /// Value of the `σ_z` eigenstate pair.
    pub n_canonical: f64,
    pub best_pair: String,
    /// Bloch vectors of the best pair (qubits only).
    pub best_pair_bloch: Option<[[f64; 3]; 2]>,
    pub error: Option<String>,
}

impl SweepRecord {
    fn failed(parameter: f64, error: &Error) -> Self {
        Self {
            parameter,
            n_value: f64::NAN,
            n_sampled_max: f64::NAN,
            n_canonical: f64::NAN,
            best_pair: String::new(),
            best_pair_bloch: None,
            error: Some(error.to_string()),
        }
    }
}

/// Bloch vectors of a qubit pair, if it is one.
pub fn pair_bloch(pair: &StatePair) -> Option<[[f64; 3]; 2]> {
    let (x1, y1, z1) = pair.rho1.bloch().ok()?;
    let (x2, y2, z2) = pair.rho2.bloch().ok()?;
    Some([[x1, y1, z1], [x2, y2, z2]])
}

/// Runs [`n_measure`] for each parameter value. Failures are recorded in
/// the corresponding record; the output order is the input order.
pub fn sweep<F, P>(family: F, parameters: &[f64], settings: &MeasureSettings) -> Result<Vec<SweepRecord>>
where
    F: Fn(f64) -> Result<P> + Sync,
    P: PairEvolution,
{
    if parameters.is_empty() {
        return Err(Error::InvalidArgument("sweep needs at least one parameter value".into()));
    }
    Ok(parameters
        .par_iter()
        .map(|&p| match family(p).and_then(|process| n_measure(&process, settings)) {
            Ok(r) => SweepRecord {
                parameter: p,
                n_value: r.n_value,
                n_sampled_max: r.sampled_max.unwrap_or(f64::NAN),
                n_canonical: r.canonical.iter().find(|c| c.label == "sigma_z").map_or(f64::NAN, |c| c.n_value),
                best_pair: r.best_pair.label.clone().unwrap_or_default(),
                best_pair_bloch: pair_bloch(&r.best_pair),
                error: None,
            },
            Err(e) => SweepRecord::failed(p, &e),
        })
        .collect())
}
