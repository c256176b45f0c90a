//! Monte-Carlo comparison of standard and prior-information Robbins-Monro on
//! randomised linear problems.
//!
//! Each run draws a slope `a ~ Lognormal(slope_log_mean, slope_log_sd^2)`, a
//! root `x_t ~ N(prior_mean, prior_sd^2)`, an initial gain
//! `s1 ~ 10^U(s1_log10_low, s1_log10_high)` and a start point, then observes
//! `y_i = a (x_i - x_t) + eps_i` with `eps_i ~ N(0, d^2)` and target `y_t = 0`.
//!
//! Random numbers come from independent ChaCha streams keyed by
//! `(seed, run_index, role)`. Runs with the same index therefore see the same
//! problem and the same noise no matter which algorithm, `c0` or thread count
//! is used, so comparisons between variants are paired.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::csvio::fmt_f64;
use crate::error::{domain, Error, Result};
use crate::priors::{GaussianPrior, Prior};
use crate::schedules::{SpreadSchedule, StepSchedule};
use crate::solver::{prior_rm_step, rm_proposal, standard_rm_step, ArgmaxOptions, Observation, RmState};
use crate::tuning::C0Row;

/// Half-width of the uniform start law `U(-10, 10)`.
pub const UNIFORM_START_HALF_WIDTH: f64 = 10.0;

/// Fraction of divergent runs above which an ensemble carries a warning.
pub const DIVERGENCE_WARN_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StartMode {
    /// Start drawn from `N(prior_mean, prior_sd^2)`.
    Prior,
    /// Start drawn from `U(-10, 10)`.
    Uniform,
}

impl StartMode {
    pub fn name(self) -> &'static str {
        match self {
            StartMode::Prior => "prior",
            StartMode::Uniform => "uniform",
        }
    }
}

impl std::str::FromStr for StartMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "prior" => Ok(StartMode::Prior),
            "uniform" => Ok(StartMode::Uniform),
            _ => Err(Error::Parse(format!("unknown start mode '{s}' (prior|uniform)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Standard,
    Prior,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Standard => "standard",
            Algorithm::Prior => "prior",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(Algorithm::Standard),
            "prior" => Ok(Algorithm::Prior),
            _ => Err(Error::Parse(format!("unknown algorithm '{s}' (standard|prior)"))),
        }
    }
}

/// Full description of one ensemble experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub prior_mean: f64,
    pub prior_sd: f64,
    pub slope_log_mean: f64,
    pub slope_log_sd: f64,
    pub s1_log10_low: f64,
    pub s1_log10_high: f64,
    /// Observation noise sd `d`.
    pub noise_sd: f64,
    pub c0: f64,
    /// Number of recorded iterates `x_1 ..= x_iterations`.
    pub iterations: usize,
    /// Runs per batch.
    pub runs: usize,
    /// Number of batches; the reported medians are the mean of per-batch medians.
    pub batches: usize,
    pub start_mode: StartMode,
    pub algorithm: Algorithm,
    pub seed: u64,
    /// Prior used by the prior-information algorithm. `None` means
    /// `N(prior_mean, prior_sd^2)`, the same law the roots are drawn from.
    pub prior: Option<Prior>,
    pub argmax: ArgmaxOptions,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            prior_mean: 0.5,
            prior_sd: 0.25,
            slope_log_mean: 0.0,
            slope_log_sd: 0.5,
            s1_log10_low: 0.0,
            s1_log10_high: 1.0,
            noise_sd: 1.0,
            c0: 0.3,
            iterations: 20,
            runs: 20_000,
            batches: 1,
            start_mode: StartMode::Prior,
            algorithm: Algorithm::Prior,
            seed: 1,
            prior: None,
            argmax: ArgmaxOptions::default(),
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("prior_mean", self.prior_mean),
            ("slope_log_mean", self.slope_log_mean),
            ("s1_log10_low", self.s1_log10_low),
            ("s1_log10_high", self.s1_log10_high),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return domain(format!("{name} must be finite, got {v}"));
            }
        }
        let positive = [
            ("prior_sd", self.prior_sd),
            ("slope_log_sd", self.slope_log_sd),
            ("c0", self.c0),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return domain(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.noise_sd.is_finite() && self.noise_sd >= 0.0) {
            return domain(format!("noise_sd must be non-negative, got {}", self.noise_sd));
        }
        if self.s1_log10_low > self.s1_log10_high {
            return domain("s1_log10_low must not exceed s1_log10_high");
        }
        if self.iterations == 0 || self.runs == 0 || self.batches == 0 {
            return domain("iterations, runs and batches must all be at least 1");
        }
        Ok(())
    }

    pub fn total_runs(&self) -> usize {
        self.runs * self.batches
    }

    pub fn effective_prior(&self) -> Result<Prior> {
        match &self.prior {
            Some(p) => Ok(p.clone()),
            None => Ok(Prior::Gaussian(GaussianPrior::new(self.prior_mean, self.prior_sd)?)),
        }
    }

    pub fn with_algorithm(&self, algorithm: Algorithm) -> Self {
        Self { algorithm, ..self.clone() }
    }

    pub fn with_start(&self, start_mode: StartMode) -> Self {
        Self { start_mode, ..self.clone() }
    }

    pub fn with_c0(&self, c0: f64) -> Self {
        Self { c0, ..self.clone() }
    }

    pub fn with_noise(&self, noise_sd: f64) -> Self {
        Self { noise_sd, ..self.clone() }
    }

    pub fn with_iterations(&self, iterations: usize) -> Self {
        Self { iterations, ..self.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
enum StreamRole {
    Problem = 0,
    Noise = 1,
    Start = 2,
}

/// Independent generator for one `(seed, run, role)` triple.
fn substream(seed: u64, run_index: u64, role: StreamRole) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((run_index << 2) | role as u64);
    rng
}

/// Randomised linear test problem for one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Problem {
    /// Slope `a` of `f(x) = a x`.
    pub slope: f64,
    /// Root `x_t`.
    pub root: f64,
    /// Initial gain `s1`.
    pub s1: f64,
    /// Start point `x_1`.
    pub start: f64,
}

fn normal(rng: &mut impl Rng, mean: f64, sd: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    mean + sd * z
}

/// Draws the problem of run `run_index` from its problem and start streams.
pub fn sample_problem(scenario: &Scenario, run_index: u64) -> Problem {
    let mut prob = substream(scenario.seed, run_index, StreamRole::Problem);
    let slope = normal(&mut prob, scenario.slope_log_mean, scenario.slope_log_sd).exp();
    let root = normal(&mut prob, scenario.prior_mean, scenario.prior_sd);
    let u: f64 = prob.random();
    let s1 = 10f64.powf(scenario.s1_log10_low + (scenario.s1_log10_high - scenario.s1_log10_low) * u);

    let mut start_rng = substream(scenario.seed, run_index, StreamRole::Start);
    let start = match scenario.start_mode {
        StartMode::Prior => normal(&mut start_rng, scenario.prior_mean, scenario.prior_sd),
        StartMode::Uniform => {
            let u: f64 = start_rng.random();
            UNIFORM_START_HALF_WIDTH * (2.0 * u - 1.0)
        }
    };
    Problem { slope, root, s1, start }
}

/// `|x_i - x_t|` for `i = 1 ..= iterations`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub deviations: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrajectoryOutcome {
    Finite(TrajectoryRecord),
    /// The iterate (or observation) overflowed before the last iteration.
    Divergent { at_iteration: usize },
}

impl TrajectoryOutcome {
    pub fn record(&self) -> Option<&TrajectoryRecord> {
        match self {
            TrajectoryOutcome::Finite(r) => Some(r),
            TrajectoryOutcome::Divergent { .. } => None,
        }
    }
}

/// Advances one run of `scenario.algorithm` for `iterations - 1` steps.
pub fn run_trajectory(scenario: &Scenario, run_index: u64) -> Result<TrajectoryOutcome> {
    let prior = scenario.effective_prior()?;
    trajectory_with_prior(scenario, &prior, run_index)
}

fn trajectory_with_prior(scenario: &Scenario, prior: &Prior, run_index: u64) -> Result<TrajectoryOutcome> {
    let problem = sample_problem(scenario, run_index);
    let step = StepSchedule::new(problem.s1)?;
    let spread = SpreadSchedule::new(scenario.c0)?;
    let mut noise = substream(scenario.seed, run_index, StreamRole::Noise);

    let mut deviations = Vec::with_capacity(scenario.iterations);
    let mut state = RmState::start(problem.start)?;
    deviations.push((state.x() - problem.root).abs());

    for k in 2..=scenario.iterations {
        let eps = normal(&mut noise, 0.0, scenario.noise_sd);
        let y = problem.slope * (state.x() - problem.root) + eps;
        let obs = match Observation::new(y, 0.0) {
            Ok(o) => o,
            Err(_) => return Ok(TrajectoryOutcome::Divergent { at_iteration: k }),
        };
        if !rm_proposal(&state, &obs, &step).is_finite() {
            return Ok(TrajectoryOutcome::Divergent { at_iteration: k });
        }
        state = match scenario.algorithm {
            Algorithm::Standard => standard_rm_step(&state, &obs, &step)?,
            Algorithm::Prior => prior_rm_step(&state, &obs, &step, &spread, prior, &scenario.argmax)?,
        };
        let dev = (state.x() - problem.root).abs();
        if !dev.is_finite() {
            return Ok(TrajectoryOutcome::Divergent { at_iteration: k });
        }
        deviations.push(dev);
    }
    Ok(TrajectoryOutcome::Finite(TrajectoryRecord { deviations }))
}

/// Per-iteration medians of `|x_i - x_t|` over an ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    /// Median absolute deviation at iterations `1 ..= iterations` (index 0 is
    /// iteration 1). With several batches, the mean of per-batch medians.
    pub median_abs_dev: Vec<f64>,
    /// Runs that contributed (finite trajectories).
    pub runs: usize,
    /// Runs excluded because they diverged.
    pub divergent: usize,
}

impl EnsembleStats {
    /// Median at 1-based `iteration`.
    pub fn at(&self, iteration: usize) -> Result<f64> {
        if iteration == 0 || iteration > self.median_abs_dev.len() {
            return domain(format!(
                "iteration {iteration} outside 1..={}",
                self.median_abs_dev.len()
            ));
        }
        Ok(self.median_abs_dev[iteration - 1])
    }

    pub fn final_median(&self) -> f64 {
        *self.median_abs_dev.last().expect("at least one iteration")
    }

    /// True when more than 1% of attempted runs diverged.
    pub fn divergence_warning(&self) -> bool {
        let attempted = self.runs + self.divergent;
        attempted > 0 && self.divergent as f64 > DIVERGENCE_WARN_FRACTION * attempted as f64
    }
}

/// Median with the mean-of-middle-pair rule for even counts. Reorders `values`.
pub fn median(values: &mut [f64]) -> Option<f64> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let mid = n / 2;
    let (lower, upper, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        Some(upper)
    } else {
        let lower_max = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Some(0.5 * (lower_max + upper))
    }
}

/// Column-wise medians of finite trajectories; `None` if every run diverged.
fn medians_of(outcomes: &[TrajectoryOutcome], iterations: usize) -> (Option<Vec<f64>>, usize, usize) {
    let records: Vec<&TrajectoryRecord> = outcomes.iter().filter_map(|o| o.record()).collect();
    let divergent = outcomes.len() - records.len();
    if records.is_empty() {
        return (None, 0, divergent);
    }
    let mut column = vec![0.0; records.len()];
    let medians = (0..iterations)
        .map(|i| {
            for (slot, r) in column.iter_mut().zip(&records) {
                *slot = r.deviations[i];
            }
            median(&mut column).expect("non-empty")
        })
        .collect();
    (Some(medians), records.len(), divergent)
}

/// Runs `scenario.runs * scenario.batches` trajectories (in parallel on the
/// current rayon pool) and aggregates per-iteration medians.
pub fn run_ensemble(scenario: &Scenario) -> Result<EnsembleStats> {
    scenario.validate()?;
    let prior = scenario.effective_prior()?;
    let mut sum = vec![0.0; scenario.iterations];
    let mut used_batches = 0usize;
    let mut runs = 0;
    let mut divergent = 0;
    for batch in 0..scenario.batches {
        let first = (batch * scenario.runs) as u64;
        let outcomes = (0..scenario.runs as u64)
            .into_par_iter()
            .map(|r| trajectory_with_prior(scenario, &prior, first + r))
            .collect::<Result<Vec<_>>>()?;
        let (medians, ok, bad) = medians_of(&outcomes, scenario.iterations);
        runs += ok;
        divergent += bad;
        if let Some(m) = medians {
            used_batches += 1;
            for (s, v) in sum.iter_mut().zip(m) {
                *s += v;
            }
        }
    }
    if used_batches == 0 {
        return Err(Error::Domain("every run diverged; no medians to report".into()));
    }
    let median_abs_dev = sum.into_iter().map(|s| s / used_batches as f64).collect();
    Ok(EnsembleStats {
        median_abs_dev,
        runs,
        divergent,
    })
}

/// Relative reduction `(d_s - d_p) / d_s` of the median deviation at 1-based
/// `iteration`.
pub fn accuracy_gain(standard: &EnsembleStats, prior: &EnsembleStats, iteration: usize) -> Result<f64> {
    if standard.median_abs_dev.len() != prior.median_abs_dev.len() {
        return domain("ensembles cover different numbers of iterations");
    }
    accuracy_gain_values(standard.at(iteration)?, prior.at(iteration)?)
}

/// `(standard - prior) / standard` for two median deviations.
pub fn accuracy_gain_values(standard: f64, prior: f64) -> Result<f64> {
    if standard.is_nan() || standard <= 0.0 {
        return domain(format!("standard median deviation must be positive, got {standard}"));
    }
    Ok((standard - prior) / standard)
}

/// Final-iteration median deviation for each `c0` of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub c0: f64,
    pub final_median_abs_deviation: f64,
    pub stats: EnsembleStats,
}

impl SweepTable {
    /// Row with the smallest final median (first one on ties).
    pub fn argmin(&self) -> &SweepRow {
        let mut best = &self.rows[0];
        for row in &self.rows[1..] {
            if row.final_median_abs_deviation < best.final_median_abs_deviation {
                best = row;
            }
        }
        best
    }

    /// `c0` minimising the median at 1-based `iteration` (first one on ties).
    pub fn argmin_at(&self, iteration: usize) -> Result<f64> {
        let mut best: Option<(f64, f64)> = None;
        for row in &self.rows {
            let v = row.stats.at(iteration)?;
            if best.is_none_or(|(_, bv)| v < bv) {
                best = Some((row.c0, v));
            }
        }
        Ok(best.expect("non-empty sweep").0)
    }
}

/// One prior-information ensemble per `c0`, all on the same seed so every
/// grid point sees the same problems and noise.
pub fn sweep_c0(base: &Scenario, c0_grid: &[f64]) -> Result<SweepTable> {
    if c0_grid.is_empty() {
        return domain("c0 grid must not be empty");
    }
    let base = base.with_algorithm(Algorithm::Prior);
    let rows = c0_grid
        .iter()
        .map(|&c0| {
            let stats = run_ensemble(&base.with_c0(c0))?;
            Ok(SweepRow {
                c0,
                final_median_abs_deviation: stats.final_median(),
                stats,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepTable { rows })
}

/// Evenly spaced grid `from, from + h, ..., to` with `intervals` steps.
pub fn uniform_grid(from: f64, to: f64, intervals: usize) -> Result<Vec<f64>> {
    if !(from.is_finite() && to.is_finite()) || intervals == 0 || to < from {
        return domain(format!("bad grid [{from}, {to}] with {intervals} intervals"));
    }
    let h = (to - from) / intervals as f64;
    Ok((0..=intervals)
        .map(|k| if k == intervals { to } else { from + h * k as f64 })
        .collect())
}

/// Smallest iteration count admitted on an optimal-`c0` surface; the first
/// five iterates are too erratic to rank `c0` values.
pub const SURFACE_MIN_ITERATION: usize = 6;

/// For each `(d, iteration)` cell, the `c0` from `c0_grid` with the smallest
/// median deviation. Each `d` is swept once out to the largest requested
/// iteration; shorter iterations read the same paired trajectories.
pub fn optimal_c0_surface(
    d_grid: &[f64],
    iteration_grid: &[usize],
    base: &Scenario,
    c0_grid: &[f64],
) -> Result<Vec<C0Row>> {
    if d_grid.is_empty() || iteration_grid.is_empty() {
        return domain("noise and iteration grids must not be empty");
    }
    if let Some(&bad) = iteration_grid.iter().find(|&&i| i < SURFACE_MIN_ITERATION) {
        return domain(format!(
            "surface iterations must be at least {SURFACE_MIN_ITERATION}, got {bad}"
        ));
    }
    let max_iter = *iteration_grid.iter().max().expect("non-empty");
    let mut rows = Vec::with_capacity(d_grid.len() * iteration_grid.len());
    for &d in d_grid {
        let table = sweep_c0(&base.with_noise(d).with_iterations(max_iter), c0_grid)?;
        for &it in iteration_grid {
            rows.push(C0Row {
                d,
                iteration: it as u64,
                optimal_c0: table.argmin_at(it)?,
            });
        }
    }
    Ok(rows)
}

/// Ensemble result tagged with the variant that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct VariantStats {
    pub algorithm: Algorithm,
    pub start_mode: StartMode,
    pub c0: f64,
    pub d: f64,
    pub stats: EnsembleStats,
}

/// Standard and prior-information algorithms, each from prior and uniform
/// starts, in that order: (standard, prior), (prior, prior), (standard,
/// uniform), (prior, uniform).
pub fn run_four_variants(base: &Scenario) -> Result<Vec<VariantStats>> {
    let mut out = Vec::with_capacity(4);
    for start in [StartMode::Prior, StartMode::Uniform] {
        for alg in [Algorithm::Standard, Algorithm::Prior] {
            out.push(run_variant(&base.with_start(start).with_algorithm(alg))?);
        }
    }
    Ok(out)
}

pub fn run_variant(scenario: &Scenario) -> Result<VariantStats> {
    Ok(VariantStats {
        algorithm: scenario.algorithm,
        start_mode: scenario.start_mode,
        c0: scenario.c0,
        d: scenario.noise_sd,
        stats: run_ensemble(scenario)?,
    })
}

pub const MEDIANS_HEADER: [&str; 7] = [
    "iteration",
    "algorithm",
    "start_mode",
    "c0",
    "d",
    "median_abs_deviation",
    "runs",
];

pub const SWEEP_HEADER: [&str; 2] = ["c0", "final_median_abs_deviation"];

/// One row per iteration per variant.
pub fn write_medians_csv(mut w: impl Write, variants: &[VariantStats]) -> Result<()> {
    writeln!(w, "{}", MEDIANS_HEADER.join(","))?;
    for v in variants {
        for (i, m) in v.stats.median_abs_dev.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                i + 1,
                v.algorithm.name(),
                v.start_mode.name(),
                fmt_f64(v.c0),
                fmt_f64(v.d),
                fmt_f64(*m),
                v.stats.runs
            )?;
        }
    }
    Ok(())
}

pub fn write_sweep_csv(mut w: impl Write, table: &SweepTable) -> Result<()> {
    writeln!(w, "{}", SWEEP_HEADER.join(","))?;
    for row in &table.rows {
        writeln!(w, "{},{}", fmt_f64(row.c0), fmt_f64(row.final_median_abs_deviation))?;
    }
    Ok(())
}
