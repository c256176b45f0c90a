//! One-dimensional Robbins-Monro iterations.
//!
//! The standard step moves the iterate to the Robbins-Monro proposal
//! `m = x_i - s_i (y_i - y_t)`. The prior-information step instead moves it to
//! the maximiser of `prior(x) * N(x | m, c_i^2)`, where `c_i = c0 / i` shrinks
//! so that the measurement-driven term eventually dominates the prior.
//!
//! The maximiser is found three ways depending on the prior:
//!
//! * Gaussian prior: closed-form precision-weighted mean.
//! * Gaussian mixture (including KDE priors): the answer lies between the
//!   smallest and largest per-component maximiser, which bounds a grid scan
//!   followed by golden-section refinement.
//! * Any prior with a finite log-slope bound `J`: the answer lies within
//!   `J c^2` of `m`, which bounds the same grid + golden-section search.

use crate::error::{domain, Error, Result};
use crate::priors::{GaussianMixturePrior, GaussianPrior, Prior, SlopeBound};
use crate::schedules::{SpreadSchedule, StepSchedule};

/// Log-posterior values closer than this are treated as tied; ties go to the
/// smallest `x`.
pub const TIE_TOL: f64 = 1e-12;

/// Minimum number of grid candidates in a bracketed scan.
pub const MIN_GRID_POINTS: usize = 64;

/// Grid candidates per mixture component (or tabulated cell) in a bracketed scan.
pub const GRID_POINTS_PER_COMPONENT: usize = 8;

const MAX_GRID_POINTS: usize = 1 << 20;

/// Cap on the number of grid local maxima refined by golden section.
const MAX_REFINED_CANDIDATES: usize = 32;

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Iteration counter and current iterate of one trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmState {
    i: u64,
    x: f64,
}

impl RmState {
    pub fn new(i: u64, x: f64) -> Result<Self> {
        if i == 0 {
            return domain("iteration index is 1-based; got 0");
        }
        if !x.is_finite() {
            return domain(format!("iterate must be finite, got {x}"));
        }
        Ok(Self { i, x })
    }

    /// State at iteration 1.
    pub fn start(x: f64) -> Result<Self> {
        Self::new(1, x)
    }

    pub fn i(&self) -> u64 {
        self.i
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    fn advance(&self, x: f64) -> Result<Self> {
        if !x.is_finite() {
            return domain(format!("iterate became non-finite at step {}", self.i));
        }
        Ok(Self { i: self.i + 1, x })
    }
}

/// A noisy measurement `y = f(x_i) + noise` and the target level `y_t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    y: f64,
    y_target: f64,
}

impl Observation {
    pub fn new(y: f64, y_target: f64) -> Result<Self> {
        if !(y.is_finite() && y_target.is_finite()) {
            return domain(format!("observation must be finite, got y = {y}, y_t = {y_target}"));
        }
        Ok(Self { y, y_target })
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn y_target(&self) -> f64 {
        self.y_target
    }
}

/// Controls for the numeric argmax paths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArgmaxOptions {
    /// Width at which golden-section refinement stops.
    pub abs_tol: f64,
    /// Evaluation budget for each golden-section refinement.
    pub max_evals: usize,
}

impl Default for ArgmaxOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            max_evals: 200,
        }
    }
}

impl ArgmaxOptions {
    fn validate(&self) -> Result<()> {
        if !(self.abs_tol.is_finite() && self.abs_tol > 0.0) {
            return domain(format!("abs_tol must be positive, got {}", self.abs_tol));
        }
        if self.max_evals == 0 {
            return domain("max_evals must be positive");
        }
        Ok(())
    }
}

fn check_spread(c: f64) -> Result<()> {
    if !(c.is_finite() && c > 0.0) {
        return domain(format!("RM spread must be positive and finite, got {c}"));
    }
    Ok(())
}

/// Mean of the Robbins-Monro distribution, `x - s_i (y - y_t)`. This is also
/// the next iterate of the standard sequence.
pub fn rm_proposal(state: &RmState, obs: &Observation, sched: &StepSchedule) -> f64 {
    let s = sched.s1() / state.i as f64;
    state.x - s * (obs.y - obs.y_target)
}

pub fn standard_rm_step(state: &RmState, obs: &Observation, sched: &StepSchedule) -> Result<RmState> {
    state.advance(rm_proposal(state, obs, sched))
}

/// Maximiser of `N(x | mu, sigma^2) * N(x | m, c^2)`.
fn precision_weighted_mean(mu: f64, sigma: f64, m: f64, c: f64) -> f64 {
    let prior_var = sigma * sigma;
    let rm_var = c * c;
    // (m/c^2 + mu/sigma^2) / (1/c^2 + 1/sigma^2), rearranged to avoid
    // overflow when either variance is tiny
    m + (mu - m) * (rm_var / (rm_var + prior_var))
}

/// Closed-form posterior argmax for a normal prior.
pub fn gaussian_posterior_argmax(prior: &GaussianPrior, m: f64, c: f64) -> Result<f64> {
    check_spread(c)?;
    if !m.is_finite() {
        return domain(format!("RM proposal must be finite, got {m}"));
    }
    Ok(precision_weighted_mean(prior.mean(), prior.sd(), m, c))
}

/// Per-component maximisers `z_r`, in component order.
pub fn component_maximizers(prior: &GaussianMixturePrior, m: f64, c: f64) -> Result<Vec<f64>> {
    check_spread(c)?;
    Ok(prior
        .components()
        .iter()
        .map(|comp| precision_weighted_mean(comp.mean, prior.sigma(), m, c))
        .collect())
}

/// Mean `mu^A` of the single normal (with the mixture's shared sd) that would
/// put the posterior argmax at `x_next`. For a mixture prior it always lies
/// between the smallest and largest component mean.
pub fn equivalent_component_mean(x_next: f64, m: f64, sigma: f64, c: f64) -> f64 {
    let ratio = (sigma * sigma) / (c * c);
    (ratio + 1.0) * x_next - ratio * m
}

fn log_rm_kernel(x: f64, m: f64, c: f64) -> f64 {
    let z = (x - m) / c;
    -0.5 * z * z
}

/// Posterior argmax for a Gaussian-mixture prior, searched over
/// `[min z_r, max z_r]`.
pub fn mixture_posterior_argmax(
    prior: &GaussianMixturePrior,
    m: f64,
    c: f64,
    opts: &ArgmaxOptions,
) -> Result<f64> {
    opts.validate()?;
    if !m.is_finite() {
        return domain(format!("RM proposal must be finite, got {m}"));
    }
    let z = component_maximizers(prior, m, c)?;
    let lo = z.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let points = (GRID_POINTS_PER_COMPONENT * prior.len()).clamp(MIN_GRID_POINTS, MAX_GRID_POINTS);
    bracketed_argmax(
        |x| Ok(prior.log_density(x) + log_rm_kernel(x, m, c)),
        lo,
        hi,
        points,
        opts,
    )
}

/// Posterior argmax for any prior with a finite log-slope bound, searched over
/// `[m - J c^2, m + J c^2]`.
pub fn general_posterior_argmax(prior: &Prior, m: f64, c: f64, opts: &ArgmaxOptions) -> Result<f64> {
    match prior.slope_bound() {
        SlopeBound::Finite(j) => general_posterior_argmax_with_bound(prior, j, m, c, opts),
        SlopeBound::Unbounded => Err(Error::Precondition(format!(
            "{} prior has an unbounded log-density slope; use the closed-form Gaussian or \
             bracketed mixture argmax, or declare a slope bound explicitly",
            prior.kind()
        ))),
    }
}

/// As [`general_posterior_argmax`], with a caller-declared bound `j` on
/// `|d/dx ln prior|` over the search bracket.
pub fn general_posterior_argmax_with_bound(
    prior: &Prior,
    j: f64,
    m: f64,
    c: f64,
    opts: &ArgmaxOptions,
) -> Result<f64> {
    opts.validate()?;
    check_spread(c)?;
    if !m.is_finite() {
        return domain(format!("RM proposal must be finite, got {m}"));
    }
    if !(j.is_finite() && j >= 0.0) {
        return domain(format!("slope bound must be finite and non-negative, got {j}"));
    }
    let reach = j * c * c;
    if reach == 0.0 {
        return Ok(m);
    }
    let mut lo = m - reach;
    let mut hi = m + reach;
    let cells = match prior {
        Prior::Tabulated(t) => {
            // the posterior only exists on the tabulated support
            lo = lo.max(t.lower());
            hi = hi.min(t.upper());
            if lo > hi {
                return domain(format!(
                    "argmax bracket [{}, {}] lies outside the prior support [{}, {}]",
                    m - reach,
                    m + reach,
                    t.lower(),
                    t.upper()
                ));
            }
            let g = t.grid();
            g.partition_point(|&x| x < hi) - g.partition_point(|&x| x <= lo) + 1
        }
        Prior::Mixture(mix) => mix.len(),
        _ => 1,
    };
    let points = (GRID_POINTS_PER_COMPONENT * cells).clamp(MIN_GRID_POINTS, MAX_GRID_POINTS);
    bracketed_argmax(
        |x| Ok(prior.log_density(x)? + log_rm_kernel(x, m, c)),
        lo,
        hi,
        points,
        opts,
    )
}

/// One prior-information step: the next iterate is the posterior argmax
/// around the Robbins-Monro proposal.
pub fn prior_rm_step(
    state: &RmState,
    obs: &Observation,
    step: &StepSchedule,
    spread: &SpreadSchedule,
    prior: &Prior,
    opts: &ArgmaxOptions,
) -> Result<RmState> {
    let m = rm_proposal(state, obs, step);
    if !m.is_finite() {
        return domain(format!("RM proposal became non-finite at step {}", state.i));
    }
    let c = spread.c0() / state.i as f64;
    let next = match prior {
        Prior::Gaussian(g) => gaussian_posterior_argmax(g, m, c)?,
        Prior::Mixture(mix) => mixture_posterior_argmax(mix, m, c, opts)?,
        Prior::Uniform(_) => m,
        Prior::Tabulated(_) => general_posterior_argmax(prior, m, c, opts)?,
    };
    state.advance(next)
}

/// Global maximiser of `f` on `[lo, hi]`: scan `points` evenly spaced
/// candidates, refine every grid local maximum by golden section, and return
/// the best refined point (smallest `x` among values within [`TIE_TOL`]).
fn bracketed_argmax(
    f: impl Fn(f64) -> Result<f64>,
    lo: f64,
    hi: f64,
    points: usize,
    opts: &ArgmaxOptions,
) -> Result<f64> {
    debug_assert!(lo <= hi);
    if hi - lo <= opts.abs_tol {
        if lo == hi {
            return Ok(lo);
        }
        let (flo, fhi) = (f(lo)?, f(hi)?);
        return Ok(if fhi > flo + TIE_TOL { hi } else { lo });
    }

    let n = points.max(3);
    let h = (hi - lo) / (n - 1) as f64;
    let xs: Vec<f64> = (0..n)
        .map(|k| if k + 1 == n { hi } else { lo + h * k as f64 })
        .collect();
    let vals = xs.iter().map(|&x| f(x)).collect::<Result<Vec<f64>>>()?;

    // Grid local maxima; a plateau contributes only its leftmost point.
    let mut candidates: Vec<usize> = (0..n)
        .filter(|&k| {
            let left_ok = k == 0 || vals[k] > vals[k - 1];
            let right_ok = k + 1 == n || vals[k] >= vals[k + 1];
            left_ok && right_ok
        })
        .collect();
    if candidates.is_empty() {
        // all equal: the plateau's leftmost point
        candidates.push(0);
    }
    if candidates.len() > MAX_REFINED_CANDIDATES {
        candidates.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]).then(a.cmp(&b)));
        candidates.truncate(MAX_REFINED_CANDIDATES);
        candidates.sort_unstable();
    }

    let mut refined = Vec::with_capacity(candidates.len());
    for &k in &candidates {
        let a = xs[k.saturating_sub(1)];
        let b = xs[(k + 1).min(n - 1)];
        refined.push(golden_section_max(&f, a, b, (xs[k], vals[k]), opts)?);
    }

    let best = refined
        .iter()
        .map(|&(_, v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    let (x, _) = refined
        .iter()
        .copied()
        .filter(|&(_, v)| v >= best - TIE_TOL)
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .expect("at least one refined candidate");
    Ok(x)
}

/// Golden-section maximisation of `f` on `[a, b]`, returning the best point
/// seen (including `seed`, a known point inside the interval).
fn golden_section_max(
    f: &impl Fn(f64) -> Result<f64>,
    mut a: f64,
    mut b: f64,
    seed: (f64, f64),
    opts: &ArgmaxOptions,
) -> Result<(f64, f64)> {
    let mut best = seed;
    let consider = |x: f64, v: f64, best: &mut (f64, f64)| {
        if v > best.1 {
            *best = (x, v);
        }
    };

    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    let mut evals = 2;
    consider(x1, f1, &mut best);
    consider(x2, f2, &mut best);

    while b - a > opts.abs_tol {
        if evals >= opts.max_evals {
            return Err(Error::Convergence {
                best: best.0,
                evals,
            });
        }
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1)?;
            consider(x1, f1, &mut best);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2)?;
            consider(x2, f2, &mut best);
        }
        evals += 1;
        if x1 >= x2 {
            // interval collapsed below floating-point resolution
            break;
        }
    }
    Ok(best)
}
