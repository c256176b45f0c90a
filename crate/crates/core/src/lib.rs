//! Robbins-Monro stochastic root finding with prior information.
//!
//! The standard Robbins-Monro sequence moves to `x_i - s_i (y_i - y_t)`. The
//! prior-information sequence instead moves to the maximiser of a prior
//! density over the root times a Gaussian centred on that proposal, whose
//! spread `c0 / i` shrinks so the measurements eventually dominate.
//!
//! Modules:
//! * [`schedules`]: gain and spread sequences.
//! * [`priors`]: Gaussian, mixture / KDE, uniform and tabulated priors.
//! * [`solver`]: single steps and the posterior argmax paths.
//! * [`tuning`]: the linear `c0` selection rule and its least-squares refit.
//! * [`experiments`]: Monte-Carlo harness for linear test problems.
//! * [`config`] and [`csvio`]: file formats used by the command-line tool.

pub mod config;
pub mod csvio;
pub mod error;
pub mod experiments;
pub mod priors;
pub mod schedules;
pub mod solver;
pub mod tuning;

pub use error::{Error, Result};
pub use priors::{
    kde_from_samples, silverman_bandwidth, GaussianMixturePrior, GaussianPrior, MixtureComponent,
    Prior, SlopeBound, TabulatedPrior, UniformPrior,
};
pub use schedules::{SpreadSchedule, StepSchedule};
pub use solver::{
    component_maximizers, gaussian_posterior_argmax, general_posterior_argmax,
    general_posterior_argmax_with_bound, mixture_posterior_argmax, prior_rm_step, rm_proposal,
    standard_rm_step, ArgmaxOptions, Observation, RmState,
};
pub use experiments::{
    accuracy_gain, optimal_c0_surface, run_ensemble, run_trajectory, sweep_c0, Algorithm,
    EnsembleStats, Scenario, StartMode,
};
pub use tuning::{fit_c0_regression, recommend_c0, C0Fit, C0Regression, C0Row};
