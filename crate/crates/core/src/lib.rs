//! Numerical solver and diagnostics for the infinitesimal model with
//! selection and competition, in the small segregational variance regime.
//!
//! The main entry points are [`simulate`] for a single run, [`run_sweep`]
//! for a family of ε values and [`run_validation_suite`] for the checks.

pub mod config;
pub mod dynamics;
pub mod error;
pub mod grid;
pub mod limit;
pub mod moments;
pub mod mortality;
pub mod operators;
pub mod random;
pub mod suite;
pub mod sweep;
pub mod transport;

pub use config::{GridSpec, InitialData, ModelKind, RunConfig, TimeScheme};
pub use dynamics::{simulate, simulate_with, SimulateOptions, SimulationState, Stepper, Trajectory, TrajectoryRow};
pub use error::{Error, Result};
pub use grid::{integrate, make_grid, normalize, Cdf, Density, TraitGrid};
pub use limit::{gaussian_profile, integrate_mean_ode, MeanPath, PathVariant};
pub use moments::{extract_moments, predict_t_moment, KernelMoments, MomentVector, ResidualReport};
pub use mortality::{validate_hypotheses, HypothesisReport, MortalityKind, MortalitySpec};
pub use operators::{
    apply_mutation, apply_t_fast, apply_t_reference, BaseKernel, MixingOperator, MutationKernel, SegregationKernel,
};
pub use suite::{run_validation_suite, CheckResult, SuiteConfig, SuiteReport};
pub use sweep::{fit_rate, run_sweep, sweep_gates, RateFit, SweepConfig, SweepOutput, SweepParams, SweepRecord};
pub use transport::{wasserstein1, wasserstein2};
