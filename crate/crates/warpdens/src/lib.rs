//! Density estimation by warping: fit an initial density estimate, then
//! compose it with a data-driven diffeomorphism of [0,1] chosen by maximum
//! likelihood over a finite basis of the warping group's tangent space.
//!
//! The crate provides the full pipeline — support estimation, rescaling,
//! initial estimators, the warping geometry, derivative-free likelihood
//! optimization with multi-resolution basis selection — plus a conditional
//! variant driven by localized weights, and a simulation benchmark harness.

pub mod basis;
pub mod conditional;
pub mod density;
pub mod error;
pub mod evalbench;
pub mod grid;
pub mod optimize;
pub mod sphere;
pub mod unconditional;

pub use basis::{BasisKind, BasisSet};
pub use conditional::{
    estimate_conditional, local_linear_fit, localized_weights, BandwidthPlan, ConditionalConfig,
    ConditionalFit, RegressionFit, WeightVector,
};
pub use density::{
    kde_fit, silverman_bandwidth, truncated_normal, truncated_normal_fit, turnbull_bounds,
    ucv_bandwidth, unscale_density, warp, Density, ScaledSample, SupportBounds,
};
pub use error::{Error, Result};
pub use evalbench::{
    error_norms, run_monte_carlo, sample_scenario, true_pdf, vector_norms, BenchConfig,
    ErrorReport, MonteCarloSummary, Scenario, ScenarioKind, ScenarioSample,
};
pub use grid::{invert_cdf, Grid, GridFunction};
pub use optimize::{
    fit_fixed_j, fit_multiresolution, nelder_mead, FitResult, NmOptions, NmResult, Objective,
};
pub use sphere::{
    check_derivative_bound, coefficients_of, compose, exp_map, gamma_of, inverse_exp, invert,
    srsf_of, tangent_of, transport_warping, Srsf, TangentVector, Warping, BALL_RADIUS,
};
pub use unconditional::{
    estimate_density, evaluate_estimate, DensityEstimate, EstimateConfig, FitPlan, InitialKind,
};
