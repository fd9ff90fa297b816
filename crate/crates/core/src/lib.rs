// SPDX-License-Identifier: Apache-2.0

//! Likelihood-ratio testing in the Gaussian sequence model under closed
//! convex constraints.

pub mod conic_stats;
pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod lrt;
pub mod rng;
pub mod special;
pub mod stats;
#[cfg(test)]
mod testutil;

pub use conic_stats::{
    estimate_conic_summary, estimate_gamma, estimate_lrs_moments, estimate_r, ConicSummary, GammaEstimate,
    RatioEstimate,
};
pub use diagnostics::{
    identity_checks, iso_jacobian_band_check, ks_distance, normal_bound_rhs, BandReport, BoundReport,
    DistanceReport, IdentityReport, Reference,
};
pub use error::{Error, Result};
pub use experiments::{emit_csv, emit_svg, run_scenario, Manifest, PowerCurvePoint, Scenario, ScenarioConfig, ScenarioRun};
pub use geometry::{
    divergence, fit_constrained_lasso, jacobian, moreau_split, pava, project, project_l1_ball, ConstraintSet,
    Exactness, JacobianMatrix, ProjectionResult, SetTag,
};
pub use lrt::{
    calibrate_null, decide, delta_power, lrs, predict_power, NullCalibration, NullSpec, PowerPrediction,
    Sidedness, TestPlan,
};
pub use stats::MomentEstimate;
