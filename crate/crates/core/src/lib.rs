//! l1-regularized M-estimation with structured smoothness certificates.
//!
//! The crate provides, for four loss families (linear, logistic, gamma, and
//! Gaussian graph selection):
//!
//! - differentiable oracles with analytic third-order forms ([`loss_models`]),
//! - local structured smoothness certificates and their randomized
//!   verification ([`lssc`]),
//! - the seven deterministic sufficient conditions for exact sign recovery
//!   together with the associated radii and regularization bounds
//!   ([`conditions`]),
//! - a proximal-gradient solver for the full and support-restricted
//!   problems with a primal-dual witness check ([`solver`]),
//! - synthetic instance generators under the column-normalization and
//!   predictor-floor conventions ([`datagen`]),
//! - tail bounds and regularization-level recommendations
//!   ([`concentration`]), and
//! - a reproducible Monte Carlo harness for recovery phase transitions
//!   ([`experiments`]).

pub mod concentration;
pub mod conditions;
pub mod datagen;
pub mod error;
pub mod experiments;
pub mod fd;
pub mod loss_models;
pub mod lssc;
pub mod serde_inf;
pub mod solver;

pub use concentration::{recommend_tau, RateTag, TauRecommendation};
pub use conditions::{
    check_theorem, irrepresentability_alpha, radii, restricted_hessian_lambda_min,
    tau_upper_bounds, ConditionReport, GroundTruth,
};
pub use datagen::{
    gen_design, gen_graph_samples, gen_graph_truth, gen_responses, gen_sparse_beta, trial_seed,
    BetaGenParams, DesignFamily, GraphGenParams, GraphPattern, GraphTruth, Instance, SignPattern,
};
pub use error::{Error, Result};
pub use experiments::{
    phase_curve, run_trial, sweep, Cell, CurveSeries, Rescale, SweepConfig, SweepTable, TauPolicy,
    TrialOutcome,
};
pub use loss_models::{Dataset, LossOracle, ModelFamily, ModelSpec, ScaledSum, SmoothLoss};
pub use lssc::{
    analytic_certificate, combine_certificates, hessian_lipschitz_ratio, verify_lssc,
    LsscCertificate, Neighborhood, VerificationReport, VerifyBudget,
};
pub use solver::{
    fit_l1, fit_restricted, recovery_assess, restricted_uniqueness_margin, witness_check,
    Estimate, SolverOptions,
};
