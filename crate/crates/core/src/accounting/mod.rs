//! Rényi-DP accounting.
//!
//! Curves are functions `α ↦ ε(α)` over orders `α > 1`. Mechanisms produce
//! curves, [`compose`] adds them pointwise, and [`rdp_to_dp`] turns the
//! composed curve into an `(ε, δ)` statement by searching over `α`.
//!
//! The voting schemes additionally log the noiseless vote margin of every
//! answered query; [`accumulate_data_dependent`] folds those margins into a
//! data-dependent curve that is never worse than the worst-case one.

mod conversion;
mod curve;
mod data_dependent;
mod report;

pub use conversion::{alpha_grid, rdp_to_dp, Conversion, ALPHA_MAX};
pub use curve::{
    compose, dp_fedavg_sigma, gaussian_rdp, scheme_curve, Granularity, MechanismParams, RdpCurve,
    VotingScheme,
};
pub use data_dependent::{
    accumulate_data_dependent, amplified_rdp, data_dependent_rdp, match_probability_bound,
    MarginRecord,
};
pub use report::PrivacyReport;
