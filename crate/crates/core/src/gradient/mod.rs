//! Gradient-sharing baselines.
//!
//! FedAvg and DP-FedAvg with per-agent clipping and Gaussian noise, plus
//! the objectives used to study them: softmax regression for end-to-end
//! runs and max-affine / pseudo-Huber losses for the equivalence testbed.

mod fedavg;
mod objective;
mod piecewise;

pub use fedavg::{
    aggregate_updates, clip_update, fedavg_round, local_delta, noisy_update, train_fedavg,
    FedAvgConfig, FedAvgTrace, ModelUpdate, RoundOutcome,
};
pub use objective::{LinearObjective, MaxAffine, Objective, PseudoHuber, SoftmaxObjective};
pub use piecewise::{
    lipschitz_equivalence_check, piecewise_equivalence_check, EquivalenceCheck, LipschitzCheck,
    PiecewiseLinearObjective,
};
