//! Noisy label voting.
//!
//! Each agent turns its local prediction into a [`VoteVector`], perturbs it
//! with [`noisy_vote`] and hands it to [`mpc_argmax`], which stands in for
//! the secure-computation step: only the winning label leaves it. The
//! noiseless margin needed for data-dependent accounting is sealed inside
//! the returned [`SecureAggregate`] and can only be read through a
//! [`MarginLog`].

mod sensitivity;
mod trust_boundary;
mod vote;

pub use sensitivity::{l2_sensitivity_probe, ProbeScheme, TrialConfig};
pub use trust_boundary::{mpc_argmax, MarginLog, SecureAggregate};
pub use vote::{agent_noise_rng, knn_frequency, noisy_vote, one_hot, VoteKind, VoteVector};
