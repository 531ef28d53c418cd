//! Differentially private federated learning by label voting.
//!
//! The crate is split along the lines of the protocol:
//!
//! - [`accounting`]: Rényi-DP curves, composition, conversion to (ε, δ)-DP and
//!   the margin-based data-dependent bound.
//! - [`voting`]: per-agent noisy votes, the simulated secure argmax and the
//!   margin log that only the accountant reads.
//! - [`learners`]: desk-scale local models (logistic regression,
//!   nearest-centroid, kNN over a feature map).
//! - [`gradient`]: FedAvg / DP-FedAvg, clipping and the piecewise-linear
//!   equivalence testbed.
//! - [`harness`]: synthetic data, partitioning, end-to-end runs and reports.

pub mod accounting;
pub mod error;
pub mod gradient;
pub mod harness;
pub mod learners;
pub mod numeric;
pub mod rng;
pub mod voting;

pub use error::{Error, Result};
