use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, SimRng, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VoteKind {
    OneHot,
    /// Label frequencies among k neighbors; coordinates are multiples of 1/k.
    Frequency,
    Noisy,
}

/// A C-dimensional vote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteVector {
    values: Vec<f64>,
    kind: VoteKind,
}

impl VoteVector {
    /// Build a vote, checking the invariant of its kind.
    pub fn new(values: Vec<f64>, kind: VoteKind) -> Result<Self> {
        match kind {
            VoteKind::OneHot => {
                let ones = values.iter().filter(|&&v| v == 1.0).count();
                let zeros = values.iter().filter(|&&v| v == 0.0).count();
                if ones != 1 || ones + zeros != values.len() {
                    return Err(Error::Format("one-hot vote must have a single 1".into()));
                }
            }
            VoteKind::Frequency => {
                let sum: f64 = values.iter().sum();
                if values.iter().any(|&v| v < 0.0) || (sum - 1.0).abs() > 1e-9 {
                    return Err(Error::Format("frequency vote must lie in the simplex".into()));
                }
            }
            VoteKind::Noisy => {}
        }
        Ok(VoteVector { values, kind })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kind(&self) -> VoteKind {
        self.kind
    }

    pub fn num_classes(&self) -> usize {
        self.values.len()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

pub fn one_hot(label: usize, num_classes: usize) -> Result<VoteVector> {
    if label >= num_classes {
        return Err(Error::param(format!(
            "label {label} out of range for {num_classes} classes"
        )));
    }
    let mut values = vec![0.0; num_classes];
    values[label] = 1.0;
    Ok(VoteVector {
        values,
        kind: VoteKind::OneHot,
    })
}

/// `(1/k) Σ onehot(yⱼ)` over the labels of the k nearest neighbors.
pub fn knn_frequency(neighbor_labels: &[usize], k: usize, num_classes: usize) -> Result<VoteVector> {
    if neighbor_labels.len() != k || k == 0 {
        return Err(Error::Dimension {
            expected: k,
            got: neighbor_labels.len(),
        });
    }
    let mut counts = vec![0usize; num_classes];
    for &label in neighbor_labels {
        if label >= num_classes {
            return Err(Error::param(format!(
                "label {label} out of range for {num_classes} classes"
            )));
        }
        counts[label] += 1;
    }
    let values = counts.into_iter().map(|c| c as f64 / k as f64).collect();
    Ok(VoteVector {
        values,
        kind: VoteKind::Frequency,
    })
}

/// Add `N(0, σ²/N)` to every coordinate, so that the sum of `N` such votes
/// carries total noise `N(0, σ²)`.
///
/// # Panics
/// If `sigma` is negative or `num_agents` is zero.
pub fn noisy_vote(vote: &VoteVector, sigma: f64, num_agents: usize, rng: &mut SimRng) -> VoteVector {
    assert!(sigma >= 0.0, "sigma must be non-negative");
    assert!(num_agents >= 1, "need at least one agent");
    let std = sigma / (num_agents as f64).sqrt();
    let values = vote
        .values
        .iter()
        .map(|v| {
            let z: f64 = rng.sample(StandardNormal);
            v + std * z
        })
        .collect();
    VoteVector {
        values,
        kind: VoteKind::Noisy,
    }
}

/// Noise stream of one agent on one query.
pub fn agent_noise_rng(run_seed: u64, agent_id: usize, query_id: u64) -> SimRng {
    stream_rng(run_seed, Stream::VoteNoise, &[agent_id as u64, query_id])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_hot_examples() {
        assert_eq!(one_hot(2, 4).unwrap().values(), &[0.0, 0.0, 1.0, 0.0]);
        assert_eq!(one_hot(0, 2).unwrap().values(), &[1.0, 0.0]);
        assert!(one_hot(5, 3).is_err());
    }

    #[test]
    fn frequency_examples() {
        let v = knn_frequency(&[0, 0, 1, 2, 0], 5, 3).unwrap();
        assert_eq!(v.values(), &[0.6, 0.2, 0.2]);
        assert_eq!(v.kind(), VoteKind::Frequency);
        assert_eq!(knn_frequency(&[1], 1, 2).unwrap().values(), &[0.0, 1.0]);
        assert!(matches!(
            knn_frequency(&[0, 1], 3, 2),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn zero_noise_is_identity() {
        let v = one_hot(1, 3).unwrap();
        let mut rng = agent_noise_rng(1, 0, 0);
        let n = noisy_vote(&v, 0.0, 10, &mut rng);
        assert_eq!(n.values(), v.values());
        assert_eq!(n.kind(), VoteKind::Noisy);
    }

    #[test]
    fn invariants_are_checked() {
        assert!(VoteVector::new(vec![0.0, 1.0, 1.0], VoteKind::OneHot).is_err());
        assert!(VoteVector::new(vec![0.5, 0.6], VoteKind::Frequency).is_err());
        assert!(VoteVector::new(vec![-3.0, 9.0], VoteKind::Noisy).is_ok());
    }

    /// Sample variance oracle: per-coordinate variance of a single noisy
    /// vote is σ²/N, and of the sum of N votes is σ².
    #[test]
    fn noise_variance_monte_carlo() {
        let sigma = 3.0;
        let n_agents = 4;
        let draws = 100_000;
        let zero = VoteVector::new(vec![0.0; 2], VoteKind::Noisy).unwrap();
        let mut single = Vec::with_capacity(draws);
        let mut summed = Vec::with_capacity(draws);
        for d in 0..draws as u64 {
            let mut total = 0.0;
            for agent in 0..n_agents {
                let mut rng = agent_noise_rng(99, agent, d);
                let v = noisy_vote(&zero, sigma, n_agents, &mut rng);
                if agent == 0 {
                    single.push(v.values()[0]);
                }
                total += v.values()[0];
            }
            summed.push(total);
        }
        let var = |xs: &[f64]| {
            let m = xs.iter().sum::<f64>() / xs.len() as f64;
            xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
        };
        // Standard error of a Gaussian sample variance is v·sqrt(2/(n-1)).
        let se = |v: f64| v * (2.0 / (draws as f64 - 1.0)).sqrt();
        let expect_single = sigma * sigma / n_agents as f64;
        assert!((var(&single) - expect_single).abs() < 3.0 * se(expect_single));
        let expect_sum = sigma * sigma;
        assert!((var(&summed) - expect_sum).abs() < 3.0 * se(expect_sum));

        // Expectation preservation.
        let mean = single.iter().sum::<f64>() / draws as f64;
        assert!(mean.abs() < 3.0 * (expect_single / draws as f64).sqrt());
    }
}
