//! Simulated secure aggregation.
//!
//! Noisy per-agent votes are moved into [`mpc_argmax`] and dropped there;
//! neither they nor their sum are reachable from outside. The returned
//! [`SecureAggregate`] exposes the released label; its noiseless margin is
//! readable only by [`MarginLog`], the accountant's hook.
//!
//! ```compile_fail
//! # use veilvote::voting::*;
//! # let v = one_hot(0, 2).unwrap();
//! let agg = mpc_argmax(vec![v.clone()], &[v], 0).unwrap();
//! let _ = agg.noiseless_margin; // private to the trust boundary
//! ```
//!
//! ```compile_fail
//! # use veilvote::voting::*;
//! # let v = one_hot(0, 2).unwrap();
//! let agg = mpc_argmax(vec![v.clone()], &[v], 0).unwrap();
//! let _ = agg.noisy_sum(); // never exposed
//! ```

use crate::accounting::MarginRecord;
use crate::error::{Error, Result};
use crate::numeric::{argmax, pairwise_sum_rows, top_two_gap};

use super::VoteVector;

/// Output of one secure vote.
#[derive(Debug)]
pub struct SecureAggregate {
    released_label: usize,
    query_id: u64,
    noiseless_margin: f64,
}

impl SecureAggregate {
    pub fn released_label(&self) -> usize {
        self.released_label
    }

    pub fn query_id(&self) -> u64 {
        self.query_id
    }
}

/// Release `argmax Σᵢ noisy_votes[i]` (ties to the lowest class) and seal
/// the noiseless margin of `(1/N) Σᵢ noiseless_votes[i]`.
///
/// Agents are summed in slice order with pairwise summation.
pub fn mpc_argmax(
    noisy_votes: Vec<VoteVector>,
    noiseless_votes: &[VoteVector],
    query_id: u64,
) -> Result<SecureAggregate> {
    if noisy_votes.is_empty() {
        return Err(Error::usage("secure vote needs at least one agent"));
    }
    if noisy_votes.len() != noiseless_votes.len() {
        return Err(Error::Dimension {
            expected: noisy_votes.len(),
            got: noiseless_votes.len(),
        });
    }
    let classes = noisy_votes[0].num_classes();
    for v in noisy_votes.iter().chain(noiseless_votes) {
        if v.num_classes() != classes {
            return Err(Error::Dimension {
                expected: classes,
                got: v.num_classes(),
            });
        }
    }

    let noisy_rows: Vec<&[f64]> = noisy_votes.iter().map(VoteVector::values).collect();
    let released_label = argmax(&pairwise_sum_rows(&noisy_rows));

    let clean_rows: Vec<&[f64]> = noiseless_votes.iter().map(VoteVector::values).collect();
    let n = noiseless_votes.len() as f64;
    let mean: Vec<f64> = pairwise_sum_rows(&clean_rows)
        .into_iter()
        .map(|s| s / n)
        .collect();
    // Clamp rounding drift so the record stays inside [0, 1].
    let noiseless_margin = top_two_gap(&mean).clamp(0.0, 1.0);

    Ok(SecureAggregate {
        released_label,
        query_id,
        noiseless_margin,
    })
}

/// Append-only margin log read by the accountant.
#[derive(Debug, Default, Clone)]
pub struct MarginLog {
    records: Vec<MarginRecord>,
}

impl MarginLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, aggregate: &SecureAggregate) {
        self.records.push(MarginRecord {
            query_id: aggregate.query_id,
            gamma: aggregate.noiseless_margin,
        });
    }

    pub fn records(&self) -> &[MarginRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::voting::{agent_noise_rng, noisy_vote, one_hot, VoteKind};
    use rand::{Rng, SeedableRng};

    fn noisy(values: &[f64]) -> VoteVector {
        VoteVector::new(values.to_vec(), VoteKind::Noisy).unwrap()
    }

    #[test]
    fn releases_argmax() {
        let agg = mpc_argmax(vec![noisy(&[0.2, 0.5, 0.3])], &[noisy(&[0.2, 0.5, 0.3])], 3).unwrap();
        assert_eq!(agg.released_label(), 1);
        assert_eq!(agg.query_id(), 3);
    }

    #[test]
    fn ties_go_low() {
        let agg = mpc_argmax(vec![noisy(&[0.5, 0.5])], &[noisy(&[0.5, 0.5])], 0).unwrap();
        assert_eq!(agg.released_label(), 0);
    }

    #[test]
    fn dimension_mismatch() {
        let err = mpc_argmax(vec![noisy(&[0.5, 0.5]), noisy(&[1.0, 0.0, 0.0])], &[
            noisy(&[0.5, 0.5]),
            noisy(&[1.0, 0.0, 0.0]),
        ], 0)
        .unwrap_err();
        assert!(matches!(err, Error::Dimension { .. }));
        assert!(mpc_argmax(vec![noisy(&[0.5, 0.5])], &[], 0).is_err());
    }

    #[test]
    fn margin_reaches_log_only() {
        let votes = vec![one_hot(0, 3).unwrap(), one_hot(0, 3).unwrap(), one_hot(1, 3).unwrap(), one_hot(0, 3).unwrap()];
        let agg = mpc_argmax(votes.clone(), &votes, 9).unwrap();
        let mut log = MarginLog::new();
        log.record(&agg);
        assert_eq!(log.records(), &[MarginRecord { query_id: 9, gamma: 0.5 }]);
    }

    /// Brute-force oracle: with σ = 0 the pipeline must equal the plain
    /// argmax of Σ fᵢ(x).
    #[test]
    fn zero_noise_matches_plain_argmax() {
        let mut gen = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for query in 0..1000u64 {
            let n_agents = gen.random_range(1..8);
            let classes = gen.random_range(2..6);
            let votes: Vec<VoteVector> = (0..n_agents)
                .map(|_| one_hot(gen.random_range(0..classes), classes).unwrap())
                .collect();
            let noisy_votes: Vec<VoteVector> = votes
                .iter()
                .enumerate()
                .map(|(i, v)| noisy_vote(v, 0.0, n_agents, &mut agent_noise_rng(0, i, query)))
                .collect();
            let mut counts = vec![0.0; classes];
            for v in &votes {
                for (c, x) in counts.iter_mut().zip(v.values()) {
                    *c += x;
                }
            }
            let mut expected = 0;
            for c in 1..classes {
                if counts[c] > counts[expected] {
                    expected = c;
                }
            }
            let agg = mpc_argmax(noisy_votes, &votes, query).unwrap();
            assert_eq!(agg.released_label(), expected);
        }
    }

    /// Empirical match rate against the noiseless plurality is at least the
    /// analytic bound, through the full per-agent pipeline.
    #[test]
    fn match_rate_respects_bound() {
        use crate::accounting::match_probability_bound;
        let n_agents = 20;
        let classes = 4;
        // 14 votes for class 0, 6 for class 1: γ = 0.4.
        let votes: Vec<VoteVector> = (0..n_agents)
            .map(|i| one_hot(usize::from(i >= 14), classes).unwrap())
            .collect();
        let sigma = 1.0;
        let draws = 20_000u64;
        let mut hits = 0u64;
        for q in 0..draws {
            let noisy_votes = votes
                .iter()
                .enumerate()
                .map(|(i, v)| noisy_vote(v, sigma, n_agents, &mut agent_noise_rng(17, i, q)))
                .collect();
            let agg = mpc_argmax(noisy_votes, &votes, q).unwrap();
            hits += u64::from(agg.released_label() == 0);
        }
        let rate = hits as f64 / draws as f64;
        let bound = match_probability_bound(n_agents, sigma, 0.4, classes).unwrap();
        let se = (bound * (1.0 - bound) / draws as f64).sqrt();
        assert!(bound > 0.5);
        assert!(rate >= bound - 3.0 * se, "rate {rate} bound {bound}");
    }
}
