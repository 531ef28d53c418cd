//! Exhaustive neighbor enumeration for the noiseless vote statistic.

use crate::error::{Error, Result};
use crate::learners::{predict, train_classifier, AgentDataset, FeatureMap, KnnIndex, TrainConfig};
use crate::numeric::{l2_norm, pairwise_sum_rows};

use super::VoteVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeScheme {
    AeAgent,
    AeInstance,
    KnnAgent,
    KnnInstance,
}

/// A tiny federation to enumerate over.
#[derive(Debug, Clone)]
pub struct TrialConfig {
    pub agents: Vec<AgentDataset>,
    pub queries: Vec<Vec<f64>>,
    /// Neighbors per agent for the kNN schemes.
    pub k: usize,
    /// Points that may be added to any agent in instance-level probes.
    pub additions: Vec<(Vec<f64>, usize)>,
    pub teacher: TrainConfig,
}

fn votes(scheme: ProbeScheme, agents: &[AgentDataset], cfg: &TrialConfig) -> Result<Vec<Vec<VoteVector>>> {
    let mut per_agent = Vec::with_capacity(agents.len());
    for data in agents {
        let row = match scheme {
            ProbeScheme::AeAgent | ProbeScheme::AeInstance => {
                let model = train_classifier(data, &cfg.teacher)?;
                cfg.queries.iter().map(|x| predict(&model, x)).collect::<Result<Vec<_>>>()?
            }
            ProbeScheme::KnnAgent | ProbeScheme::KnnInstance => {
                let index = KnnIndex::new(data, &FeatureMap::identity(data.dim()))?;
                cfg.queries.iter().map(|x| index.predict(x, cfg.k)).collect::<Result<Vec<_>>>()?
            }
        };
        per_agent.push(row);
    }
    Ok(per_agent)
}

/// `Σᵢ fᵢ(x)` for every query.
fn aggregate(scheme: ProbeScheme, agents: &[AgentDataset], cfg: &TrialConfig) -> Result<Vec<Vec<f64>>> {
    let per_agent = votes(scheme, agents, cfg)?;
    Ok((0..cfg.queries.len())
        .map(|q| {
            let rows: Vec<&[f64]> = per_agent.iter().map(|r| r[q].values()).collect();
            pairwise_sum_rows(&rows)
        })
        .collect())
}

fn max_change(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(u, v)| {
            let diff: Vec<f64> = u.iter().zip(v).map(|(x, y)| x - y).collect();
            l2_norm(&diff)
        })
        .fold(0.0, f64::max)
}

/// Largest per-query L2 change of the noiseless statistic over all
/// adjacent federations: one agent removed (agent level) or one point
/// removed from or added to one agent (instance level). Neighbors that
/// would leave an agent unable to answer (empty data, fewer than k points)
/// are skipped.
pub fn l2_sensitivity_probe(scheme: ProbeScheme, cfg: &TrialConfig) -> Result<f64> {
    if cfg.agents.is_empty() || cfg.queries.is_empty() {
        return Err(Error::usage("probe needs at least one agent and one query"));
    }
    let base = aggregate(scheme, &cfg.agents, cfg)?;
    let usable = |d: &AgentDataset| match scheme {
        ProbeScheme::AeAgent | ProbeScheme::AeInstance => !d.is_empty(),
        ProbeScheme::KnnAgent | ProbeScheme::KnnInstance => d.len() >= cfg.k,
    };
    let mut worst = 0.0f64;
    match scheme {
        ProbeScheme::AeAgent | ProbeScheme::KnnAgent => {
            for j in 0..cfg.agents.len() {
                let mut rest = cfg.agents.clone();
                rest.remove(j);
                let other = if rest.is_empty() {
                    vec![vec![0.0; base[0].len()]; base.len()]
                } else {
                    aggregate(scheme, &rest, cfg)?
                };
                worst = worst.max(max_change(&base, &other));
            }
        }
        ProbeScheme::AeInstance | ProbeScheme::KnnInstance => {
            for j in 0..cfg.agents.len() {
                let mut neighbors: Vec<AgentDataset> =
                    (0..cfg.agents[j].len()).map(|i| cfg.agents[j].without(i)).collect();
                for (x, y) in &cfg.additions {
                    neighbors.push(cfg.agents[j].with(x.clone(), *y));
                }
                for replacement in neighbors.into_iter().filter(|d| usable(d)) {
                    let mut agents = cfg.agents.clone();
                    agents[j] = replacement;
                    worst = worst.max(max_change(&base, &aggregate(scheme, &agents, cfg)?));
                }
            }
        }
    }
    Ok(worst)
}
