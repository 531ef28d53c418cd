use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{l2_norm, pairwise_sum_rows};
use crate::rng::{stream_rng, SimRng, Stream};

use super::Objective;

/// A local update `Δᵢ` after optional clipping.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelUpdate {
    pub delta: Vec<f64>,
    pub clipped: bool,
    pub pre_clip_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FedAvgConfig {
    /// Per-round agent sampling probability.
    pub q: f64,
    /// Noise multiplier; the aggregate noise std is `σ·S`.
    pub sigma: f64,
    /// Clipping threshold `S`; `f64::INFINITY` disables clipping.
    pub clip: f64,
    /// Local iterations `E` per round.
    pub local_iters: usize,
    pub eta: f64,
    pub rounds: usize,
    pub seed: u64,
    /// Decay the learning rate linearly over the rounds.
    #[serde(default)]
    pub lr_decay: bool,
    /// Minibatch size for local steps; full-batch gradient descent if absent.
    #[serde(default)]
    pub batch_size: Option<usize>,
}

impl FedAvgConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.q > 0.0 && self.q <= 1.0) {
            return Err(Error::param(format!("q = {} must lie in (0, 1]", self.q)));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::param(format!("sigma = {} must be finite and non-negative", self.sigma)));
        }
        if self.clip.is_nan() || self.clip <= 0.0 {
            return Err(Error::param(format!("clip threshold = {} must be positive", self.clip)));
        }
        if self.sigma > 0.0 && self.clip.is_infinite() {
            return Err(Error::param("noise needs a finite clip threshold"));
        }
        if self.local_iters == 0 || self.rounds == 0 {
            return Err(Error::param("local iterations and rounds must be positive"));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::param(format!("eta = {} must be positive", self.eta)));
        }
        if self.batch_size == Some(0) {
            return Err(Error::param("batch size must be positive"));
        }
        Ok(())
    }

    /// Learning rate used in round `round` (0-based).
    pub fn learning_rate(&self, round: usize) -> f64 {
        if self.lr_decay {
            self.eta * (1.0 - round as f64 / self.rounds as f64)
        } else {
            self.eta
        }
    }
}

/// Scale `delta` by `1 / max(1, ‖delta‖₂ / S)`.
///
/// # Panics
/// If `threshold` is not positive.
pub fn clip_update(delta: Vec<f64>, threshold: f64) -> ModelUpdate {
    assert!(threshold > 0.0, "clip threshold must be positive");
    let norm = l2_norm(&delta);
    let factor = (norm / threshold).max(1.0);
    if factor > 1.0 {
        ModelUpdate {
            delta: delta.into_iter().map(|v| v / factor).collect(),
            clipped: true,
            pre_clip_norm: norm,
        }
    } else {
        ModelUpdate {
            delta,
            clipped: false,
            pre_clip_norm: norm,
        }
    }
}

/// `θ_E − θ` after `E` local gradient steps from `theta`. With a batch
/// size, each step uses a fresh minibatch drawn without replacement.
pub fn local_delta(
    objective: &dyn Objective,
    theta: &[f64],
    local_iters: usize,
    eta: f64,
    batch: Option<(usize, &mut SimRng)>,
) -> Vec<f64> {
    let mut current = theta.to_vec();
    let n = objective.num_examples();
    let mut batch = batch;
    for _ in 0..local_iters {
        let grad = match batch.as_mut() {
            Some((size, rng)) if *size < n => {
                let rows = sample(rng, n, *size).into_vec();
                objective.batch_gradient(&current, &rows)
            }
            _ => objective.gradient(&current),
        };
        for (t, g) in current.iter_mut().zip(&grad) {
            *t -= eta * g;
        }
    }
    current.iter().zip(theta).map(|(a, b)| a - b).collect()
}

fn local_rng(config: &FedAvgConfig, round: usize, agent: usize) -> SimRng {
    stream_rng(config.seed, Stream::Training, &[round as u64, agent as u64])
}

/// One agent's NoisyUpdate: `E` local steps, clip to `S`, then add
/// `N(0, σ²S²/m_t)` per coordinate.
pub fn noisy_update(
    agent: &dyn Objective,
    theta: &[f64],
    config: &FedAvgConfig,
    round: usize,
    agent_id: usize,
    sampled: usize,
) -> ModelUpdate {
    assert!(sampled >= 1, "at least one agent must be sampled");
    let mut rng = local_rng(config, round, agent_id);
    let batch = config.batch_size.map(|b| (b, &mut rng));
    let delta = local_delta(agent, theta, config.local_iters, config.learning_rate(round), batch);
    let mut update = clip_update(delta, config.clip);
    if config.sigma > 0.0 {
        let std = config.sigma * config.clip / (sampled as f64).sqrt();
        let mut noise = stream_rng(config.seed, Stream::UpdateNoise, &[round as u64, agent_id as u64]);
        for v in &mut update.delta {
            let z: f64 = noise.sample(StandardNormal);
            *v += std * z;
        }
    }
    update
}

/// `(1/m) Σ Δᵢ` with pairwise summation in slice order.
pub fn aggregate_updates(updates: &[ModelUpdate]) -> Vec<f64> {
    let rows: Vec<&[f64]> = updates.iter().map(|u| u.delta.as_slice()).collect();
    let m = updates.len() as f64;
    pairwise_sum_rows(&rows).into_iter().map(|v| v / m).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundOutcome {
    pub theta: Vec<f64>,
    /// Sampled agent ids in ascending order.
    pub sampled: Vec<usize>,
    pub clipped: usize,
}

fn sample_agents(config: &FedAvgConfig, round: usize, num_agents: usize) -> Vec<usize> {
    for attempt in 0u64.. {
        let mut rng = stream_rng(config.seed, Stream::Sampling, &[round as u64, attempt]);
        let picked: Vec<usize> = (0..num_agents).filter(|_| rng.random::<f64>() < config.q).collect();
        if !picked.is_empty() {
            return picked;
        }
    }
    unreachable!()
}

/// One outer round: Poisson-sample agents (resampling an empty round),
/// collect their updates in parallel and apply the average. Without DP the
/// raw local deltas are averaged.
pub fn fedavg_round<O: Objective>(
    theta: &[f64],
    agents: &[O],
    config: &FedAvgConfig,
    round: usize,
    dp_enabled: bool,
) -> Result<RoundOutcome> {
    config.validate()?;
    if agents.is_empty() {
        return Err(Error::usage("FedAvg needs at least one agent"));
    }
    if let Some(bad) = agents.iter().find(|a| a.dim() != theta.len()) {
        return Err(Error::Dimension {
            expected: theta.len(),
            got: bad.dim(),
        });
    }
    let sampled = sample_agents(config, round, agents.len());
    let m = sampled.len();
    let updates: Vec<ModelUpdate> = sampled
        .par_iter()
        .map(|&i| {
            if dp_enabled {
                noisy_update(&agents[i], theta, config, round, i, m)
            } else {
                let mut rng = local_rng(config, round, i);
                let batch = config.batch_size.map(|b| (b, &mut rng));
                let delta = local_delta(&agents[i], theta, config.local_iters, config.learning_rate(round), batch);
                let norm = l2_norm(&delta);
                ModelUpdate {
                    delta,
                    clipped: false,
                    pre_clip_norm: norm,
                }
            }
        })
        .collect();
    let step = aggregate_updates(&updates);
    Ok(RoundOutcome {
        theta: theta.iter().zip(&step).map(|(t, s)| t + s).collect(),
        clipped: updates.iter().filter(|u| u.clipped).count(),
        sampled,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FedAvgTrace {
    pub theta: Vec<f64>,
    pub sampled_per_round: Vec<usize>,
    pub clipped_per_round: Vec<usize>,
}

/// Run all `T` rounds from `theta0`.
pub fn train_fedavg<O: Objective>(
    agents: &[O],
    theta0: Vec<f64>,
    config: &FedAvgConfig,
    dp_enabled: bool,
) -> Result<FedAvgTrace> {
    let mut trace = FedAvgTrace {
        theta: theta0,
        sampled_per_round: Vec::with_capacity(config.rounds),
        clipped_per_round: Vec::with_capacity(config.rounds),
    };
    for round in 0..config.rounds {
        let out = fedavg_round(&trace.theta, agents, config, round, dp_enabled)?;
        trace.theta = out.theta;
        trace.sampled_per_round.push(out.sampled.len());
        trace.clipped_per_round.push(out.clipped);
    }
    Ok(trace)
}
