use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::accounting::{
    accumulate_data_dependent, gaussian_rdp, Granularity, MechanismParams, PrivacyReport,
    VotingScheme,
};
use crate::error::{Error, Result};
use crate::gradient::{train_fedavg, FedAvgConfig, SoftmaxObjective};
use crate::learners::{
    predict, train_classifier, train_student, Classifier, FeatureMap, FeatureMapKind, KnnIndex,
    TrainConfig,
};
use crate::rng::{derive_seed, Stream};
use crate::voting::{agent_noise_rng, mpc_argmax, noisy_vote, MarginLog, VoteVector};

use super::{build_federation, FederatedData, FederationSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Ae,
    Knn,
    FedAvg,
    DpFedAvg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AeConfig {
    pub sigma: f64,
    pub queries: usize,
    #[serde(default = "agent_level")]
    pub granularity: Granularity,
    #[serde(default)]
    pub teacher: TrainConfig,
    #[serde(default)]
    pub student: TrainConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KChoice {
    Fixed(usize),
    /// `ceil(fraction · nᵢ)`, at least 1, per agent.
    Fraction(f64),
}

impl KChoice {
    pub fn resolve(self, local_size: usize) -> usize {
        match self {
            KChoice::Fixed(k) => k,
            KChoice::Fraction(f) => ((f * local_size as f64).ceil() as usize).max(1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnConfig {
    pub sigma: f64,
    pub queries: usize,
    #[serde(default = "default_k_choice")]
    pub k: KChoice,
    #[serde(default = "identity_map")]
    pub feature_map: FeatureMapKind,
    #[serde(default = "instance_level")]
    pub granularity: Granularity,
    #[serde(default)]
    pub student: TrainConfig,
}

/// FedAvg / DP-FedAvg on a softmax model. The run seed drives sampling,
/// minibatches and noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientConfig {
    pub q: f64,
    #[serde(default)]
    pub sigma: f64,
    #[serde(default = "infinite_clip")]
    pub clip: f64,
    pub local_iters: usize,
    pub eta: f64,
    pub rounds: usize,
    #[serde(default)]
    pub lr_decay: bool,
    #[serde(default)]
    pub batch_size: Option<usize>,
    #[serde(default)]
    pub l2: f64,
}

impl GradientConfig {
    pub fn fedavg_config(&self, seed: u64) -> FedAvgConfig {
        FedAvgConfig {
            q: self.q,
            sigma: self.sigma,
            clip: self.clip,
            local_iters: self.local_iters,
            eta: self.eta,
            rounds: self.rounds,
            seed,
            lr_decay: self.lr_decay,
            batch_size: self.batch_size,
        }
    }
}

fn agent_level() -> Granularity {
    Granularity::Agent
}

fn instance_level() -> Granularity {
    Granularity::Instance
}

fn default_k_choice() -> KChoice {
    KChoice::Fraction(0.05)
}

fn identity_map() -> FeatureMapKind {
    FeatureMapKind::Identity
}

fn infinite_clip() -> f64 {
    f64::INFINITY
}

/// A scheme together with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SchemeConfig {
    Ae(AeConfig),
    Knn(KnnConfig),
    FedAvg(GradientConfig),
    DpFedAvg(GradientConfig),
}

impl SchemeConfig {
    pub fn scheme(&self) -> Scheme {
        match self {
            SchemeConfig::Ae(_) => Scheme::Ae,
            SchemeConfig::Knn(_) => Scheme::Knn,
            SchemeConfig::FedAvg(_) => Scheme::FedAvg,
            SchemeConfig::DpFedAvg(_) => Scheme::DpFedAvg,
        }
    }
}

/// Outcome of one run, serialized as one JSON line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scheme: Scheme,
    pub seed: u64,
    pub test_accuracy: f64,
    /// Agreement of released labels with the pool's true labels; voting only.
    pub pseudo_label_accuracy: Option<f64>,
    /// Absent for non-private FedAvg.
    pub privacy: Option<PrivacyReport>,
    /// Floats each agent sends upstream over the whole run.
    pub comm_upstream_floats: u64,
    /// Expected upstream floats under Poisson agent sampling.
    pub comm_expected_floats: f64,
    pub wall_time_ms: u64,
    pub warnings: Vec<String>,
    pub config: serde_json::Value,
}

impl RunReport {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("run report is always serializable")
    }
}

/// Per-agent upstream cost: voting sends `C` floats per query; gradient
/// schemes send the full `d`-dimensional model each round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommCost {
    pub upstream_floats: u64,
    pub expected_floats: f64,
}

pub fn comm_cost(scheme: Scheme, model_dim: u64, rounds: u64, num_classes: u64, queries: u64, q: f64) -> CommCost {
    match scheme {
        Scheme::Ae | Scheme::Knn => {
            let floats = num_classes * queries;
            CommCost {
                upstream_floats: floats,
                expected_floats: floats as f64,
            }
        }
        Scheme::FedAvg | Scheme::DpFedAvg => {
            let floats = model_dim * rounds;
            CommCost {
                upstream_floats: floats,
                expected_floats: q * floats as f64,
            }
        }
    }
}

/// Fraction of test points whose predicted class matches the label.
pub fn evaluate(model: &Classifier, test: &crate::learners::AgentDataset) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::usage("cannot evaluate on an empty test set"));
    }
    let mut hits = 0usize;
    for (x, &y) in test.features().iter().zip(test.labels()) {
        if model.predict_label(x)? == y {
            hits += 1;
        }
    }
    Ok(hits as f64 / test.len() as f64)
}

fn check_queries(fed: &FederatedData, queries: usize) -> Result<()> {
    if fed.public_pool.is_empty() {
        return Err(Error::usage("voting schemes need a non-empty public pool"));
    }
    if queries == 0 {
        return Err(Error::usage("no queries requested; the student cannot be trained"));
    }
    if queries > fed.public_pool.len() {
        return Err(Error::param(format!(
            "{queries} queries exceed the public pool of {}",
            fed.public_pool.len()
        )));
    }
    Ok(())
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::param(format!("sigma = {sigma} must be positive and finite")))
    }
}

fn with_seed(config: &TrainConfig, seed: u64, stream: Stream, key: u64) -> TrainConfig {
    TrainConfig {
        seed: derive_seed(seed, stream, &[key]),
        ..config.clone()
    }
}

struct VoteOutcome {
    labeled: Vec<(Vec<f64>, usize)>,
    margins: MarginLog,
    pseudo_label_accuracy: f64,
}

/// The shared query loop: for each of the first `queries` pool points,
/// every agent votes, adds its noise share and the secure argmax releases
/// one label.
fn answer_queries<F>(fed: &FederatedData, queries: usize, sigma: f64, seed: u64, vote: F) -> Result<VoteOutcome>
where
    F: Fn(usize, &[f64]) -> Result<VoteVector> + Sync,
{
    let n = fed.agents.len();
    let mut margins = MarginLog::new();
    let mut labeled = Vec::with_capacity(queries);
    let mut hits = 0usize;
    for (t, x) in fed.public_pool.iter().take(queries).enumerate() {
        let clean: Vec<VoteVector> = (0..n).into_par_iter().map(|i| vote(i, x)).collect::<Result<_>>()?;
        let noisy: Vec<VoteVector> = clean
            .par_iter()
            .enumerate()
            .map(|(i, v)| noisy_vote(v, sigma, n, &mut agent_noise_rng(seed, i, t as u64)))
            .collect();
        let agg = mpc_argmax(noisy, &clean, t as u64)?;
        margins.record(&agg);
        if agg.released_label() == fed.public_labels[t] {
            hits += 1;
        }
        labeled.push((x.clone(), agg.released_label()));
    }
    Ok(VoteOutcome {
        labeled,
        margins,
        pseudo_label_accuracy: hits as f64 / queries as f64,
    })
}

fn elapsed_ms(start: Instant) -> u64 {
    start.elapsed().as_millis() as u64
}

fn echo(spec: &FederationSpec, scheme: &SchemeConfig, delta: f64) -> serde_json::Value {
    serde_json::json!({ "federation": spec, "scheme": scheme, "delta": delta })
}

/// Teacher ensemble voting (one-hot votes from locally trained models).
pub fn run_ae_dpfl(spec: &FederationSpec, config: &AeConfig, delta: f64) -> Result<RunReport> {
    let start = Instant::now();
    check_sigma(config.sigma)?;
    let fed = build_federation(spec)?;
    check_queries(&fed, config.queries)?;
    let teachers: Vec<Classifier> = fed
        .agents
        .par_iter()
        .enumerate()
        .map(|(i, data)| train_classifier(data, &with_seed(&config.teacher, spec.seed, Stream::Training, i as u64)))
        .collect::<Result<_>>()?;
    let mut warnings: Vec<String> = teachers
        .iter()
        .enumerate()
        .filter(|(_, t)| t.is_degenerate())
        .map(|(i, _)| format!("teacher {i} saw a single class"))
        .collect();

    let outcome = answer_queries(&fed, config.queries, config.sigma, spec.seed, |i, x| predict(&teachers[i], x))?;
    let params = MechanismParams {
        sigma: config.sigma,
        queries: config.queries as u64,
        num_agents: fed.agents.len(),
        k: None,
        num_classes: fed.num_classes,
        granularity: config.granularity,
    };
    let privacy = accumulate_data_dependent(outcome.margins.records(), &params, VotingScheme::Ae, delta)?;
    let student_cfg = with_seed(&config.student, spec.seed, Stream::Training, u64::MAX);
    let student = train_student(&outcome.labeled, fed.num_classes, &student_cfg)?;
    if student.is_degenerate() {
        warnings.push("all pseudo-labels are identical".to_string());
    }
    let comm = comm_cost(Scheme::Ae, 0, 0, fed.num_classes as u64, config.queries as u64, 1.0);
    Ok(RunReport {
        scheme: Scheme::Ae,
        seed: spec.seed,
        test_accuracy: evaluate(&student, &fed.test)?,
        pseudo_label_accuracy: Some(outcome.pseudo_label_accuracy),
        privacy: Some(privacy),
        comm_upstream_floats: comm.upstream_floats,
        comm_expected_floats: comm.expected_floats,
        wall_time_ms: elapsed_ms(start),
        warnings,
        config: echo(spec, &SchemeConfig::Ae(config.clone()), delta),
    })
}

/// kNN voting over each agent's private data in feature space.
pub fn run_knn_dpfl(spec: &FederationSpec, config: &KnnConfig, delta: f64) -> Result<RunReport> {
    let start = Instant::now();
    check_sigma(config.sigma)?;
    let fed = build_federation(spec)?;
    check_queries(&fed, config.queries)?;
    let phi = FeatureMap::from_kind(&config.feature_map, fed.dim)?;
    let ks: Vec<usize> = fed.agents.iter().map(|a| config.k.resolve(a.len())).collect();
    for (i, (&k, a)) in ks.iter().zip(&fed.agents).enumerate() {
        if k == 0 || k > a.len() {
            return Err(Error::param(format!(
                "k = {k} is invalid for agent {i} holding {} points",
                a.len()
            )));
        }
    }
    let indexes: Vec<KnnIndex> = fed
        .agents
        .par_iter()
        .map(|a| KnnIndex::new(a, &phi))
        .collect::<Result<_>>()?;

    let outcome = answer_queries(&fed, config.queries, config.sigma, spec.seed, |i, x| indexes[i].predict(x, ks[i]))?;
    let k_min = ks.iter().copied().min().unwrap_or(1);
    let params = MechanismParams {
        sigma: config.sigma,
        queries: config.queries as u64,
        num_agents: fed.agents.len(),
        k: Some(k_min),
        num_classes: fed.num_classes,
        granularity: config.granularity,
    };
    let privacy = accumulate_data_dependent(outcome.margins.records(), &params, VotingScheme::Knn, delta)?;
    let student_cfg = with_seed(&config.student, spec.seed, Stream::Training, u64::MAX);
    let student = train_student(&outcome.labeled, fed.num_classes, &student_cfg)?;
    let mut warnings = Vec::new();
    if student.is_degenerate() {
        warnings.push("all pseudo-labels are identical".to_string());
    }
    let comm = comm_cost(Scheme::Knn, 0, 0, fed.num_classes as u64, config.queries as u64, 1.0);
    Ok(RunReport {
        scheme: Scheme::Knn,
        seed: spec.seed,
        test_accuracy: evaluate(&student, &fed.test)?,
        pseudo_label_accuracy: Some(outcome.pseudo_label_accuracy),
        privacy: Some(privacy),
        comm_upstream_floats: comm.upstream_floats,
        comm_expected_floats: comm.expected_floats,
        wall_time_ms: elapsed_ms(start),
        warnings,
        config: echo(spec, &SchemeConfig::Knn(config.clone()), delta),
    })
}

fn run_gradient(spec: &FederationSpec, config: &GradientConfig, delta: f64, dp: bool) -> Result<RunReport> {
    let start = Instant::now();
    let fed_cfg = config.fedavg_config(spec.seed);
    fed_cfg.validate()?;
    if dp {
        check_sigma(config.sigma)?;
    }
    let fed = build_federation(spec)?;
    let agents: Vec<SoftmaxObjective> = fed
        .agents
        .iter()
        .map(|a| SoftmaxObjective::new(a.clone(), config.l2))
        .collect();
    let dim = fed.num_classes * (fed.dim + 1);
    let trace = train_fedavg(&agents, vec![0.0; dim], &fed_cfg, dp)?;
    let model = Classifier::logistic_from_weights(trace.theta, fed.num_classes, fed.dim)?;

    // Each round releases the clipped sum (sensitivity S) with noise σS.
    let privacy = if dp {
        let curve = gaussian_rdp(1.0, config.sigma)?.repeated(config.rounds as u64);
        Some(PrivacyReport::from_curve(&curve, delta)?)
    } else {
        None
    };
    let scheme = if dp { Scheme::DpFedAvg } else { Scheme::FedAvg };
    let comm = comm_cost(scheme, dim as u64, config.rounds as u64, fed.num_classes as u64, 0, config.q);
    let scheme_cfg = if dp {
        SchemeConfig::DpFedAvg(config.clone())
    } else {
        SchemeConfig::FedAvg(config.clone())
    };
    let clipped: usize = trace.clipped_per_round.iter().sum();
    let sampled: usize = trace.sampled_per_round.iter().sum();
    let mut warnings = Vec::new();
    if dp && clipped == sampled {
        warnings.push("every update was clipped".to_string());
    }
    Ok(RunReport {
        scheme,
        seed: spec.seed,
        test_accuracy: evaluate(&model, &fed.test)?,
        pseudo_label_accuracy: None,
        privacy,
        comm_upstream_floats: comm.upstream_floats,
        comm_expected_floats: comm.expected_floats,
        wall_time_ms: elapsed_ms(start),
        warnings,
        config: echo(spec, &scheme_cfg, delta),
    })
}

/// DP-FedAvg; privacy is the composition of `T` agent-level Gaussian
/// releases, `Tα/(2σ²)`, without subsampling amplification.
pub fn run_dp_fedavg(spec: &FederationSpec, config: &GradientConfig, delta: f64) -> Result<RunReport> {
    run_gradient(spec, config, delta, true)
}

/// Non-private FedAvg (no clipping, no noise).
pub fn run_fedavg(spec: &FederationSpec, config: &GradientConfig) -> Result<RunReport> {
    run_gradient(spec, config, f64::NAN, false)
}

pub fn run_scheme(spec: &FederationSpec, scheme: &SchemeConfig, delta: f64) -> Result<RunReport> {
    match scheme {
        SchemeConfig::Ae(c) => run_ae_dpfl(spec, c, delta),
        SchemeConfig::Knn(c) => run_knn_dpfl(spec, c, delta),
        SchemeConfig::FedAvg(c) => run_fedavg(spec, c),
        SchemeConfig::DpFedAvg(c) => run_dp_fedavg(spec, c, delta),
    }
}

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        if values.is_empty() {
            return MeanStd { mean: f64::NAN, std: f64::NAN };
        }
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        MeanStd { mean, std }
    }
}
