use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::{vvft, AgentDataset};
use crate::rng::{stream_rng, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    /// `C` unit-variance Gaussian blobs whose means are pairwise
    /// `separation` apart (`μ_c = separation/√2 · e_c`); needs `dim ≥ C`.
    SyntheticBlobs {
        num_classes: usize,
        dim: usize,
        separation: f64,
    },
    /// A VVFT feature matrix plus an `index,label` CSV.
    FileBacked { features: PathBuf, labels: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Partition {
    Iid,
    /// Class-pure shards, `classes_per_agent` per agent.
    LabelSorted { classes_per_agent: usize },
    /// IID shards, each shifted by its own random offset of norm `offset_scale`.
    DomainShift { offset_scale: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FederationSpec {
    pub num_agents: usize,
    /// Training points per agent (synthetic data only; file-backed data
    /// splits everything left after the pool and test set).
    pub samples_per_agent: usize,
    pub public_pool_size: usize,
    pub test_size: usize,
    pub partition: Partition,
    pub source: DataSource,
    #[serde(default)]
    pub seed: u64,
}

/// Everything a run needs: private shards, the public pool and a test set.
#[derive(Debug, Clone, PartialEq)]
pub struct FederatedData {
    pub agents: Vec<AgentDataset>,
    pub public_pool: Vec<Vec<f64>>,
    /// True labels of the pool, used only to report labeling quality.
    pub public_labels: Vec<usize>,
    pub test: AgentDataset,
    pub num_classes: usize,
    pub dim: usize,
}

impl FederationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_agents == 0 {
            return Err(Error::param("num_agents must be at least 1"));
        }
        if let DataSource::SyntheticBlobs {
            num_classes,
            dim,
            separation,
        } = &self.source
        {
            if *num_classes < 2 {
                return Err(Error::param("num_classes must be at least 2"));
            }
            if dim < num_classes {
                return Err(Error::param(format!(
                    "synthetic blobs need dim >= num_classes ({dim} < {num_classes})"
                )));
            }
            if !(separation.is_finite() && *separation >= 0.0) {
                return Err(Error::param("separation must be finite and non-negative"));
            }
            if self.samples_per_agent == 0 {
                return Err(Error::param("samples_per_agent must be positive"));
            }
            self.check_partition(*num_classes)?;
        }
        Ok(())
    }

    fn check_partition(&self, num_classes: usize) -> Result<()> {
        match self.partition {
            Partition::Iid => Ok(()),
            Partition::LabelSorted { classes_per_agent } => {
                if classes_per_agent == 0 || classes_per_agent > num_classes {
                    Err(Error::param(format!(
                        "classes_per_agent = {classes_per_agent} must lie in 1..={num_classes}"
                    )))
                } else {
                    Ok(())
                }
            }
            Partition::DomainShift { offset_scale } => {
                if offset_scale.is_finite() && offset_scale >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::param("offset_scale must be finite and non-negative"))
                }
            }
        }
    }
}

fn blob_points(
    n: usize,
    num_classes: usize,
    dim: usize,
    separation: f64,
    rng: &mut impl Rng,
) -> (Vec<Vec<f64>>, Vec<usize>) {
    let scale = separation / 2f64.sqrt();
    let mut labels: Vec<usize> = (0..n).map(|i| i % num_classes).collect();
    labels.shuffle(rng);
    let features = labels
        .iter()
        .map(|&y| {
            (0..dim)
                .map(|j| {
                    let mean = if j == y { scale } else { 0.0 };
                    mean + rng.sample::<f64, _>(StandardNormal)
                })
                .collect()
        })
        .collect();
    (features, labels)
}

/// Draw agent data, public pool and test set from Gaussian blobs. Pool
/// and test points come from the unshifted server distribution.
pub fn generate_synthetic(spec: &FederationSpec) -> Result<FederatedData> {
    spec.validate()?;
    let DataSource::SyntheticBlobs {
        num_classes,
        dim,
        separation,
    } = spec.source
    else {
        return Err(Error::usage("generate_synthetic needs a synthetic source"));
    };
    let mut rng = stream_rng(spec.seed, Stream::Data, &[0]);
    let (features, labels) = blob_points(
        spec.num_agents * spec.samples_per_agent,
        num_classes,
        dim,
        separation,
        &mut rng,
    );
    let pooled = AgentDataset::new(features, labels, num_classes, "server")?;
    let agents = partition(&pooled, spec)?;

    let mut rng = stream_rng(spec.seed, Stream::Data, &[1]);
    let (public_pool, public_labels) =
        blob_points(spec.public_pool_size, num_classes, dim, separation, &mut rng);
    let mut rng = stream_rng(spec.seed, Stream::Data, &[2]);
    let (test_x, test_y) = blob_points(spec.test_size, num_classes, dim, separation, &mut rng);
    Ok(FederatedData {
        agents,
        public_pool,
        public_labels,
        test: AgentDataset::new(test_x, test_y, num_classes, "server")?,
        num_classes,
        dim,
    })
}

/// Load a labeled file, shuffle it under the run seed and carve out the
/// public pool, the test set and the agents' shards, in that order.
pub fn load_file_backed(spec: &FederationSpec) -> Result<FederatedData> {
    spec.validate()?;
    let DataSource::FileBacked { features, labels } = &spec.source else {
        return Err(Error::usage("load_file_backed needs a file-backed source"));
    };
    let x = vvft::read_features(features)?;
    let y = vvft::read_labels(labels)?;
    if x.len() != y.len() {
        return Err(Error::Format(format!(
            "{} has {} rows but {} has {} labels",
            features.display(),
            x.len(),
            labels.display(),
            y.len()
        )));
    }
    let num_classes = y.iter().max().map_or(2, |m| (m + 1).max(2));
    spec.check_partition(num_classes)?;
    let dim = x.first().map_or(0, Vec::len);
    let need = spec.public_pool_size + spec.test_size + spec.num_agents;
    if x.len() < need {
        return Err(Error::param(format!(
            "{} rows cannot cover pool, test set and {} agents",
            x.len(),
            spec.num_agents
        )));
    }
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.shuffle(&mut stream_rng(spec.seed, Stream::Data, &[3]));
    let take = |idx: &[usize]| -> (Vec<Vec<f64>>, Vec<usize>) {
        idx.iter().map(|&i| (x[i].clone(), y[i])).unzip()
    };
    let (pool_idx, rest) = order.split_at(spec.public_pool_size);
    let (test_idx, train_idx) = rest.split_at(spec.test_size);
    let (public_pool, public_labels) = take(pool_idx);
    let (test_x, test_y) = take(test_idx);
    let (train_x, train_y) = take(train_idx);
    let pooled = AgentDataset::new(train_x, train_y, num_classes, "server")?;
    Ok(FederatedData {
        agents: partition(&pooled, spec)?,
        public_pool,
        public_labels,
        test: AgentDataset::new(test_x, test_y, num_classes, "server")?,
        num_classes,
        dim,
    })
}

/// Build the federation described by `spec`, synthetic or file-backed.
pub fn build_federation(spec: &FederationSpec) -> Result<FederatedData> {
    match spec.source {
        DataSource::SyntheticBlobs { .. } => generate_synthetic(spec),
        DataSource::FileBacked { .. } => load_file_backed(spec),
    }
}

/// `count` contiguous ranges over `0..n` whose sizes differ by at most one.
fn balanced_ranges(n: usize, count: usize) -> Vec<std::ops::Range<usize>> {
    let base = n / count;
    let extra = n % count;
    let mut start = 0;
    (0..count)
        .map(|i| {
            let len = base + usize::from(i < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect()
}

/// Split pooled training data into `spec.num_agents` shards.
pub fn partition(data: &AgentDataset, spec: &FederationSpec) -> Result<Vec<AgentDataset>> {
    let n_agents = spec.num_agents;
    if n_agents == 0 || n_agents > data.len() {
        return Err(Error::param(format!(
            "cannot split {} points across {n_agents} agents",
            data.len()
        )));
    }
    let classes = data.num_classes();
    let build = |i: usize, idx: &[usize], offset: Option<&[f64]>| {
        let features = idx
            .iter()
            .map(|&j| {
                let x = &data.features()[j];
                match offset {
                    Some(o) => x.iter().zip(o).map(|(a, b)| a + b).collect(),
                    None => x.clone(),
                }
            })
            .collect();
        let labels = idx.iter().map(|&j| data.labels()[j]).collect();
        AgentDataset::new(features, labels, classes, format!("agent-{i}"))
    };

    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut stream_rng(spec.seed, Stream::Partition, &[0]));
    match spec.partition {
        Partition::Iid => balanced_ranges(order.len(), n_agents)
            .into_iter()
            .enumerate()
            .map(|(i, r)| build(i, &order[r], None))
            .collect(),
        Partition::DomainShift { offset_scale } => {
            let dim = data.dim();
            balanced_ranges(order.len(), n_agents)
                .into_iter()
                .enumerate()
                .map(|(i, r)| {
                    let mut rng = stream_rng(spec.seed, Stream::Partition, &[1, i as u64]);
                    let dir: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
                    let norm = crate::numeric::l2_norm(&dir).max(f64::MIN_POSITIVE);
                    let offset: Vec<f64> = dir.iter().map(|v| offset_scale * v / norm).collect();
                    let mut shard = build(i, &order[r], Some(&offset))?;
                    shard.domain_tag = format!("shift-{i}");
                    Ok(shard)
                })
                .collect()
        }
        Partition::LabelSorted { classes_per_agent } => {
            spec.check_partition(classes)?;
            label_sorted(&order, data, n_agents, classes_per_agent)
                .into_iter()
                .enumerate()
                .map(|(i, idx)| build(i, &idx, None))
                .collect()
        }
    }
}

/// Cut each class into class-pure shards (`N · classes_per_agent` in
/// total, allotted to classes by largest remainder), order shards by class
/// and deal agent `i` the shards `i, i+N, i+2N, …`.
fn label_sorted(
    order: &[usize],
    data: &AgentDataset,
    n_agents: usize,
    classes_per_agent: usize,
) -> Vec<Vec<usize>> {
    let classes = data.num_classes();
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for &j in order {
        by_class[data.labels()[j]].push(j);
    }
    let total_shards = n_agents * classes_per_agent;
    let n = order.len() as f64;
    let quotas: Vec<f64> = by_class
        .iter()
        .map(|c| c.len() as f64 * total_shards as f64 / n)
        .collect();
    let mut shards_per_class: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut remainders: Vec<(f64, usize)> =
        quotas.iter().enumerate().map(|(c, q)| (q - q.floor(), c)).collect();
    remainders.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let assigned: usize = shards_per_class.iter().sum();
    for &(_, c) in remainders.iter().take(total_shards - assigned) {
        shards_per_class[c] += 1;
    }
    let mut shards: Vec<Vec<usize>> = Vec::with_capacity(total_shards);
    for (members, &count) in by_class.iter().zip(&shards_per_class) {
        if count == 0 {
            continue;
        }
        for r in balanced_ranges(members.len(), count) {
            shards.push(members[r].to_vec());
        }
    }
    let mut agents = vec![Vec::new(); n_agents];
    for (s, shard) in shards.into_iter().enumerate() {
        agents[s % n_agents].extend(shard);
    }
    agents
}
