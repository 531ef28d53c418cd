use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{argmax, l2_distance_sq};
use crate::rng::{stream_rng, Stream};
use crate::voting::{one_hot, VoteVector};

use super::AgentDataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    Logistic,
    NearestCentroid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub kind: ClassifierKind,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Weight decay on the non-bias weights.
    pub l2: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            kind: ClassifierKind::Logistic,
            epochs: 30,
            learning_rate: 0.5,
            batch_size: 32,
            l2: 1e-4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Model {
    /// `C × (d+1)` row-major; the last column of each row is the bias.
    Logistic { weights: Vec<f64> },
    /// Per-class mean; `None` for classes absent from the training data.
    NearestCentroid { centroids: Vec<Option<Vec<f64>>> },
}

/// A fitted local model. Immutable after training.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    model: Model,
    num_classes: usize,
    dim: usize,
    degenerate: bool,
}

impl Classifier {
    /// Wrap raw logistic weights (`C × (d+1)`, bias last).
    pub fn logistic_from_weights(weights: Vec<f64>, num_classes: usize, dim: usize) -> Result<Self> {
        if weights.len() != num_classes * (dim + 1) {
            return Err(Error::Dimension {
                expected: num_classes * (dim + 1),
                got: weights.len(),
            });
        }
        Ok(Classifier {
            model: Model::Logistic { weights },
            num_classes,
            dim,
            degenerate: false,
        })
    }

    pub fn kind(&self) -> ClassifierKind {
        match self.model {
            Model::Logistic { .. } => ClassifierKind::Logistic,
            Model::NearestCentroid { .. } => ClassifierKind::NearestCentroid,
        }
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Set when the training data held a single class.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    /// Logistic weights, if this is a logistic model.
    pub fn weights(&self) -> Option<&[f64]> {
        match &self.model {
            Model::Logistic { weights } => Some(weights),
            Model::NearestCentroid { .. } => None,
        }
    }

    pub fn centroid(&self, class: usize) -> Option<&[f64]> {
        match &self.model {
            Model::NearestCentroid { centroids } => centroids.get(class)?.as_deref(),
            Model::Logistic { .. } => None,
        }
    }

    pub fn predict_label(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(match &self.model {
            Model::Logistic { weights } => argmax(&logits(weights, self.num_classes, x)),
            Model::NearestCentroid { centroids } => {
                let mut best: Option<(usize, f64)> = None;
                for (c, centroid) in centroids.iter().enumerate() {
                    let Some(m) = centroid else { continue };
                    let d = l2_distance_sq(m, x);
                    if best.is_none_or(|(_, bd)| d < bd) {
                        best = Some((c, d));
                    }
                }
                best.map_or(0, |(c, _)| c)
            }
        })
    }
}

fn logits(weights: &[f64], num_classes: usize, x: &[f64]) -> Vec<f64> {
    let stride = x.len() + 1;
    (0..num_classes)
        .map(|c| {
            let row = &weights[c * stride..(c + 1) * stride];
            row[..x.len()].iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + row[x.len()]
        })
        .collect()
}

fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in z.iter_mut() {
        *v /= total;
    }
}

/// Mean softmax cross-entropy over `rows` plus `l2/2 · ‖W‖²` (bias
/// excluded), and its gradient with respect to the flattened weights.
pub fn softmax_loss_grad(
    weights: &[f64],
    num_classes: usize,
    features: &[Vec<f64>],
    labels: &[usize],
    rows: &[usize],
    l2: f64,
) -> (f64, Vec<f64>) {
    let dim = features.first().map_or(0, Vec::len);
    let stride = dim + 1;
    let mut grad = vec![0.0; weights.len()];
    let mut loss = 0.0;
    let scale = 1.0 / rows.len().max(1) as f64;
    for &i in rows {
        let x = &features[i];
        let mut p = logits(weights, num_classes, x);
        let max = p.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let log_norm = max + p.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
        loss += log_norm - p[labels[i]];
        softmax_in_place(&mut p);
        p[labels[i]] -= 1.0;
        for (c, err) in p.iter().enumerate() {
            let row = &mut grad[c * stride..(c + 1) * stride];
            for (g, v) in row[..dim].iter_mut().zip(x) {
                *g += scale * err * v;
            }
            row[dim] += scale * err;
        }
    }
    loss *= scale;
    if l2 > 0.0 {
        for c in 0..num_classes {
            for j in 0..dim {
                let w = weights[c * stride + j];
                loss += 0.5 * l2 * w * w;
                grad[c * stride + j] += l2 * w;
            }
        }
    }
    (loss, grad)
}

fn fit_logistic(
    features: &[Vec<f64>],
    labels: &[usize],
    num_classes: usize,
    config: &TrainConfig,
) -> Vec<f64> {
    let dim = features[0].len();
    let mut weights = vec![0.0; num_classes * (dim + 1)];
    let mut order: Vec<usize> = (0..labels.len()).collect();
    let mut rng = stream_rng(config.seed, Stream::Training, &[labels.len() as u64]);
    let batch = config.batch_size.max(1);
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for rows in order.chunks(batch) {
            let (_, grad) = softmax_loss_grad(&weights, num_classes, features, labels, rows, config.l2);
            for (w, g) in weights.iter_mut().zip(&grad) {
                *w -= config.learning_rate * g;
            }
        }
    }
    weights
}

fn fit_centroids(features: &[Vec<f64>], labels: &[usize], num_classes: usize) -> Vec<Option<Vec<f64>>> {
    let dim = features[0].len();
    let mut sums = vec![vec![0.0; dim]; num_classes];
    let mut counts = vec![0usize; num_classes];
    for (x, &y) in features.iter().zip(labels) {
        counts[y] += 1;
        for (s, v) in sums[y].iter_mut().zip(x) {
            *s += v;
        }
    }
    sums.into_iter()
        .zip(counts)
        .map(|(s, n)| (n > 0).then(|| s.into_iter().map(|v| v / n as f64).collect()))
        .collect()
}

fn fit(
    features: &[Vec<f64>],
    labels: &[usize],
    num_classes: usize,
    config: &TrainConfig,
) -> Result<Classifier> {
    if labels.is_empty() {
        return Err(Error::usage("cannot train on an empty dataset"));
    }
    let dim = features[0].len();
    let first = labels[0];
    let degenerate = labels.iter().all(|&l| l == first);
    let model = match config.kind {
        ClassifierKind::Logistic => Model::Logistic {
            weights: fit_logistic(features, labels, num_classes, config),
        },
        ClassifierKind::NearestCentroid => Model::NearestCentroid {
            centroids: fit_centroids(features, labels, num_classes),
        },
    };
    Ok(Classifier {
        model,
        num_classes,
        dim,
        degenerate,
    })
}

/// Fit a local model. Deterministic given `config.seed`.
pub fn train_classifier(data: &AgentDataset, config: &TrainConfig) -> Result<Classifier> {
    fit(data.features(), data.labels(), data.num_classes(), config)
}

/// Fit the global model on privately labeled public points.
pub fn train_student(
    pseudo_labeled: &[(Vec<f64>, usize)],
    num_classes: usize,
    config: &TrainConfig,
) -> Result<Classifier> {
    let (features, labels): (Vec<Vec<f64>>, Vec<usize>) = pseudo_labeled.iter().cloned().unzip();
    if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
        return Err(Error::param(format!("pseudo-label {bad} out of range")));
    }
    fit(&features, &labels, num_classes, config)
}

/// One-hot vote of the predicted class.
pub fn predict(model: &Classifier, x: &[f64]) -> Result<VoteVector> {
    one_hot(model.predict_label(x)?, model.num_classes())
}
