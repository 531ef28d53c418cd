use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One agent's labeled examples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentDataset {
    features: Vec<Vec<f64>>,
    labels: Vec<usize>,
    num_classes: usize,
    /// Identifies the generating distribution.
    pub domain_tag: String,
}

impl AgentDataset {
    pub fn new(
        features: Vec<Vec<f64>>,
        labels: Vec<usize>,
        num_classes: usize,
        domain_tag: impl Into<String>,
    ) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::Dimension {
                expected: features.len(),
                got: labels.len(),
            });
        }
        if num_classes < 2 {
            return Err(Error::param("num_classes must be at least 2"));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::param(format!(
                "label {bad} out of range for {num_classes} classes"
            )));
        }
        if let Some(first) = features.first() {
            let d = first.len();
            if let Some(row) = features.iter().find(|r| r.len() != d) {
                return Err(Error::Dimension {
                    expected: d,
                    got: row.len(),
                });
            }
        }
        Ok(AgentDataset {
            features,
            labels,
            num_classes,
            domain_tag: domain_tag.into(),
        })
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Input dimension, or 0 for an empty dataset.
    pub fn dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    /// Copy without the example at `index`.
    pub fn without(&self, index: usize) -> AgentDataset {
        let mut out = self.clone();
        out.features.remove(index);
        out.labels.remove(index);
        out
    }

    /// Copy with one extra example appended.
    pub fn with(&self, x: Vec<f64>, y: usize) -> AgentDataset {
        let mut out = self.clone();
        out.features.push(x);
        out.labels.push(y);
        out
    }

    /// Sorted distinct labels present.
    pub fn label_set(&self) -> Vec<usize> {
        let mut seen = vec![false; self.num_classes];
        for &l in &self.labels {
            seen[l] = true;
        }
        (0..self.num_classes).filter(|&c| seen[c]).collect()
    }
}
