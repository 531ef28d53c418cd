use crate::error::{Error, Result};
use crate::numeric::l2_distance_sq;
use crate::voting::{knn_frequency, VoteVector};

use super::{AgentDataset, FeatureMap};

/// `ceil(0.05 · n)`, at least 1.
pub fn default_k(n: usize) -> usize {
    (n * 5).div_ceil(100).max(1)
}

/// An agent's data with features already mapped through `φ`.
#[derive(Debug, Clone)]
pub struct KnnIndex {
    phi: FeatureMap,
    mapped: Vec<Vec<f64>>,
    labels: Vec<usize>,
    num_classes: usize,
}

impl KnnIndex {
    pub fn new(data: &AgentDataset, phi: &FeatureMap) -> Result<Self> {
        let mapped = data
            .features()
            .iter()
            .map(|x| phi.apply(x))
            .collect::<Result<Vec<_>>>()?;
        Ok(KnnIndex {
            phi: phi.clone(),
            mapped,
            labels: data.labels().to_vec(),
            num_classes: data.num_classes(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Indices of the `k` nearest points, nearest first; equal distances
    /// resolve toward the lower index.
    pub fn neighbors(&self, x: &[f64], k: usize) -> Result<Vec<usize>> {
        if k == 0 || k > self.len() {
            return Err(Error::param(format!(
                "k = {k} must lie in 1..={} (local data size)",
                self.len()
            )));
        }
        let q = self.phi.apply(x)?;
        let mut scored: Vec<(f64, usize)> = self
            .mapped
            .iter()
            .enumerate()
            .map(|(i, p)| (l2_distance_sq(p, &q), i))
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < scored.len() {
            scored.select_nth_unstable_by(k - 1, cmp);
            scored.truncate(k);
        }
        scored.sort_unstable_by(cmp);
        Ok(scored.into_iter().map(|(_, i)| i).collect())
    }

    /// Label frequency of the `k` nearest neighbors of `x`.
    pub fn predict(&self, x: &[f64], k: usize) -> Result<VoteVector> {
        let labels: Vec<usize> = self.neighbors(x, k)?.into_iter().map(|i| self.labels[i]).collect();
        knn_frequency(&labels, k, self.num_classes)
    }
}

pub fn knn_predict(data: &AgentDataset, phi: &FeatureMap, x: &[f64], k: usize) -> Result<VoteVector> {
    KnnIndex::new(data, phi)?.predict(x, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn small() -> AgentDataset {
        AgentDataset::new(
            vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![5.0, 5.0]],
            vec![0, 0, 1],
            2,
            "t",
        )
        .unwrap()
    }

    #[test]
    fn worked_examples() {
        let phi = FeatureMap::identity(2);
        let data = small();
        assert_eq!(knn_predict(&data, &phi, &[0.0, 0.4], 2).unwrap().values(), &[1.0, 0.0]);
        let v = knn_predict(&data, &phi, &[0.0, 0.4], 3).unwrap();
        assert!((v.values()[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((v.values()[1] - 1.0 / 3.0).abs() < 1e-15);
        assert!(knn_predict(&data, &phi, &[0.0, 0.4], 4).is_err());
        assert!(knn_predict(&data, &phi, &[0.0, 0.4], 0).is_err());
    }

    #[test]
    fn default_k_is_five_percent() {
        assert_eq!(default_k(1), 1);
        assert_eq!(default_k(20), 1);
        assert_eq!(default_k(21), 2);
        assert_eq!(default_k(100), 5);
        assert_eq!(default_k(0), 1);
    }

    #[test]
    fn distance_ties_prefer_lower_index() {
        let data = AgentDataset::new(vec![vec![1.0], vec![-1.0], vec![1.0]], vec![1, 0, 1], 2, "t").unwrap();
        let index = KnnIndex::new(&data, &FeatureMap::identity(1)).unwrap();
        assert_eq!(index.neighbors(&[0.0], 2).unwrap(), vec![0, 1]);
    }

    fn full_sort_oracle(data: &AgentDataset, x: &[f64], k: usize) -> Vec<f64> {
        let mut order: Vec<usize> = (0..data.len()).collect();
        let dist = |i: usize| -> f64 {
            data.features()[i].iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum()
        };
        order.sort_by(|&a, &b| dist(a).partial_cmp(&dist(b)).unwrap().then(a.cmp(&b)));
        let mut freq = vec![0.0; data.num_classes()];
        for &i in &order[..k] {
            freq[data.labels()[i]] += 1.0;
        }
        freq.iter().map(|c| c / k as f64).collect()
    }

    proptest! {
        #[test]
        fn matches_full_sort(
            points in prop::collection::vec((-3i32..=3, -3i32..=3, 0usize..3), 1..=50),
            qx in -3i32..=3,
            qy in -3i32..=3,
            kfrac in 0.0f64..1.0,
        ) {
            // Integer grids force many exact distance ties.
            let features = points.iter().map(|&(a, b, _)| vec![a as f64, b as f64]).collect();
            let labels = points.iter().map(|&(_, _, l)| l).collect();
            let data = AgentDataset::new(features, labels, 3, "p").unwrap();
            let k = 1 + ((data.len() as f64 * kfrac) as usize).min(data.len() - 1);
            let x = [qx as f64, qy as f64];
            let got = knn_predict(&data, &FeatureMap::identity(2), &x, k).unwrap();
            prop_assert_eq!(got.values(), &full_sort_oracle(&data, &x, k)[..]);
        }
    }
}
