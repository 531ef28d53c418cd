use crate::learners::{softmax_loss_grad, AgentDataset};
use crate::numeric::{dot, l2_distance_sq};

/// A differentiable (almost everywhere) local loss `fᵢ(θ)`.
pub trait Objective: Send + Sync {
    fn dim(&self) -> usize;
    fn loss(&self, theta: &[f64]) -> f64;
    fn gradient(&self, theta: &[f64]) -> Vec<f64>;

    /// Number of examples available for minibatching; 1 for closed-form losses.
    fn num_examples(&self) -> usize {
        1
    }

    /// Gradient on a subset of examples. Closed-form losses ignore `rows`.
    fn batch_gradient(&self, theta: &[f64], rows: &[usize]) -> Vec<f64> {
        let _ = rows;
        self.gradient(theta)
    }
}

/// `⟨a, θ⟩ + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearObjective {
    pub coefficients: Vec<f64>,
    pub offset: f64,
}

impl Objective for LinearObjective {
    fn dim(&self) -> usize {
        self.coefficients.len()
    }

    fn loss(&self, theta: &[f64]) -> f64 {
        dot(&self.coefficients, theta) + self.offset
    }

    fn gradient(&self, _theta: &[f64]) -> Vec<f64> {
        self.coefficients.clone()
    }
}

/// `maxⱼ ⟨aⱼ, θ⟩ + bⱼ`; the gradient is that of the active piece, lowest
/// index on ties.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxAffine {
    pub pieces: Vec<LinearObjective>,
}

impl MaxAffine {
    pub fn active_piece(&self, theta: &[f64]) -> usize {
        let values: Vec<f64> = self.pieces.iter().map(|p| p.loss(theta)).collect();
        crate::numeric::argmax(&values)
    }
}

impl Objective for MaxAffine {
    fn dim(&self) -> usize {
        self.pieces.first().map_or(0, Objective::dim)
    }

    fn loss(&self, theta: &[f64]) -> f64 {
        self.pieces
            .iter()
            .map(|p| p.loss(theta))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        self.pieces[self.active_piece(theta)].coefficients.clone()
    }
}

/// `G·√(‖θ − c‖² + ρ²)`: smooth, `G`-Lipschitz, and `G/ρ`-smooth.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoHuber {
    pub center: Vec<f64>,
    pub lipschitz: f64,
    pub rho: f64,
}

impl Objective for PseudoHuber {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn loss(&self, theta: &[f64]) -> f64 {
        self.lipschitz * (l2_distance_sq(theta, &self.center) + self.rho * self.rho).sqrt()
    }

    fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let r = (l2_distance_sq(theta, &self.center) + self.rho * self.rho).sqrt();
        theta
            .iter()
            .zip(&self.center)
            .map(|(t, c)| self.lipschitz * (t - c) / r)
            .collect()
    }
}

/// Mean softmax cross-entropy of a logistic model over one agent's data,
/// with `θ` laid out as `C × (d+1)` (bias last).
#[derive(Debug, Clone)]
pub struct SoftmaxObjective {
    data: AgentDataset,
    l2: f64,
    all_rows: Vec<usize>,
}

impl SoftmaxObjective {
    pub fn new(data: AgentDataset, l2: f64) -> Self {
        let all_rows = (0..data.len()).collect();
        SoftmaxObjective { data, l2, all_rows }
    }

    pub fn data(&self) -> &AgentDataset {
        &self.data
    }
}

impl Objective for SoftmaxObjective {
    fn dim(&self) -> usize {
        self.data.num_classes() * (self.data.dim() + 1)
    }

    fn loss(&self, theta: &[f64]) -> f64 {
        softmax_loss_grad(
            theta,
            self.data.num_classes(),
            self.data.features(),
            self.data.labels(),
            &self.all_rows,
            self.l2,
        )
        .0
    }

    fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        self.batch_gradient(theta, &self.all_rows)
    }

    fn num_examples(&self) -> usize {
        self.data.len()
    }

    fn batch_gradient(&self, theta: &[f64], rows: &[usize]) -> Vec<f64> {
        softmax_loss_grad(
            theta,
            self.data.num_classes(),
            self.data.features(),
            self.data.labels(),
            rows,
            self.l2,
        )
        .1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn max_affine_picks_active_piece() {
        let f = MaxAffine {
            pieces: vec![
                LinearObjective {
                    coefficients: vec![1.0, 0.0],
                    offset: 0.0,
                },
                LinearObjective {
                    coefficients: vec![-1.0, 0.0],
                    offset: 0.0,
                },
            ],
        };
        assert_eq!(f.loss(&[-2.0, 5.0]), 2.0);
        assert_eq!(f.gradient(&[-2.0, 5.0]), vec![-1.0, 0.0]);
        assert_eq!(f.gradient(&[0.0, 0.0]), vec![1.0, 0.0]);
    }

    #[test]
    fn pseudo_huber_gradient_is_bounded() {
        let f = PseudoHuber {
            center: vec![1.0, -1.0],
            lipschitz: 2.0,
            rho: 0.5,
        };
        let g = f.gradient(&[100.0, 3.0]);
        assert!(crate::numeric::l2_norm(&g) <= 2.0);
        let h = 1e-6;
        let fd = (f.loss(&[100.0 + h, 3.0]) - f.loss(&[100.0 - h, 3.0])) / (2.0 * h);
        assert!((fd - g[0]).abs() < 1e-6);
    }
}
