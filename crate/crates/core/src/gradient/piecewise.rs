use crate::error::{Error, Result};
use crate::numeric::{l2_distance_sq, l2_norm, pairwise_sum_rows};

use super::{local_delta, LinearObjective, MaxAffine, Objective};

/// Per-agent max-affine losses `fᵢ(θ) = maxⱼ ⟨aᵢⱼ, θ⟩ + bᵢⱼ` on a bounded domain.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinearObjective {
    agents: Vec<MaxAffine>,
    lipschitz: f64,
    domain_bound: f64,
    interior_radius: f64,
}

impl PiecewiseLinearObjective {
    /// `G` is derived as the largest coefficient norm over all pieces.
    pub fn new(agents: Vec<MaxAffine>, domain_bound: f64, interior_radius: f64) -> Result<Self> {
        let dim = agents.first().map_or(0, Objective::dim);
        if agents.is_empty() || agents.iter().any(|a| a.pieces.is_empty()) {
            return Err(Error::param("every agent needs at least one piece"));
        }
        if let Some(bad) = agents.iter().flat_map(|a| &a.pieces).find(|p| p.coefficients.len() != dim) {
            return Err(Error::Dimension {
                expected: dim,
                got: bad.coefficients.len(),
            });
        }
        if !(domain_bound > 0.0 && interior_radius > 0.0) {
            return Err(Error::param("domain bound and interior radius must be positive"));
        }
        let lipschitz = agents
            .iter()
            .flat_map(|a| &a.pieces)
            .map(|p| l2_norm(&p.coefficients))
            .fold(0.0, f64::max);
        Ok(PiecewiseLinearObjective {
            agents,
            lipschitz,
            domain_bound,
            interior_radius,
        })
    }

    pub fn agents(&self) -> &[MaxAffine] {
        &self.agents
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn domain_bound(&self) -> f64 {
        self.domain_bound
    }

    pub fn interior_radius(&self) -> f64 {
        self.interior_radius
    }

    /// `∇F(θ) = (1/N) Σᵢ ∇fᵢ(θ)`.
    pub fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        average_gradient(&self.agents, theta)
    }

    /// Distance from `theta` to the nearest boundary of its linear region
    /// across all agents; 0 if some agent has two tied active pieces.
    pub fn boundary_distance(&self, theta: &[f64]) -> f64 {
        let mut dist = f64::INFINITY;
        for agent in &self.agents {
            let active = agent.active_piece(theta);
            let top: &LinearObjective = &agent.pieces[active];
            let top_value = top.loss(theta);
            for (j, piece) in agent.pieces.iter().enumerate() {
                if j == active {
                    continue;
                }
                let gap = top_value - piece.loss(theta);
                let normal = l2_distance_sq(&top.coefficients, &piece.coefficients).sqrt();
                if normal == 0.0 {
                    // Parallel pieces never trade places.
                    if gap == 0.0 {
                        dist = 0.0;
                    }
                    continue;
                }
                dist = dist.min(gap / normal);
            }
        }
        dist
    }
}

fn average_gradient<O: Objective>(agents: &[O], theta: &[f64]) -> Vec<f64> {
    let grads: Vec<Vec<f64>> = agents.iter().map(|a| a.gradient(theta)).collect();
    let rows: Vec<&[f64]> = grads.iter().map(Vec::as_slice).collect();
    let n = agents.len() as f64;
    pairwise_sum_rows(&rows).into_iter().map(|v| v / n).collect()
}

fn fedavg_update<O: Objective>(agents: &[O], theta: &[f64], local_iters: usize, eta: f64) -> Vec<f64> {
    let deltas: Vec<Vec<f64>> = agents
        .iter()
        .map(|a| local_delta(a, theta, local_iters, eta, None))
        .collect();
    let rows: Vec<&[f64]> = deltas.iter().map(Vec::as_slice).collect();
    let n = agents.len() as f64;
    pairwise_sum_rows(&rows).into_iter().map(|v| v / n).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceCheck {
    /// Full-participation, noiseless FedAvg update `θ⁺ − θ`.
    pub fedavg_update: Vec<f64>,
    /// `−Eη∇F(θ)`.
    pub subgradient_step: Vec<f64>,
    pub max_deviation: f64,
}

/// Compare one FedAvg outer step to `E` merged gradient steps in the
/// interior regime: `θ` at least `ν` from every region boundary, inside the
/// domain, and `E < ν/(ηG)`.
pub fn piecewise_equivalence_check(
    objective: &PiecewiseLinearObjective,
    theta: &[f64],
    local_iters: usize,
    eta: f64,
) -> Result<EquivalenceCheck> {
    if eta.is_nan() || eta <= 0.0 || local_iters == 0 {
        return Err(Error::param("need eta > 0 and at least one local iteration"));
    }
    let nu = objective.interior_radius;
    if l2_norm(theta) > objective.domain_bound {
        return Err(Error::usage("theta lies outside the domain"));
    }
    if objective.boundary_distance(theta) < nu {
        return Err(Error::usage(format!(
            "theta is closer than nu = {nu} to a region boundary"
        )));
    }
    if local_iters as f64 * eta * objective.lipschitz >= nu {
        return Err(Error::usage("E·η·G must be below nu"));
    }
    let fedavg_update = fedavg_update(&objective.agents, theta, local_iters, eta);
    let scale = local_iters as f64 * eta;
    let subgradient_step: Vec<f64> = objective.gradient(theta).into_iter().map(|g| -scale * g).collect();
    let max_deviation = l2_distance_sq(&fedavg_update, &subgradient_step).sqrt();
    Ok(EquivalenceCheck {
        fedavg_update,
        subgradient_step,
        max_deviation,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzCheck {
    /// Effective direction `g` with `θ⁺ = θ − Eηg`.
    pub direction: Vec<f64>,
    pub gradient: Vec<f64>,
    /// `‖g − ∇F(θ)‖₂`.
    pub gradient_gap: f64,
    /// `‖(θ⁺ − θ) + Eη∇F(θ)‖₂`.
    pub update_gap: f64,
    /// `EηG`.
    pub bound: f64,
}

/// The general-regime comparison for arbitrary local losses with Lipschitz
/// constant `lipschitz`.
pub fn lipschitz_equivalence_check<O: Objective>(
    agents: &[O],
    theta: &[f64],
    local_iters: usize,
    eta: f64,
    lipschitz: f64,
) -> Result<LipschitzCheck> {
    if agents.is_empty() {
        return Err(Error::usage("need at least one agent"));
    }
    if eta.is_nan() || eta <= 0.0 || local_iters == 0 {
        return Err(Error::param("need eta > 0 and at least one local iteration"));
    }
    let update = fedavg_update(agents, theta, local_iters, eta);
    let scale = local_iters as f64 * eta;
    let direction: Vec<f64> = update.iter().map(|u| -u / scale).collect();
    let gradient = average_gradient(agents, theta);
    let gradient_gap = l2_distance_sq(&direction, &gradient).sqrt();
    Ok(LipschitzCheck {
        update_gap: scale * gradient_gap,
        bound: scale * lipschitz,
        direction,
        gradient,
        gradient_gap,
    })
}
