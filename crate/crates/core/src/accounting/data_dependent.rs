use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::softplus;

use super::conversion::{check_delta, minimize_conversion};
use super::{alpha_grid, scheme_curve, MechanismParams, PrivacyReport, VotingScheme};

/// Noiseless margin of one answered query: the gap between the two largest
/// coordinates of the mean vote `(1/N) Σ fᵢ(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginRecord {
    pub query_id: u64,
    pub gamma: f64,
}

/// Queries whose failure probability `q` is at or above this threshold are
/// accounted with the worst-case curve only.
const MAX_FAILURE_PROBABILITY: f64 = 0.5;

fn check_margin_args(num_agents: usize, sigma: f64, gamma: f64, num_classes: usize) -> Result<()> {
    if num_agents < 1 {
        return Err(Error::param("num_agents must be at least 1"));
    }
    if sigma.is_nan() || sigma <= 0.0 {
        return Err(Error::param(format!("sigma must be positive, got {sigma}")));
    }
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::param(format!("margin must lie in [0,1], got {gamma}")));
    }
    if num_classes < 2 {
        return Err(Error::param("num_classes must be at least 2"));
    }
    Ok(())
}

/// `N²γ² / (8σ²)`, the Gaussian tail exponent at half the margin.
fn tail_exponent(num_agents: usize, sigma: f64, gamma: f64) -> f64 {
    let n = num_agents as f64;
    n * n * gamma * gamma / (8.0 * sigma * sigma)
}

/// Lower bound on the probability that the noisy argmax equals the
/// noiseless plurality: `max(0, 1 − C·exp(−N²γ²/(8σ²)))`.
pub fn match_probability_bound(
    num_agents: usize,
    sigma: f64,
    gamma: f64,
    num_classes: usize,
) -> Result<f64> {
    check_margin_args(num_agents, sigma, gamma, num_classes)?;
    let k = tail_exponent(num_agents, sigma, gamma);
    Ok((1.0 - num_classes as f64 * (-k).exp()).max(0.0))
}

/// Rényi divergence bound for a mechanism that is `(2α, ε)`-RDP and returns
/// one fixed output with probability at least `1 − q`:
///
/// `−ln(1−q) + ln(1 + q^{1/2} (1−q)^{α−1} e^{(α−1)ε}) / (α−1)`.
pub fn amplified_rdp(q: f64, eps_at_2alpha: f64, alpha: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&q) {
        return Err(Error::param(format!("q must lie in [0,1), got {q}")));
    }
    if alpha.is_nan() || alpha <= 1.0 {
        return Err(Error::param(format!("alpha must exceed 1, got {alpha}")));
    }
    if eps_at_2alpha.is_nan() || eps_at_2alpha < 0.0 {
        return Err(Error::param("epsilon must be non-negative"));
    }
    let am1 = alpha - 1.0;
    // log of q^{1/2} (1-q)^{α-1} e^{(α-1)ε}
    let log_inner = 0.5 * q.ln() + am1 * (-q).ln_1p() + am1 * eps_at_2alpha;
    Ok(-(-q).ln_1p() + softplus(log_inner) / am1)
}

/// Data-dependent RDP of releasing the noisy argmax of one query with
/// margin `gamma`:
///
/// `2C e^{−K} + ln(1 + exp((2α−1)α s/(2σ²) − K + ln(C)/2)) / (α−1)`
/// with `K = N²γ²/(8σ²)`. `s` is 1 for agent-level AE and `2/k` for
/// instance-level kNN.
pub fn data_dependent_rdp(
    num_agents: usize,
    sigma: f64,
    gamma: f64,
    num_classes: usize,
    alpha: f64,
    s: f64,
) -> Result<f64> {
    check_margin_args(num_agents, sigma, gamma, num_classes)?;
    if alpha.is_nan() || alpha <= 1.0 {
        return Err(Error::param(format!("alpha must exceed 1, got {alpha}")));
    }
    if s.is_nan() || s <= 0.0 {
        return Err(Error::param(format!("s must be positive, got {s}")));
    }
    Ok(data_dependent_unchecked(
        tail_exponent(num_agents, sigma, gamma),
        sigma,
        num_classes as f64,
        alpha,
        s,
    ))
}

fn data_dependent_unchecked(k: f64, sigma: f64, c: f64, alpha: f64, s: f64) -> f64 {
    let exponent = (2.0 * alpha - 1.0) * alpha * s / (2.0 * sigma * sigma) - k + 0.5 * c.ln();
    2.0 * c * (-k).exp() + softplus(exponent) / (alpha - 1.0)
}

/// Per-query curve `α ↦ min(data-dependent, worst-case)`, made
/// non-decreasing on the search grid by taking the minimum over all grid
/// orders at or above `α` (Rényi divergence is non-decreasing in the order,
/// so a bound at a higher order also bounds a lower one).
struct QueryCurve {
    k: f64,
    sigma: f64,
    c: f64,
    s: f64,
    grid: Vec<f64>,
    suffix_min: Vec<f64>,
}

impl QueryCurve {
    fn new(k: f64, sigma: f64, c: f64, s: f64, grid: &[f64]) -> Self {
        let mut q = QueryCurve {
            k,
            sigma,
            c,
            s,
            grid: grid.to_vec(),
            suffix_min: Vec::new(),
        };
        let mut suffix: Vec<f64> = grid.iter().map(|&a| q.pointwise(a)).collect();
        for i in (0..suffix.len().saturating_sub(1)).rev() {
            suffix[i] = suffix[i].min(suffix[i + 1]);
        }
        q.suffix_min = suffix;
        q
    }

    fn pointwise(&self, alpha: f64) -> f64 {
        let worst = alpha * self.s / (2.0 * self.sigma * self.sigma);
        data_dependent_unchecked(self.k, self.sigma, self.c, alpha, self.s).min(worst)
    }

    fn eval(&self, alpha: f64) -> f64 {
        let here = self.pointwise(alpha);
        match self.grid.iter().position(|&g| g >= alpha) {
            Some(i) => here.min(self.suffix_min[i]),
            None => here,
        }
    }
}

/// Compose per-query data-dependent bounds over the logged margins and
/// convert once. The report carries both the worst-case `ε` and the
/// data-dependent `ε*`, with `ε* ≤ ε`.
pub fn accumulate_data_dependent(
    margins: &[MarginRecord],
    params: &MechanismParams,
    scheme: VotingScheme,
    delta: f64,
) -> Result<PrivacyReport> {
    check_delta(delta)?;
    params.validate()?;
    if margins.len() as u64 != params.queries {
        return Err(Error::Consistency(format!(
            "margin log has {} records but {} queries were answered",
            margins.len(),
            params.queries
        )));
    }
    let worst_case = scheme_curve(params, scheme)?;
    let mut report = PrivacyReport::from_curve(&worst_case, delta)?;

    let s = params.squared_sensitivity(scheme)?;
    let c = params.num_classes as f64;
    let per_query_worst = s / (2.0 * params.sigma * params.sigma);

    // Group queries by margin; identical margins give identical curves.
    let mut fallback = 0u64;
    let mut groups: BTreeMap<u64, (f64, u64)> = BTreeMap::new();
    for m in margins {
        check_margin_args(params.num_agents, params.sigma, m.gamma, params.num_classes)?;
        let k = tail_exponent(params.num_agents, params.sigma, m.gamma);
        if c * (-k).exp() < MAX_FAILURE_PROBABILITY {
            groups.entry(k.to_bits()).or_insert((k, 0)).1 += 1;
        } else {
            fallback += 1;
        }
    }

    if groups.is_empty() {
        report.epsilon_data_dependent = Some(report.epsilon);
        return Ok(report);
    }

    let grid = alpha_grid();
    let curves: Vec<(QueryCurve, f64)> = groups
        .values()
        .map(|&(k, count)| (QueryCurve::new(k, params.sigma, c, s, &grid), count as f64))
        .collect();
    let fallback = fallback as f64;
    let log_inv_delta = (1.0 / delta).ln();
    let objective = |alpha: f64| {
        let total = curves
            .iter()
            .fold(fallback * alpha * per_query_worst, |acc, (q, n)| {
                acc + n * q.eval(alpha)
            });
        total + log_inv_delta / (alpha - 1.0)
    };
    let conv = minimize_conversion(objective, &[report.alpha_star]);
    if conv.at_cap {
        report
            .warnings
            .push("data-dependent alpha search reached the upper cap".to_string());
    }
    report.epsilon_data_dependent = Some(conv.epsilon.min(report.epsilon));
    Ok(report)
}
