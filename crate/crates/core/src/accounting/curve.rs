use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

type CurveFn = dyn Fn(f64) -> f64 + Send + Sync;

/// An RDP curve `α ↦ ε(α)` together with a human-readable provenance tag.
///
/// Every curve built by this module is non-negative and non-decreasing in `α`.
#[derive(Clone)]
pub struct RdpCurve {
    eval: Arc<CurveFn>,
    description: String,
}

impl RdpCurve {
    pub fn new<F>(description: impl Into<String>, f: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        RdpCurve {
            eval: Arc::new(f),
            description: description.into(),
        }
    }

    /// The curve of a mechanism that reveals nothing.
    pub fn zero() -> Self {
        RdpCurve::new("zero", |_| 0.0)
    }

    /// `α ↦ slope · α`.
    pub fn linear(slope: f64, description: impl Into<String>) -> Self {
        RdpCurve::new(description, move |alpha| slope * alpha)
    }

    pub fn eval(&self, alpha: f64) -> f64 {
        (self.eval)(alpha)
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    /// `times`-fold self-composition, i.e. `α ↦ times · ε(α)`.
    pub fn repeated(&self, times: u64) -> Self {
        let inner = Arc::clone(&self.eval);
        let n = times as f64;
        RdpCurve::new(format!("{times} x [{}]", self.description), move |alpha| {
            n * inner(alpha)
        })
    }
}

impl fmt::Debug for RdpCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RdpCurve")
            .field("description", &self.description)
            .finish()
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_nan() || v <= 0.0 {
        return Err(Error::param(format!("{name} must be positive, got {v}")));
    }
    Ok(())
}

/// Gaussian mechanism with L2 sensitivity `sensitivity` and noise scale
/// `sigma`: `α ↦ α s² / (2σ²)`. An infinite `sigma` gives the zero curve.
pub fn gaussian_rdp(sensitivity: f64, sigma: f64) -> Result<RdpCurve> {
    check_positive("sensitivity", sensitivity)?;
    check_positive("sigma", sigma)?;
    gaussian_rdp_squared(sensitivity * sensitivity, sigma)
}

/// Same as [`gaussian_rdp`] but parameterized by `s²`, which avoids a
/// square-root round trip for sensitivities like `√2`.
pub(crate) fn gaussian_rdp_squared(sensitivity_sq: f64, sigma: f64) -> Result<RdpCurve> {
    check_positive("squared sensitivity", sensitivity_sq)?;
    check_positive("sigma", sigma)?;
    let slope = sensitivity_sq / (2.0 * sigma * sigma);
    Ok(RdpCurve::linear(
        slope,
        format!("gaussian(s^2={sensitivity_sq}, sigma={sigma})"),
    ))
}

/// Pointwise sum of curves (RDP composition).
pub fn compose(curves: &[RdpCurve]) -> Result<RdpCurve> {
    if curves.is_empty() {
        return Err(Error::usage("cannot compose an empty list of curves"));
    }
    let parts: Vec<Arc<CurveFn>> = curves.iter().map(|c| Arc::clone(&c.eval)).collect();
    let description = curves
        .iter()
        .map(|c| c.description.as_str())
        .collect::<Vec<_>>()
        .join(" + ");
    Ok(RdpCurve::new(description, move |alpha| {
        parts.iter().fold(0.0, |acc, f| acc + f(alpha))
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VotingScheme {
    Ae,
    Knn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    /// Adjacent datasets differ by one whole agent.
    Agent,
    /// Adjacent datasets differ by one example of one agent.
    Instance,
}

/// Parameters of a voting mechanism run, as seen by the accountant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismParams {
    /// Standard deviation of the total noise added to the vote sum.
    pub sigma: f64,
    pub queries: u64,
    pub num_agents: usize,
    /// Neighbors per agent; only meaningful for kNN voting.
    pub k: Option<usize>,
    pub num_classes: usize,
    pub granularity: Granularity,
}

impl MechanismParams {
    pub fn validate(&self) -> Result<()> {
        check_positive("sigma", self.sigma)?;
        if self.num_agents < 1 {
            return Err(Error::param("num_agents must be at least 1"));
        }
        if self.num_classes < 2 {
            return Err(Error::param("num_classes must be at least 2"));
        }
        if self.k == Some(0) {
            return Err(Error::param("k must be at least 1"));
        }
        Ok(())
    }

    /// Squared L2 sensitivity of one query's vote sum under this scheme and
    /// granularity: 1 for any agent-level release, 2 for AE instance-level
    /// (one one-hot prediction moves), `2/k` for kNN instance-level.
    pub fn squared_sensitivity(&self, scheme: VotingScheme) -> Result<f64> {
        match (scheme, self.granularity) {
            (_, Granularity::Agent) => Ok(1.0),
            (VotingScheme::Ae, Granularity::Instance) => Ok(2.0),
            (VotingScheme::Knn, Granularity::Instance) => match self.k {
                Some(k) if k >= 1 => Ok(2.0 / k as f64),
                _ => Err(Error::param(
                    "k is required for instance-level kNN accounting",
                )),
            },
        }
    }

    /// L2 sensitivity `s` of the noiseless vote sum.
    pub fn sensitivity(&self, scheme: VotingScheme) -> Result<f64> {
        self.squared_sensitivity(scheme).map(f64::sqrt)
    }
}

/// Worst-case RDP curve of `queries` answered votes:
/// agent level `Qα/(2σ²)`, AE instance level `Qα/σ²`, kNN instance level
/// `Qα/(kσ²)`.
pub fn scheme_curve(params: &MechanismParams, scheme: VotingScheme) -> Result<RdpCurve> {
    params.validate()?;
    let s_sq = params.squared_sensitivity(scheme)?;
    let slope = params.queries as f64 * s_sq / (2.0 * params.sigma * params.sigma);
    Ok(RdpCurve::linear(
        slope,
        format!(
            "{scheme:?}/{:?}: Q={} sigma={} s^2={s_sq}",
            params.granularity, params.queries, params.sigma
        ),
    ))
}

/// Noise multiplier DP-FedAvg needs for `(ε, δ)` after `rounds` rounds:
/// `η E G √(2T ln(1.25/δ)) / (N ε)`.
#[allow(clippy::too_many_arguments)]
pub fn dp_fedavg_sigma(
    eta: f64,
    inner_iters: f64,
    lipschitz: f64,
    rounds: f64,
    delta: f64,
    num_agents: f64,
    epsilon: f64,
) -> Result<f64> {
    for (name, v) in [
        ("eta", eta),
        ("inner iterations", inner_iters),
        ("lipschitz constant", lipschitz),
        ("rounds", rounds),
        ("num_agents", num_agents),
        ("epsilon", epsilon),
    ] {
        check_positive(name, v)?;
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::param(format!("delta out of range (0,1): {delta}")));
    }
    Ok(eta * inner_iters * lipschitz * (2.0 * rounds * (1.25 / delta).ln()).sqrt()
        / (num_agents * epsilon))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(q: u64, sigma: f64, k: Option<usize>, g: Granularity) -> MechanismParams {
        MechanismParams {
            sigma,
            queries: q,
            num_agents: 200,
            k,
            num_classes: 10,
            granularity: g,
        }
    }

    #[test]
    fn gaussian_closed_form() {
        let c = gaussian_rdp(1.0, 25.0).unwrap();
        assert!((c.eval(2.0) - 0.0016).abs() < 1e-15);
        let c = gaussian_rdp(2f64.sqrt(), 25.0).unwrap();
        assert!((c.eval(1.0) - 0.0016).abs() < 1e-15);
        let c = gaussian_rdp(1.0, f64::INFINITY).unwrap();
        assert_eq!(c.eval(7.0), 0.0);
    }

    #[test]
    fn gaussian_rejects_bad_parameters() {
        assert!(gaussian_rdp(0.0, 1.0).is_err());
        assert!(gaussian_rdp(1.0, -1.0).is_err());
        assert!(gaussian_rdp(1.0, f64::NAN).is_err());
    }

    #[test]
    fn compose_examples() {
        let c = RdpCurve::linear(0.0016, "half");
        let two = compose(&[c.clone(), c.clone()]).unwrap();
        assert!((two.eval(3.0) - 0.0032 * 3.0).abs() < 1e-15);
        let g = gaussian_rdp(1.0, 25.0).unwrap();
        assert!((compose(&[g.clone(), g]).unwrap().eval(2.0) - 0.0032).abs() < 1e-15);

        let per_query = RdpCurve::linear(1.0 / 1250.0, "agent query");
        let many = compose(&vec![per_query; 500]).unwrap();
        for alpha in [1.5, 2.0, 10.0] {
            assert!((many.eval(alpha) - 0.4 * alpha).abs() < 1e-12);
        }

        let with_zero = compose(&[RdpCurve::zero(), c.clone()]).unwrap();
        assert_eq!(with_zero.eval(4.2), c.eval(4.2));

        assert!(matches!(compose(&[]), Err(Error::Usage(_))));
    }

    #[test]
    fn scheme_curves() {
        let ae_agent = scheme_curve(&params(500, 25.0, None, Granularity::Agent), VotingScheme::Ae)
            .unwrap();
        assert!((ae_agent.eval(1.0) - 0.4).abs() < 1e-15);
        let ae_inst =
            scheme_curve(&params(500, 25.0, None, Granularity::Instance), VotingScheme::Ae)
                .unwrap();
        assert!((ae_inst.eval(1.0) - 0.8).abs() < 1e-15);
        let knn_inst = scheme_curve(
            &params(100, 15.0, Some(10), Granularity::Instance),
            VotingScheme::Knn,
        )
        .unwrap();
        assert!((knn_inst.eval(1.0) - 100.0 / 2250.0).abs() < 1e-15);
        let knn_agent =
            scheme_curve(&params(500, 25.0, None, Granularity::Agent), VotingScheme::Knn).unwrap();
        assert!((knn_agent.eval(2.0) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn knn_instance_requires_k() {
        let err = scheme_curve(
            &params(100, 15.0, None, Granularity::Instance),
            VotingScheme::Knn,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Parameter(_)));
    }

    #[test]
    fn fedavg_sigma_examples() {
        let delta = 1.25 * (-0.5f64).exp();
        let s = dp_fedavg_sigma(1.0, 1.0, 1.0, 1.0, delta, 1.0, 1.0).unwrap();
        assert!((s - 1.0).abs() < 1e-14);

        let s = dp_fedavg_sigma(0.015, 20.0, 1.0, 100.0, 1e-3, 200.0, 4.0).unwrap();
        let expected = 0.3 * (200.0 * 1250f64.ln()).sqrt() / 800.0;
        assert!((s - expected).abs() < 1e-15);
        assert!((s - 0.014_162).abs() < 1e-5);

        let doubled = dp_fedavg_sigma(0.015, 20.0, 1.0, 100.0, 1e-3, 400.0, 4.0).unwrap();
        assert!((doubled - s / 2.0).abs() < 1e-16);

        assert!(dp_fedavg_sigma(0.015, 20.0, 1.0, 100.0, 1.0, 200.0, 4.0).is_err());
        assert!(dp_fedavg_sigma(0.0, 20.0, 1.0, 100.0, 0.1, 200.0, 4.0).is_err());
    }
}
