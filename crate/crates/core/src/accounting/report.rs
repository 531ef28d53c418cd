use serde::{Deserialize, Serialize};

use crate::error::Result;

use super::{alpha_grid, rdp_to_dp, Conversion, RdpCurve};

/// Final `(ε, δ)` figures of a run, serializable as the audit record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivacyReport {
    pub epsilon: f64,
    pub delta: f64,
    pub alpha_star: f64,
    /// Present only when per-query margins were logged.
    pub epsilon_data_dependent: Option<f64>,
    /// `[α, ε(α)]` pairs of the worst-case curve on the search grid.
    pub rdp_at_orders: Vec<(f64, f64)>,
    pub warnings: Vec<String>,
}

impl PrivacyReport {
    pub(crate) fn new(curve: &RdpCurve, delta: f64, conv: Conversion) -> Self {
        let mut warnings = Vec::new();
        if conv.at_cap {
            warnings.push(format!(
                "alpha search reached the upper cap ({}); epsilon may be unconverged",
                super::ALPHA_MAX
            ));
        }
        PrivacyReport {
            epsilon: conv.epsilon,
            delta,
            alpha_star: conv.alpha_star,
            epsilon_data_dependent: None,
            rdp_at_orders: alpha_grid().into_iter().map(|a| (a, curve.eval(a))).collect(),
            warnings,
        }
    }

    /// Worst-case report for a curve.
    pub fn from_curve(curve: &RdpCurve, delta: f64) -> Result<Self> {
        let conv = rdp_to_dp(curve, delta)?;
        Ok(PrivacyReport::new(curve, delta, conv))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("privacy report is always serializable")
    }
}
