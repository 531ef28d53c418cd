use crate::error::{Error, Result};

use super::RdpCurve;

/// Largest order the search considers.
pub const ALPHA_MAX: f64 = 1025.0;

const GRID_STEPS: u32 = 15;
const GOLDEN_ITERS: usize = 200;

/// Coarse search grid `{1 + 2^j / 16 : j = 0..=14}`.
pub fn alpha_grid() -> Vec<f64> {
    (0..GRID_STEPS)
        .map(|j| 1.0 + f64::from(1u32 << j) / 16.0)
        .collect()
}

/// Result of converting an RDP curve to `(ε, δ)`-DP.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conversion {
    pub epsilon: f64,
    pub alpha_star: f64,
    /// The coarse minimum sat on [`ALPHA_MAX`]; the true optimum may lie
    /// beyond the searched range.
    pub at_cap: bool,
}

pub(crate) fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::param(format!("delta out of range (0,1): {delta}")))
    }
}

/// `min_{1 < α ≤ ALPHA_MAX} ε(α) + ln(1/δ)/(α − 1)`.
///
/// The coarse grid locates a bracket around the best grid order, then
/// golden-section search refines inside it. The returned value is never
/// larger than the best grid value.
pub fn rdp_to_dp(curve: &RdpCurve, delta: f64) -> Result<Conversion> {
    check_delta(delta)?;
    let log_inv_delta = (1.0 / delta).ln();
    Ok(minimize_conversion(
        |alpha| curve.eval(alpha) + log_inv_delta / (alpha - 1.0),
        &[],
    ))
}

/// Shared search. `extra` holds additional candidate orders that are
/// evaluated alongside the grid.
pub(crate) fn minimize_conversion<F>(objective: F, extra: &[f64]) -> Conversion
where
    F: Fn(f64) -> f64,
{
    let grid = alpha_grid();
    let values: Vec<f64> = grid.iter().map(|&a| objective(a)).collect();
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    let at_cap = best == grid.len() - 1;

    let lo = if best == 0 { 1.0 + 1e-9 } else { grid[best - 1] };
    let hi = if at_cap { ALPHA_MAX } else { grid[best + 1] };
    let (refined_alpha, refined_value) = golden_section(&objective, lo, hi);

    let mut alpha_star = grid[best];
    let mut epsilon = values[best];
    let candidates = std::iter::once((refined_alpha, refined_value)).chain(
        extra
            .iter()
            .filter(|a| **a > 1.0 && **a <= ALPHA_MAX)
            .map(|&a| (a, objective(a))),
    );
    for (a, v) in candidates {
        if v < epsilon {
            epsilon = v;
            alpha_star = a;
        }
    }
    Conversion {
        epsilon,
        alpha_star,
        at_cap,
    }
}

fn golden_section<F>(f: &F, mut lo: f64, mut hi: f64) -> (f64, f64)
where
    F: Fn(f64) -> f64,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..GOLDEN_ITERS {
        if hi - lo <= 1e-12 * hi {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}
