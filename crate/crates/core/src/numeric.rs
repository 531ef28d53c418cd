//! Small numeric helpers shared across modules.

/// `ln(1 + e^x)` without overflow for large `x` or underflow to zero for
/// very negative `x`.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Pairwise (cascade) summation of a slice. Deterministic for a fixed order.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 8;
    if values.len() <= BLOCK {
        return values.iter().fold(0.0, |acc, v| acc + v);
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Coordinate-wise pairwise sum of equally sized rows, in row order.
pub fn pairwise_sum_rows(rows: &[&[f64]]) -> Vec<f64> {
    let Some(first) = rows.first() else {
        return Vec::new();
    };
    let mut column = vec![0.0; rows.len()];
    (0..first.len())
        .map(|c| {
            for (slot, row) in column.iter_mut().zip(rows) {
                *slot = row[c];
            }
            pairwise_sum(&column)
        })
        .collect()
}

/// Index of the largest element; ties go to the lowest index. NaN never wins.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] || values[best].is_nan() && !v.is_nan() {
            best = i;
        }
    }
    best
}

/// Difference between the largest and second-largest entries.
/// Returns 0 for slices shorter than two.
pub fn top_two_gap(values: &[f64]) -> f64 {
    let mut first = f64::NEG_INFINITY;
    let mut second = f64::NEG_INFINITY;
    for &v in values {
        if v > first {
            second = first;
            first = v;
        } else if v > second {
            second = v;
        }
    }
    if second.is_finite() {
        first - second
    } else {
        0.0
    }
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn l2_distance_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softplus_matches_naive_in_safe_range() {
        for x in [-5.0, -1.0, 0.0, 0.5, 3.0, 20.0] {
            let naive = (1.0 + f64::exp(x)).ln();
            assert!((softplus(x) - naive).abs() <= 1e-13 * naive);
        }
        let tiny = f64::exp(-40.0);
        assert!((softplus(-40.0) - tiny).abs() <= 1e-15 * tiny);
        assert_eq!(softplus(1000.0), 1000.0);
        assert!(softplus(-800.0) >= 0.0);
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax(&[0.5, 0.5]), 0);
        assert_eq!(argmax(&[0.2, 0.5, 0.3]), 1);
        assert_eq!(argmax(&[0.1, 0.7, 0.7]), 1);
    }

    #[test]
    fn gap_of_simplex_vector() {
        assert!((top_two_gap(&[0.6, 0.2, 0.2]) - 0.4).abs() < 1e-15);
        assert_eq!(top_two_gap(&[0.5, 0.5]), 0.0);
        assert_eq!(top_two_gap(&[1.0]), 0.0);
    }

    #[test]
    fn pairwise_sum_is_exact_on_integers() {
        let v: Vec<f64> = (1..=1000).map(f64::from).collect();
        assert_eq!(pairwise_sum(&v), 500_500.0);
        let rows: Vec<&[f64]> = vec![&[1.0, 2.0], &[3.0, 4.0], &[5.0, 6.0]];
        assert_eq!(pairwise_sum_rows(&rows), vec![9.0, 12.0]);
    }
}
