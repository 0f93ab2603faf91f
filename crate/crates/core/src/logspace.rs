//! Log-space helpers.

/// `ln(sum(exp(x)))`, shifted by the maximum. Empty input and all `-inf`
/// input give `-inf`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max.is_infinite() {
        return max;
    }
    max + values.iter().map(|&x| (x - max).exp()).sum::<f64>().ln()
}

/// `ln(p)` that maps `0` to `-inf` without a domain complaint.
pub(crate) fn ln_prob(p: f64) -> f64 {
    if p <= 0.0 {
        f64::NEG_INFINITY
    } else {
        p.ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_naive_sum() {
        let xs = [-1.0, -2.0, -3.0];
        let naive = xs.iter().map(|x: &f64| x.exp()).sum::<f64>().ln();
        assert!((log_sum_exp(&xs) - naive).abs() < 1e-15);
    }

    #[test]
    fn survives_underflow() {
        // exp(-1000) underflows to zero; the shifted form does not.
        let xs = [-1000.0, -1000.0];
        assert!((log_sum_exp(&xs) - (-1000.0 + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn degenerate_inputs() {
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY; 3]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[0.0, f64::NEG_INFINITY]), 0.0);
    }
}
