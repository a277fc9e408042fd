//! Log-space helpers.

/// `log(sum(exp(xs)))` with max-shift. Returns `-inf` for an empty slice or
/// when every entry is `-inf`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = xs.iter().map(|&x| (x - max).exp()).sum();
    max + sum.ln()
}

/// Normalizes log-weights in place into probabilities and returns the
/// log-normalizer.
pub fn normalize_log_weights(xs: &mut [f64]) -> f64 {
    let lse = log_sum_exp(xs);
    for x in xs.iter_mut() {
        *x = (*x - lse).exp();
    }
    lse
}

/// Index of the first maximum. NaN entries never win.
pub fn argmax(xs: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &x) in xs.iter().enumerate() {
        match best {
            Some((_, b)) if !(x > b) => {}
            _ if x.is_nan() => {}
            _ => best = Some((i, x)),
        }
    }
    best.map(|(i, _)| i)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lse_matches_naive() {
        let xs = [0.1, -2.0, 3.5];
        let naive = xs.iter().map(|x: &f64| x.exp()).sum::<f64>().ln();
        assert!((log_sum_exp(&xs) - naive).abs() < 1e-12);
    }

    #[test]
    fn lse_survives_large_magnitudes() {
        let xs = [-10_000.0, -10_001.0];
        let expected = -10_000.0 + (1.0 + (-1.0f64).exp()).ln();
        assert!((log_sum_exp(&xs) - expected).abs() < 1e-9);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
    }

    #[test]
    fn argmax_prefers_first_on_ties() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), Some(1));
        assert_eq!(argmax(&[f64::NAN, 0.0]), Some(1));
        assert_eq!(argmax(&[]), None);
    }

    #[test]
    fn normalize_gives_distribution() {
        let mut xs = [-1000.0, -1000.0 + 2.0f64.ln()];
        normalize_log_weights(&mut xs);
        assert!((xs[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((xs[1] - 2.0 / 3.0).abs() < 1e-12);
    }
}
