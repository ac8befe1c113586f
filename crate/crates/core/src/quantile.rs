//! Empirical quantiles by linear interpolation between order statistics,
//! with plotting position `(i - 1) / (n - 1)`.

/// Quantile of an ascending-sorted, non-empty slice at probability `p` in `[0, 1]`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    assert!((0.0..=1.0).contains(&p), "probability {p} outside [0, 1]");
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    if lo + 1 >= n {
        return sorted[n - 1];
    }
    let frac = h - lo as f64;
    let (a, b) = (sorted[lo], sorted[lo + 1]);
    // clamping keeps the result monotone in `p` despite rounding
    (a + frac * (b - a)).clamp(a, b)
}

/// Quantile of an unsorted sample.
pub fn quantile(sample: &[f64], p: f64) -> f64 {
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    quantile_sorted(&sorted, p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolates_between_order_statistics() {
        let row: Vec<f64> = (1..=100).map(f64::from).collect();
        assert!((quantile(&row, 0.8) - 80.2).abs() < 1e-12);
        assert_eq!(quantile(&row, 0.0), 1.0);
        assert_eq!(quantile(&row, 1.0), 100.0);
        assert_eq!(quantile(&row, 0.5), 50.5);
        assert_eq!(quantile(&[4.0], 0.3), 4.0);
    }

    #[test]
    fn extreme_level_gives_maximum() {
        let g = 50;
        let row: Vec<f64> = (0..g).map(|i| ((i * 37) % 50) as f64).collect();
        let p = (g - 1) as f64 / g as f64;
        // (G-1)p = (G-1)^2/G lies in the last interval; at p = 1 it is the max
        assert!(quantile(&row, p) <= 49.0);
        assert_eq!(quantile(&row, 1.0), 49.0);
    }

    proptest::proptest! {
        #[test]
        fn monotone_in_probability(mut xs in proptest::collection::vec(-1e6f64..1e6, 1..50), a in 0.0f64..1.0, b in 0.0f64..1.0) {
            xs.sort_by(f64::total_cmp);
            let (p, q) = if a <= b { (a, b) } else { (b, a) };
            proptest::prop_assert!(quantile_sorted(&xs, p) <= quantile_sorted(&xs, q));
        }
    }
}
