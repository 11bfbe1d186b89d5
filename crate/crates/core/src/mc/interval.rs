//! Exact binomial (Clopper–Pearson) intervals.

use statrs::function::beta::beta_reg;

/// Smallest x in [0, 1] with `I_x(a, b) ≥ level` (bisection; `I_x` is
/// increasing in x).
fn beta_quantile(a: f64, b: f64, level: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if beta_reg(a, b, mid) < level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Two-sided Clopper–Pearson interval for `k` successes in `n` trials at
/// the given confidence. The lower bound is 0 exactly when `k = 0` and the
/// upper bound is 1 exactly when `k = n`.
pub fn clopper_pearson(k: u64, n: u64, confidence: f64) -> (f64, f64) {
    assert!(n > 0 && k <= n, "need 0 ≤ k ≤ n, n > 0");
    assert!(confidence > 0.0 && confidence < 1.0, "confidence must lie in (0, 1)");
    let alpha = 1.0 - confidence;
    let (kf, nf) = (k as f64, n as f64);
    let lower = if k == 0 {
        0.0
    } else {
        beta_quantile(kf, nf - kf + 1.0, alpha / 2.0)
    };
    let upper = if k == n {
        1.0
    } else {
        beta_quantile(kf + 1.0, nf - kf, 1.0 - alpha / 2.0)
    };
    (lower, upper)
}

/// Trials needed so that a probability-`p` event is missed by all of them
/// with probability at most `1 − confidence`.
pub fn suggest_trials(p: f64, confidence: f64) -> Option<u64> {
    if !(p > 0.0 && p <= 1.0) || !(confidence > 0.0 && confidence < 1.0) {
        return None;
    }
    if p == 1.0 {
        return Some(1);
    }
    let n = (1.0 - confidence).ln() / (-p).ln_1p();
    Some(n.ceil().max(1.0) as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Binomial CDF by direct summation of pmf terms in log space.
    fn binom_cdf(k: u64, n: u64, p: f64) -> f64 {
        use statrs::function::gamma::ln_gamma;
        (0..=k)
            .map(|i| {
                let (i, nf) = (i as f64, n as f64);
                (ln_gamma(nf + 1.0) - ln_gamma(i + 1.0) - ln_gamma(nf - i + 1.0)
                    + i * p.ln()
                    + (nf - i) * (-p).ln_1p())
                .exp()
            })
            .sum()
    }

    #[test]
    fn known_values() {
        // zero successes: upper = 1 − (α/2)^{1/n}
        let (lo, hi) = clopper_pearson(0, 100, 0.95);
        assert_eq!(lo, 0.0);
        assert!((hi - (1.0 - 0.025f64.powf(0.01))).abs() < 1e-12);
        let (lo, hi) = clopper_pearson(100, 100, 0.95);
        assert_eq!(hi, 1.0);
        assert!((lo - 0.025f64.powf(0.01)).abs() < 1e-12);
        // tabulated: k = 5, n = 20, 95% → (0.0866, 0.4910)
        let (lo, hi) = clopper_pearson(5, 20, 0.95);
        assert!((lo - 0.08657).abs() < 1e-4 && (hi - 0.49104).abs() < 1e-4);
    }

    #[test]
    fn suggestion() {
        let n = suggest_trials(1e-3, 0.99).unwrap();
        assert!((1.0f64 - 1e-3).powf(n as f64) <= 0.01);
        assert!((1.0f64 - 1e-3).powf(n as f64 - 1.0) > 0.01);
    }

    proptest! {
        #[test]
        fn interval_is_exact(n in 1u64..300, frac in 0.0f64..=1.0, conf in 0.5f64..0.999) {
            let k = ((n as f64) * frac).floor() as u64;
            let (lo, hi) = clopper_pearson(k, n, conf);
            let a2 = (1.0 - conf) / 2.0;
            prop_assert!(lo <= k as f64 / n as f64 && k as f64 / n as f64 <= hi);
            prop_assert_eq!(lo == 0.0, k == 0);
            if k > 0 {
                // P(X ≥ k | lo) = α/2
                prop_assert!((1.0 - binom_cdf(k - 1, n, lo) - a2).abs() < 1e-7);
            }
            if k < n {
                // P(X ≤ k | hi) = α/2
                prop_assert!((binom_cdf(k, n, hi) - a2).abs() < 1e-7);
            }
        }
    }
}
