//! Exact hitting probabilities for drift-free additive compound Poisson noise.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::McError;
use crate::linalg;
use crate::measures::IntensityMeasure;

/// Largest number of multi-indices the oracle will enumerate.
pub const MAX_TERMS: f64 = 2e8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleValue {
    /// Sum over all jump-count vectors with total ≤ truncation.
    pub probability: f64,
    /// `P(N_total > truncation)`, bounding the omitted terms.
    pub tail_bound: f64,
    pub truncation: u32,
}

fn ln_poisson(k: u32, mean: f64) -> f64 {
    if mean == 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    k as f64 * mean.ln() - mean - ln_gamma(k as f64 + 1.0)
}

/// `P(Poisson(mean) > k)` summed term by term from `k + 1` until the terms
/// fall below 1e−300 or stop mattering.
pub fn poisson_tail(k: u32, mean: f64) -> f64 {
    if mean == 0.0 {
        return 0.0;
    }
    let mut total = 0.0;
    let mut j = k + 1;
    loop {
        let t = ln_poisson(j, mean).exp();
        total += t;
        if (j as f64 > mean && (t < 1e-300 || t < total * 1e-17)) || j == u32::MAX {
            break;
        }
        j += 1;
    }
    total
}

/// `P(L(T) ∈ B(center, radius))` for `L = Σⱼ aⱼ Nⱼ(T)` with independent
/// Poisson counts `Nⱼ(T) ~ Poisson(T·rateⱼ)`: the sum over count vectors
/// with total at most `truncation` of the product of Poisson weights, for
/// those vectors whose point `Σ mⱼ aⱼ` lies in the open ball.
pub fn exact_cp_hitting_oracle(
    measure: &IntensityMeasure,
    horizon: f64,
    center: &[f64],
    radius: f64,
    truncation: u32,
    accuracy: f64,
) -> Result<OracleValue, McError> {
    if !measure.is_atomic() {
        return Err(McError::NotApplicable("the oracle needs an atomic measure".into()));
    }
    if center.len() != measure.dim() {
        return Err(McError::NotApplicable("ball centre has the wrong dimension".into()));
    }
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(McError::NotApplicable(format!("bad horizon {horizon}")));
    }
    let atoms = measure.atoms();
    let means: Vec<f64> = atoms.iter().map(|(_, r)| r * horizon).collect();
    let total: f64 = means.iter().sum();
    let tail_bound = poisson_tail(truncation, total);
    if tail_bound > accuracy {
        return Err(McError::TruncationTooSmall {
            truncation,
            tail_bound,
            accuracy,
        });
    }
    let j = atoms.len();
    // C(K + J, J) count vectors
    let terms = (1..=j).fold(1.0f64, |acc, i| acc * (truncation as f64 + i as f64) / i as f64);
    if terms > MAX_TERMS {
        return Err(McError::NotApplicable(format!(
            "{terms:.3e} count vectors exceed the enumeration limit {MAX_TERMS:e}"
        )));
    }
    let ln_pmf: Vec<Vec<f64>> = means
        .iter()
        .map(|m| (0..=truncation).map(|k| ln_poisson(k, *m)).collect())
        .collect();
    let mut probability = 0.0;
    let mut counts = vec![0u32; j];
    recurse(
        atoms,
        &ln_pmf,
        center,
        radius,
        0,
        truncation,
        &mut counts,
        0.0,
        &mut probability,
    );
    Ok(OracleValue {
        probability,
        tail_bound,
        truncation,
    })
}

#[allow(clippy::too_many_arguments)]
fn recurse(
    atoms: &[(Vec<f64>, f64)],
    ln_pmf: &[Vec<f64>],
    center: &[f64],
    radius: f64,
    idx: usize,
    left: u32,
    counts: &mut Vec<u32>,
    ln_w: f64,
    acc: &mut f64,
) {
    if idx == atoms.len() {
        let mut point = vec![0.0; center.len()];
        for ((a, _), m) in atoms.iter().zip(counts.iter()) {
            for (p, v) in point.iter_mut().zip(a) {
                *p += *m as f64 * v;
            }
        }
        if linalg::dist(&point, center) < radius {
            *acc += ln_w.exp();
        }
        return;
    }
    for m in 0..=left {
        let w = ln_pmf[idx][m as usize];
        if w == f64::NEG_INFINITY {
            continue;
        }
        counts[idx] = m;
        recurse(atoms, ln_pmf, center, radius, idx + 1, left - m, counts, ln_w + w, acc);
    }
    counts[idx] = 0;
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cp() -> IntensityMeasure {
        IntensityMeasure::atomic_1d(&[(1.0, 1.0), (-std::f64::consts::SQRT_2, 1.0)]).unwrap()
    }

    #[test]
    fn zero_jump_term() {
        let v = exact_cp_hitting_oracle(&cp(), 1.0, &[0.0], 0.01, 40, 1e-12).unwrap();
        assert!(v.probability >= (-2.0f64).exp());
        // no other lattice point within 0.01 of 0 at low orders
        assert!((v.probability - (-2.0f64).exp()).abs() < 1e-3);
    }

    #[test]
    fn positive_cone_is_zero() {
        let m = IntensityMeasure::atomic_1d(&[(1.0, 1.0)]).unwrap();
        let v = exact_cp_hitting_oracle(&m, 1.0, &[-1.0], 0.4, 40, 1e-12).unwrap();
        assert_eq!(v.probability, 0.0);
    }

    #[test]
    fn dominant_pair() {
        let v = exact_cp_hitting_oracle(&cp(), 1.0, &[-0.7], 0.05, 40, 1e-12).unwrap();
        let lead = (-2.0f64).exp() / (120.0 * 24.0);
        assert!(v.probability > lead && v.probability < 1.2 * lead, "{v:?}");
        assert!(v.tail_bound <= 1e-12);
    }

    #[test]
    fn truncation_guard() {
        let e = exact_cp_hitting_oracle(&cp(), 1.0, &[0.0], 0.1, 5, 1e-12).unwrap_err();
        assert!(matches!(e, McError::TruncationTooSmall { .. }));
    }

    #[test]
    fn sums_to_one_over_a_huge_ball() {
        let v = exact_cp_hitting_oracle(&cp(), 1.5, &[0.0], 1e6, 60, 1e-12).unwrap();
        assert!((v.probability + v.tail_bound - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tail_matches_complement() {
        // P(N > 2) for mean 2 = 1 − 5e^{−2}
        assert!((poisson_tail(2, 2.0) - (1.0 - 5.0 * (-2.0f64).exp())).abs() < 1e-15);
    }
}
