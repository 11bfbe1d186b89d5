//! Search over finite ℕ-combinations `Σ mᵢ aᵢ` of support points.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::IntensityMeasure;
use crate::linalg;

/// Knobs for [`h0_approximate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct H0Search {
    /// Maximum total multiplicity `Σ mᵢ`.
    pub budget: u32,
    /// Candidates kept per level (closest to the target first).
    pub beam: usize,
    /// Radii sampled along each continuous ray of the support.
    pub radii_per_ray: usize,
}

impl Default for H0Search {
    fn default() -> Self {
        H0Search {
            budget: 40,
            beam: 20_000,
            radii_per_ray: 64,
        }
    }
}

impl H0Search {
    pub fn with_budget(budget: u32) -> Self {
        H0Search {
            budget,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfeasibleReason {
    /// Nothing found within the multiplicity budget (or beam); a larger
    /// search might succeed.
    Budget,
    /// A separating direction proves no combination gets within tolerance.
    Unreachable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, thiserror::Error)]
#[error("{reason:?}: {detail}")]
pub struct Infeasible {
    pub reason: InfeasibleReason,
    pub detail: String,
}

/// A combination `Σ mᵢ aᵢ` of support points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Combination {
    /// `(support point, multiplicity)` in search-index order.
    pub terms: Vec<(Vec<f64>, u32)>,
    /// Sum obtained by adding the jumps one at a time in [`Self::jumps`] order.
    pub value: Vec<f64>,
    pub error: f64,
}

impl Combination {
    pub fn total(&self) -> u32 {
        self.terms.iter().map(|t| t.1).sum()
    }

    /// The combination unrolled as a jump sequence.
    pub fn jumps(&self) -> Vec<Vec<f64>> {
        self.terms
            .iter()
            .flat_map(|(a, m)| std::iter::repeat_n(a.clone(), *m as usize))
            .collect()
    }

    /// Sequential replay of the jump sequence starting at `start`.
    pub fn replay(&self, start: &[f64]) -> Vec<f64> {
        let mut x = start.to_vec();
        for j in self.jumps() {
            for (xi, ji) in x.iter_mut().zip(&j) {
                *xi += ji;
            }
        }
        x
    }
}

/// Candidate support points: atoms, radii along each ray, and the foot of
/// the target on each ray.
fn candidate_points(measure: &IntensityMeasure, target: &[f64], radii: usize) -> Vec<Vec<f64>> {
    let parts = measure.parts();
    let mut pts: Vec<Vec<f64>> = parts.atoms.iter().map(|(a, _)| a.clone()).collect();
    for ray in &parts.rays {
        let foot = linalg::dot(target, &ray.dir);
        if foot > 0.0 && foot <= ray.radius {
            pts.push(linalg::scale(&ray.dir, foot));
        }
        for k in 1..=radii {
            let r = if ray.radius.is_finite() {
                ray.radius * k as f64 / radii as f64
            } else {
                2f64.powf((k as f64 - radii as f64 / 2.0) / 4.0)
            };
            pts.push(linalg::scale(&ray.dir, r));
        }
    }
    if measure.distance_to_support(target) == Some(0.0) && linalg::norm(target) > 0.0 {
        pts.insert(0, target.to_vec());
    }
    let mut seen = Vec::<Vec<u64>>::new();
    pts.retain(|p| {
        let key: Vec<u64> = p.iter().map(|x| x.to_bits()).collect();
        if seen.contains(&key) {
            false
        } else {
            seen.push(key);
            true
        }
    });
    pts
}

/// Whether some direction w separates the support cone from the target by
/// more than `tol`: `⟨w, a⟩ ≤ 0` on the support but `⟨w, target⟩ > tol`.
fn separated(measure: &IntensityMeasure, target: &[f64], tol: f64) -> Option<Vec<f64>> {
    let d = target.len();
    let parts = measure.parts();
    if parts.gaussian.is_some() || measure.distance_to_support(target).is_none() {
        return None;
    }
    let mut ws: Vec<Vec<f64>> = Vec::new();
    for i in 0..d {
        ws.push(linalg::unit(d, i));
        ws.push(linalg::scale(&linalg::unit(d, i), -1.0));
    }
    if let Some(u) = linalg::normalize(target) {
        ws.push(linalg::scale(&u, -1.0));
        ws.push(u);
    }
    ws.into_iter().find(|w| {
        parts.atoms.iter().all(|(a, _)| linalg::dot(a, w) <= 0.0)
            && parts.rays.iter().all(|r| linalg::dot(&r.dir, w) <= 0.0)
            && linalg::dot(target, w) > tol
    })
}

/// Finds `Σ mᵢ aᵢ` with `‖Σ mᵢ aᵢ − target‖ ≤ tol` and minimal total
/// multiplicity `Σ mᵢ ≤ budget`, searching level by level. Among the
/// minimal-level hits the lexicographically greatest multiplicity vector wins
/// (low-index points are preferred).
pub fn h0_approximate(
    measure: &IntensityMeasure,
    target: &[f64],
    tol: f64,
    search: &H0Search,
) -> Result<Combination, Infeasible> {
    assert!(tol > 0.0, "tolerance must be positive");
    if target.len() != measure.dim() {
        return Err(Infeasible {
            reason: InfeasibleReason::Unreachable,
            detail: "target dimension differs from the measure's".into(),
        });
    }
    if let Some(w) = separated(measure, target, tol) {
        return Err(Infeasible {
            reason: InfeasibleReason::Unreachable,
            detail: format!(
                "support lies in the half-space ⟨w, z⟩ ≤ 0 for w = {w:?} while the target is at distance > {tol} from it"
            ),
        });
    }
    let pts = candidate_points(measure, target, search.radii_per_ray);
    if pts.is_empty() {
        return Err(Infeasible {
            reason: InfeasibleReason::Unreachable,
            detail: "measure has empty support".into(),
        });
    }
    let j = pts.len();
    // Combinations are multisets of point indices (sorted), so a level never
    // holds more than `beam` entries and expanding it costs `beam·j`.
    let beam = search.beam.min((4_000_000 / j).max(64));
    let mut level: Vec<(Vec<u32>, Vec<f64>)> = vec![(Vec::new(), vec![0.0; target.len()])];
    for _k in 1..=search.budget {
        let mut next: HashMap<Vec<u32>, Vec<f64>> = HashMap::with_capacity(level.len() * j);
        for (multiset, sum) in &level {
            // only append indices ≥ the last one to enumerate each multiset once
            let from = multiset.last().copied().unwrap_or(0) as usize;
            for (i, p) in pts.iter().enumerate().skip(from) {
                let mut key = multiset.clone();
                key.push(i as u32);
                next.entry(key).or_insert_with(|| linalg::add(sum, p));
            }
        }
        let mut hits: Vec<Vec<u32>> = next
            .iter()
            .filter(|(_, s)| linalg::dist(s, target) <= tol * (1.0 + 1e-9))
            .map(|(m, _)| counts(m, j))
            .collect();
        hits.sort_unstable_by(|a, b| b.cmp(a));
        for m in hits {
            let comb = build(&pts, &m, target);
            if comb.error <= tol {
                return Ok(comb);
            }
        }
        let mut v: Vec<(Vec<u32>, Vec<f64>)> = next.into_iter().collect();
        v.sort_by(|a, b| {
            linalg::dist(&a.1, target)
                .total_cmp(&linalg::dist(&b.1, target))
                .then_with(|| a.0.cmp(&b.0))
        });
        v.truncate(beam);
        level = v;
    }
    Err(Infeasible {
        reason: InfeasibleReason::Budget,
        detail: format!(
            "no combination with total multiplicity ≤ {} within {tol} of the target",
            search.budget
        ),
    })
}

fn counts(multiset: &[u32], j: usize) -> Vec<u32> {
    let mut c = vec![0; j];
    for &i in multiset {
        c[i as usize] += 1;
    }
    c
}

fn build(pts: &[Vec<f64>], mult: &[u32], target: &[f64]) -> Combination {
    let terms: Vec<(Vec<f64>, u32)> = pts
        .iter()
        .zip(mult)
        .filter(|(_, &m)| m > 0)
        .map(|(p, &m)| (p.clone(), m))
        .collect();
    let mut c = Combination {
        terms,
        value: Vec::new(),
        error: 0.0,
    };
    c.value = c.replay(&vec![0.0; target.len()]);
    c.error = linalg::dist(&c.value, target);
    c
}

/// Balls `B(aᵢ, ηᵢ)` around support points whose Minkowski sum lies inside
/// `B(h, eta_h)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionVCertificate {
    pub h: Vec<f64>,
    pub eta_h: f64,
    /// One `(aᵢ, ηᵢ)` per jump (multiplicities unrolled).
    pub balls: Vec<(Vec<f64>, f64)>,
}

/// Builds balls around an [`h0_approximate`] combination for `h` found at
/// tolerance `eta_h/2`. The remaining slack `eta_h − error` is split evenly
/// (halved when the combination is exact) and each radius is capped at
/// `‖aᵢ‖/2` so the closed ball avoids the origin.
pub fn check_assumption_v(
    measure: &IntensityMeasure,
    h: &[f64],
    eta_h: f64,
    search: &H0Search,
) -> Result<AssumptionVCertificate, Infeasible> {
    assert!(eta_h > 0.0, "eta_h must be positive");
    let comb = h0_approximate(measure, h, eta_h / 2.0, search)?;
    let n = comb.total() as f64;
    // the 1e-9 shave leaves room for outward rounding in the verifier
    let mut share = (eta_h - comb.error) / n * (1.0 - 1e-9);
    if comb.error == 0.0 {
        share /= 2.0;
    }
    let balls = comb
        .jumps()
        .into_iter()
        .map(|a| {
            let r = share.min(linalg::norm(&a) / 2.0);
            (a, r)
        })
        .collect();
    let cert = AssumptionVCertificate {
        h: h.to_vec(),
        eta_h,
        balls,
    };
    if verify_assumption_v(&cert, measure) {
        Ok(cert)
    } else {
        Err(Infeasible {
            reason: InfeasibleReason::Budget,
            detail: "combination found but its balls fail outward-rounded verification".into(),
        })
    }
}

/// Pure re-verification: `‖Σaᵢ − h‖ + Σηᵢ ≤ eta_h` with outward rounding,
/// `‖aᵢ‖ > ηᵢ`, and `ν(B(aᵢ, ηᵢ)) > 0` from the declared support.
pub fn verify_assumption_v(cert: &AssumptionVCertificate, measure: &IntensityMeasure) -> bool {
    if cert.balls.is_empty() {
        return false;
    }
    let d = cert.h.len();
    let mut sum = vec![0.0; d];
    let mut radii = 0.0;
    for (a, eta) in &cert.balls {
        if a.len() != d || !(*eta > 0.0) {
            return false;
        }
        if linalg::norm(a) * (1.0 - 1e-15) <= *eta {
            return false;
        }
        if measure.ball_has_mass(a, *eta) != Some(true) {
            return false;
        }
        for (s, x) in sum.iter_mut().zip(a) {
            *s += x;
        }
        radii += eta;
    }
    let n = cert.balls.len() as f64;
    // each floating addition contributes at most one ulp of relative error
    let slop = 4.0 * (n + d as f64) * f64::EPSILON;
    let lhs = (linalg::dist(&sum, &cert.h) + radii) * (1.0 + slop)
        + slop * sum.iter().map(|x| x.abs()).sum::<f64>();
    lhs <= cert.eta_h
}
