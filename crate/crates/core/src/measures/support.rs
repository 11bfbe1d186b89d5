//! Sufficient conditions for density of finite ℕ-combinations of support
//! points on the real line, evaluated against the declared support.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{BaseProcess, IntensityMeasure, MeasureKind};
use crate::exact::{float_ratio_looks_rational, ExactReal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriState {
    True,
    False,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionStatus {
    Pass,
    Fail,
    Inconclusive,
}

/// How a condition verdict was reached.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionBasis {
    /// Decided exactly from the declared support description.
    Verified,
    /// Follows from the declared support only (the condition quantifies over
    /// infinite sequences that cannot be checked on a black-box density).
    Declared,
    /// Relies on floating-point rationality heuristics.
    Numerical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionResult {
    pub status: ConditionStatus,
    pub basis: ConditionBasis,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportReport {
    pub condition_results: BTreeMap<String, ConditionResult>,
    pub witness: Option<Vec<f64>>,
    pub h0_dense: TriState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refutation: Option<String>,
}

/// 1-D support: isolated atoms plus closed intervals.
struct Support1d {
    atoms: Vec<ExactReal>,
    /// Closed intervals `[lo, hi]` (possibly infinite ends), each containing
    /// 0 as an endpoint or spanning ℝ.
    intervals: Vec<(f64, f64)>,
    infinite_activity: bool,
}

impl Support1d {
    fn positive_points(&self) -> bool {
        self.atoms.iter().any(|a| a.value() > 0.0) || self.intervals.iter().any(|i| i.1 > 0.0)
    }

    fn negative_points(&self) -> bool {
        self.atoms.iter().any(|a| a.value() < 0.0) || self.intervals.iter().any(|i| i.0 < 0.0)
    }

    fn accumulates_at_zero(&self) -> bool {
        !self.intervals.is_empty()
    }

    /// Whether x is an accumulation point of the support.
    fn is_accumulation(&self, x: f64) -> bool {
        self.intervals.iter().any(|&(lo, hi)| lo <= x && x <= hi)
    }

    fn sup(&self) -> f64 {
        let a = self.atoms.iter().map(|a| a.value()).fold(f64::NEG_INFINITY, f64::max);
        self.intervals.iter().map(|i| i.1).fold(a, f64::max)
    }

    fn inf(&self) -> f64 {
        let a = self.atoms.iter().map(|a| a.value()).fold(f64::INFINITY, f64::min);
        self.intervals.iter().map(|i| i.0).fold(a, f64::min)
    }

    fn leb_positive(&self) -> bool {
        self.intervals.iter().any(|i| i.1 > 0.0)
    }

    fn leb_negative(&self) -> bool {
        self.intervals.iter().any(|i| i.0 < 0.0)
    }

    fn sample_points(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.atoms.iter().map(|a| a.value()).collect();
        for &(lo, hi) in &self.intervals {
            if hi > 0.0 {
                v.push(hi.min(1.0));
            }
            if lo < 0.0 {
                v.push(lo.max(-1.0));
            }
        }
        v
    }
}

fn describe(measure: &IntensityMeasure) -> Option<Support1d> {
    match measure.kind() {
        MeasureKind::Atomic { atoms, .. } => Some(Support1d {
            atoms: atoms.iter().map(|a| a.location[0]).collect(),
            intervals: Vec::new(),
            infinite_activity: false,
        }),
        MeasureKind::RadialPolar { .. } | MeasureKind::Product { .. } => {
            let parts = measure.parts();
            Some(Support1d {
                atoms: parts
                    .atoms
                    .iter()
                    .map(|(p, _)| ExactReal::Float(p[0]))
                    .collect(),
                intervals: parts
                    .rays
                    .iter()
                    .map(|r| {
                        if r.dir[0] > 0.0 {
                            (0.0, r.radius)
                        } else {
                            (-r.radius, 0.0)
                        }
                    })
                    .collect(),
                infinite_activity: !parts.rays.is_empty(),
            })
        }
        MeasureKind::Subordinated { base, subordinator, .. } => match base {
            BaseProcess::Gaussian { .. } => {
                let sub = IntensityMeasure::new((**subordinator).clone()).ok()?;
                let nonzero = !sub.parts().atoms.is_empty() || !sub.parts().rays.is_empty();
                Some(Support1d {
                    atoms: Vec::new(),
                    intervals: if nonzero {
                        vec![(f64::NEG_INFINITY, f64::INFINITY)]
                    } else {
                        Vec::new()
                    },
                    infinite_activity: !sub.is_finite_activity(),
                })
            }
            BaseProcess::Product { .. } => None,
        },
    }
}

fn result(status: ConditionStatus, basis: ConditionBasis, note: impl Into<String>) -> ConditionResult {
    ConditionResult {
        status,
        basis,
        note: note.into(),
    }
}

fn pass_if(ok: bool) -> ConditionStatus {
    if ok {
        ConditionStatus::Pass
    } else {
        ConditionStatus::Fail
    }
}

/// Evaluates the six sufficient conditions for density of the ℕ-combination
/// set of a 1-D measure's support.
///
/// Any passing condition makes `h0_dense` true. When none passes, structural
/// refutations are tried: one-sided support (combinations stay in a
/// half-line) and commensurable finite atoms (combinations stay in a lattice).
pub fn check_support_conditions_1d(measure: &IntensityMeasure) -> SupportReport {
    use ConditionBasis::*;
    use ConditionStatus::*;

    let mut out = BTreeMap::new();
    if measure.dim() != 1 {
        return SupportReport {
            condition_results: out,
            witness: None,
            h0_dense: TriState::Inconclusive,
            refutation: Some("measure is not one-dimensional".into()),
        };
    }
    let Some(s) = describe(measure) else {
        for k in 1..=6 {
            out.insert(
                format!("condition_{k}"),
                result(Inconclusive, Declared, "support of the subordinated product is not declared"),
            );
        }
        return SupportReport {
            condition_results: out,
            witness: None,
            h0_dense: TriState::Inconclusive,
            refutation: None,
        };
    };

    let (pos, neg) = (s.positive_points(), s.negative_points());
    let mut witness: Option<Vec<f64>> = None;

    let c1 = pos && neg && s.accumulates_at_zero();
    out.insert(
        "condition_1".into(),
        result(pass_if(c1), Verified, "points of both signs and nonzero points accumulating at 0"),
    );

    let c2 = s.infinite_activity && pos && neg;
    out.insert(
        "condition_2".into(),
        result(pass_if(c2), Verified, "infinite total mass and points of both signs"),
    );

    // a ≠ 0 in the support with −a an accumulation point of the support.
    let pts = s.sample_points();
    let c3_witness = pts
        .iter()
        .find(|&&a| a != 0.0 && s.is_accumulation(-a))
        .copied();
    out.insert(
        "condition_3".into(),
        result(pass_if(c3_witness.is_some()), Declared, "a and a sequence bₙ → −a in the support"),
    );

    // Unbounded support on one side together with a point of the other sign.
    let c4 = (s.sup() == f64::INFINITY && neg) || (s.inf() == f64::NEG_INFINITY && pos);
    out.insert(
        "condition_4".into(),
        result(pass_if(c4), Declared, "bₙ → ∞ with n·a + bₙ decreasing to 0"),
    );

    let c5 = s.leb_positive() && s.leb_negative();
    out.insert(
        "condition_5".into(),
        result(pass_if(c5), Verified, "positive Lebesgue measure on both half-lines"),
    );

    // a > 0, b < 0 with a/b irrational.
    let (c6, c6_basis, c6_witness) = if (s.leb_positive() && neg) || (s.leb_negative() && pos) {
        // a continuum on one side offers an irrational ratio with any point
        // of the other sign
        (true, Verified, None)
    } else {
        let plus: Vec<&ExactReal> = s.atoms.iter().filter(|a| a.value() > 0.0).collect();
        let minus: Vec<&ExactReal> = s.atoms.iter().filter(|a| a.value() < 0.0).collect();
        let mut found = None;
        let mut basis = Verified;
        for a in &plus {
            for b in &minus {
                let irrational = match a.ratio_is_rational(b) {
                    Some(r) => !r,
                    None => {
                        basis = Numerical;
                        !float_ratio_looks_rational(a.value(), b.value())
                    }
                };
                if irrational && found.is_none() {
                    found = Some(vec![a.value(), b.value()]);
                }
            }
        }
        (found.is_some(), basis, found)
    };
    out.insert(
        "condition_6".into(),
        result(pass_if(c6), c6_basis, "a > 0 and b < 0 in the support with a/b irrational"),
    );

    if let Some(a) = c3_witness {
        witness = Some(vec![a]);
    }
    if c6_witness.is_some() {
        witness = c6_witness;
    }

    let any_pass = out.values().any(|r| r.status == Pass);
    let mut refutation = None;
    let h0_dense = if any_pass {
        TriState::True
    } else if !pos || !neg {
        refutation = Some(
            "support is one-sided: every combination stays in a closed half-line".into(),
        );
        TriState::False
    } else if s.intervals.is_empty() && !s.atoms.is_empty() {
        // Finitely many atoms of both signs, all ratios rational: the
        // combinations lie in a lattice g·ℤ.
        refutation = Some("finitely many pairwise commensurable atoms: combinations form a lattice".into());
        TriState::False
    } else {
        TriState::Inconclusive
    };

    SupportReport {
        condition_results: out,
        witness,
        h0_dense,
        refutation,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{Atom, Directions, Tempering, WeightedDirection};

    fn atoms(vals: &[&str]) -> IntensityMeasure {
        IntensityMeasure::atomic(
            vals.iter()
                .map(|v| Atom::exact(vec![v.parse().unwrap()], 1.0))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn irrational_pair_is_dense() {
        let r = check_support_conditions_1d(&atoms(&["1", "-sqrt(2)"]));
        assert_eq!(r.condition_results["condition_6"].status, ConditionStatus::Pass);
        assert_eq!(r.condition_results["condition_6"].basis, ConditionBasis::Verified);
        assert_eq!(r.h0_dense, TriState::True);
    }

    #[test]
    fn lattice_is_refuted() {
        let r = check_support_conditions_1d(&atoms(&["1", "-1"]));
        assert_eq!(r.condition_results["condition_6"].status, ConditionStatus::Fail);
        assert_eq!(r.h0_dense, TriState::False);
        // plain floats go through the heuristic
        let m = IntensityMeasure::atomic_1d(&[(1.0, 1.0), (-1.0, 1.0)]).unwrap();
        let r = check_support_conditions_1d(&m);
        assert_eq!(r.condition_results["condition_6"].basis, ConditionBasis::Numerical);
        assert_eq!(r.h0_dense, TriState::False);
    }

    #[test]
    fn one_sided_is_refuted() {
        let r = check_support_conditions_1d(&atoms(&["1", "2"]));
        assert_eq!(r.h0_dense, TriState::False);
        assert!(r.refutation.unwrap().contains("one-sided"));
    }

    #[test]
    fn symmetric_stable_passes_several() {
        let m = IntensityMeasure::new(MeasureKind::RadialPolar {
            dimension: 1,
            alpha: 1.0,
            directions: Directions::Discrete {
                points: vec![
                    WeightedDirection {
                        direction: vec![1.0],
                        weight: 1.0,
                    },
                    WeightedDirection {
                        direction: vec![-1.0],
                        weight: 1.0,
                    },
                ],
            },
            tempering: Tempering::default(),
            cutoff: None,
        })
        .unwrap();
        let r = check_support_conditions_1d(&m);
        for k in [1, 2, 3, 4, 5, 6] {
            assert_eq!(
                r.condition_results[&format!("condition_{k}")].status,
                ConditionStatus::Pass,
                "condition {k}"
            );
        }
        assert_eq!(r.h0_dense, TriState::True);
    }

    #[test]
    fn one_sided_polar_is_refuted() {
        let mut m = MeasureKind::RadialPolar {
            dimension: 1,
            alpha: 0.5,
            directions: Directions::Discrete {
                points: vec![WeightedDirection {
                    direction: vec![1.0],
                    weight: 1.0,
                }],
            },
            tempering: Tempering::Truncation { radius: 1.0 },
            cutoff: None,
        };
        let ray_only = IntensityMeasure::new(m.clone()).unwrap();
        assert_eq!(check_support_conditions_1d(&ray_only).h0_dense, TriState::False);
        m = MeasureKind::Product {
            per_coordinate: vec![m],
            scales: vec![1.0],
        };
        let prod = IntensityMeasure::new(m).unwrap();
        assert_eq!(check_support_conditions_1d(&prod).h0_dense, TriState::False);
    }
}
