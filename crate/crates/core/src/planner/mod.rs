//! Jump-chain reachability certificates.
//!
//! A certificate is a chain `q₀ = ℏ, q₁, …, q_n` with marks `lᵢ` such that
//! `qᵢ = qᵢ₋₁ + σ(qᵢ₋₁, lᵢ)`, together with radii `εᵢ` (mark balls) and `ηᵢ`
//! (state balls) for which every state in `B(qᵢ₋₁, ηᵢ₋₁)` hit by any mark in
//! `B(lᵢ, εᵢ)` lands in `B(qᵢ, ηᵢ)`, and `B(q_n, η_n)` sits inside the target
//! ball. Four planners build them:
//!
//! * [`plan_additive`] for `σ(x, z) = z`, via the ℕ-combination search;
//! * [`plan_one_step_inverse`] for invertible matrix σ and full support;
//! * [`plan_coordinatewise`] for diagonal σ with sign-paired atoms;
//! * [`plan_greedy_frame`] for matrix σ with a covering frame.

mod certificate;
mod coordinatewise;
mod greedy;

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use certificate::{
    verify_certificate, CertificateError, JumpChainCertificate, StepCheck, Target,
    VerificationReport, Witness,
};
pub use coordinatewise::{plan_coordinatewise, CoordinateAtoms};
pub use greedy::{
    greedy_length_bound, plan_greedy_frame, probe_condition_i, GreedyOptions, GreedyPlan,
    GreedyStep, ProbeSummary,
};

use crate::linalg;
use crate::measures::{h0_approximate, H0Search, InfeasibleReason, IntensityMeasure, MeasureError};
use crate::sde::{JumpCoefficient, ModelSpec, SdeError};

/// Samples per step for the sampled containment check and the shrink loop.
pub const DEFAULT_VERIFY_SAMPLES: usize = 10_000;
/// Maximum number of halvings in the shrink-and-resample ε loop.
pub const MAX_HALVINGS: u32 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfeasibleKind {
    /// Search or step budget exhausted; a larger budget might succeed.
    Budget,
    /// Provably impossible (support cone, sign obstruction, …).
    Structural,
    /// A chain was found but no admissible radii fit around it.
    Radii,
}

impl fmt::Display for InfeasibleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InfeasibleKind::Budget => "budget",
            InfeasibleKind::Structural => "structural",
            InfeasibleKind::Radii => "radii",
        })
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum PlanError {
    #[error("infeasible ({kind}): {detail}")]
    Infeasible { kind: InfeasibleKind, detail: String },
    #[error("condition (I) violated at state {state:?}: best frame alignment {varpi0} < κ = {kappa}")]
    ConditionI {
        state: Vec<f64>,
        varpi0: f64,
        kappa: f64,
    },
    #[error("σ(ℏ) is singular (condition number {cond:e})")]
    Singular { cond: f64 },
    #[error("planner not applicable: {0}")]
    NotApplicable(String),
    #[error(transparent)]
    Sde(#[from] SdeError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

impl PlanError {
    fn infeasible(kind: InfeasibleKind, detail: impl Into<String>) -> Self {
        PlanError::Infeasible {
            kind,
            detail: detail.into(),
        }
    }

    /// Whether the failure says "no certificate" rather than "bad input".
    pub fn is_infeasible(&self) -> bool {
        matches!(
            self,
            PlanError::Infeasible { .. } | PlanError::ConditionI { .. }
        )
    }
}

fn check_point(model: &ModelSpec, v: &[f64]) -> Result<(), PlanError> {
    if v.len() != model.dim {
        return Err(SdeError::Dimension {
            model: model.dim,
            got: v.len(),
        }
        .into());
    }
    if !linalg::is_finite(v) {
        return Err(PlanError::NotApplicable(format!("non-finite point {v:?}")));
    }
    Ok(())
}

/// Additive model `σ(x, z) = z` with the given measure and no drift.
fn additive_model(measure: &IntensityMeasure) -> ModelSpec {
    use std::sync::Arc;
    ModelSpec::new(
        "additive",
        Arc::new(|_: &[f64], out: &mut [f64]| out.fill(0.0)),
        JumpCoefficient::Additive,
        measure.clone(),
    )
}

/// Chain for additive noise from the ℕ-combination search: the jumps of a
/// combination within `η̄/4` of `y − ℏ`, applied in search order.
pub fn plan_additive(
    measure: &IntensityMeasure,
    start: &[f64],
    target: &Target,
    search: &H0Search,
) -> Result<JumpChainCertificate, PlanError> {
    let model = additive_model(measure);
    check_point(&model, start)?;
    check_point(&model, &target.center)?;
    let tol = target.radius() / 2.0;
    let offset = linalg::sub(&target.center, start);
    let mut q = vec![start.to_vec()];
    let mut l = Vec::new();
    if linalg::norm(&offset) > tol {
        let comb = h0_approximate(measure, &offset, tol, search).map_err(|e| {
            let kind = match e.reason {
                InfeasibleReason::Budget => InfeasibleKind::Budget,
                InfeasibleReason::Unreachable => InfeasibleKind::Structural,
            };
            PlanError::infeasible(kind, e.detail)
        })?;
        for jump in comb.jumps() {
            let next = model.jump_map(q.last().expect("non-empty"), &jump);
            q.push(next);
            l.push(jump);
        }
    }
    let notes = vec![format!("ℕ-combination search, tolerance {tol}")];
    finish(&model, "additive", q, l, target, notes, 0)
}

/// Single jump `l₁ = σ(ℏ)⁻¹(y − ℏ)`.
pub fn plan_one_step_inverse(
    model: &ModelSpec,
    start: &[f64],
    target: &Target,
) -> Result<JumpChainCertificate, PlanError> {
    check_point(model, start)?;
    check_point(model, &target.center)?;
    let d = model.dim;
    let m = model
        .jump
        .matrix(start)
        .ok_or_else(|| PlanError::NotApplicable("σ(x, ·) is not a matrix".into()))?;
    let mat = DMatrix::from_row_slice(d, d, &m);
    let sv = mat.clone().svd(false, false).singular_values;
    let (smax, smin) = (sv.max(), sv.min());
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(cond < 1e12) {
        return Err(PlanError::Singular { cond });
    }
    let rhs = nalgebra::DVector::from_column_slice(&linalg::sub(&target.center, start));
    let sol = mat
        .lu()
        .solve(&rhs)
        .ok_or(PlanError::Singular { cond: f64::INFINITY })?;
    let mark: Vec<f64> = sol.iter().copied().collect();
    let notes = vec![format!("condition number of σ(ℏ): {cond:.6e}")];
    if linalg::norm(&mark) == 0.0 {
        return finish(model, "one_step_inverse", vec![start.to_vec()], vec![], target, notes, 0);
    }
    match model.measure.distance_to_support(&mark) {
        Some(dist) if dist == 0.0 => {}
        Some(dist) => {
            return Err(PlanError::infeasible(
                InfeasibleKind::Structural,
                format!("required mark {mark:?} lies at distance {dist} from the support"),
            ))
        }
        None => {
            return Err(PlanError::infeasible(
                InfeasibleKind::Structural,
                "the measure declares no support to check the mark against",
            ))
        }
    }
    let q1 = model.jump_map(start, &mark);
    finish(
        model,
        "one_step_inverse",
        vec![start.to_vec(), q1],
        vec![mark],
        target,
        notes,
        0,
    )
}

/// Allocates radii around a fixed chain and assembles the certificate.
pub(crate) fn finish(
    model: &ModelSpec,
    planner: &str,
    q: Vec<Vec<f64>>,
    l: Vec<Vec<f64>>,
    target: &Target,
    mut notes: Vec<String>,
    seed: u64,
) -> Result<JumpChainCertificate, PlanError> {
    let n = l.len();
    let terminal_err = linalg::dist(&q[n], &target.center);
    let radius = target.radius();
    if !(terminal_err < radius) {
        return Err(PlanError::infeasible(
            InfeasibleKind::Radii,
            format!("chain ends at distance {terminal_err} ≥ target radius {radius}"),
        ));
    }
    let eta_n = (radius - terminal_err) * (1.0 - 1e-9);
    // smallest mark ball that still reaches the support
    let min_eps: Vec<f64> = l
        .iter()
        .map(|li| match model.measure.distance_to_support(li) {
            Some(d) if d > 0.0 => d * 1.001,
            _ => 0.0,
        })
        .collect();
    let (eps, eta) = match model.lipschitz {
        Some(lip) => {
            notes.push("radii from declared Lipschitz moduli".into());
            allocate(model, &q, &l, eta_n, &min_eps, lip.state, lip.state_per_mark, lip.mark)?
        }
        None => {
            notes.push("radii from shrink-and-resample".into());
            shrink_and_resample(model, planner, &q, &l, target, eta_n, &min_eps, seed)?
        }
    };
    let m0 = select_m0(&l, &eps)?;
    let cert = JumpChainCertificate {
        planner: planner.to_string(),
        model: model.name.clone(),
        q,
        l,
        eps,
        eta,
        m0,
        target: target.clone(),
        notes,
    };
    cert.validate(model)
        .map_err(|e| PlanError::infeasible(InfeasibleKind::Radii, e.to_string()))?;
    Ok(cert)
}

/// Backward radius allocation. Step `i` receives the containment budget
/// `Bᵢ = ηᵢ − defectᵢ`; a `1/(i+1)` share goes to the mark ball and the rest,
/// divided by the state modulus, becomes `ηᵢ₋₁`. For additive noise this
/// gives equal shares `εᵢ = η₀ = η_n/(n+1)`.
#[allow(clippy::too_many_arguments)]
fn allocate(
    model: &ModelSpec,
    q: &[Vec<f64>],
    l: &[Vec<f64>],
    eta_n: f64,
    min_eps: &[f64],
    state: f64,
    state_per_mark: f64,
    mark: f64,
) -> Result<(Vec<f64>, Vec<f64>), PlanError> {
    let n = l.len();
    let mut eta = vec![0.0; n + 1];
    let mut eps = vec![0.0; n];
    eta[n] = eta_n;
    for i in (1..=n).rev() {
        let li = &l[i - 1];
        let ln = linalg::norm(li);
        let defect = linalg::dist(&model.jump_map(&q[i - 1], li), &q[i]);
        let budget = eta[i] - defect;
        if !(budget > 0.0) {
            return Err(PlanError::infeasible(
                InfeasibleKind::Radii,
                format!("step {i}: chain defect {defect} exceeds η = {}", eta[i]),
            ));
        }
        let share = budget / (i as f64 + 1.0);
        let mut e = if mark > 0.0 { share / mark } else { f64::INFINITY };
        e = e.min(ln / 2.0).max(min_eps[i - 1]);
        if !(e < ln) || e * mark >= budget {
            return Err(PlanError::infeasible(
                InfeasibleKind::Radii,
                format!(
                    "step {i}: a mark ball reaching the support (ε ≥ {}) does not fit the radius budget {budget}",
                    min_eps[i - 1]
                ),
            ));
        }
        let lx = state + state_per_mark * (ln + e);
        let prev = ((budget - e * mark) / (1.0 + lx)) * (1.0 - 1e-12);
        if !(prev > 0.0) {
            return Err(PlanError::infeasible(
                InfeasibleKind::Radii,
                format!("step {i}: radii underflow"),
            ));
        }
        eps[i - 1] = e;
        eta[i - 1] = prev.min(eta[i]);
    }
    Ok((eps, eta))
}

#[allow(clippy::too_many_arguments)]
fn shrink_and_resample(
    model: &ModelSpec,
    planner: &str,
    q: &[Vec<f64>],
    l: &[Vec<f64>],
    target: &Target,
    eta_n: f64,
    min_eps: &[f64],
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>), PlanError> {
    use rand::SeedableRng;
    let (mut eps, mut eta) = allocate(model, q, l, eta_n, min_eps, 0.0, 0.0, 1.0)?;
    let n = l.len();
    for halving in 0..=MAX_HALVINGS {
        let m0 = select_m0(l, &eps)?;
        let cert = JumpChainCertificate {
            planner: planner.to_string(),
            model: model.name.clone(),
            q: q.to_vec(),
            l: l.to_vec(),
            eps: eps.clone(),
            eta: eta.clone(),
            m0,
            target: target.clone(),
            notes: vec![],
        };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(crate::rng::derive_seed(seed, halving as u64));
        let report = verify_certificate(&cert, model, DEFAULT_VERIFY_SAMPLES, &mut rng);
        if report.passed {
            return Ok((eps, eta));
        }
        for (i, e) in eps.iter_mut().enumerate() {
            *e /= 2.0;
            if *e < min_eps[i] {
                return Err(PlanError::infeasible(
                    InfeasibleKind::Radii,
                    format!("step {}: shrinking ε below the support distance", i + 1),
                ));
            }
        }
        for v in eta.iter_mut().take(n) {
            *v /= 2.0;
        }
    }
    Err(PlanError::infeasible(
        InfeasibleKind::Radii,
        format!("sampled containment still fails after {MAX_HALVINGS} halvings"),
    ))
}

/// Smallest m with `minᵢ(‖lᵢ‖ − εᵢ) > 1/m`.
fn select_m0(l: &[Vec<f64>], eps: &[f64]) -> Result<u32, PlanError> {
    let gap = l
        .iter()
        .zip(eps)
        .map(|(li, e)| linalg::norm(li) - e)
        .fold(f64::INFINITY, f64::min);
    if !(gap > 0.0) {
        return Err(PlanError::infeasible(
            InfeasibleKind::Radii,
            "a mark ball reaches the origin",
        ));
    }
    if gap > 1.0 {
        return Ok(1);
    }
    let guess = (1.0 / gap).floor();
    if guess >= u32::MAX as f64 {
        return Err(PlanError::infeasible(
            InfeasibleKind::Radii,
            "marks too close to the origin for a truncation index",
        ));
    }
    let mut m = (guess as u32).max(2) - 1;
    while gap <= 1.0 / m as f64 {
        m += 1;
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::ExactReal;
    use crate::measures::Atom;
    use crate::sde::{zoo, LipschitzBounds, MatrixFn};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn sqrt2_pair() -> IntensityMeasure {
        IntensityMeasure::atomic(vec![
            Atom::exact(vec![ExactReal::rational(1, 1)], 1.0),
            Atom::exact(vec!["-sqrt(2)".parse().unwrap()], 1.0),
        ])
        .unwrap()
    }

    #[test]
    fn additive_sqrt2_chain() {
        let cert = plan_additive(&sqrt2_pair(), &[0.0], &Target::new(vec![-0.7], 0.2), &H0Search::default()).unwrap();
        assert_eq!(cert.len(), 9);
        assert!((cert.q[9][0] + 0.65685).abs() < 1e-5);
        let sum: f64 = cert.eps.iter().sum::<f64>() + cert.eta[0];
        assert!(sum < 0.1);
        // equal shares
        assert!(cert.eps.iter().all(|e| (e / cert.eta[0] - 1.0).abs() < 1e-10));
        let model = additive_model(&sqrt2_pair());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rep = verify_certificate(&cert, &model, 2000, &mut rng);
        assert!(rep.passed, "{rep:?}");
        assert_eq!(rep.deterministic_passed, Some(true));
    }

    #[test]
    fn additive_trivial_and_infeasible() {
        let m = sqrt2_pair();
        let c = plan_additive(&m, &[0.5], &Target::new(vec![1.5], 1e-3), &H0Search::default()).unwrap();
        assert_eq!(c.len(), 1);
        let pos = zoo::one_sided_measure();
        let e = plan_additive(&pos, &[0.0], &Target::new(vec![-1.0], 1.0), &H0Search::default()).unwrap_err();
        assert!(matches!(e, PlanError::Infeasible { kind: InfeasibleKind::Structural, .. }), "{e}");
        let c = plan_additive(&m, &[0.3], &Target::new(vec![0.3], 0.1), &H0Search::default()).unwrap();
        assert_eq!(c.len(), 0);
    }

    /// Full support in ℝ².
    fn gaussian_subordinated() -> IntensityMeasure {
        use crate::measures::{BaseProcess, MeasureKind};
        IntensityMeasure::new(MeasureKind::Subordinated {
            base: BaseProcess::Gaussian {
                dimension: 2,
                variance: 1.0,
            },
            subordinator: Box::new(MeasureKind::Atomic {
                atoms: vec![Atom::new(&[1.0], 2.0)],
                dimension: None,
            }),
            drift: 0.0,
        })
        .unwrap()
    }

    fn matrix_model(m: [f64; 4]) -> ModelSpec {
        let f: MatrixFn = Arc::new(move |_: &[f64], out: &mut [f64]| out.copy_from_slice(&m));
        let norm = m.iter().map(|v| v * v).sum::<f64>().sqrt();
        ModelSpec::new(
            "matrix",
            Arc::new(|_: &[f64], out: &mut [f64]| out.fill(0.0)),
            JumpCoefficient::Matrix(f),
            gaussian_subordinated(),
        )
        .with_lipschitz(LipschitzBounds {
            state: 0.0,
            state_per_mark: 0.0,
            mark: norm,
        })
    }

    #[test]
    fn one_step_examples() {
        let id = matrix_model([1.0, 0.0, 0.0, 1.0]);
        let c = plan_one_step_inverse(&id, &[0.0, 0.0], &Target::new(vec![1.0, 2.0], 0.1)).unwrap();
        assert_eq!(c.l[0], vec![1.0, 2.0]);
        assert_eq!(c.q[1], vec![1.0, 2.0]);
        let two = matrix_model([2.0, 0.0, 0.0, 2.0]);
        let c = plan_one_step_inverse(&two, &[0.3, 0.0], &Target::new(vec![1.3, 0.0], 0.1)).unwrap();
        assert_eq!(c.l[0], vec![0.5, 0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert!(verify_certificate(&c, &two, 2000, &mut rng).passed);
        let sing = matrix_model([1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(
            plan_one_step_inverse(&sing, &[0.0, 0.0], &Target::new(vec![1.0, 1.0], 0.1)),
            Err(PlanError::Singular { .. })
        ));
    }

    #[test]
    fn one_step_without_lipschitz_shrinks() {
        let mut m = matrix_model([1.0, 0.2, -0.1, 1.5]);
        m.lipschitz = None;
        let c = plan_one_step_inverse(&m, &[0.0, 0.0], &Target::new(vec![0.7, -0.4], 0.2)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rep = verify_certificate(&c, &m, 10_000, &mut rng);
        assert!(rep.passed && rep.deterministic_passed.is_none());
    }

    #[test]
    fn m0_is_smallest() {
        assert_eq!(select_m0(&[vec![0.5]], &[0.1]).unwrap(), 3);
        assert_eq!(select_m0(&[vec![0.75]], &[0.25]).unwrap(), 3);
        assert_eq!(select_m0(&[vec![2.0]], &[0.5]).unwrap(), 1);
        assert_eq!(select_m0(&[], &[]).unwrap(), 1);
    }
}
