use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{check_point, finish, InfeasibleKind, JumpChainCertificate, PlanError, Target};
use crate::linalg;
use crate::sde::{FrameSpec, ModelSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreedyOptions {
    pub max_steps: usize,
    /// Random states probed for the covering condition besides the visited ones.
    pub probe_states: usize,
    /// Random unit directions tried per probed state.
    pub probe_directions: usize,
    pub seed: u64,
}

impl Default for GreedyOptions {
    fn default() -> Self {
        GreedyOptions {
            max_steps: 100_000,
            probe_states: 16,
            probe_directions: 512,
            seed: 0,
        }
    }
}

/// Geometry of one greedy step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyStep {
    /// `ϱ = ‖q − y‖` before the step.
    pub rho: f64,
    /// Best alignment `ϖ₀ = maxᵢ ⟨σ(q)fᵢ, y − q⟩ / (|σ(q)fᵢ| ϱ)`.
    pub varpi0: f64,
    pub frame_index: usize,
    /// `|σ(q)f_{i₀}|`, the largest admissible step length.
    pub reach: f64,
    /// Unclamped minimiser `ϱϖ₀` of `g`.
    pub r_star: f64,
    /// Step length actually taken.
    pub r0: f64,
    pub clamped: bool,
    /// `‖q' − y‖²` after the step.
    pub g: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSummary {
    pub states: usize,
    pub directions: usize,
    /// Smallest best-alignment seen over all probes.
    pub min_alignment: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyPlan {
    pub certificate: JumpChainCertificate,
    pub steps: Vec<GreedyStep>,
    pub length_bound: usize,
    pub probes: ProbeSummary,
}

/// `⌈(ϱ₀² − (η/8)²)Λ²⌉ + ⌈log(8ϱ₀/η) / (−½ log(1 − κ²))⌉ + 1`.
pub fn greedy_length_bound(rho0: f64, eta: f64, kappa: f64, lambda: f64) -> usize {
    let stop = eta / 8.0;
    if rho0 <= stop {
        return 0;
    }
    let far = ((rho0 * rho0 - stop * stop) * lambda * lambda).ceil().max(0.0);
    let near = if kappa >= 1.0 {
        1.0
    } else {
        ((8.0 * rho0 / eta).ln() / (-0.5 * (1.0 - kappa * kappa).ln())).ceil().max(0.0)
    };
    (far + near) as usize + 1
}

/// Pushed-forward unit frame `σ(x)fᵢ/|σ(x)fᵢ|` and the norms `|σ(x)fᵢ|`.
fn pushed_frame(model: &ModelSpec, x: &[f64], frame: &FrameSpec) -> Result<Vec<(Vec<f64>, f64)>, PlanError> {
    frame
        .vectors
        .iter()
        .map(|f| {
            let v = model.sigma(x, f);
            let n = linalg::norm(&v);
            if n > 0.0 && n.is_finite() {
                Ok((linalg::scale(&v, 1.0 / n), n))
            } else {
                Err(PlanError::NotApplicable(format!("σ(x)f vanishes at x = {x:?} for f = {f:?}")))
            }
        })
        .collect()
}

/// Spot-checks the covering condition: at each state, every probed unit
/// direction must have alignment ≥ κ with some pushed-forward frame vector.
pub fn probe_condition_i(
    model: &ModelSpec,
    frame: &FrameSpec,
    states: &[Vec<f64>],
    directions: usize,
    seed: u64,
) -> Result<ProbeSummary, PlanError> {
    let d = model.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_alignment = f64::INFINITY;
    for x in states {
        let pushed = pushed_frame(model, x, frame)?;
        let mut dirs: Vec<Vec<f64>> = (0..d)
            .flat_map(|i| {
                let e = linalg::unit(d, i);
                [linalg::scale(&e, -1.0), e]
            })
            .collect();
        while dirs.len() < directions.max(2 * d) {
            let g: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
            if let Some(u) = linalg::normalize(&g) {
                dirs.push(u);
            }
        }
        for u in &dirs {
            let best = pushed.iter().map(|(p, _)| linalg::dot(p, u)).fold(f64::MIN, f64::max);
            min_alignment = min_alignment.min(best);
            if best < frame.kappa {
                return Err(PlanError::ConditionI {
                    state: x.clone(),
                    varpi0: best,
                    kappa: frame.kappa,
                });
            }
        }
    }
    Ok(ProbeSummary {
        states: states.len(),
        directions,
        min_alignment,
    })
}

/// Greedy frame walk: at each state pick the frame vector best aligned with
/// `y − q` (lowest index on ties) and step `r₀ = min(ϱϖ₀, |σ(q)f_{i₀}|)`
/// along it, the exact minimiser of `g(r) = (ϱ − r cos θ)² + (r sin θ)²`
/// over the admissible lengths. Stops once `ϱ ≤ η/8`.
pub fn plan_greedy_frame(
    model: &ModelSpec,
    frame: &FrameSpec,
    start: &[f64],
    target: &Target,
    opts: &GreedyOptions,
) -> Result<GreedyPlan, PlanError> {
    check_point(model, start)?;
    check_point(model, &target.center)?;
    if !(frame.kappa > 0.0 && frame.kappa <= 1.0) || !(frame.lambda >= 1.0) {
        return Err(PlanError::NotApplicable(format!(
            "need κ ∈ (0, 1] and Λ ≥ 1, got κ = {}, Λ = {}",
            frame.kappa, frame.lambda
        )));
    }
    if frame.vectors.iter().any(|f| f.len() != model.dim) {
        return Err(PlanError::NotApplicable("frame vectors have the wrong dimension".into()));
    }
    let y = &target.center;
    let stop = target.eta / 8.0;
    let mut q = vec![start.to_vec()];
    let mut l = Vec::new();
    let mut steps = Vec::new();
    loop {
        let cur = q.last().expect("non-empty");
        let diff = linalg::sub(y, cur);
        let rho = linalg::norm(&diff);
        if rho <= stop {
            break;
        }
        if steps.len() >= opts.max_steps {
            return Err(PlanError::infeasible(
                InfeasibleKind::Budget,
                format!("no convergence within {} steps (ϱ = {rho})", opts.max_steps),
            ));
        }
        let pushed = pushed_frame(model, cur, frame)?;
        let (mut idx, mut varpi0) = (0, f64::NEG_INFINITY);
        for (i, (p, _)) in pushed.iter().enumerate() {
            let c = linalg::dot(p, &diff) / rho;
            if c > varpi0 {
                (idx, varpi0) = (i, c);
            }
        }
        if varpi0 < frame.kappa {
            return Err(PlanError::ConditionI {
                state: cur.clone(),
                varpi0,
                kappa: frame.kappa,
            });
        }
        let reach = pushed[idx].1;
        let r_star = rho * varpi0;
        let r0 = r_star.min(reach);
        let mark = linalg::scale(&frame.vectors[idx], r0 / reach);
        let next = model.jump_map(cur, &mark);
        let g = linalg::dist(&next, y).powi(2);
        steps.push(GreedyStep {
            rho,
            varpi0,
            frame_index: idx,
            reach,
            r_star,
            r0,
            clamped: r_star > reach,
            g,
        });
        l.push(mark);
        q.push(next);
    }
    let mut probe_at = q.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let spread = linalg::dist(start, y).max(1.0);
    for _ in 0..opts.probe_states {
        let g: Vec<f64> = (0..model.dim)
            .map(|_| spread * Distribution::<f64>::sample(&StandardNormal, &mut rng))
            .collect();
        probe_at.push(linalg::add(start, &g));
    }
    let probes = probe_condition_i(model, frame, &probe_at, opts.probe_directions, opts.seed ^ 0x5EED)?;
    let rho0 = linalg::dist(start, y);
    let notes = vec![
        format!(
            "condition (I) probabilistically validated: {} states × {} directions, min alignment {:.6}",
            probes.states, probes.directions, probes.min_alignment
        ),
        format!("frame κ = {}, Λ = {}", frame.kappa, frame.lambda),
    ];
    let certificate = finish(model, "greedy_frame", q, l, target, notes, opts.seed)?;
    Ok(GreedyPlan {
        certificate,
        length_bound: greedy_length_bound(rho0, target.eta, frame.kappa, frame.lambda),
        steps,
        probes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sde::zoo;
    use rand::SeedableRng;

    #[test]
    fn frame_fixed_two_steps() {
        let m = zoo::frame_fixed_2d();
        let frame = m.tags.frame.clone().unwrap();
        let p = plan_greedy_frame(&m, &frame, &[0.0, 0.0], &Target::ball(vec![-1.0, -1.0], 0.3), &GreedyOptions::default())
            .unwrap();
        assert_eq!(p.steps.len(), 2);
        let s = &p.steps[0];
        assert_eq!(s.frame_index, 2);
        assert!((s.varpi0 - 1.0).abs() < 1e-15 && s.r0 == 1.0 && s.clamped);
        let q1 = &p.certificate.q[1];
        assert!((q1[0] + 0.70710678).abs() < 1e-8 && (q1[1] + 0.70710678).abs() < 1e-8);
        let s = &p.steps[1];
        assert!((s.r0 - (2f64.sqrt() - 1.0)).abs() < 1e-12 && !s.clamped);
        assert!(linalg::dist(p.certificate.terminal(), &[-1.0, -1.0]) < 1e-12);
        // second mark is not an atom; its ball must reach the atom 0.5·e₃
        let eps2 = p.certificate.eps[1];
        assert!(eps2 > 0.5 - (2f64.sqrt() - 1.0));
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rep = super::super::verify_certificate(&p.certificate, &m, 10_000, &mut rng);
        assert!(rep.passed, "{rep:?}");
        // brute-force r-grid agrees with the closed-form minimiser
        let s0 = &p.steps[0];
        let best = (1..=100_000)
            .map(|k| {
                let r = s0.reach * k as f64 / 100_000.0;
                let th = s0.varpi0.clamp(-1.0, 1.0).acos();
                ((s0.rho - r * th.cos()).powi(2) + (r * th.sin()).powi(2), r)
            })
            .fold((f64::INFINITY, 0.0), |a, b| if b.0 < a.0 { b } else { a });
        assert!((best.1 - s0.r0).abs() < 1e-4);
    }

    #[test]
    fn quadrant_fails_condition_i() {
        let m = zoo::quadrant_locked_2d();
        let frame = m.tags.frame.clone().unwrap();
        let e = plan_greedy_frame(&m, &frame, &[0.0, 0.0], &Target::ball(vec![-1.0, -1.0], 0.3), &GreedyOptions::default())
            .unwrap_err();
        match e {
            PlanError::ConditionI { varpi0, .. } => assert!(varpi0 < 0.0),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn empty_chain_at_target() {
        let m = zoo::frame_fixed_2d();
        let frame = m.tags.frame.clone().unwrap();
        let p = plan_greedy_frame(&m, &frame, &[0.2, 0.1], &Target::ball(vec![0.2, 0.1], 0.3), &GreedyOptions::default())
            .unwrap();
        assert!(p.certificate.is_empty());
        assert_eq!(p.length_bound, 0);
    }

    #[test]
    fn singular_stable_like_plans() {
        let m = zoo::singular_stable_like(None).unwrap();
        let frame = m.tags.frame.clone().unwrap();
        let t = Target::ball(vec![2.5, -1.7], 0.2);
        let p = plan_greedy_frame(&m, &frame, &[0.0, 0.0], &t, &GreedyOptions::default()).unwrap();
        assert!(p.steps.len() <= p.length_bound);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let rep = super::super::verify_certificate(&p.certificate, &m, 10_000, &mut rng);
        assert!(rep.passed && rep.deterministic_passed == Some(true), "{rep:?}");
    }
}
