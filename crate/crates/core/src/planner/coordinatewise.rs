use serde::{Deserialize, Serialize};

use super::{check_point, finish, InfeasibleKind, JumpChainCertificate, PlanError, Target};
use crate::linalg;
use crate::sde::{JumpCoefficient, ModelSpec};

/// Sign-paired atom families for a diagonal jump coefficient
/// `σ(x, z)ᵢ = σᵢ(x) zᵢ` with marks `c·βᵢ·eᵢ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordinateAtoms {
    /// Per-coordinate scales βᵢ.
    pub scales: Vec<f64>,
    /// Available positive atom values `c⁺` (any order).
    pub positive: Vec<f64>,
    /// Available negative atom values `c⁻` (any order, all < 0).
    pub negative: Vec<f64>,
    /// Declared `κ₂ < |σᵢ(x)|`.
    pub kappa_lo: f64,
    /// Declared `|σᵢ(x)| < κ₁`.
    pub kappa_hi: f64,
}

impl CoordinateAtoms {
    /// Dyadic family `±2^{−k}`, `k = 1..=levels`.
    pub fn dyadic(scales: Vec<f64>, levels: i32, kappa_lo: f64, kappa_hi: f64) -> Self {
        let pos: Vec<f64> = (1..=levels).map(|k| 2f64.powi(-k)).collect();
        CoordinateAtoms {
            scales,
            negative: pos.iter().map(|c| -c).collect(),
            positive: pos,
            kappa_lo,
            kappa_hi,
        }
    }

    /// Largest atom of each sign whose steps obey `κ₁|βᵢ||c| ≤ cap` for
    /// every coordinate.
    fn step_atoms(&self, cap: f64) -> (Option<f64>, Option<f64>) {
        let bmax = self.scales.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let fits = |c: f64| self.kappa_hi * bmax * c.abs() <= cap;
        let pos = self
            .positive
            .iter()
            .copied()
            .filter(|c| *c > 0.0 && fits(*c))
            .fold(None, |a: Option<f64>, c| Some(a.map_or(c, |a| a.max(c))));
        let neg = self
            .negative
            .iter()
            .copied()
            .filter(|c| *c < 0.0 && fits(*c))
            .fold(None, |a: Option<f64>, c| Some(a.map_or(c, |a| a.min(c))));
        (pos, neg)
    }
}

/// Coordinate-by-coordinate sign walk. With `N = d` and `δ/2 = η/(8N)` the
/// atoms are the largest with `κ₁|βᵢ||c| ≤ δ/2`; coordinate i repeatedly jumps
/// by `c·βᵢ·eᵢ` with `sgn c = sgn(σᵢ(q)βᵢ)·sgn(yᵢ − qᵢ)` until
/// `|yᵢ − qᵢ| ≤ δ/2`. Steps never overshoot, so the terminal error is at most
/// `√N·δ/2 ≤ 3η/8`.
pub fn plan_coordinatewise(
    model: &ModelSpec,
    atoms: &CoordinateAtoms,
    start: &[f64],
    target: &Target,
    max_steps: usize,
) -> Result<JumpChainCertificate, PlanError> {
    check_point(model, start)?;
    check_point(model, &target.center)?;
    let d = model.dim;
    let JumpCoefficient::Coordinatewise(sig) = &model.jump else {
        if !matches!(model.jump, JumpCoefficient::Additive) {
            return Err(PlanError::NotApplicable("needs a diagonal jump coefficient".into()));
        }
        return walk(model, atoms, start, target, max_steps, |_, _| 1.0);
    };
    if atoms.scales.len() != d {
        return Err(PlanError::NotApplicable(format!("need {d} scales")));
    }
    let sig = sig.clone();
    walk(model, atoms, start, target, max_steps, move |x, i| sig(x, i))
}

fn walk<F: Fn(&[f64], usize) -> f64>(
    model: &ModelSpec,
    atoms: &CoordinateAtoms,
    start: &[f64],
    target: &Target,
    max_steps: usize,
    sigma_i: F,
) -> Result<JumpChainCertificate, PlanError> {
    let d = model.dim;
    if !(0.0 < atoms.kappa_lo && atoms.kappa_lo < atoms.kappa_hi) {
        return Err(PlanError::NotApplicable("need 0 < κ₂ < κ₁".into()));
    }
    let half_delta = target.eta / (8.0 * d as f64);
    let (cp, cm) = atoms.step_atoms(half_delta);
    let y = &target.center;
    let mut q = vec![start.to_vec()];
    let mut l = Vec::new();
    for i in 0..d {
        loop {
            let cur = q.last().expect("non-empty");
            let gap = y[i] - cur[i];
            if gap.abs() <= half_delta {
                break;
            }
            if l.len() >= max_steps {
                return Err(PlanError::infeasible(
                    InfeasibleKind::Budget,
                    format!("sign walk exceeded {max_steps} steps"),
                ));
            }
            let s = sigma_i(cur, i);
            if !(atoms.kappa_lo < s.abs() && s.abs() < atoms.kappa_hi) {
                return Err(PlanError::NotApplicable(format!(
                    "|σ{}(q)| = {} outside ({}, {}) at q = {cur:?}",
                    i + 1,
                    s.abs(),
                    atoms.kappa_lo,
                    atoms.kappa_hi
                )));
            }
            let beta = atoms.scales[i];
            let c = if (s * beta).signum() * gap.signum() > 0.0 { cp } else { cm };
            let Some(c) = c else {
                return Err(PlanError::infeasible(
                    InfeasibleKind::Structural,
                    format!(
                        "coordinate {} needs a {} atom with κ₁|β||c| ≤ {half_delta}",
                        i + 1,
                        if (s * beta).signum() * gap.signum() > 0.0 { "positive" } else { "negative" }
                    ),
                ));
            };
            let mark = linalg::scale(&linalg::unit(d, i), c * beta);
            let next = model.jump_map(cur, &mark);
            l.push(mark);
            q.push(next);
        }
    }
    let notes = vec![format!("sign walk with δ/2 = {half_delta}, atoms c⁺ = {cp:?}, c⁻ = {cm:?}")];
    finish(model, "coordinatewise", q, l, target, notes, 0)
}
