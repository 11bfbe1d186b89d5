use std::fmt::Write as _;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg;
use crate::rng::{derive_seed, uniform_in_ball};
use crate::sde::ModelSpec;

/// Target ball `B(center, η/2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub center: Vec<f64>,
    /// Twice the ball radius.
    pub eta: f64,
}

impl Target {
    pub fn new(center: Vec<f64>, eta: f64) -> Self {
        Target { center, eta }
    }

    /// Target given by its ball radius.
    pub fn ball(center: Vec<f64>, radius: f64) -> Self {
        Target {
            center,
            eta: 2.0 * radius,
        }
    }

    pub fn radius(&self) -> f64 {
        self.eta / 2.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpChainCertificate {
    pub planner: String,
    pub model: String,
    /// States `q₀ … q_n`.
    pub q: Vec<Vec<f64>>,
    /// Marks `l₁ … l_n`.
    pub l: Vec<Vec<f64>>,
    /// Mark-ball radii `ε₁ … ε_n`.
    pub eps: Vec<f64>,
    /// State-ball radii `η₀ … η_n`.
    pub eta: Vec<f64>,
    /// Truncation index: every mark ball lies in `{‖z‖ > 1/m0}`.
    pub m0: u32,
    pub target: Target,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum CertificateError {
    #[error("malformed certificate: {0}")]
    Shape(String),
    #[error("step {index}: q{index} ≠ q{prev} + σ(q{prev}, l{index})", prev = index - 1)]
    Chain { index: usize },
    #[error("radii not positive and non-decreasing at η{index}")]
    Radii { index: usize },
    #[error("terminal ball leaves the target: ‖q_n − y‖ + η_n = {reach} > {radius}")]
    Terminal { reach: f64, radius: f64 },
    #[error("step {index}: ν(B(l, ε)) > 0 not established")]
    Mass { index: usize },
    #[error("step {index}: ‖l‖ − ε = {gap} ≤ 1/m0 = {bound}")]
    Annulus { index: usize, gap: f64, bound: f64 },
}

impl JumpChainCertificate {
    /// Number of jumps.
    pub fn len(&self) -> usize {
        self.l.len()
    }

    pub fn is_empty(&self) -> bool {
        self.l.is_empty()
    }

    pub fn terminal(&self) -> &[f64] {
        self.q.last().expect("certificate has q₀")
    }

    /// Checks the structural invariants against the model.
    pub fn validate(&self, model: &ModelSpec) -> Result<(), CertificateError> {
        let n = self.l.len();
        if self.q.len() != n + 1 || self.eps.len() != n || self.eta.len() != n + 1 {
            return Err(CertificateError::Shape(format!(
                "{} states, {} marks, {} ε, {} η",
                self.q.len(),
                n,
                self.eps.len(),
                self.eta.len()
            )));
        }
        let d = model.dim;
        if self.q.iter().chain(&self.l).any(|v| v.len() != d) || self.target.center.len() != d {
            return Err(CertificateError::Shape(format!("vectors must have length {d}")));
        }
        if self.m0 == 0 {
            return Err(CertificateError::Shape("m0 must be ≥ 1".into()));
        }
        for i in 1..=n {
            if model.jump_map(&self.q[i - 1], &self.l[i - 1]) != self.q[i] {
                return Err(CertificateError::Chain { index: i });
            }
        }
        for (i, e) in self.eta.iter().enumerate() {
            if !(*e > 0.0) || (i > 0 && self.eta[i - 1] > *e) {
                return Err(CertificateError::Radii { index: i });
            }
        }
        let reach = linalg::dist(self.terminal(), &self.target.center) + self.eta[n];
        if !(reach <= self.target.radius()) {
            return Err(CertificateError::Terminal {
                reach,
                radius: self.target.radius(),
            });
        }
        let bound = 1.0 / self.m0 as f64;
        for i in 1..=n {
            let (l, e) = (&self.l[i - 1], self.eps[i - 1]);
            if !(e > 0.0) || model.measure.ball_has_mass(l, e) != Some(true) {
                return Err(CertificateError::Mass { index: i });
            }
            let gap = linalg::norm(l) - e;
            if !(gap > bound) {
                return Err(CertificateError::Annulus { index: i, gap, bound });
            }
        }
        Ok(())
    }

    /// Human-readable step table: i, qᵢ, lᵢ, εᵢ, ηᵢ, distance to target.
    pub fn table(&self) -> String {
        let fmt_v = |v: &[f64]| {
            let parts: Vec<String> = v.iter().map(|x| format!("{x:.6}")).collect();
            format!("({})", parts.join(", "))
        };
        let mut s = String::new();
        let _ = writeln!(s, "{:>4}  {:<28}  {:<28}  {:>12}  {:>12}  {:>12}", "i", "q_i", "l_i", "eps_i", "eta_i", "dist");
        for (i, q) in self.q.iter().enumerate() {
            let (l, e) = if i == 0 {
                ("-".to_string(), "-".to_string())
            } else {
                (fmt_v(&self.l[i - 1]), format!("{:.6e}", self.eps[i - 1]))
            };
            let _ = writeln!(
                s,
                "{:>4}  {:<28}  {:<28}  {:>12}  {:>12.6e}  {:>12.6}",
                i,
                fmt_v(q),
                l,
                e,
                self.eta[i],
                linalg::dist(q, &self.target.center)
            );
        }
        s
    }
}

/// A sampled pair violating containment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub state: Vec<f64>,
    pub mark: Vec<f64>,
    pub image: Vec<f64>,
    /// `‖image − qᵢ‖`, which is ≥ ηᵢ.
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepCheck {
    /// Step index i (the jump `qᵢ₋₁ → qᵢ`).
    pub index: usize,
    pub violations: usize,
    pub witness: Option<Witness>,
    /// `ηᵢ − ‖defect‖ − (ηᵢ₋₁(1 + Lip_x) + εᵢ·Lip_z)`; non-negative passes.
    pub deterministic_margin: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub structural: Result<(), String>,
    pub samples: usize,
    pub steps: Vec<StepCheck>,
    pub sampled_passed: bool,
    /// `None` when the model declares no Lipschitz bounds.
    pub deterministic_passed: Option<bool>,
    pub passed: bool,
}

/// Checks every step `B(qᵢ₋₁, ηᵢ₋₁) + σ(·, B(lᵢ, εᵢ)) ⊆ B(qᵢ, ηᵢ)`: by
/// sampling `samples` pairs per step and, when Lipschitz moduli are declared,
/// by the bound `ηᵢ₋₁(1 + Lip_x) + εᵢ·Lip_z ≤ ηᵢ − ‖defect‖`.
pub fn verify_certificate<R: Rng + ?Sized>(
    cert: &JumpChainCertificate,
    model: &ModelSpec,
    samples: usize,
    rng: &mut R,
) -> VerificationReport {
    let structural = cert.validate(model).map_err(|e| e.to_string());
    if structural.is_err() {
        return VerificationReport {
            structural,
            samples,
            steps: vec![],
            sampled_passed: false,
            deterministic_passed: None,
            passed: false,
        };
    }
    let seed: u64 = rng.random();
    let steps: Vec<StepCheck> = (1..=cert.len())
        .into_par_iter()
        .map(|i| check_step(cert, model, i, samples, derive_seed(seed, i as u64)))
        .collect();
    let sampled_passed = steps.iter().all(|s| s.violations == 0);
    let deterministic_passed = model
        .lipschitz
        .map(|_| steps.iter().all(|s| s.deterministic_margin.is_some_and(|m| m >= 0.0)));
    VerificationReport {
        structural,
        samples,
        passed: sampled_passed && deterministic_passed.unwrap_or(true),
        steps,
        sampled_passed,
        deterministic_passed,
    }
}

fn check_step(cert: &JumpChainCertificate, model: &ModelSpec, i: usize, samples: usize, seed: u64) -> StepCheck {
    let (q0, q1, l, e) = (&cert.q[i - 1], &cert.q[i], &cert.l[i - 1], cert.eps[i - 1]);
    let (eta0, eta1) = (cert.eta[i - 1], cert.eta[i]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    let mut witness = None;
    for _ in 0..samples {
        let x = uniform_in_ball(q0, eta0, &mut rng);
        let z = uniform_in_ball(l, e, &mut rng);
        let image = model.jump_map(&x, &z);
        let distance = linalg::dist(&image, q1);
        if !(distance < eta1) {
            violations += 1;
            if witness.is_none() {
                witness = Some(Witness {
                    state: x,
                    mark: z,
                    image,
                    distance,
                });
            }
        }
    }
    let deterministic_margin = model.lipschitz.map(|lip| {
        let defect = linalg::dist(&model.jump_map(q0, l), q1);
        let lx = lip.state + lip.state_per_mark * (linalg::norm(l) + e);
        (eta1 - defect) - (eta0 * (1.0 + lx) + e * lip.mark)
    });
    StepCheck {
        index: i,
        violations,
        witness,
        deterministic_margin,
    }
}
