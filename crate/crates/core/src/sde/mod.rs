//! Jump-driven SDEs `dX = A(X)dt + ∫ σ(X, z) Ñ(dt, dz)` in ℝᵈ, integrated by
//! a jump-adapted Euler scheme.
//!
//! The time grid is the union of a uniform `dt` grid and the jump times of
//! the noise realization, so every jump is applied exactly:
//! `post = pre + σ(pre, mark)`. Between events the state follows explicit
//! Euler with the drift `A(x)` plus the small-jump compensator.

mod path;
pub mod zoo;

pub use path::{exit_time, first_jump_time, AppliedJump, PathRecord};

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::levy::{NoiseRealization, SmallJumpMode};
use crate::linalg;
use crate::measures::{symmetric_sum, BaseProcess, IntensityMeasure, MeasureError, MeasureKind};

/// States with norm beyond this abort integration.
pub const DIVERGENCE_NORM: f64 = 1e12;

pub type DriftFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
/// `x ↦ M(x)`, written row-major into the output slice.
pub type MatrixFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
/// `(x, i) ↦ σᵢ(x)`.
pub type ScalarFn = Arc<dyn Fn(&[f64], usize) -> f64 + Send + Sync>;
/// `(x, z, out) ↦ out = σ(x, z)`.
pub type JumpFn = Arc<dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SdeError {
    #[error("path diverged at t = {time} (state norm above {DIVERGENCE_NORM:e} or non-finite)")]
    Divergence { time: f64 },
    #[error("step size must be positive and finite, got {0}")]
    BadStep(f64),
    #[error("dimension mismatch: model has d = {model}, got {got}")]
    Dimension { model: usize, got: usize },
    #[error("{0}")]
    Unsupported(String),
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

/// Jump coefficient σ(x, z).
#[derive(Clone)]
pub enum JumpCoefficient {
    Zero,
    /// σ(x, z) = z
    Additive,
    /// σ(x, z) = M(x) z
    Matrix(MatrixFn),
    /// σ(x, z)ᵢ = σᵢ(x) zᵢ
    Coordinatewise(ScalarFn),
    General(JumpFn),
}

impl fmt::Debug for JumpCoefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            JumpCoefficient::Zero => "Zero",
            JumpCoefficient::Additive => "Additive",
            JumpCoefficient::Matrix(_) => "Matrix",
            JumpCoefficient::Coordinatewise(_) => "Coordinatewise",
            JumpCoefficient::General(_) => "General",
        })
    }
}

impl JumpCoefficient {
    /// out = σ(x, z)
    pub fn apply(&self, x: &[f64], z: &[f64], out: &mut [f64]) {
        match self {
            JumpCoefficient::Zero => out.fill(0.0),
            JumpCoefficient::Additive => out.copy_from_slice(z),
            JumpCoefficient::Matrix(m) => {
                let d = x.len();
                let mut buf = vec![0.0; d * d];
                m(x, &mut buf);
                linalg::mat_vec(&buf, z, out);
            }
            JumpCoefficient::Coordinatewise(s) => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = s(x, i) * z[i];
                }
            }
            JumpCoefficient::General(g) => g(x, z, out),
        }
    }

    /// The linear map `z ↦ σ(x, z)` as a row-major matrix, when σ is linear
    /// in z.
    pub fn matrix(&self, x: &[f64]) -> Option<Vec<f64>> {
        let d = x.len();
        let mut m = vec![0.0; d * d];
        match self {
            JumpCoefficient::Zero => {}
            JumpCoefficient::Additive => (0..d).for_each(|i| m[i * d + i] = 1.0),
            JumpCoefficient::Matrix(f) => f(x, &mut m),
            JumpCoefficient::Coordinatewise(s) => (0..d).for_each(|i| m[i * d + i] = s(x, i)),
            JumpCoefficient::General(_) => return None,
        }
        Some(m)
    }
}

/// How the noise is compensated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Compensation {
    /// Jumps in the unit ball enter compensated; integration adds
    /// `−∫_{δ<‖z‖≤1} σ(x, z) ν(dz)` to the drift.
    #[default]
    Compensated,
    /// `L = ∫ z N(dt, dz)` with no compensator (finite-activity noise only).
    Raw,
}

/// Moduli for `‖σ(x,z) − σ(x',z')‖ ≤ (state + state_per_mark·‖z‖)‖x − x'‖ + mark·‖z − z'‖`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzBounds {
    pub state: f64,
    pub state_per_mark: f64,
    pub mark: f64,
}

/// A frame `f₁..f_n` of unit vectors with constants `κ ∈ (0, 1]` and `Λ ≥ 1`:
/// every unit direction has inner product ≥ κ with some pushed-forward
/// `σ(x)fᵢ/|σ(x)fᵢ|`, and `Λ⁻¹|ξ| ≤ |σ(x)ξ| ≤ Λ|ξ|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameSpec {
    pub vectors: Vec<Vec<f64>>,
    pub kappa: f64,
    pub lambda: f64,
}

/// Declared structural properties.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelTags {
    pub additive: bool,
    pub monotone_drift: bool,
    pub one_sided: bool,
    pub frame: Option<FrameSpec>,
    /// Free-form remarks (e.g. which coercivity/growth conditions hold).
    pub notes: Vec<String>,
}

#[derive(Clone)]
pub struct ModelSpec {
    pub name: String,
    pub dim: usize,
    pub drift: DriftFn,
    pub jump: JumpCoefficient,
    pub measure: IntensityMeasure,
    pub compensation: Compensation,
    pub lipschitz: Option<LipschitzBounds>,
    pub tags: ModelTags,
}

impl fmt::Debug for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelSpec")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("jump", &self.jump)
            .field("measure", &self.measure)
            .field("compensation", &self.compensation)
            .field("lipschitz", &self.lipschitz)
            .field("tags", &self.tags)
            .finish()
    }
}

impl ModelSpec {
    pub fn new(
        name: impl Into<String>,
        drift: DriftFn,
        jump: JumpCoefficient,
        measure: IntensityMeasure,
    ) -> Self {
        let dim = measure.dim();
        let additive = matches!(jump, JumpCoefficient::Additive);
        ModelSpec {
            name: name.into(),
            dim,
            drift,
            jump,
            measure,
            compensation: Compensation::Compensated,
            lipschitz: additive.then_some(LipschitzBounds {
                state: 0.0,
                state_per_mark: 0.0,
                mark: 1.0,
            }),
            tags: ModelTags {
                additive,
                ..Default::default()
            },
        }
    }

    pub fn with_compensation(mut self, c: Compensation) -> Self {
        self.compensation = c;
        self
    }

    pub fn with_lipschitz(mut self, l: LipschitzBounds) -> Self {
        self.lipschitz = Some(l);
        self
    }

    pub fn with_tags(mut self, tags: ModelTags) -> Self {
        self.tags = tags;
        self
    }

    pub fn drift_at(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        (self.drift)(x, &mut out);
        out
    }

    pub fn sigma(&self, x: &[f64], z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.jump.apply(x, z, &mut out);
        out
    }

    /// `x + σ(x, z)`.
    pub fn jump_map(&self, x: &[f64], z: &[f64]) -> Vec<f64> {
        linalg::add(x, &self.sigma(x, z))
    }

    /// `∫_{lo<‖z‖≤1} σ(x, z) ν(dz)` (zero under [`Compensation::Raw`]).
    pub fn compensator(&self, x: &[f64], lo: f64) -> Result<Vec<f64>, SdeError> {
        let c = Compensator::new(self, lo)?;
        let mut out = vec![0.0; self.dim];
        c.eval(self, x, &mut out);
        Ok(out.into_iter().map(|v| -v).collect())
    }

    /// Spot-checks the declared additive tag and Lipschitz bounds on random
    /// `(x, z)` pairs; returns a description of the first violation.
    pub fn validate_declared<R: Rng + ?Sized>(&self, samples: usize, rng: &mut R) -> Result<(), String> {
        let d = self.dim;
        let draw = |rng: &mut R, s: f64| -> Vec<f64> {
            (0..d).map(|_| s * (2.0 * rng.random::<f64>() - 1.0)).collect()
        };
        for _ in 0..samples {
            let x = draw(rng, 3.0);
            let z = draw(rng, 1.5);
            if self.tags.additive && self.sigma(&x, &z) != z {
                return Err(format!("σ({x:?}, {z:?}) ≠ z although the model is tagged additive"));
            }
            if let Some(l) = self.lipschitz {
                let x2 = linalg::add(&x, &draw(rng, 0.1));
                let z2 = linalg::add(&z, &draw(rng, 0.1));
                let lhs = linalg::dist(&self.sigma(&x, &z), &self.sigma(&x2, &z2));
                let rhs = (l.state + l.state_per_mark * linalg::norm(&z).max(linalg::norm(&z2)))
                    * linalg::dist(&x, &x2)
                    + l.mark * linalg::dist(&z, &z2);
                if lhs > rhs * (1.0 + 1e-9) + 1e-12 {
                    return Err(format!(
                        "Lipschitz bound violated at x = {x:?}, z = {z:?}: {lhs} > {rhs}"
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Precomputed small-jump compensator `∫_{lo<‖z‖≤1} σ(x, z) ν(dz)`.
#[derive(Debug, Clone)]
enum Compensator {
    None,
    /// σ linear in z: the integral is `σ(x, m)` with m the first moment.
    Linear(Vec<f64>),
    Nodes(Vec<(Vec<f64>, f64)>),
}

impl Compensator {
    fn new(model: &ModelSpec, lo: f64) -> Result<Self, SdeError> {
        let embedded = matches!(
            model.measure.kind(),
            MeasureKind::Subordinated {
                base: BaseProcess::Product { .. },
                ..
            }
        );
        if model.compensation == Compensation::Raw
            || lo >= 1.0
            || embedded
            || matches!(model.jump, JumpCoefficient::Zero)
        {
            return Ok(Compensator::None);
        }
        Ok(match model.jump {
            JumpCoefficient::General(_) => Compensator::Nodes(model.measure.discretize(lo, 1.0)?),
            _ => {
                let m = model.measure.first_moment(lo, 1.0)?;
                if m.iter().all(|v| *v == 0.0) {
                    Compensator::None
                } else {
                    Compensator::Linear(m)
                }
            }
        })
    }

    /// out = ∫ σ(x, z) ν(dz) over the compensated annulus.
    fn eval(&self, model: &ModelSpec, x: &[f64], out: &mut [f64]) {
        match self {
            Compensator::None => out.fill(0.0),
            Compensator::Linear(m) => model.jump.apply(x, m, out),
            Compensator::Nodes(nodes) => {
                let mut terms: Vec<Vec<f64>> = vec![Vec::with_capacity(nodes.len()); x.len()];
                let mut buf = vec![0.0; x.len()];
                for (z, w) in nodes {
                    model.jump.apply(x, z, &mut buf);
                    for (t, v) in terms.iter_mut().zip(&buf) {
                        t.push(w * v);
                    }
                }
                for (o, t) in out.iter_mut().zip(terms.iter_mut()) {
                    *o = symmetric_sum(t);
                }
            }
        }
    }
}

/// Receives integration events; returning `false` stops the run early.
pub trait Observer {
    fn start(&mut self, _x0: &[f64]) {}
    /// State after the Euler step ending at `t` (before any jump at `t`);
    /// `comp` is that step's compensator increment `−h·∫σν`.
    fn step(&mut self, _t: f64, _x: &[f64], _comp: &[f64]) -> bool {
        true
    }
    fn jump(&mut self, _t: f64, _pre: &[f64], _mark: &[f64], _post: &[f64]) -> bool {
        true
    }
    /// A jump at `t` removed by truncation.
    fn removed(&mut self, _t: f64, _mark: &[f64]) {}
}

/// Observer that keeps nothing (the caller reads the returned final state).
pub struct Terminal;
impl Observer for Terminal {}

/// Which jumps to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Truncation {
    Full,
    /// Drop jumps with mark in `Z_m = {‖z‖ > 1/m}`.
    Drop(u32),
}

/// Reusable integrator for one (model, scheme) pair. Preparing the
/// compensator once lets Monte Carlo loops avoid per-path setup.
pub struct Integrator<'a> {
    model: &'a ModelSpec,
    dt: f64,
    truncation: Truncation,
    compensator: Compensator,
    cutoff: f64,
}

impl<'a> Integrator<'a> {
    /// `cutoff` must match the noise realizations that will be fed in.
    pub fn new(model: &'a ModelSpec, dt: f64, cutoff: f64, truncation: Truncation) -> Result<Self, SdeError> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(SdeError::BadStep(dt));
        }
        let lo = match truncation {
            Truncation::Full => cutoff,
            Truncation::Drop(m) => {
                if m == 0 {
                    return Err(SdeError::Unsupported("truncation index must be ≥ 1".into()));
                }
                cutoff.min(1.0 / m as f64)
            }
        };
        Ok(Integrator {
            model,
            dt,
            truncation,
            compensator: Compensator::new(model, lo)?,
            cutoff,
        })
    }

    /// Integrates over the noise horizon, reporting events to `obs`;
    /// returns the final time and state.
    pub fn run<O: Observer>(
        &self,
        x0: &[f64],
        noise: &NoiseRealization,
        obs: &mut O,
    ) -> Result<(f64, Vec<f64>), SdeError> {
        let model = self.model;
        let d = model.dim;
        if x0.len() != d {
            return Err(SdeError::Dimension { model: d, got: x0.len() });
        }
        if noise.dim != d {
            return Err(SdeError::Dimension { model: d, got: noise.dim });
        }
        if noise.cutoff != self.cutoff {
            return Err(SdeError::Unsupported(format!(
                "noise cutoff {} differs from the integrator's {}",
                noise.cutoff, self.cutoff
            )));
        }
        if noise.small_jump_mode == SmallJumpMode::GaussianApproximation
            && model.compensation == Compensation::Raw
        {
            return Err(SdeError::Unsupported(
                "the Gaussian small-jump approximation needs compensated noise".into(),
            ));
        }
        let horizon = noise.horizon;
        let mut x = x0.to_vec();
        obs.start(&x);
        if horizon <= 0.0 {
            return Ok((0.0, x));
        }
        let steps = (horizon / self.dt).ceil().max(1.0) as usize;
        let grid = |k: usize| if k >= steps { horizon } else { (k as f64 * self.dt).min(horizon) };
        let diffusion = noise.diffusion.as_ref().map(|dfn| {
            (
                psd_sqrt(&dfn.covariance, d),
                ChaCha8Rng::seed_from_u64(dfn.seed),
            )
        });
        let mut diffusion = diffusion;
        let extra_drift = (!noise.drift.is_empty()).then_some(&noise.drift);

        let mut a = vec![0.0; d];
        let mut c = vec![0.0; d];
        let mut buf = vec![0.0; d];
        let mut comp_inc = vec![0.0; d];
        let mut xi = vec![0.0; d];
        let mut t = 0.0;
        let mut k = 1;
        let mut j = 0;
        let jumps = &noise.big_jumps;
        let threshold = match self.truncation {
            Truncation::Full => f64::INFINITY,
            Truncation::Drop(m) => 1.0 / m as f64,
        };
        while t < horizon {
            let tg = grid(k);
            let tj = jumps.get(j).map_or(f64::INFINITY, |jp| jp.time);
            let t_next = tg.min(tj);
            let h = t_next - t;
            (model.drift)(&x, &mut a);
            self.compensator.eval(model, &x, &mut c);
            for i in 0..d {
                comp_inc[i] = -h * c[i];
            }
            if let Some(e) = extra_drift {
                for (bi, ei) in buf.iter_mut().zip(e) {
                    *bi = h * ei;
                }
                let mut s = vec![0.0; d];
                model.jump.apply(&x, &buf, &mut s);
                for (ci, si) in comp_inc.iter_mut().zip(&s) {
                    *ci += si;
                }
            }
            if let Some((root, rng)) = diffusion.as_mut() {
                let sh = h.sqrt();
                for v in xi.iter_mut() {
                    let g: f64 = StandardNormal.sample(rng);
                    *v = g * sh;
                }
                linalg::mat_vec(root, &xi, &mut buf);
                let mut s = vec![0.0; d];
                model.jump.apply(&x, &buf, &mut s);
                for (ci, si) in comp_inc.iter_mut().zip(&s) {
                    *ci += si;
                }
            }
            for i in 0..d {
                x[i] += h * a[i] + comp_inc[i];
            }
            t = t_next;
            if tg <= t_next {
                k += 1;
            }
            check(&x, t)?;
            if !obs.step(t, &x, &comp_inc) {
                return Ok((t, x));
            }
            while j < jumps.len() && jumps[j].time <= t {
                let jp = &jumps[j];
                j += 1;
                if linalg::norm(&jp.mark) > threshold {
                    obs.removed(t, &jp.mark);
                    continue;
                }
                model.jump.apply(&x, &jp.mark, &mut buf);
                let pre = x.clone();
                for i in 0..d {
                    x[i] += buf[i];
                }
                check(&x, t)?;
                if !obs.jump(t, &pre, &jp.mark, &x) {
                    return Ok((t, x));
                }
            }
        }
        Ok((t, x))
    }

    pub fn terminal(&self, x0: &[f64], noise: &NoiseRealization) -> Result<Vec<f64>, SdeError> {
        self.run(x0, noise, &mut Terminal).map(|r| r.1)
    }

    pub fn record(&self, x0: &[f64], noise: &NoiseRealization) -> Result<PathRecord, SdeError> {
        let mut rec = PathRecord::new(x0, noise, self.dt, match self.truncation {
            Truncation::Full => None,
            Truncation::Drop(m) => Some(m),
        });
        self.run(x0, noise, &mut rec)?;
        Ok(rec)
    }
}

fn check(x: &[f64], time: f64) -> Result<(), SdeError> {
    let n = linalg::norm(x);
    if n.is_finite() && n <= DIVERGENCE_NORM {
        Ok(())
    } else {
        Err(SdeError::Divergence { time })
    }
}

/// Symmetric square root of a PSD matrix (row-major), clipping tiny negative
/// eigenvalues.
fn psd_sqrt(cov: &[f64], d: usize) -> Vec<f64> {
    let m = DMatrix::from_row_slice(d, d, cov);
    let eig = SymmetricEigen::new(m);
    let vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    let root = &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose();
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            out[i * d + j] = root[(i, j)];
        }
    }
    out
}

/// Full path of the equation on the noise horizon.
pub fn integrate(
    model: &ModelSpec,
    x0: &[f64],
    noise: &NoiseRealization,
    dt: f64,
) -> Result<PathRecord, SdeError> {
    Integrator::new(model, dt, noise.cutoff, Truncation::Full)?.record(x0, noise)
}

/// Path of the truncated equation: jumps with mark in `Z_m` are removed (their
/// times stay on the grid) and the compensator of `Z_m ∖ Z₁` stays in the
/// drift.
pub fn integrate_truncated(
    model: &ModelSpec,
    x0: &[f64],
    noise: &NoiseRealization,
    dt: f64,
    m: u32,
) -> Result<PathRecord, SdeError> {
    Integrator::new(model, dt, noise.cutoff, Truncation::Drop(m))?.record(x0, noise)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::sample_noise_seeded;

    fn linear(theta: f64) -> DriftFn {
        Arc::new(move |x: &[f64], out: &mut [f64]| {
            for (o, v) in out.iter_mut().zip(x) {
                *o = -theta * v;
            }
        })
    }

    fn zero_drift() -> DriftFn {
        Arc::new(|_: &[f64], out: &mut [f64]| out.fill(0.0))
    }

    #[test]
    fn exponential_decay() {
        let m = ModelSpec::new("ode", linear(1.0), JumpCoefficient::Zero, IntensityMeasure::zero(1));
        let noise = NoiseRealization::empty(1, 1.0, 1e-3, SmallJumpMode::default(), 0);
        let p = integrate(&m, &[1.0], &noise, 1e-4).unwrap();
        assert!((p.final_state()[0] - (-1f64).exp()).abs() < 1e-3);
        assert_eq!(p.times.len(), 10_001);
    }

    #[test]
    fn euler_is_first_order() {
        let m = ModelSpec::new("ode", linear(1.0), JumpCoefficient::Zero, IntensityMeasure::zero(1));
        let noise = NoiseRealization::empty(1, 1.0, 1e-3, SmallJumpMode::default(), 0);
        let errs: Vec<f64> = [1e-2, 5e-3, 2.5e-3]
            .iter()
            .map(|&dt| (integrate(&m, &[1.0], &noise, dt).unwrap().final_state()[0] - (-1f64).exp()).abs())
            .collect();
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((ratio - 2.0).abs() < 0.1, "{ratio}");
        }
    }

    #[test]
    fn additive_telescopes() {
        let meas = IntensityMeasure::atomic_1d(&[(0.7, 2.0), (-0.3, 1.0), (1.5, 0.5)]).unwrap();
        let m = ModelSpec::new("add", zero_drift(), JumpCoefficient::Additive, meas.clone());
        let noise = sample_noise_seeded(&meas, 3.0, 1e-3, SmallJumpMode::default(), 5).unwrap();
        let p = integrate(&m, &[0.25], &noise, 1e-2).unwrap();
        let comp = meas.first_moment(1e-3, 1.0).unwrap()[0];
        let expect = 0.25 + noise.mark_sum()[0] - comp * 3.0;
        assert!((p.final_state()[0] - expect).abs() < 1e-12);
        assert!((p.compensator.last().unwrap()[0] + comp * 3.0).abs() < 1e-12);
    }

    #[test]
    fn frozen_model_stays_put() {
        let meas = IntensityMeasure::atomic_1d(&[(1.0, 3.0)]).unwrap();
        let m = ModelSpec::new("frozen", zero_drift(), JumpCoefficient::Zero, meas.clone());
        let noise = sample_noise_seeded(&meas, 2.0, 1e-3, SmallJumpMode::default(), 1).unwrap();
        let p = integrate(&m, &[0.4], &noise, 0.1).unwrap();
        assert!(p.states.iter().all(|s| s == &vec![0.4]));
    }

    #[test]
    fn divergence_is_reported() {
        let blow: DriftFn = Arc::new(|x: &[f64], out: &mut [f64]| out[0] = x[0] * x[0]);
        let m = ModelSpec::new("blow", blow, JumpCoefficient::Zero, IntensityMeasure::zero(1));
        let noise = NoiseRealization::empty(1, 5.0, 1e-3, SmallJumpMode::default(), 0);
        match integrate(&m, &[1.0], &noise, 1e-2) {
            Err(SdeError::Divergence { time }) => assert!(time > 0.9 && time < 1.2, "{time}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn truncation_agrees_before_first_big_jump() {
        let meas = IntensityMeasure::atomic_1d(&[(0.4, 3.0), (-1.3, 1.0), (0.15, 4.0)]).unwrap();
        let sig: MatrixFn = Arc::new(|x: &[f64], out: &mut [f64]| out[0] = 1.0 + 0.2 * x[0].sin());
        let m = ModelSpec::new("mat", linear(0.5), JumpCoefficient::Matrix(sig), meas.clone());
        let noise = sample_noise_seeded(&meas, 4.0, 1e-3, SmallJumpMode::default(), 77).unwrap();
        for mm in [1u32, 2, 4] {
            let full = integrate(&m, &[0.3], &noise, 1e-2).unwrap();
            let tr = integrate_truncated(&m, &[0.3], &noise, 1e-2, mm).unwrap();
            let tau = first_jump_time(&noise, mm, 1).unwrap_or(f64::INFINITY);
            assert_eq!(full.times, tr.times);
            for (i, &t) in full.times.iter().enumerate() {
                if t < tau {
                    assert_eq!(full.states[i], tr.states[i]);
                }
            }
        }
    }

    #[test]
    fn gaussian_mode_adds_variance() {
        use crate::measures::{Directions, MeasureKind, Tempering};
        let meas = IntensityMeasure::new(MeasureKind::RadialPolar {
            dimension: 1,
            alpha: 1.0,
            directions: Directions::Uniform {
                total_weight: 2.0,
                grid: 2,
            },
            tempering: Tempering::Truncation { radius: 1.0 },
            cutoff: None,
        })
        .unwrap();
        let m = ModelSpec::new("add", zero_drift(), JumpCoefficient::Additive, meas.clone());
        // ∫_{|z|≤δ} z² ν = 2δ, here 0.2 per unit time
        let delta = 0.1;
        let n = 4000;
        let mut acc = 0.0;
        for s in 0..n {
            let noise = sample_noise_seeded(&meas, 1.0, delta, SmallJumpMode::GaussianApproximation, s).unwrap();
            let x = integrate(&m, &[0.0], &noise, 0.01).unwrap().final_state()[0];
            acc += (x - noise.mark_sum()[0]).powi(2);
        }
        let var = acc / n as f64;
        assert!((var - 0.2).abs() < 0.02, "{var}");
    }
}
