//! Monte Carlo estimators with exact binomial intervals.
//!
//! Trial `i` of an experiment with master seed `s` draws all of its
//! randomness from [`trial_rng`]`(s, i)`, so results do not depend on the
//! number of workers. Success counts are reduced in integer arithmetic.

mod interval;
mod oracle;

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use interval::{clopper_pearson, suggest_trials};
pub use oracle::{exact_cp_hitting_oracle, poisson_tail, OracleValue};

use crate::levy::{NoiseError, NoiseSampler, SmallJumpMode, DEFAULT_CUTOFF};
use crate::linalg;
use crate::measures::IntensityMeasure;
use crate::rng::{trial_rng, uniform_in_ball};
use crate::sde::{Compensation, Integrator, JumpCoefficient, ModelSpec, Observer, SdeError, Truncation};

/// Default confidence of reported intervals.
pub const DEFAULT_CONFIDENCE: f64 = 0.99;
/// Largest tolerated fraction of divergent paths.
pub const MAX_DIVERGENT_FRACTION: f64 = 0.01;
/// Relative slack granted to the e-property bound for scheme error.
pub const E_PROPERTY_SLACK: f64 = 0.05;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum McError {
    #[error("{divergent} of {trials} paths diverged (more than 1%)")]
    Divergent { divergent: u64, trials: u64 },
    #[error("truncation {truncation} leaves a tail of {tail_bound:e} > requested accuracy {accuracy:e}")]
    TruncationTooSmall {
        truncation: u32,
        tail_bound: f64,
        accuracy: f64,
    },
    #[error("not applicable: {0}")]
    NotApplicable(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    Sde(#[from] SdeError),
}

/// Numerical knobs shared by the estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McOptions {
    pub trials: u64,
    pub dt: f64,
    pub cutoff: f64,
    pub small_jump_mode: SmallJumpMode,
    pub confidence: f64,
    pub seed: u64,
}

impl Default for McOptions {
    fn default() -> Self {
        McOptions {
            trials: 10_000,
            dt: 1e-2,
            cutoff: DEFAULT_CUTOFF,
            small_jump_mode: SmallJumpMode::DropWithCompensator,
            confidence: DEFAULT_CONFIDENCE,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate {
    pub trials: u64,
    pub successes: u64,
    /// Paths that diverged; counted in `trials`, never as successes.
    pub divergent: u64,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub confidence: f64,
    pub seed: u64,
    pub runtime_secs: f64,
}

impl MCEstimate {
    pub fn new(successes: u64, trials: u64, divergent: u64, confidence: f64, seed: u64, runtime_secs: f64) -> Self {
        let (lower, upper) = clopper_pearson(successes, trials, confidence);
        MCEstimate {
            trials,
            successes,
            divergent,
            estimate: successes as f64 / trials as f64,
            lower,
            upper,
            confidence,
            seed,
            runtime_secs,
        }
    }

    /// Standard error `√(p(1 − p)/n)` at probability `p`.
    pub fn standard_error_at(&self, p: f64) -> f64 {
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }

    pub fn overlaps(&self, other: &MCEstimate) -> bool {
        self.lower <= other.upper && other.lower <= self.upper
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Hit,
    Miss,
    Diverged,
}

fn check_options(opts: &McOptions) -> Result<(), McError> {
    if opts.trials == 0 {
        return Err(McError::Invalid("need at least one trial".into()));
    }
    if !(opts.confidence > 0.0 && opts.confidence < 1.0) {
        return Err(McError::Invalid(format!("confidence {} outside (0, 1)", opts.confidence)));
    }
    Ok(())
}

/// Runs `trial` for every index in parallel and counts the outcomes.
fn count<F>(opts: &McOptions, trial: F) -> Result<MCEstimate, McError>
where
    F: Fn(u64) -> Result<Outcome, McError> + Sync + Send,
{
    check_options(opts)?;
    let start = Instant::now();
    let (hits, divergent) = (0..opts.trials)
        .into_par_iter()
        .map(|i| {
            trial(i).map(|o| match o {
                Outcome::Hit => (1u64, 0u64),
                Outcome::Miss => (0, 0),
                Outcome::Diverged => (0, 1),
            })
        })
        .try_reduce(|| (0, 0), |a, b| Ok((a.0 + b.0, a.1 + b.1)))?;
    if divergent as f64 > MAX_DIVERGENT_FRACTION * opts.trials as f64 {
        return Err(McError::Divergent {
            divergent,
            trials: opts.trials,
        });
    }
    Ok(MCEstimate::new(
        hits,
        opts.trials,
        divergent,
        opts.confidence,
        opts.seed,
        start.elapsed().as_secs_f64(),
    ))
}

fn check_dim(model: &ModelSpec, v: &[f64]) -> Result<(), McError> {
    if v.len() != model.dim {
        return Err(SdeError::Dimension {
            model: model.dim,
            got: v.len(),
        }
        .into());
    }
    Ok(())
}

/// Fraction of paths with `‖X(T) − y‖ < radius` at the terminal skeleton
/// state.
pub fn estimate_hitting(
    model: &ModelSpec,
    x0: &[f64],
    horizon: f64,
    center: &[f64],
    radius: f64,
    opts: &McOptions,
) -> Result<MCEstimate, McError> {
    check_dim(model, x0)?;
    check_dim(model, center)?;
    let sampler = NoiseSampler::new(&model.measure, opts.cutoff, opts.small_jump_mode)?;
    let integ = Integrator::new(model, opts.dt, opts.cutoff, Truncation::Full)?;
    count(opts, |i| {
        let mut rng = trial_rng(opts.seed, i);
        let noise = sampler.sample(horizon, &mut rng)?;
        match integ.terminal(x0, &noise) {
            Ok(x) if linalg::dist(&x, center) < radius => Ok(Outcome::Hit),
            Ok(_) => Ok(Outcome::Miss),
            Err(SdeError::Divergence { .. }) => Ok(Outcome::Diverged),
            Err(e) => Err(e.into()),
        }
    })
}

/// Hit counts for several radii around one centre on common paths
/// (`counts[j]` counts terminal states with distance below `radii[j]`).
pub fn estimate_hitting_nested(
    model: &ModelSpec,
    x0: &[f64],
    horizon: f64,
    center: &[f64],
    radii: &[f64],
    opts: &McOptions,
) -> Result<Vec<MCEstimate>, McError> {
    check_dim(model, x0)?;
    check_dim(model, center)?;
    check_options(opts)?;
    let start = Instant::now();
    let sampler = NoiseSampler::new(&model.measure, opts.cutoff, opts.small_jump_mode)?;
    let integ = Integrator::new(model, opts.dt, opts.cutoff, Truncation::Full)?;
    let k = radii.len();
    let (hits, divergent) = (0..opts.trials)
        .into_par_iter()
        .map(|i| -> Result<(Vec<u64>, u64), McError> {
            let mut rng = trial_rng(opts.seed, i);
            let noise = sampler.sample(horizon, &mut rng)?;
            match integ.terminal(x0, &noise) {
                Ok(x) => {
                    let d = linalg::dist(&x, center);
                    Ok((radii.iter().map(|r| (d < *r) as u64).collect(), 0))
                }
                Err(SdeError::Divergence { .. }) => Ok((vec![0; k], 1)),
                Err(e) => Err(e.into()),
            }
        })
        .try_reduce(
            || (vec![0; k], 0),
            |mut a, b| {
                a.0.iter_mut().zip(&b.0).for_each(|(x, y)| *x += y);
                Ok((a.0, a.1 + b.1))
            },
        )?;
    if divergent as f64 > MAX_DIVERGENT_FRACTION * opts.trials as f64 {
        return Err(McError::Divergent {
            divergent,
            trials: opts.trials,
        });
    }
    let secs = start.elapsed().as_secs_f64();
    Ok(hits
        .into_iter()
        .map(|h| MCEstimate::new(h, opts.trials, divergent, opts.confidence, opts.seed, secs))
        .collect())
}

/// Stops the run at the first skeleton state outside `B(center, radius)`.
struct ExitWatch<'a> {
    center: &'a [f64],
    radius: f64,
    exited: bool,
}

impl ExitWatch<'_> {
    fn see(&mut self, x: &[f64]) -> bool {
        if linalg::dist(x, self.center) >= self.radius {
            self.exited = true;
        }
        !self.exited
    }
}

impl Observer for ExitWatch<'_> {
    fn start(&mut self, x0: &[f64]) {
        self.see(x0);
    }
    fn step(&mut self, _t: f64, x: &[f64], _comp: &[f64]) -> bool {
        self.see(x)
    }
    fn jump(&mut self, _t: f64, _pre: &[f64], _mark: &[f64], post: &[f64]) -> bool {
        self.see(post)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StayEstimate {
    /// Probe with the smallest point estimate (first on ties).
    pub worst: MCEstimate,
    pub worst_start: Vec<f64>,
    pub probes: Vec<(Vec<f64>, MCEstimate)>,
}

/// `inf` over probe starts `h̃ ∈ B(h, ε)` of `P(τ ≥ t)`, τ the first skeleton
/// time outside `B(h, η)`. Probes: the centre, the axis extremes `h ± εeᵢ`,
/// then uniform points, `n_initials` in total; each probe runs
/// `opts.trials` paths.
pub fn estimate_stay_in_ball(
    model: &ModelSpec,
    h: &[f64],
    eta: f64,
    t: f64,
    probe_radius: f64,
    n_initials: usize,
    opts: &McOptions,
) -> Result<StayEstimate, McError> {
    check_dim(model, h)?;
    if !(probe_radius <= eta / 2.0) {
        return Err(McError::Invalid(format!("probe radius {probe_radius} exceeds η/2 = {}", eta / 2.0)));
    }
    let d = model.dim;
    let mut starts = vec![h.to_vec()];
    for i in 0..d {
        for s in [1.0, -1.0] {
            starts.push(linalg::add(h, &linalg::scale(&linalg::unit(d, i), s * probe_radius)));
        }
    }
    starts.truncate(n_initials.max(1));
    let mut rng = trial_rng(crate::rng::derive_seed(opts.seed, 0x5157), 0);
    while starts.len() < n_initials {
        starts.push(uniform_in_ball(h, probe_radius, &mut rng));
    }
    let sampler = NoiseSampler::new(&model.measure, opts.cutoff, opts.small_jump_mode)?;
    let integ = Integrator::new(model, opts.dt, opts.cutoff, Truncation::Full)?;
    let mut probes = Vec::with_capacity(starts.len());
    for x0 in starts {
        let est = count(opts, |i| {
            let mut rng = trial_rng(opts.seed, i);
            let noise = sampler.sample(t, &mut rng)?;
            let mut watch = ExitWatch {
                center: h,
                radius: eta,
                exited: false,
            };
            match integ.run(&x0, &noise, &mut watch) {
                Ok(_) if watch.exited => Ok(Outcome::Miss),
                Ok(_) => Ok(Outcome::Hit),
                Err(SdeError::Divergence { .. }) => Ok(Outcome::Diverged),
                Err(e) => Err(e.into()),
            }
        })?;
        probes.push((x0, est));
    }
    let (worst_start, worst) = probes
        .iter()
        .fold(None::<&(Vec<f64>, MCEstimate)>, |acc, p| match acc {
            Some(a) if a.1.estimate <= p.1.estimate => Some(a),
            _ => Some(p),
        })
        .cloned()
        .expect("at least one probe");
    Ok(StayEstimate {
        worst,
        worst_start,
        probes,
    })
}

/// The additive model `dX = dL` with `A ≡ 0`: finite-activity measures enter
/// uncompensated (`L` is the compound Poisson sum), others compensated.
pub fn levy_model(measure: &IntensityMeasure) -> ModelSpec {
    let comp = if measure.is_finite_activity() {
        Compensation::Raw
    } else {
        Compensation::Compensated
    };
    ModelSpec::new(
        "levy",
        Arc::new(|_: &[f64], out: &mut [f64]| out.fill(0.0)),
        JumpCoefficient::Additive,
        measure.clone(),
    )
    .with_compensation(comp)
}

/// Fraction of realizations with `L(s) ∈ B(h, ε)`, with `L` as in
/// [`levy_model`] started at 0.
pub fn estimate_levy_support(
    measure: &IntensityMeasure,
    s: f64,
    h: &[f64],
    eps: f64,
    opts: &McOptions,
) -> Result<MCEstimate, McError> {
    let model = levy_model(measure);
    let mut o = *opts;
    if s > 0.0 {
        // A ≡ 0: the step only matters for the small-jump compensator.
        o.dt = o.dt.min(s);
    }
    estimate_hitting(&model, &vec![0.0; measure.dim()], s, h, eps, &o)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EPropertyReport {
    pub trials: u64,
    /// Sample mean of `‖X^x(T) − X^y(T)‖²` over common-noise pairs.
    pub mean: f64,
    pub standard_error: f64,
    /// `‖x − y‖²`.
    pub bound: f64,
    /// `bound·(1 + slack) − mean`.
    pub margin: f64,
    /// Three standard errors, reported alongside the margin.
    pub tolerance: f64,
    pub passed: bool,
    pub divergent: u64,
    pub seed: u64,
}

/// Compares `E‖X^x(T) − X^y(T)‖²` with `‖x − y‖²` using paired paths that
/// share one noise realization per trial. Passes iff the sample mean is at
/// most `‖x − y‖²·(1 + 0.05)`.
pub fn check_e_property(
    model: &ModelSpec,
    x: &[f64],
    y: &[f64],
    horizon: f64,
    opts: &McOptions,
) -> Result<EPropertyReport, McError> {
    check_dim(model, x)?;
    check_dim(model, y)?;
    check_options(opts)?;
    if !(model.tags.monotone_drift && model.tags.additive) {
        return Err(McError::NotApplicable(format!(
            "model `{}` is not tagged monotone and additive",
            model.name
        )));
    }
    let sampler = NoiseSampler::new(&model.measure, opts.cutoff, opts.small_jump_mode)?;
    let integ = Integrator::new(model, opts.dt, opts.cutoff, Truncation::Full)?;
    let per_trial: Vec<Option<f64>> = (0..opts.trials)
        .into_par_iter()
        .map(|i| -> Result<Option<f64>, McError> {
            let mut rng = trial_rng(opts.seed, i);
            let noise = sampler.sample(horizon, &mut rng)?;
            match (integ.terminal(x, &noise), integ.terminal(y, &noise)) {
                (Ok(a), Ok(b)) => Ok(Some(linalg::dist(&a, &b).powi(2))),
                (Err(SdeError::Divergence { .. }), _) | (_, Err(SdeError::Divergence { .. })) => Ok(None),
                (Err(e), _) | (_, Err(e)) => Err(e.into()),
            }
        })
        .collect::<Result<_, _>>()?;
    let divergent = per_trial.iter().filter(|v| v.is_none()).count() as u64;
    if divergent as f64 > MAX_DIVERGENT_FRACTION * opts.trials as f64 {
        return Err(McError::Divergent {
            divergent,
            trials: opts.trials,
        });
    }
    // sequential sums keep the result independent of the worker count
    let vals: Vec<f64> = per_trial.into_iter().flatten().collect();
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = if n > 1.0 {
        vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let standard_error = (var / n).sqrt();
    let bound = linalg::dist(x, y).powi(2);
    let margin = bound * (1.0 + E_PROPERTY_SLACK) - mean;
    Ok(EPropertyReport {
        trials: opts.trials,
        mean,
        standard_error,
        bound,
        margin,
        tolerance: 3.0 * standard_error,
        passed: margin >= 0.0,
        divergent,
        seed: opts.seed,
    })
}
