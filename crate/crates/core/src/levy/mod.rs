//! Noise realizations of pure-jump Lévy processes.
//!
//! A [`NoiseRealization`] holds every jump whose mark exceeds a cutoff δ,
//! together with what is needed to replay the small jumps: either nothing
//! (they are dropped and the integrator adds their compensator) or a Gaussian
//! covariance for the aggregated small jumps.

mod stable;

pub use stable::sample_stable_1d;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg;
use crate::measures::{BaseProcess, IntensityMeasure, MeasureError, MeasureKind, Region, RegionSampler};
use crate::rng::next_seed;

/// Default small-jump cutoff for infinite-activity measures.
pub const DEFAULT_CUTOFF: f64 = 1e-3;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum NoiseError {
    #[error("cutoff δ = {0} leaves infinite mass above it; use a larger cutoff")]
    InfiniteMass(f64),
    #[error("cutoff must be positive, got {0}")]
    BadCutoff(f64),
    #[error("horizon must be finite and ≥ 0, got {0}")]
    BadHorizon(f64),
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmallJumpMode {
    /// Drop marks with norm ≤ δ; the integrator compensates them in the drift.
    #[default]
    DropWithCompensator,
    /// Replace marks with norm ≤ δ by a Brownian increment with covariance
    /// `∫_{‖z‖≤δ} z zᵀ ν(dz)` per unit time (an approximation).
    GaussianApproximation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Jump {
    pub time: f64,
    pub mark: Vec<f64>,
    /// Smallest m ≥ 1 with `‖mark‖ > 1/m`.
    pub annulus: u64,
}

/// Brownian component: covariance per unit time (row-major) and the seed of
/// its increments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diffusion {
    pub covariance: Vec<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseRealization {
    pub dim: usize,
    pub horizon: f64,
    pub cutoff: f64,
    pub small_jump_mode: SmallJumpMode,
    pub seed: u64,
    /// Time-ordered jumps with marks above the cutoff.
    pub big_jumps: Vec<Jump>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diffusion: Option<Diffusion>,
    /// Additional deterministic drift per unit time (from subordinated
    /// product bases); empty means zero.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub drift: Vec<f64>,
}

/// Smallest m ≥ 1 with `norm > 1/m`, evaluated in the same floating-point
/// form as [`Region::z`].
pub fn annulus_index(norm: f64) -> u64 {
    if norm > 1.0 {
        return 1;
    }
    if norm <= 0.0 {
        return u64::MAX;
    }
    let mut m = ((1.0 / norm).floor() as u64).saturating_add(1).max(1);
    while m > 1 && norm > 1.0 / (m - 1) as f64 {
        m -= 1;
    }
    while norm <= 1.0 / m as f64 {
        m += 1;
    }
    m
}

impl NoiseRealization {
    pub fn empty(dim: usize, horizon: f64, cutoff: f64, mode: SmallJumpMode, seed: u64) -> Self {
        NoiseRealization {
            dim,
            horizon,
            cutoff,
            small_jump_mode: mode,
            seed,
            big_jumps: Vec::new(),
            diffusion: None,
            drift: Vec::new(),
        }
    }

    /// Builds a realization from explicit `(time, mark)` pairs (sorted here).
    pub fn from_jumps(dim: usize, horizon: f64, cutoff: f64, jumps: Vec<(f64, Vec<f64>)>) -> Self {
        let mut big: Vec<Jump> = jumps
            .into_iter()
            .map(|(time, mark)| Jump {
                time,
                annulus: annulus_index(linalg::norm(&mark)),
                mark,
            })
            .collect();
        big.sort_by(|a, b| a.time.total_cmp(&b.time));
        NoiseRealization {
            big_jumps: big,
            ..Self::empty(dim, horizon, cutoff, SmallJumpMode::DropWithCompensator, 0)
        }
    }

    /// Keeps only marks with norm above `cutoff` (which must not be below
    /// the current one).
    pub fn thin(&self, cutoff: f64) -> Self {
        assert!(cutoff >= self.cutoff, "thinning cannot lower the cutoff");
        NoiseRealization {
            cutoff,
            big_jumps: self
                .big_jumps
                .iter()
                .filter(|j| linalg::norm(&j.mark) > cutoff)
                .cloned()
                .collect(),
            ..self.clone()
        }
    }

    /// Sum of all marks.
    pub fn mark_sum(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.dim];
        for j in &self.big_jumps {
            for (a, b) in s.iter_mut().zip(&j.mark) {
                *a += b;
            }
        }
        s
    }
}

/// Sorted jump times, i.i.d. uniform on (0, T], nudged to be strictly increasing.
fn jump_times<R: Rng + ?Sized>(count: usize, horizon: f64, rng: &mut R) -> Vec<f64> {
    let mut t: Vec<f64> = (0..count)
        .map(|_| horizon * (1.0 - rng.random::<f64>()))
        .collect();
    t.sort_by(f64::total_cmp);
    for i in 1..t.len() {
        if t[i] <= t[i - 1] {
            t[i] = t[i - 1].next_up();
        }
    }
    t
}

fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("finite positive mean").sample(rng) as usize
}

fn check_inputs(horizon: f64, cutoff: f64) -> Result<(), NoiseError> {
    if !(horizon.is_finite() && horizon >= 0.0) {
        return Err(NoiseError::BadHorizon(horizon));
    }
    if !(cutoff.is_finite() && cutoff > 0.0) {
        return Err(NoiseError::BadCutoff(cutoff));
    }
    Ok(())
}

/// Precomputed sampler for repeated realizations of one measure.
#[derive(Debug, Clone)]
pub struct NoiseSampler {
    dim: usize,
    cutoff: f64,
    mode: SmallJumpMode,
    region: Option<RegionSampler>,
    diffusion: Option<Vec<f64>>,
    subordinated: Option<Box<SubordinatedSampler>>,
}

impl NoiseSampler {
    pub fn new(measure: &IntensityMeasure, cutoff: f64, mode: SmallJumpMode) -> Result<Self, NoiseError> {
        check_inputs(0.0, cutoff)?;
        let dim = measure.dim();
        if let MeasureKind::Subordinated {
            base,
            subordinator,
            drift,
        } = measure.kind()
        {
            if matches!(base, BaseProcess::Product { .. }) {
                let sub = IntensityMeasure::new((**subordinator).clone())?;
                let s = SubordinatedSampler::new(base, &sub, *drift, cutoff)?;
                return Ok(NoiseSampler {
                    dim,
                    cutoff,
                    mode,
                    region: None,
                    diffusion: None,
                    subordinated: Some(Box::new(s)),
                });
            }
        }
        let region = match RegionSampler::new(measure, &Region::Outside { radius: cutoff }) {
            Ok(s) => Some(s),
            Err(MeasureError::EmptyRegion) => None,
            Err(MeasureError::InfiniteMass) => return Err(NoiseError::InfiniteMass(cutoff)),
            Err(e) => return Err(e.into()),
        };
        let mut cov: Option<Vec<f64>> = None;
        if mode == SmallJumpMode::GaussianApproximation {
            cov = Some(measure.second_moment(cutoff)?);
        }
        if let MeasureKind::Subordinated {
            base: BaseProcess::Gaussian { variance, .. },
            drift,
            ..
        } = measure.kind()
        {
            if *drift > 0.0 {
                let c = cov.get_or_insert_with(|| vec![0.0; dim * dim]);
                for i in 0..dim {
                    c[i * dim + i] += drift * variance;
                }
            }
        }
        Ok(NoiseSampler {
            dim,
            cutoff,
            mode,
            region,
            diffusion: cov,
            subordinated: None,
        })
    }

    /// Expected number of big jumps per unit time.
    pub fn rate(&self) -> f64 {
        self.region.as_ref().map_or(0.0, RegionSampler::mass)
    }

    pub fn sample<R: Rng + ?Sized>(&self, horizon: f64, rng: &mut R) -> Result<NoiseRealization, NoiseError> {
        check_inputs(horizon, self.cutoff)?;
        let seed = next_seed(rng);
        let mut out = NoiseRealization::empty(self.dim, horizon, self.cutoff, self.mode, seed);
        if horizon == 0.0 {
            return Ok(out);
        }
        if let Some(s) = &self.subordinated {
            let mut r = s.sample(horizon, rng)?;
            r.small_jump_mode = self.mode;
            r.seed = seed;
            return Ok(r);
        }
        if let Some(region) = &self.region {
            let n = poisson(horizon * region.mass(), rng);
            let times = jump_times(n, horizon, rng);
            out.big_jumps.reserve(n);
            for time in times {
                let mark = region.sample(rng)?;
                out.big_jumps.push(Jump {
                    time,
                    annulus: annulus_index(linalg::norm(&mark)),
                    mark,
                });
            }
        }
        if let Some(cov) = &self.diffusion {
            out.diffusion = Some(Diffusion {
                covariance: cov.clone(),
                seed: next_seed(rng),
            });
        }
        Ok(out)
    }
}

/// One realization of the noise driven by `measure` on (0, T], keeping marks
/// with norm above `cutoff`.
pub fn sample_noise<R: Rng + ?Sized>(
    measure: &IntensityMeasure,
    horizon: f64,
    cutoff: f64,
    mode: SmallJumpMode,
    rng: &mut R,
) -> Result<NoiseRealization, NoiseError> {
    check_inputs(horizon, cutoff)?;
    NoiseSampler::new(measure, cutoff, mode)?.sample(horizon, rng)
}

/// Subordinator-first construction `L_t = X_{S_t}`.
#[derive(Debug, Clone)]
struct SubordinatedSampler {
    dim: usize,
    cutoff: f64,
    base: BaseKind,
    /// Sampler of subordinator jumps above `s_cut`.
    jumps: Option<RegionSampler>,
    drift: f64,
}

#[derive(Debug, Clone)]
enum BaseKind {
    Gaussian {
        variance: f64,
    },
    Product {
        inner: NoiseSampler,
        /// `−∫_{δ<‖z‖≤1} z ν_X(dz)`, the compensator drift of X.
        compensator: Vec<f64>,
    },
}

impl SubordinatedSampler {
    fn new(
        base: &BaseProcess,
        subordinator: &IntensityMeasure,
        drift: f64,
        cutoff: f64,
    ) -> Result<Self, NoiseError> {
        let (dim, kind, s_cut) = match base {
            BaseProcess::Gaussian {
                dimension,
                variance,
            } => {
                // below s_cut a Gaussian mark exceeds δ with probability ≤ 1e-12
                let x = chi_square_quantile_upper(*dimension, 1e-12);
                (
                    *dimension,
                    BaseKind::Gaussian {
                        variance: *variance,
                    },
                    cutoff * cutoff / (variance * x),
                )
            }
            BaseProcess::Product { measure } => {
                let m = IntensityMeasure::new((**measure).clone())?;
                let inner = NoiseSampler::new(&m, cutoff, SmallJumpMode::DropWithCompensator)?;
                let comp = m.first_moment(cutoff, 1.0)?;
                let rate = inner.rate();
                // below s_cut the base has a big jump with probability ≤ 1e-9
                let s_cut = if subordinator.is_finite_activity() {
                    0.0
                } else if rate > 0.0 {
                    1e-9 / rate
                } else {
                    f64::INFINITY
                };
                (
                    m.dim(),
                    BaseKind::Product {
                        inner,
                        compensator: linalg::scale(&comp, -1.0),
                    },
                    s_cut,
                )
            }
        };
        let region = if s_cut > 0.0 {
            Region::Outside { radius: s_cut }
        } else {
            Region::Outside {
                radius: f64::MIN_POSITIVE,
            }
        };
        let jumps = match RegionSampler::new(subordinator, &region) {
            Ok(s) => Some(s),
            Err(MeasureError::EmptyRegion) => None,
            Err(MeasureError::InfiniteMass) => return Err(NoiseError::InfiniteMass(cutoff)),
            Err(e) => return Err(e.into()),
        };
        Ok(SubordinatedSampler {
            dim,
            cutoff,
            base: kind,
            jumps,
            drift,
        })
    }

    fn sample<R: Rng + ?Sized>(&self, horizon: f64, rng: &mut R) -> Result<NoiseRealization, NoiseError> {
        let mut out = NoiseRealization::empty(
            self.dim,
            horizon,
            self.cutoff,
            SmallJumpMode::DropWithCompensator,
            0,
        );
        if let Some(jumps) = &self.jumps {
            let n = poisson(horizon * jumps.mass(), rng);
            for time in jump_times(n, horizon, rng) {
                let s = jumps.sample(rng)?[0];
                let mark = self.base_increment(s, rng)?;
                if linalg::norm(&mark) > self.cutoff {
                    out.big_jumps.push(Jump {
                        time,
                        annulus: annulus_index(linalg::norm(&mark)),
                        mark,
                    });
                }
            }
        }
        if self.drift > 0.0 {
            match &self.base {
                BaseKind::Gaussian { variance } => {
                    let d = self.dim;
                    let mut cov = vec![0.0; d * d];
                    for i in 0..d {
                        cov[i * d + i] = self.drift * variance;
                    }
                    out.diffusion = Some(Diffusion {
                        covariance: cov,
                        seed: next_seed(rng),
                    });
                }
                BaseKind::Product {
                    inner, compensator, ..
                } => {
                    // X run at speed β₀: its jumps over β₀·T, times rescaled
                    let extra = inner.sample(self.drift * horizon, rng)?;
                    for j in extra.big_jumps {
                        let time = (j.time / self.drift).min(horizon);
                        out.big_jumps.push(Jump { time, ..j });
                    }
                    out.big_jumps.sort_by(|a, b| a.time.total_cmp(&b.time));
                    for i in 1..out.big_jumps.len() {
                        if out.big_jumps[i].time <= out.big_jumps[i - 1].time {
                            out.big_jumps[i].time = out.big_jumps[i - 1].time.next_up();
                        }
                    }
                    out.drift = linalg::scale(compensator, self.drift);
                }
            }
        }
        Ok(out)
    }

    /// `X_s` for one subordinator jump of size s.
    fn base_increment<R: Rng + ?Sized>(&self, s: f64, rng: &mut R) -> Result<Vec<f64>, NoiseError> {
        match &self.base {
            BaseKind::Gaussian { variance } => {
                let sd = (s * variance).sqrt();
                Ok((0..self.dim)
                    .map(|_| {
                        let g: f64 = rand_distr::StandardNormal.sample(rng);
                        sd * g
                    })
                    .collect())
            }
            BaseKind::Product {
                inner, compensator, ..
            } => {
                let path = inner.sample(s, rng)?;
                let mut x = path.mark_sum();
                for (a, c) in x.iter_mut().zip(compensator) {
                    *a += s * c;
                }
                Ok(x)
            }
        }
    }
}

/// x with `P(χ²_d > x) = p`, by bisection.
fn chi_square_quantile_upper(dim: usize, p: f64) -> f64 {
    use statrs::function::gamma::gamma_ur;
    let tail = |x: f64| gamma_ur(dim as f64 / 2.0, x / 2.0);
    let (mut a, mut b) = (0.0, dim as f64 + 10.0);
    while tail(b) > p {
        b *= 2.0;
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if tail(m) > p {
            a = m;
        } else {
            b = m;
        }
    }
    b
}

/// Realization of the subordinated process `X_{S_t}` built subordinator
/// first: subordinator jumps `s` arrive as a Poisson process, each produces a
/// base increment `X_s`, and only increments with norm above δ are kept.
/// A positive subordinator drift contributes `X` run at speed β₀.
pub fn sample_subordinated_path<R: Rng + ?Sized>(
    base: &BaseProcess,
    subordinator: &IntensityMeasure,
    drift: f64,
    horizon: f64,
    cutoff: f64,
    rng: &mut R,
) -> Result<NoiseRealization, NoiseError> {
    check_inputs(horizon, cutoff)?;
    if subordinator.dim() != 1 {
        return Err(MeasureError::Invalid("subordinator must be one-dimensional".into()).into());
    }
    let seed = next_seed(rng);
    let sampler = SubordinatedSampler::new(base, subordinator, drift, cutoff)?;
    let mut r = if horizon == 0.0 {
        NoiseRealization::empty(sampler.dim, 0.0, cutoff, SmallJumpMode::DropWithCompensator, seed)
    } else {
        sampler.sample(horizon, rng)?
    };
    r.seed = seed;
    Ok(r)
}

/// Realization from an explicit seed (the replay contract).
pub fn sample_noise_seeded(
    measure: &IntensityMeasure,
    horizon: f64,
    cutoff: f64,
    mode: SmallJumpMode,
    seed: u64,
) -> Result<NoiseRealization, NoiseError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_noise(measure, horizon, cutoff, mode, &mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{Atom, Directions, Tempering};

    fn cp() -> IntensityMeasure {
        IntensityMeasure::atomic_1d(&[(1.0, 1.0), (-std::f64::consts::SQRT_2, 1.0)]).unwrap()
    }

    #[test]
    fn annulus_indices() {
        assert_eq!(annulus_index(2.0), 1);
        assert_eq!(annulus_index(1.0), 2);
        assert_eq!(annulus_index(0.5), 3);
        assert_eq!(annulus_index(0.3), 4);
        for n in [0.9, 0.26, 0.01, 1e-3] {
            let m = annulus_index(n);
            assert!(n > 1.0 / m as f64);
            assert!(m == 1 || n <= 1.0 / (m - 1) as f64);
        }
    }

    #[test]
    fn zero_horizon_is_empty() {
        let r = sample_noise_seeded(&cp(), 0.0, 1e-3, SmallJumpMode::default(), 1).unwrap();
        assert!(r.big_jumps.is_empty());
    }

    #[test]
    fn replay_is_bitwise() {
        let a = sample_noise_seeded(&cp(), 5.0, 1e-3, SmallJumpMode::default(), 42).unwrap();
        let b = sample_noise_seeded(&cp(), 5.0, 1e-3, SmallJumpMode::default(), 42).unwrap();
        assert_eq!(a, b);
        let json = serde_json::to_string(&a).unwrap();
        let c: NoiseRealization = serde_json::from_str(&json).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn times_strictly_increase_within_horizon() {
        let r = sample_noise_seeded(&cp(), 50.0, 1e-3, SmallJumpMode::default(), 9).unwrap();
        assert!(r.big_jumps.windows(2).all(|w| w[0].time < w[1].time));
        assert!(r.big_jumps.iter().all(|j| j.time > 0.0 && j.time <= 50.0));
    }

    #[test]
    fn infinite_activity_needs_cutoff() {
        let m = IntensityMeasure::new(MeasureKind::RadialPolar {
            dimension: 1,
            alpha: 1.5,
            directions: Directions::Uniform {
                total_weight: 2.0,
                grid: 2,
            },
            tempering: Tempering::default(),
            cutoff: None,
        })
        .unwrap();
        let r = sample_noise_seeded(&m, 1.0, 1e-2, SmallJumpMode::GaussianApproximation, 3).unwrap();
        assert!(r.big_jumps.iter().all(|j| j.mark[0].abs() > 1e-2));
        // covariance ∫_{|z|≤δ} z² ν = 2·δ^{0.5}/0.5
        let cov = &r.diffusion.as_ref().unwrap().covariance;
        assert!((cov[0] - 4.0 * 0.1).abs() < 1e-9);
    }

    #[test]
    fn subordinated_gaussian_marks() {
        let sub = IntensityMeasure::atomic(vec![Atom::new(&[1.0], 50.0)]).unwrap();
        let base = BaseProcess::Gaussian {
            dimension: 1,
            variance: 1.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let r = sample_subordinated_path(&base, &sub, 0.0, 200.0, 1e-9, &mut rng).unwrap();
        let marks: Vec<f64> = r.big_jumps.iter().map(|j| j.mark[0]).collect();
        let n = marks.len() as f64;
        // Poisson(10⁴): within 4σ = 400
        assert!((n - 10_000.0).abs() < 400.0, "{n}");
        let var = marks.iter().map(|x| x * x).sum::<f64>() / n;
        assert!((var - 1.0).abs() < 0.05, "{var}");
    }

    #[test]
    fn subordinated_routes_agree_in_rate() {
        // subordinator-first construction and the intensity route have the
        // same big-jump rate ν(|z| > δ)
        let kind = MeasureKind::Subordinated {
            base: BaseProcess::Gaussian {
                dimension: 2,
                variance: 0.5,
            },
            subordinator: Box::new(MeasureKind::Atomic {
                atoms: vec![Atom::new(&[0.2], 3.0), Atom::new(&[2.0], 1.0)],
                dimension: None,
            }),
            drift: 0.0,
        };
        let m = IntensityMeasure::new(kind.clone()).unwrap();
        let delta = 0.5;
        let rate = m.mass(&Region::Outside { radius: delta }).unwrap();
        let MeasureKind::Subordinated { base, subordinator, .. } = kind else {
            unreachable!()
        };
        let sub = IntensityMeasure::new(*subordinator).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = 2000.0;
        let a = sample_subordinated_path(&base, &sub, 0.0, t, delta, &mut rng)
            .unwrap()
            .big_jumps
            .len() as f64;
        let b = sample_noise(&m, t, delta, SmallJumpMode::default(), &mut rng)
            .unwrap()
            .big_jumps
            .len() as f64;
        let sd = (rate * t).sqrt();
        assert!((a - rate * t).abs() < 4.0 * sd, "{a} vs {}", rate * t);
        assert!((b - rate * t).abs() < 4.0 * sd, "{b} vs {}", rate * t);
    }

    #[test]
    fn subordinated_product_base() {
        let prod = MeasureKind::Product {
            per_coordinate: vec![
                MeasureKind::Atomic {
                    atoms: vec![Atom::new(&[2.0], 1.0)],
                    dimension: None,
                },
                MeasureKind::Atomic {
                    atoms: vec![Atom::new(&[-2.0], 1.0)],
                    dimension: None,
                },
            ],
            scales: vec![1.0, 1.0],
        };
        let base = BaseProcess::Product {
            measure: Box::new(prod),
        };
        let sub = IntensityMeasure::atomic(vec![Atom::new(&[1.0], 2.0)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let r = sample_subordinated_path(&base, &sub, 0.5, 100.0, 1e-3, &mut rng).unwrap();
        // atoms beyond the unit ball carry no compensator, so base increments
        // are even integer vectors with x ≥ 0, y ≤ 0
        for j in &r.big_jumps {
            assert!(j.mark[0] >= 0.0 && j.mark[1] <= 0.0);
            assert_eq!(j.mark[0].fract(), 0.0);
        }
        assert!(r.big_jumps.windows(2).all(|w| w[0].time < w[1].time));
        assert_eq!(r.drift, vec![0.0, 0.0]);
    }
}
