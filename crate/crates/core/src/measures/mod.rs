//! Pure-jump intensity measures ν on ℝᵈ.
//!
//! A measure is declared through [`MeasureKind`] (the serialisable
//! description) and validated into an [`IntensityMeasure`], which caches a
//! decomposition into point masses, radial rays `r ↦ r·u` carrying a tempered
//! power-law density, and isotropic Gaussian mixtures (subordinated Brownian
//! motion). All region queries go through that decomposition.

mod h0;
mod sampling;
mod support;

pub use h0::{
    check_assumption_v, h0_approximate, verify_assumption_v, AssumptionVCertificate, Combination,
    H0Search, Infeasible, InfeasibleReason,
};
pub use sampling::{sample_jump, RegionSampler};
pub use support::{
    check_support_conditions_1d, ConditionBasis, ConditionResult, ConditionStatus, SupportReport,
    TriState,
};

use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_ur, ln_gamma};
use thiserror::Error;

use crate::exact::ExactReal;
use crate::linalg;
use crate::quadrature::{self, QuadratureError, DEFAULT_REL_TOL};

/// Default number of sphere directions used to discretize a uniform
/// direction density.
pub const DEFAULT_DIRECTION_GRID: usize = 256;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum MeasureError {
    #[error("invalid measure: {0}")]
    Invalid(String),
    #[error("region has zero mass")]
    EmptyRegion,
    #[error("region has infinite mass; choose a region bounded away from the origin")]
    InfiniteMass,
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error("unsupported query: {0}")]
    Unsupported(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, MeasureError>;

/// Radial tempering functions q(r) ≥ 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Tempering {
    Constant { value: f64 },
    /// `e^{-λ r}`
    Exponential { rate: f64 },
    /// `1_{r ≤ R}`
    Truncation { radius: f64 },
}

impl Default for Tempering {
    fn default() -> Self {
        Tempering::Constant { value: 1.0 }
    }
}

impl Tempering {
    pub fn eval(&self, r: f64) -> f64 {
        match *self {
            Tempering::Constant { value } => value,
            Tempering::Exponential { rate } => (-rate * r).exp(),
            Tempering::Truncation { radius } => {
                if r <= radius {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Largest r with q(r) > 0 (∞ when unbounded).
    fn support_radius(&self) -> f64 {
        match *self {
            Tempering::Truncation { radius } => radius,
            _ => f64::INFINITY,
        }
    }

    /// sup of q over [r, ∞).
    fn sup_from(&self, r: f64) -> f64 {
        match *self {
            Tempering::Constant { value } => value,
            Tempering::Exponential { rate } => (-rate * r.max(0.0)).exp(),
            Tempering::Truncation { radius } => {
                if r <= radius {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    fn is_piecewise_constant(&self) -> bool {
        !matches!(self, Tempering::Exponential { .. })
    }

    /// The tempering seen after the radial map r ↦ s·r.
    fn scaled(&self, s: f64) -> Tempering {
        match *self {
            Tempering::Constant { value } => Tempering::Constant { value },
            Tempering::Exponential { rate } => Tempering::Exponential { rate: rate / s },
            Tempering::Truncation { radius } => Tempering::Truncation { radius: radius * s },
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Tempering::Constant { value } => value.is_finite() && value > 0.0,
            Tempering::Exponential { rate } => rate.is_finite() && rate > 0.0,
            Tempering::Truncation { radius } => radius.is_finite() && radius > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(MeasureError::Invalid(format!("bad tempering {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub location: Vec<ExactReal>,
    pub rate: f64,
}

impl Atom {
    pub fn new(location: &[f64], rate: f64) -> Self {
        Atom {
            location: location.iter().map(|&x| ExactReal::Float(x)).collect(),
            rate,
        }
    }

    pub fn exact(location: Vec<ExactReal>, rate: f64) -> Self {
        Atom { location, rate }
    }

    pub fn point(&self) -> Vec<f64> {
        self.location.iter().map(ExactReal::value).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedDirection {
    pub direction: Vec<f64>,
    pub weight: f64,
}

/// Angular part of a polar-form measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Directions {
    Discrete {
        points: Vec<WeightedDirection>,
    },
    /// Uniform density on the sphere with the given total mass, discretized
    /// to `grid` directions (an approximation knob).
    Uniform {
        total_weight: f64,
        #[serde(default = "default_grid")]
        grid: usize,
    },
}

fn default_grid() -> usize {
    DEFAULT_DIRECTION_GRID
}

/// Base process of a subordinated measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaseProcess {
    /// Brownian motion with covariance `variance·I`.
    Gaussian { dimension: usize, variance: f64 },
    /// A pure-jump Lévy process with a coordinate-product intensity.
    Product { measure: Box<MeasureKind> },
}

/// Declarative description of an intensity measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum MeasureKind {
    Atomic {
        atoms: Vec<Atom>,
        /// Required only when `atoms` is empty (the zero measure).
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dimension: Option<usize>,
    },
    RadialPolar {
        dimension: usize,
        alpha: f64,
        directions: Directions,
        #[serde(default)]
        tempering: Tempering,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cutoff: Option<f64>,
    },
    Product {
        per_coordinate: Vec<MeasureKind>,
        scales: Vec<f64>,
    },
    Subordinated {
        base: BaseProcess,
        subordinator: Box<MeasureKind>,
        #[serde(default)]
        drift: f64,
    },
}

/// A ray `{r·u : 0 < r ≤ radius}` with density `weight·q(r)·r^{-1-α}`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Ray {
    pub dir: Vec<f64>,
    pub weight: f64,
    pub alpha: f64,
    pub tempering: Tempering,
    /// Outer edge of the radial support (∞ when unbounded).
    pub radius: f64,
}

/// `ν(B) = ∫ N(0, s·variance·I)(B) ρ(ds)`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct GaussianMixture {
    pub dim: usize,
    pub variance: f64,
    /// Subordinator Lévy measure on (0, ∞).
    pub mixing: Box<IntensityMeasure>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub(crate) struct Decomposed {
    pub atoms: Vec<(Vec<f64>, f64)>,
    pub rays: Vec<Ray>,
    pub gaussian: Option<GaussianMixture>,
}

/// Subsets of ℝᵈ on which mass and sampling queries are posed.
#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    /// `{‖z‖ > radius}`; `Z_m` is `Outside { radius: 1/m }`.
    Outside { radius: f64 },
    /// `{inner < ‖z‖ ≤ outer}`.
    Annulus { inner: f64, outer: f64 },
    /// Open ball `B(center, radius)`.
    Ball { center: Vec<f64>, radius: f64 },
}

impl Region {
    /// `Z_m = {‖z‖ > 1/m}`.
    pub fn z(m: u32) -> Self {
        Region::Outside {
            radius: 1.0 / m as f64,
        }
    }

    pub fn contains(&self, z: &[f64]) -> bool {
        match self {
            Region::Outside { radius } => linalg::norm(z) > *radius,
            Region::Annulus { inner, outer } => {
                let n = linalg::norm(z);
                n > *inner && n <= *outer
            }
            Region::Ball { center, radius } => linalg::dist(z, center) < *radius,
        }
    }

    /// Radial interval `(lo, hi)` cut out of the ray through `dir`.
    fn ray_interval(&self, dir: &[f64]) -> Option<(f64, f64)> {
        match self {
            Region::Outside { radius } => Some((*radius, f64::INFINITY)),
            Region::Annulus { inner, outer } => (outer > inner).then_some((*inner, *outer)),
            Region::Ball { center, radius } => {
                let b = linalg::dot(dir, center);
                let c = linalg::dot(center, center) - radius * radius;
                let disc = b * b - c;
                if disc <= 0.0 {
                    return None;
                }
                let s = disc.sqrt();
                let hi = b + s;
                (hi > 0.0).then_some(((b - s).max(0.0), hi))
            }
        }
    }
}

/// A validated intensity measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeasureKind", into = "MeasureKind")]
pub struct IntensityMeasure {
    kind: MeasureKind,
    dim: usize,
    #[serde(skip)]
    parts: Decomposed,
}

impl TryFrom<MeasureKind> for IntensityMeasure {
    type Error = MeasureError;

    fn try_from(kind: MeasureKind) -> Result<Self> {
        IntensityMeasure::new(kind)
    }
}

impl From<IntensityMeasure> for MeasureKind {
    fn from(m: IntensityMeasure) -> Self {
        m.kind
    }
}

fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(MeasureError::Invalid(msg.into()))
}

/// Direction grid on the sphere, listed in antipodal pairs `u, −u` so that
/// odd moments of symmetric densities cancel exactly.
fn sphere_grid(dim: usize, n: usize) -> Vec<Vec<f64>> {
    let half = (n / 2).max(1);
    let base: Vec<Vec<f64>> = match dim {
        1 => vec![vec![1.0]],
        2 => (0..half)
            .map(|k| {
                let t = std::f64::consts::PI * k as f64 / half as f64;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        3 => {
            // Fibonacci lattice
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..half)
                .map(|k| {
                    let y = 1.0 - 2.0 * (k as f64 + 0.5) / half as f64;
                    let r = (1.0 - y * y).sqrt();
                    let t = golden * k as f64;
                    vec![r * t.cos(), y, r * t.sin()]
                })
                .collect()
        }
        _ => {
            use rand::SeedableRng;
            use rand_distr::{Distribution, StandardNormal};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed_d1ec ^ dim as u64);
            let mut out = Vec::with_capacity(half);
            while out.len() < half {
                let g: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
                if let Some(u) = linalg::normalize(&g) {
                    out.push(u);
                }
            }
            out
        }
    };
    base.into_iter()
        .flat_map(|u| {
            let v = linalg::scale(&u, -1.0);
            [u, v]
        })
        .collect()
}

/// Sum that cancels exactly on sign-symmetric inputs: positive and negative
/// parts are each summed in order of increasing magnitude.
pub(crate) fn symmetric_sum(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    let pos: f64 = values.iter().filter(|v| **v > 0.0).sum();
    let neg: f64 = values.iter().filter(|v| **v < 0.0).sum();
    pos + neg
}

fn decompose(kind: &MeasureKind) -> Result<(usize, Decomposed)> {
    match kind {
        MeasureKind::Atomic { atoms, dimension } => {
            let dim = match (atoms.first(), dimension) {
                (Some(a), _) => a.location.len(),
                (None, Some(d)) => *d,
                (None, None) => return invalid("empty atomic measure needs a dimension"),
            };
            if dim == 0 {
                return invalid("dimension must be positive");
            }
            if let Some(d) = dimension {
                if *d != dim {
                    return invalid("declared dimension disagrees with atom locations");
                }
            }
            let mut parts = Decomposed::default();
            for a in atoms {
                if a.location.len() != dim {
                    return invalid("atoms have inconsistent dimensions");
                }
                let p = a.point();
                if !linalg::is_finite(&p) || linalg::norm(&p) == 0.0 {
                    return invalid("atom locations must be finite and nonzero (ν({0}) = 0)");
                }
                if !(a.rate.is_finite() && a.rate > 0.0) {
                    return invalid("atom rates must be positive and finite");
                }
                parts.atoms.push((p, a.rate));
            }
            Ok((dim, parts))
        }
        MeasureKind::RadialPolar {
            dimension,
            alpha,
            directions,
            tempering,
            cutoff,
        } => {
            let dim = *dimension;
            if dim == 0 {
                return invalid("dimension must be positive");
            }
            if !(0.0..2.0).contains(alpha) {
                return invalid(format!("alpha must lie in [0, 2), got {alpha}"));
            }
            tempering.validate()?;
            let cut = match cutoff {
                Some(c) if !(c.is_finite() && *c > 0.0) => return invalid("cutoff must be positive"),
                Some(c) => *c,
                None => f64::INFINITY,
            };
            let radius = cut.min(tempering.support_radius());
            let dirs: Vec<(Vec<f64>, f64)> = match directions {
                Directions::Discrete { points } => {
                    let mut v = Vec::new();
                    for p in points {
                        if p.direction.len() != dim {
                            return invalid("direction has wrong dimension");
                        }
                        let n = linalg::norm(&p.direction);
                        if (n - 1.0).abs() > 1e-9 {
                            return invalid("directions must be unit vectors");
                        }
                        if !(p.weight.is_finite() && p.weight > 0.0) {
                            return invalid("direction weights must be positive");
                        }
                        v.push((linalg::scale(&p.direction, 1.0 / n), p.weight));
                    }
                    v
                }
                Directions::Uniform { total_weight, grid } => {
                    if !(total_weight.is_finite() && *total_weight > 0.0) || *grid == 0 {
                        return invalid("uniform direction density needs positive weight and grid");
                    }
                    let g = sphere_grid(dim, *grid);
                    let w = total_weight / g.len() as f64;
                    g.into_iter().map(|u| (u, w)).collect()
                }
            };
            if dirs.is_empty() {
                return invalid("polar measure needs at least one direction");
            }
            let rays = dirs
                .into_iter()
                .map(|(dir, weight)| Ray {
                    dir,
                    weight,
                    alpha: *alpha,
                    tempering: *tempering,
                    radius,
                })
                .collect();
            Ok((
                dim,
                Decomposed {
                    rays,
                    ..Default::default()
                },
            ))
        }
        MeasureKind::Product {
            per_coordinate,
            scales,
        } => {
            let dim = per_coordinate.len();
            if dim == 0 || scales.len() != dim {
                return invalid("product measure needs one nonzero scale per coordinate");
            }
            let mut parts = Decomposed::default();
            for (i, (m, &beta)) in per_coordinate.iter().zip(scales).enumerate() {
                if !(beta.is_finite() && beta != 0.0) {
                    return invalid("product scales must be nonzero");
                }
                if !matches!(
                    m,
                    MeasureKind::Atomic { .. } | MeasureKind::RadialPolar { .. }
                ) {
                    return invalid("product coordinates must be atomic or polar 1-D measures");
                }
                let (d1, sub) = decompose(m)?;
                if d1 != 1 {
                    return invalid("product coordinates must be one-dimensional");
                }
                let s = beta.abs();
                for (p, rate) in sub.atoms {
                    let mut loc = vec![0.0; dim];
                    loc[i] = beta * p[0];
                    parts.atoms.push((loc, rate));
                }
                for ray in sub.rays {
                    let mut dir = vec![0.0; dim];
                    dir[i] = ray.dir[0] * beta.signum();
                    parts.rays.push(Ray {
                        dir,
                        // r' = s·r transports w q(r) r^{-1-α} dr to
                        // w s^α q(r'/s) r'^{-1-α} dr'
                        weight: ray.weight * s.powf(ray.alpha),
                        alpha: ray.alpha,
                        tempering: ray.tempering.scaled(s),
                        radius: ray.radius * s,
                    });
                }
            }
            Ok((dim, parts))
        }
        MeasureKind::Subordinated {
            base,
            subordinator,
            drift,
        } => {
            if !(drift.is_finite() && *drift >= 0.0) {
                return invalid("subordinator drift must be ≥ 0");
            }
            let mixing = IntensityMeasure::new((**subordinator).clone())?;
            if mixing.dim != 1 {
                return invalid("subordinator measure must be one-dimensional");
            }
            if mixing.parts.atoms.iter().any(|(p, _)| p[0] <= 0.0)
                || mixing.parts.rays.iter().any(|r| r.dir[0] < 0.0)
                || mixing.parts.gaussian.is_some()
            {
                return invalid("subordinator measure must live on (0, ∞)");
            }
            if mixing.parts.rays.iter().any(|r| r.alpha >= 1.0) {
                return invalid("subordinator needs ∫(1∧s)ρ(ds) < ∞, i.e. alpha < 1");
            }
            match base {
                BaseProcess::Gaussian {
                    dimension,
                    variance,
                } => {
                    if *dimension == 0 || !(variance.is_finite() && *variance > 0.0) {
                        return invalid("Gaussian base needs positive dimension and variance");
                    }
                    Ok((
                        *dimension,
                        Decomposed {
                            gaussian: Some(GaussianMixture {
                                dim: *dimension,
                                variance: *variance,
                                mixing: Box::new(mixing),
                            }),
                            ..Default::default()
                        },
                    ))
                }
                BaseProcess::Product { measure } => {
                    if !matches!(**measure, MeasureKind::Product { .. }) {
                        return invalid("product base must be a product measure");
                    }
                    let (dim, _) = decompose(measure)?;
                    // Only sampling is available for this variant; region
                    // queries report `Unsupported`.
                    Ok((dim, Decomposed::default()))
                }
            }
        }
    }
}

/// `∫_a^b r^{p-1} q(r) dr` through the substitution `v = r^p` (or `ln r` when
/// `p = 0`), which removes the power singularity. Returns the value together
/// with nodes `(r_j, ω_j)` such that `Σ ω_j g(r_j) ≈ ∫ g(r) r^{p-1} q(r) dr`.
fn power_integral(
    tempering: &Tempering,
    p: f64,
    a: f64,
    b: f64,
    want_nodes: bool,
) -> Result<(f64, Vec<(f64, f64)>)> {
    debug_assert!(a < b);
    let b = if b.is_infinite() && p >= 0.0 {
        match tempering {
            Tempering::Exponential { rate } => a.max(0.0) + 60.0 / rate,
            _ => return Err(MeasureError::InfiniteMass),
        }
    } else {
        b
    };
    if a <= 0.0 && p <= 0.0 {
        return Err(MeasureError::InfiniteMass);
    }
    if tempering.is_piecewise_constant() && !want_nodes {
        let c = tempering.eval(a.max(0.0));
        let value = if p == 0.0 {
            c * (b / a).ln()
        } else if b.is_infinite() {
            // p < 0 here
            c * a.powf(p) / -p
        } else {
            c * (b.powf(p) - a.max(0.0).powf(p)) / p
        };
        return Ok((value, Vec::new()));
    }
    let (lo, hi, to_r): (f64, f64, Box<dyn Fn(f64) -> f64>) = if p == 0.0 {
        (a.ln(), b.ln(), Box::new(|s: f64| s.exp()))
    } else {
        let va = a.max(0.0).powf(p);
        let vb = if b.is_infinite() { 0.0 } else { b.powf(p) };
        let inv = 1.0 / p;
        (va.min(vb), va.max(vb), Box::new(move |v: f64| v.powf(inv)))
    };
    let jac = if p == 0.0 { 1.0 } else { 1.0 / p.abs() };
    let integrand = |v: f64| {
        let r = to_r(v);
        if r.is_finite() {
            tempering.eval(r) * jac
        } else {
            0.0
        }
    };
    let res = quadrature::integrate(integrand, lo, hi, DEFAULT_REL_TOL, 1e-300)?;
    let nodes = if want_nodes {
        res.nodes()
            .into_iter()
            .map(|(v, w)| {
                let r = to_r(v);
                (r, w * tempering.eval(r) * jac)
            })
            .filter(|(r, w)| r.is_finite() && *w != 0.0)
            .collect()
    } else {
        Vec::new()
    };
    Ok((res.value, nodes))
}

impl Ray {
    /// `∫_{lo}^{hi} r^k · density(r) dr` restricted to the ray's support.
    pub(crate) fn moment(&self, k: f64, lo: f64, hi: f64) -> Result<f64> {
        let hi = hi.min(self.radius);
        if hi <= lo {
            return Ok(0.0);
        }
        let (v, _) = power_integral(&self.tempering, k - self.alpha, lo, hi, false)?;
        Ok(self.weight * v)
    }

    /// Nodes `(r_j, w_j)` with `Σ w_j g(r_j) ≈ ∫ g(r) density(r) dr` on (lo, hi].
    pub(crate) fn nodes(&self, lo: f64, hi: f64) -> Result<Vec<(f64, f64)>> {
        let hi = hi.min(self.radius);
        if hi <= lo {
            return Ok(Vec::new());
        }
        // Integrate against r^{1-α} so first moments are well resolved.
        let (_, nodes) = power_integral(&self.tempering, 1.0 - self.alpha, lo, hi, true)?;
        Ok(nodes
            .into_iter()
            .map(|(r, w)| (r, self.weight * w / r))
            .collect())
    }
}

/// Density of ‖z‖ for z ~ N(0, v·I_d).
fn chi_radius_density(dim: usize, v: f64, r: f64) -> f64 {
    let h = dim as f64 / 2.0;
    let log = (dim as f64 - 1.0) * r.ln() - r * r / (2.0 * v) - (h - 1.0) * 2f64.ln()
        - ln_gamma(h)
        - h * v.ln();
    log.exp()
}

/// P(‖z‖ > r) for z ~ N(0, v·I_d).
fn chi_tail(dim: usize, v: f64, r: f64) -> f64 {
    if r <= 0.0 {
        return 1.0;
    }
    gamma_ur(dim as f64 / 2.0, r * r / (2.0 * v))
}

impl GaussianMixture {
    /// Nodes `(s_j, w_j)` with `Σ w_j g(s_j) ≈ ∫ g(s) ρ(ds)` for g bounded
    /// and vanishing at 0.
    pub(crate) fn mixing_nodes(&self) -> Result<Vec<(f64, f64)>> {
        let parts = &self.mixing.parts;
        let mut out: Vec<(f64, f64)> = parts.atoms.iter().map(|(s, r)| (s[0], *r)).collect();
        for ray in &parts.rays {
            out.extend(ray.nodes(0.0, ray.radius.min(1.0))?);
            if ray.radius > 1.0 {
                out.extend(ray.nodes(1.0, ray.radius)?);
            }
        }
        Ok(out)
    }

    fn mix<F: Fn(f64) -> f64>(&self, g: F) -> Result<f64> {
        Ok(self.mixing_nodes()?.iter().map(|(s, w)| w * g(*s)).sum())
    }

    fn annulus_mass(&self, lo: f64, hi: f64) -> Result<f64> {
        let (d, c) = (self.dim, self.variance);
        self.mix(|s| chi_tail(d, s * c, lo) - if hi.is_finite() { chi_tail(d, s * c, hi) } else { 0.0 })
    }

    /// Radial density of the mixture at r.
    fn radial_density(&self, r: f64) -> Result<f64> {
        let (d, c) = (self.dim, self.variance);
        self.mix(|s| chi_radius_density(d, s * c, r))
    }
}

impl IntensityMeasure {
    pub fn new(kind: MeasureKind) -> Result<Self> {
        let (dim, parts) = decompose(&kind)?;
        let m = IntensityMeasure { kind, dim, parts };
        m.check_integrability()?;
        Ok(m)
    }

    pub fn atomic(atoms: Vec<Atom>) -> Result<Self> {
        Self::new(MeasureKind::Atomic {
            atoms,
            dimension: None,
        })
    }

    /// Convenience constructor for 1-D atoms `(location, rate)`.
    pub fn atomic_1d(atoms: &[(f64, f64)]) -> Result<Self> {
        Self::atomic(atoms.iter().map(|&(x, r)| Atom::new(&[x], r)).collect())
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(MeasureKind::Atomic {
            atoms: Vec::new(),
            dimension: Some(dim),
        })
        .expect("zero measure is valid")
    }

    pub fn kind(&self) -> &MeasureKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub(crate) fn parts(&self) -> &Decomposed {
        &self.parts
    }

    pub fn is_atomic(&self) -> bool {
        matches!(self.kind, MeasureKind::Atomic { .. })
    }

    /// Atoms `(location, rate)` of the discrete part.
    pub fn atoms(&self) -> &[(Vec<f64>, f64)] {
        &self.parts.atoms
    }

    fn product_base_only(&self) -> bool {
        matches!(
            self.kind,
            MeasureKind::Subordinated {
                base: BaseProcess::Product { .. },
                ..
            }
        )
    }

    /// Whether ν(ℝᵈ) < ∞.
    pub fn is_finite_activity(&self) -> bool {
        match &self.kind {
            MeasureKind::Subordinated {
                base: BaseProcess::Product { measure },
                subordinator,
                drift,
            } => {
                let base_fin = IntensityMeasure::new((**measure).clone())
                    .map(|m| m.is_finite_activity())
                    .unwrap_or(false);
                let sub_fin = IntensityMeasure::new((**subordinator).clone())
                    .map(|m| m.is_finite_activity())
                    .unwrap_or(false);
                sub_fin && (*drift == 0.0 || base_fin)
            }
            _ => {
                self.parts.rays.is_empty()
                    && self
                        .parts
                        .gaussian
                        .as_ref()
                        .is_none_or(|g| g.mixing.is_finite_activity())
            }
        }
    }

    /// ∫ (‖z‖² ∧ 1) ν(dz).
    pub fn integrability(&self) -> Result<f64> {
        if self.product_base_only() {
            return Err(MeasureError::Unsupported(
                "integrability of a subordinated product measure".into(),
            ));
        }
        let p = &self.parts;
        let mut total: f64 = p
            .atoms
            .iter()
            .map(|(a, rate)| rate * linalg::dot(a, a).min(1.0))
            .sum();
        for ray in &p.rays {
            total += ray.moment(2.0, 0.0, 1.0)?;
            total += ray.moment(0.0, 1.0, f64::INFINITY)?;
        }
        if let Some(g) = &p.gaussian {
            let (d, c) = (g.dim, g.variance);
            // E[‖z‖² ∧ 1] for z ~ N(0, s c I), via the radial density.
            total += g.mix(|s| {
                let v = s * c;
                let inner = quadrature::integrate(
                    |r| r * r * chi_radius_density(d, v, r),
                    0.0,
                    1.0,
                    1e-10,
                    1e-300,
                )
                .map(|i| i.value)
                .unwrap_or(f64::NAN);
                inner + chi_tail(d, v, 1.0)
            })?;
        }
        if total.is_finite() {
            Ok(total)
        } else {
            Err(MeasureError::InfiniteMass)
        }
    }

    fn check_integrability(&self) -> Result<()> {
        match self.integrability() {
            Ok(_) => Ok(()),
            Err(MeasureError::Unsupported(_)) => Ok(()),
            Err(MeasureError::InfiniteMass) => {
                invalid("∫(‖z‖²∧1) ν(dz) is infinite")
            }
            Err(e) => Err(e),
        }
    }

    /// Product-form integrability `Σᵢ ∫ (|βᵢ xᵢ|² ∧ 1) νᵢ(dxᵢ)` computed
    /// coordinate by coordinate (only for `Product` measures).
    pub fn product_integrability(&self) -> Result<f64> {
        let MeasureKind::Product {
            per_coordinate,
            scales,
        } = &self.kind
        else {
            return Err(MeasureError::Unsupported("not a product measure".into()));
        };
        let mut total = 0.0;
        for (m, &beta) in per_coordinate.iter().zip(scales) {
            let one = IntensityMeasure::new(m.clone())?;
            let s = beta.abs();
            for (a, rate) in &one.parts.atoms {
                total += rate * (s * a[0]).powi(2).min(1.0);
            }
            for ray in &one.parts.rays {
                // |βx|² ∧ 1 splits at x = 1/|β|
                total += s * s * ray.moment(2.0, 0.0, 1.0 / s)?;
                total += ray.moment(0.0, 1.0 / s, f64::INFINITY)?;
            }
        }
        Ok(total)
    }

    /// ν(region).
    pub fn mass(&self, region: &Region) -> Result<f64> {
        if self.product_base_only() {
            return Err(MeasureError::Unsupported(
                "region mass of a subordinated product measure".into(),
            ));
        }
        if let Region::Ball { center, .. } = region {
            self.check_dim(center)?;
        }
        let p = &self.parts;
        let mut total: f64 = p
            .atoms
            .iter()
            .filter(|(a, _)| region.contains(a))
            .map(|(_, r)| r)
            .sum();
        for ray in &p.rays {
            if let Some((lo, hi)) = region.ray_interval(&ray.dir) {
                total += ray.moment(0.0, lo, hi)?;
            }
        }
        if let Some(g) = &p.gaussian {
            total += match region {
                Region::Outside { radius } => g.annulus_mass(*radius, f64::INFINITY)?,
                Region::Annulus { inner, outer } => g.annulus_mass(*inner, *outer)?,
                Region::Ball { .. } => {
                    return Err(MeasureError::Unsupported(
                        "ball mass of a subordinated Gaussian measure".into(),
                    ))
                }
            };
        }
        Ok(total)
    }

    /// `ν(Z_m) = ν({‖z‖ > 1/m})`.
    pub fn mass_of_region(&self, m: u32) -> Result<f64> {
        if m == 0 {
            return invalid("truncation index m must be ≥ 1");
        }
        self.mass(&Region::z(m))
    }

    /// Discretization of ν restricted to `{lo < ‖z‖ ≤ hi}` into weighted
    /// points: `Σ w_k g(z_k) ≈ ∫ g dν` (exact for atoms).
    pub fn discretize(&self, lo: f64, hi: f64) -> Result<Vec<(Vec<f64>, f64)>> {
        if self.product_base_only() {
            return Err(MeasureError::Unsupported(
                "discretization of a subordinated product measure".into(),
            ));
        }
        let region = Region::Annulus {
            inner: lo,
            outer: hi,
        };
        let mut out: Vec<(Vec<f64>, f64)> = self
            .parts
            .atoms
            .iter()
            .filter(|(a, _)| region.contains(a))
            .cloned()
            .collect();
        if hi <= lo {
            return Ok(out);
        }
        for ray in &self.parts.rays {
            for (r, w) in ray.nodes(lo, hi)? {
                out.push((linalg::scale(&ray.dir, r), w));
            }
        }
        if let Some(g) = &self.parts.gaussian {
            let hi_eff = if hi.is_finite() {
                hi
            } else {
                // radius beyond which the mixture's tail is negligible
                lo.max(1.0) * 1e3
            };
            let dirs = sphere_grid(g.dim, DEFAULT_DIRECTION_GRID);
            let radial = quadrature::integrate(
                |r| g.radial_density(r).unwrap_or(f64::NAN),
                lo,
                hi_eff,
                1e-9,
                1e-300,
            )?;
            let share = 1.0 / dirs.len() as f64;
            for (r, w) in radial.nodes() {
                let dens = g.radial_density(r)?;
                for u in &dirs {
                    out.push((linalg::scale(u, r), w * dens * share));
                }
            }
        }
        Ok(out)
    }

    /// `∫_{lo < ‖z‖ ≤ hi} z ν(dz)`; contributions are combined with
    /// [`symmetric_sum`] so mirrored atoms and rays cancel exactly.
    pub fn first_moment(&self, lo: f64, hi: f64) -> Result<Vec<f64>> {
        if self.product_base_only() {
            return Err(MeasureError::Unsupported(
                "moments of a subordinated product measure".into(),
            ));
        }
        let region = Region::Annulus {
            inner: lo,
            outer: hi,
        };
        let mut terms: Vec<Vec<f64>> = vec![Vec::new(); self.dim];
        for (a, rate) in &self.parts.atoms {
            if region.contains(a) {
                for (t, x) in terms.iter_mut().zip(a) {
                    t.push(rate * x);
                }
            }
        }
        if hi > lo {
            for ray in &self.parts.rays {
                let m = ray.moment(1.0, lo, hi)?;
                for (t, u) in terms.iter_mut().zip(&ray.dir) {
                    t.push(m * u);
                }
            }
        }
        // Gaussian mixtures are isotropic: their first moment vanishes.
        Ok(terms.iter_mut().map(|t| symmetric_sum(t)).collect())
    }

    /// `∫_{‖z‖ ≤ hi} z zᵀ ν(dz)` as a row-major d×d matrix.
    pub fn second_moment(&self, hi: f64) -> Result<Vec<f64>> {
        let d = self.dim;
        let mut out = vec![0.0; d * d];
        if self.product_base_only() {
            return Err(MeasureError::Unsupported(
                "moments of a subordinated product measure".into(),
            ));
        }
        let mut add = |v: &[f64], w: f64| {
            for i in 0..d {
                for j in 0..d {
                    out[i * d + j] += w * v[i] * v[j];
                }
            }
        };
        for (a, rate) in &self.parts.atoms {
            if linalg::norm(a) <= hi {
                add(a, *rate);
            }
        }
        for ray in &self.parts.rays {
            let m = ray.moment(2.0, 0.0, hi)?;
            add(&ray.dir, m);
        }
        if let Some(g) = &self.parts.gaussian {
            let m2 = quadrature::integrate(
                |r| r * r * g.radial_density(r).unwrap_or(f64::NAN),
                0.0,
                hi,
                1e-9,
                1e-300,
            )?
            .value;
            for i in 0..d {
                out[i * d + i] += m2 / d as f64;
            }
        }
        Ok(out)
    }

    /// Distance from `point` to the declared support `S_ν`; any open ball of
    /// larger radius around `point` has positive mass. `None` when the
    /// support is not declared.
    pub fn distance_to_support(&self, point: &[f64]) -> Option<f64> {
        if point.len() != self.dim {
            return None;
        }
        match &self.kind {
            MeasureKind::Subordinated {
                base: BaseProcess::Gaussian { .. },
                subordinator,
                ..
            } => {
                // Gaussian laws have full support; needs a nonzero subordinator.
                let nonzero = IntensityMeasure::new((**subordinator).clone())
                    .map(|m| !m.parts.atoms.is_empty() || !m.parts.rays.is_empty())
                    .unwrap_or(false);
                return nonzero.then_some(0.0);
            }
            MeasureKind::Subordinated {
                base: BaseProcess::Product { measure },
                ..
            } => {
                let base = IntensityMeasure::new((**measure).clone()).ok()?;
                let MeasureKind::Product { per_coordinate, .. } = base.kind() else {
                    return None;
                };
                let all_dense = per_coordinate.iter().all(|m| {
                    IntensityMeasure::new(m.clone())
                        .map(|m| check_support_conditions_1d(&m).h0_dense == TriState::True)
                        .unwrap_or(false)
                });
                return all_dense.then_some(0.0);
            }
            _ => {}
        }
        let mut best = f64::INFINITY;
        for (a, _) in &self.parts.atoms {
            best = best.min(linalg::dist(a, point));
        }
        for ray in &self.parts.rays {
            // distance to the segment {r u : 0 ≤ r ≤ radius}
            let t = linalg::dot(point, &ray.dir).clamp(0.0, ray.radius);
            let foot = linalg::scale(&ray.dir, t);
            best = best.min(linalg::dist(point, &foot));
        }
        Some(best)
    }

    /// Whether ν(B(center, radius)) > 0, judged from the declared support.
    pub fn ball_has_mass(&self, center: &[f64], radius: f64) -> Option<bool> {
        self.distance_to_support(center).map(|d| d < radius)
    }

    fn check_dim(&self, v: &[f64]) -> Result<()> {
        if v.len() == self.dim {
            Ok(())
        } else {
            Err(MeasureError::Dimension {
                expected: self.dim,
                got: v.len(),
            })
        }
    }
}

/// `∫_{1/m < ‖z‖ ≤ 1} σ(x, z) ν(dz)`; the zero vector for m = 1.
pub fn compensator_drift<F>(
    measure: &IntensityMeasure,
    sigma: F,
    x: &[f64],
    m: u32,
) -> Result<Vec<f64>>
where
    F: Fn(&[f64], &[f64]) -> Vec<f64>,
{
    if m == 0 {
        return invalid("truncation index m must be ≥ 1");
    }
    if m == 1 {
        return Ok(vec![0.0; x.len()]);
    }
    let mut terms: Vec<Vec<f64>> = vec![Vec::new(); x.len()];
    for (z, w) in measure.discretize(1.0 / m as f64, 1.0)? {
        for (t, v) in terms.iter_mut().zip(sigma(x, &z)) {
            t.push(w * v);
        }
    }
    Ok(terms.iter_mut().map(|t| symmetric_sum(t)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn polar_1d(alpha: f64, tempering: Tempering, cutoff: Option<f64>) -> IntensityMeasure {
        IntensityMeasure::new(MeasureKind::RadialPolar {
            dimension: 1,
            alpha,
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
            tempering,
            cutoff,
        })
        .unwrap()
    }

    #[test]
    fn atomic_mass_uses_strict_region() {
        let m = IntensityMeasure::atomic_1d(&[(1.0, 2.0), (-0.5, 3.0)]).unwrap();
        assert_eq!(m.mass_of_region(1).unwrap(), 0.0);
        assert_eq!(m.mass_of_region(4).unwrap(), 5.0);
        assert_eq!(m.mass_of_region(2).unwrap(), 2.0);
    }

    #[test]
    fn symmetric_cauchy_like_mass() {
        // oracle: 2 ∫_1^∞ r^{-2} dr = 2
        let m = polar_1d(1.0, Tempering::default(), None);
        assert!((m.mass_of_region(1).unwrap() - 2.0).abs() < 1e-12);
        // oracle: 2 ∫_{1/4}^∞ r^{-2} dr = 8
        assert!((m.mass_of_region(4).unwrap() - 8.0).abs() < 1e-12);
    }

    #[test]
    fn exponential_tempering_matches_closed_form() {
        // α = 0: ∫_a^∞ e^{-r}/r dr = E1(a); E1(1) = 0.219383934395520
        let m = polar_1d(0.0, Tempering::Exponential { rate: 1.0 }, None);
        let got = m.mass_of_region(1).unwrap();
        assert!((got - 2.0 * 0.219_383_934_395_520_27).abs() < 1e-8 * got);
        // α = 1: ∫_1^∞ e^{-r} r^{-2} dr = e^{-1} - E1(1) = 0.148495506775922
        let m = polar_1d(1.0, Tempering::Exponential { rate: 1.0 }, None);
        let got = m.mass_of_region(1).unwrap();
        assert!((got - 2.0 * 0.148_495_506_775_922).abs() < 1e-8 * got);
    }

    #[test]
    fn truncated_polar_mass_and_support() {
        let m = polar_1d(0.0, Tempering::default(), Some(2.0));
        // 2 ln(2 / 0.5)
        assert!((m.mass_of_region(2).unwrap() - 2.0 * 4f64.ln()).abs() < 1e-12);
        assert_eq!(m.mass(&Region::Outside { radius: 2.5 }).unwrap(), 0.0);
        let m = polar_1d(1.0, Tempering::default(), None);
        assert!(matches!(
            m.mass(&Region::Ball {
                center: vec![0.1],
                radius: 0.2
            }),
            Err(MeasureError::InfiniteMass)
        ));
    }

    #[test]
    fn invalid_measures_are_rejected() {
        assert!(IntensityMeasure::atomic_1d(&[(0.0, 1.0)]).is_err());
        assert!(IntensityMeasure::atomic_1d(&[(1.0, -1.0)]).is_err());
        // α = 0 without tempering is not a Lévy measure at infinity
        let k = MeasureKind::RadialPolar {
            dimension: 1,
            alpha: 0.0,
            directions: Directions::Uniform {
                total_weight: 1.0,
                grid: 2,
            },
            tempering: Tempering::default(),
            cutoff: None,
        };
        assert!(IntensityMeasure::new(k).is_err());
        let k = MeasureKind::RadialPolar {
            dimension: 1,
            alpha: 2.0,
            directions: Directions::Uniform {
                total_weight: 1.0,
                grid: 2,
            },
            tempering: Tempering::default(),
            cutoff: None,
        };
        assert!(IntensityMeasure::new(k).is_err());
    }

    #[test]
    fn compensator_examples() {
        let sym = IntensityMeasure::atomic_1d(&[(0.6, 1.5), (-0.6, 1.5)]).unwrap();
        let id = |_: &[f64], z: &[f64]| z.to_vec();
        for m in 2..6 {
            assert_eq!(compensator_drift(&sym, id, &[0.3], m).unwrap(), vec![0.0]);
        }
        let one = IntensityMeasure::atomic_1d(&[(0.6, 1.0)]).unwrap();
        assert_eq!(compensator_drift(&one, id, &[0.0], 2).unwrap(), vec![0.6]);
        assert_eq!(compensator_drift(&one, id, &[0.0], 1).unwrap(), vec![0.0]);
    }

    #[test]
    fn polar_compensator_matches_moment() {
        // one-sided α = 1.5: ∫_{1/4}^1 r · r^{-2.5} dr = 2(4^{0.5} - 1) = 2
        let m = IntensityMeasure::new(MeasureKind::RadialPolar {
            dimension: 1,
            alpha: 1.5,
            directions: Directions::Discrete {
                points: vec![WeightedDirection {
                    direction: vec![1.0],
                    weight: 1.0,
                }],
            },
            tempering: Tempering::default(),
            cutoff: None,
        })
        .unwrap();
        let id = |_: &[f64], z: &[f64]| z.to_vec();
        let c = compensator_drift(&m, id, &[0.0], 4).unwrap();
        assert!((c[0] - 2.0).abs() < 1e-9);
        let fm = m.first_moment(0.25, 1.0).unwrap();
        assert!((fm[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn product_integrability_agrees_with_rays() {
        let coord = MeasureKind::RadialPolar {
            dimension: 1,
            alpha: 0.7,
            directions: Directions::Uniform {
                total_weight: 2.0,
                grid: 2,
            },
            tempering: Tempering::Exponential { rate: 0.5 },
            cutoff: None,
        };
        let atoms = MeasureKind::Atomic {
            atoms: vec![Atom::new(&[0.4], 1.0), Atom::new(&[-3.0], 2.0)],
            dimension: None,
        };
        let m = IntensityMeasure::new(MeasureKind::Product {
            per_coordinate: vec![coord, atoms],
            scales: vec![2.5, -0.5],
        })
        .unwrap();
        let a = m.integrability().unwrap();
        let b = m.product_integrability().unwrap();
        assert!((a - b).abs() < 1e-8 * b, "{a} vs {b}");
    }

    #[test]
    fn gaussian_subordination_mass() {
        // ρ = 2·δ_1, base N(0,1): ν(|z| > 1) = 2·P(|N(0,1)| > 1) = 2·0.3173105078629141
        let m = IntensityMeasure::new(MeasureKind::Subordinated {
            base: BaseProcess::Gaussian {
                dimension: 1,
                variance: 1.0,
            },
            subordinator: Box::new(MeasureKind::Atomic {
                atoms: vec![Atom::new(&[1.0], 2.0)],
                dimension: None,
            }),
            drift: 0.0,
        })
        .unwrap();
        let got = m.mass_of_region(1).unwrap();
        assert!((got - 2.0 * 0.317_310_507_862_914_1).abs() < 1e-10);
        assert_eq!(m.distance_to_support(&[5.0]), Some(0.0));
    }

    #[test]
    fn serde_roundtrip_keeps_exact_atoms() {
        let json = r#"{"variant":"atomic","atoms":[{"location":[1],"rate":1.0},{"location":["-sqrt(2)"],"rate":1.0}]}"#;
        let m: IntensityMeasure = serde_json::from_str(json).unwrap();
        assert!((m.atoms()[1].0[0] + std::f64::consts::SQRT_2).abs() < 1e-15);
        let back = serde_json::to_string(&m).unwrap();
        let again: IntensityMeasure = serde_json::from_str(&back).unwrap();
        assert_eq!(m, again);
    }

    #[test]
    fn distance_to_polar_support() {
        let m = polar_1d(1.0, Tempering::Truncation { radius: 1.0 }, None);
        assert_eq!(m.distance_to_support(&[0.5]), Some(0.0));
        assert!((m.distance_to_support(&[1.5]).unwrap() - 0.5).abs() < 1e-15);
    }
}
