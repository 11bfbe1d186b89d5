//! Sampling from the normalised restriction `ν|_R / ν(R)`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{chi_tail, IntensityMeasure, MeasureError, Ray, Region, Result};
use crate::linalg;

const MAX_REJECTIONS: usize = 1_000_000;

#[derive(Debug, Clone)]
enum Entry {
    Atom(Vec<f64>),
    /// Ray restricted to radii in (lo, hi].
    Ray { ray: usize, lo: f64, hi: f64 },
    /// Gaussian `N(0, v·I)` conditioned on `lo < ‖z‖ ≤ hi`.
    Gauss { v: f64, lo: f64, hi: f64, prob: f64 },
}

/// Precomputed sampler for one (measure, region) pair.
#[derive(Debug, Clone)]
pub struct RegionSampler {
    rays: Vec<Ray>,
    dim: usize,
    entries: Vec<Entry>,
    cumulative: Vec<f64>,
    total: f64,
}

impl RegionSampler {
    pub fn new(measure: &IntensityMeasure, region: &Region) -> Result<Self> {
        if measure.product_base_only() {
            return Err(MeasureError::Unsupported(
                "region sampling of a subordinated product measure".into(),
            ));
        }
        let parts = measure.parts();
        let mut entries = Vec::new();
        let mut masses = Vec::new();
        for (a, rate) in &parts.atoms {
            if region.contains(a) {
                entries.push(Entry::Atom(a.clone()));
                masses.push(*rate);
            }
        }
        for (i, ray) in parts.rays.iter().enumerate() {
            let Some((lo, hi)) = region.ray_interval(&ray.dir) else {
                continue;
            };
            let hi = hi.min(ray.radius);
            if hi <= lo {
                continue;
            }
            let mass = ray.moment(0.0, lo, hi)?;
            if mass > 0.0 {
                entries.push(Entry::Ray { ray: i, lo, hi });
                masses.push(mass);
            }
        }
        if let Some(g) = &parts.gaussian {
            let (lo, hi) = match region {
                Region::Outside { radius } => (*radius, f64::INFINITY),
                Region::Annulus { inner, outer } => (*inner, *outer),
                Region::Ball { .. } => {
                    return Err(MeasureError::Unsupported(
                        "ball sampling of a subordinated Gaussian measure".into(),
                    ))
                }
            };
            for (s, w) in g.mixing_nodes()? {
                let v = s * g.variance;
                let prob = chi_tail(g.dim, v, lo)
                    - if hi.is_finite() {
                        chi_tail(g.dim, v, hi)
                    } else {
                        0.0
                    };
                if prob > 0.0 && w > 0.0 {
                    entries.push(Entry::Gauss { v, lo, hi, prob });
                    masses.push(w * prob);
                }
            }
        }
        let mut cumulative = Vec::with_capacity(masses.len());
        let mut total = 0.0;
        for m in masses {
            total += m;
            cumulative.push(total);
        }
        if !total.is_finite() {
            return Err(MeasureError::InfiniteMass);
        }
        if total <= 0.0 {
            return Err(MeasureError::EmptyRegion);
        }
        Ok(RegionSampler {
            rays: parts.rays.clone(),
            dim: measure.dim(),
            entries,
            cumulative,
            total,
        })
    }

    /// ν(region) as computed while building the sampler.
    pub fn mass(&self) -> f64 {
        self.total
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        let u = rng.random::<f64>() * self.total;
        let k = self
            .cumulative
            .partition_point(|&c| c <= u)
            .min(self.entries.len() - 1);
        match &self.entries[k] {
            Entry::Atom(a) => Ok(a.clone()),
            Entry::Ray { ray, lo, hi } => {
                let ray = &self.rays[*ray];
                let r = sample_radius(ray, *lo, *hi, rng)?;
                Ok(linalg::scale(&ray.dir, r))
            }
            Entry::Gauss { v, lo, hi, prob } => sample_gauss(self.dim, *v, *lo, *hi, *prob, rng),
        }
    }
}

/// Radius from `q(r) r^{-1-α}` on (lo, hi], by uniform sampling in
/// `v = r^{-α}` (or `ln r` when α = 0) and rejection on q.
fn sample_radius<R: Rng + ?Sized>(ray: &Ray, lo: f64, hi: f64, rng: &mut R) -> Result<f64> {
    let hi = if hi.is_infinite() {
        match ray.tempering {
            super::Tempering::Exponential { rate } if ray.alpha == 0.0 => lo + 60.0 / rate,
            _ if ray.alpha > 0.0 => f64::INFINITY,
            _ => return Err(MeasureError::InfiniteMass),
        }
    } else {
        hi
    };
    let env = ray.tempering.sup_from(lo);
    for _ in 0..MAX_REJECTIONS {
        let u: f64 = rng.random();
        let r = if ray.alpha == 0.0 {
            (lo.ln() + u * (hi.ln() - lo.ln())).exp()
        } else {
            let a = -ray.alpha;
            let vlo = if hi.is_infinite() { 0.0 } else { hi.powf(a) };
            let vhi = lo.powf(a);
            let v = vlo + u * (vhi - vlo);
            v.powf(1.0 / a)
        };
        if !(r > lo && r <= hi) {
            continue;
        }
        if ray.tempering.is_piecewise_constant() || rng.random::<f64>() * env <= ray.tempering.eval(r) {
            return Ok(r);
        }
    }
    Err(MeasureError::Unsupported(
        "rejection sampler for the radial density did not accept".into(),
    ))
}

fn gaussian_vec<R: Rng + ?Sized>(dim: usize, sd: f64, rng: &mut R) -> Vec<f64> {
    (0..dim)
        .map(|_| { let g: f64 = StandardNormal.sample(rng); sd * g })
        .collect::<Vec<f64>>()
}

fn sample_gauss<R: Rng + ?Sized>(
    dim: usize,
    v: f64,
    lo: f64,
    hi: f64,
    prob: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let sd = v.sqrt();
    if prob >= 0.05 {
        for _ in 0..MAX_REJECTIONS {
            let z = gaussian_vec(dim, sd, rng);
            let n = linalg::norm(&z);
            if n > lo && n <= hi {
                return Ok(z);
            }
        }
    }
    // invert the conditional radial tail by bisection
    let t_lo = chi_tail(dim, v, lo);
    let t_hi = if hi.is_finite() { chi_tail(dim, v, hi) } else { 0.0 };
    let target = t_hi + rng.random::<f64>() * (t_lo - t_hi);
    let mut a = lo;
    let mut b = if hi.is_finite() {
        hi
    } else {
        let mut b = lo.max(sd);
        while chi_tail(dim, v, b) > target && b < 1e300 {
            b *= 2.0;
        }
        b
    };
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if chi_tail(dim, v, m) > target {
            a = m;
        } else {
            b = m;
        }
        if b - a <= 1e-15 * b {
            break;
        }
    }
    let r = 0.5 * (a + b);
    let dir = loop {
        if let Some(u) = linalg::normalize(&gaussian_vec(dim, 1.0, rng)) {
            break u;
        }
    };
    Ok(linalg::scale(&dir, r))
}

/// One draw from `ν|_region / ν(region)`.
pub fn sample_jump<R: Rng + ?Sized>(
    measure: &IntensityMeasure,
    region: &Region,
    rng: &mut R,
) -> Result<Vec<f64>> {
    RegionSampler::new(measure, region)?.sample(rng)
}
