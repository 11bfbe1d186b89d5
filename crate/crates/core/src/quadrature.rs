//! Adaptive Gauss–Kronrod (7/15) quadrature on finite intervals.
//!
//! Besides the integral value the routine returns the final panel partition,
//! so callers can reuse the same nodes to discretize a measure into weighted
//! points (see [`Integral::nodes`]).

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

pub const DEFAULT_REL_TOL: f64 = 1e-11;
const MAX_PANELS: usize = 4000;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum QuadratureError {
    #[error("quadrature did not converge on [{a}, {b}]: estimate {value}, error {error} after {panels} panels")]
    NonConvergence {
        a: f64,
        b: f64,
        value: f64,
        error: f64,
        panels: usize,
    },
    #[error("integrand produced a non-finite value at {at}")]
    NonFinite { at: f64 },
    #[error("invalid interval [{a}, {b}]")]
    BadInterval { a: f64, b: f64 },
}

#[derive(Debug, Clone)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    /// Final panels, sorted by left endpoint.
    pub panels: Vec<(f64, f64)>,
}

impl Integral {
    /// Kronrod nodes and weights over the final partition: Σ wᵢ g(xᵢ) ≈ ∫ g.
    pub fn nodes(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.panels.len() * 15);
        for &(a, b) in &self.panels {
            let c = 0.5 * (a + b);
            let h = 0.5 * (b - a);
            for j in 0..7 {
                out.push((c - h * XGK[j], h * WGK[j]));
            }
            out.push((c, h * WGK[7]));
            for j in (0..7).rev() {
                out.push((c + h * XGK[j], h * WGK[j]));
            }
        }
        out
    }
}

#[derive(Debug)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<Panel, QuadratureError> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    if !fc.is_finite() {
        return Err(QuadratureError::NonFinite { at: c });
    }
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let x1 = c - h * XGK[j];
        let x2 = c + h * XGK[j];
        let (f1, f2) = (f(x1), f(x2));
        if !f1.is_finite() {
            return Err(QuadratureError::NonFinite { at: x1 });
        }
        if !f2.is_finite() {
            return Err(QuadratureError::NonFinite { at: x2 });
        }
        kronrod += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    Ok(Panel {
        a,
        b,
        value: kronrod * h,
        error: ((kronrod - gauss) * h).abs(),
    })
}

/// Integrate `f` over `[a, b]` until the summed error estimate falls below
/// `max(abs_tol, rel_tol·|I|)`.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<Integral, QuadratureError> {
    if !(a.is_finite() && b.is_finite()) || b < a {
        return Err(QuadratureError::BadInterval { a, b });
    }
    if a == b {
        return Ok(Integral {
            value: 0.0,
            error: 0.0,
            panels: Vec::new(),
        });
    }
    // Start from a few panels so narrow features are not missed entirely.
    let mut heap = BinaryHeap::new();
    let start = 4;
    for k in 0..start {
        let lo = a + (b - a) * k as f64 / start as f64;
        let hi = if k + 1 == start {
            b
        } else {
            a + (b - a) * (k + 1) as f64 / start as f64
        };
        heap.push(gk15(&f, lo, hi)?);
    }
    loop {
        let value: f64 = heap.iter().map(|p| p.value).sum();
        let error: f64 = heap.iter().map(|p| p.error).sum();
        if error <= abs_tol.max(rel_tol * value.abs()) {
            let mut panels: Vec<(f64, f64)> = heap.iter().map(|p| (p.a, p.b)).collect();
            panels.sort_by(|x, y| x.0.total_cmp(&y.0));
            return Ok(Integral {
                value,
                error,
                panels,
            });
        }
        if heap.len() >= MAX_PANELS {
            return Err(QuadratureError::NonConvergence {
                a,
                b,
                value,
                error,
                panels: heap.len(),
            });
        }
        let worst = heap.pop().expect("non-empty heap");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // cannot split further in floating point
            return Err(QuadratureError::NonConvergence {
                a,
                b,
                value,
                error,
                panels: heap.len() + 1,
            });
        }
        heap.push(gk15(&f, worst.a, mid)?);
        heap.push(gk15(&f, mid, worst.b)?);
    }
}
