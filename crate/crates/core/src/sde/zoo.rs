//! Named models.
//!
//! Notes on coercivity and growth are recorded per model in
//! [`ModelTags::notes`]; they are documented, not machine-checked.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;
use std::sync::Arc;

use thiserror::Error;

use super::{
    Compensation, DriftFn, FrameSpec, JumpCoefficient, LipschitzBounds, MatrixFn, ModelSpec,

};
use crate::linalg;
use crate::measures::{
    Atom, Directions, IntensityMeasure, MeasureError, MeasureKind, Tempering, WeightedDirection,
};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ZooError {
    #[error("unknown model `{0}`; known models: {KNOWN}")]
    Unknown(String),
    #[error("model `{model}`: {msg}")]
    Param { model: String, msg: String },
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

const KNOWN: &str = "frozen, ornstein_uhlenbeck, one_sided_counterexample, quadrant_locked_2d, frame_fixed_2d, monotone_cubic, singular_stable_like";

pub const MODEL_NAMES: [&str; 7] = [
    "frozen",
    "ornstein_uhlenbeck",
    "one_sided_counterexample",
    "quadrant_locked_2d",
    "frame_fixed_2d",
    "monotone_cubic",
    "singular_stable_like",
];

/// Radii of the compound-Poisson atoms placed along each frame vector.
pub const FRAME_RADII: [f64; 3] = [0.25, 0.5, 1.0];

fn zero_drift() -> DriftFn {
    Arc::new(|_: &[f64], out: &mut [f64]| out.fill(0.0))
}

fn constant_drift(b: Vec<f64>) -> DriftFn {
    Arc::new(move |_: &[f64], out: &mut [f64]| out.copy_from_slice(&b))
}

/// `A ≡ 0`, `σ ≡ 0`: nothing moves.
pub fn frozen(dim: usize) -> ModelSpec {
    let e1 = linalg::unit(dim, 0);
    let meas = IntensityMeasure::atomic(vec![
        Atom::new(&e1, 1.0),
        Atom::new(&linalg::scale(&e1, -1.0), 1.0),
    ])
    .expect("valid atoms");
    ModelSpec::new("frozen", zero_drift(), JumpCoefficient::Zero, meas)
        .with_compensation(Compensation::Raw)
        .with_lipschitz(LipschitzBounds {
            state: 0.0,
            state_per_mark: 0.0,
            mark: 0.0,
        })
}

/// `dX = −θX dt + dL`.
pub fn ornstein_uhlenbeck(theta: f64, measure: IntensityMeasure) -> ModelSpec {
    let drift: DriftFn = Arc::new(move |x: &[f64], out: &mut [f64]| {
        for (o, v) in out.iter_mut().zip(x) {
            *o = -theta * v;
        }
    });
    let mut m = ModelSpec::new("ornstein_uhlenbeck", drift, JumpCoefficient::Additive, measure);
    m.tags.monotone_drift = theta >= 0.0;
    m.tags.notes = vec![
        "coercivity: ⟨A(x), x⟩ = −θ|x|²".into(),
        "growth: |A(x)| = θ|x|".into(),
    ];
    m
}

/// Default positive atoms of the one-sided model.
pub fn one_sided_measure() -> IntensityMeasure {
    IntensityMeasure::atomic_1d(&[(0.5, 1.0), (1.0, 1.0)]).expect("valid atoms")
}

/// `dX = b dt + dL` with `b ≥ 0` and only positive jumps: started at 0 the
/// path never becomes negative, so no ball in (−∞, 0) is ever hit.
pub fn one_sided_counterexample(b: f64, measure: Option<IntensityMeasure>) -> Result<ModelSpec, ZooError> {
    let param = |msg: &str| ZooError::Param {
        model: "one_sided_counterexample".into(),
        msg: msg.into(),
    };
    if !(b.is_finite() && b >= 0.0) {
        return Err(param("drift b must be ≥ 0"));
    }
    let measure = measure.unwrap_or_else(one_sided_measure);
    if measure.dim() != 1 {
        return Err(param("measure must be one-dimensional"));
    }
    if !measure.is_finite_activity() || measure.atoms().iter().any(|(a, _)| a[0] <= 0.0) {
        return Err(param("measure must be finite with positive atoms only"));
    }
    let mut m = ModelSpec::new(
        "one_sided_counterexample",
        constant_drift(vec![b]),
        JumpCoefficient::Additive,
        measure,
    )
    .with_compensation(Compensation::Raw);
    m.tags.one_sided = true;
    m.tags.monotone_drift = true;
    Ok(m)
}

fn frame_atoms(frame: &[Vec<f64>]) -> IntensityMeasure {
    let mut atoms = Vec::new();
    for f in frame {
        for r in FRAME_RADII {
            atoms.push(Atom::new(&linalg::scale(f, r), 1.0));
        }
    }
    IntensityMeasure::atomic(atoms).expect("valid atoms")
}

fn frame_model(name: &str, frame: Vec<Vec<f64>>, kappa: f64) -> ModelSpec {
    let meas = frame_atoms(&frame);
    let mut m = ModelSpec::new(name, zero_drift(), JumpCoefficient::Additive, meas)
        .with_compensation(Compensation::Raw);
    m.tags.frame = Some(FrameSpec {
        vectors: frame,
        kappa,
        lambda: 1.0,
    });
    m
}

/// `σ = I`, jumps only along `e₁`, `e₂` (compound Poisson at radii 0.25,
/// 0.5, 1): the open negative quadrant is unreachable.
pub fn quadrant_locked_2d() -> ModelSpec {
    let mut m = frame_model(
        "quadrant_locked_2d",
        vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        0.38,
    );
    m.tags.one_sided = true;
    m
}

/// Adds the direction `e₃ = (−1/√2, −1/√2)`; the frame `{e₁, e₂, e₃}`
/// satisfies the covering condition with κ = cos(67.5°) ≈ 0.3827.
pub fn frame_fixed_2d() -> ModelSpec {
    frame_model(
        "frame_fixed_2d",
        vec![
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![-FRAC_1_SQRT_2, -FRAC_1_SQRT_2],
        ],
        0.38,
    )
}

/// Symmetric α = 0.5 polar measure truncated at radius 2.
pub fn cubic_default_measure(dim: usize) -> IntensityMeasure {
    let directions = if dim == 1 {
        Directions::Discrete {
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
        }
    } else {
        Directions::Uniform {
            total_weight: 2.0,
            grid: 64,
        }
    };
    IntensityMeasure::new(MeasureKind::RadialPolar {
        dimension: dim,
        alpha: 0.5,
        directions,
        tempering: Tempering::Truncation { radius: 2.0 },
        cutoff: None,
    })
    .expect("valid polar measure")
}

/// `A(x) = −x³` componentwise with additive noise; the drift is monotone,
/// `⟨A(x) − A(y), x − y⟩ ≤ 0`.
pub fn monotone_cubic(dim: usize, measure: Option<IntensityMeasure>) -> Result<ModelSpec, ZooError> {
    let measure = measure.unwrap_or_else(|| cubic_default_measure(dim));
    if measure.dim() != dim {
        return Err(ZooError::Param {
            model: "monotone_cubic".into(),
            msg: format!("measure dimension {} differs from d = {dim}", measure.dim()),
        });
    }
    let drift: DriftFn = Arc::new(|x: &[f64], out: &mut [f64]| {
        for (o, v) in out.iter_mut().zip(x) {
            *o = -v * v * v;
        }
    });
    let mut m = ModelSpec::new("monotone_cubic", drift, JumpCoefficient::Additive, measure);
    m.tags.monotone_drift = true;
    m.tags.notes = vec![
        "coercivity: ⟨A(x), x⟩ = −Σ xᵢ⁴ ≤ 0".into(),
        "growth: |A(x)| ≤ |x|³ (polynomial, not linear)".into(),
    ];
    Ok(m)
}

/// Rotation angle of the jump matrix at x.
fn twist(x: &[f64]) -> f64 {
    0.3 * x[0].sin()
}

/// Bounded Hölder drift and `σ(x) = R(0.3 sin x₁)·diag(1.5, 0.8)`, so
/// `Λ⁻¹|ξ| ≤ |σ(x)ξ| ≤ Λ|ξ|` with Λ = 1.5. The frame `±e₁, ±e₂` is pushed
/// to an orthonormal cross, giving κ = 1/√2.
pub fn singular_stable_like(measure: Option<IntensityMeasure>) -> Result<ModelSpec, ZooError> {
    let measure = match measure {
        Some(m) => m,
        None => IntensityMeasure::new(MeasureKind::RadialPolar {
            dimension: 2,
            alpha: 1.2,
            directions: Directions::Discrete {
                points: [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]
                    .iter()
                    .map(|d| WeightedDirection {
                        direction: d.to_vec(),
                        weight: 1.0,
                    })
                    .collect(),
            },
            tempering: Tempering::Truncation { radius: 1.0 },
            cutoff: None,
        })?,
    };
    if measure.dim() != 2 {
        return Err(ZooError::Param {
            model: "singular_stable_like".into(),
            msg: "measure must be two-dimensional".into(),
        });
    }
    let drift: DriftFn = Arc::new(|x: &[f64], out: &mut [f64]| {
        for (o, v) in out.iter_mut().zip(x) {
            *o = 0.5 * v.signum() * v.abs().min(1.0).sqrt();
        }
    });
    let sigma: MatrixFn = Arc::new(|x: &[f64], out: &mut [f64]| {
        let (s, c) = twist(x).sin_cos();
        out.copy_from_slice(&[1.5 * c, -0.8 * s, 1.5 * s, 0.8 * c]);
    });
    let mut m = ModelSpec::new("singular_stable_like", drift, JumpCoefficient::Matrix(sigma), measure)
        .with_lipschitz(LipschitzBounds {
            // ‖R(θ) − R(θ')‖ ≤ |θ − θ'| ≤ 0.3|x − x'| and ‖diag(1.5, 0.8) z‖ ≤ 1.5‖z‖
            state: 0.0,
            state_per_mark: 0.45,
            mark: 1.5,
        });
    m.tags.frame = Some(FrameSpec {
        vectors: vec![
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![-1.0, 0.0],
            vec![0.0, -1.0],
        ],
        kappa: 0.7,
        lambda: 1.5,
    });
    m.tags.notes = vec![
        "drift is bounded and 1/2-Hölder, not Lipschitz at the origin".into(),
    ];
    Ok(m)
}

/// Builds a zoo model by name. Recognised parameters: `dim` (frozen,
/// monotone_cubic), `theta` (ornstein_uhlenbeck), `b` (one_sided_counterexample).
/// `measure` replaces the model's default intensity where allowed.
pub fn build(
    name: &str,
    params: &BTreeMap<String, f64>,
    measure: Option<IntensityMeasure>,
) -> Result<ModelSpec, ZooError> {
    let get = |k: &str, default: f64| params.get(k).copied().unwrap_or(default);
    let dim = || -> Result<usize, ZooError> {
        let d = get("dim", measure.as_ref().map_or(1, |m| m.dim()) as f64);
        if d >= 1.0 && d.fract() == 0.0 {
            Ok(d as usize)
        } else {
            Err(ZooError::Param {
                model: name.into(),
                msg: format!("dim must be a positive integer, got {d}"),
            })
        }
    };
    let no_measure = |m: &Option<IntensityMeasure>| -> Result<(), ZooError> {
        if m.is_some() {
            Err(ZooError::Param {
                model: name.into(),
                msg: "this model has a fixed intensity measure".into(),
            })
        } else {
            Ok(())
        }
    };
    let known: &[&str] = match name {
        "frozen" | "monotone_cubic" => &["dim"],
        "ornstein_uhlenbeck" => &["theta"],
        "one_sided_counterexample" => &["b"],
        _ => &[],
    };
    if let Some(k) = params.keys().find(|k| !known.contains(&k.as_str())) {
        return Err(ZooError::Param {
            model: name.into(),
            msg: format!("unknown parameter `{k}`"),
        });
    }
    match name {
        "frozen" => {
            no_measure(&measure)?;
            Ok(frozen(dim()?))
        }
        "ornstein_uhlenbeck" => {
            let m = measure.ok_or_else(|| ZooError::Param {
                model: name.into(),
                msg: "needs a measure".into(),
            })?;
            Ok(ornstein_uhlenbeck(get("theta", 1.0), m))
        }
        "one_sided_counterexample" => one_sided_counterexample(get("b", 0.0), measure),
        "quadrant_locked_2d" => {
            no_measure(&measure)?;
            Ok(quadrant_locked_2d())
        }
        "frame_fixed_2d" => {
            no_measure(&measure)?;
            Ok(frame_fixed_2d())
        }
        "monotone_cubic" => monotone_cubic(dim()?, measure),
        "singular_stable_like" => singular_stable_like(measure),
        other => Err(ZooError::Unknown(other.into())),
    }
}
