//! Experiment configuration (TOML).

use std::collections::BTreeMap;
use std::path::PathBuf;

use jumpreach::levy::{SmallJumpMode, DEFAULT_CUTOFF};
use jumpreach::measures::MeasureKind;
use jumpreach::mc::DEFAULT_CONFIDENCE;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Simulate,
    Plan,
    VerifyCert,
    EstimateHitting,
    EstimateSupport,
    CheckSupport,
    CheckEProperty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlannerChoice {
    /// Greedy frame if the model declares a frame, additive if σ(x, z) = z,
    /// otherwise the one-step inverse.
    #[default]
    Auto,
    Additive,
    OneStepInverse,
    GreedyFrame,
    Coordinatewise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Numerics {
    pub horizon: f64,
    pub dt: f64,
    pub cutoff: f64,
    pub trials: u64,
    pub confidence: f64,
    pub small_jump_mode: SmallJumpMode,
}

impl Default for Numerics {
    fn default() -> Self {
        Numerics {
            horizon: 1.0,
            dt: 1e-2,
            cutoff: DEFAULT_CUTOFF,
            trials: 10_000,
            confidence: DEFAULT_CONFIDENCE,
            small_jump_mode: SmallJumpMode::DropWithCompensator,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlanConfig {
    pub planner: PlannerChoice,
    /// Multiplicity budget of the additive search.
    pub budget: u32,
    /// Samples per step in certificate verification.
    pub samples: usize,
    pub max_steps: usize,
    /// Coordinatewise planner: per-coordinate scales βᵢ (default all 1).
    pub scales: Vec<f64>,
    /// Coordinatewise planner: dyadic atom levels ±2^{−k}, k = 1..=levels.
    pub levels: i32,
    pub kappa_lo: f64,
    pub kappa_hi: f64,
    /// Certificate to check (verify-cert).
    pub certificate: Option<PathBuf>,
}

impl Default for PlanConfig {
    fn default() -> Self {
        PlanConfig {
            planner: PlannerChoice::Auto,
            budget: 40,
            samples: 10_000,
            max_steps: 100_000,
            scales: Vec::new(),
            levels: 20,
            kappa_lo: 0.5,
            kappa_hi: 2.0,
            certificate: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub model: ModelConfig,
    /// Intensity measure; models with a fixed measure reject one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure: Option<MeasureKind>,
    #[serde(default)]
    pub seed: u64,
    /// Start state (zero vector of the model's dimension by default).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<Vec<f64>>,
    /// Second start state for check-e-property.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub other: Option<Vec<f64>>,
    #[serde(default)]
    pub targets: Vec<Ball>,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub plan: PlanConfig,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    /// Canonical TOML rendering with every default filled in.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let n = &self.numerics;
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if !(n.horizon.is_finite() && n.horizon >= 0.0) {
            return bad(format!("numerics.horizon must be finite and ≥ 0, got {}", n.horizon));
        }
        if !(n.dt.is_finite() && n.dt > 0.0) {
            return bad(format!("numerics.dt must be positive, got {}", n.dt));
        }
        if !(n.cutoff.is_finite() && n.cutoff > 0.0) {
            return bad(format!("numerics.cutoff must be positive, got {}", n.cutoff));
        }
        if n.trials == 0 {
            return bad("numerics.trials must be ≥ 1".into());
        }
        if !(n.confidence > 0.0 && n.confidence < 1.0) {
            return bad(format!("numerics.confidence must lie in (0, 1), got {}", n.confidence));
        }
        for (i, b) in self.targets.iter().enumerate() {
            if !(b.radius > 0.0 && b.radius.is_finite()) {
                return bad(format!("targets[{i}].radius must be positive, got {}", b.radius));
            }
        }
        let needs_target = matches!(
            self.kind,
            ExperimentKind::Plan | ExperimentKind::EstimateHitting | ExperimentKind::EstimateSupport
        );
        if needs_target && self.targets.is_empty() {
            return bad(format!("kind {:?} needs at least one [[targets]] entry", self.kind));
        }
        if self.kind == ExperimentKind::VerifyCert && self.plan.certificate.is_none() {
            return bad("kind verify-cert needs plan.certificate".into());
        }
        if self.kind == ExperimentKind::CheckEProperty && self.other.is_none() {
            return bad("kind check-e-property needs `other` (the second start state)".into());
        }
        Ok(())
    }
}
