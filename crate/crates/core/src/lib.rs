//! Simulation and verification toolkit for finite-dimensional SDEs driven by
//! pure-jump Lévy noise.
//!
//! The crate is organised bottom-up:
//!
//! * [`measures`] – intensity measures ν, region masses, sampling, support
//!   analysis and the ℕ-combination search behind the additive planner.
//! * [`levy`] – noise realizations (big jumps above a cutoff plus small-jump
//!   handling), α-stable variates and subordinated processes.
//! * [`sde`] – model specifications, the jump-adapted Euler integrator,
//!   truncated paths and stopping times, plus a small model zoo.
//! * [`planner`] – jump-chain reachability certificates and the planners that
//!   construct them.
//! * [`mc`] – Monte Carlo estimators with exact binomial intervals and the
//!   exact compound-Poisson hitting oracle.

pub mod exact;
pub mod linalg;
pub mod levy;
pub mod mc;
pub mod measures;
pub mod planner;
pub mod quadrature;
pub mod rng;
pub mod sde;

pub use measures::{IntensityMeasure, MeasureError, Region};
pub use sde::{ModelSpec, PathRecord};
