//! Recorded trajectories and stopping times.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::Observer;
use crate::levy::{NoiseRealization, SmallJumpMode};
use crate::linalg;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppliedJump {
    pub time: f64,
    pub mark: Vec<f64>,
    pub pre: Vec<f64>,
    pub post: Vec<f64>,
}

/// One simulated trajectory on the jump-adapted grid.
///
/// `states[i]` is the state at `times[i]` after any jump at that time;
/// `compensator[i]` is the compensator drift accumulated on `[0, times[i]]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub jump_flags: Vec<bool>,
    pub jumps: Vec<AppliedJump>,
    /// Jumps present in the noise but removed by truncation.
    pub removed: Vec<(f64, Vec<f64>)>,
    pub compensator: Vec<Vec<f64>>,
    pub seed: u64,
    pub dt: f64,
    pub cutoff: f64,
    pub small_jump_mode: SmallJumpMode,
    pub truncation: Option<u32>,
}

impl PathRecord {
    pub(crate) fn new(x0: &[f64], noise: &NoiseRealization, dt: f64, truncation: Option<u32>) -> Self {
        PathRecord {
            times: Vec::new(),
            states: vec![],
            jump_flags: Vec::new(),
            jumps: Vec::new(),
            removed: Vec::new(),
            compensator: vec![],
            seed: noise.seed,
            dt,
            cutoff: noise.cutoff,
            small_jump_mode: noise.small_jump_mode,
            truncation,
        }
        .with_start(x0)
    }

    fn with_start(mut self, x0: &[f64]) -> Self {
        self.times.push(0.0);
        self.states.push(x0.to_vec());
        self.jump_flags.push(false);
        self.compensator.push(vec![0.0; x0.len()]);
        self
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("a path has at least its initial state")
    }

    pub fn dim(&self) -> usize {
        self.states[0].len()
    }

    /// Writes `time,x1..xd,jump` rows.
    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["time".to_string()];
        header.extend((1..=self.dim()).map(|i| format!("x{i}")));
        header.push("jump".into());
        wr.write_record(&header)?;
        for ((t, x), f) in self.times.iter().zip(&self.states).zip(&self.jump_flags) {
            let mut row = vec![t.to_string()];
            row.extend(x.iter().map(f64::to_string));
            row.push(if *f { "1".into() } else { "0".into() });
            wr.write_record(&row)?;
        }
        wr.flush()?;
        Ok(())
    }
}

impl Observer for PathRecord {
    fn start(&mut self, _x0: &[f64]) {}

    fn step(&mut self, t: f64, x: &[f64], comp: &[f64]) -> bool {
        let acc = linalg::add(self.compensator.last().expect("initialised"), comp);
        self.times.push(t);
        self.states.push(x.to_vec());
        self.jump_flags.push(false);
        self.compensator.push(acc);
        true
    }

    fn jump(&mut self, t: f64, pre: &[f64], mark: &[f64], post: &[f64]) -> bool {
        *self.states.last_mut().expect("a step precedes every jump") = post.to_vec();
        *self.jump_flags.last_mut().expect("initialised") = true;
        self.jumps.push(AppliedJump {
            time: t,
            mark: mark.to_vec(),
            pre: pre.to_vec(),
            post: post.to_vec(),
        });
        true
    }

    fn removed(&mut self, t: f64, mark: &[f64]) {
        self.removed.push((t, mark.to_vec()));
    }
}

/// Time of the i-th jump with `‖mark‖ > 1/m`, if the horizon holds that many.
pub fn first_jump_time(noise: &NoiseRealization, m: u32, i: usize) -> Option<f64> {
    assert!(m >= 1 && i >= 1, "m and i must be ≥ 1");
    let r = 1.0 / m as f64;
    noise
        .big_jumps
        .iter()
        .filter(|j| linalg::norm(&j.mark) > r)
        .nth(i - 1)
        .map(|j| j.time)
}

/// First recorded time at which the state is outside the open ball
/// `B(center, radius)`; exits between skeleton points are not detected.
pub fn exit_time(path: &PathRecord, center: &[f64], radius: f64) -> Option<f64> {
    assert!(radius > 0.0, "radius must be positive");
    path.times
        .iter()
        .zip(&path.states)
        .find(|(_, x)| linalg::dist(x, center) >= radius)
        .map(|(t, _)| *t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::IntensityMeasure;
    use crate::sde::{integrate, DriftFn, JumpCoefficient, ModelSpec};
    use std::sync::Arc;

    fn still() -> DriftFn {
        Arc::new(|_: &[f64], o: &mut [f64]| o.fill(0.0))
    }

    #[test]
    fn jump_time_counting() {
        let n = NoiseRealization::from_jumps(
            1,
            1.0,
            1e-3,
            vec![(0.2, vec![2.0]), (0.5, vec![0.3]), (0.9, vec![1.5])],
        );
        assert_eq!(first_jump_time(&n, 1, 2), Some(0.9));
        assert_eq!(first_jump_time(&n, 1, 3), None);
        assert_eq!(first_jump_time(&n, 10, 1), Some(0.2));
        assert_eq!(first_jump_time(&n, 4, 2), Some(0.5));
    }

    #[test]
    fn exit_times_on_the_skeleton() {
        let meas = IntensityMeasure::atomic_1d(&[(1.0, 1.0)]).unwrap();
        let m = ModelSpec::new("add", still(), JumpCoefficient::Additive, meas)
            .with_compensation(crate::sde::Compensation::Raw);
        let n = NoiseRealization::from_jumps(1, 1.0, 1e-3, vec![]);
        let p = integrate(&m, &[0.0], &n, 0.1).unwrap();
        assert_eq!(exit_time(&p, &[0.0], 0.5), None);

        let n = NoiseRealization::from_jumps(1, 1.0, 1e-3, vec![(0.3, vec![1.0])]);
        let p = integrate(&m, &[0.0], &n, 0.1).unwrap();
        assert_eq!(exit_time(&p, &[0.0], 0.5), Some(0.3));
        assert_eq!(p.jumps[0].post, vec![1.0]);

        // constant drift 1 exits B(0, 0.25) at t = 0.25, first seen at 0.3
        let drift: DriftFn = Arc::new(|_: &[f64], o: &mut [f64]| o[0] = 1.0);
        let m = ModelSpec::new("drift", drift, JumpCoefficient::Zero, IntensityMeasure::zero(1));
        let n = NoiseRealization::from_jumps(1, 1.0, 1e-3, vec![]);
        let p = integrate(&m, &[0.0], &n, 0.1).unwrap();
        let t = exit_time(&p, &[0.0], 0.25).unwrap();
        assert!((t - 0.3).abs() < 1e-12);
    }

    #[test]
    fn csv_export() {
        let meas = IntensityMeasure::atomic_1d(&[(1.0, 1.0)]).unwrap();
        let m = ModelSpec::new("add", still(), JumpCoefficient::Additive, meas)
            .with_compensation(crate::sde::Compensation::Raw);
        let n = NoiseRealization::from_jumps(1, 0.2, 1e-3, vec![(0.15, vec![1.0])]);
        let p = integrate(&m, &[0.0], &n, 0.1).unwrap();
        let mut out = Vec::new();
        p.write_csv(&mut out).unwrap();
        let s = String::from_utf8(out).unwrap();
        assert_eq!(s, "time,x1,jump\n0,0,0\n0.1,0,0\n0.15,1,1\n0.2,1,0\n");
    }
}
