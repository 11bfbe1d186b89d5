//! Property tests for structural invariants across modules.

use std::sync::Arc;

use jumpreach::levy::{sample_noise_seeded, NoiseRealization, SmallJumpMode};
use jumpreach::linalg;
use jumpreach::mc::clopper_pearson;
use jumpreach::measures::{
    check_assumption_v, h0_approximate, verify_assumption_v, Atom, H0Search, MeasureKind,
};
use jumpreach::planner::{self, GreedyOptions, InfeasibleKind, PlanError, Target};
use jumpreach::sde::{
    first_jump_time, integrate, integrate_truncated, zoo, Compensation, DriftFn, JumpCoefficient, MatrixFn,
};
use jumpreach::{IntensityMeasure, ModelSpec};
use proptest::prelude::*;

fn atoms_1d() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((prop_oneof![-3.0..-0.05f64, 0.05..3.0f64], 0.1..3.0f64), 1..6)
}

fn matrix_model(atoms: &[(f64, f64)], theta: f64, gain: f64, raw: bool) -> ModelSpec {
    let meas = IntensityMeasure::atomic_1d(atoms).unwrap();
    let drift: DriftFn = Arc::new(move |x: &[f64], o: &mut [f64]| o[0] = -theta * x[0] + 0.3 * x[0].cos());
    let sig: MatrixFn = Arc::new(move |x: &[f64], o: &mut [f64]| o[0] = 1.0 + gain * x[0].sin());
    let m = ModelSpec::new("prop", drift, JumpCoefficient::Matrix(sig), meas);
    if raw {
        m.with_compensation(Compensation::Raw)
    } else {
        m
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn atomic_mass_is_monotone_in_m(atoms in atoms_1d()) {
        let meas = IntensityMeasure::atomic_1d(&atoms).unwrap();
        let mut last = 0.0;
        for m in 1..=40u32 {
            let v = meas.mass_of_region(m).unwrap();
            prop_assert!(v >= last);
            last = v;
        }
        // 1/40 is below every atom norm
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        prop_assert!((last - total).abs() <= 1e-12 * total);
    }

    #[test]
    fn noise_is_reproducible_and_survives_serialization(atoms in atoms_1d(), seed in any::<u64>(), horizon in 0.0..5.0f64) {
        let meas = IntensityMeasure::atomic_1d(&atoms).unwrap();
        let a = sample_noise_seeded(&meas, horizon, 1e-3, SmallJumpMode::default(), seed).unwrap();
        let b = sample_noise_seeded(&meas, horizon, 1e-3, SmallJumpMode::default(), seed).unwrap();
        prop_assert_eq!(&a, &b);
        let back: NoiseRealization = serde_json::from_str(&serde_json::to_string(&a).unwrap()).unwrap();
        prop_assert_eq!(&a, &back);
        for j in &a.big_jumps {
            let n = linalg::norm(&j.mark);
            prop_assert!(n > a.cutoff);
            prop_assert!(n > 1.0 / j.annulus as f64);
            prop_assert!(j.annulus == 1 || n <= 1.0 / (j.annulus - 1) as f64);
        }
    }

    #[test]
    fn truncated_paths_coincide_before_the_first_big_jump(
        atoms in atoms_1d(),
        theta in 0.0..2.0f64,
        gain in -0.4..0.4f64,
        raw in any::<bool>(),
        seed in any::<u64>(),
        x0 in -2.0..2.0f64,
    ) {
        let model = matrix_model(&atoms, theta, gain, raw);
        let noise = sample_noise_seeded(&model.measure, 3.0, 1e-3, SmallJumpMode::default(), seed).unwrap();
        let full = integrate(&model, &[x0], &noise, 1e-2).unwrap();
        for m in [1u32, 2, 4, 8] {
            let tr = integrate_truncated(&model, &[x0], &noise, 1e-2, m).unwrap();
            let tau = first_jump_time(&noise, m, 1).unwrap_or(f64::INFINITY);
            prop_assert_eq!(&full.times, &tr.times);
            for (i, t) in full.times.iter().enumerate() {
                if *t < tau {
                    prop_assert_eq!(full.states[i][0].to_bits(), tr.states[i][0].to_bits());
                }
            }
            prop_assert!(tr.jumps.iter().all(|j| linalg::norm(&j.mark) <= 1.0 / m as f64));
        }
    }

    #[test]
    fn integration_is_bitwise_reproducible_and_jumps_are_booked(
        atoms in atoms_1d(),
        theta in 0.0..2.0f64,
        gain in -0.4..0.4f64,
        seed in any::<u64>(),
    ) {
        let model = matrix_model(&atoms, theta, gain, false);
        let noise = sample_noise_seeded(&model.measure, 2.0, 1e-3, SmallJumpMode::default(), seed).unwrap();
        let a = integrate(&model, &[0.5], &noise, 1e-2).unwrap();
        let b = integrate(&model, &[0.5], &noise, 1e-2).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.jumps.len(), noise.big_jumps.len());
        for j in &a.jumps {
            let step = model.sigma(&j.pre, &j.mark);
            prop_assert_eq!(j.post[0].to_bits(), (j.pre[0] + step[0]).to_bits());
        }
    }

    #[test]
    fn one_sided_paths_never_go_negative(b in 0.0..2.0f64, seed in any::<u64>()) {
        let model = zoo::one_sided_counterexample(b, None).unwrap();
        let noise = sample_noise_seeded(&model.measure, 2.0, 1e-3, SmallJumpMode::default(), seed).unwrap();
        let p = integrate(&model, &[0.0], &noise, 1e-2).unwrap();
        prop_assert!(p.states.iter().all(|s| s[0] >= 0.0));
    }

    #[test]
    fn binomial_interval_brackets_the_point(n in 1u64..5000, frac in 0.0..=1.0f64, conf in 0.5..0.999f64) {
        let k = ((n as f64) * frac).floor() as u64;
        let (lo, hi) = clopper_pearson(k, n, conf);
        let p = k as f64 / n as f64;
        prop_assert!(lo <= p && p <= hi);
        prop_assert_eq!(lo == 0.0, k == 0);
        prop_assert_eq!(hi == 1.0, k == n);
        let (lo2, hi2) = clopper_pearson(k, n, (conf + 1.0) / 2.0);
        prop_assert!(lo2 <= lo && hi2 >= hi);
    }

    #[test]
    fn h0_combinations_replay_within_tolerance(target in -4.0..4.0f64, tol in 0.05..0.5f64) {
        let meas = IntensityMeasure::atomic_1d(&[(1.0, 1.0), (-std::f64::consts::SQRT_2, 1.0)]).unwrap();
        let comb = h0_approximate(&meas, &[target], tol, &H0Search::default()).unwrap();
        let end = comb.replay(&[0.0]);
        prop_assert_eq!(&end, &comb.value);
        prop_assert!((end[0] - target).abs() <= tol);
    }

    #[test]
    fn assumption_v_certificates_reverify(h in -3.0..3.0f64, eta in 0.05..0.5f64) {
        let meas = IntensityMeasure::atomic_1d(&[(1.0, 1.0), (-std::f64::consts::SQRT_2, 1.0)]).unwrap();
        let cert = check_assumption_v(&meas, &[h], eta, &H0Search::default()).unwrap();
        prop_assert!(verify_assumption_v(&cert, &meas));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// Marks of a certificate fed back as a jump-only noise reproduce qₙ.
    #[test]
    fn certificate_marks_replay_through_the_integrator(cx in -2.5..2.5f64, cy in -2.5..2.5f64, r in 0.05..0.4f64) {
        let model = zoo::frame_fixed_2d();
        let frame = model.tags.frame.clone().unwrap();
        let target = Target::ball(vec![cx, cy], r);
        // atoms sit at fixed radii, so small targets may leave no admissible mark balls
        let plan = match planner::plan_greedy_frame(&model, &frame, &[0.0, 0.0], &target, &GreedyOptions::default()) {
            Ok(p) => p,
            Err(e) => {
                prop_assert!(matches!(e, PlanError::Infeasible { kind: InfeasibleKind::Radii, .. }), "{}", e);
                return Ok(());
            }
        };
        let cert = &plan.certificate;
        let n = cert.len();
        let jumps = cert
            .l
            .iter()
            .enumerate()
            .map(|(i, l)| ((i + 1) as f64 / (n + 1) as f64, l.clone()))
            .collect();
        let noise = NoiseRealization::from_jumps(2, 1.0, 1e-3, jumps);
        let path = integrate(&model, &[0.0, 0.0], &noise, 0.1).unwrap();
        prop_assert_eq!(path.final_state(), cert.terminal());
        for (j, q) in path.jumps.iter().zip(&cert.q[1..]) {
            prop_assert_eq!(&j.post, q);
        }
        prop_assert!(linalg::dist(cert.terminal(), &target.center) <= target.eta / 8.0);
        prop_assert!(cert.validate(&model).is_ok());
        // containment radii are positive and the final ball sits inside the target
        prop_assert!(cert.eta.iter().all(|e| *e > 0.0) && cert.eps.iter().all(|e| *e > 0.0));
        prop_assert!(linalg::dist(cert.terminal(), &target.center) + cert.eta[n] <= target.radius());
    }

    #[test]
    fn greedy_distance_decreases(cx in -3.0..3.0f64, cy in -3.0..3.0f64, r in 0.05..0.4f64) {
        let model = zoo::singular_stable_like(None).unwrap();
        let frame = model.tags.frame.clone().unwrap();
        let target = Target::ball(vec![cx, cy], r);
        let plan = planner::plan_greedy_frame(&model, &frame, &[0.1, -0.2], &target, &GreedyOptions::default()).unwrap();
        let d: Vec<f64> = plan.certificate.q.iter().map(|q| linalg::dist(q, &target.center)).collect();
        prop_assert!(d.windows(2).all(|w| w[1] < w[0]));
    }
}

#[test]
fn exact_atoms_survive_a_config_round_trip() {
    let kind = MeasureKind::Atomic {
        atoms: vec![
            Atom::exact(vec!["1".parse().unwrap()], 1.0),
            Atom::exact(vec!["-sqrt(2)".parse().unwrap()], 1.0),
        ],
        dimension: None,
    };
    let json = serde_json::to_string(&kind).unwrap();
    let back: MeasureKind = serde_json::from_str(&json).unwrap();
    assert_eq!(back, kind);
    let m = IntensityMeasure::new(back).unwrap();
    assert_eq!(m.atoms()[1].0[0], -std::f64::consts::SQRT_2);
}
