//! Distributional checks of the noise sampler and the trial seed streams.

use jumpreach::levy::{NoiseSampler, SmallJumpMode};
use jumpreach::measures::{Atom, Directions, MeasureKind, Tempering, WeightedDirection};
use jumpreach::rng::trial_rng;
use jumpreach::IntensityMeasure;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Two-sample chi-square homogeneity p-value for count histograms.
fn homogeneity_p(a: &[u64], b: &[u64]) -> f64 {
    let (na, nb) = (a.iter().sum::<u64>() as f64, b.iter().sum::<u64>() as f64);
    let mut stat = 0.0;
    let mut cells = 0;
    for (x, y) in a.iter().zip(b) {
        let tot = (x + y) as f64;
        if tot == 0.0 {
            continue;
        }
        cells += 1;
        let (ea, eb) = (tot * na / (na + nb), tot * nb / (na + nb));
        stat += (*x as f64 - ea).powi(2) / ea + (*y as f64 - eb).powi(2) / eb;
    }
    1.0 - ChiSquared::new((cells - 1) as f64).unwrap().cdf(stat)
}

fn histogram(counts: impl Iterator<Item = usize>, cap: usize) -> Vec<u64> {
    let mut h = vec![0u64; cap + 1];
    for c in counts {
        h[c.min(cap)] += 1;
    }
    h
}

#[test]
fn thinning_matches_direct_sampling() {
    let meas = IntensityMeasure::atomic_1d(&[(0.004, 3.0), (0.02, 2.0), (-0.5, 1.0), (1.5, 0.5)]).unwrap();
    let (fine, coarse) = (1e-3, 1e-2);
    let s_fine = NoiseSampler::new(&meas, fine, SmallJumpMode::DropWithCompensator).unwrap();
    let s_coarse = NoiseSampler::new(&meas, coarse, SmallJumpMode::DropWithCompensator).unwrap();
    let n = 4000u64;
    let thinned: Vec<_> = (0..n)
        .map(|k| s_fine.sample(1.0, &mut trial_rng(1, k)).unwrap().thin(coarse))
        .collect();
    let direct: Vec<_> = (0..n).map(|k| s_coarse.sample(1.0, &mut trial_rng(2, k)).unwrap()).collect();
    assert!(thinned.iter().flat_map(|r| &r.big_jumps).all(|j| j.mark[0].abs() > coarse));
    let h = |rs: &[jumpreach::levy::NoiseRealization]| histogram(rs.iter().map(|r| r.big_jumps.len()), 9);
    let p = homogeneity_p(&h(&thinned), &h(&direct));
    assert!(p > 1e-3, "jump-count histograms differ (p = {p})");
    // which atom: per-mark categories
    let cat = |rs: &[jumpreach::levy::NoiseRealization]| {
        let mut c = vec![0u64; 3];
        for j in rs.iter().flat_map(|r| &r.big_jumps) {
            let i = match j.mark[0] {
                m if m == 0.02 => 0,
                m if m == -0.5 => 1,
                _ => 2,
            };
            c[i] += 1;
        }
        c
    };
    let p = homogeneity_p(&cat(&thinned), &cat(&direct));
    assert!(p > 1e-3, "mark distributions differ (p = {p})");
}

#[test]
fn product_coordinates_jump_independently() {
    let coord = |alpha: f64| MeasureKind::RadialPolar {
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
                    weight: 0.5,
                },
            ],
        },
        tempering: Tempering::Truncation { radius: 2.0 },
        cutoff: None,
    };
    let meas = IntensityMeasure::new(MeasureKind::Product {
        per_coordinate: vec![
            coord(0.7),
            MeasureKind::Atomic {
                atoms: vec![Atom::new(&[1.0], 2.0), Atom::new(&[-0.3], 1.0)],
                dimension: None,
            },
        ],
        scales: vec![1.0, 0.5],
    })
    .unwrap();
    let s = NoiseSampler::new(&meas, 1e-2, SmallJumpMode::DropWithCompensator).unwrap();
    let n = 5000u64;
    let pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let r = s.sample(1.0, &mut trial_rng(3, k)).unwrap();
            assert!(r.big_jumps.iter().all(|j| (j.mark[0] == 0.0) != (j.mark[1] == 0.0)));
            let a = r.big_jumps.iter().filter(|j| j.mark[0] != 0.0).count() as f64;
            (a, r.big_jumps.len() as f64 - a)
        })
        .collect();
    let corr = correlation(&pairs);
    assert!(corr.abs() < 3.0 / (n as f64).sqrt(), "cross-correlation {corr}");
}

fn correlation(p: &[(f64, f64)]) -> f64 {
    let n = p.len() as f64;
    let (ma, mb) = (p.iter().map(|x| x.0).sum::<f64>() / n, p.iter().map(|x| x.1).sum::<f64>() / n);
    let cov = p.iter().map(|x| (x.0 - ma) * (x.1 - mb)).sum::<f64>() / n;
    let va = p.iter().map(|x| (x.0 - ma).powi(2)).sum::<f64>() / n;
    let vb = p.iter().map(|x| (x.1 - mb).powi(2)).sum::<f64>() / n;
    cov / (va * vb).sqrt()
}

#[test]
fn adjacent_trial_streams_are_uncorrelated() {
    // calibration instance: hit when the terminal mark sum is positive (p ≈ 1/2)
    let meas = IntensityMeasure::atomic_1d(&[(1.0, 1.0), (-1.0, 1.0)]).unwrap();
    let s = NoiseSampler::new(&meas, 1e-3, SmallJumpMode::DropWithCompensator).unwrap();
    let n = 20_000u64;
    let hits: Vec<f64> = (0..n)
        .map(|k| {
            let r = s.sample(1.0, &mut trial_rng(77, k)).unwrap();
            f64::from(r.mark_sum()[0] > 0.0)
        })
        .collect();
    for lag in [1usize, 2, 7] {
        let pairs: Vec<(f64, f64)> = hits.windows(lag + 1).map(|w| (w[0], w[lag])).collect();
        let corr = correlation(&pairs);
        assert!(corr.abs() < 3.0 / (pairs.len() as f64).sqrt(), "lag {lag}: correlation {corr}");
    }
}
