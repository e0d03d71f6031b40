use std::f64::consts::PI;

use pnc_core::detectors::{kd_detect, mpd_detect, PhaseGrid};
use pnc_core::estimator::{
    estimate_gains, fine_gains, kd_mpd, rough_gains, EstimatorParams, GainEstimate,
};
use pnc_core::likelihood::joint_log_lik_s1;
use pnc_core::model::{synthesize_packet, ChannelState, Packet, SourcePair, SystemConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn packet(cfg: &SystemConfig, gains: (f64, f64), cfo: f64, seed: u64) -> Packet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let src = SourcePair::random(cfg.n_symbols, &mut rng);
    let ch = ChannelState::new(gains.0, gains.1, 0.2 * PI, cfo).unwrap();
    synthesize_packet(src, ch, cfg, &mut rng)
}

/// Packet whose every symbol has the users on different tones.
fn all_s1(cfg: &SystemConfig, gains: (f64, f64), seed: u64) -> Packet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a: Vec<u8> = (0..cfg.n_symbols).map(|_| rng.random_range(0..2)).collect();
    let b = a.iter().map(|x| 1 - x).collect();
    let src = SourcePair::new(a, b).unwrap();
    let ch = ChannelState::new(gains.0, gains.1, 0.3, 0.0).unwrap();
    synthesize_packet(src, ch, cfg, &mut rng)
}

fn objective(p: &Packet, i1: &[usize], h: (f64, f64), n0: f64) -> f64 {
    i1.iter().map(|&n| joint_log_lik_s1(p.observations[n], h.0, h.1, n0)).sum()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

#[test]
fn rough_is_exact_without_noise_and_clamps_in_deep_noise() {
    let cfg = SystemConfig::new(32, 1e-6, 1e-12, 10_000.0).unwrap();
    let p = all_s1(&cfg, (1.0, 2.0), 3);
    let all: Vec<usize> = (0..32).collect();
    let (lo, hi) = rough_gains(&p, &all, cfg.n0).unwrap();
    assert!((lo - 1.0).abs() < 1e-5 && (hi - 2.0).abs() < 1e-5, "{lo} {hi}");

    let (lo, _) = rough_gains(&p, &all, 5.0).unwrap();
    assert_eq!(lo, 0.0);
    assert!(rough_gains(&p, &[], cfg.n0).is_err());
}

#[test]
fn rough_lands_within_ten_percent() {
    let cfg = SystemConfig::at_snr_db(10.0);
    let mut good = 0;
    for seed in 0..1000 {
        let p = packet(&cfg, (1.0, 2.0), -2000.0, seed);
        let i1 = kd_detect(&p).i1;
        let (lo, hi) = rough_gains(&p, &i1, cfg.n0).unwrap();
        if (lo - 1.0).abs() <= 0.1 && (hi - 2.0).abs() <= 0.2 {
            good += 1;
        }
    }
    assert!(good >= 900, "{good}/1000");
}

#[test]
fn fine_search_matches_dense_grid() {
    let cfg = SystemConfig::new(64, 1e-6, 0.1, 10_000.0).unwrap();
    let params = EstimatorParams::default();
    let i1: Vec<usize> = (0..64).collect();
    for seed in 0..10 {
        let p = all_s1(&cfg, (1.0, 2.0), seed);
        let rough = rough_gains(&p, &i1, cfg.n0).unwrap();
        let est = fine_gains(&p, &i1, rough, cfg.n0, &params).unwrap();

        let n_dense = 10 * (params.n_grid - 1) + 1;
        let axis = |c: f64| {
            let lo = (c - params.beta(c)).max(0.0);
            let step = (c + params.beta(c) - lo) / (n_dense - 1) as f64;
            (0..n_dense).map(move |j| lo + j as f64 * step)
        };
        let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
        for a in axis(rough.0) {
            for b in axis(rough.1) {
                let v = objective(&p, &i1, (a, b), cfg.n0);
                if v > best.0 {
                    best = (v, a, b);
                }
            }
        }
        let (mut a, mut b) = (best.1, best.2);
        if a > b {
            std::mem::swap(&mut a, &mut b);
        }
        let step = |c: f64| (c + params.beta(c) - (c - params.beta(c)).max(0.0)) / (params.n_grid - 1) as f64;
        assert!((est.h_min - a).abs() <= step(rough.0) + 1e-12, "{est:?} vs {a}");
        assert!((est.h_max - b).abs() <= step(rough.1) + 1e-12, "{est:?} vs {b}");
    }
}

#[test]
fn noiseless_fine_estimate_is_within_a_step() {
    let cfg = SystemConfig::new(64, 1e-6, 1e-6, 10_000.0).unwrap();
    let params = EstimatorParams::default();
    let i1: Vec<usize> = (0..64).collect();
    let p = all_s1(&cfg, (1.0, 2.0), 9);
    let est = fine_gains(&p, &i1, (1.1, 1.8), cfg.n0, &params).unwrap();
    assert!((est.h_min - 1.0).abs() <= 0.4 / 24.0 + 1e-9, "{est:?}");
    assert!((est.h_max - 2.0).abs() <= 1.08 / 24.0 + 1e-9, "{est:?}");
}

#[test]
fn equal_gains_are_found_at_high_snr() {
    let cfg = SystemConfig::at_snr_db(20.0);
    let params = EstimatorParams::default();
    for seed in 0..50 {
        let p = packet(&cfg, (1.0, 1.0), -2000.0, seed);
        let est = estimate_gains(&p, cfg.n0, &params).unwrap();
        let step = |r: f64| 2.0 * params.beta(r) / (params.n_grid - 1) as f64;
        assert!((est.h_min - 1.0).abs() <= 2.0 * step(est.rough_min), "{est:?}");
        assert!((est.h_max - 1.0).abs() <= 2.0 * step(est.rough_max), "{est:?}");
    }
}

#[test]
fn estimator_is_consistent_at_high_snr() {
    let cfg = SystemConfig::at_snr_db(30.0);
    let params = EstimatorParams::default();
    let (mut e_min, mut e_max) = (Vec::new(), Vec::new());
    for seed in 0..1000 {
        let p = packet(&cfg, (1.0, 2.0), -2000.0, seed);
        let est = estimate_gains(&p, cfg.n0, &params).unwrap();
        e_min.push((est.h_min - 1.0).abs());
        e_max.push((est.h_max - 2.0).abs() / 2.0);
    }
    let (a, b) = (median(e_min), median(e_max));
    assert!(a < 0.03 && b < 0.03, "median relative errors {a} {b}");
}

#[test]
fn estimates_scale_with_the_observations() {
    let cfg = SystemConfig::at_snr_db(12.0);
    let scaled = SystemConfig { n0: cfg.n0 * 9.0, ..cfg };
    let params = EstimatorParams::default();
    for seed in 0..50 {
        let p = packet(&cfg, (1.0, 1.6), -2000.0, seed);
        let q = Packet::from_observations(p.observations.iter().map(|o| o.scaled(3.0)).collect());
        let a = estimate_gains(&p, cfg.n0, &params).unwrap();
        let b = estimate_gains(&q, scaled.n0, &params).unwrap();
        let step = |r: f64| 2.0 * params.beta(r) / (params.n_grid - 1) as f64;
        assert!((b.h_min / 3.0 - a.h_min).abs() <= step(a.rough_min) + 1e-9, "{a:?} {b:?}");
        assert!((b.h_max / 3.0 - a.h_max).abs() <= step(a.rough_max) + 1e-9, "{a:?} {b:?}");
    }
}

#[test]
fn kd_mpd_is_mpd_on_estimated_gains() {
    let cfg = SystemConfig::at_snr_db(9.0);
    let grid = PhaseGrid::with_known_drift(40, 0.0).unwrap();
    let params = EstimatorParams::default();
    for seed in 0..100 {
        let p = packet(&cfg, (1.0, 1.0), 0.0, seed);
        let (d, est) = kd_mpd(&p, &cfg, &grid, &params).unwrap();
        let GainEstimate { h_min, h_max, .. } = estimate_gains(&p, cfg.n0, &params).unwrap();
        assert_eq!((est.h_min, est.h_max), (h_min, h_max));
        let direct = mpd_detect(&p, (h_min, h_max), &cfg, &grid).unwrap();
        assert_eq!(d.xor_bits, direct.xor_bits);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fine_never_loses_to_rough(
        seed in any::<u64>(),
        ga in 0.5..3.0f64,
        ratio in 1.0..4.0f64,
        snr in 8.0..25.0f64,
    ) {
        let cfg = SystemConfig::new(64, 1e-6, 10f64.powf(-snr / 10.0), 10_000.0).unwrap();
        let params = EstimatorParams::default();
        let p = all_s1(&cfg, (ga, ga * ratio), seed);
        let i1: Vec<usize> = (0..64).collect();
        let rough = rough_gains(&p, &i1, cfg.n0).unwrap();
        // the rough point is a grid node unless the interval was clamped at zero
        prop_assume!(rough.0 >= params.beta(rough.0) && rough.1 >= params.beta(rough.1));
        let est = fine_gains(&p, &i1, rough, cfg.n0, &params).unwrap();
        let at_fine = objective(&p, &i1, (est.h_min, est.h_max), cfg.n0);
        let at_rough = objective(&p, &i1, rough, cfg.n0);
        prop_assert!(at_fine >= at_rough - 1e-9 * at_rough.abs().max(1.0));
    }
}
