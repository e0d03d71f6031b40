use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use pnc_core::model::{
    complex_noise, observe, relative_phase, sample_mean_power_check, synthesize_packet,
    wrap_phase, ChannelState, SourcePair, SymbolCase, SystemConfig,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Two-sample Kolmogorov-Smirnov statistic.
fn ks_statistic(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

#[test]
fn noiseless_cases() {
    let o = observe(SymbolCase::BothZero, 0.2 * PI, 1.0, 1.0, ZERO, ZERO);
    assert!((o.mag1 - 2.0 * (0.1 * PI).cos()).abs() < 1e-12);
    assert!((o.mag1 - 1.9021).abs() < 1e-4);
    assert_eq!(o.mag2, 0.0);

    let o = observe(SymbolCase::BothOne, PI, 1.0, 1.0, ZERO, ZERO);
    assert_eq!(o.mag1, 0.0);
    assert!(o.mag2 < 1e-15);

    for theta in [0.0, 1.0, 4.0] {
        let o = observe(SymbolCase::AZeroBOne, theta, 1.0, 2.0, ZERO, ZERO);
        assert!((o.mag1 - 1.0).abs() < 1e-15 && (o.mag2 - 2.0).abs() < 1e-15);
    }
}

#[test]
fn superposed_power_matches_expectation() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cases = [
        (1.0, 1.0, 0.0, 0.1, 4.1, 0.02),
        (1.0, 1.0, PI, 0.1, 0.1, 0.01),
        (1.0, 2.0, PI / 2.0, 0.5, 5.5, 0.05),
    ];
    for (ga, gb, theta, n0, want, tol) in cases {
        let got = sample_mean_power_check(ga, gb, theta, n0, SymbolCase::BothZero, 1_000_000, &mut rng)
            .unwrap();
        assert!((got - want).abs() < tol, "{got} vs {want}");
    }
}

#[test]
fn superposed_power_within_three_standard_errors() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (ga, gb, theta, n0) = (0.7, 1.3, 2.1, 0.3);
    let n = 200_000;
    let samples: Vec<f64> = (0..n)
        .map(|_| {
            let o = observe(
                SymbolCase::BothZero,
                theta,
                ga,
                gb,
                complex_noise(n0, &mut rng),
                complex_noise(n0, &mut rng),
            );
            o.mag1 * o.mag1
        })
        .collect();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let want = ga * ga + gb * gb + 2.0 * ga * gb * theta.cos() + n0;
    assert!((mean - want).abs() < 3.0 * (var / n as f64).sqrt(), "{mean} vs {want}");

    // the other tone carries noise only
    let noise: Vec<f64> = (0..n)
        .map(|_| complex_noise(n0, &mut rng).norm_sqr())
        .collect();
    let mean = noise.iter().sum::<f64>() / n as f64;
    let var = noise.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    assert!((mean - n0).abs() < 3.0 * (var / n as f64).sqrt());
}

#[test]
fn swapping_users_preserves_observation_law() {
    // (h_A, h_B, phi, bits) -> (h_B, h_A, -phi, swapped bits)
    let (ga, gb, theta, n0) = (0.8, 1.5, 0.9, 0.2);
    let n = 100_000;
    let crit = 1.6276 * (2.0 / n as f64).sqrt();
    let pairs = [
        (SymbolCase::BothZero, SymbolCase::BothZero),
        (SymbolCase::BothOne, SymbolCase::BothOne),
        (SymbolCase::AZeroBOne, SymbolCase::AOneBZero),
        (SymbolCase::AOneBZero, SymbolCase::AZeroBOne),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for (case, swapped) in pairs {
        let draw = |c, ga, gb, th, rng: &mut ChaCha8Rng| {
            let mut m1 = Vec::with_capacity(n);
            let mut m2 = Vec::with_capacity(n);
            for _ in 0..n {
                let o = observe(c, th, ga, gb, complex_noise(n0, rng), complex_noise(n0, rng));
                m1.push(o.mag1);
                m2.push(o.mag2);
            }
            (m1, m2)
        };
        let (a1, a2) = draw(case, ga, gb, theta, &mut rng);
        let (b1, b2) = draw(swapped, gb, ga, wrap_phase(-theta), &mut rng);
        let d1 = ks_statistic(a1, b1);
        let d2 = ks_statistic(a2, b2);
        assert!(d1 < crit && d2 < crit, "{case:?}: {d1} {d2} crit {crit}");
    }
}

#[test]
fn packets_follow_their_truth() {
    let cfg = SystemConfig::new(64, 1e-6, 1e-14, 10_000.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let src = SourcePair::random(64, &mut rng);
    let ch = ChannelState::new(1.0, 2.0, 0.3, 4000.0).unwrap();
    let p = synthesize_packet(src.clone(), ch, &cfg, &mut rng);
    assert_eq!(p.len(), 64);
    for (n, o) in p.observations.iter().enumerate() {
        let case = SymbolCase::from_bits(src.bits_a()[n], src.bits_b()[n]);
        let clean = observe(case, relative_phase(n, &ch, &cfg), 1.0, 2.0, ZERO, ZERO);
        assert!((o.mag1 - clean.mag1).abs() < 1e-6 && (o.mag2 - clean.mag2).abs() < 1e-6);
    }
}

proptest! {
    #[test]
    fn phase_law_is_linear(
        phi in 0.0..TAU,
        cfo in -10_000.0..10_000.0f64,
        n in 0usize..1000,
    ) {
        let cfg = SystemConfig::default();
        let ch = ChannelState::new(1.0, 1.0, phi, cfo).unwrap();
        let step = wrap_phase(relative_phase(n + 1, &ch, &cfg) - relative_phase(n, &ch, &cfg));
        let want = wrap_phase(TAU * cfo * cfg.symbol_duration_s);
        let d = (step - want).abs();
        prop_assert!(d.min(TAU - d) < 1e-9);
        let p = relative_phase(n, &ch, &cfg);
        prop_assert!((0.0..TAU).contains(&p));
    }

    #[test]
    fn wrap_lands_in_range(x in -1e6..1e6f64) {
        let w = wrap_phase(x);
        prop_assert!((0.0..TAU).contains(&w));
        let d = (w - x).rem_euclid(TAU);
        prop_assert!(d.min(TAU - d) < 1e-6);
    }

    #[test]
    fn observations_are_nonnegative(
        ga in 0.0..5.0f64, gb in 0.0..5.0f64, theta in 0.0..TAU, seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for case in [SymbolCase::BothZero, SymbolCase::BothOne, SymbolCase::AZeroBOne, SymbolCase::AOneBZero] {
            let o = observe(case, theta, ga, gb, complex_noise(0.1, &mut rng), complex_noise(0.1, &mut rng));
            prop_assert!(o.mag1 >= 0.0 && o.mag2 >= 0.0 && o.mag1.is_finite() && o.mag2.is_finite());
        }
    }
}
