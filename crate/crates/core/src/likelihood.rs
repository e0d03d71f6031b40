//! Log-domain conditional densities of a magnitude pair.
//!
//! `s = 0`: both users on the same tone. The active tone is Rician with amplitude
//! `A(theta) = sqrt(|h_A|^2 + |h_B|^2 + 2|h_A||h_B| cos theta)`, the other tone is
//! Rayleigh, and either tone may be the active one with probability 1/2.
//!
//! `s = 1`: one user per tone. Both tones are Rician, with the gain-to-tone
//! assignment again a fair coin. This case does not depend on `theta`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Observation;
use crate::special::{i0e, log_add_exp};

const LN_HALF: f64 = -std::f64::consts::LN_2;

/// Channel knowledge the likelihood is conditioned on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodContext {
    pub gain_a: f64,
    pub gain_b: f64,
    pub n0: f64,
}

impl LikelihoodContext {
    pub fn new(gain_a: f64, gain_b: f64, n0: f64) -> Result<Self> {
        if !(n0 > 0.0 && n0.is_finite()) {
            return Err(Error::InvalidInput(format!("n0 must be positive, got {n0}")));
        }
        if !(gain_a >= 0.0 && gain_a.is_finite() && gain_b >= 0.0 && gain_b.is_finite()) {
            return Err(Error::InvalidInput("gains must be finite and >= 0".into()));
        }
        Ok(Self { gain_a, gain_b, n0 })
    }

    /// Amplitude of the superposed tone at relative phase `theta`.
    pub fn superposed_amplitude(&self, theta: f64) -> f64 {
        superposed_amplitude(self.gain_a, self.gain_b, theta)
    }
}

pub fn superposed_amplitude(gain_a: f64, gain_b: f64, theta: f64) -> f64 {
    let p = gain_a * gain_a + gain_b * gain_b + 2.0 * gain_a * gain_b * theta.cos();
    p.max(0.0).sqrt()
}

/// `ln` of the Rician density `(2r/N0) exp(-(r^2 + a^2)/N0) I0(2ar/N0)`.
///
/// Uses the scaled Bessel function so that the large exponentials cancel
/// analytically: `-(r^2 + a^2)/N0 + 2ar/N0 = -(r - a)^2/N0`.
/// Returns `-inf` for `r <= 0`.
#[inline]
pub fn log_rician(r: f64, amp: f64, n0: f64) -> f64 {
    if !(r > 0.0) {
        return f64::NEG_INFINITY;
    }
    let d = r - amp;
    (2.0 * r / n0).ln() - d * d / n0 + i0e(2.0 * amp * r / n0).ln()
}

/// `ln` of the Rayleigh density with total noise power `n0`.
#[inline]
pub fn log_rayleigh(r: f64, n0: f64) -> f64 {
    if !(r > 0.0) {
        return f64::NEG_INFINITY;
    }
    (2.0 * r / n0).ln() - r * r / n0
}

/// Log-density of an observation given a superposed-tone amplitude (`s = 0`).
#[inline]
pub fn log_lik_s0_amp(obs: Observation, amp: f64, n0: f64) -> f64 {
    let first = log_rician(obs.mag1, amp, n0) + log_rayleigh(obs.mag2, n0);
    let second = log_rayleigh(obs.mag1, n0) + log_rician(obs.mag2, amp, n0);
    LN_HALF + log_add_exp(first, second)
}

/// `ln Pr(r | s, theta, |h_A|, |h_B|)`.
pub fn log_lik(obs: Observation, s: u8, theta: f64, ctx: &LikelihoodContext) -> f64 {
    if s == 0 {
        log_lik_s0_amp(obs, ctx.superposed_amplitude(theta), ctx.n0)
    } else {
        joint_log_lik_s1(obs, ctx.gain_a, ctx.gain_b, ctx.n0)
    }
}

/// `ln Pr(r | s = 1, |h_min|, |h_max|)`; symmetric in the gain pair and in the tones.
pub fn joint_log_lik_s1(obs: Observation, h_min: f64, h_max: f64, n0: f64) -> f64 {
    let first = log_rician(obs.mag1, h_min, n0) + log_rician(obs.mag2, h_max, n0);
    let second = log_rician(obs.mag1, h_max, n0) + log_rician(obs.mag2, h_min, n0);
    LN_HALF + log_add_exp(first, second)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn rician_reduces_to_rayleigh() {
        for &n0 in &[0.01, 0.3, 1.0, 4.0] {
            for i in 1..200 {
                let r = i as f64 * 0.05;
                let expected = (2.0 * r / n0).ln() - r * r / n0;
                assert_eq!(log_rician(r, 0.0, n0), log_rayleigh(r, n0));
                assert!((log_rician(r, 0.0, n0) - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn rician_reference_point() {
        // log(2 e^-2 I0(2)) with I0(2) = 2.2795853023360673
        let expected = 2f64.ln() - 2.0 + 2.279_585_302_336_067_3_f64.ln();
        assert!((log_rician(1.0, 1.0, 1.0) - expected).abs() < 1e-14);
        assert!((expected - (-0.4828)).abs() < 1e-4);
    }

    #[test]
    fn zero_and_negative_magnitudes() {
        assert_eq!(log_rician(0.0, 1.0, 1.0), f64::NEG_INFINITY);
        assert_eq!(log_rician(-1.0, 1.0, 1.0), f64::NEG_INFINITY);
        assert_eq!(log_rayleigh(0.0, 1.0), f64::NEG_INFINITY);
    }

    #[test]
    fn high_snr_stays_finite() {
        // 40 dB: N0 = 1e-4, Bessel argument ~ 8e4
        let v = log_rician(2.0, 2.0, 1e-4);
        assert!(v.is_finite());
        let ctx = LikelihoodContext::new(1.0, 1.0, 1e-4).unwrap();
        let obs = Observation::new(1.98, 0.01).unwrap();
        assert!(log_lik(obs, 0, 0.1, &ctx).is_finite());
        assert!(log_lik(obs, 1, 0.1, &ctx).is_finite());
    }

    #[test]
    fn s1_is_phase_free() {
        let ctx = LikelihoodContext::new(1.0, 2.0, 0.2).unwrap();
        let obs = Observation::new(0.7, 2.3).unwrap();
        let base = log_lik(obs, 1, 0.0, &ctx);
        for k in 0..16 {
            assert_eq!(log_lik(obs, 1, k as f64 * 0.4, &ctx), base);
        }
    }

    #[test]
    fn s0_phase_reflection() {
        let ctx = LikelihoodContext::new(1.0, 1.5, 0.2).unwrap();
        let obs = Observation::new(1.7, 0.2).unwrap();
        for k in 0..32 {
            let t = k as f64 * 0.2;
            assert_eq!(log_lik(obs, 0, t, &ctx), log_lik(obs, 0, -t, &ctx));
            let d = log_lik(obs, 0, t, &ctx) - log_lik(obs, 0, 2.0 * PI - t, &ctx);
            assert!(d.abs() < 1e-12);
        }
    }

    #[test]
    fn s1_symmetries() {
        let obs = Observation::new(1.1, 2.2).unwrap();
        let swapped = Observation::new(2.2, 1.1).unwrap();
        let a = joint_log_lik_s1(obs, 1.0, 2.0, 0.5);
        assert!((a - joint_log_lik_s1(swapped, 1.0, 2.0, 0.5)).abs() < 1e-14);
        assert!((a - joint_log_lik_s1(obs, 2.0, 1.0, 0.5)).abs() < 1e-14);
        let same = joint_log_lik_s1(obs, 1.3, 1.3, 0.5);
        let single = log_rician(1.1, 1.3, 0.5) + log_rician(2.2, 1.3, 0.5);
        assert!((same - single).abs() < 1e-13);
    }

    #[test]
    fn context_validation() {
        assert!(LikelihoodContext::new(1.0, 1.0, 0.0).is_err());
        assert!(LikelihoodContext::new(-1.0, 1.0, 1.0).is_err());
        let ctx = LikelihoodContext::new(1.0, 1.0, 1.0).unwrap();
        assert!((ctx.superposed_amplitude(0.0) - 2.0).abs() < 1e-15);
        assert!(ctx.superposed_amplitude(PI) < 1e-7);
    }
}
