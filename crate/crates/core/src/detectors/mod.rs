//! Detectors mapping a magnitude-only packet to XOR decisions.
//!
//! * [`genie_detect`]: knows the true phase track and gains (benchmark).
//! * [`mpd_detect`]: marginalizes the relative phase symbol by symbol.
//! * [`bpd_detect`]: joint phase/drift/data detection by belief propagation over blocks.
//! * [`kd_detect`]: two-cluster K-means on the weaker tone magnitude; needs no
//!   channel knowledge at all.

mod bpd;
mod genie;
mod grid;
mod kd;
mod mpd;

pub use bpd::{bpd_block_posterior, bpd_detect, block_starts, PosteriorGrid};
pub use genie::genie_detect;
pub use grid::{DriftShift, PhaseGrid};
pub use kd::{kd_detect, KdOutcome, TwoMeans};
pub use mpd::mpd_detect;

use crate::likelihood::{joint_log_lik_s1, log_rayleigh, superposed_amplitude};
use crate::model::Observation;
use crate::special::{i0e, log_add_exp};

/// Output of a detector for one packet.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Decision {
    pub xor_bits: Vec<u8>,
    /// Per-symbol relative phase estimate, radians in `[0, 2pi)`.
    pub theta_hat: Option<Vec<f64>>,
    /// Per-symbol drift estimate, radians per symbol.
    pub drift_hat: Option<f64>,
}

impl Decision {
    pub fn hard(xor_bits: Vec<u8>) -> Self {
        Self {
            xor_bits,
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.xor_bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xor_bits.is_empty()
    }
}

/// Per-symbol log-likelihoods over the phase grid, shared by MPD and BPD.
///
/// `s0[n * n_theta + i]` is `ln Pr(r_n | s = 0, theta_i)`, `s1[n]` is `ln Pr(r_n | s = 1)`.
#[derive(Debug, Clone)]
pub(crate) struct LikelihoodTable {
    pub n_theta: usize,
    pub s0: Vec<f64>,
    pub s1: Vec<f64>,
}

impl LikelihoodTable {
    pub fn build(observations: &[Observation], gains: (f64, f64), n0: f64, grid: &PhaseGrid) -> Self {
        let n_theta = grid.n_theta;
        // A(theta) = A(2pi - theta): only half the grid needs evaluating.
        let n_half = n_theta / 2 + 1;
        let amps: Vec<f64> = (0..n_half)
            .map(|i| superposed_amplitude(gains.0, gains.1, grid.theta(i)))
            .collect();
        let mut s0 = vec![0.0; observations.len() * n_theta];
        let mut s1 = Vec::with_capacity(observations.len());
        let mut half = vec![0.0; n_half];
        for (n, obs) in observations.iter().enumerate() {
            s0_over_amplitudes(*obs, &amps, n0, &mut half);
            let row = &mut s0[n * n_theta..(n + 1) * n_theta];
            for (i, v) in row.iter_mut().enumerate() {
                let mirrored = if i < n_half { i } else { n_theta - i };
                *v = half[mirrored];
            }
            s1.push(joint_log_lik_s1(*obs, gains.0, gains.1, n0));
        }
        Self { n_theta, s0, s1 }
    }

    pub fn row(&self, n: usize) -> &[f64] {
        &self.s0[n * self.n_theta..(n + 1) * self.n_theta]
    }
}

/// `ln Pr(r | s = 0, A)` for a list of superposed amplitudes, sharing the
/// amplitude-independent terms.
fn s0_over_amplitudes(obs: Observation, amps: &[f64], n0: f64, out: &mut [f64]) {
    let ray1 = log_rayleigh(obs.mag1, n0);
    let ray2 = log_rayleigh(obs.mag2, n0);
    for (o, &a) in out.iter_mut().zip(amps) {
        // ln Rician(r; a) = ln Rayleigh(r) - a^2/N0 + ln I0(2ar/N0)
        let shift = -a * a / n0;
        let x1 = 2.0 * a * obs.mag1 / n0;
        let x2 = 2.0 * a * obs.mag2 / n0;
        let ric1 = ray1 + shift + x1 + i0e(x1).ln();
        let ric2 = ray2 + shift + x2 + i0e(x2).ln();
        *o = -std::f64::consts::LN_2 + log_add_exp(ric1 + ray2, ray1 + ric2);
    }
}
