//! Symbol-level model of the two-way relay uplink.
//!
//! Two users send binary FSK symbols simultaneously. At the relay, an envelope
//! detector per tone delivers one magnitude pair per symbol. When both users pick
//! the same tone their signals superpose with relative phase `theta_n`; when they
//! pick different tones each tone carries one user alone.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Wrap an angle to `[0, 2pi)`.
pub fn wrap_phase(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Packet-level system parameters.
///
/// Per-user symbol energy is fixed at one, so `n0 = 10^(-snr_db / 10)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub n_symbols: usize,
    pub symbol_duration_s: f64,
    pub n0: f64,
    pub cfo_bound_hz: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            n_symbols: 128,
            symbol_duration_s: 1e-6,
            n0: 0.1,
            cfo_bound_hz: 10_000.0,
        }
    }
}

impl SystemConfig {
    pub fn new(
        n_symbols: usize,
        symbol_duration_s: f64,
        n0: f64,
        cfo_bound_hz: f64,
    ) -> Result<Self> {
        let cfg = Self {
            n_symbols,
            symbol_duration_s,
            n0,
            cfo_bound_hz,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Default packet shape at the given SNR (dB).
    pub fn at_snr_db(snr_db: f64) -> Self {
        Self {
            n0: n0_from_snr_db(snr_db),
            ..Self::default()
        }
    }

    pub fn with_snr_db(mut self, snr_db: f64) -> Self {
        self.n0 = n0_from_snr_db(snr_db);
        self
    }

    pub fn snr_db(&self) -> f64 {
        -10.0 * self.n0.log10()
    }

    /// Largest per-symbol phase drift `2 pi f T` admitted by the CFO bound.
    pub fn max_drift(&self) -> f64 {
        TAU * self.cfo_bound_hz * self.symbol_duration_s
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_symbols == 0 {
            return Err(Error::InvalidConfig("n_symbols must be at least 1".into()));
        }
        if !(self.symbol_duration_s > 0.0 && self.symbol_duration_s.is_finite()) {
            return Err(Error::InvalidConfig("symbol_duration_s must be positive".into()));
        }
        if !(self.n0 > 0.0 && self.n0.is_finite()) {
            return Err(Error::InvalidConfig("n0 must be positive and finite".into()));
        }
        if !(self.cfo_bound_hz >= 0.0) || self.cfo_bound_hz * self.symbol_duration_s > 0.01 + 1e-12
        {
            return Err(Error::InvalidConfig(format!(
                "cfo_bound_hz * symbol_duration_s = {} exceeds 0.01",
                self.cfo_bound_hz * self.symbol_duration_s
            )));
        }
        Ok(())
    }
}

pub fn n0_from_snr_db(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

/// Channel magnitudes and phase-track parameters for one packet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelState {
    pub gain_a: f64,
    pub gain_b: f64,
    /// Initial relative phase `phi_B - phi_A`, kept in `[0, 2pi)`.
    pub initial_phase_rad: f64,
    /// Carrier frequency offset `f_B - f_A`.
    pub cfo_hz: f64,
}

impl ChannelState {
    pub fn new(gain_a: f64, gain_b: f64, initial_phase_rad: f64, cfo_hz: f64) -> Result<Self> {
        for (name, g) in [("gain_a", gain_a), ("gain_b", gain_b)] {
            if !(g >= 0.0 && g.is_finite()) {
                return Err(Error::InvalidInput(format!("{name} must be finite and >= 0")));
            }
        }
        if !initial_phase_rad.is_finite() || !cfo_hz.is_finite() {
            return Err(Error::InvalidInput("phase and CFO must be finite".into()));
        }
        Ok(Self {
            gain_a,
            gain_b,
            initial_phase_rad: wrap_phase(initial_phase_rad),
            cfo_hz,
        })
    }

    /// Per-symbol relative phase increment `2 pi f T`.
    pub fn drift_per_symbol(&self, config: &SystemConfig) -> f64 {
        TAU * self.cfo_hz * config.symbol_duration_s
    }

    pub fn gains(&self) -> (f64, f64) {
        (self.gain_a, self.gain_b)
    }
}

/// Relative phase at symbol `n`: `2 pi n f T + phi`, wrapped to `[0, 2pi)`.
///
/// The CFSK phase accumulation terms are integer multiples of `2pi` when the tone
/// spacing is `1 / (2T)`, so they are left out.
pub fn relative_phase(n: usize, channel: &ChannelState, config: &SystemConfig) -> f64 {
    wrap_phase(n as f64 * channel.drift_per_symbol(config) + channel.initial_phase_rad)
}

/// Source bits of both users for one packet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourcePair {
    bits_a: Vec<u8>,
    bits_b: Vec<u8>,
}

impl SourcePair {
    pub fn new(bits_a: Vec<u8>, bits_b: Vec<u8>) -> Result<Self> {
        if bits_a.len() != bits_b.len() {
            return Err(Error::InvalidInput(format!(
                "bit sequences differ in length ({} vs {})",
                bits_a.len(),
                bits_b.len()
            )));
        }
        if bits_a.iter().chain(&bits_b).any(|&b| b > 1) {
            return Err(Error::InvalidInput("bits must be 0 or 1".into()));
        }
        Ok(Self { bits_a, bits_b })
    }

    /// Equiprobable independent bits for both users.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let bits_a = (0..n).map(|_| rng.random_range(0..2u8)).collect();
        let bits_b = (0..n).map(|_| rng.random_range(0..2u8)).collect();
        Self { bits_a, bits_b }
    }

    pub fn len(&self) -> usize {
        self.bits_a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits_a.is_empty()
    }

    pub fn bits_a(&self) -> &[u8] {
        &self.bits_a
    }

    pub fn bits_b(&self) -> &[u8] {
        &self.bits_b
    }

    /// Network-coded symbols `s_n = a_n xor b_n`.
    pub fn xor(&self) -> Vec<u8> {
        self.bits_a.iter().zip(&self.bits_b).map(|(a, b)| a ^ b).collect()
    }
}

/// Envelope-detector output for one symbol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub mag1: f64,
    pub mag2: f64,
}

impl Observation {
    pub fn new(mag1: f64, mag2: f64) -> Result<Self> {
        if !(mag1 >= 0.0 && mag1.is_finite() && mag2 >= 0.0 && mag2.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "magnitudes must be finite and >= 0, got ({mag1}, {mag2})"
            )));
        }
        Ok(Self { mag1, mag2 })
    }

    /// Smaller of the two tone magnitudes.
    pub fn min_mag(&self) -> f64 {
        self.mag1.min(self.mag2)
    }

    pub fn max_mag(&self) -> f64 {
        self.mag1.max(self.mag2)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            mag1: self.mag1 * c,
            mag2: self.mag2 * c,
        }
    }
}

/// What produced a packet; kept for genie detectors and error counting.
#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    pub source: SourcePair,
    pub channel: ChannelState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Packet {
    pub observations: Vec<Observation>,
    pub truth: Option<Truth>,
}

impl Packet {
    pub fn from_observations(observations: Vec<Observation>) -> Self {
        Self {
            observations,
            truth: None,
        }
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn truth(&self) -> Result<&Truth> {
        self.truth.as_ref().ok_or(Error::MissingTruth)
    }

    /// Number of XOR symbols in `decided` that disagree with the ground truth.
    pub fn count_errors(&self, decided: &[u8]) -> Result<usize> {
        let truth = self.truth()?;
        let xor = truth.source.xor();
        if xor.len() != decided.len() {
            return Err(Error::InvalidInput("decision length mismatch".into()));
        }
        Ok(xor.iter().zip(decided).filter(|(a, b)| a != b).count())
    }
}

/// The four transmit combinations of one symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SymbolCase {
    BothZero,
    BothOne,
    AZeroBOne,
    AOneBZero,
}

impl SymbolCase {
    pub fn from_bits(a: u8, b: u8) -> Self {
        match (a, b) {
            (0, 0) => Self::BothZero,
            (1, 1) => Self::BothOne,
            (0, _) => Self::AZeroBOne,
            _ => Self::AOneBZero,
        }
    }

    pub fn xor(self) -> u8 {
        match self {
            Self::BothZero | Self::BothOne => 0,
            Self::AZeroBOne | Self::AOneBZero => 1,
        }
    }
}

/// Magnitude pair for one symbol given its case, phase, gains and the two noise samples.
pub fn observe(
    case: SymbolCase,
    theta: f64,
    gain_a: f64,
    gain_b: f64,
    w1: Complex64,
    w2: Complex64,
) -> Observation {
    let ua = Complex64::from_polar(gain_a, -theta / 2.0);
    let ub = Complex64::from_polar(gain_b, theta / 2.0);
    let (r1, r2) = match case {
        SymbolCase::BothZero => (ua + ub + w1, w2),
        SymbolCase::BothOne => (w1, ua + ub + w2),
        SymbolCase::AZeroBOne => (ua + w1, ub + w2),
        SymbolCase::AOneBZero => (ub + w1, ua + w2),
    };
    Observation {
        mag1: r1.norm(),
        mag2: r2.norm(),
    }
}

/// Circularly symmetric complex Gaussian sample with total variance `n0`.
pub fn complex_noise<R: Rng + ?Sized>(n0: f64, rng: &mut R) -> Complex64 {
    let sigma = (n0 / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(sigma * re, sigma * im)
}

/// Draw noise and emit the magnitude-only packet for the given source and channel.
pub fn synthesize_packet<R: Rng + ?Sized>(
    source: SourcePair,
    channel: ChannelState,
    config: &SystemConfig,
    rng: &mut R,
) -> Packet {
    let observations = (0..source.len())
        .map(|n| {
            let case = SymbolCase::from_bits(source.bits_a[n], source.bits_b[n]);
            let theta = relative_phase(n, &channel, config);
            let w1 = complex_noise(config.n0, rng);
            let w2 = complex_noise(config.n0, rng);
            observe(case, theta, channel.gain_a, channel.gain_b, w1, w2)
        })
        .collect();
    Packet {
        observations,
        truth: Some(Truth { source, channel }),
    }
}

/// Monte Carlo estimate of `E|r|^2` on the tone where both users superpose.
///
/// Its expectation is `|h_A|^2 + |h_B|^2 + 2|h_A||h_B| cos(theta) + N0`; the noise
/// cross terms average out.
pub fn sample_mean_power_check<R: Rng + ?Sized>(
    gain_a: f64,
    gain_b: f64,
    theta: f64,
    n0: f64,
    case: SymbolCase,
    n_samples: usize,
    rng: &mut R,
) -> Result<f64> {
    if n_samples == 0 {
        return Err(Error::InvalidInput("n_samples must be at least 1".into()));
    }
    let mut acc = 0.0;
    for _ in 0..n_samples {
        let w1 = complex_noise(n0, rng);
        let w2 = complex_noise(n0, rng);
        let obs = observe(case, theta, gain_a, gain_b, w1, w2);
        let m = match case {
            SymbolCase::BothOne => obs.mag2,
            _ => obs.mag1,
        };
        acc += m * m;
    }
    Ok(acc / n_samples as f64)
}
