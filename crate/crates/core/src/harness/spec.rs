use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detectors::PhaseGrid;
use crate::error::{Error, Result};
use crate::estimator::EstimatorParams;
use crate::model::SystemConfig;

/// Detector under test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DetectorKind {
    /// True phase track and gains revealed.
    Genie,
    /// Phase marginalized with true gains.
    Mpd,
    /// Belief propagation with true gains.
    Bpd { block_len: usize },
    /// K-means on magnitudes alone.
    Kd,
    /// Estimated gains, then MPD.
    KdMpd,
    /// Estimated gains, then BPD.
    KdBpd { block_len: usize },
}

impl DetectorKind {
    /// Parse a detector id (`genie|mpd|bpd|kd|kd-mpd|kd-bpd`); `block_len` applies to the BP ones.
    pub fn parse(id: &str, block_len: usize) -> Result<Self> {
        Ok(match id {
            "genie" => Self::Genie,
            "mpd" => Self::Mpd,
            "bpd" => Self::Bpd { block_len },
            "kd" => Self::Kd,
            "kd-mpd" => Self::KdMpd,
            "kd-bpd" => Self::KdBpd { block_len },
            other => return Err(Error::InvalidConfig(format!("unknown detector '{other}'"))),
        })
    }

    pub fn block_len(&self) -> Option<usize> {
        match *self {
            Self::Bpd { block_len } | Self::KdBpd { block_len } => Some(block_len),
            _ => None,
        }
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Genie => write!(f, "genie"),
            Self::Mpd => write!(f, "mpd"),
            Self::Bpd { block_len } => write!(f, "bpd-L{block_len}"),
            Self::Kd => write!(f, "kd"),
            Self::KdMpd => write!(f, "kd-mpd"),
            Self::KdBpd { block_len } => write!(f, "kd-bpd-L{block_len}"),
        }
    }
}

/// How channel gains are drawn per packet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GainScenario {
    Fixed { a: f64, b: f64 },
    /// Independent Rayleigh magnitudes per packet with `E|h|^2` given per user.
    Rayleigh { power_a: f64, power_b: f64 },
}

impl Default for GainScenario {
    fn default() -> Self {
        Self::Fixed { a: 1.0, b: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PhaseScenario {
    Fixed { rad: f64 },
    /// Uniform on `[0, 2pi)` per packet.
    Uniform,
}

impl Default for PhaseScenario {
    fn default() -> Self {
        Self::Fixed { rad: 0.2 * std::f64::consts::PI }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CfoScenario {
    Fixed { hz: f64 },
    /// Uniform within the configured CFO bound per packet.
    Uniform,
}

impl Default for CfoScenario {
    fn default() -> Self {
        Self::Fixed { hz: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StoppingRule {
    pub min_errors: u64,
    pub max_bits: u64,
}

impl Default for StoppingRule {
    fn default() -> Self {
        Self {
            min_errors: 200,
            max_bits: 500_000_000,
        }
    }
}

/// Phase and drift grid sizes; the drift range follows the CFO bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub n_theta: usize,
    pub n_drift: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            n_theta: 40,
            n_drift: 40,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemSpec {
    pub n_symbols: usize,
    pub symbol_duration_s: f64,
    pub cfo_bound_hz: f64,
}

impl Default for SystemSpec {
    fn default() -> Self {
        let c = SystemConfig::default();
        Self {
            n_symbols: c.n_symbols,
            symbol_duration_s: c.symbol_duration_s,
            cfo_bound_hz: c.cfo_bound_hz,
        }
    }
}

/// A complete Monte Carlo experiment, loadable from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub detectors: Vec<DetectorKind>,
    pub system: SystemSpec,
    pub gains: GainScenario,
    pub phase: PhaseScenario,
    pub cfo: CfoScenario,
    pub snr_points_db: Vec<f64>,
    pub stopping: StoppingRule,
    pub grid: GridSpec,
    pub estimator: EstimatorParams,
    pub seed: u64,
    /// Packets simulated between stopping-rule checks.
    pub batch_packets: usize,
    /// Fill the `wall_time_s` column. Off by default so reruns are byte-identical.
    pub record_wall_time: bool,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            detectors: vec![DetectorKind::Bpd { block_len: 16 }],
            system: SystemSpec::default(),
            gains: GainScenario::default(),
            phase: PhaseScenario::default(),
            cfo: CfoScenario::default(),
            snr_points_db: Vec::new(),
            stopping: StoppingRule::default(),
            grid: GridSpec::default(),
            estimator: EstimatorParams::default(),
            seed: 1,
            batch_packets: 32,
            record_wall_time: false,
        }
    }
}

impl ExperimentSpec {
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|source| Error::SpecParse {
            path: origin.to_path_buf(),
            source,
        })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text, path)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.stopping.min_errors < 50 {
            return bad("min_errors must be at least 50");
        }
        if self.stopping.max_bits == 0 {
            return bad("max_bits must be positive");
        }
        if self.snr_points_db.iter().any(|s| !s.is_finite()) {
            return bad("SNR points must be finite");
        }
        if self.batch_packets == 0 {
            return bad("batch_packets must be positive");
        }
        match self.gains {
            GainScenario::Fixed { a, b } => {
                if !(a >= 0.0 && b >= 0.0 && a.is_finite() && b.is_finite()) {
                    return bad("fixed gains must be finite and nonnegative");
                }
            }
            GainScenario::Rayleigh { power_a, power_b } => {
                if !(power_a > 0.0 && power_b > 0.0 && power_a.is_finite() && power_b.is_finite())
                {
                    return bad("fading powers must be positive");
                }
            }
        }
        if let PhaseScenario::Fixed { rad } = self.phase {
            if !rad.is_finite() {
                return bad("phase must be finite");
            }
        }
        for d in &self.detectors {
            if d.block_len() == Some(0) {
                return bad("block length must be at least 1");
            }
            if let Some(l) = d.block_len() {
                if l > self.system.n_symbols {
                    return bad("block length exceeds packet length");
                }
            }
        }
        self.estimator.validate()?;
        let cfg = self.config_at(0.0);
        cfg.validate()?;
        if let CfoScenario::Fixed { hz } = self.cfo {
            if !(hz.abs() <= cfg.cfo_bound_hz) {
                return bad("CFO outside configured bound");
            }
        }
        self.phase_grid()?;
        Ok(())
    }

    pub fn config_at(&self, snr_db: f64) -> SystemConfig {
        SystemConfig {
            n_symbols: self.system.n_symbols,
            symbol_duration_s: self.system.symbol_duration_s,
            n0: crate::model::n0_from_snr_db(snr_db),
            cfo_bound_hz: self.system.cfo_bound_hz,
        }
    }

    pub fn phase_grid(&self) -> Result<PhaseGrid> {
        let max = self.config_at(0.0).max_drift();
        PhaseGrid::new(self.grid.n_theta, self.grid.n_drift, -max, max)
    }

    /// Human-readable channel scenario for the CSV `scenario` column.
    pub fn scenario_label(&self) -> String {
        let gains = match self.gains {
            GainScenario::Fixed { a, b } => format!("gains={a}/{b}"),
            GainScenario::Rayleigh { power_a, power_b } => {
                format!("rayleigh={power_a}/{power_b}")
            }
        };
        let phase = match self.phase {
            PhaseScenario::Fixed { rad } => format!("phase={rad:.6}"),
            PhaseScenario::Uniform => "phase=uniform".into(),
        };
        let cfo = match self.cfo {
            CfoScenario::Fixed { hz } => format!("cfo={hz}Hz"),
            CfoScenario::Uniform => "cfo=uniform".into(),
        };
        format!("{gains} {phase} {cfo}")
    }
}
