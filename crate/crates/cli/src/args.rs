use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "pnc", version, about = "Noncoherent FSK physical-layer network coding simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a BER sweep and write the records as CSV.
    Sweep(SweepArgs),
    /// Simulate one packet and print a per-symbol table.
    Inspect(InspectArgs),
    /// Find the SNR at which a detector reaches a target BER.
    Threshold(ThresholdArgs),
    /// Compare the BP posterior with exhaustive enumeration on random small blocks.
    Oracle(OracleArgs),
}

/// Scenario flags shared by the simulation commands. Each flag given overrides the
/// corresponding value of `--spec` (or of the defaults).
#[derive(Debug, Args)]
pub struct ScenarioArgs {
    /// TOML experiment spec to start from.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Fixed channel gains `a,b`.
    #[arg(long, value_parser = parse_pair, conflicts_with = "fading")]
    pub gains: Option<(f64, f64)>,
    /// Rayleigh block fading with mean powers `pa,pb`.
    #[arg(long, value_parser = parse_pair)]
    pub fading: Option<(f64, f64)>,
    /// Initial relative phase in radians, or `uniform`.
    #[arg(long, allow_hyphen_values = true)]
    pub phase: Option<String>,
    /// CFO in Hz, or `uniform`.
    #[arg(long, allow_hyphen_values = true)]
    pub cfo_hz: Option<String>,
    /// Block length for the BP detectors.
    #[arg(long)]
    pub block_len: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub n_theta: Option<usize>,
    #[arg(long)]
    pub n_drift: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Detector id: genie, mpd, bpd, kd, kd-mpd or kd-bpd. Repeatable.
    #[arg(long = "detector")]
    pub detectors: Vec<String>,
    /// SNR points as `lo:hi:step` (dB, inclusive) or a single value.
    #[arg(long, value_parser = parse_snr_range, allow_hyphen_values = true)]
    pub snr: Option<::std::vec::Vec<f64>>,
    #[arg(long)]
    pub min_errors: Option<u64>,
    #[arg(long)]
    pub max_bits: Option<u64>,
    /// Output CSV. Defaults to `sweep.csv` in `$PNC_OUT_DIR` (or the working directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, env = "PNC_OUT_DIR", hide_env_values = true)]
    pub out_dir: Option<PathBuf>,
    /// Record wall-clock time per point (the CSV is then no longer reproducible).
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long = "detector", default_value = "bpd")]
    pub detector: String,
    #[arg(long, default_value_t = 10.0, allow_hyphen_values = true)]
    pub snr: f64,
    /// Which packet of the seeded stream to draw.
    #[arg(long, default_value_t = 0)]
    pub packet: u64,
}

#[derive(Debug, Args)]
pub struct ThresholdArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long = "detector")]
    pub detector: String,
    #[arg(long, default_value_t = 1e-5)]
    pub target_ber: f64,
    /// SNR bracket `lo:hi` in dB.
    #[arg(long, value_parser = parse_bracket, allow_hyphen_values = true)]
    pub bracket: (f64, f64),
    #[arg(long, default_value_t = 0.1)]
    pub tol_db: f64,
    #[arg(long)]
    pub min_errors: Option<u64>,
    #[arg(long)]
    pub max_bits: Option<u64>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long, default_value_t = 100)]
    pub packets: usize,
    #[arg(long, default_value_t = 3)]
    pub block_len: usize,
    #[arg(long, default_value_t = 8)]
    pub n_theta: usize,
    #[arg(long, default_value_t = 3)]
    pub n_drift: usize,
    /// Half-width of the drift range, radians per symbol.
    #[arg(long, default_value_t = 0.02 * std::f64::consts::PI)]
    pub drift_max: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-9)]
    pub tolerance: f64,
}

pub fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected 'a,b', got '{s}'"))?;
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("'{t}': {e}"));
    Ok((num(a)?, num(b)?))
}

pub fn parse_bracket(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| format!("expected 'lo:hi', got '{s}'"))?;
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("'{t}': {e}"));
    let (lo, hi) = (num(a)?, num(b)?);
    if lo >= hi {
        return Err("bracket needs lo < hi".into());
    }
    Ok((lo, hi))
}

/// `lo:hi:step` inclusive of `hi` up to rounding, or a single number.
pub fn parse_snr_range(s: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("'{t}': {e}"));
    match parts.as_slice() {
        [one] => Ok(vec![num(one)?]),
        [lo, hi, step] => {
            let (lo, hi, step) = (num(lo)?, num(hi)?, num(step)?);
            if !(step > 0.0) || hi < lo || !lo.is_finite() || !hi.is_finite() {
                return Err("need lo <= hi and step > 0".into());
            }
            let count = ((hi - lo) / step + 1e-9).floor() as usize;
            // round away accumulated float noise so labels read cleanly
            Ok((0..=count)
                .map(|i| ((lo + i as f64 * step) * 1e9).round() / 1e9)
                .collect())
        }
        _ => Err(format!("expected 'lo:hi:step', got '{s}'")),
    }
}
