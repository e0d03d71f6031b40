use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::spec::{CfoScenario, DetectorKind, ExperimentSpec, GainScenario, PhaseScenario};
use crate::detectors::{bpd_detect, genie_detect, kd_detect, mpd_detect, PhaseGrid};
use crate::error::{Error, Result};
use crate::estimator::{kd_bpd, kd_mpd, EstimatorParams};
use crate::model::{synthesize_packet, ChannelState, Packet, SourcePair, SystemConfig};

/// One BER measurement. Serialized field order is the CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerRecord {
    pub detector: String,
    pub scenario: String,
    pub snr_db: f64,
    pub ber: f64,
    pub n_bits: u64,
    pub n_errors: u64,
    pub seed: u64,
    /// Stopped on `max_bits` before reaching `min_errors`, or a packet needed the
    /// empty-cluster fallback.
    pub flagged: bool,
    pub wall_time_s: Option<f64>,
}

/// Draw the channel, bits and noise of packet `index`. Every packet has its own
/// ChaCha stream, so results do not depend on batching or thread count, and the
/// same seed reuses the same bits and unit-variance noise at every SNR.
pub fn simulate_packet(spec: &ExperimentSpec, config: &SystemConfig, index: u64) -> Result<Packet> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index);
    let (gain_a, gain_b) = match spec.gains {
        GainScenario::Fixed { a, b } => (a, b),
        GainScenario::Rayleigh { power_a, power_b } => {
            let ea = Exp::new(1.0 / power_a).map_err(|e| Error::InvalidConfig(e.to_string()))?;
            let eb = Exp::new(1.0 / power_b).map_err(|e| Error::InvalidConfig(e.to_string()))?;
            let pa: f64 = rng.sample(ea);
            let pb: f64 = rng.sample(eb);
            (pa.sqrt(), pb.sqrt())
        }
    };
    let phase = match spec.phase {
        PhaseScenario::Fixed { rad } => rad,
        PhaseScenario::Uniform => rng.random_range(0.0..std::f64::consts::TAU),
    };
    let cfo = match spec.cfo {
        CfoScenario::Fixed { hz } => hz,
        CfoScenario::Uniform => rng.random_range(-config.cfo_bound_hz..=config.cfo_bound_hz),
    };
    let channel = ChannelState::new(gain_a, gain_b, phase, cfo)?;
    let source = SourcePair::random(config.n_symbols, &mut rng);
    Ok(synthesize_packet(source, channel, config, &mut rng))
}

/// Run `detector` on one packet; returns the decided XOR bits and the fallback flag.
pub fn detect(
    detector: DetectorKind,
    packet: &Packet,
    config: &SystemConfig,
    grid: &PhaseGrid,
    params: &EstimatorParams,
) -> Result<(Vec<u8>, bool)> {
    let gains = || packet.truth().map(|t| t.channel.gains());
    Ok(match detector {
        DetectorKind::Genie => (genie_detect(packet, config)?.xor_bits, false),
        DetectorKind::Mpd => (mpd_detect(packet, gains()?, config, grid)?.xor_bits, false),
        DetectorKind::Bpd { block_len } => (
            bpd_detect(packet, gains()?, config, grid, block_len)?.xor_bits,
            false,
        ),
        DetectorKind::Kd => {
            let out = kd_detect(packet);
            (out.decision.xor_bits, out.flagged)
        }
        DetectorKind::KdMpd => {
            let (d, est) = kd_mpd(packet, config, grid, params)?;
            (d.xor_bits, est.flagged)
        }
        DetectorKind::KdBpd { block_len } => {
            let (d, est) = kd_bpd(packet, config, grid, block_len, params)?;
            (d.xor_bits, est.flagged)
        }
    })
}

/// Simulate packets in parallel batches until the stopping rule is met.
pub fn run_ber_point(spec: &ExperimentSpec, detector: DetectorKind, snr_db: f64) -> Result<BerRecord> {
    spec.validate()?;
    let started = Instant::now();
    let config = spec.config_at(snr_db);
    let grid = spec.phase_grid()?;
    let bits_per_packet = config.n_symbols as u64;
    let batch = spec.batch_packets as u64;
    let (mut n_bits, mut n_errors, mut any_flag) = (0u64, 0u64, false);
    let mut next = 0u64;
    while n_errors < spec.stopping.min_errors && n_bits < spec.stopping.max_bits {
        let outcomes = (next..next + batch)
            .into_par_iter()
            .map(|idx| {
                let packet = simulate_packet(spec, &config, idx)?;
                let (bits, flagged) = detect(detector, &packet, &config, &grid, &spec.estimator)?;
                Ok((packet.count_errors(&bits)? as u64, flagged))
            })
            .collect::<Result<Vec<_>>>()?;
        next += batch;
        for (e, f) in outcomes {
            n_errors += e;
            any_flag |= f;
        }
        n_bits += batch * bits_per_packet;
    }
    Ok(BerRecord {
        detector: detector.to_string(),
        scenario: spec.scenario_label(),
        snr_db,
        ber: n_errors as f64 / n_bits as f64,
        n_bits,
        n_errors,
        seed: spec.seed,
        flagged: any_flag || n_errors < spec.stopping.min_errors,
        wall_time_s: spec.record_wall_time.then(|| started.elapsed().as_secs_f64()),
    })
}

/// Result of a required-SNR search.
#[derive(Debug, Clone, PartialEq)]
pub struct Crossing {
    /// SNR at which the BER curve crosses the target, interpolated in `log10(BER)`
    /// between the final bracket ends.
    pub snr_db: f64,
    /// Every BER point evaluated, sorted by SNR.
    pub probes: Vec<BerRecord>,
}

/// Log-linear interpolation of `target` between two records straddling it.
pub fn interpolate_crossing(lo: &BerRecord, hi: &BerRecord, target: f64) -> f64 {
    // a zero-error point is placed at half an error
    let floor = |r: &BerRecord| r.ber.max(0.5 / r.n_bits as f64).log10();
    let (y0, y1) = (floor(lo), floor(hi));
    if (y1 - y0).abs() < f64::EPSILON {
        return 0.5 * (lo.snr_db + hi.snr_db);
    }
    let t = ((target.log10() - y0) / (y1 - y0)).clamp(0.0, 1.0);
    lo.snr_db + t * (hi.snr_db - lo.snr_db)
}

/// Bisect the SNR bracket `[lo_db, hi_db]` until it is at most `tol_db` wide.
///
/// Fails with [`Error::BracketMismatch`] unless `BER(lo) > target >= BER(hi)`.
pub fn snr_for_target_ber(
    spec: &ExperimentSpec,
    detector: DetectorKind,
    target_ber: f64,
    bracket_db: (f64, f64),
    tol_db: f64,
) -> Result<Crossing> {
    if !(target_ber > 0.0 && target_ber < 1.0) {
        return Err(Error::InvalidInput("target BER must lie in (0, 1)".into()));
    }
    if !(tol_db > 0.0) || !(bracket_db.0 < bracket_db.1) {
        return Err(Error::InvalidInput("need tol_db > 0 and lo < hi".into()));
    }
    let mut cache: BTreeMap<u64, BerRecord> = BTreeMap::new();
    let mut probe = |snr: f64| -> Result<BerRecord> {
        if let Some(r) = cache.get(&snr.to_bits()) {
            return Ok(r.clone());
        }
        let r = run_ber_point(spec, detector, snr)?;
        cache.insert(snr.to_bits(), r.clone());
        Ok(r)
    };
    let (mut lo, mut hi) = (probe(bracket_db.0)?, probe(bracket_db.1)?);
    if !(lo.ber > target_ber && hi.ber <= target_ber) {
        return Err(Error::BracketMismatch {
            lo_db: bracket_db.0,
            hi_db: bracket_db.1,
            target: target_ber,
        });
    }
    while hi.snr_db - lo.snr_db > tol_db {
        let mid = probe(0.5 * (lo.snr_db + hi.snr_db))?;
        if mid.ber > target_ber {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let snr_db = interpolate_crossing(&lo, &hi, target_ber);
    let mut probes: Vec<BerRecord> = cache.into_values().collect();
    probes.sort_by(|a, b| a.snr_db.total_cmp(&b.snr_db));
    Ok(Crossing { snr_db, probes })
}

/// Every detector at every SNR point, detectors outermost.
pub fn run_sweep(spec: &ExperimentSpec) -> Result<Vec<BerRecord>> {
    spec.validate()?;
    let mut out = Vec::with_capacity(spec.detectors.len() * spec.snr_points_db.len());
    for &d in &spec.detectors {
        for &snr in &spec.snr_points_db {
            out.push(run_ber_point(spec, d, snr)?);
        }
    }
    Ok(out)
}

/// Write records as CSV through a temporary file in the target directory, then rename.
pub fn write_csv(path: &Path, records: &[BerRecord]) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut builder = tempfile::Builder::new();
    // tempfiles default to owner-only access; the result is an ordinary output file
    #[cfg(unix)]
    builder.permissions(std::os::unix::fs::PermissionsExt::from_mode(0o644));
    let tmp = builder.tempfile_in(dir).map_err(io_err)?;
    {
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(tmp.as_file());
        let csv_err = |source| Error::Csv {
            path: path.to_path_buf(),
            source,
        };
        w.write_record(CSV_HEADER).map_err(csv_err)?;
        for r in records {
            w.serialize(r).map_err(csv_err)?;
        }
        w.flush().map_err(io_err)?;
    }
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

pub const CSV_HEADER: [&str; 9] = [
    "detector",
    "scenario",
    "snr_db",
    "ber",
    "n_bits",
    "n_errors",
    "seed",
    "flagged",
    "wall_time_s",
];

/// Read records previously written by [`write_csv`].
pub fn read_csv(path: &Path) -> Result<Vec<BerRecord>> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().collect::<std::result::Result<_, _>>().map_err(csv_err)
}
