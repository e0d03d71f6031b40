mod args;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use args::{Cli, Command, InspectArgs, OracleArgs, ScenarioArgs, SweepArgs, ThresholdArgs};
use pnc_core::detectors::{bpd_detect, genie_detect, kd_detect, mpd_detect, Decision, PhaseGrid};
use pnc_core::estimator::{kd_bpd, kd_mpd, GainEstimate};
use pnc_core::harness::{
    run_sweep, simulate_packet, snr_for_target_ber, write_csv, BerRecord, CfoScenario,
    DetectorKind, ExperimentSpec, GainScenario, PhaseScenario,
};
use pnc_core::model::{relative_phase, synthesize_packet, ChannelState, SourcePair, SystemConfig};
use pnc_core::reference::max_log_discrepancy;

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<pnc_core::Error> for Failure {
    fn from(e: pnc_core::Error) -> Self {
        match e {
            pnc_core::Error::InvalidConfig(m) => Failure::Usage(m),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Sweep(a) => sweep(a),
        Command::Inspect(a) => inspect(a),
        Command::Threshold(a) => threshold(a),
        Command::Oracle(a) => oracle(a),
    };
    match result {
        Ok(code) => code,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            eprintln!("run with --help for usage");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}

fn base_spec(s: &ScenarioArgs) -> Result<ExperimentSpec, Failure> {
    let mut spec = match &s.spec {
        Some(path) => ExperimentSpec::load(path)?,
        None => ExperimentSpec::default(),
    };
    if let Some((a, b)) = s.gains {
        spec.gains = GainScenario::Fixed { a, b };
    }
    if let Some((power_a, power_b)) = s.fading {
        spec.gains = GainScenario::Rayleigh { power_a, power_b };
    }
    if let Some(p) = &s.phase {
        spec.phase = match p.as_str() {
            "uniform" => PhaseScenario::Uniform,
            v => PhaseScenario::Fixed {
                rad: v.parse().map_err(|_| Failure::Usage(format!("bad --phase '{v}'")))?,
            },
        };
    }
    if let Some(c) = &s.cfo_hz {
        spec.cfo = match c.as_str() {
            "uniform" => CfoScenario::Uniform,
            v => CfoScenario::Fixed {
                hz: v.parse().map_err(|_| Failure::Usage(format!("bad --cfo-hz '{v}'")))?,
            },
        };
    }
    if let Some(l) = s.block_len {
        for d in &mut spec.detectors {
            match d {
                DetectorKind::Bpd { block_len } | DetectorKind::KdBpd { block_len } => *block_len = l,
                _ => {}
            }
        }
    }
    if let Some(seed) = s.seed {
        spec.seed = seed;
    }
    if let Some(n) = s.n_theta {
        spec.grid.n_theta = n;
    }
    if let Some(n) = s.n_drift {
        spec.grid.n_drift = n;
    }
    Ok(spec)
}

fn detectors(ids: &[String], block_len: usize) -> Result<Vec<DetectorKind>, Failure> {
    ids.iter()
        .map(|id| DetectorKind::parse(id, block_len).map_err(Failure::from))
        .collect()
}

fn sweep(a: SweepArgs) -> Result<ExitCode, Failure> {
    let mut spec = base_spec(&a.scenario)?;
    if !a.detectors.is_empty() {
        spec.detectors = detectors(&a.detectors, a.scenario.block_len.unwrap_or(16))?;
    }
    if let Some(snr) = a.snr {
        spec.snr_points_db = snr;
    }
    if let Some(m) = a.min_errors {
        spec.stopping.min_errors = m;
    }
    if let Some(m) = a.max_bits {
        spec.stopping.max_bits = m;
    }
    spec.record_wall_time |= a.timing;
    spec.validate()?;

    let out = match a.out {
        Some(p) => p,
        None => a.out_dir.unwrap_or_else(|| PathBuf::from(".")).join("sweep.csv"),
    };
    let records = run_sweep(&spec)?;
    write_csv(&out, &records)?;
    print_records(&records);
    println!("wrote {}", out.display());
    let flagged = records.iter().filter(|r| r.flagged).count();
    if flagged > 0 {
        eprintln!("{flagged} record(s) flagged: stopped on max_bits or used the empty-cluster fallback");
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

fn print_records(records: &[BerRecord]) {
    println!("{:<14} {:>7} {:>11} {:>9} {:>12}  flag", "detector", "snr_db", "ber", "errors", "bits");
    for r in records {
        println!(
            "{:<14} {:>7.2} {:>11.3e} {:>9} {:>12}  {}",
            r.detector,
            r.snr_db,
            r.ber,
            r.n_errors,
            r.n_bits,
            if r.flagged { "*" } else { "" }
        );
    }
}

fn decide(
    kind: DetectorKind,
    packet: &pnc_core::Packet,
    config: &SystemConfig,
    grid: &PhaseGrid,
    spec: &ExperimentSpec,
) -> pnc_core::Result<(Decision, Option<GainEstimate>)> {
    let gains = || packet.truth().map(|t| t.channel.gains());
    Ok(match kind {
        DetectorKind::Genie => (genie_detect(packet, config)?, None),
        DetectorKind::Mpd => (mpd_detect(packet, gains()?, config, grid)?, None),
        DetectorKind::Bpd { block_len } => {
            (bpd_detect(packet, gains()?, config, grid, block_len)?, None)
        }
        DetectorKind::Kd => (kd_detect(packet).decision, None),
        DetectorKind::KdMpd => {
            let (d, e) = kd_mpd(packet, config, grid, &spec.estimator)?;
            (d, Some(e))
        }
        DetectorKind::KdBpd { block_len } => {
            let (d, e) = kd_bpd(packet, config, grid, block_len, &spec.estimator)?;
            (d, Some(e))
        }
    })
}

fn inspect(a: InspectArgs) -> Result<ExitCode, Failure> {
    let spec = base_spec(&a.scenario)?;
    let kind = DetectorKind::parse(&a.detector, a.scenario.block_len.unwrap_or(16))?;
    let spec = ExperimentSpec {
        detectors: vec![kind],
        ..spec
    };
    spec.validate()?;
    let config = spec.config_at(a.snr);
    let grid = spec.phase_grid()?;
    let packet = simulate_packet(&spec, &config, a.packet)?;
    let (decision, estimate) = decide(kind, &packet, &config, &grid, &spec)?;
    let truth = packet.truth()?;
    let xor = truth.source.xor();

    println!("{}  snr={} dB  detector={kind}", spec.scenario_label(), a.snr);
    println!(
        "channel: gains={:.4}/{:.4} phase={:.4} rad cfo={} Hz",
        truth.channel.gain_a, truth.channel.gain_b, truth.channel.initial_phase_rad, truth.channel.cfo_hz
    );
    println!("{:>4} {:>4} {:>4} {:>8} {:>8} {:>8} {:>8}", "n", "s", "s*", "theta", "theta^", "|r1|", "|r2|");
    for (n, obs) in packet.observations.iter().enumerate() {
        let theta_hat = match &decision.theta_hat {
            Some(t) => format!("{:8.4}", t[n]),
            None => format!("{:>8}", "-"),
        };
        println!(
            "{:>4} {:>4} {:>4} {:8.4} {} {:8.4} {:8.4}{}",
            n,
            xor[n],
            decision.xor_bits[n],
            relative_phase(n, &truth.channel, &config),
            theta_hat,
            obs.mag1,
            obs.mag2,
            if xor[n] != decision.xor_bits[n] { "  x" } else { "" }
        );
    }
    if let Some(d) = decision.drift_hat {
        println!(
            "drift_hat={d:.6} rad/symbol (true {:.6})",
            truth.channel.drift_per_symbol(&config)
        );
    }
    if let Some(e) = estimate {
        println!(
            "gains: rough={:.4}/{:.4} fine={:.4}/{:.4} from {} symbols{}",
            e.rough_min,
            e.rough_max,
            e.h_min,
            e.h_max,
            e.n_used,
            if e.flagged { " (fallback partition)" } else { "" }
        );
    }
    let errors = packet.count_errors(&decision.xor_bits)?;
    println!("symbol errors: {errors}/{}", packet.len());
    Ok(ExitCode::SUCCESS)
}

fn threshold(a: ThresholdArgs) -> Result<ExitCode, Failure> {
    let mut spec = base_spec(&a.scenario)?;
    let kind = DetectorKind::parse(&a.detector, a.scenario.block_len.unwrap_or(16))?;
    spec.detectors = vec![kind];
    if let Some(m) = a.min_errors {
        spec.stopping.min_errors = m;
    }
    if let Some(m) = a.max_bits {
        spec.stopping.max_bits = m;
    }
    spec.validate()?;
    let crossing = snr_for_target_ber(&spec, kind, a.target_ber, a.bracket, a.tol_db)?;
    print_records(&crossing.probes);
    println!("{kind}: BER {:e} reached at {:.3} dB", a.target_ber, crossing.snr_db);
    if crossing.probes.iter().any(|r| r.flagged) {
        eprintln!("some probes were flagged");
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

fn oracle(a: OracleArgs) -> Result<ExitCode, Failure> {
    let grid = PhaseGrid::new(a.n_theta, a.n_drift, -a.drift_max, a.drift_max)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut worst: f64 = 0.0;
    for _ in 0..a.packets {
        let config = SystemConfig::at_snr_db(rng.random_range(0.0..20.0));
        let gains = (rng.random_range(0.3..2.0), rng.random_range(0.3..2.0));
        let channel = ChannelState::new(
            gains.0,
            gains.1,
            rng.random_range(0.0..std::f64::consts::TAU),
            rng.random_range(-config.cfo_bound_hz..config.cfo_bound_hz),
        )?;
        let source = SourcePair::random(a.block_len, &mut rng);
        let packet = synthesize_packet(source, channel, &config, &mut rng);
        worst = worst.max(max_log_discrepancy(&packet.observations, gains, config.n0, &grid)?);
    }
    let pass = worst <= a.tolerance;
    println!(
        "{} packets, block {}, grid {}x{}: max log discrepancy {worst:.3e} ({})",
        a.packets,
        a.block_len,
        a.n_theta,
        a.n_drift,
        if pass { "ok" } else { "FAIL" }
    );
    Ok(if pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
