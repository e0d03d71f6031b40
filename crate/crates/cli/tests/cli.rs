use std::path::Path;
use std::process::{Command, Output};

fn pnc(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pnc"))
        .args(args)
        .current_dir(cwd)
        .env_remove("PNC_OUT_DIR")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const SWEEP: &[&str] = &[
    "sweep", "--detector", "bpd", "--block-len", "16", "--gains", "1,1", "--phase", "0.6283",
    "--cfo-hz", "-2000", "--snr", "6:8:1", "--seed", "7", "--min-errors", "50", "--max-bits",
    "100000",
];

#[test]
fn help_and_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let o = pnc(&["sweep", "--help"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("--detector"));
    assert_eq!(pnc(&["sweep", "--bogus"], dir.path()).status.code(), Some(2));
    assert_eq!(pnc(&["sweep", "--detector", "nope"], dir.path()).status.code(), Some(2));
    assert_eq!(
        pnc(&["sweep", "--detector", "mpd", "--min-errors", "10"], dir.path()).status.code(),
        Some(2)
    );
}

#[test]
fn sweep_reruns_write_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut a = SWEEP.to_vec();
    a.extend(["--out", "a.csv"]);
    let mut b = SWEEP.to_vec();
    b.extend(["--out", "b.csv"]);
    assert!(pnc(&a, dir.path()).status.success());
    assert!(pnc(&b, dir.path()).status.success());
    let x = std::fs::read(dir.path().join("a.csv")).unwrap();
    assert_eq!(x, std::fs::read(dir.path().join("b.csv")).unwrap());
    let text = String::from_utf8(x).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.lines().nth(1).unwrap().starts_with("bpd-L16,"));
}

#[test]
fn sweep_defaults_to_out_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("results");
    std::fs::create_dir(&out).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_pnc"))
        .args(["sweep", "--detector", "genie", "--snr", "20", "--max-bits", "10000"])
        .current_dir(dir.path())
        .env("PNC_OUT_DIR", &out)
        .output()
        .unwrap();
    // the point stops on max_bits before min_errors, so it is flagged
    assert_eq!(o.status.code(), Some(1));
    assert!(out.join("sweep.csv").exists());
    assert!(!dir.path().join("sweep.csv").exists());
}

#[test]
fn inspect_noiseless_packet_has_no_errors() {
    let dir = tempfile::tempdir().unwrap();
    for det in ["genie", "mpd", "bpd", "kd", "kd-bpd"] {
        let o = pnc(&["inspect", "--detector", det, "--snr", "100", "--cfo-hz", "-2000"], dir.path());
        assert!(o.status.success(), "{det}");
        assert!(stdout(&o).contains("symbol errors: 0/128"), "{det}: {}", stdout(&o));
    }
}

#[test]
fn inspect_tracks_phase_and_drift() {
    let dir = tempfile::tempdir().unwrap();
    let o = pnc(
        &["inspect", "--detector", "bpd", "--snr", "30", "--phase", "2.5", "--cfo-hz", "-2000"],
        dir.path(),
    );
    assert!(o.status.success());
    let text = stdout(&o);
    let step = std::f64::consts::TAU / 40.0;
    let (mut close, mut rows) = (0, 0);
    for line in text.lines() {
        let f: Vec<f64> = line.split_whitespace().filter_map(|t| t.parse().ok()).collect();
        if f.len() == 7 && line.trim_start().starts_with(|c: char| c.is_ascii_digit()) {
            rows += 1;
            let d = (f[3] - f[4]).abs();
            if d.min(std::f64::consts::TAU - d) <= step {
                close += 1;
            }
        }
    }
    assert_eq!(rows, 128);
    assert!(close >= 120, "{close}/128");
    let drift: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("drift_hat="))
        .and_then(|l| l.split_whitespace().next())
        .unwrap()
        .parse()
        .unwrap();
    let truth = -std::f64::consts::TAU * 2000.0 * 1e-6;
    let drift_step = 2.0 * std::f64::consts::TAU * 0.01 / 39.0;
    assert!((drift - truth).abs() <= drift_step, "{drift}");
}

#[test]
fn oracle_command_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = pnc(&["oracle", "--packets", "20"], dir.path());
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).contains("ok"));
}

#[test]
fn threshold_reports_bracket_errors() {
    let dir = tempfile::tempdir().unwrap();
    let o = pnc(
        &["threshold", "--detector", "genie", "--target-ber", "1e-2", "--bracket", "20:25", "--max-bits", "20000"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("straddle"));
}
