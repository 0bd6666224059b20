//! End-to-end checks of the binary: exit codes, config handling, output
//! determinism.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn qtimes(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qtimes"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

#[test]
fn usage_error_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = qtimes(&["rabi", "--set", "no_such_key=1"], tmp.path());
    assert_eq!(out.status.code(), Some(1));

    let out = qtimes(&["rabi", "--set", "braces"], tmp.path());
    assert_eq!(out.status.code(), Some(1));

    let out = qtimes(&["fig2", "--config", "does_not_exist.cfg"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn rabi_runs_clean() {
    let tmp = tempfile::tempdir().unwrap();
    let out = qtimes(&["rabi", "--out", "results"], tmp.path());
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(tmp.path().join("results/rabi.csv")).unwrap();
    assert!(csv.contains("toa_mean"));
    assert!(csv.starts_with("# m = "));
}

#[test]
fn config_file_roundtrip_and_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(
        tmp.path().join("run.cfg"),
        "# comment line\nrabi_omega0 = 2.0\nrabi_samples = 2048\n",
    )
    .unwrap();
    let out = qtimes(
        &[
            "rabi",
            "--config",
            "run.cfg",
            "--set",
            "rabi_samples=4096",
            "--out",
            "r",
        ],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let csv = fs::read_to_string(tmp.path().join("r/rabi.csv")).unwrap();
    assert!(csv.contains("# rabi_omega0 = 2"));
    assert!(csv.contains("# rabi_samples = 4096"));

    fs::write(tmp.path().join("bad.cfg"), "mystery = 3\n").unwrap();
    let out = qtimes(&["rabi", "--config", "bad.cfg"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn fig2_small_sweep_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let args = [
        "fig2",
        "--set",
        "l_values=2,5",
        "--set",
        "t_max=60",
        "--set",
        "n_samples=300",
        "--pipelines",
        "spectral,time",
    ];
    let out = qtimes(&[&args[..], &["--out", "a"]].concat(), tmp.path());
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let out = qtimes(&[&args[..], &["--out", "b"]].concat(), tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let a = fs::read(tmp.path().join("a/fig2.csv")).unwrap();
    let b = fs::read(tmp.path().join("b/fig2.csv")).unwrap();
    assert_eq!(a, b, "identical config must give bit-identical CSV");
    assert!(tmp.path().join("a/fig2.gp").exists());

    let text = String::from_utf8(a).unwrap();
    let header_lines = text.lines().filter(|l| l.starts_with('#')).count();
    assert!(header_lines >= 10, "parameter header incomplete");
    let data_lines: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(data_lines.len(), 3); // column header + 2 rows
    assert!(data_lines[0].starts_with("L,tf_mean_time"));
}

#[test]
fn zero_crossing_and_profile_run() {
    let tmp = tempfile::tempdir().unwrap();
    let out = qtimes(
        &[
            "zero-crossing",
            "--set",
            "zero_crossing_l_values=5",
            "--out",
            "z",
        ],
        tmp.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(tmp.path().join("z/zero_crossing.csv")).unwrap();
    assert!(csv.contains("L,peak_time,t_zero,censored"));

    let out = qtimes(
        &[
            "current-profile",
            "--l",
            "5",
            "--set",
            "n_samples=400",
            "--out",
            "p",
        ],
        tmp.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(tmp.path().join("p/current_profile_L5.csv").exists());
    assert!(tmp.path().join("p/current_profile_L5.gp").exists());
}

#[test]
fn validate_distinguishes_failure_from_usage() {
    let tmp = tempfile::tempdir().unwrap();
    // impossible tolerances: every check fails, exit code 2
    let out = qtimes(
        &["validate", "--set", "validate_tolerance_scale=1e-9"],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("FAIL"));

    // usage error stays distinct
    let out = qtimes(
        &["validate", "--set", "validate_tolerance_scale=x"],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(1));
}
