use std::path::Path;
use std::process::{Command, Output};

const SUBCOMMANDS: [&str; 6] = ["plan", "place", "surface", "bench", "validate", "generate"];

fn eih(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eih"))
        .args(args)
        .output()
        .unwrap()
}

fn fixture() -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/fixtures/five_sensors.toml")
        .to_string_lossy()
        .into_owned()
}

fn all_help() -> String {
    let mut text = String::new();
    for args in
        std::iter::once(vec!["--help"]).chain(SUBCOMMANDS.iter().map(|s| vec![*s, "--help"]))
    {
        let out = eih(&args);
        assert_eq!(out.status.code(), Some(0));
        text.push_str(&format!("$ eih {}\n", args.join(" ")));
        text.push_str(&String::from_utf8(out.stdout).unwrap());
        text.push('\n');
    }
    text
}

#[test]
fn help_matches_golden() {
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/help.txt");
    let text = all_help();
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&golden, &text).unwrap();
    }
    assert_eq!(text, std::fs::read_to_string(&golden).unwrap());
    for flag in [
        "--scenario",
        "--loc",
        "--seed",
        "--out",
        "--eps",
        "--max-iter",
        "--grid-res",
        "--jobs",
        "--angle-unit",
        "--se-source",
        "--set",
    ] {
        assert!(text.contains(flag), "{flag} missing from help");
    }
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(eih(&[]).status.code(), Some(1));
    assert_eq!(eih(&["plan"]).status.code(), Some(1));
    assert_eq!(
        eih(&["plan", "--scenario", &fixture(), "--loc", "abc"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        eih(&[
            "bench",
            "--experiment",
            "no_such_experiment",
            "--seeds",
            "1"
        ])
        .status
        .code(),
        Some(1)
    );
    assert_eq!(
        eih(&["plan", "--scenario", "/nonexistent.toml"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn invalid_output_ratio_lists_violation() {
    let out = eih(&[
        "validate",
        "--scenario",
        &fixture(),
        "--set",
        "sensor.3.output_ratio=1.5",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(
        stdout.contains("sensor 3: output_ratio outside (0,1)"),
        "{stdout}"
    );
}

#[test]
fn validate_runs_self_tests() {
    let out = eih(&["validate", "--scenario", &fixture()]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(
        stdout.lines().filter(|l| l.starts_with("ok")).count(),
        4,
        "{stdout}"
    );
}

#[test]
fn unreachable_deadline_exits_two() {
    let f = fixture();
    let out = eih(&[
        "plan",
        "--scenario",
        &f,
        "--set",
        "noise_model=psd",
        "--set",
        "noise_power=-174 dBm/Hz",
        "--set",
        "latency_req=1 ms",
    ]);
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn plan_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = eih(&[
        "plan",
        "--scenario",
        &fixture(),
        "--loc",
        "0,0",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let plan = std::fs::read_to_string(dir.path().join("plan.toml")).unwrap();
    assert!(plan.contains("bandwidth_hz") && plan.contains("total"));
    let csv = std::fs::read_to_string(dir.path().join("per_user.csv")).unwrap();
    assert_eq!(csv.lines().count(), 6);
}

#[test]
fn place_reports_grid_gap() {
    let out = eih(&["place", "--scenario", &fixture(), "--audit-grid", "20"]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(
        stdout.contains("grid optimum") && stdout.contains("sca gap"),
        "{stdout}"
    );
}

#[test]
fn sequential_and_parallel_runs_agree() {
    let f = fixture();
    let args = ["place", "--scenario", f.as_str(), "--audit-grid", "50"];
    let a = eih(&[&["--jobs", "1"][..], &args[..]].concat());
    let b = eih(&[&["--jobs", "3"][..], &args[..]].concat());
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}
