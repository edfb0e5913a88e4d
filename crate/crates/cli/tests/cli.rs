//! End-to-end checks of the command-line binary: worked examples, file
//! round-trips, byte-identical reruns, and the exit-code contract.

use std::fs;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bbs-ghd"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary should run")
}

/// Parses stdout as JSON after asserting the command succeeded.
fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(
        out.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout should be JSON")
}

/// Parses stderr as the machine-readable error object of a failed command.
fn stderr_error(out: &Output, exit: i32) -> serde_json::Value {
    assert_eq!(out.status.code(), Some(exit));
    let v: serde_json::Value =
        serde_json::from_slice(&out.stderr).expect("stderr should be JSON");
    v["error"].clone()
}

const WALKTHROUGH: &str = "1101100110001110000\n";

#[test]
fn speeds_prints_the_two_species_example() {
    let v = stdout_json(&run(&["speeds", "--rho", "0,0"]));
    assert_eq!(v["speeds"], serde_json::json!([1.0, 2.0]));
    assert_eq!(v["manifest"]["command"], "speeds");
}

#[test]
fn decompose_matches_the_worked_walkthrough() {
    let dir = tempfile::tempdir().unwrap();
    let eta = dir.path().join("eta.txt");
    fs::write(&eta, WALKTHROUGH).unwrap();
    let v = stdout_json(&run(&["decompose", "--input", eta.to_str().unwrap()]));
    assert_eq!(v["slots"]["I"], 3);
    assert_eq!(
        v["slots"]["rows"],
        serde_json::json!([[[2, 1]], [[2, 1]], [[1, 2]]])
    );
}

#[test]
fn files_round_trip_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let eta = dir.path().join("eta.txt");
    let slots = dir.path().join("slots.json");
    let back = dir.path().join("back.txt");
    fs::write(&eta, WALKTHROUGH).unwrap();
    let out = run(&[
        "decompose",
        "--input",
        eta.to_str().unwrap(),
        "--out",
        slots.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let out = run(&[
        "reconstruct",
        "--input",
        slots.to_str().unwrap(),
        "--out",
        back.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert_eq!(fs::read(&eta).unwrap(), fs::read(&back).unwrap());
}

#[test]
fn evolution_places_the_balls_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let eta = dir.path().join("eta.txt");
    fs::write(&eta, "111000010\n").unwrap();
    let out = run(&["evolve", "--input", eta.to_str().unwrap(), "--steps", "3"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let balls: Vec<usize> = text
        .trim_end()
        .char_indices()
        .filter(|&(_, c)| c == '1')
        .map(|(k, _)| k + 1)
        .collect();
    assert_eq!(balls, vec![9, 12, 13, 14]);
}

#[test]
fn slot_shift_adds_size_times_steps() {
    let dir = tempfile::tempdir().unwrap();
    let eta = dir.path().join("eta.txt");
    let slots = dir.path().join("slots.json");
    fs::write(&eta, WALKTHROUGH).unwrap();
    let out = run(&[
        "decompose",
        "--input",
        eta.to_str().unwrap(),
        "--out",
        slots.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let v = stdout_json(&run(&[
        "slots-shift",
        "--input",
        slots.to_str().unwrap(),
        "--steps",
        "2",
    ]));
    assert_eq!(
        v["slots"]["rows"],
        serde_json::json!([[[4, 1]], [[6, 1]], [[7, 2]]])
    );
}

#[test]
fn flow_emits_manifest_and_version_headers() {
    let dir = tempfile::tempdir().unwrap();
    let profile = dir.path().join("profile.json");
    fs::write(
        &profile,
        r#"{"frame":"direct","profiles":[{"breakpoints":[[0.0,0.0],[1.0,0.1]],"tail_slope":0.0}]}"#,
    )
    .unwrap();
    let out = run(&[
        "flow",
        "--profile",
        profile.to_str().unwrap(),
        "--time",
        "0.5",
        "--grid",
        "0.25",
        "--u-max",
        "2.0",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# manifest: "));
    assert!(lines.next().unwrap().starts_with("# version: "));
    assert_eq!(lines.next().unwrap(), "u,psi_1");
}

#[test]
fn reruns_with_identical_manifests_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let rates = dir.path().join("rates.json");
    let errs = dir.path().join("errs.csv");
    fs::write(
        &rates,
        r#"{"rates":[{"cuts":[1.0,2.0],"rates":[0.15]},{"cuts":[0.0,1.0],"rates":[0.15]}]}"#,
    )
    .unwrap();
    let args = [
        "experiment",
        "convergence",
        "--rates",
        rates.to_str().unwrap(),
        "--N",
        "100",
        "--time",
        "0.5",
        "--trials",
        "2",
        "--seed",
        "7",
        "--out",
        errs.to_str().unwrap(),
    ];
    assert!(run(&args).status.success());
    let first = fs::read(&errs).unwrap();
    assert!(run(&args).status.success());
    assert_eq!(first, fs::read(&errs).unwrap());
    let text = String::from_utf8(first).unwrap();
    assert!(text.starts_with("# manifest: "));
    assert!(text.contains("N,size_i,trial,t,sup_error,seed"));
}

#[test]
fn overloaded_density_exits_with_the_domain_code() {
    let err = stderr_error(&run(&["speeds", "--rho", "0.3,0.2"]), 3);
    assert_eq!(err["category"], "domain");
    assert_eq!(err["exit"], 3);
}

#[test]
fn malformed_json_exits_with_the_schema_code() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"rows\": [[\n").unwrap();
    let err = stderr_error(
        &run(&["reconstruct", "--input", bad.to_str().unwrap()]),
        2,
    );
    assert_eq!(err["category"], "schema");

    // Well-formed JSON whose payload violates a type invariant (slot 0).
    let invalid = dir.path().join("invalid.json");
    fs::write(&invalid, r#"{"I":1,"rows":[[[0,1]]]}"#).unwrap();
    let err = stderr_error(
        &run(&["reconstruct", "--input", invalid.to_str().unwrap()]),
        2,
    );
    assert_eq!(err["category"], "schema");
}

#[test]
fn list_flags_are_required() {
    assert_eq!(run(&["speeds"]).status.code(), Some(2));
    assert_eq!(
        run(&["experiment", "convergence", "--rates", "r.json", "--time", "0.5", "--out", "x.csv"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn thread_cap_must_be_a_positive_integer() {
    let out = bin()
        .env("BBS_GHD_THREADS", "zebra")
        .args(["speeds", "--rho", "0,0"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin()
        .env("BBS_GHD_THREADS", "2")
        .args(["speeds", "--rho", "0,0"])
        .output()
        .unwrap();
    assert!(out.status.success());
}
