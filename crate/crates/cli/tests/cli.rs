//! End-to-end tests of the `minent` binary: flag parsing, config-file
//! merging, output formats, sweeps, determinism, bitstream packing, and
//! exit codes.

use minent::bb84::{bb84_key_length, Bb84Params};
use minent::bounds::FailureBudget;
use serde_json::Value;
use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_minent"))
}

fn tmpdir() -> &'static Path {
    Path::new(env!("CARGO_TARGET_TMPDIR"))
}

/// Run the binary, assert success, and return stdout.
fn run_ok(args: &[&str]) -> String {
    let out = bin().args(args).output().expect("binary runs");
    assert!(
        out.status.success(),
        "command {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("stdout is UTF-8")
}

fn run_json(args: &[&str]) -> Value {
    serde_json::from_str(&run_ok(args)).expect("stdout parses as JSON")
}

/// Run the binary and return its exit code.
fn exit_code(args: &[&str]) -> i32 {
    bin().args(args)
        .output()
        .expect("binary runs")
        .status
        .code()
        .expect("exit code")
}

const BB84_EXAMPLE: &[&str] = &[
    "bb84", "--n", "1e6", "--k", "1e5", "--ez", "0.02", "--ex", "0.02", "--eps-sec", "1e-9",
    "--eps-cor", "1e-15", "--leak", "auto",
];

// ----- calculator outputs against the library -----

#[test]
fn bb84_example_matches_library() {
    let v = run_json(BB84_EXAMPLE);
    assert_eq!(v["command"], "bb84");

    let budget = FailureBudget::qkd(1e-9 / 4.0, 1e-15).unwrap();
    let params = Bb84Params::with_standard_leak(1_000_000, 100_000, 0.02, 0.02, budget).unwrap();
    let want = bb84_key_length(&params).unwrap();

    let report = &v["report"];
    assert_eq!(report["ell"].as_u64().unwrap(), want.ell);
    assert!((report["e_hat"].as_f64().unwrap() - want.e_hat).abs() < 1e-12);
    assert!((report["hmin_smooth"].as_f64().unwrap() - want.hmin_smooth).abs() < 1e-6);
    assert!((report["delta_sec"].as_f64().unwrap() - want.delta_sec).abs() < 1e-15);
    assert_eq!(
        report["terms"].as_object().unwrap().len(),
        want.terms.len()
    );
}

#[test]
fn mineval_anchor() {
    let v = run_json(&["mineval", "--lambdas", "0.7,0.3"]);
    let report = &v["report"];
    assert!((report["hmin"].as_f64().unwrap() - 0.061_514_605_638_653_186).abs() < 1e-9);
    assert!((report["pguess"].as_f64().unwrap() - 0.958_257_569_495_583_9).abs() < 1e-9);
    assert_eq!(report["d"].as_f64().unwrap(), 2.0);
}

#[test]
fn qrng_asymptotic_rate_at_zero_clicks() {
    let v = run_json(&[
        "qrng", "--n", "1e6", "--k", "1e5", "--Q", "0", "--eps-sec", "1e-10", "--asymptotic",
    ]);
    assert!((v["report"]["rate"].as_f64().unwrap() - 0.41504).abs() < 1e-5);
}

#[test]
fn diqkd_asymptotic_saturates_at_the_quantum_bound() {
    let v = run_json(&[
        "diqkd", "--n", "1000", "--k", "1000", "--omega", "0.8535533905932737", "--leak", "0",
        "--eps-t", "1e-10", "--eps-g", "1e-10", "--eps-cor", "1e-15", "--asymptotic",
    ]);
    assert_eq!(v["report"]["phase_error"].as_f64().unwrap(), 0.0);
    assert_eq!(v["report"]["rate"].as_f64().unwrap(), 1.0);
}

// ----- config files, round trips, determinism -----

#[test]
fn json_config_echo_round_trips_byte_identically() {
    let first = run_ok(BB84_EXAMPLE);
    let v: Value = serde_json::from_str(&first).unwrap();

    let path = tmpdir().join("bb84_roundtrip.json");
    std::fs::write(&path, serde_json::to_string(&v["config"]).unwrap()).unwrap();
    let second = run_ok(&["bb84", "--config", path.to_str().unwrap()]);
    assert_eq!(first, second);
}

#[test]
fn flags_override_config_values() {
    let path = tmpdir().join("qrng_base.json");
    std::fs::write(
        &path,
        r#"{"n": 1e6, "k": 1e5, "Q": 0.02, "eps-sec": 1e-10}"#,
    )
    .unwrap();
    let base = run_json(&["qrng", "--config", path.to_str().unwrap()]);
    let overridden = run_json(&["qrng", "--config", path.to_str().unwrap(), "--Q", "0.05"]);
    assert_eq!(base["config"]["Q"].as_f64().unwrap(), 0.02);
    assert_eq!(overridden["config"]["Q"].as_f64().unwrap(), 0.05);
    assert!(
        overridden["report"]["ell"].as_u64().unwrap() < base["report"]["ell"].as_u64().unwrap()
    );
}

#[test]
fn identical_seed_gives_byte_identical_output_and_seeds_differ() {
    let args = ["simulate", "chsh", "--rounds", "20000", "--seed", "5"];
    let a = run_ok(&args);
    let b = run_ok(&args);
    assert_eq!(a, b);

    let c = run_ok(&["simulate", "chsh", "--rounds", "20000", "--seed", "6"]);
    assert_ne!(a, c);
}

// ----- sweeps and output formats -----

#[test]
fn sweep_emits_one_record_per_grid_point() {
    let mut args = BB84_EXAMPLE.to_vec();
    args.extend_from_slice(&["--sweep", "ez=0.01:0.05:5"]);
    let v = run_json(&args);
    assert_eq!(v["sweep"], "ez");
    let records = v["records"].as_array().unwrap();
    assert_eq!(records.len(), 5);
    assert!((records[0]["ez"].as_f64().unwrap() - 0.01).abs() < 1e-12);
    assert!((records[4]["ez"].as_f64().unwrap() - 0.05).abs() < 1e-12);
    // Key length shrinks as the key-basis error rate grows.
    let ells: Vec<u64> = records
        .iter()
        .map(|r| r["report"]["ell"].as_u64().unwrap())
        .collect();
    assert!(ells.windows(2).all(|w| w[0] > w[1]), "ell not decreasing: {ells:?}");
}

#[test]
fn csv_sweep_has_header_plus_one_row_per_point() {
    let mut args = BB84_EXAMPLE.to_vec();
    args.extend_from_slice(&["--sweep", "ez=0.01:0.05:5", "--out", "csv"]);
    let out = run_ok(&args);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 6);
    assert!(lines[0].starts_with("sweep:ez,"));
    assert!(lines[0].split(',').any(|h| h == "ell"));
    // RFC 4180: same field count on every row.
    let cols = lines[0].split(',').count();
    assert!(lines.iter().all(|l| l.split(',').count() == cols));
}

#[test]
fn csv_and_text_single_run_shapes() {
    let mut args = BB84_EXAMPLE.to_vec();
    args.push("--out");
    args.push("csv");
    let csv_out = run_ok(&args);
    let lines: Vec<&str> = csv_out.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].split(',').any(|h| h == "ell"));

    let mut args = BB84_EXAMPLE.to_vec();
    args.push("--out");
    args.push("text");
    let text_out = run_ok(&args);
    assert!(text_out.starts_with("command: bb84\n"));
    assert!(text_out.lines().any(|l| l.starts_with("ell")));
}

// ----- bitstream emission -----

#[test]
fn emitted_bits_match_reported_symbol_frequencies() {
    let raw_path = tmpdir().join("qrng_raw.bin");
    let ext_path = tmpdir().join("qrng_ext.bin");
    let rounds = 500u64;
    let v = run_json(&[
        "simulate", "qrng", "--rounds", "500", "--source", "poisson:0.5", "--seed", "11",
        "--emit-bits", raw_path.to_str().unwrap(), "--extract", "100", "--emit-extracted",
        ext_path.to_str().unwrap(),
    ]);
    let report = &v["report"];
    assert_eq!(report["raw_bits"].as_f64().unwrap() as u64, 2 * rounds);
    assert_eq!(report["extracted_bits"].as_f64().unwrap() as u64, 100);

    let bytes = std::fs::read(&raw_path).unwrap();
    assert_eq!(bytes.len(), (2 * rounds as usize).div_ceil(8));
    assert_eq!(std::fs::read(&ext_path).unwrap().len(), 100usize.div_ceil(8));

    // Unpack (bit i of byte j is raw bit 8j + i), reassemble the quadrant
    // symbols (two bits each, low bit first), and compare the counts with
    // the frequencies in the report.
    let mut bits = Vec::with_capacity(2 * rounds as usize);
    for j in 0..2 * rounds as usize {
        bits.push((bytes[j / 8] >> (j % 8)) & 1);
    }
    let mut counts = [0u64; 4];
    for pair in bits.chunks(2) {
        counts[(pair[0] + 2 * pair[1]) as usize] += 1;
    }
    for (y, &count) in counts.iter().enumerate() {
        let freq = report[&format!("freq_{y}")].as_f64().unwrap();
        assert_eq!((freq * rounds as f64).round() as u64, count, "quadrant {y}");
    }
}

// ----- exit codes -----

#[test]
fn invalid_input_exits_2() {
    // Library-level validation failure.
    assert_eq!(
        exit_code(&[
            "bb84", "--n", "1e6", "--k", "1e5", "--ez", "0.7", "--ex", "0.02", "--eps-sec",
            "1e-9", "--eps-cor", "1e-15",
        ]),
        2
    );
    // Non-integral count.
    assert_eq!(
        exit_code(&[
            "bb84", "--n", "1.5", "--k", "1e5", "--ez", "0.02", "--ex", "0.02", "--eps-sec",
            "1e-9", "--eps-cor", "1e-15",
        ]),
        2
    );
    // Missing required parameter.
    assert_eq!(exit_code(&["qrng", "--n", "1e6", "--k", "1e5", "--Q", "0.1"]), 2);
    // Unknown sweep parameter.
    assert_eq!(
        exit_code(&[
            "qrng", "--n", "1e6", "--k", "1e5", "--Q", "0.1", "--eps-sec", "1e-10", "--sweep",
            "bogus=1:2:3",
        ]),
        2
    );
    // Unknown flag (clap).
    assert_eq!(exit_code(&["qrng", "--nope"]), 2);
    // Extraction without a length.
    assert_eq!(
        exit_code(&[
            "simulate", "qrng", "--rounds", "100", "--source", "vacuum", "--emit-extracted",
            "/dev/null",
        ]),
        2
    );
    // Extraction longer than the raw string.
    assert_eq!(
        exit_code(&[
            "simulate", "qrng", "--rounds", "4", "--source", "vacuum", "--extract", "100",
        ]),
        2
    );
    // Unrecognized source grammar.
    assert_eq!(
        exit_code(&["simulate", "qrng", "--rounds", "100", "--source", "squeezed:2"]),
        2
    );
}

#[test]
fn unknown_config_key_exits_2() {
    let path = tmpdir().join("typo.json");
    std::fs::write(&path, r#"{"n": 1e6, "k": 1e5, "Q": 0.1, "epssec": 1e-10}"#).unwrap();
    assert_eq!(exit_code(&["qrng", "--config", path.to_str().unwrap()]), 2);
}

#[test]
fn help_exits_0() {
    assert_eq!(exit_code(&["--help"]), 0);
    assert_eq!(exit_code(&["bb84", "--help"]), 0);
}
