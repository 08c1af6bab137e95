//! End-to-end tests of the `bitsim` binary: exit codes, stage tagging,
//! artifact cleanup, and subcommand plumbing.

use std::path::Path;
use std::process::{Command, Output};

fn bitsim(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bitsim"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn usage_errors_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bitsim(&["frobnicate"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    let out = bitsim(&["run", "--network", "smoke", "--mode", "12b"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("usage error"));
    let out = bitsim(&["run"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    // help is not an error
    let out = bitsim(&["--help"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn validation_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bitsim(&["plan", "--network", "no-such-net"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("validation error"));

    // a config violating the FC invariant is a validation failure
    let bad = tmp.path().join("bad.toml");
    std::fs::write(
        &bad,
        r#"
name = "bad"
input = [1, 4, 4]
chained = false
[[layer]]
kind = "fc"
n_ic = 4
n_oc = 2
h_i = 4
w_i = 4
h_k = 3
w_k = 3
"#,
    )
    .unwrap();
    let out = bitsim(&["plan", "--network", bad.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("1x1"));
}

#[test]
fn missing_weight_file_is_an_ingest_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bitsim(
        &[
            "quantize",
            "--network",
            "smoke",
            "--weights",
            "missing.bin",
            "--out",
            "q",
        ],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("[ingest]"), "{}", stderr(&out));
    // no partial outputs left behind
    assert!(!tmp.path().join("q").join("quantized.bin").exists());
}

#[test]
fn run_via_manifest_with_missing_weights_cleans_up() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = tmp.path().join("m.toml");
    std::fs::write(
        &manifest,
        "network = \"smoke\"\nmode = \"16b\"\nworkload = \"balanced\"\nout = \"r\"\n\n[weights]\nfile = \"does-not-exist.bin\"\n",
    )
    .unwrap();
    let out = bitsim(&["run", "--manifest", "m.toml"], tmp.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("[ingest]"), "{}", stderr(&out));
    assert!(!tmp.path().join("r").join("summary.json").exists());
    // nothing half-written anywhere in the out dir
    let leftovers = std::fs::read_dir(tmp.path().join("r"))
        .map(|d| d.count())
        .unwrap_or(0);
    assert_eq!(leftovers, 0);
}

#[test]
fn gen_weights_profiled_and_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    for _ in 0..2 {
        let out = bitsim(
            &[
                "gen-weights",
                "--network",
                "smoke",
                "--seed",
                "5",
                "--dist",
                "profiled:2",
                "--output",
                "w.bin",
            ],
            tmp.path(),
        );
        assert_eq!(out.status.code(), Some(0));
    }
    let bytes = std::fs::read(tmp.path().join("w.bin")).unwrap();
    assert_eq!(&bytes[0..4], b"NNWF");

    // every weight has exactly two nonzero bits
    let body = &bytes[16..];
    for half in body.chunks_exact(2) {
        let w = i16::from_le_bytes([half[0], half[1]]) as i32;
        assert_eq!(w.unsigned_abs().count_ones(), 2, "weight {w}");
    }

    // same seed, same bytes; different seed, different bytes
    let out = bitsim(
        &[
            "gen-weights",
            "--network",
            "smoke",
            "--seed",
            "6",
            "--dist",
            "profiled:2",
            "--output",
            "w6.bin",
        ],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    assert_ne!(bytes, std::fs::read(tmp.path().join("w6.bin")).unwrap());

    let out = bitsim(
        &["gen-weights", "--network", "smoke", "--dist", "gaussian"],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn staged_pipeline_matches_run() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();

    // gen-weights -> quantize -> encode -> simulate -> report
    assert!(bitsim(
        &[
            "gen-weights",
            "--network",
            "smoke",
            "--seed",
            "11",
            "--output",
            "w.bin"
        ],
        d
    )
    .status
    .success());
    assert!(bitsim(
        &[
            "quantize",
            "--network",
            "smoke",
            "--weights",
            "w.bin",
            "--out",
            "s"
        ],
        d
    )
    .status
    .success());
    assert!(bitsim(
        &[
            "encode",
            "--network",
            "smoke",
            "--weights",
            "s/quantized.bin",
            "--out",
            "s"
        ],
        d
    )
    .status
    .success());
    assert!(bitsim(
        &[
            "simulate",
            "--network",
            "smoke",
            "--encoded",
            "s/encoded.bin",
            "--seed",
            "11",
            "--out",
            "s"
        ],
        d
    )
    .status
    .success());
    assert!(bitsim(&["report", "--run", "s", "--out", "s"], d)
        .status
        .success());

    // one-shot run with the same seed produces the same summary
    assert!(bitsim(
        &["run", "--network", "smoke", "--seed", "11", "--out", "r"],
        d
    )
    .status
    .success());
    let staged = std::fs::read(d.join("s/summary.json")).unwrap();
    let oneshot = std::fs::read(d.join("r/summary.json")).unwrap();
    assert_eq!(staged, oneshot);
    assert_eq!(
        std::fs::read(d.join("s/energy.json")).unwrap(),
        std::fs::read(d.join("r/energy.json")).unwrap()
    );
}

#[test]
fn quantize_stats_reflect_cap() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    assert!(bitsim(
        &[
            "gen-weights",
            "--network",
            "smoke",
            "--seed",
            "3",
            "--output",
            "w.bin"
        ],
        d
    )
    .status
    .success());
    let out = bitsim(
        &[
            "quantize",
            "--network",
            "smoke",
            "--weights",
            "w.bin",
            "--n-max",
            "2",
            "--out",
            "q",
        ],
        d,
    );
    assert!(out.status.success());
    let csv = std::fs::read_to_string(d.join("q/quant_stats.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "layer,n_max,mse,max_abs_error,modified_fraction"
    );
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields[1], "2");
    }

    // re-quantizing the quantized file at the same cap is the identity
    let out = bitsim(
        &[
            "quantize",
            "--network",
            "smoke",
            "--weights",
            "q/quantized.bin",
            "--n-max",
            "2",
            "--out",
            "q2",
        ],
        d,
    );
    assert!(out.status.success());
    let csv = std::fs::read_to_string(d.join("q2/quant_stats.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields[2], "0.000000", "mse must be zero: {line}");
        assert_eq!(fields[4], "0.000000", "nothing modified: {line}");
    }
}

#[test]
fn simulate_rejects_mismatched_encoded_file() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    assert!(bitsim(
        &[
            "gen-weights",
            "--network",
            "smoke",
            "--seed",
            "1",
            "--output",
            "w.bin"
        ],
        d
    )
    .status
    .success());
    assert!(bitsim(
        &[
            "encode",
            "--network",
            "smoke",
            "--weights",
            "w.bin",
            "--out",
            "e"
        ],
        d
    )
    .status
    .success());
    // 8b simulation over a 16b encoded file must fail as a runtime error
    let out = bitsim(
        &[
            "simulate",
            "--network",
            "smoke",
            "--mode",
            "8b",
            "--encoded",
            "e/encoded.bin",
            "--out",
            "s",
        ],
        d,
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(!d.join("s/summary.json").exists());
}

#[test]
fn report_compares_two_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    for (workload, dir) in [("balanced", "a"), ("dense", "b")] {
        assert!(bitsim(
            &[
                "run",
                "--network",
                "smoke",
                "--seed",
                "2",
                "--workload",
                workload,
                "--out",
                dir
            ],
            d
        )
        .status
        .success());
    }
    let out = bitsim(
        &["report", "--run", "a", "--baseline", "b", "--out", "cmp"],
        d,
    );
    assert!(out.status.success());
    let energy: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("cmp/energy.json")).unwrap()).unwrap();
    let speedup = energy["ratios"]["speedup"].as_f64().unwrap();
    assert!(speedup > 1.0, "balanced should beat dense: {speedup}");
}
