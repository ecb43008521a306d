//! Exercises the binary end to end: subcommands, file outputs, exit codes.

use std::path::Path;
use std::process::{Command, Output};

fn blocksvd(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blocksvd"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn generate_decompose_baseline_compare() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();

    let gen = blocksvd(
        &["gen-synthetic", "300", "80", "--density", "0.02", "--seed", "5", "--out", "m.csv"],
        dir,
    );
    assert_eq!(code(&gen), 0, "{}", String::from_utf8_lossy(&gen.stderr));
    assert!(dir.join("m.csv").exists());

    let dec = blocksvd(
        &["decompose", "--input", "m.csv", "--out-dir", "dec"],
        dir,
    );
    assert_eq!(code(&dec), 0, "{}", String::from_utf8_lossy(&dec.stderr));
    for file in [
        "singular_values.txt",
        "u_slice.csv",
        "v_slice.csv",
        "iterations.tsv",
        "partition.tsv",
        "provenance.json",
    ] {
        assert!(dir.join("dec").join(file).exists(), "missing {file}");
    }

    let base = blocksvd(
        &["baseline", "--input", "m.csv", "--out-dir", "base"],
        dir,
    );
    assert_eq!(code(&base), 0);

    let cmp = blocksvd(&["compare", "dec", "base", "--rank", "5"], dir);
    assert_eq!(code(&cmp), 0);
    let table = String::from_utf8_lossy(&cmp.stdout);
    assert!(table.starts_with("INDEX\tA\tB\tABS DIFF\tREL DIFF"));
    assert!(table.contains("max rel diff"));
}

#[test]
fn stats_prints_partition_table() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    blocksvd(
        &["gen-synthetic", "200", "50", "--density", "0.03", "--seed", "1", "--out", "m.csv"],
        dir,
    );
    let out = blocksvd(&["stats", "--input", "m.csv"], dir);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("BLOCK\tROWS\tCOLUMNS\tDENSITY\tSQUARE NORM\tNORM PERCENTAGE"));
    assert!(text.contains("whole"));
    assert!(text.contains("22"));
}

#[test]
fn full_flag_writes_complete_spectrum() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    blocksvd(
        &["gen-synthetic", "120", "40", "--density", "0.05", "--seed", "2", "--out", "m.csv"],
        dir,
    );
    let out = blocksvd(
        &["decompose", "--input", "m.csv", "--out-dir", "dec", "--full"],
        dir,
    );
    assert_eq!(code(&out), 0);
    assert!(dir.join("dec/full_spectrum.txt").exists());
}

#[test]
fn io_and_format_errors_exit_three() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let missing = blocksvd(&["decompose", "--input", "nope.csv"], dir);
    assert_eq!(code(&missing), 3);

    std::fs::write(dir.join("bad.csv"), "0,0,1\ngarbage line\n").unwrap();
    let bad = blocksvd(&["decompose", "--input", "bad.csv"], dir);
    assert_eq!(code(&bad), 3);
    assert!(String::from_utf8_lossy(&bad.stderr).contains("line 2"));

    let cmp = blocksvd(&["compare", "a", "b", "--rank", "3"], dir);
    assert_eq!(code(&cmp), 3);
}

#[test]
fn budget_violation_exits_four() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    blocksvd(
        &["gen-synthetic", "300", "80", "--density", "0.02", "--seed", "3", "--out", "m.csv"],
        dir,
    );
    let out = blocksvd(
        &["decompose", "--input", "m.csv", "--budget-bytes", "4096"],
        dir,
    );
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn non_convergence_exits_two_with_partial_output() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    blocksvd(
        &["gen-synthetic", "300", "80", "--density", "0.02", "--seed", "4", "--out", "m.csv"],
        dir,
    );
    let out = blocksvd(
        &[
            "decompose",
            "--input",
            "m.csv",
            "--out-dir",
            "dec",
            "--max-iters",
            "1",
            "--ratio-tol",
            "1e-12",
        ],
        dir,
    );
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
    // Partial results and diagnostics are still written.
    assert!(dir.join("dec/singular_values.txt").exists());
    let provenance = std::fs::read_to_string(dir.join("dec/provenance.json")).unwrap();
    assert!(provenance.contains("\"converged\": false"));
}

#[test]
fn one_based_indexing_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(dir.join("one.csv"), "%%dims 3 2\n1,1,3\n2,2,4\n3,1,1\n").unwrap();
    let out = blocksvd(
        &["decompose", "--input", "one.csv", "--one-based", "--out-dir", "dec"],
        dir,
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let zero_based = blocksvd(&["decompose", "--input", "one.csv", "--out-dir", "dec0"], dir);
    // Without the flag the 1-based indices overflow the declared dims.
    assert_eq!(code(&zero_based), 3);
}

#[test]
fn polar_route_is_selectable() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    blocksvd(
        &["gen-synthetic", "200", "60", "--density", "0.03", "--seed", "6", "--out", "m.csv"],
        dir,
    );
    let out = blocksvd(
        &["decompose", "--input", "m.csv", "--route", "polar", "--out-dir", "dec"],
        dir,
    );
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stderr).contains("polar route"));

    let unknown = blocksvd(
        &["decompose", "--input", "m.csv", "--route", "mystery"],
        dir,
    );
    assert_eq!(code(&unknown), 3);
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("known routes"));
}
