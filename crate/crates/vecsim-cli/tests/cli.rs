//! End-to-end tests driving the `vecsim` binary: file round trips, exit
//! codes, verification output, and CSV stability.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn vecsim(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vecsim"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn gen_is_deterministic_and_validates() {
    let dir = tempfile::tempdir().unwrap();
    let out = vecsim(
        &[
            "gen", "--rows", "8", "--cols", "32", "--nm", "2:4", "--seed", "9", "--out", "a.mtxt",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let out = vecsim(
        &[
            "gen", "--rows", "8", "--cols", "32", "--nm", "2:4", "--seed", "9", "--out", "a2.mtxt",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0);
    let f1 = std::fs::read(dir.path().join("a.mtxt")).unwrap();
    let f2 = std::fs::read(dir.path().join("a2.mtxt")).unwrap();
    assert_eq!(f1, f2, "same seed must produce identical files");

    let out = vecsim(&["validate", "a.mtxt"], dir.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("ok: nm 8x32 2:4"));
}

#[test]
fn gen_rejects_bad_shape_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = vecsim(
        &[
            "gen", "--rows", "4", "--cols", "10", "--nm", "1:4", "--seed", "1", "--out", "x.mtxt",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("multiple"));
}

#[test]
fn validate_rejects_corrupt_file_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    // Duplicate occupied index within a block.
    std::fs::write(dir.path().join("bad.mtxt"), "nm 1 4 2 4\n7 3\n1 1\n").unwrap();
    let out = vecsim(&["validate", "bad.mtxt"], dir.path());
    assert_eq!(code(&out), 2);
    // Missing file is an I/O error.
    let out = vecsim(&["validate", "missing.mtxt"], dir.path());
    assert_eq!(code(&out), 3);
}

#[test]
fn prune_then_encode_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    vecsim(
        &[
            "gen", "--rows", "6", "--cols", "16", "--seed", "3", "--out", "d.mtxt",
        ],
        dir.path(),
    );
    let out = vecsim(
        &[
            "prune", "--input", "d.mtxt", "--nm", "2:4", "--encode", "--out", "s.mtxt",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let out = vecsim(&["validate", "s.mtxt"], dir.path());
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("2:4"));
}

fn gen_pair(dir: &Path, rows: usize, cols: usize, b_cols: usize, nm: &str) {
    let out = vecsim(
        &[
            "gen",
            "--rows",
            &rows.to_string(),
            "--cols",
            &cols.to_string(),
            "--nm",
            nm,
            "--seed",
            "5",
            "--out",
            "a.mtxt",
        ],
        dir,
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let out = vecsim(
        &[
            "gen",
            "--rows",
            &cols.to_string(),
            "--cols",
            &b_cols.to_string(),
            "--seed",
            "6",
            "--out",
            "b.mtxt",
        ],
        dir,
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}

#[test]
fn run_verifies_all_kernels() {
    let dir = tempfile::tempdir().unwrap();
    gen_pair(dir.path(), 9, 64, 40, "1:4");
    for kernel in ["spmm", "indexmac"] {
        let out = vecsim(
            &["run", "--a", "a.mtxt", "--b", "b.mtxt", "--kernel", kernel],
            dir.path(),
        );
        assert_eq!(code(&out), 0, "{kernel}: {}", stderr(&out));
        assert!(stdout(&out).contains("verification: PASS"), "{kernel}");
    }
    // indexmac reports its baseline comparison.
    let out = vecsim(
        &[
            "run", "--a", "a.mtxt", "--b", "b.mtxt", "--kernel", "indexmac",
        ],
        dir.path(),
    );
    let text = stdout(&out);
    assert!(text.contains("speedup vs spmm baseline"));
    assert!(text.contains("B-region: 0 indirect"));

    // Dense kernel takes a dense A; reuse B against itself via a fresh gen.
    vecsim(
        &[
            "gen", "--rows", "12", "--cols", "64", "--seed", "8", "--out", "ad.mtxt",
        ],
        dir.path(),
    );
    let out = vecsim(
        &[
            "run", "--a", "ad.mtxt", "--b", "b.mtxt", "--kernel", "dense",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("verification: PASS"));
}

#[test]
fn run_prunes_dense_operand_on_the_fly() {
    let dir = tempfile::tempdir().unwrap();
    vecsim(
        &[
            "gen", "--rows", "8", "--cols", "32", "--seed", "2", "--out", "a.mtxt",
        ],
        dir.path(),
    );
    vecsim(
        &[
            "gen", "--rows", "32", "--cols", "24", "--seed", "3", "--out", "b.mtxt",
        ],
        dir.path(),
    );
    let out = vecsim(
        &[
            "run", "--a", "a.mtxt", "--b", "b.mtxt", "--kernel", "indexmac", "--nm", "2:4",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    // Without --nm a dense A is a format error for sparse kernels.
    let out = vecsim(
        &[
            "run", "--a", "a.mtxt", "--b", "b.mtxt", "--kernel", "indexmac",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 2);
}

#[test]
fn run_honors_engine_geometry_from_config() {
    let dir = tempfile::tempdir().unwrap();
    gen_pair(dir.path(), 6, 32, 20, "2:4");
    std::fs::write(
        dir.path().join("cfg.txt"),
        "vlen = 256\nL = 8\nvload_base = 12\n",
    )
    .unwrap();
    let out = vecsim(
        &[
            "run", "--a", "a.mtxt", "--b", "b.mtxt", "--kernel", "indexmac", "--config", "cfg.txt",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("verification: PASS"));
    // Unsupported element width is a constraint error.
    std::fs::write(dir.path().join("cfg.txt"), "sew = 16\n").unwrap();
    let out = vecsim(
        &[
            "run", "--a", "a.mtxt", "--b", "b.mtxt", "--kernel", "indexmac", "--config", "cfg.txt",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 2);
}

#[test]
fn run_rejects_register_budget_violation() {
    let dir = tempfile::tempdir().unwrap();
    gen_pair(dir.path(), 8, 64, 16, "2:4");
    std::fs::write(dir.path().join("cfg.txt"), "L = 24\n").unwrap();
    let out = vecsim(
        &[
            "run", "--a", "a.mtxt", "--b", "b.mtxt", "--kernel", "indexmac", "--config", "cfg.txt",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("register budget"), "{}", stderr(&out));
}

#[test]
fn run_dumps_parseable_program() {
    let dir = tempfile::tempdir().unwrap();
    gen_pair(dir.path(), 5, 16, 16, "1:4");
    let out = vecsim(
        &[
            "run",
            "--a",
            "a.mtxt",
            "--b",
            "b.mtxt",
            "--kernel",
            "indexmac",
            "--dump-program",
            "prog.txt",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = std::fs::read_to_string(dir.path().join("prog.txt")).unwrap();
    assert!(text.contains("vindexmac.vx"));
    let program = vecsim::isa::Program::parse(&text).unwrap();
    assert!(!program.is_empty());
    assert_eq!(program.to_text(), text);
}

fn suite_path(dir: &Path) -> PathBuf {
    let p = dir.join("tiny.suite");
    std::fs::write(&p, "# tiny\nl1 8 32 20\nl2 16 64 24\n").unwrap();
    p
}

#[test]
fn bench_writes_stable_csv() {
    let dir = tempfile::tempdir().unwrap();
    let suite = suite_path(dir.path());
    let args = [
        "bench",
        "--suite",
        suite.to_str().unwrap(),
        "--csv",
        "out.csv",
    ];
    let out = vecsim(&args, dir.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("geomean speedup"));
    let csv1 = std::fs::read_to_string(dir.path().join("out.csv")).unwrap();
    let out = vecsim(&args, dir.path());
    assert_eq!(code(&out), 0);
    let csv2 = std::fs::read_to_string(dir.path().join("out.csv")).unwrap();
    assert_eq!(csv1, csv2, "CSV must be byte-stable under re-runs");

    let mut lines = csv1.lines();
    assert_eq!(
        lines.next().unwrap(),
        "layer,sparsity,kernel,vloads,vstores,total_mem_ops,instructions,cycles,speedup,mem_reduction"
    );
    // 2 layers x 2 sparsities x 2 kernels + 2 aggregate rows.
    assert_eq!(csv1.lines().count(), 1 + 8 + 2);
    assert!(csv1
        .lines()
        .last()
        .unwrap()
        .starts_with("aggregate,2:4,indexmac"));
}

#[test]
fn bench_reports_failed_layers_and_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let suite = dir.path().join("mixed.suite");
    // 30 columns is not a multiple of 4; that layer fails, the other runs.
    std::fs::write(&suite, "bad 8 30 16\ngood 8 32 16\n").unwrap();
    let out = vecsim(
        &[
            "bench",
            "--suite",
            suite.to_str().unwrap(),
            "--sparsity",
            "1:4",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("layer bad"));
    assert!(stdout(&out).contains("good,1:4,indexmac"));
}

#[test]
fn bench_single_sparsity_subset() {
    let dir = tempfile::tempdir().unwrap();
    let suite = suite_path(dir.path());
    let out = vecsim(
        &[
            "bench",
            "--suite",
            suite.to_str().unwrap(),
            "--sparsity",
            "1:4",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains(",1:4,"));
    assert!(!text.contains(",2:4,"));
}
