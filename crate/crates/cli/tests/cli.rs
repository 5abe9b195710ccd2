//! End-to-end runs of the scenario binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_semigroup-lab"))
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn run(config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin().arg("run").arg(config).arg("--out").arg(out).arg("--quiet").args(extra).output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("scenario.toml");
    fs::write(&p, text).unwrap();
    p
}

/// Parses report.csv into a header and rows of optional values.
fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<Option<f64>>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(|c| if c.is_empty() { None } else { Some(c.parse().unwrap()) }).collect())
        .collect();
    (header, rows)
}

fn column(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap()
}

#[test]
fn scalar_closed_loop_is_exp_minus_t() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&scenario("scalar.toml"), dir.path(), &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(&dir.path().join("report.csv"));
    assert_eq!(rows.len(), 2);
    let (t, s) = (column(&header, "t"), column(&header, "s_norm"));
    for row in &rows {
        let t = row[t].unwrap();
        assert!((row[s].unwrap() - (-t).exp()).abs() < 1e-6, "t={t}");
    }
    let diag: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("diagnostics.json")).unwrap()).unwrap();
    assert_eq!(diag["scenario"], "triple");
}

#[test]
fn zero_observation_leaves_semigroup_unchanged() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&scenario("zero_observation.toml"), dir.path(), &[]);
    assert!(out.status.success());
    let (header, rows) = read_csv(&dir.path().join("report.csv"));
    let d = column(&header, "s_minus_t");
    assert!(rows.iter().all(|r| r[d] == Some(0.0)));
}

#[test]
fn radius_above_one_exits_with_hypothesis_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&scenario("radius_above_one.toml"), dir.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("feedback-radius-below-one"), "{err}");
    assert!(!dir.path().join("report.csv").exists());
}

#[test]
fn malformed_configs_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        "scenario = \"triple\"\n",
        "scenario = \"no_such_thing\"\n",
        "scenario = \"triple\"\nbogus = 1\n",
        "scenario = \"triple\"\n[triple]\na = [[-1.0]]\nb = [[1.0]]\nc = [[0.5]]\n[time]\nt_end = 1.0\nsteps = 4\n",
        "scenario = \"triple\"\n[triple]\na = [[-1.0, 0.0]]\nb = [[1.0]]\nc = [[0.5]]\n[time]\nt_end = 1.0\nsteps = 32\n",
        "scenario = \"conv_c0\"\n[example.params]\nalpha = 1.5\n",
    ];
    for text in cases {
        let cfg = write_config(dir.path(), text);
        let out = run(&cfg, &dir.path().join("out"), &[]);
        assert_eq!(out.status.code(), Some(1), "{text}\n{}", String::from_utf8_lossy(&out.stderr));
    }
    let out = run(&dir.path().join("missing.toml"), dir.path(), &[]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn same_seed_gives_identical_bytes() {
    for name in ["random_triples_al.toml", "riesz_thorin.toml"] {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        assert!(run(&scenario(name), a.path(), &[]).status.success());
        assert!(run(&scenario(name), b.path(), &[]).status.success());
        for file in ["report.csv", "diagnostics.json"] {
            assert_eq!(fs::read(a.path().join(file)).unwrap(), fs::read(b.path().join(file)).unwrap(), "{name}/{file}");
        }
    }
}

#[test]
fn seed_flag_changes_random_output() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = scenario("random_triples_al.toml");
    assert!(run(&cfg, a.path(), &[]).status.success());
    assert!(run(&cfg, b.path(), &["--seed", "5"]).status.success());
    assert_ne!(fs::read(a.path().join("report.csv")).unwrap(), fs::read(b.path().join("report.csv")).unwrap());
}

#[test]
fn refine_writes_convergence_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "scenario = \"rank_one_lp\"\n[example]\ngrid_n = 40\nhorizon = 1.0\nlambda_sweep = [1.0]\n",
    );
    let out = run(&cfg, &dir.path().join("out"), &["--refine", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("out/convergence.csv")).unwrap();
    assert!(text.lines().count() >= 3);
}

#[test]
fn report_rows_are_sorted_by_time() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run(&scenario("benchmark_2x2.toml"), dir.path(), &[]).status.success());
    let (header, rows) = read_csv(&dir.path().join("report.csv"));
    let t = column(&header, "t");
    let times: Vec<f64> = rows.iter().map(|r| r[t].unwrap()).collect();
    assert_eq!(times, vec![0.25, 0.5, 1.0, 2.0]);
    let diag: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("diagnostics.json")).unwrap()).unwrap();
    for check in ["laplace", "resolvent", "norm_bounds"] {
        assert!(diag["checks"].get(check).is_some(), "{check}");
    }
}
