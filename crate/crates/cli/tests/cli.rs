use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mstpart::synthetic::two_cliques;
use mstpart::write_hmetis;
use tempfile::TempDir;

fn mstpart(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mstpart")).args(args).output().expect("spawn mstpart")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn metric<'a>(text: &'a str, key: &str) -> &'a str {
    text.lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
        .unwrap_or_else(|| panic!("missing {key} in\n{text}"))
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

// Six vertices, four nets.
const SIX: &str = "4 6\n1 2 3\n3 4\n4 5 6\n1 6\n";

#[test]
fn evaluate_hand_computed_instance() {
    let dir = TempDir::new().unwrap();
    let hgr = write(&dir, "six.hgr", SIX);
    // Blocks {1,2,3} and {4,5,6}: nets {3,4} and {1,6} are cut once each.
    let part = write(&dir, "six.part", "0\n0\n0\n1\n1\n1\n");
    let out = mstpart(&["evaluate", "--input", s(&hgr), "--partition", s(&part), "--k", "2", "--epsilon", "0.04"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert_eq!(metric(&text, "cutsize"), "2");
    assert_eq!(metric(&text, "block_weights"), "3,3");
    assert_eq!(metric(&text, "caps"), "3,3");
    assert_eq!(metric(&text, "feasible"), "true");
    assert_eq!(metric(&text, "connectivity_histogram"), "1:2,2:2");
}

#[test]
fn evaluate_single_block_file() {
    let dir = TempDir::new().unwrap();
    let hgr = write(&dir, "six.hgr", SIX);
    let part = write(&dir, "zero.part", "0\n0\n0\n0\n0\n0\n");
    let out = mstpart(&["evaluate", "--input", s(&hgr), "--partition", s(&part), "--k", "2", "--epsilon", "0.04"]);
    assert_eq!(out.status.code(), Some(2));
    let text = stdout(&out);
    assert_eq!(metric(&text, "cutsize"), "0");
    assert_eq!(metric(&text, "feasible"), "false");
}

#[test]
fn bad_partition_files_are_errors() {
    let dir = TempDir::new().unwrap();
    let hgr = write(&dir, "six.hgr", SIX);
    let high = write(&dir, "high.part", "0\n0\n0\n2\n1\n1\n");
    let short = write(&dir, "short.part", "0\n1\n");
    for part in [&high, &short] {
        let out = mstpart(&["evaluate", "--input", s(&hgr), "--partition", s(part), "--k", "2", "--epsilon", "0.04"]);
        assert_eq!(out.status.code(), Some(1));
        assert!(!out.stderr.is_empty());
    }
    let missing = dir.path().join("missing.hgr");
    let out = mstpart(&["partition", "--input", s(&missing), "--k", "2", "--output", s(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn epsilon_and_ubfactor_conflict() {
    let out = mstpart(&["evaluate", "--input", "a", "--partition", "b", "--k", "2", "--epsilon", "0.1", "--ubfactor", "5"]);
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn one_block_puts_everything_in_block_zero() {
    let dir = TempDir::new().unwrap();
    let hgr = write(&dir, "six.hgr", SIX);
    let out_part = dir.path().join("k1.part");
    let out = mstpart(&["partition", "--input", s(&hgr), "--k", "1", "--output", s(&out_part)]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(fs::read_to_string(&out_part).unwrap(), "0\n".repeat(6));
    assert_eq!(metric(&stdout(&out), "cutsize"), "0");
}

#[test]
fn two_cliques_cut_once_and_revalidate() {
    let dir = TempDir::new().unwrap();
    let hgr = write(&dir, "cliques.hgr", &write_hmetis(&two_cliques(8)));
    let part = dir.path().join("cliques.part");
    let metrics = dir.path().join("cliques.metrics");
    let out = mstpart(&[
        "partition", "--input", s(&hgr), "--k", "2", "--epsilon", "0.04", "--output", s(&part), "--metrics", s(&metrics),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert_eq!(metric(&text, "cutsize"), "1");
    assert_eq!(fs::read_to_string(&metrics).unwrap(), text);
    assert!(metric(&text, "time_total_ms").parse::<f64>().is_ok());

    let eval = mstpart(&["evaluate", "--input", s(&hgr), "--partition", s(&part), "--k", "2", "--epsilon", "0.04"]);
    assert_eq!(metric(&stdout(&eval), "cutsize"), "1");
}

#[test]
fn improve_repairs_infeasible_input() {
    let dir = TempDir::new().unwrap();
    let hgr = write(&dir, "cliques.hgr", &write_hmetis(&two_cliques(5)));
    let part = write(&dir, "lopsided.part", "0\n0\n0\n0\n0\n0\n0\n1\n1\n1\n");
    let output = dir.path().join("out.part");
    let out = mstpart(&[
        "improve", "--input", s(&hgr), "--partition", s(&part), "--k", "2", "--epsilon", "0.04", "--output", s(&output),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert_eq!(metric(&text, "input_feasible"), "false");
    assert_eq!(metric(&text, "repair"), "succeeded");
    assert_eq!(metric(&text, "feasible"), "true");
    assert_eq!(metric(&text, "cutsize"), "1");
}

#[test]
fn improve_keeps_an_optimal_partition() {
    let dir = TempDir::new().unwrap();
    let hgr = write(&dir, "cliques.hgr", &write_hmetis(&two_cliques(5)));
    let part = write(&dir, "opt.part", "0\n0\n0\n0\n0\n1\n1\n1\n1\n1\n");
    let output = dir.path().join("out.part");
    let out = mstpart(&[
        "improve", "--input", s(&hgr), "--partition", s(&part), "--k", "2", "--epsilon", "0.04", "--output", s(&output),
    ]);
    let text = stdout(&out);
    assert_eq!(metric(&text, "repair"), "not_needed");
    assert_eq!(metric(&text, "ratio"), "1.000000");
    assert_eq!(fs::read_to_string(&output).unwrap(), fs::read_to_string(&part).unwrap());
}

fn sweep(dir: &TempDir, axis: &str, values: Option<&str>) -> Vec<String> {
    let hgr = write(dir, "cliques.hgr", &write_hmetis(&two_cliques(6)));
    let mut args = vec!["sweep", "--axis", axis, "--input", s(&hgr), "--k", "2", "--deterministic"];
    if let Some(v) = values {
        args.extend(["--values", v]);
    }
    let out = mstpart(&args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    stdout(&out).lines().map(str::to_string).collect()
}

#[test]
fn sweep_rows_and_labels() {
    let dir = TempDir::new().unwrap();
    let rows = sweep(&dir, "p", None);
    assert_eq!(rows[0], "axis,value,cutsize,feasible,wall_ms");
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("p,\"sqrt(n/2)\","));
    assert!(rows[2].starts_with("p,\"n/(5k)\","));

    let rows = sweep(&dir, "num-init", Some("2,10,20"));
    assert_eq!(rows.len(), 4);

    let rows = sweep(&dir, "lambda1", Some("0.5"));
    assert_eq!(rows.len(), 2);
    let cut: Vec<&str> = rows[1].split(',').collect();
    assert_eq!(cut[2], "1");
    assert_eq!(cut[3], "true");
}

#[test]
fn sweep_rejects_unknown_axis() {
    let dir = TempDir::new().unwrap();
    let hgr = write(&dir, "six.hgr", SIX);
    let out = mstpart(&["sweep", "--axis", "gamma", "--input", s(&hgr), "--k", "2"]);
    assert_ne!(out.status.code(), Some(0));
}
