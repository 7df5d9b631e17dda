use std::path::PathBuf;
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn ffcn(args: &[&str]) -> Output {
    ffcn_env(args, &[])
}

fn ffcn_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ffcn"));
    cmd.current_dir(data(""));
    for k in ["FFCN_FORMAT", "FFCN_EXACT", "FFCN_JET", "FFCN_MU", "FFCN_TOL"] {
        cmd.env_remove(k);
    }
    cmd.envs(env.iter().copied()).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn show_prints_the_laplacian() {
    let o = ffcn(&["net", "show", "fig4.spec"]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert!(s.contains("cells: 5"));
    assert!(s.contains("D = diag(0, 2, 2, 3, 2)"));
}

#[test]
fn coalesce_writes_a_loadable_network() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.nw");
    let o = ffcn(&["net", "coalesce", "fig1_n1.nw", "2", "fig1_n2.nw", "1", "-o", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("D = diag(2, 4, 2)"));
    let net = ffcn::network::load_network(&out).unwrap();
    assert_eq!(net.n_cells(), 3);
    let again = ffcn(&["net", "show", out.to_str().unwrap()]);
    assert_eq!(stdout(&again), stdout(&o));
}

#[test]
fn malformed_input_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.nw");
    std::fs::write(&bad, r#"{"n_cells": 2, "edges": [[1, 2, "one"]]}"#).unwrap();
    assert_eq!(ffcn(&["net", "show", bad.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(ffcn(&["spectrum"]).status.code(), Some(2));
    assert_eq!(ffcn(&["classify", "fig4.spec", "--mu", "x/y"]).status.code(), Some(2));
}

#[test]
fn union_check() {
    assert_eq!(ffcn(&["spectrum", "fig1.spec", "--check-union"]).status.code(), Some(3));
    let o = ffcn(&["spectrum", "fig2.spec", "--check-union"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("multiplicity identities: hold"));
}

#[test]
fn classify_json() {
    let o = ffcn(&["--format", "json-like", "classify", "fig4.spec", "--jet", "fig4.jet"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["mu"], "1");
    assert_eq!(v["lc_in_image"], false);
    assert_eq!(v["h"]["h"], serde_json::json!(["3/2", "3/2"]));
}

#[test]
fn format_from_the_environment() {
    let o = ffcn_env(&["classify", "fig7.spec", "--jet", "fig7.jet"], &[("FFCN_FORMAT", "json-like")]);
    assert!(o.status.success());
    assert!(serde_json::from_str::<serde_json::Value>(&stdout(&o)).is_ok());
}

#[test]
fn missing_bifurcation_is_a_precondition_failure() {
    let o = ffcn(&["classify", "fig4.spec", "--mu", "7"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("precondition"));
}

#[test]
fn verify_agrees_on_the_linear_example() {
    let o = ffcn(&["verify", "fig7.spec", "--jet", "fig7.jet"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("overall: agree"));
}
