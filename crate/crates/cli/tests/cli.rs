use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use lh_core::fields::{FieldSpec, USpec};
use lh_core::grid::{random_bandlimited, ConeSpec};
use lh_core::ops::Operator;
use lh_core::GridFunction2D;

fn lh(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lh"))
        .args(args)
        .current_dir(cwd)
        .env_remove("LH_THREADS")
        .output()
        .expect("spawn lh")
}

fn files_in(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    v.sort();
    v
}

fn carleson_config(dir: &Path) -> std::path::PathBuf {
    let spec = FieldSpec::one_variable(USpec::steps(vec![0.0, 0.5], vec![0.25, -0.25])).unwrap();
    let cfg = serde_json::json!({
        "experiment": "carleson", "spec": spec, "n": 32, "trials": 3, "seed": 5, "out": "results"
    });
    let path = dir.join("carleson.json");
    fs::write(&path, serde_json::to_string(&cfg).unwrap()).unwrap();
    path
}

#[test]
fn experiment_happy_path_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = carleson_config(dir.path());
    let out = lh(&["exp", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let res = dir.path().join("results");
    assert_eq!(files_in(&res), vec!["carleson.csv", "carleson_summary.json"]);
    let csv = fs::read_to_string(res.join("carleson.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("experiment,seed,n,p,l,in_norm,out_norm,ratio"));
    assert_eq!(lines.count(), 3);
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(res.join("carleson_summary.json")).unwrap()).unwrap();
    assert!(summary["max"].as_f64().unwrap().is_finite());

    // Rerun with a different thread count: identical bytes.
    let again = dir.path().join("again");
    let out = lh(&["exp", "carleson", "--config", cfg.to_str().unwrap(), "--out", again.to_str().unwrap(), "--threads", "1"], dir.path());
    assert!(out.status.success());
    assert_eq!(fs::read(again.join("carleson.csv")).unwrap(), csv.into_bytes());
}

#[test]
fn malformed_json_exits_2_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, "{\"experiment\": \"commutator\", \"n\": ").unwrap();
    let res = dir.path().join("res");
    let out = lh(&["exp", "--config", cfg.to_str().unwrap(), "--out", res.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(!res.exists());
    assert_eq!(files_in(dir.path()), vec!["bad.json"]);
}

#[test]
fn invalid_values_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let spec = FieldSpec::one_variable(USpec::constant(0.0)).unwrap();
    let cfg = serde_json::json!({ "experiment": "commutator", "spec": spec, "n": 100, "l_list": [1, 2, 3, 4], "seed": 1 });
    let path = dir.path().join("c.json");
    fs::write(&path, cfg.to_string()).unwrap();
    let out = lh(&["exp", "--config", path.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = lh(&["exp", "square", "--config", path.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2), "kind mismatch is a config error");
    let out = lh(&["frobnicate"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(files_in(dir.path()), vec!["c.json"]);
}

#[test]
fn dry_run_prints_plan_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = carleson_config(dir.path());
    let out = lh(&["exp", "--config", cfg.to_str().unwrap(), "--dry-run"], dir.path());
    assert!(out.status.success());
    assert!(!String::from_utf8_lossy(&out.stdout).is_empty());
    assert!(!dir.path().join("results").exists());
}

#[test]
fn op_apply_matches_in_process_call() {
    let dir = tempfile::tempdir().unwrap();
    let n = 64;
    let f = random_bandlimited(3, n, ConeSpec::default(), (0, 4)).unwrap();
    let input = dir.path().join("f.lhg2");
    fs::write(&input, f.to_lhg2_bytes()).unwrap();
    let out = lh(&["op", "--id", "Pk:4", "--in", "f.lhg2", "--out", "g.lhg2"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let g = GridFunction2D::from_lhg2_bytes(&fs::read(dir.path().join("g.lhg2")).unwrap()).unwrap();
    let spec = FieldSpec::one_variable(USpec::constant(0.0)).unwrap();
    let want = Operator::parse("Pk:4", spec, n).unwrap().apply(&f).unwrap();
    assert_eq!(g, want);

    let out = lh(&["op", "apply", "--id", "Pk:99", "--in", "f.lhg2", "--out", "h.lhg2"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("h.lhg2").exists());
}

#[test]
fn beta_table_has_documented_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("b.json");
    fs::write(&cfg, r#"{"values": [0, 0.25, 0.5, 0.25, 0, 0.25, 0.5, 0.75, 1], "j0_max": 2}"#).unwrap();
    let out = lh(&["beta", "table", "--config", "b.json"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("beta_table.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("I_left,I_len,j0,alpha,beta"));
    assert!(csv.lines().count() > 1);
}

#[test]
fn tiles_dump_and_check() {
    let dir = tempfile::tempdir().unwrap();
    let spec = FieldSpec::one_variable(USpec::steps(vec![0.0, 0.5], vec![0.25, -0.25])).unwrap();
    let cfg = serde_json::json!({
        "spec": spec, "n": 128,
        "tiles": {"l": 1, "k_list": [3], "omega_indices": [0, 1], "pos_window": [2, 2]}
    });
    fs::write(dir.path().join("t.json"), cfg.to_string()).unwrap();
    let out = lh(&["tiles", "dump", "--config", "t.json", "--seed", "4"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("tile_coefficients.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("k,l,i_omega,pos1,pos2,re,im"));
    assert_eq!(csv.lines().count(), 9);

    let out = lh(&["tiles", "check", "--config", "t.json"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut rdr = csv::Reader::from_path(dir.path().join("tile_check.csv")).unwrap();
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let norm: f64 = rec[5].parse().unwrap();
        let leak: f64 = rec[7].parse().unwrap();
        assert!((norm - 1.0).abs() < 1e-9);
        assert!(leak < 1e-12, "{rec:?}");
    }
}

#[test]
fn field_make_and_cover_verify() {
    let dir = tempfile::tempdir().unwrap();
    let spec = FieldSpec::sinusoidal(0.05, USpec::constant(0.1)).unwrap();
    fs::write(dir.path().join("f.json"), serde_json::json!({"spec": spec, "n": 32, "curves": [0.25]}).to_string()).unwrap();
    let out = lh(&["field", "make", "--config", "f.json", "--out", "fld"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(files_in(&dir.path().join("fld")), vec!["field.json", "field_grid.csv", "level_curves.csv"]);
    let out = lh(&["field", "check", "--config", "f.json", "--out", "chk"], dir.path());
    assert!(out.status.success());
    assert!(!dir.path().join("chk").exists());

    let sc = lh_core::covering::Scenario::random(11).unwrap();
    fs::write(dir.path().join("s.json"), serde_json::to_string(&sc).unwrap()).unwrap();
    let out = lh(&["cover", "verify", "--config", "s.json", "--n", "64"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("cover.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("lemma,seed,n,ratio,hypotheses_ok"));
    assert_eq!(csv.lines().count(), 4);
}
