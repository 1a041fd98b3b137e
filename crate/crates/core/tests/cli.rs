use std::path::Path;
use std::process::{Command, Output};

fn gmech(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gmech"))
        .args(args)
        .current_dir(dir)
        .env("GMECH_THREADS", "2")
        .output()
        .unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn price_examples() {
    let dir = tempfile::tempdir().unwrap();
    let out = gmech(&["price", "--gen", "zero", "--payoff", "bm", "--steps", "4"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["y0"].as_f64().unwrap(), 0.0);

    let out = gmech(&["price", "--gen", "abs_z:0.1", "--payoff", "linbm:2", "--t", "0", "--T", "1"], dir.path());
    assert!((json(&out)["y0"].as_f64().unwrap() - 0.2).abs() < 1e-12);

    let out = gmech(
        &["price", "--gen", "bs:r=0.05,b=0.08,sigma=0.2", "--payoff", "call:100", "--s0", "100", "--T", "1", "--steps", "2000"],
        dir.path(),
    );
    assert!((json(&out)["y0"].as_f64().unwrap() - 10.4506).abs() < 0.05);

    let out = gmech(&["price", "--gen", "zero", "--payoff", "const:2", "--steps", "3", "--surface", "--format", "csv"], dir.path());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("step,node,value\n0,0,2"));
    assert_eq!(text.lines().count(), 1 + 10);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(gmech(&["price", "--gen", "nope", "--payoff", "bm"], dir.path()).status.code(), Some(2));
    assert_eq!(gmech(&["price", "--payoff", "bm"], dir.path()).status.code(), Some(2));
    assert_eq!(gmech(&["price", "--gen", "gmu:50", "--payoff", "bm", "--steps", "4"], dir.path()).status.code(), Some(1));
    assert_eq!(gmech(&["audit", "--chain", "missing.csv", "--mu", "0.5"], dir.path()).status.code(), Some(3));
    std::fs::write(dir.path().join("bad.csv"), "a,b\n1,2\n").unwrap();
    assert_eq!(gmech(&["audit", "--chain", "bad.csv", "--mu", "0.5"], dir.path()).status.code(), Some(3));
}

#[test]
fn axioms_report_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["axioms", "--gen", "gmu:0.5", "--samples", "200", "--seed", "7"];
    let a = gmech(&args, dir.path());
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(json(&a)["all_pass"], serde_json::Value::Bool(true));
    let b = gmech(&args, dir.path());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn recover_with_points_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("grid.json"), "[[1.0, 1.0], [0.0, 0.0], [-1.0, 2.0]]").unwrap();
    let out = gmech(
        &["recover", "--gen-hidden", "abs_z:0.3", "--level", "8", "--points", "grid.json"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let rows = v["table"].as_array().unwrap();
    assert_eq!(rows.len(), 256 * 3);
    for r in rows.iter().filter(|r| r["y"] == 1.0 && r["z"] == 1.0) {
        assert!((r["g"].as_f64().unwrap() - 0.3).abs() < 1e-3);
    }
}

#[test]
fn probe_and_decompose() {
    let dir = tempfile::tempdir().unwrap();
    let out = gmech(&["probe", "--gen", "abs_z:0.1", "--zbar", "2"], dir.path());
    assert!((json(&out)["value"].as_f64().unwrap() - 0.2).abs() < 1e-12);
    let out = gmech(
        &["probe", "--gen", "zero", "--kind", "infinitesimal", "--drift", "0.3", "--p", "2", "--y", "1"],
        dir.path(),
    );
    assert!((json(&out)["value"].as_f64().unwrap() - 0.6).abs() < 1e-9);

    let out = gmech(&["decompose", "--gen", "gmu:0.5", "--rate", "0.1"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert!(json(&out)["planted_error"].as_f64().unwrap() <= 1e-10);
}

#[test]
fn synth_then_audit() {
    let dir = tempfile::tempdir().unwrap();
    let out = gmech(&["synth", "--strikes", "80:120:6", "--out", "synth.csv"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let args = ["audit", "--chain", "synth.csv", "--mu", "0.5", "--steps", "200", "--out", "report.json"];
    let out = gmech(&args, dir.path());
    assert_eq!(out.status.code(), Some(0));
    let first = std::fs::read(dir.path().join("report.json")).unwrap();
    let v: serde_json::Value = serde_json::from_slice(&first).unwrap();
    assert_eq!(v["violations"], 0);
    assert_eq!(v["tested"], 4 * 6 * 5);
    gmech(&args, dir.path());
    assert_eq!(first, std::fs::read(dir.path().join("report.json")).unwrap());

    let out = gmech(&["audit", "--chain", "synth.csv", "--mu", "0.5", "--steps", "100", "--format", "csv"], dir.path());
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("kind,family"));
}
