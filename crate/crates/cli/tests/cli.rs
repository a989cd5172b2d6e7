use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn oplink(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oplink"))
        .args(args)
        .output()
        .expect("spawn oplink")
}

fn smoke_plan() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/smoke.toml")
}

#[test]
fn selftest_passes() {
    let out = oplink(&["selftest", "--seed", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().count() >= 9);
    assert!(!text.contains("FAIL"));
}

#[test]
fn simulate_is_reproducible() {
    let plan = smoke_plan();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for (d, workers) in dirs.iter().zip(["1", "2"]) {
        let out = oplink(&[
            "simulate",
            "--config",
            plan.to_str().unwrap(),
            "--seed",
            "11",
            "--workers",
            workers,
            "--out",
            d.path().to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let a = fs::read(dirs[0].path().join("ber.csv")).unwrap();
    let b = fs::read(dirs[1].path().join("ber.csv")).unwrap();
    assert_eq!(a, b);
    // header + 2 bases x 2 points x 2 iterations
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 9);
    assert_eq!(
        fs::read(dirs[0].path().join("manifest.json")).unwrap(),
        fs::read(dirs[1].path().join("manifest.json")).unwrap()
    );
}

#[test]
fn hardening_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("h.toml");
    fs::write(&cfg, "presets = [\"doubly-selective\"]\nmc_frames = 50\n").unwrap();
    let out_dir = dir.path().join("out");
    let out = oplink(&[
        "hardening",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = fs::read_to_string(out_dir.join("table.csv")).unwrap();
    let row = table.lines().nth(1).unwrap();
    assert!(row.starts_with("doubly-selective,"), "{row}");
    let analytic: f64 = row.split(',').nth(3).unwrap().parse().unwrap();
    assert!((analytic - 0.07).abs() < 0.02);
    assert!(out_dir.join("spectrum_doubly-selective.csv").exists());
}

#[test]
fn bad_input_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let missing = oplink(&["simulate", "--config", "/nonexistent/plan.toml"]);
    assert!(!missing.status.success());

    let empty = dir.path().join("empty.toml");
    fs::write(&empty, "bases = []\nebn0_db = [1.0]\n[[channels]]\npreset = \"non-selective\"\n").unwrap();
    let out = oplink(&["simulate", "--config", empty.to_str().unwrap()]);
    assert!(!out.status.success());

    assert!(!oplink(&["simulate"]).status.success());
    assert!(!oplink(&["selftest", "--workers", "0"]).status.success());
    assert!(!oplink(&["bogus"]).status.success());
}
