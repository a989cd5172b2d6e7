use std::fs;

use oplink::sim::{run_sweep, write_sweep};
use oplink::SimulationPlan;

const SMALL: &str = r#"
seed = 5
ebn0_db = [3.0, 6.0]
bases = ["none", "dsft", "wht", "2ddps"]
estimation = ["perfect-csi", "iterative"]
n_iterations = 2

[frame]
n_subcarriers = 16
n_symbols = 12
cp_length = 4
n_pilot_symbols = 2

[[channels]]
preset = "doubly-selective"

[stopping]
min_bit_errors = 1000000
max_frames = 6
batch_size = 4
"#;

#[test]
fn identical_seeds_give_identical_files() {
    let plan = SimulationPlan::from_toml_str(SMALL).unwrap();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let out = run_sweep::<f64>(&plan, |_| {}).unwrap();
        write_sweep(d.path(), &plan, &out).unwrap();
    }
    for name in ["ber.csv", "manifest.json"] {
        let a = fs::read(dirs[0].path().join(name)).unwrap();
        let b = fs::read(dirs[1].path().join(name)).unwrap();
        assert_eq!(a, b, "{name}");
    }
    let csv = fs::read_to_string(dirs[0].path().join("ber.csv")).unwrap();
    // header + 4 bases x 2 modes x 2 points x 2 iterations
    assert_eq!(csv.lines().count(), 33);
    assert!(dirs[0].path().join("timing.json").exists());
}

#[test]
fn other_seed_changes_results() {
    let a = SimulationPlan::from_toml_str(SMALL).unwrap();
    let mut b = a.clone();
    b.seed = 6;
    let ra = run_sweep::<f64>(&a, |_| {}).unwrap().records;
    let rb = run_sweep::<f64>(&b, |_| {}).unwrap().records;
    assert_ne!(
        ra.iter().map(|r| r.bit_errors).collect::<Vec<_>>(),
        rb.iter().map(|r| r.bit_errors).collect::<Vec<_>>()
    );
    assert_ne!(a.config_hash(), b.config_hash());
}

#[test]
fn single_precision_tracks_double() {
    let plan = SimulationPlan::from_toml_str(SMALL).unwrap();
    let d = run_sweep::<f64>(&plan, |_| {}).unwrap().records;
    let s = run_sweep::<f32>(&plan, |_| {}).unwrap().records;
    assert_eq!(d.len(), s.len());
    let (ed, es): (u64, u64) = (d.iter().map(|r| r.bit_errors).sum(), s.iter().map(|r| r.bit_errors).sum());
    let diff = ed.abs_diff(es) as f64;
    assert!(diff <= 0.1 * ed.max(1) as f64 + 20.0, "f64 {ed} vs f32 {es}");
}

#[test]
fn noiseless_non_selective_link_is_error_free() {
    let plan = SimulationPlan::from_toml_str(
        r#"
seed = 1
ebn0_db = [60.0]
bases = ["none", "dsft"]
n_iterations = 3
[[channels]]
preset = "non-selective"
[stopping]
max_frames = 50
"#,
    )
    .unwrap();
    for r in run_sweep::<f64>(&plan, |_| {}).unwrap().records {
        assert_eq!(r.frames, 50);
        assert_eq!(r.bit_errors, 0, "{} it{}", r.basis, r.iteration);
    }
}

#[test]
fn invalid_plans_are_rejected() {
    let bad = [
        "ebn0_db = []\nbases = [\"dsft\"]\n[[channels]]\npreset = \"non-selective\"\n",
        "ebn0_db = [1.0]\nbases = []\n[[channels]]\npreset = \"non-selective\"\n",
        "ebn0_db = [1.0]\nbases = [\"dsft\"]\n",
        "ebn0_db = [1.0]\nbases = [\"dsft\"]\n[[channels]]\npreset = \"non-selective\"\n[stopping]\nmax_frames = 0\n",
        "ebn0_db = [1.0]\nbases = [\"fourier\"]\n[[channels]]\npreset = \"non-selective\"\n",
    ];
    for text in bad {
        assert!(SimulationPlan::from_toml_str(text).is_err(), "{text}");
    }
}

#[test]
fn dense_and_reduced_rank_estimators_agree_at_full_rank() {
    let base = SMALL.replace("[\"none\", \"dsft\", \"wht\", \"2ddps\"]", "[\"dsft\"]");
    let dense = SimulationPlan::from_toml_str(&format!("{base}\n[estimator]\ndense = true\n")).unwrap();
    let full = SimulationPlan::from_toml_str(&format!("{base}\n[estimator]\nrank_cutoff = 0.0\n")).unwrap();
    let a = run_sweep::<f64>(&dense, |_| {}).unwrap().records;
    let b = run_sweep::<f64>(&full, |_| {}).unwrap().records;
    for (a, b) in a.iter().zip(&b) {
        assert_eq!(a.bit_errors, b.bit_errors);
        if let (Some(x), Some(y)) = (a.channel_mse, b.channel_mse) {
            assert!((x - y).abs() <= 1e-6 * x.max(1e-12), "{x} vs {y}");
        }
    }
}
