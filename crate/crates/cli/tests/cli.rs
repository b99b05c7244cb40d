use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn lab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_beltrami-lab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("BELTRAMI_THREADS", "1")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn catalog_lists_entries() {
    let dir = tempfile::tempdir().unwrap();
    let o = lab(&["catalog"], dir.path());
    assert_eq!(code(&o), 0);
    let rows: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(rows.as_array().unwrap().iter().any(|r| r["name"] == "paper-example-sec4"));
    let csv = lab(&["catalog", "--format", "csv"], dir.path());
    assert!(String::from_utf8(csv.stdout).unwrap().starts_with("name,description\n"));
}

#[test]
fn analyze_constant_disk_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = lab(&["analyze", "--spec", "constant-disk", "--params", "0.5"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("analyze.json")).unwrap()).unwrap();
    assert_eq!(report["conditions"]["hypotheses_met"], true);
    assert!(dir.path().join("analyze_bounds.csv").exists());
    assert!(dir.path().join("analyze_divergence.csv").exists());
}

#[test]
fn analyze_bound_violation_exits_two_with_witness() {
    let dir = tempfile::tempdir().unwrap();
    let o = lab(&["analyze", "--spec", "constant-disk", "--params", "0.5", "--q", "0.5"], dir.path());
    assert_eq!(code(&o), 2);
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("K <= Q = 3"), "{err}");
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("analyze.json")).unwrap()).unwrap();
    let worst = &report["conditions"]["maximal_bound"]["worst"];
    assert!((worst["value"].as_f64().unwrap() - 3.0).abs() < 1e-12);
}

#[test]
fn solve_then_verify_archive() {
    let dir = tempfile::tempdir().unwrap();
    let o = lab(&["solve", "--spec", "constant-disk", "--params", "0.5", "--grid", "64"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["archive/f.bin", "archive/meta.json", "solve.json", "ladder.csv", "jacobian.ppm", "dilatation.ppm"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    // the archive carries its spec, so verify needs nothing else
    let v = lab(&["verify"], dir.path());
    assert_eq!(code(&v), 0, "{}", String::from_utf8_lossy(&v.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("verify.json")).unwrap()).unwrap();
    assert!(report["checks"]["residual"]["l2_rel"].as_f64().unwrap() < 1e-3);
    assert_eq!(report["checks"]["injectivity"]["pass"], true);
    assert!(dir.path().join("residual.ppm").exists());
}

#[test]
fn non_contractive_spec_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("strong.toml");
    fs::write(&spec, "mu = \"1.2\"\nsupport_radius = 1.0\nlabel = \"strong\"\n").unwrap();
    let o = lab(&["solve", "--spec", spec.to_str().unwrap(), "--grid", "32"], dir.path());
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8(o.stderr).unwrap().contains("not contractive"));
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&lab(&["solve", "--spec", "constant-disk", "--params", "0.5", "--grid", "100"], dir.path())), 1);
    assert_eq!(code(&lab(&["solve", "--spec", "no-such-entry"], dir.path())), 1);
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[solver]\nunknown_key = 1\n").unwrap();
    assert_eq!(code(&lab(&["catalog", "--config", cfg.to_str().unwrap()], dir.path())), 1);
    let o = Command::new(env!("CARGO_BIN_EXE_beltrami-lab"))
        .arg("catalog")
        .env("BELTRAMI_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&o), 1);
}

#[test]
fn exhausted_ladder_is_flagged() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "spec = \"w-damped-disk\"\nparams = [0.5]\n[solver]\ngrid = 32\nladder = [2]\n").unwrap();
    let o = lab(&["solve", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("solve.json")).unwrap()).unwrap();
    assert_eq!(report["status"], "ladder-exhausted");
    assert!(dir.path().join("ladder.csv").exists());
}

#[test]
fn identical_runs_write_identical_reports() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["analyze", "--spec", "paper-example-sec4-phase2", "--q", "1/r", "--q1", "1", "--w-max", "0.5"];
    lab(&args, a.path());
    lab(&args, b.path());
    assert_eq!(fs::read(a.path().join("analyze.json")).unwrap(), fs::read(b.path().join("analyze.json")).unwrap());
    let solve = ["solve", "--spec", "w-damped-disk", "--params", "0.5", "--grid", "32", "--ladder", "2,4,8"];
    lab(&solve, a.path());
    lab(&solve, b.path());
    assert_eq!(fs::read(a.path().join("solve.json")).unwrap(), fs::read(b.path().join("solve.json")).unwrap());
    assert_eq!(fs::read(a.path().join("archive/f.bin")).unwrap(), fs::read(b.path().join("archive/f.bin")).unwrap());
}

#[test]
fn example_reports_constants() {
    let dir = tempfile::tempdir().unwrap();
    let o = lab(&["example", "--grid", "64"], dir.path());
    assert!(code(&o) == 0 || code(&o) == 3, "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("6.283185"), "{text}");
    assert!(text.contains("CONVERGENT") && text.contains("DIVERGENT"));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("example.json")).unwrap()).unwrap();
    let samples = report["tangential_samples"].as_array().unwrap();
    let phase2 = samples
        .iter()
        .find(|s| s["variant"] == "paper-example-sec4-phase2" && s["r"] == 0.3 && s["w_modulus"] == 0.2)
        .unwrap();
    assert!((phase2["k_tangential"].as_f64().unwrap() - 0.5).abs() < 1e-9);
}
