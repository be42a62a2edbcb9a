use std::path::Path;
use std::process::{Command, Output};

fn run(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_carbon-aoi"))
        .args(args)
        .env("CARBON_AOI_OUT_DIR", out)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn simulate_writes_data_summary_config_and_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["simulate", "--policy", "round-robin", "--region", "low", "--num-sources", "10", "--kappa", "5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stem = dir.path().join("round_robin_low_N10_kappa5");
    for ext in ["csv", "summary.json", "config.toml", "run.json"] {
        assert!(stem.with_extension(ext).exists(), "missing {ext}");
    }
    let csv = std::fs::read_to_string(stem.with_extension("csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 288 * 10);
    let run_meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(stem.with_extension("run.json")).unwrap()).unwrap();
    assert_eq!(run_meta["trace_seed"], 0);
    assert_eq!(run_meta["gate"], true);
}

#[test]
fn simulate_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["simulate", "--policy", "random", "--num-sources", "12", "--kappa", "2", "--seed", "9"];
    assert!(run(a.path(), &args).status.success());
    assert!(run(b.path(), &args).status.success());
    let name = "random_medium_N12_kappa2.csv";
    assert_eq!(std::fs::read(a.path().join(name)).unwrap(), std::fs::read(b.path().join(name)).unwrap());
}

#[test]
fn saved_config_is_accepted_back() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run(dir.path(), &["simulate", "--lambda", "1e4", "--num-sources", "5", "--kappa", "3"]).status.success());
    let cfg = dir.path().join("saoithe_medium_N5_kappa3.config.toml");
    let again = tempfile::tempdir().unwrap();
    let o = run(again.path(), &["simulate", "--config", cfg.to_str().unwrap(), "--lambda", "1e4"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(again.path().join("saoithe_medium_N5_kappa3.csv").exists());
}

#[test]
fn trace_file_input() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("grid.csv");
    let mut body = String::from("timestamp,intensity\n");
    for h in 0..25 {
        body.push_str(&format!("{},{}\n", h * 3600, 100 + 10 * h));
    }
    std::fs::write(&trace, body).unwrap();
    let o = run(dir.path(), &["simulate", "--trace", trace.to_str().unwrap(), "--policy", "round-robin", "--num-sources", "4"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("round_robin_grid_N4_kappa21.5.csv").exists());
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["simulate", "--trace", "x.csv", "--region", "low"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["no-such-command"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["validate", "--suite", "bogus"]).status.code(), Some(2));
}

#[test]
fn invalid_inputs_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["simulate", "--num-sources", "0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("num_sources"));
    assert_eq!(run(dir.path(), &["calibrate", "--kappa", "0", "--num-sources", "4"]).status.code(), Some(1));
}

#[test]
fn validate_whittle_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["validate", "--suite", "whittle"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("0 failed"));
}

#[test]
fn boundary_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["boundary", "--steps", "3"]);
    assert!(o.status.success());
    let s = stdout(&o);
    let rows: Vec<&str> = s.lines().collect();
    assert_eq!(rows[0], "xi_gco2_per_kwh,cost,critical_age");
    assert_eq!(rows.len(), 4);
    assert!(rows[1].starts_with("50,100,"));
}

#[test]
fn compose_energy_reference() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["compose-energy"]);
    let line = stdout(&o).lines().find(|l| l.starts_with("e_tot_j")).unwrap().to_string();
    let e: f64 = line.split('=').nth(1).unwrap().trim().parse().unwrap();
    assert!((e - 0.9251).abs() / 0.9251 <= 0.02);
}

#[test]
fn calibrate_and_small_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["calibrate", "--num-sources", "10", "--kappa", "5", "--region", "high"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("calibration_high_N10_kappa5.json").exists());

    let spec = dir.path().join("spec.toml");
    std::fs::write(&spec, "regions = [\"low\"]\nkappas = [5.0]\nnum_sources = [10]\npolicies = [\"saoithe\", \"round_robin\", \"random\"]\nreplications = 3\n").unwrap();
    let o = run(dir.path(), &["sweep", "--spec", spec.to_str().unwrap(), "--jobs", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("sweep.json").exists());
    assert!(dir.path().join("saoithe_low_N10_kappa5.csv").exists());
    assert!(stdout(&o).contains("failures 0"));
}
