use std::path::Path;
use std::process::{Command, Output};

use ch_onsager::classifier::classify_transition;
use ch_onsager::params::{DomainSpec, MobilitySpec, PhysicalParams};
use serde_json::Value;
use tempfile::TempDir;

const PI: &str = "3.141592653589793";

fn base(ubar: f64, gamma: f64, lengths: [&str; 3]) -> String {
    format!(
        "R = 1.0\ngamma = {gamma}\nalpha = 1.0\nubar = {ubar}\nH0 = 1.0\nL1 = {}\nL2 = {}\nL3 = {}\n",
        lengths[0], lengths[1], lengths[2]
    )
}

fn run(dir: &Path, config: &str, args: &[&str]) -> Output {
    let path = dir.join("run.toml");
    std::fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_chonsager"))
        .args(args)
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .arg("--quiet")
        .output()
        .unwrap()
}

fn ok(out: &Output) {
    assert!(out.status.success(), "exit {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr));
}

fn json(dir: &Path, name: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("out").join(name)).unwrap()).unwrap()
}

fn csv(dir: &Path, name: &str) -> Vec<Vec<String>> {
    std::fs::read_to_string(dir.join("out").join(name))
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

#[test]
fn symmetric_mixture_is_type_one_in_every_box() {
    for (lengths, m) in [([PI, "2.0", "1.0"], 1), ([PI, PI, "1.0"], 2), ([PI, PI, PI], 3)] {
        let dir = TempDir::new().unwrap();
        ok(&run(dir.path(), &base(0.5, 1.0, lengths), &["classify"]));
        let report = json(dir.path(), "report.json");
        assert_eq!(report["type"], "Type-I");
        assert_eq!(report["m"], m);
        assert_eq!(report["schema_version"], 1);
        assert!(dir.path().join("out/report.txt").exists());
    }
}

#[test]
fn cube_report_equals_library_call() {
    let dir = TempDir::new().unwrap();
    ok(&run(dir.path(), &base(0.1, 1.0, [PI, PI, PI]), &["classify"]));
    let p = PhysicalParams::new(1.0, 1.0, 1.0, 0.1, MobilitySpec::constant(1.0).unwrap()).unwrap();
    let d = DomainSpec::new([std::f64::consts::PI; 3]).unwrap();
    let expected = serde_json::to_value(classify_transition(&p, &d).unwrap()).unwrap();
    assert_eq!(json(dir.path(), "report.json"), expected);
}

#[test]
fn missing_ubar_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let config = base(0.5, 1.0, [PI, "2.0", "1.0"]).replace("ubar = 0.5\n", "");
    let out = run(dir.path(), &config, &["classify"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ubar"));
}

#[test]
fn unknown_key_reports_its_line() {
    let dir = TempDir::new().unwrap();
    let config = format!("{}[simulate]\nstep = 2\n", base(0.5, 1.0, [PI, "2.0", "1.0"]));
    let out = run(dir.path(), &config, &["classify"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("run.toml:10") && err.contains("step"), "{err}");
}

#[test]
fn simulate_without_temperature_names_the_key() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), &base(0.5, 1.0, [PI, "2.0", "1.0"]), &["simulate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`T`"));
}

#[test]
fn blow_up_is_a_numeric_failure() {
    let dir = TempDir::new().unwrap();
    let config = format!(
        "{}T = 0.1\n[simulate]\nt_end = 1e6\ndt = 1e4\nmodes = [8, 6, 6]\namplitude = 0.5\n",
        base(0.5, 1.0, [PI, "2.0", "1.0"])
    );
    let out = run(dir.path(), &config, &["simulate"]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn reduce_from_zero_stays_at_zero() {
    let dir = TempDir::new().unwrap();
    let config = format!("{}T = 0.24\n[reduce]\ny0 = [0.0]\nt_end = 50.0\n", base(0.5, 1.0, [PI, "2.0", "1.0"]));
    ok(&run(dir.path(), &config, &["reduce"]));
    let rows = csv(dir.path(), "reduced.csv");
    assert_eq!(rows[0], ["t", "y1"]);
    assert!(rows.len() > 10);
    for r in &rows[1..] {
        assert_eq!(r[1].parse::<f64>().unwrap(), 0.0);
    }
    let eq = json(dir.path(), "equilibria.json");
    assert_eq!(eq["equilibria"]["points"].as_array().unwrap().len(), 2);
}

#[test]
fn simulate_is_reproducible_for_a_seed() {
    let config = format!(
        "{}T = 0.24\n[simulate]\nt_end = 20.0\ndt = 0.5\nmodes = [8, 6, 6]\nrecord_every = 4\n",
        base(0.5, 1.0, [PI, "2.0", "1.0"])
    );
    let read = |seed: &str| {
        let dir = TempDir::new().unwrap();
        ok(&run(dir.path(), &config, &["simulate", "--seed", seed]));
        let text = std::fs::read_to_string(dir.path().join("out/trajectory.csv")).unwrap();
        let snapshot = std::fs::read(dir.path().join("out/final.bin")).unwrap();
        assert_eq!(json(dir.path(), "simulate.json")["seed"], seed.parse::<u64>().unwrap());
        (text, snapshot)
    };
    let a = read("3");
    assert_eq!(a, read("3"));
    assert_ne!(a.0, read("4").0);
    assert!(a.0.starts_with("t,mass,energy,dissipation,y1\n"));
}

#[test]
fn sweep_recovers_square_root_law() {
    let dir = TempDir::new().unwrap();
    let config = format!(
        "{}[sweep]\noffsets = [0.01, 0.02, 0.03, 0.04, 0.05]\nmodes = [8, 6, 6]\n",
        base(0.5, 2.0, [PI, "2.0", "1.0"])
    );
    ok(&run(dir.path(), &config, &["sweep"]));
    let out = json(dir.path(), "sweep.json");
    let slope = out["result"]["slope"].as_f64().unwrap();
    assert!((slope - 0.5).abs() <= 0.02, "slope {slope}");
    assert_eq!(csv(dir.path(), "sweep.csv").len(), 6);
}

#[test]
fn validate_tracks_reduced_dynamics() {
    let dir = TempDir::new().unwrap();
    let config = format!("{}[validate]\nepsilon = 0.02\nmodes = [16, 8, 8]\n", base(0.5, 1.0, [PI, "2.0", "1.0"]));
    ok(&run(dir.path(), &config, &["validate"]));
    let out = json(dir.path(), "validate.json");
    assert!(out["relative_deviation"].as_f64().unwrap() < 0.05);
    assert_eq!(csv(dir.path(), "validate.csv")[0], ["t", "pde_y1", "reduced_y1"]);
}
