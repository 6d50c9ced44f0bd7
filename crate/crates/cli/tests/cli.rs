use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_heis-area"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

#[test]
fn malformed_distance_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.json", r#"{"distance": {"family": "euclidean"}}"#);
    let out = run(&["spherical-factor", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("configuration error") && err.contains("euclidean"), "{err}");
}

#[test]
fn unknown_field_and_missing_file_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "typo.json", r#"{"seeed": 1}"#);
    let out = run(&["chain-rule", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["chain-rule", "--config", "/nonexistent/cfg.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn creates_output_dir_and_repeats_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("plane.json");
    let a = dir.path().join("nested/a");
    let b = dir.path().join("nested/b");
    for out in [&a, &b] {
        let o = run(&["chain-rule", "--config", cfg.to_str().unwrap(), "--seed", "5", "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let ca = std::fs::read(a.join("chain-rule.csv")).unwrap();
    let cb = std::fs::read(b.join("chain-rule.csv")).unwrap();
    assert!(!ca.is_empty());
    assert_eq!(ca, cb);
    let header = String::from_utf8_lossy(&ca).lines().next().unwrap().to_string();
    assert_eq!(header, "suite,subject,point,distance,quantity,value,std_error,samples,seed");
}

#[test]
fn spherical_factor_row_matches_quadrature() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sf");
    let o = run(&["spherical-factor", "--budget", "low", "--seed", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("spherical-factor.csv")).unwrap();
    let beta_line = csv.lines().find(|l| l.contains(",beta,")).unwrap();
    let value: f64 = beta_line.rsplit(',').nth(3).unwrap().parse().unwrap();
    assert!((value / 0.874019 - 1.0).abs() < 0.01, "{beta_line}");

    // identical estimates for the same seed, different ones for another seed
    let again = dir.path().join("sf2");
    run(&["spherical-factor", "--budget", "low", "--seed", "1", "--out", again.to_str().unwrap()]);
    assert_eq!(csv, std::fs::read_to_string(again.join("spherical-factor.csv")).unwrap());
    let other = dir.path().join("sf3");
    run(&["spherical-factor", "--budget", "low", "--seed", "2", "--out", other.to_str().unwrap()]);
    assert_ne!(csv, std::fs::read_to_string(other.join("spherical-factor.csv")).unwrap());
}

const SHORT: &str = r#""schedule": {"t0": 0.1, "gamma": 0.5, "rungs": 2}, "budget": {"starts": 4, "nm_evals": 40}"#;

#[test]
fn blowup_on_plane_passes_and_control_fails() {
    let dir = tempfile::tempdir().unwrap();
    let plane = write(
        dir.path(),
        "plane.json",
        &format!(r#"{{"surface": {{"f": ["x1"], "U": {{"center": [0, 0], "half": [2, 2]}}, "points": [[0.3, 0.2]]}}, {SHORT}}}"#),
    );
    let out = dir.path().join("ok");
    let o = run(&["blowup", "--budget", "low", "--config", plane.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(o.status.code(), Some(0), "{stdout}");
    assert!(stdout.contains("tolerance widened"), "{stdout}");
    let profiles = std::fs::read_to_string(out.join("blowup-profiles.jsonl")).unwrap();
    assert_eq!(profiles.lines().count(), 2);
    let first: serde_json::Value = serde_json::from_str(profiles.lines().next().unwrap()).unwrap();
    assert_eq!(first["alpha"], 3.0);

    let control = write(
        dir.path(),
        "control.json",
        &format!(
            r#"{{"surface": {{"f": ["x1 + x3"], "U": {{"center": [0, 1], "half": [1.5, 2]}}, "points": [[0, 1]]}},
                "negative_control": {{"wrong_plane": [[1, 0, 0], [0, 1, 0]]}}, {SHORT}}}"#
        ),
    );
    let o = run(&["blowup", "--budget", "low", "--config", control.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("FAIL blowup"));
}

#[test]
fn shipped_configs_parse() {
    for name in ["tilted.json", "plane.json", "negative_control.json", "spherical_factor_random.json"] {
        let cfg = heis_area_cli::config::load(&configs().join(name)).unwrap();
        if cfg.surface.is_some() {
            let s = cfg.surface().unwrap();
            assert!(!s.points.is_empty());
        }
        cfg.distance().unwrap();
    }
}
