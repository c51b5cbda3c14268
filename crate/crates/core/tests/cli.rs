use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn run(config: &str, dir: &Path) -> (i32, String) {
    let cfg = dir.join("config.json");
    fs::write(&cfg, config).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_kgdamp"))
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn artifacts(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = match fs::read_dir(dir.join("out")) {
        Ok(rd) => rd.map(|e| e.unwrap().path()).collect(),
        Err(_) => Vec::new(),
    };
    v.sort();
    v
}

fn single_csv(dir: &Path, prefix: &str) -> PathBuf {
    artifacts(dir)
        .into_iter()
        .find(|p| {
            let name = p.file_name().unwrap().to_str().unwrap();
            name.starts_with(prefix) && name.ends_with(".csv") && !name.contains("-eta")
        })
        .unwrap_or_else(|| panic!("no {prefix} artifact"))
}

const COSINE_1D: &str = r#"{"dim": 1, "kind": "cosine", "params": {"mean": 1.0, "amplitude": 1.0}}"#;

#[test]
fn malformed_json_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = run("{\"command\": \"gcc-check\", ", dir.path());
    assert_eq!(code, 2, "{err}");
    assert!(artifacts(dir.path()).is_empty());
}

#[test]
fn schema_violations_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        format!(r#"{{"command": "gcc-check", "profile": {COSINE_1D}, "horizons": []}}"#),
        format!(r#"{{"command": "gcc-check", "profile": {COSINE_1D}, "horizons": [5], "bogus": 1}}"#),
        r#"{"command": "resolvent-scan", "profile": {"dim": 1, "kind": "cosine", "params": {"mean": 0.5, "amplitude": 1.0}}, "etas": [1], "taus": [1]}"#.to_owned(),
        format!(r#"{{"command": "resolvent-scan", "profile": {COSINE_1D}, "mass": -1, "etas": [1], "taus": [1]}}"#),
        r#"{"command": "teleport"}"#.to_owned(),
        format!(
            r#"{{"command": "simulate", "profile": {COSINE_1D}, "grid": 16, "initial": {{"kind": "single-mode", "k": [0]}}, "etas": [2], "t_end": 1}}"#
        ),
    ];
    for c in cases {
        let (code, err) = run(&c, dir.path());
        assert_eq!(code, 2, "{c}: {err}");
    }
    assert!(artifacts(dir.path()).is_empty());
}

#[test]
fn gcc_check_on_cosine() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!(r#"{{"command": "gcc-check", "profile": {COSINE_1D}, "horizons": [5.0]}}"#);
    let (code, err) = run(&cfg, dir.path());
    assert_eq!(code, 0, "{err}");
    let text = fs::read_to_string(single_csv(dir.path(), "gcc-check-")).unwrap();
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = rd.headers().unwrap().iter().map(str::to_owned).collect();
    assert_eq!(header, ["T", "n_x", "n_xi", "alpha_hat", "argmin_x1", "argmin_xi1"]);
    let row = rd.records().next().unwrap().unwrap();
    let alpha: f64 = row[3].parse().unwrap();
    assert!((alpha - 1.0).abs() < 1e-12, "{alpha}");
}

#[test]
fn identical_configs_reproduce_artifacts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = format!(
        r#"{{"command": "resolvent-scan", "profile": {COSINE_1D}, "mode": "energy",
            "etas": [1, 2], "taus": {{"start": 0.5, "stop": 8, "count": 5, "log": true}},
            "sigma": {{"points": 16}}}}"#
    );
    assert_eq!(run(&cfg, a.path()).0, 0);
    // same content with different key order and whitespace
    let reordered = format!(
        r#"{{"taus": {{"count": 5, "log": true, "start": 0.5, "stop": 8}}, "etas": [1, 2],
            "sigma": {{"points": 16}}, "mode": "energy", "profile": {COSINE_1D}, "command": "resolvent-scan"}}"#
    );
    assert_eq!(run(&reordered, b.path()).0, 0);
    let (fa, fb) = (artifacts(a.path()), artifacts(b.path()));
    assert_eq!(fa.len(), 2);
    for (x, y) in fa.iter().zip(&fb) {
        assert_eq!(x.file_name(), y.file_name());
        assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap());
    }
    let text = fs::read_to_string(single_csv(a.path(), "resolvent-scan-")).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "mode,eta,tau,norm,norm_energy,tau_bracket_norm,bound_ratio,N,singular_flag"
    );
    assert_eq!(text.lines().count(), 11);
}

#[test]
fn undamped_resonance_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    // τ² = m + (2π)² hits the mode n = 1 exactly at σ = 0
    let tau = (1.0 + 4.0 * std::f64::consts::PI.powi(2)).sqrt();
    let zero = r#"{"dim": 1, "kind": "constant", "params": {"level": 0.0}}"#;
    let cfg = format!(
        r#"{{"command": "resolvent-scan", "profile": {zero}, "etas": [1], "taus": [{tau}], "sigma": {{"points": 8, "refine": false}}}}"#
    );
    let (code, err) = run(&cfg, dir.path());
    assert_eq!(code, 1, "{err}");
    let text = fs::read_to_string(single_csv(dir.path(), "resolvent-scan-")).unwrap();
    assert!(text.lines().nth(1).unwrap().ends_with(",1"));
    let allowed = cfg.replace("\"command\"", "\"allow_singular\": true, \"command\"");
    assert_eq!(run(&allowed, dir.path()).0, 0);
}

#[test]
fn simulate_then_fit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!(
        r#"{{"command": "simulate", "profile": {COSINE_1D}, "grid": 64,
            "initial": {{"kind": "gaussian", "center": [0.3], "width": 0.1}},
            "etas": [1, 2], "t_end": 20.0, "snapshot": true}}"#
    );
    let (code, err) = run(&cfg, dir.path());
    assert_eq!(code, 0, "{err}");
    let sim_csv = single_csv(dir.path(), "simulate-");
    let text = fs::read_to_string(&sim_csv).unwrap();
    assert_eq!(text.lines().next().unwrap(), "t,E,D,eta");
    let sidecar: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(sim_csv.with_extension("json")).unwrap()).unwrap();
    let records = sidecar["results"]["records"].as_array().unwrap();
    assert_eq!(records.len(), 2);
    assert!(records[0]["input_norms"]["h1_u0"].as_f64().unwrap() > 0.0);
    assert!(records[0]["dissipation_residual"].as_f64().unwrap() < 1e-3);
    // snapshot pair for each eta
    let snaps = artifacts(dir.path())
        .iter()
        .filter(|p| p.to_str().unwrap().contains("-eta"))
        .count();
    assert_eq!(snaps, 4);

    let fit = format!(
        r#"{{"command": "fit", "input": {}, "model": "both"}}"#,
        serde_json::to_string(sim_csv.to_str().unwrap()).unwrap()
    );
    let (code, err) = run(&fit, dir.path());
    assert_eq!(code, 0, "{err}");
    let text = fs::read_to_string(single_csv(dir.path(), "fit-")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "eta,model,gamma_or_c,C,r2,window_lo,window_hi");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[0].starts_with("1,exponential,"));
    assert!(rows[1].starts_with("1,power-bound,"));
}

#[test]
fn conservative_simulation_keeps_energy() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"command": "simulate", "profile": {"dim": 2, "kind": "constant", "params": {"level": 0.0}},
        "grid": 32, "initial": {"kind": "random", "seed": 4}, "etas": [1], "t_end": 5.0}"#;
    let (code, err) = run(cfg, dir.path());
    assert_eq!(code, 0, "{err}");
    let text = fs::read_to_string(single_csv(dir.path(), "simulate-")).unwrap();
    let energies: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    let e0 = energies[0];
    assert!(energies.iter().all(|e| (e - e0).abs() <= 1e-12 * e0));
}

#[test]
fn semiclassical_and_lab_commands() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"command": "semiclassical-scan", "profile": {"dim": 1, "kind": "constant", "params": {"level": 1.0}},
        "h": [0.125, 0.0625], "eps": [1.0, 0.5]}"#;
    let (code, err) = run(cfg, dir.path());
    assert_eq!(code, 0, "{err}");
    let text = fs::read_to_string(single_csv(dir.path(), "semiclassical-scan-")).unwrap();
    for line in text.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols[0], "semiclassical");
        let v: f64 = cols[5].parse().unwrap();
        assert!((v - 1.0).abs() < 0.02, "{line}");
    }

    let cfg = r#"{"command": "semigroup-lab", "dims": [2, 5], "seeds": [1, 2], "gap": 0.2, "kappa": 2,
        "tau_max": 20, "t_max": 20}"#;
    let (code, err) = run(cfg, dir.path());
    assert_eq!(code, 0, "{err}");
    let text = fs::read_to_string(single_csv(dir.path(), "semigroup-lab-")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "seed,n,kind,C1,M,gamma,C,kappa,nu,c1,sup_stat");
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn acceptance_subset_writes_summary() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = run(r#"{"command": "all-acceptance", "criteria": [3, 9]}"#, dir.path());
    assert_eq!(code, 0, "{err}");
    let csv = single_csv(dir.path(), "all-acceptance-");
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(csv.with_extension("json")).unwrap()).unwrap();
    assert_eq!(summary["results"]["passed"], 2);
    assert_eq!(summary["results"]["total"], 2);
    let (code, _) = run(r#"{"command": "all-acceptance", "criteria": [13]}"#, dir.path());
    assert_eq!(code, 2);
}
