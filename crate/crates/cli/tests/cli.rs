use std::path::Path;
use std::process::Command;

const SMALL: &[&str] = &["--set", "grid.modes=16", "--set", "grid.vertical_nodes=12", "--set", "analysis.m_max=8"];

fn muskat(out: &Path, args: &[&str]) -> i32 {
    let status = Command::new(env!("CARGO_BIN_EXE_muskat"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs");
    status.status.code().expect("exit code")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Header row and data rows, without the comment block.
fn body(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let code = muskat(dir.path(), &["spectrum", "--set", "fluids.viscosity=2"]);
    assert_eq!(code, 2);
    let err = json(&dir.path().join("error.json"));
    assert_eq!(err["kind"], "config");
    assert!(err["message"].as_str().unwrap().contains("viscosity"));
}

#[test]
fn config_file_is_read_and_checked() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[fluids]\nvarpi = 1.0\nsurface_tension = 1.0\n[analysis]\nm_max = 4\n").unwrap();
    let code = muskat(dir.path(), &["spectrum", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 0);
    let rows = body(&dir.path().join("spectrum.csv"));
    assert_eq!(rows[0], "m,lambda");
    assert_eq!(rows.len(), 6);
    let lambda1: f64 = rows[2].split(',').nth(1).unwrap().parse().unwrap();
    assert!(lambda1.abs() < 1e-12, "λ_1 = {lambda1}");

    std::fs::write(&cfg, "[grid]\nmodes = -3\n").unwrap();
    assert_eq!(muskat(dir.path(), &["spectrum", "--config", cfg.to_str().unwrap()]), 2);
}

#[test]
fn oracle_check_passes_with_defaults() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(muskat(dir.path(), &["oracle-check"]), 0);
    let manifest = json(&dir.path().join("manifest.json"));
    assert_eq!(manifest["status"], "ok");
    assert!(manifest["summary"]["worst_error"].as_f64().unwrap() < 1e-8);
    assert_eq!(manifest["outputs"][0], "multipliers.csv");
}

#[test]
fn jacobian_check_on_small_grid() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(muskat(dir.path(), &[&["jacobian-check"], SMALL].concat()), 0);
    assert_eq!(body(&dir.path().join("jacobian.csv")).len(), 10);
}

#[test]
fn bifurcate_recovers_quadratic_coefficient() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        &["bifurcate", "--set", "fluids.varpi=1", "--set", "continuation.eps_max=0.06"],
        SMALL,
    ]
    .concat();
    assert_eq!(muskat(dir.path(), &args), 0);
    let manifest = json(&dir.path().join("manifest.json"));
    let c2 = manifest["summary"]["gamma_fit"]["c2"].as_f64().unwrap();
    assert!((c2 - 0.375).abs() < 1e-4, "c2 = {c2}");
    let points = body(&dir.path().join("bifurcation_points.csv"));
    assert!(points[1].starts_with("1,"));
    assert!(body(&dir.path().join("branch_l1.csv"))[0].starts_with("gamma,epsilon,sup_norm,leading_eig_1"));
}

#[test]
fn simulate_is_deterministic_per_seed() {
    let run = |seed: &str| {
        let dir = tempfile::tempdir().unwrap();
        let args = [
            &["simulate", "--seed", seed, "--set", "initial.kind=random", "--set", "time.final_time=0.2"],
            SMALL,
        ]
        .concat();
        assert_eq!(muskat(dir.path(), &args), 0);
        body(&dir.path().join("trajectory.csv"))
    };
    let a = run("7");
    assert_eq!(a, run("7"));
    assert_ne!(a, run("8"));
}

#[test]
fn illposed_parameters_exit_with_code_4() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        &["simulate", "--set", "fluids.varpi=1", "--set", "fluids.surface_tension=0"],
        SMALL,
    ]
    .concat();
    assert_eq!(muskat(dir.path(), &args), 4);
    assert_eq!(json(&dir.path().join("error.json"))["kind"], "ill-posed");
}

#[test]
fn moving_frame_residuals_stay_small() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        &[
            "moving-frame",
            "--set",
            "moving_frame.c=0.3",
            "--set",
            "initial.amplitude=0.05",
            "--set",
            "time.final_time=0.2",
            "--set",
            "grid.vertical_nodes=24",
        ],
        &SMALL[..2],
    ]
    .concat();
    assert_eq!(muskat(dir.path(), &args), 0);
    let rows = body(&dir.path().join("frame_residuals.csv"));
    assert!(rows[0].starts_with("t,top_flux"));
    assert!(body(&dir.path().join("moving_trajectory.csv"))[0].starts_with("t,tV,mean"));
}

#[test]
fn branch_stability_exchange_ratio_near_one() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        &[
            "branch-stability",
            "--set",
            "fluids.varpi=1",
            "--set",
            "continuation.eps_max=0.03",
            "--set",
            "continuation.eigen_modes=8",
        ],
        SMALL,
    ]
    .concat();
    assert_eq!(muskat(dir.path(), &args), 0);
    let rows = body(&dir.path().join("stability_l1.csv"));
    assert_eq!(rows[0], "epsilon,gamma,leading,critical,exchange_ratio");
    for row in &rows[1..] {
        let ratio: f64 = row.split(',').nth(4).unwrap().parse().unwrap();
        assert!((ratio - 1.0).abs() < 0.01, "{row}");
    }

    let too_many = [&args[..], &["--set", "continuation.eigen_modes=12"]].concat();
    assert_eq!(muskat(dir.path(), &too_many), 2);
}
