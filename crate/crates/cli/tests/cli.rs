//! End-to-end checks of the binary: file parsing, JSON shapes, CSV outputs,
//! and exit codes.

use std::path::Path;
use std::process::{Command, Output};

fn springreg(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_springreg"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write_pair(dir: &Path) -> (String, String) {
    // a generic (asymmetric) cloud, rotated 90 degrees about z and shifted
    let model = "\
# five points
0 0 0
1 0 0
0 2 0
0 0 3
0.4 0.5 0.6
";
    let scene = "\
0 0 2
0 1 2
-2 0 2
0 0 5
-0.5 0.4 2.6
";
    let model_path = dir.join("model.txt");
    let scene_path = dir.join("scene.txt");
    std::fs::write(&model_path, model).unwrap();
    std::fs::write(&scene_path, scene).unwrap();
    (
        model_path.to_string_lossy().into_owned(),
        scene_path.to_string_lossy().into_owned(),
    )
}

#[test]
fn horn_json_recovers_the_rotation() {
    let dir = tempfile::tempdir().unwrap();
    let (model, scene) = write_pair(dir.path());
    let out = springreg(&["horn", "--model", &model, "--scene", &scene, "--json"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let r = &v["pose"]["rotation"];
    // 90 degrees about z: first row (0, -1, 0)
    assert!((r[0][0].as_f64().unwrap()).abs() < 1e-9);
    assert!((r[0][1].as_f64().unwrap() + 1.0).abs() < 1e-9);
    assert!(v["objective"].as_f64().unwrap() < 1e-12);
}

#[test]
fn simulate_emits_summary_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let (model, scene) = write_pair(dir.path());
    let csv = dir.path().join("traj.csv");
    let out = springreg(
        &[
            "simulate",
            "--model",
            &model,
            "--scene",
            &scene,
            "--csv",
            csv.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["termination"], "converged");
    assert!(v["rotation_error_vs_horn_rad"].as_f64().unwrap() < 0.01);

    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "step,time,Vk,Vp,V,Vdot,rot_err_vs_horn_rad,com_norm"
    );
    assert!(lines.count() > 2);
}

#[test]
fn equilibria_json_lists_four_certificates() {
    let dir = tempfile::tempdir().unwrap();
    let (model, scene) = write_pair(dir.path());
    let out = springreg(
        &["equilibria", "--model", &model, "--scene", &scene, "--json"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let certs = v["certificates"].as_array().unwrap();
    assert_eq!(certs.len(), 4);
    let counts: Vec<u64> = certs
        .iter()
        .map(|c| c["unstable_count"].as_u64().unwrap())
        .collect();
    assert_eq!(counts, vec![0, 1, 2, 3]);
    assert_eq!(certs[0]["eigenvalues"].as_array().unwrap().len(), 18);
}

#[test]
fn symmetry_residuals_are_tiny() {
    let dir = tempfile::tempdir().unwrap();
    let out = springreg(
        &["symmetry", "--shape", "square", "--samples", "5"],
        dir.path(),
    );
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "theta,torque_residual,residual_over_kl2");
    for line in lines {
        let residual: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!(residual < 1e-12);
    }
}

#[test]
fn symmetry_without_theta_or_samples_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = springreg(&["symmetry", "--shape", "triangle"], dir.path());
    assert!(!out.status.success());
}

#[test]
fn robust_reports_saturation() {
    let dir = tempfile::tempdir().unwrap();
    let (model, scene) = write_pair(dir.path());
    let csv = dir.path().join("robust.csv");
    let out = springreg(
        &[
            "robust",
            "--model",
            &model,
            "--scene",
            &scene,
            "--cbar",
            "1000",
            "--outlier-report",
            "--csv",
            csv.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["termination"], "converged");
    assert_eq!(v["active_springs"], 5);
    assert_eq!(v["points"].as_array().unwrap().len(), 5);

    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text
        .lines()
        .next()
        .unwrap()
        .ends_with("active_springs"));
}

#[test]
fn montecarlo_writes_csvs_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("mc");
    let out = springreg(
        &[
            "montecarlo",
            "--study",
            "equilibria",
            "--runs",
            "2",
            "--out",
            out_dir.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["passed"], true);
    assert!(out_dir.join("runs.csv").exists());
    assert!(out_dir.join("eigenvalues.csv").exists());
}

#[test]
fn missing_file_is_a_clean_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = springreg(
        &["horn", "--model", "nope.txt", "--scene", "nope.txt"],
        dir.path(),
    );
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.starts_with("error:"), "stderr: {stderr}");
}
