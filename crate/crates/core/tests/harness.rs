use std::process::Command;

use szego::harness::{
    bargmann_fock_kernel, fit_coefficients, run_expansion, ExperimentConfig, ModelSpec, PointSpec,
};
use szego::models::MetricPreset;
use szego::{Exec, C64};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_szego"))
}

fn stratum_config(exec: Exec) -> ExperimentConfig {
    ExperimentConfig {
        model: ModelSpec { weights: vec![1, 2], preset: MetricPreset::Levi },
        points: PointSpec::Random { samples: 3, seed: 11 },
        m_values: (10..=60).step_by(5).collect(),
        exec,
        ..ExperimentConfig::default()
    }
}

#[test]
fn expansion_csv_is_deterministic() {
    let a = run_expansion(&stratum_config(Exec::Sequential)).unwrap().table().to_csv_string().unwrap();
    let b = run_expansion(&stratum_config(Exec::Sequential)).unwrap().table().to_csv_string().unwrap();
    let c = run_expansion(&stratum_config(Exec::Parallel)).unwrap().table().to_csv_string().unwrap();
    assert_eq!(a, b);
    assert_eq!(a, c);
}

#[test]
fn fit_recovers_round_coefficients() {
    // S_m = (m + 1)(m + 2) / (2 pi^3) on the round 5-sphere
    let k = 1.0 / (2.0 * std::f64::consts::PI.powi(3));
    let samples: Vec<(u64, f64)> = (20..=80).step_by(10).map(|m| (m, ((m + 1) * (m + 2)) as f64 * k)).collect();
    let f = fit_coefficients(&samples, 2).unwrap();
    assert!((f[0] - k).abs() < 1e-10 && (f[1] - 3.0 * k).abs() < 1e-9 && (f[2] - 2.0 * k).abs() < 1e-7);
    assert!(fit_coefficients(&samples[..3], 2).is_err());
}

#[test]
fn bargmann_fock_diagonal() {
    let z = [C64::new(0.3, 0.4)];
    let k = bargmann_fock_kernel(5, &z, &z);
    let want = 10.0 / std::f64::consts::PI;
    assert!((k.re / want - 1.0).abs() < 1e-13 && k.im.abs() < 1e-12 * want);
    let w = [C64::new(0.3, 0.1)];
    let off = bargmann_fock_kernel(5, &z, &w);
    assert!((off.norm() / want - (-5.0f64 * 0.09).exp()).abs() < 1e-13);
}

#[test]
fn config_text_round_trip() {
    let cfg = ExperimentConfig::parse("model = weighted\nweights = 1,2,3\nm = 5:5:50\nN = 2\npoints = stratum\n").unwrap();
    assert_eq!(cfg.model.weights, vec![1, 2, 3]);
    assert_eq!(cfg.m_values.len(), 10);
    assert_eq!(cfg.truncation, 2);
    assert!(ExperimentConfig::parse("N = 7\n").and_then(|c| c.validate()).is_err());
    assert!(ExperimentConfig::parse("nonsense = 1\n").is_err());
}

#[test]
fn cli_writes_csv_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("exp.csv");
    let svg = dir.path().join("exp.svg");
    let out = bin()
        .args(["expansion", "--weights", "1,2", "--points", "stratum", "--m", "10:10:60", "--sequential"])
        .arg("--csv")
        .arg(&csv)
        .arg("--svg")
        .arg(&svg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("m,"));
    // one point per stratum, six values of m
    assert_eq!(text.lines().count(), 13);
    assert!(std::fs::read_to_string(&svg).unwrap().contains("<svg"));
}

#[test]
fn cli_exit_codes() {
    let code = |args: &[&str]| bin().args(args).output().unwrap().status.code();
    assert_eq!(code(&["kernel", "--model", "s3", "--m", "1:3"]), Some(0));
    assert_eq!(code(&["checks", "--model", "s3"]), Some(0));
    assert_eq!(code(&["kernel", "--bogus"]), Some(2));
    assert_eq!(code(&["kernel", "--weights", "2,4"]), Some(2));
    assert_eq!(code(&["decay", "--weights", "1,2", "--delta", "5"]), Some(2));
    assert_eq!(code(&["decay", "--model", "s3"]), Some(2));
    assert_eq!(code(&["demo", "--p", "2", "--m", "1:6", "--z2", "0.25"]), Some(0));
}
