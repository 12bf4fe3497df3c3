use std::path::Path;
use std::process::Command;

use corrbern::experiment::{ExperimentConfig, ExperimentMode};
use corrbern::{Error, ModelParams};
use corrbern_cli::{estimate_csv, exact_report, experiment_rows, parse_params_list, sample_csv};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_corrbern"))
}

fn write_params(dir: &Path, params: &ModelParams) -> std::path::PathBuf {
    let path = dir.join("params.json");
    std::fs::write(&path, params.to_json()).unwrap();
    path
}

fn estimates(sample: &str) -> Vec<Vec<String>> {
    let mut out = Vec::new();
    estimate_csv(sample.as_bytes(), &mut out).unwrap();
    String::from_utf8(out)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

#[test]
fn sample_all_ones() {
    let params = ModelParams::homogeneous(4, 1.0, 0.3).unwrap();
    let mut out = Vec::new();
    sample_csv(&params, 20, 5, &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert_eq!(text.lines().next(), Some("sample_id,x_bits,y_bits"));
    assert!(text.lines().skip(1).all(|l| l.ends_with(",1111,1111")));
}

#[test]
fn sample_is_deterministic_and_cell_frequencies_match() {
    let params = ModelParams::homogeneous(1, 0.5, 0.0).unwrap();
    let run = |seed| {
        let mut out = Vec::new();
        sample_csv(&params, 100_000, seed, &mut out).unwrap();
        out
    };
    let a = run(3);
    assert_eq!(a, run(3));
    assert_ne!(a, run(4));
    let text = String::from_utf8(a).unwrap();
    let n = 100_000.0;
    let sd = (0.25f64 * 0.75 / n).sqrt();
    for cell in [",0,0", ",0,1", ",1,0", ",1,1"] {
        let freq = text.lines().filter(|l| l.ends_with(cell)).count() as f64 / n;
        assert!((freq - 0.25).abs() < 3.0 * sd, "{cell}: {freq}");
    }
}

#[test]
fn estimate_examples() {
    let rows = estimates("sample_id,x_bits,y_bits\n0,0110,0110\n1,10,11\n2,000,000\n");
    // x = y, not degenerate.
    assert_eq!(&rows[0][6..9], ["1", "1", "1"]);
    // x=(1,0), y=(1,1).
    assert_eq!(&rows[1][6..9], ["0", "0", "0"]);
    assert_eq!(rows[1][1], "1");
    // All zeros: the convention value.
    assert_eq!(&rows[2][6..9], ["0", "0", "0"]);
}

#[test]
fn estimate_reports_line_of_bad_row() {
    let bad = "sample_id,x_bits,y_bits\n0,01,01\n1,01,012\n";
    let mut out = Vec::new();
    match estimate_csv(bad.as_bytes(), &mut out) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
    let short = "sample_id,x_bits,y_bits\n0,01\n";
    assert!(matches!(estimate_csv(short.as_bytes(), Vec::new()), Err(Error::Parse { line: 2, .. })));
}

#[test]
fn exact_examples() {
    let row1 = ModelParams::new(
        vec![0.6892, 0.7224, 0.4795, 0.8985, 0.4022, 0.7043],
        vec![0.8429, 0.9852, 0.8006, 0.3118, 0.5768, 0.5751],
    )
    .unwrap();
    assert!((exact_report(&row1).unwrap().rho_t - 0.7516).abs() < 5e-5);

    let perfect = ModelParams::new(vec![0.2, 0.5, 0.7], vec![1.0; 3]).unwrap();
    let r = exact_report(&perfect).unwrap();
    assert_eq!(r.e_delta, 0.0);
    assert!((r.e_str - (1.0 - r.degenerate_probability)).abs() < 1e-12);
    assert_eq!(r.convention_contribution, 0.0);

    let flat = ModelParams::homogeneous(4, 0.3, 0.0).unwrap();
    let r = exact_report(&flat).unwrap();
    assert!(r.rho_h.abs() < 1e-15 && r.rho_t.abs() < 1e-15);

    let json = serde_json::to_value(&r).unwrap();
    for key in ["spec_version", "rho_H", "rho_T", "E_delta", "Var_strbar", "MSE_strprime_vs_rhoT"] {
        assert!(json.get(key).is_some(), "{key}");
    }
}

#[test]
fn experiment_with_injected_rows() {
    let config = ExperimentConfig::new(ExperimentMode::UniformBoth);
    let one = parse_params_list(
        r#"{"p": [0.6892, 0.7224, 0.4795, 0.8985, 0.4022, 0.7043],
            "rho": [0.8429, 0.9852, 0.8006, 0.3118, 0.5768, 0.5751]}"#,
    )
    .unwrap();
    let (rows, summary) = experiment_rows(&config, Some(one)).unwrap();
    let r = &rows[0];
    let got = [r.e_str, r.e_strprime, r.rho_t, r.var_str, r.var_strbar, r.var_strprime];
    for (g, w) in got.iter().zip([0.6851, 0.6857, 0.7516, 0.1219, 0.1214, 0.1206]) {
        assert!((g - w).abs() < 5e-5, "{g} vs {w}");
    }
    assert_eq!(summary.replicates, 1);

    let many = parse_params_list(r#"[{"p": [0.1, 0.2], "rho": [0, 0]}, {"p": [0.3, 0.4], "rho": [0.5, 0.5]}]"#)
        .unwrap();
    assert_eq!(experiment_rows(&config, Some(many)).unwrap().0.len(), 2);
    assert!(parse_params_list("[]").is_err());
    assert!(parse_params_list(r#"{"p": [2.0], "rho": [0]}"#).is_err());
}

#[test]
fn experiment_p_half_orders_means() {
    let mut config = ExperimentConfig::new(ExperimentMode::PHalf);
    config.base_seed = 99;
    let (_, summary) = experiment_rows(&config, None).unwrap();
    assert_eq!(summary.mean_ordered, 200);
    assert_eq!(summary.variance_ordered, 200);
}

#[test]
fn binary_experiment_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("rows.csv");
    let status = bin()
        .args(["experiment", "--mode", "rho-zero", "--replicates", "4", "--n", "3", "--seed", "1", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert_eq!(text.lines().filter(|l| l.starts_with("replicate,")).count(), 1);
    let rows = corrbern::experiment::read_rows_csv(text.as_bytes()).unwrap();
    assert_eq!(rows.len(), 4);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("rows.summary.json")).unwrap()).unwrap();
    assert_eq!(summary["spec_version"], "1.0");
    assert_eq!(summary["replicates"], 4);

    let status = bin().args(["experiment", "--n", "11"]).output().unwrap();
    assert!(!status.status.success());
    assert!(String::from_utf8_lossy(&status.stderr).contains("capacity"));
}

#[test]
fn binary_sample_then_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let params = write_params(dir.path(), &ModelParams::homogeneous(5, 0.4, 0.6).unwrap());
    let sample = dir.path().join("s.csv");
    let est = dir.path().join("e.csv");
    assert!(bin()
        .args(["sample", "--n-samples", "50", "--seed", "8", "--params-file"])
        .arg(&params)
        .arg("--out")
        .arg(&sample)
        .status()
        .unwrap()
        .success());
    assert!(bin().arg("estimate").arg(&sample).arg("--out").arg(&est).status().unwrap().success());
    let text = std::fs::read_to_string(&est).unwrap();
    assert_eq!(text.lines().next(), Some("sample_id,delta,dx,dy,dxy,dcap,str,strbar,strprime"));
    assert_eq!(text.lines().count(), 51);
}

#[test]
fn binary_degenerate() {
    let out = bin().args(["degenerate", "--mu", "0.25", "--p-values", "0.15,0.35"]).output().unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["solutions"].as_array().unwrap().len(), 2);
    assert!(v["max_abs_diff"][0][1].as_f64().unwrap() > 0.25);
    assert!(v["residuals"][1].as_f64().unwrap() < 1e-9);

    let out = bin().args(["degenerate", "--mu", "0.25", "--p-values", "0.2"]).output().unwrap();
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["solutions"].as_array().unwrap().len(), 1);
    assert_eq!(v["max_abs_diff"], serde_json::json!([[0.0]]));

    let out = bin().args(["degenerate", "--mu", "0.5", "--p-values", "0.5"]).output().unwrap();
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["residuals"][0].as_f64().unwrap() < 1e-9);

    let out = bin().args(["degenerate", "--mu", "0.25", "--p-values", "0.6"]).output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn binary_verify_fast() {
    let out = bin().args(["verify", "--level", "fast"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().all(|l| l.starts_with("PASS")));
    assert!(!bin().args(["verify", "--level", "slow"]).output().unwrap().status.success());
}
