//! Runs the `fairpath` binary against generated CSV files.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fairpath_core::sim::{dgp_binary, dgp_main};
use fairpath_core::{Dataset, FairPredictor};
use serde_json::Value;
use tempfile::TempDir;

fn fairpath(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fairpath"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json_line(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    assert_eq!(text.lines().count(), 1, "{text}");
    serde_json::from_str(text.trim()).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new() -> Self {
        Self {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn s(&self, name: &str) -> String {
        self.path(name).to_string_lossy().into_owned()
    }

    fn write(&self, name: &str, data: &Dataset) -> String {
        data.write_csv(std::fs::File::create(self.path(name)).unwrap())
            .unwrap();
        self.s(name)
    }
}

fn main_csv(ws: &Workspace, name: &str) -> String {
    ws.write(name, &dgp_main(600, 31))
}

fn drop_column(path: &str, column: &str, out: &Path) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().clone();
    let keep: Vec<usize> = (0..header.len())
        .filter(|&j| &header[j] != column)
        .collect();
    let mut w = csv::Writer::from_path(out).unwrap();
    w.write_record(keep.iter().map(|&j| &header[j])).unwrap();
    for rec in r.records() {
        let rec = rec.unwrap();
        w.write_record(keep.iter().map(|&j| &rec[j])).unwrap();
    }
    w.flush().unwrap();
}

fn load_model(path: &str) -> FairPredictor {
    FairPredictor::from_doc(serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap())
        .unwrap()
}

fn column(path: &str, name: &str) -> Vec<f64> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let j = r.headers().unwrap().iter().position(|h| h == name).unwrap();
    r.records()
        .map(|rec| rec.unwrap()[j].parse().unwrap())
        .collect()
}

#[test]
fn fit_ate_hits_zero_and_is_idempotent() {
    let ws = Workspace::new();
    let data = main_csv(&ws, "d.csv");
    let before = std::fs::read(&data).unwrap();
    let model = ws.s("m.json");
    let args = [
        "fit",
        "--data",
        &data,
        "--model",
        &model,
        "--constraint",
        "ate",
        "--risk",
        "mse",
    ];
    let first = fairpath(&args);
    let line = json_line(&first);
    assert!(
        line["constraint_value"].as_f64().unwrap().abs() < 1e-8,
        "{line}"
    );
    assert_eq!(line["method"], "closed_form");
    assert_eq!(line["second_order"]["determinant_sign"], "minimum");
    let bytes = std::fs::read(&model).unwrap();
    let second = fairpath(&args);
    assert_eq!(first.stdout, second.stdout);
    assert_eq!(bytes, std::fs::read(&model).unwrap());
    assert_eq!(before, std::fs::read(&data).unwrap());
}

#[test]
fn nde_without_mediator_is_a_config_error() {
    let ws = Workspace::new();
    let data = main_csv(&ws, "d.csv");
    drop_column(&data, "m", &ws.path("nom.csv"));
    let out = fairpath(&[
        "fit",
        "--data",
        &ws.s("nom.csv"),
        "--model",
        &ws.s("m.json"),
        "--constraint",
        "nde",
    ]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("mediator"));
}

#[test]
fn slack_bound_reports_inactive_multiplier() {
    let ws = Workspace::new();
    let data = main_csv(&ws, "d.csv");
    let out = fairpath(&[
        "fit",
        "--data",
        &data,
        "--model",
        &ws.s("m.json"),
        "--constraint",
        "ate",
        "--bound",
        "10",
    ]);
    let line = json_line(&out);
    assert_eq!(line["mu_active"], false);
    assert_eq!(line["lambda"][0].as_f64(), Some(0.0));
    let binding = fairpath(&[
        "fit",
        "--data",
        &data,
        "--model",
        &ws.s("b.json"),
        "--constraint",
        "ate",
        "--bound",
        "0.2",
    ]);
    let line = json_line(&binding);
    assert_eq!(line["mu_active"], true);
    assert!((line["constraint_value"].as_f64().unwrap().abs() - 0.2).abs() < 1e-9);
}

#[test]
fn predictions_match_in_process_evaluation() {
    let ws = Workspace::new();
    let data = main_csv(&ws, "d.csv");
    let model = ws.s("m.json");
    json_line(&fairpath(&[
        "fit",
        "--data",
        &data,
        "--model",
        &model,
        "--constraint",
        "nde",
    ]));
    let out = ws.s("p.csv");
    let line = json_line(&fairpath(&[
        "predict", "--data", &data, "--model", &model, "--out", &out,
    ]));
    assert_eq!(line["rows"], 600);
    let predictor = load_model(&model);
    let d = dgp_main(600, 31);
    let expected = predictor.predict_rows(&d).unwrap();
    let got = column(&out, "prediction");
    assert_eq!(got.len(), expected.len());
    for (a, b) in got.iter().zip(&expected) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn unconstrained_model_predicts_the_outcome_fit() {
    let ws = Workspace::new();
    let data = main_csv(&ws, "d.csv");
    let model = ws.s("m.json");
    json_line(&fairpath(&[
        "fit",
        "--data",
        &data,
        "--model",
        &model,
        "--constraint",
        "ate",
        "--bound",
        "50",
    ]));
    let out = ws.s("p.csv");
    json_line(&fairpath(&[
        "predict", "--data", &data, "--model", &model, "--out", &out,
    ]));
    let p = load_model(&model);
    assert!(p.is_origin());
    let d = dgp_main(600, 31).without_mediator();
    let got = column(&out, "prediction");
    for (i, g) in got.iter().enumerate() {
        assert_eq!(*g, p.eta.psi(&d.point(i)));
    }
}

#[test]
fn predict_rejects_data_missing_model_columns() {
    let ws = Workspace::new();
    let data = main_csv(&ws, "d.csv");
    let model = ws.s("m.json");
    json_line(&fairpath(&[
        "fit",
        "--data",
        &data,
        "--model",
        &model,
        "--constraint",
        "nde",
    ]));
    drop_column(&data, "m", &ws.path("nom.csv"));
    let out = fairpath(&[
        "predict",
        "--data",
        &ws.s("nom.csv"),
        "--model",
        &model,
        "--out",
        &ws.s("p.csv"),
    ]);
    assert_eq!(code(&out), 3);
}

#[test]
fn predict_refuses_to_overwrite_its_input() {
    let ws = Workspace::new();
    let data = main_csv(&ws, "d.csv");
    let model = ws.s("m.json");
    json_line(&fairpath(&[
        "fit",
        "--data",
        &data,
        "--model",
        &model,
        "--constraint",
        "ate",
    ]));
    let before = std::fs::read(&data).unwrap();
    let out = fairpath(&[
        "predict", "--data", &data, "--model", &model, "--out", &data,
    ]);
    assert_eq!(code(&out), 2);
    assert_eq!(before, std::fs::read(&data).unwrap());
}

#[test]
fn audit_of_predictions_without_sensitive_dependence_is_zero() {
    let ws = Workspace::new();
    let d = dgp_main(600, 32);
    let mut columns = d.columns().to_vec();
    let p: Vec<f64> = (0..d.n())
        .map(|i| 0.3 * d.w(i)[0] - 0.7 * d.w(i)[3] + 1.0)
        .collect();
    columns.push(fairpath_core::Column::new(
        "p",
        fairpath_core::ColumnRole::Covariate,
        p,
    ));
    let data = ws.write("d.csv", &Dataset::new(columns).unwrap());
    for constraint in ["ate", "nde"] {
        let line = json_line(&fairpath(&[
            "audit",
            "--data",
            &data,
            "--prediction-column",
            "p",
            "--constraint",
            constraint,
        ]));
        assert!(line["value"].as_f64().unwrap().abs() < 1e-10, "{line}");
    }
}

#[test]
fn audit_of_held_out_splits_stays_small() {
    let ws = Workspace::new();
    let data = ws.write("d.csv", &dgp_main(2000, 33));
    let model = ws.s("m.json");
    json_line(&fairpath(&[
        "fit",
        "--data",
        &data,
        "--model",
        &model,
        "--constraint",
        "nde",
    ]));
    let line = json_line(&fairpath(&[
        "audit", "--data", &data, "--model", &model, "--splits", "5", "--seed", "3",
    ]));
    assert!(line["value"].as_f64().unwrap().abs() < 1e-8, "{line}");
    let mean = line["splits"]["mean"].as_f64().unwrap();
    let sd = line["splits"]["sd"].as_f64().unwrap();
    assert!(mean.abs() < 0.1 && sd < 0.1, "{line}");
    let unconstrained = ws.s("u.json");
    json_line(&fairpath(&[
        "fit",
        "--data",
        &data,
        "--model",
        &unconstrained,
        "--constraint",
        "nde",
        "--bound",
        "10",
    ]));
    let raw = json_line(&fairpath(&[
        "audit",
        "--data",
        &data,
        "--model",
        &unconstrained,
        "--splits",
        "5",
        "--seed",
        "3",
    ]));
    assert!(
        raw["splits"]["mean"].as_f64().unwrap().abs() > 5.0 * mean.abs(),
        "{raw}"
    );
}

#[test]
fn audit_errors_are_data_errors() {
    let ws = Workspace::new();
    let data = main_csv(&ws, "d.csv");
    assert_eq!(
        code(&fairpath(&[
            "audit",
            "--data",
            &data,
            "--constraint",
            "ate"
        ])),
        3
    );
    drop_column(&data, "x", &ws.path("nox.csv"));
    let out = fairpath(&[
        "audit",
        "--data",
        &ws.s("nox.csv"),
        "--prediction-column",
        "y",
        "--constraint",
        "ate",
    ]);
    assert_eq!(code(&out), 3);
}

#[test]
fn equalized_risk_audit_matches_the_fit() {
    let ws = Workspace::new();
    let data = ws.write("b.csv", &dgp_binary(1600, 34));
    let model = ws.s("m.json");
    let fit = json_line(&fairpath(&[
        "fit",
        "--data",
        &data,
        "--model",
        &model,
        "--constraint",
        "er-cases",
    ]));
    assert!(
        fit["constraint_value"].as_f64().unwrap().abs() < 1e-6,
        "{fit}"
    );
    let out = ws.s("p.csv");
    json_line(&fairpath(&[
        "predict", "--data", &data, "--model", &model, "--out", &out,
    ]));
    let audit = json_line(&fairpath(&[
        "audit",
        "--data",
        &out,
        "--prediction-column",
        "prediction",
        "--constraint",
        "er-cases",
    ]));
    assert!(audit["value"].as_f64().unwrap().abs() < 1e-6, "{audit}");
    // No multiplier pair equalizes both risks on this process; the solver
    // says so with a solver exit code and writes no model.
    let pair = fairpath(&[
        "fit",
        "--data",
        &data,
        "--model",
        &ws.s("cc.json"),
        "--constraint",
        "er-cases-controls",
    ]);
    assert_eq!(code(&pair), 4);
    assert!(String::from_utf8_lossy(&pair.stderr).contains("above 1e-3"));
    assert!(!ws.path("cc.json").exists());
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let ws = Workspace::new();
    let data = main_csv(&ws, "d.csv");
    let config = ws.path("c.json");
    std::fs::write(
        &config,
        format!(
            r#"{{"data": "{data}", "model": "{}", "constraint": "ate", "bound": 0.1}}"#,
            ws.s("m.json")
        ),
    )
    .unwrap();
    let from_file = json_line(&fairpath(&["fit", "--config", &config.to_string_lossy()]));
    assert!((from_file["constraint_value"].as_f64().unwrap().abs() - 0.1).abs() < 1e-9);
    let overridden = json_line(&fairpath(&[
        "fit",
        "--config",
        &config.to_string_lossy(),
        "--bound",
        "none",
    ]));
    assert!(overridden["constraint_value"].as_f64().unwrap().abs() < 1e-8);
    std::fs::write(&config, r#"{"unknown_key": 1}"#).unwrap();
    assert_eq!(
        code(&fairpath(&["fit", "--config", &config.to_string_lossy()])),
        2
    );
}

#[test]
fn simulate_smoke_run() {
    let out = fairpath(&[
        "simulate",
        "--scenario",
        "ate-mse",
        "--n",
        "100",
        "--reps",
        "2",
        "--oracle-n",
        "10000",
    ]);
    let line = json_line(&out);
    assert_eq!(line["records"], 2);
    assert_eq!(line["failures"], 0);
}

#[test]
fn simulate_files_are_reproducible_across_job_counts() {
    let ws = Workspace::new();
    let run = |name: &str, jobs: &str| {
        let out = ws.s(name);
        json_line(&fairpath(&[
            "simulate",
            "--scenario",
            "nde-mse",
            "--n",
            "100,200",
            "--reps",
            "3",
            "--oracle-n",
            "10000",
            "--seed",
            "5",
            "--jobs",
            jobs,
            "--no-timestamp",
            "--out",
            &out,
        ]));
        (
            std::fs::read(&out).unwrap(),
            std::fs::read(ws.path(name).with_extension("sidecar.json")).unwrap(),
        )
    };
    let a = run("a.csv", "1");
    let b = run("b.csv", "3");
    assert_eq!(a, b);
    let text = String::from_utf8(a.0).unwrap();
    assert_eq!(text.lines().count(), 7);
    assert!(!String::from_utf8(a.1).unwrap().contains("timestamp"));
}

#[test]
fn simulate_rejects_unknown_scenarios() {
    assert_eq!(
        code(&fairpath(&[
            "simulate",
            "--scenario",
            "nope",
            "--reps",
            "1"
        ])),
        2
    );
    assert_eq!(code(&fairpath(&["fit", "--constraint", "nope"])), 2);
}
