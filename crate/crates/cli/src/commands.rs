//! The four subcommands. Each prints one JSON line on standard output.

use std::fs;
use std::path::Path;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use fairpath_core::data::{load_csv_unlabeled, split_indices};
use fairpath_core::paths::{
    estimate_cases_controls, estimate_constraint, estimate_constraint_observed, PredictorDoc,
};
use fairpath_core::rng::derive_key;
use fairpath_core::sim::{
    run_experiment, write_results_csv, ExperimentConfig, MonteCarloResult, ScenarioId,
    DEFAULT_ORACLE_SIZE,
};
use fairpath_core::{
    fit_nuisances, load_csv, solve, Column, ColumnRole, ConstraintKind, ConstraintSpec, Dataset,
    FairPredictor, Kappa, NuisanceSet, RiskKind,
};
use serde_json::{json, Value};

use crate::config::{read_header, resolve_roles, Settings};
use crate::failure::{core, Failure, Outcome, Tag, CONFIG, DATA, SOLVER};

const DEFAULT_PREDICTION_COLUMN: &str = "prediction";
const DEFAULT_SIZES: [usize; 3] = [100, 400, 1600];
const DEFAULT_REPS: usize = 20;

fn emit(line: Value) {
    println!("{line}");
}

/// Refuse to write over an input file.
fn guard_output(out: &Path, inputs: &[Option<&Path>]) -> Outcome {
    let same = |a: &Path, b: &Path| match (fs::canonicalize(a), fs::canonicalize(b)) {
        (Ok(a), Ok(b)) => a == b,
        _ => a == b,
    };
    if inputs.iter().flatten().any(|i| same(out, i)) {
        return Err(Failure::config(format!(
            "refusing to overwrite input file {}",
            out.display()
        )));
    }
    Ok(())
}

fn write_file(path: &Path, bytes: &[u8]) -> Outcome {
    fs::write(path, bytes).tag(DATA, || format!("writing {}", path.display()))
}

fn load_model(path: &Path) -> Outcome<FairPredictor> {
    let text = fs::read_to_string(path).tag(DATA, || format!("reading {}", path.display()))?;
    let doc: PredictorDoc =
        serde_json::from_str(&text).tag(DATA, || format!("parsing model {}", path.display()))?;
    core(FairPredictor::from_doc(doc), || {
        format!("loading model {}", path.display())
    })
}

pub fn fit(s: &Settings) -> Outcome {
    let data_path = s.data_path()?;
    let model_path = s.model_path()?;
    guard_output(model_path, &[Some(data_path)])?;
    let spec = s
        .spec()?
        .ok_or_else(|| Failure::config("--constraint is required"))?;
    let header = read_header(data_path)?;
    let roles = resolve_roles(&header, &s.roles, true, &[])?;
    let data = core(load_csv(data_path, &roles), || {
        format!("loading {}", data_path.display())
    })?;
    let eta = Arc::new(core(
        fit_nuisances(&data, &s.nuisance_config(&spec)),
        || "fitting nuisances".into(),
    )?);
    let (predictor, result) = core(solve(&spec, &eta, &data), || {
        "solving for the multiplier".into()
    })?;
    let doc = core(predictor.to_doc(), || "serializing the model".into())?;
    let mut text =
        serde_json::to_string_pretty(&doc).tag(DATA, || "serializing the model".into())?;
    text.push('\n');
    write_file(model_path, text.as_bytes())?;
    emit(json!({
        "command": "fit",
        "rows": data.n(),
        "constraint": spec.constraint,
        "risk": spec.risk,
        "lambda": result.lambda,
        "constraint_value": result.constraint_value,
        "constraint_values": result.constraint_values,
        "mu_active": result.mu_active,
        "method": result.method,
        "iterations": result.iterations,
        "second_order": result.report,
        "model": model_path,
    }));
    Ok(())
}

/// Data laid out as the model's schema expects, plus the raw records.
fn model_rows(model: &FairPredictor, path: &Path) -> Outcome<Dataset> {
    let schema = &model.eta.schema;
    let mut roles = vec![(schema.sensitive.clone(), ColumnRole::Sensitive)];
    if let Some(m) = &schema.mediator {
        roles.push((m.clone(), ColumnRole::Mediator));
    }
    roles.extend(
        schema
            .covariates
            .iter()
            .map(|c| (c.clone(), ColumnRole::Covariate)),
    );
    load_csv_unlabeled(path, &roles).map_err(|e| match e {
        fairpath_core::Error::MissingColumn(c) => Failure::new(
            DATA,
            fairpath_core::Error::SchemaMismatch(format!(
                "model expects column `{c}` which the data lacks"
            )),
        ),
        e => Failure::from(e),
    })
}

pub fn predict(s: &Settings) -> Outcome {
    let data_path = s.data_path()?;
    let model_path = s.model_path()?;
    let model = load_model(model_path)?;
    let data = model_rows(&model, data_path)?;
    let predictions = core(model.predict_rows(&data), || "evaluating the model".into())?;
    let column = s
        .prediction_column
        .as_deref()
        .unwrap_or(DEFAULT_PREDICTION_COLUMN);

    let mut reader = csv::Reader::from_path(data_path)
        .tag(DATA, || format!("opening {}", data_path.display()))?;
    let mut header = reader
        .headers()
        .tag(DATA, || "reading header".into())?
        .clone();
    if header.iter().any(|h| h == column) {
        return Err(Failure::config(format!(
            "column `{column}` already exists; pick another with --prediction-column"
        )));
    }
    header.push_field(column);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header)
        .tag(DATA, || "writing predictions".into())?;
    for (record, p) in reader.records().zip(&predictions) {
        let mut record = record.tag(DATA, || "reading rows".into())?;
        record.push_field(&p.to_string());
        w.write_record(&record)
            .tag(DATA, || "writing predictions".into())?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Failure::new(DATA, anyhow::anyhow!("{e}")))?;
    match &s.out {
        Some(out) => {
            guard_output(out, &[Some(data_path), Some(model_path)])?;
            write_file(out, &bytes)?;
            emit(json!({ "command": "predict", "rows": data.n(), "column": column, "out": out }));
        }
        None => print!("{}", String::from_utf8_lossy(&bytes)),
    }
    Ok(())
}

/// What is being audited.
enum Source {
    Predictions { column: String, values: Vec<f64> },
    Model(FairPredictor),
}

/// Plug-in value(s) on `test` with nuisances fitted on `train`.
fn audit_values(
    spec: &ConstraintSpec,
    s: &Settings,
    source: &Source,
    data: &Dataset,
    train: &[usize],
    test: &[usize],
) -> Outcome<Vec<f64>> {
    let rows = |idx: &[usize]| core(data.select_rows(idx), || "selecting rows".into());
    let needs_counterfactuals =
        matches!(spec.constraint, ConstraintKind::Ate | ConstraintKind::Nde);
    match source {
        Source::Predictions { column, values } if needs_counterfactuals => {
            // Counterfactual predictions come from a main-terms regression of
            // the audited column; an inverse-weighted residual term removes
            // the bias of that regression when the column is nonlinear.
            let surrogate = with_outcome(data, column, values)?;
            let (tr, te) = (
                core(surrogate.select_rows(train), || "selecting rows".into())?,
                core(surrogate.select_rows(test), || "selecting rows".into())?,
            );
            let mut config = s.nuisance_config(spec);
            config.risk = RiskKind::MeanSquaredError;
            let spec = ConstraintSpec {
                risk: RiskKind::MeanSquaredError,
                ..spec.clone()
            };
            let eta = Arc::new(core(fit_nuisances(&tr, &config), || {
                "fitting the audit surrogate".into()
            })?);
            let fit = FairPredictor::unconstrained(eta.clone(), spec.clone());
            let direct = core(estimate_constraint(&spec, &fit, &eta, &te), || {
                "evaluating the plug-in".into()
            })?;
            let fitted = core(fit.predict_rows(&te), || "evaluating the surrogate".into())?;
            let residuals: Vec<f64> = test
                .iter()
                .zip(&fitted)
                .map(|(&i, f)| values[i] - f)
                .collect();
            let kappa = if spec.constraint == ConstraintKind::Nde {
                Kappa::NdeWeight
            } else {
                Kappa::AteWeight
            };
            let weighted = ConstraintSpec::weighted(kappa, RiskKind::MeanSquaredError);
            let correction = core(
                estimate_constraint_observed(&weighted, &eta, &te, &residuals),
                || "evaluating the correction".into(),
            )?;
            Ok(vec![direct + correction[0]])
        }
        Source::Predictions { column, values } => {
            let te = rows(test)?;
            let eta = if data.y().is_err() && spec.constraint == ConstraintKind::GeneralWeighted {
                // The weighted plug-in needs no outcome; the audited column
                // stands in so the weight nuisances can still be fitted.
                let mut config = s.nuisance_config(spec);
                config.risk = RiskKind::MeanSquaredError;
                let tr = core(
                    with_outcome(data, column, values)?.select_rows(train),
                    || "selecting rows".into(),
                )?;
                core(fit_nuisances(&tr, &config), || "fitting nuisances".into())?
            } else {
                core(
                    fit_nuisances(&rows(train)?, &s.nuisance_config(spec)),
                    || "fitting nuisances".into(),
                )?
            };
            let p: Vec<f64> = test.iter().map(|&i| values[i]).collect();
            core(estimate_constraint_observed(spec, &eta, &te, &p), || {
                "evaluating the plug-in".into()
            })
        }
        Source::Model(model) => {
            let te = rows(test)?;
            let eta: Arc<NuisanceSet> = if data.y().is_ok() {
                Arc::new(core(
                    fit_nuisances(&rows(train)?, &s.nuisance_config(spec)),
                    || "fitting nuisances".into(),
                )?)
            } else {
                model.eta.clone()
            };
            if spec.constraint == ConstraintKind::EqualizedRiskCasesAndControls {
                Ok(core(estimate_cases_controls(model, &eta, &te), || {
                    "evaluating the plug-in".into()
                })?
                .to_vec())
            } else {
                Ok(vec![core(
                    estimate_constraint(spec, model, &eta, &te),
                    || "evaluating the plug-in".into(),
                )?])
            }
        }
    }
}

/// Copy of `data` whose outcome is the given column.
fn with_outcome(data: &Dataset, name: &str, values: &[f64]) -> Outcome<Dataset> {
    let mut columns: Vec<Column> = data
        .columns()
        .iter()
        .filter(|c| c.role != ColumnRole::Outcome)
        .cloned()
        .collect();
    columns.push(Column::new(name, ColumnRole::Outcome, values.to_vec()));
    core(Dataset::new(columns), || {
        "building the audit surrogate".into()
    })
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = if v.len() > 1 {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, sd)
}

fn scalar_or_list(v: &[f64]) -> Value {
    if v.len() == 1 {
        json!(v[0])
    } else {
        json!(v)
    }
}

pub fn audit(s: &Settings) -> Outcome {
    let data_path = s.data_path()?;
    let model = s.model.as_deref().map(load_model).transpose()?;
    let spec = match (s.spec()?, &model) {
        (Some(spec), _) => spec,
        (None, Some(m)) => {
            let mut spec = m.spec.clone();
            s.apply_overrides(&mut spec);
            spec
        }
        (None, None) => return Err(Failure::config("--constraint is required without --model")),
    };
    let header = read_header(data_path)?;
    let exclude: Vec<&str> = s.prediction_column.as_deref().into_iter().collect();
    let need_outcome = !matches!(
        spec.constraint,
        ConstraintKind::Ate | ConstraintKind::Nde | ConstraintKind::GeneralWeighted
    );
    let mut request = s.roles.clone();
    if let Some(m) = &model {
        let schema = &m.eta.schema;
        request
            .sensitive
            .get_or_insert_with(|| schema.sensitive.clone());
        if request.mediator.is_none() {
            request.mediator = schema.mediator.clone();
        }
        request
            .covariates
            .get_or_insert_with(|| schema.covariates.clone());
        if request.outcome.is_none() {
            request.outcome = schema.outcome.clone().filter(|y| header.contains(y));
        }
    }
    let roles = resolve_roles(&header, &request, need_outcome, &exclude)?;
    let data = core(load_csv_unlabeled(data_path, &roles), || {
        format!("loading {}", data_path.display())
    })?;
    let source = match (&s.prediction_column, model) {
        (Some(column), _) => {
            let sensitive = roles
                .iter()
                .find(|(_, r)| *r == ColumnRole::Sensitive)
                .expect("sensitive role")
                .0
                .clone();
            let cols = core(
                load_csv_unlabeled(
                    data_path,
                    &[
                        (sensitive, ColumnRole::Sensitive),
                        (column.clone(), ColumnRole::Covariate),
                    ],
                ),
                || format!("reading column `{column}`"),
            )?;
            let values = cols.column(column).expect("loaded column").values.clone();
            Source::Predictions {
                column: column.clone(),
                values,
            }
        }
        (None, Some(m)) => Source::Model(m),
        (None, None) => return Err(Failure::data("audit needs --prediction-column or --model")),
    };
    let all: Vec<usize> = (0..data.n()).collect();
    let value = audit_values(&spec, s, &source, &data, &all, &all)?;
    let mut line = json!({
        "command": "audit",
        "rows": data.n(),
        "constraint": spec.constraint,
        "source": match &source { Source::Predictions { column, .. } => json!({ "column": column }), Source::Model(_) => json!("model") },
        "value": scalar_or_list(&value),
    });
    if s.splits > 0 {
        let n_train = (s.train_fraction * data.n() as f64).round() as usize;
        if n_train == 0 || n_train == data.n() {
            return Err(Failure::from(fairpath_core::Error::EmptySplit {
                n: data.n(),
                fraction: s.train_fraction,
            }));
        }
        let per_split: Vec<Vec<f64>> = (0..s.splits)
            .map(|k| {
                let (train, test) = split_indices(data.n(), n_train, derive_key(s.seed, k as u64));
                audit_values(&spec, s, &source, &data, &train, &test)
            })
            .collect::<Outcome<_>>()?;
        let stats: Vec<(f64, f64)> = (0..value.len())
            .map(|j| mean_sd(&per_split.iter().map(|v| v[j]).collect::<Vec<_>>()))
            .collect();
        line["splits"] = json!({
            "count": s.splits,
            "train_fraction": s.train_fraction,
            "mean": scalar_or_list(&stats.iter().map(|t| t.0).collect::<Vec<_>>()),
            "sd": scalar_or_list(&stats.iter().map(|t| t.1).collect::<Vec<_>>()),
        });
    }
    emit(line);
    Ok(())
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    v.retain(|x| x.is_finite());
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let k = v.len();
    Some(if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    })
}

fn summary(results: &[MonteCarloResult], sizes: &[usize]) -> Vec<Value> {
    sizes
        .iter()
        .map(|&n| {
            let rows: Vec<&MonteCarloResult> = results.iter().filter(|r| r.n == n).collect();
            let ok: Vec<&&MonteCarloResult> = rows.iter().filter(|r| r.is_ok()).collect();
            json!({
                "n": n,
                "reps": rows.len(),
                "failures": rows.len() - ok.len(),
                "median_abs_constraint": median(ok.iter().map(|r| r.true_constraint.abs()).collect()),
                "median_risk": median(ok.iter().map(|r| r.true_risk).collect()),
                "optimal_risk": rows.first().map(|r| r.optimal_risk),
            })
        })
        .collect()
}

pub fn simulate(s: &Settings) -> Outcome {
    let name = s
        .scenario
        .as_deref()
        .ok_or_else(|| Failure::config("--scenario is required"))?;
    let scenario: ScenarioId = name
        .parse()
        .map_err(|e: fairpath_core::Error| Failure::new(CONFIG, e))?;
    let mut spec = scenario.spec();
    if let Some(requested) = s.spec()? {
        if requested.constraint != spec.constraint || requested.risk != spec.risk {
            return Err(Failure::config(format!(
                "scenario {scenario} fixes its own constraint and risk"
            )));
        }
    }
    s.apply_overrides(&mut spec);
    let sizes = s.n.clone().unwrap_or_else(|| DEFAULT_SIZES.to_vec());
    let config = ExperimentConfig::new(
        scenario,
        sizes.clone(),
        s.reps.unwrap_or(DEFAULT_REPS),
        s.seed,
    )
    .with_spec(spec)
    .with_oracle_size(s.oracle_n.unwrap_or(DEFAULT_ORACLE_SIZE));
    let results = run_experiment(&config).tag(SOLVER, || format!("running scenario {scenario}"))?;

    let failures = results.iter().filter(|r| !r.is_ok()).count();
    let mut sidecar = json!({
        "config": config,
        "version": env!("CARGO_PKG_VERSION"),
        "records": results.len(),
        "failures": failures,
    });
    if !s.no_timestamp {
        let secs = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        sidecar["timestamp"] = json!(secs);
    }
    let mut line = json!({
        "command": "simulate",
        "scenario": scenario,
        "records": results.len(),
        "failures": failures,
        "summary": summary(&results, &sizes),
    });
    if let Some(out) = &s.out {
        {
            guard_output(out, &[s.config.as_deref()])?;
            let side = out.with_extension("sidecar.json");
            guard_output(&side, &[s.config.as_deref()])?;
            let mut csv = Vec::new();
            core(write_results_csv(&mut csv, &results), || {
                "writing results".into()
            })?;
            write_file(out, &csv)?;
            let mut text = serde_json::to_string_pretty(&sidecar)
                .tag(DATA, || "serializing the sidecar".into())?;
            text.push('\n');
            write_file(&side, text.as_bytes())?;
            line["out"] = json!(out);
            line["sidecar"] = json!(side);
        }
    }
    emit(line);
    Ok(())
}
