//! Run configuration: JSON file merged with flags, column roles resolved
//! against the data header.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use fairpath_core::nuisance::LearnerChoice;
use fairpath_core::{
    ColumnRole, ConstraintKind, ConstraintMode, ConstraintSpec, Error, Kappa, NuisanceConfig,
    RiskKind,
};
use serde::Deserialize;

use crate::args::{parse_bound, Bound, ConstraintArg, LearnerArg, Options, RiskArg};
use crate::failure::{Failure, Outcome, Tag, CONFIG, DATA};

/// `--bound` in a config file: a number, `"none"` or `null`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum BoundValue {
    Number(f64),
    Text(String),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    data: Option<PathBuf>,
    model: Option<PathBuf>,
    out: Option<PathBuf>,
    /// Column name to role.
    columns: Option<BTreeMap<String, ColumnRole>>,
    constraint: Option<ConstraintArg>,
    risk: Option<RiskArg>,
    bound: Option<BoundValue>,
    kappa: Option<Kappa>,
    grid_points: Option<usize>,
    nuisance: Option<NuisanceConfig>,
    prediction_column: Option<String>,
    seed: Option<u64>,
    jobs: Option<usize>,
    oracle_n: Option<usize>,
    splits: Option<usize>,
    train_fraction: Option<f64>,
    scenario: Option<String>,
    n: Option<Vec<usize>>,
    reps: Option<usize>,
    no_timestamp: Option<bool>,
}

/// Flags merged over the config file.
#[derive(Debug, Clone)]
pub struct Settings {
    pub config: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub constraint: Option<ConstraintArg>,
    pub risk: Option<RiskArg>,
    pub bound: Bound,
    pub kappa: Option<Kappa>,
    pub grid_points: Option<usize>,
    pub nuisance: NuisanceConfig,
    pub roles: RoleRequest,
    pub prediction_column: Option<String>,
    pub seed: u64,
    pub jobs: Option<usize>,
    pub oracle_n: Option<usize>,
    pub splits: usize,
    pub train_fraction: f64,
    pub scenario: Option<String>,
    pub n: Option<Vec<usize>>,
    pub reps: Option<usize>,
    pub no_timestamp: bool,
}

/// Columns named by role before they are checked against a header.
#[derive(Debug, Clone, Default)]
pub struct RoleRequest {
    pub sensitive: Option<String>,
    pub outcome: Option<String>,
    pub mediator: Option<String>,
    pub covariates: Option<Vec<String>>,
}

impl Settings {
    pub fn load(o: &Options) -> Outcome<Self> {
        let file: FileConfig = match &o.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .tag(CONFIG, || format!("reading {}", path.display()))?;
                serde_json::from_str(&text).tag(CONFIG, || format!("parsing {}", path.display()))?
            }
            None => FileConfig::default(),
        };
        let bound = match (o.bound, &file.bound) {
            (Some(b), _) => b,
            (None, Some(BoundValue::Number(c))) => {
                parse_bound(&c.to_string()).map_err(Failure::config)?
            }
            (None, Some(BoundValue::Text(s))) => parse_bound(s).map_err(Failure::config)?,
            (None, None) => Bound::None,
        };
        let kappa = match &o.kappa {
            Some(s) => Some(parse_kappa(s).map_err(Failure::config)?),
            None => file.kappa,
        };
        let mut roles = file
            .columns
            .map(roles_from_map)
            .transpose()?
            .unwrap_or_default();
        roles.sensitive = o.sensitive.clone().or(roles.sensitive);
        roles.outcome = o.outcome.clone().or(roles.outcome);
        roles.mediator = o.mediator.clone().or(roles.mediator);
        roles.covariates = o.covariates.clone().or(roles.covariates);
        let seed = o.seed.or(file.seed).unwrap_or(0);
        let mut nuisance = file.nuisance.unwrap_or_default();
        if let Some(l) = o.learner {
            nuisance = nuisance.with_learner(match l {
                LearnerArg::Glm => LearnerChoice::Glm,
                LearnerArg::Lasso => LearnerChoice::Lasso,
            });
        }
        if let Some(k) = o.folds {
            nuisance.folds = k;
        }
        let train_fraction = o.train_fraction.or(file.train_fraction).unwrap_or(0.5);
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(Failure::config(format!(
                "train fraction must lie in (0, 1), got {train_fraction}"
            )));
        }
        if o.jobs.or(file.jobs) == Some(0) {
            return Err(Failure::config("--jobs must be positive"));
        }
        Ok(Self {
            config: o.config.clone(),
            data: o.data.clone().or(file.data),
            model: o.model.clone().or(file.model),
            out: o.out.clone().or(file.out),
            constraint: o.constraint.or(file.constraint),
            risk: o.risk.or(file.risk),
            bound,
            kappa,
            grid_points: o.grid_points.or(file.grid_points),
            nuisance,
            roles,
            prediction_column: o.prediction_column.clone().or(file.prediction_column),
            seed,
            jobs: o.jobs.or(file.jobs),
            oracle_n: o.oracle_n.or(file.oracle_n),
            splits: o.splits.or(file.splits).unwrap_or(0),
            train_fraction,
            scenario: o.scenario.clone().or(file.scenario),
            n: o.n.clone().or(file.n),
            reps: o.reps.or(file.reps),
            no_timestamp: o.no_timestamp || file.no_timestamp.unwrap_or(false),
        })
    }

    pub fn data_path(&self) -> Outcome<&Path> {
        self.data
            .as_deref()
            .ok_or_else(|| Failure::config("--data is required"))
    }

    pub fn model_path(&self) -> Outcome<&Path> {
        self.model
            .as_deref()
            .ok_or_else(|| Failure::config("--model is required"))
    }

    /// The constraint spec named by the flags, if any.
    pub fn spec(&self) -> Outcome<Option<ConstraintSpec>> {
        let Some(arg) = self.constraint else {
            return Ok(None);
        };
        let constraint = match arg {
            ConstraintArg::Ate => ConstraintKind::Ate,
            ConstraintArg::Nde => ConstraintKind::Nde,
            ConstraintArg::ErCases => ConstraintKind::EqualizedRiskCases,
            ConstraintArg::ErOverallMse => ConstraintKind::EqualizedRiskOverallMse,
            ConstraintArg::ErCasesControls => ConstraintKind::EqualizedRiskCasesAndControls,
            ConstraintArg::Weighted => ConstraintKind::GeneralWeighted,
        };
        let risk = match self.risk {
            Some(RiskArg::Mse) => RiskKind::MeanSquaredError,
            Some(RiskArg::Ce) => RiskKind::CrossEntropy,
            None if matches!(
                constraint,
                ConstraintKind::EqualizedRiskCases | ConstraintKind::EqualizedRiskCasesAndControls
            ) =>
            {
                RiskKind::CrossEntropy
            }
            None => RiskKind::MeanSquaredError,
        };
        let mut spec = ConstraintSpec::new(constraint, risk);
        spec.kappa = self.kappa.clone();
        self.apply_overrides(&mut spec);
        spec.validate()?;
        Ok(Some(spec))
    }

    /// Bound and grid flags applied to an existing spec.
    pub fn apply_overrides(&self, spec: &mut ConstraintSpec) {
        if let Bound::Abs(c) = self.bound {
            spec.mode = ConstraintMode::InequalityAbsBound(c);
        }
        if let Some(k) = self.grid_points {
            spec.grid.n_points = k;
        }
    }

    pub fn nuisance_config(&self, spec: &ConstraintSpec) -> NuisanceConfig {
        NuisanceConfig {
            constraint: spec.constraint,
            risk: spec.risk,
            seed: self.seed,
            ..self.nuisance.clone()
        }
    }
}

fn roles_from_map(map: BTreeMap<String, ColumnRole>) -> Outcome<RoleRequest> {
    let mut r = RoleRequest::default();
    let mut covariates = Vec::new();
    for (name, role) in map {
        let slot = match role {
            ColumnRole::Sensitive => &mut r.sensitive,
            ColumnRole::Outcome => &mut r.outcome,
            ColumnRole::Mediator => &mut r.mediator,
            ColumnRole::Covariate => {
                covariates.push(name);
                continue;
            }
        };
        if slot.replace(name).is_some() {
            return Err(Failure::config(format!(
                "config names more than one {role:?} column"
            )));
        }
    }
    if !covariates.is_empty() {
        r.covariates = Some(covariates);
    }
    Ok(r)
}

pub fn parse_kappa(s: &str) -> Result<Kappa, String> {
    let number = |t: &str| {
        t.trim()
            .parse::<f64>()
            .map_err(|_| format!("`{t}` is not a number"))
    };
    match s {
        "ate-weight" => return Ok(Kappa::AteWeight),
        "nde-weight" => return Ok(Kappa::NdeWeight),
        "contrast" => return Ok(Kappa::SensitiveContrast),
        _ => {}
    }
    if let Some(c) = s.strip_prefix("constant:") {
        return Ok(Kappa::Constant(number(c)?));
    }
    if let Some(rest) = s.strip_prefix("linear:") {
        let mut parts = rest.split(',');
        let intercept = number(parts.next().unwrap_or(""))?;
        let terms = parts
            .map(|t| {
                let (name, coef) = t
                    .split_once('=')
                    .ok_or_else(|| format!("expected `<column>=<coef>`, got `{t}`"))?;
                Ok((name.trim().to_string(), number(coef)?))
            })
            .collect::<Result<Vec<_>, String>>()?;
        return Ok(Kappa::Linear { intercept, terms });
    }
    Err(format!("unknown weight `{s}`"))
}

/// Header of a CSV file.
pub fn read_header(path: &Path) -> Outcome<Vec<String>> {
    let mut reader =
        csv::Reader::from_path(path).tag(DATA, || format!("opening {}", path.display()))?;
    let header = reader
        .headers()
        .tag(DATA, || format!("reading header of {}", path.display()))?;
    Ok(header.iter().map(str::to_string).collect())
}

/// Resolve roles against `header`, in header order.
///
/// Defaults: sensitive `x`, outcome `y` when present, mediator `m` when
/// present, covariates every other column not in `exclude`. Every named
/// column must exist.
pub fn resolve_roles(
    header: &[String],
    request: &RoleRequest,
    need_outcome: bool,
    exclude: &[&str],
) -> Outcome<Vec<(String, ColumnRole)>> {
    let has = |c: &str| header.iter().any(|h| h == c);
    let require = |c: &str| -> Outcome<String> {
        if has(c) {
            Ok(c.to_string())
        } else {
            Err(Error::MissingColumn(c.to_string()).into())
        }
    };
    let sensitive = require(request.sensitive.as_deref().unwrap_or("x"))?;
    let outcome = match &request.outcome {
        Some(y) => Some(require(y)?),
        None if need_outcome => Some(require("y")?),
        None => has("y").then(|| "y".to_string()),
    };
    let mediator = match &request.mediator {
        Some(m) => Some(require(m)?),
        None => has("m").then(|| "m".to_string()),
    };
    let mut roles: BTreeMap<String, ColumnRole> = BTreeMap::new();
    roles.insert(sensitive, ColumnRole::Sensitive);
    for (name, role) in [
        (outcome, ColumnRole::Outcome),
        (mediator, ColumnRole::Mediator),
    ] {
        if let Some(name) = name {
            if roles.insert(name.clone(), role).is_some() {
                return Err(Failure::config(format!(
                    "column `{name}` is given two roles"
                )));
            }
        }
    }
    match &request.covariates {
        Some(list) => {
            for c in list {
                let c = require(c)?;
                if roles.insert(c.clone(), ColumnRole::Covariate).is_some() {
                    return Err(Failure::config(format!("column `{c}` is given two roles")));
                }
            }
        }
        None => {
            for h in header {
                if !roles.contains_key(h) && !exclude.contains(&h.as_str()) {
                    roles.insert(h.clone(), ColumnRole::Covariate);
                }
            }
        }
    }
    Ok(header
        .iter()
        .filter_map(|h| roles.get(h).map(|r| (h.clone(), *r)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(cols: &[&str]) -> Vec<String> {
        cols.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn defaults_follow_header_order() {
        let h = header(&["w2", "x", "w1", "m", "y", "p"]);
        let roles = resolve_roles(&h, &RoleRequest::default(), true, &["p"]).unwrap();
        let names: Vec<&str> = roles.iter().map(|(n, _)| n.as_str()).collect();
        assert_eq!(names, ["w2", "x", "w1", "m", "y"]);
        assert_eq!(roles[3].1, ColumnRole::Mediator);
    }

    #[test]
    fn missing_sensitive_is_a_data_error() {
        let h = header(&["a", "y"]);
        let e = resolve_roles(&h, &RoleRequest::default(), true, &[]).unwrap_err();
        assert_eq!(e.code, DATA);
    }

    #[test]
    fn duplicate_roles_are_rejected() {
        let h = header(&["x", "y", "w"]);
        let req = RoleRequest {
            outcome: Some("x".into()),
            ..RoleRequest::default()
        };
        assert_eq!(resolve_roles(&h, &req, true, &[]).unwrap_err().code, CONFIG);
    }

    #[test]
    fn kappa_strings() {
        assert!(matches!(
            parse_kappa("contrast"),
            Ok(Kappa::SensitiveContrast)
        ));
        assert!(matches!(parse_kappa("constant:2.5"), Ok(Kappa::Constant(c)) if c == 2.5));
        match parse_kappa("linear:0.5,w1=2,w3=-1").unwrap() {
            Kappa::Linear { intercept, terms } => {
                assert_eq!(intercept, 0.5);
                assert_eq!(
                    terms,
                    vec![("w1".to_string(), 2.0), ("w3".to_string(), -1.0)]
                );
            }
            other => panic!("{other:?}"),
        }
        assert!(parse_kappa("linear:1,w1").is_err());
        assert!(parse_kappa("bogus").is_err());
    }

    #[test]
    fn bounds() {
        assert_eq!(parse_bound("none"), Ok(Bound::None));
        assert_eq!(parse_bound("0.25"), Ok(Bound::Abs(0.25)));
        assert!(parse_bound("-1").is_err());
    }
}
