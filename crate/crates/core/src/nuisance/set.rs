use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::lasso::{fit_lasso_cv, DEFAULT_FOLDS, DEFAULT_PENALTIES};
use super::logistic::{fit_logistic_irls, DEFAULT_MAX_ITER, DEFAULT_TOL};
use super::model::{clip_probability, Design, Link, RegressionModel, DEFAULT_EPS};
use super::ols::fit_ols;
use crate::data::{empirical_marginal, Dataset, EmpiricalDistribution, Point, Schema};
use crate::error::{Error, Result};
use crate::problem::{CaseProbability, ConstraintKind, RiskKind};
use crate::rng::{derive_key, fnv1a};

/// Floor applied to every conditional-variance evaluation.
pub const DEFAULT_SIGMA2_FLOOR: f64 = 1e-8;

/// A closed-form function of an evaluation point, for known nuisances and
/// custom weights. Not serializable.
#[derive(Clone)]
pub struct KnownFn(pub Arc<dyn Fn(&Point) -> f64 + Send + Sync>);

impl KnownFn {
    pub fn new(f: impl Fn(&Point) -> f64 + Send + Sync + 'static) -> Self {
        Self(Arc::new(f))
    }

    pub fn call(&self, z: &Point) -> f64 {
        (self.0)(z)
    }
}

impl fmt::Debug for KnownFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("KnownFn(..)")
    }
}

/// Where a fitted feature is read from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Sensitive,
    Mediator,
    Covariate(usize),
}

/// One nuisance function: either a fitted regression whose features are
/// looked up by name, or a known function.
#[derive(Debug, Clone)]
pub enum Component {
    Fitted {
        model: RegressionModel,
        sources: Vec<Source>,
    },
    Known(KnownFn),
}

impl Component {
    fn fitted(model: RegressionModel, schema: &Schema) -> Result<Self> {
        let sources = model
            .feature_names
            .iter()
            .map(|name| {
                if *name == schema.sensitive {
                    Ok(Source::Sensitive)
                } else if schema.mediator.as_deref() == Some(name.as_str()) {
                    Ok(Source::Mediator)
                } else {
                    schema
                        .covariates
                        .iter()
                        .position(|c| c == name)
                        .map(Source::Covariate)
                        .ok_or_else(|| {
                            Error::SchemaMismatch(format!("feature `{name}` not in schema"))
                        })
                }
            })
            .collect::<Result<_>>()?;
        Ok(Component::Fitted { model, sources })
    }

    /// Raw response-scale value (unclipped for logit models).
    fn eval(&self, z: &Point) -> f64 {
        match self {
            Component::Fitted { model, sources } => {
                let mut eta = model.intercept;
                for (b, s) in model.coefficients.iter().zip(sources) {
                    let v = match s {
                        Source::Sensitive => z.x,
                        Source::Mediator => z.m.unwrap_or(f64::NAN),
                        Source::Covariate(j) => z.w[*j],
                    };
                    eta += b * v;
                }
                model.respond(eta, 0.0)
            }
            Component::Known(f) => f.call(z),
        }
    }

    pub fn model(&self) -> Option<&RegressionModel> {
        match self {
            Component::Fitted { model, .. } => Some(model),
            Component::Known(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerChoice {
    /// Main-terms GLM: OLS or logistic IRLS.
    #[default]
    Glm,
    /// Cross-validated lasso with the matching link.
    Lasso,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct NuisanceConfig {
    pub risk: RiskKind,
    pub constraint: ConstraintKind,
    pub outcome_learner: LearnerChoice,
    pub propensity_learner: LearnerChoice,
    pub mediator_learner: LearnerChoice,
    pub folds: usize,
    pub n_penalties: usize,
    pub eps: f64,
    pub sigma2_floor: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
    pub case_probability: CaseProbability,
}

impl Default for NuisanceConfig {
    fn default() -> Self {
        Self {
            risk: RiskKind::MeanSquaredError,
            constraint: ConstraintKind::Ate,
            outcome_learner: LearnerChoice::Glm,
            propensity_learner: LearnerChoice::Glm,
            mediator_learner: LearnerChoice::Glm,
            folds: DEFAULT_FOLDS,
            n_penalties: DEFAULT_PENALTIES,
            eps: DEFAULT_EPS,
            sigma2_floor: DEFAULT_SIGMA2_FLOOR,
            max_iter: DEFAULT_MAX_ITER,
            tol: DEFAULT_TOL,
            seed: 0,
            case_probability: CaseProbability::Conditional,
        }
    }
}

impl NuisanceConfig {
    pub fn new(constraint: ConstraintKind, risk: RiskKind) -> Self {
        Self {
            constraint,
            risk,
            ..Self::default()
        }
    }

    pub fn with_learner(mut self, learner: LearnerChoice) -> Self {
        self.outcome_learner = learner;
        self.propensity_learner = learner;
        self.mediator_learner = learner;
        self
    }
}

/// Fitted (or known) nuisance functions plus scalar summaries.
#[derive(Debug, Clone)]
pub struct NuisanceSet {
    pub schema: Schema,
    pub psi: Component,
    /// Whether the outcome model takes the mediator as a feature.
    pub psi_uses_mediator: bool,
    pub link: Link,
    /// Model of `P(X = 1 | w)`.
    pub pi: Component,
    /// Model of `P(M = 1 | x, w)`.
    pub gamma: Option<Component>,
    pub sigma2: Option<Component>,
    /// `[P(X = 0), P(X = 1)]`.
    pub p: [f64; 2],
    /// Case probability per group, `[q(0), q(1)]`.
    pub p1: [f64; 2],
    /// Control probability per group, matching `p1`'s convention.
    pub p_controls: [f64; 2],
    pub case_probability: CaseProbability,
    pub eps: f64,
    pub sigma2_floor: f64,
    pub marginal_w: Option<EmpiricalDistribution>,
}

fn group(x: f64) -> usize {
    if x >= 0.5 {
        1
    } else {
        0
    }
}

impl NuisanceSet {
    /// Outcome model at `z`; logit-link values are clipped.
    pub fn psi(&self, z: &Point) -> f64 {
        let v = self.psi.eval(z);
        match self.link {
            Link::Identity => v,
            Link::Logit => clip_probability(v, self.eps),
        }
    }

    /// `pi(x | w)`, clipped.
    pub fn pi(&self, x: f64, w: &[f64]) -> f64 {
        let p1 = clip_probability(self.pi.eval(&Point::new(1.0, None, w)), self.eps);
        if group(x) == 1 {
            p1
        } else {
            1.0 - p1
        }
    }

    /// `gamma(m | x, w)`, clipped.
    pub fn gamma(&self, m: f64, x: f64, w: &[f64]) -> Result<f64> {
        let g = self.gamma.as_ref().ok_or(Error::MissingNuisance("gamma"))?;
        let g1 = clip_probability(g.eval(&Point::new(x, None, w)), self.eps);
        Ok(if m >= 0.5 { g1 } else { 1.0 - g1 })
    }

    /// Conditional outcome variance, floored.
    pub fn sigma2(&self, x: f64, w: &[f64]) -> Result<f64> {
        let s = self
            .sigma2
            .as_ref()
            .ok_or(Error::MissingNuisance("sigma2"))?;
        Ok(s.eval(&Point::new(x, None, w)).max(self.sigma2_floor))
    }

    pub fn p(&self, x: f64) -> f64 {
        self.p[group(x)]
    }

    pub fn p1(&self, x: f64) -> f64 {
        self.p1[group(x)]
    }

    pub fn p_controls(&self, x: f64) -> f64 {
        self.p_controls[group(x)]
    }

    pub fn has_gamma(&self) -> bool {
        self.gamma.is_some()
    }

    /// Fails when either sensitive group is (numerically) absent.
    pub fn check_groups(&self) -> Result<()> {
        for x in 0..2u8 {
            if self.p[x as usize] < self.eps {
                return Err(Error::DegeneratePropensity {
                    x,
                    value: self.p[x as usize],
                });
            }
        }
        Ok(())
    }

    /// Value of the named schema column at `z`.
    pub fn schema_value(&self, name: &str, z: &Point) -> Result<f64> {
        if name == self.schema.sensitive {
            return Ok(z.x);
        }
        if self.schema.mediator.as_deref() == Some(name) {
            return z.m.ok_or(Error::MissingMediator);
        }
        self.schema
            .covariates
            .iter()
            .position(|c| c == name)
            .map(|j| z.w[j])
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    /// Mediator levels to integrate over when evaluating the outcome model.
    pub fn mediator_levels(&self) -> &'static [Option<f64>] {
        if self.psi_uses_mediator {
            &[Some(0.0), Some(1.0)]
        } else {
            &[None]
        }
    }

    pub fn to_json(&self) -> Result<serde_json::Value> {
        Ok(serde_json::to_value(NuisanceDoc::from_set(self)?)?)
    }

    pub fn from_json(value: serde_json::Value) -> Result<Self> {
        serde_json::from_value::<NuisanceDoc>(value)?.into_set()
    }
}

/// Serialized form of a fitted [`NuisanceSet`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NuisanceDoc {
    pub schema: Schema,
    pub psi: RegressionModel,
    pub psi_uses_mediator: bool,
    pub pi: RegressionModel,
    pub gamma: Option<RegressionModel>,
    pub sigma2: Option<RegressionModel>,
    pub p: [f64; 2],
    pub p1: [f64; 2],
    pub p_controls: [f64; 2],
    pub case_probability: CaseProbability,
    pub eps: f64,
    pub sigma2_floor: f64,
}

impl NuisanceDoc {
    fn from_set(s: &NuisanceSet) -> Result<Self> {
        let need = |c: &Component, name: &str| -> Result<RegressionModel> {
            c.model().cloned().ok_or_else(|| {
                Error::Unsupported(format!(
                    "nuisance `{name}` is a known function and cannot be serialized"
                ))
            })
        };
        Ok(Self {
            schema: s.schema.clone(),
            psi: need(&s.psi, "psi")?,
            psi_uses_mediator: s.psi_uses_mediator,
            pi: need(&s.pi, "pi")?,
            gamma: s.gamma.as_ref().map(|g| need(g, "gamma")).transpose()?,
            sigma2: s.sigma2.as_ref().map(|g| need(g, "sigma2")).transpose()?,
            p: s.p,
            p1: s.p1,
            p_controls: s.p_controls,
            case_probability: s.case_probability,
            eps: s.eps,
            sigma2_floor: s.sigma2_floor,
        })
    }

    fn into_set(self) -> Result<NuisanceSet> {
        let link = self.psi.link;
        let schema = self.schema;
        Ok(NuisanceSet {
            psi: Component::fitted(self.psi, &schema)?,
            pi: Component::fitted(self.pi, &schema)?,
            gamma: self
                .gamma
                .map(|g| Component::fitted(g, &schema))
                .transpose()?,
            sigma2: self
                .sigma2
                .map(|g| Component::fitted(g, &schema))
                .transpose()?,
            schema,
            psi_uses_mediator: self.psi_uses_mediator,
            link,
            p: self.p,
            p1: self.p1,
            p_controls: self.p_controls,
            case_probability: self.case_probability,
            eps: self.eps,
            sigma2_floor: self.sigma2_floor,
            marginal_w: None,
        })
    }
}

/// Nuisance functions given in closed form (simulation truths, tests).
pub struct KnownNuisances {
    pub schema: Schema,
    pub psi: KnownFn,
    pub psi_uses_mediator: bool,
    pub link: Link,
    /// `P(X = 1 | w)`.
    pub pi1: KnownFn,
    /// `P(M = 1 | x, w)`.
    pub gamma1: Option<KnownFn>,
    pub sigma2: Option<KnownFn>,
    pub p: [f64; 2],
    pub p1: [f64; 2],
    pub p_controls: [f64; 2],
    pub marginal_w: Option<EmpiricalDistribution>,
}

impl NuisanceSet {
    pub fn from_known(k: KnownNuisances) -> Self {
        Self {
            schema: k.schema,
            psi: Component::Known(k.psi),
            psi_uses_mediator: k.psi_uses_mediator,
            link: k.link,
            pi: Component::Known(k.pi1),
            gamma: k.gamma1.map(Component::Known),
            sigma2: k.sigma2.map(Component::Known),
            p: k.p,
            p1: k.p1,
            p_controls: k.p_controls,
            case_probability: CaseProbability::Conditional,
            eps: DEFAULT_EPS,
            sigma2_floor: DEFAULT_SIGMA2_FLOOR,
            marginal_w: k.marginal_w,
        }
    }
}

fn fit_one(
    design: &Design,
    targets: &[f64],
    link: Link,
    learner: LearnerChoice,
    config: &NuisanceConfig,
    label: &str,
) -> Result<RegressionModel> {
    match (learner, link) {
        (LearnerChoice::Glm, Link::Identity) => fit_ols(design, targets),
        (LearnerChoice::Glm, Link::Logit) => {
            fit_logistic_irls(design, targets, config.max_iter, config.tol)
        }
        (LearnerChoice::Lasso, link) => fit_lasso_cv(
            design,
            targets,
            link,
            config.folds,
            config.n_penalties,
            derive_key(config.seed, fnv1a(label.as_bytes())),
        ),
    }
}

/// Fit every nuisance the configured constraint needs on `train`.
pub fn fit_nuisances(train: &Dataset, config: &NuisanceConfig) -> Result<NuisanceSet> {
    let constraint = config.constraint;
    if constraint.requires_mediator() && !train.has_mediator() {
        return Err(Error::MissingMediator);
    }
    let y = train.y()?;
    if config.risk == RiskKind::CrossEntropy {
        train.require_binary_outcome()?;
    }
    let use_mediator = train.has_mediator()
        && matches!(
            constraint,
            ConstraintKind::Nde | ConstraintKind::GeneralWeighted
        );
    let mut schema = train.schema();
    if !use_mediator {
        schema.mediator = None;
    }
    let n = train.n();
    let p_cov = train.n_covariates();
    let x = train.x();

    let mut psi_names = vec![schema.sensitive.clone()];
    if let Some(m) = &schema.mediator {
        psi_names.push(m.clone());
    }
    psi_names.extend(schema.covariates.iter().cloned());
    let med = train.m();
    let psi_design = Design::from_fn(psi_names, n, |i, out| {
        out[0] = x[i];
        let mut k = 1;
        if use_mediator {
            out[1] = med.expect("mediator")[i];
            k = 2;
        }
        out[k..].copy_from_slice(train.w(i));
    });
    let link = match config.risk {
        RiskKind::MeanSquaredError => Link::Identity,
        RiskKind::CrossEntropy => Link::Logit,
    };
    let psi_model = fit_one(&psi_design, y, link, config.outcome_learner, config, "psi")?;

    let w_design = Design::from_fn(schema.covariates.clone(), n, |i, out| {
        out.copy_from_slice(train.w(i))
    });
    let pi_model = fit_one(
        &w_design,
        x,
        Link::Logit,
        config.propensity_learner,
        config,
        "pi",
    )?;

    let mut xw_names = vec![schema.sensitive.clone()];
    xw_names.extend(schema.covariates.iter().cloned());
    let xw_design = Design::from_fn(xw_names, n, |i, out| {
        out[0] = x[i];
        out[1..=p_cov].copy_from_slice(train.w(i));
    });
    let gamma_model = match (use_mediator, med) {
        (true, Some(m)) => Some(fit_one(
            &xw_design,
            m,
            Link::Logit,
            config.mediator_learner,
            config,
            "gamma",
        )?),
        _ => None,
    };

    let psi = Component::fitted(psi_model, &schema)?;
    let fitted_psi: Vec<f64> = (0..n)
        .map(|i| {
            let z = train.point(i);
            let z = if use_mediator { z } else { z.with_m(None) };
            let v = psi.eval(&z);
            if link == Link::Logit {
                clip_probability(v, config.eps)
            } else {
                v
            }
        })
        .collect();

    let sigma2_model = if constraint == ConstraintKind::EqualizedRiskOverallMse {
        let sq: Vec<f64> = (0..n).map(|i| (y[i] - fitted_psi[i]).powi(2)).collect();
        Some(fit_ols(&xw_design, &sq)?)
    } else {
        None
    };

    let count1 = x.iter().filter(|&&v| v == 1.0).count();
    let p1_share = count1 as f64 / n as f64;
    let p = [1.0 - p1_share, p1_share];
    let mut case = [0.0; 2];
    for g in 0..2 {
        let (mut s, mut c) = (0.0, 0usize);
        for i in 0..n {
            if group(x[i]) == g {
                s += fitted_psi[i];
                c += 1;
            }
        }
        case[g] = if c > 0 { s / c as f64 } else { 0.0 };
    }
    let (p1, p_controls) = match config.case_probability {
        CaseProbability::Conditional => (case, [1.0 - case[0], 1.0 - case[1]]),
        CaseProbability::Joint => {
            let j = [case[0] * p[0], case[1] * p[1]];
            (j, [p[0] - j[0], p[1] - j[1]])
        }
    };

    Ok(NuisanceSet {
        psi,
        psi_uses_mediator: use_mediator,
        link,
        pi: Component::fitted(pi_model, &schema)?,
        gamma: gamma_model
            .map(|g| Component::fitted(g, &schema))
            .transpose()?,
        sigma2: sigma2_model
            .map(|g| Component::fitted(g, &schema))
            .transpose()?,
        schema,
        p,
        p1,
        p_controls,
        case_probability: config.case_probability,
        eps: config.eps,
        sigma2_floor: config.sigma2_floor,
        marginal_w: Some(empirical_marginal(train)),
    })
}
