//! Declarative model specification, read from JSON.
//!
//! Key names follow the dictionary schema used by INLA front ends, including
//! the dotted keys `scale.model`, `A.local` and `prec.intercept`; the
//! underscore spellings are accepted as aliases.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::families::Family;
use crate::gmrf::ModelKind;
use crate::priors::PriorSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub response: String,
    #[serde(default)]
    pub fixed: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub random: Vec<RandomComponent>,
    #[serde(default)]
    pub family: Family,
    /// Poisson expected counts: a column name or inline values.
    #[serde(default, rename = "E", skip_serializing_if = "Option::is_none")]
    pub e: Option<AuxSource>,
    #[serde(default, rename = "Ntrials", skip_serializing_if = "Option::is_none")]
    pub ntrials: Option<AuxSource>,
    #[serde(default)]
    pub control: ControlOptions,
    #[serde(default = "yes")]
    pub safe: bool,
    /// Directory that relative file paths are resolved against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AuxSource {
    Column(String),
    Values(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomComponent {
    pub id: String,
    pub model: ModelKind,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub hyper: BTreeMap<String, HyperSpec>,
    #[serde(default)]
    pub constr: bool,
    #[serde(default, rename = "scale.model", alias = "scale_model")]
    pub scale_model: bool,
    #[serde(default)]
    pub cyclic: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<GraphSource>,
    /// Structure matrix of a generic0 component.
    #[serde(default, rename = "Q", skip_serializing_if = "Option::is_none")]
    pub q: Option<MatrixSource>,
    /// Projection from the component onto the observations.
    #[serde(
        default,
        rename = "A.local",
        alias = "A_local",
        skip_serializing_if = "Option::is_none"
    )]
    pub a_local: Option<MatrixSource>,
    /// Number of levels; defaults to the largest index in the id column.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
}

impl RandomComponent {
    pub fn new(id: &str, model: ModelKind) -> Self {
        Self {
            id: id.into(),
            model,
            hyper: BTreeMap::new(),
            constr: false,
            scale_model: false,
            cyclic: false,
            graph: None,
            q: None,
            a_local: None,
            n: None,
        }
    }

    /// Builder helper: sets the prior of hyperparameter `name`.
    pub fn with_prior(mut self, name: &str, prior: &str, param: &[f64]) -> Self {
        self.hyper
            .insert(name.into(), HyperSpec::prior(prior, param));
        self
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub param: Vec<f64>,
    /// Starting value on the internal scale.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<f64>,
    /// Hold the hyperparameter at `initial` instead of integrating over it.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub fixed: bool,
}

impl HyperSpec {
    pub fn prior(name: &str, param: &[f64]) -> Self {
        Self {
            prior: Some(name.into()),
            param: param.to_vec(),
            ..Default::default()
        }
    }

    pub fn fixed_at(initial: f64) -> Self {
        Self {
            initial: Some(initial),
            fixed: true,
            ..Default::default()
        }
    }

    /// The parsed prior, or `None` when the default applies.
    pub fn prior_spec(&self) -> std::result::Result<Option<PriorSpec>, String> {
        self.prior
            .as_deref()
            .map(|p| PriorSpec::parse(p, &self.param))
            .transpose()
    }
}

/// Neighbourhood graph: a file path, or inline 1-based neighbour lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GraphSource {
    Path(PathBuf),
    Inline(Vec<Vec<usize>>),
}

/// Sparse matrix: a CSV path with columns `i,j,x` or inline `[i, j, x]`
/// triplets, both 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSource {
    Path(PathBuf),
    Triplets(Vec<(usize, usize, f64)>),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlOptions {
    #[serde(default)]
    pub compute: ComputeFlags,
    #[serde(default)]
    pub fixed: FixedControl,
    #[serde(default)]
    pub family: FamilyControl,
    #[serde(default)]
    pub inla: InlaControl,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComputeFlags {
    #[serde(default)]
    pub dic: bool,
    #[serde(default)]
    pub waic: bool,
    #[serde(default)]
    pub cpo: bool,
    #[serde(default)]
    pub config: bool,
    #[serde(default)]
    pub return_marginals: bool,
    #[serde(default = "yes")]
    pub mlik: bool,
}

impl Default for ComputeFlags {
    fn default() -> Self {
        Self {
            dic: false,
            waic: false,
            cpo: false,
            config: false,
            return_marginals: false,
            mlik: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedControl {
    #[serde(default = "default_fixed_prec")]
    pub prec: f64,
    #[serde(
        default = "default_fixed_prec",
        rename = "prec.intercept",
        alias = "prec_intercept"
    )]
    pub prec_intercept: f64,
}

fn default_fixed_prec() -> f64 {
    0.001
}

impl Default for FixedControl {
    fn default() -> Self {
        Self {
            prec: 0.001,
            prec_intercept: 0.001,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyControl {
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub hyper: BTreeMap<String, HyperSpec>,
}

/// Integration and optimisation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlaControl {
    /// Grid step in standardised coordinates.
    #[serde(default = "default_dz")]
    pub dz: f64,
    /// Log-density drop at which grid exploration stops.
    #[serde(
        default = "default_diff_logdens",
        rename = "diff.logdens",
        alias = "diff_logdens"
    )]
    pub diff_logdens: f64,
    #[serde(default = "default_grad_step")]
    pub grad_step: f64,
    #[serde(default = "default_hess_step")]
    pub hess_step: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_dz() -> f64 {
    0.75
}
fn default_diff_logdens() -> f64 {
    3.0
}
fn default_grad_step() -> f64 {
    0.005
}
fn default_hess_step() -> f64 {
    0.01
}
fn default_max_iter() -> usize {
    100
}

impl Default for InlaControl {
    fn default() -> Self {
        Self {
            dz: default_dz(),
            diff_logdens: default_diff_logdens(),
            grad_step: default_grad_step(),
            hess_step: default_hess_step(),
            max_iter: default_max_iter(),
        }
    }
}

impl ModelSpec {
    /// A spec with the given response and fixed terms and every other field at its default.
    pub fn new(response: &str, fixed: &[&str]) -> Self {
        Self {
            response: response.into(),
            fixed: fixed.iter().map(|s| s.to_string()).collect(),
            random: Vec::new(),
            family: Family::Gaussian,
            e: None,
            ntrials: None,
            control: ControlOptions::default(),
            safe: true,
            base_dir: None,
        }
    }

    /// Parses and validates a JSON model document.
    pub fn parse(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let spec: ModelSpec = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::spec(path, e.into_inner().to_string())
        })?;
        spec.validate()?;
        Ok(spec)
    }

    /// Reads a model file; relative paths inside it resolve against its directory.
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut spec = Self::parse(&text)?;
        spec.base_dir = path.parent().map(Path::to_path_buf);
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serialises")
    }

    pub fn resolve_path(&self, p: &Path) -> PathBuf {
        match &self.base_dir {
            Some(base) if p.is_relative() => base.join(p),
            _ => p.to_path_buf(),
        }
    }

    /// Structural checks that need no data.
    pub fn validate(&self) -> Result<()> {
        if self.response.is_empty() {
            return Err(Error::spec("response", "must name a column"));
        }
        let mut seen = std::collections::HashSet::new();
        for (k, t) in self.fixed.iter().enumerate() {
            if !seen.insert(t.as_str()) {
                return Err(Error::spec(
                    format!("fixed[{k}]"),
                    format!("term `{t}` is listed twice"),
                ));
            }
        }
        let mut ids = std::collections::HashSet::new();
        for (k, c) in self.random.iter().enumerate() {
            let at = |key: &str| format!("random[{k}].{key}");
            if !ids.insert(c.id.as_str()) {
                return Err(Error::spec(
                    at("id"),
                    format!("duplicate component id `{}`", c.id),
                ));
            }
            if c.cyclic && !matches!(c.model, ModelKind::Rw1 | ModelKind::Rw2) {
                return Err(Error::spec(
                    at("cyclic"),
                    format!("not valid for model {}", c.model.name()),
                ));
            }
            let needs_graph = matches!(c.model, ModelKind::Bym | ModelKind::Bym2);
            match (needs_graph, &c.graph) {
                (true, None) => {
                    return Err(Error::spec(
                        at("graph"),
                        format!("required for model {}", c.model.name()),
                    ))
                }
                (false, Some(_)) => {
                    return Err(Error::spec(
                        at("graph"),
                        format!("not used by model {}", c.model.name()),
                    ))
                }
                _ => {}
            }
            match (c.model == ModelKind::Generic0, &c.q) {
                (true, None) => return Err(Error::spec(at("Q"), "required for model generic0")),
                (false, Some(_)) => {
                    return Err(Error::spec(
                        at("Q"),
                        format!("not used by model {}", c.model.name()),
                    ))
                }
                _ => {}
            }
            if c.n == Some(0) {
                return Err(Error::spec(at("n"), "must be positive"));
            }
            for (name, h) in &c.hyper {
                let path = format!("random[{k}].hyper.{name}");
                let j = c.model.hyper_index(name).ok_or_else(|| {
                    Error::spec(
                        &path,
                        format!(
                            "unknown hyperparameter for {} (expected one of {:?})",
                            c.model.name(),
                            c.model.hyper_names()
                        ),
                    )
                })?;
                check_hyper(h, c.model.transforms()[j], &path)?;
            }
        }
        if self.e.is_some() && self.family != Family::Poisson {
            return Err(Error::spec(
                "E",
                "expected counts are only allowed with the poisson family",
            ));
        }
        match (self.family == Family::Binomial, &self.ntrials) {
            (true, None) => return Err(Error::spec("Ntrials", "required for the binomial family")),
            (false, Some(_)) => {
                return Err(Error::spec(
                    "Ntrials",
                    "only allowed with the binomial family",
                ))
            }
            _ => {}
        }
        let names = self.family.hyper_names();
        for (name, h) in &self.control.family.hyper {
            let path = format!("control.family.hyper.{name}");
            let ok = names.contains(&name.as_str()) || (names.len() == 1 && name == "theta1");
            if !ok {
                return Err(Error::spec(
                    &path,
                    format!(
                        "the {} family has hyperparameters {names:?}",
                        self.family.name()
                    ),
                ));
            }
            check_hyper(h, crate::priors::Transform::LogPrecision, &path)?;
        }
        let f = &self.control.fixed;
        if !(f.prec > 0.0) {
            return Err(Error::spec("control.fixed.prec", "must be positive"));
        }
        if !(f.prec_intercept > 0.0) {
            return Err(Error::spec(
                "control.fixed.prec.intercept",
                "must be positive",
            ));
        }
        let i = &self.control.inla;
        for (key, v) in [
            ("dz", i.dz),
            ("diff.logdens", i.diff_logdens),
            ("grad_step", i.grad_step),
            ("hess_step", i.hess_step),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::spec(
                    format!("control.inla.{key}"),
                    "must be positive",
                ));
            }
        }
        Ok(())
    }
}

fn check_hyper(h: &HyperSpec, t: crate::priors::Transform, path: &str) -> Result<()> {
    let spec = h
        .prior_spec()
        .map_err(|m| Error::spec(format!("{path}.prior"), m))?;
    if let Some(s) = spec {
        s.check_transform(t)
            .map_err(|m| Error::spec(format!("{path}.prior"), m))?;
    } else if !h.param.is_empty() {
        return Err(Error::spec(
            format!("{path}.param"),
            "given without a prior",
        ));
    }
    if h.fixed && h.initial.is_none() {
        return Err(Error::spec(
            format!("{path}.initial"),
            "a fixed hyperparameter needs an initial value",
        ));
    }
    if let Some(v) = h.initial {
        if !v.is_finite() {
            return Err(Error::spec(format!("{path}.initial"), "must be finite"));
        }
    }
    Ok(())
}
