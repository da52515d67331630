use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::data::SplitSpec;
use crate::fairlearn::{CfLabel, FitConfig, IcaAttribute, Solver, TrainMethod};
use crate::genmodel::{VaeFamily, VaeTrainConfig};
use crate::repr::{Abduction, PathSpec, SymmetricKind};

pub const CONFIG_FORMAT: u32 = 1;

fn config_err<T>(path: &str, message: impl Into<String>) -> Result<T, ExperimentError> {
    Err(ExperimentError::Config {
        path: path.into(),
        message: message.into(),
    })
}

fn parse_toml<T: DeserializeOwned>(text: &str, prefix: &str) -> Result<T, ExperimentError> {
    let de = toml::Deserializer::parse(text).map_err(|e| ExperimentError::Config {
        path: prefix.trim_end_matches('.').into(),
        message: e.message().to_string(),
    })?;
    serde_path_to_error::deserialize(de).map_err(|e| {
        let inner = e.path().to_string();
        let path = match (prefix, inner.as_str()) {
            ("", p) => p.to_string(),
            (pre, ".") => pre.trim_end_matches('.').to_string(),
            (pre, p) => format!("{pre}{p}"),
        };
        ExperimentError::Config {
            path,
            message: e.into_inner().message().to_string(),
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    Synthetic,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub kind: DatasetKind,
    /// Synthetic row count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Fixed generator seed; by default each run seed generates its own data.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<PathBuf>,
    /// Companion CSV of ground-truth exogenous values, one row per data row.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exogenous: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Scm,
    Cvae,
    Dcevae,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VaePreset {
    #[default]
    Default,
    LawSchool,
    Adult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    /// Built-in SCM name (`synthetic`).
    #[serde(default)]
    pub builtin: Option<String>,
    /// SCM description file.
    #[serde(default)]
    pub file: Option<PathBuf>,
    #[serde(default)]
    pub abduction: Option<Abduction>,
    #[serde(default)]
    pub preset: Option<VaePreset>,
    /// Overrides for the model trained with `Y`.
    #[serde(default)]
    pub train: Option<toml::Table>,
    /// Overrides for the model trained without `Y`.
    #[serde(default)]
    pub train_no_label: Option<toml::Table>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    /// `[train, test]` or `[train, validation, test]`.
    pub fractions: Vec<f64>,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            fractions: vec![0.8, 0.2],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Features held at their factual values (path-dependent setting).
    #[serde(default)]
    pub off_path: Vec<String>,
    #[serde(default)]
    pub cf_label: CfLabel,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitOverrides {
    #[serde(default)]
    pub solver: Option<Solver>,
    #[serde(default)]
    pub learning_rate: Option<f64>,
    #[serde(default)]
    pub epochs: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    Uf,
    Ca,
    Ica,
    Ce,
    Cr,
    Ours,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    pub name: MethodName,
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub symmetric: Option<SymmetricKind>,
    #[serde(default)]
    pub ica_attribute: Option<IcaAttribute>,
    /// Display name in reports.
    #[serde(default)]
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_bins")]
    pub density_bins: usize,
}

fn default_bins() -> usize {
    crate::metrics::DEFAULT_BINS
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            density_bins: default_bins(),
        }
    }
}

fn default_seeds() -> Vec<u64> {
    (1..=5).collect()
}

/// The experiment file as written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub format: u32,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub standardize: Option<bool>,
    pub dataset: DatasetConfig,
    pub backend: BackendConfig,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub fit: FitOverrides,
    #[serde(rename = "method", default)]
    pub methods: Vec<MethodConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ResolvedBackend {
    Scm {
        #[serde(skip_serializing_if = "Option::is_none")]
        builtin: Option<String>,
        #[serde(skip_serializing_if = "Option::is_none")]
        file: Option<PathBuf>,
        abduction: Abduction,
    },
    Vae {
        family: VaeFamily,
        full: VaeTrainConfig,
        no_label: VaeTrainConfig,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedMethod {
    pub label: String,
    pub method: TrainMethod,
}

/// A validated experiment with defaults filled in and paths made absolute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedExperiment {
    pub format: u32,
    pub seeds: Vec<u64>,
    pub standardize: bool,
    pub dataset: DatasetConfig,
    pub backend: ResolvedBackend,
    pub split: SplitConfig,
    pub scenario: ScenarioConfig,
    pub fit: FitOverrides,
    pub methods: Vec<ResolvedMethod>,
    pub density_bins: usize,
}

impl ResolvedExperiment {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("resolved config serializes")
    }

    pub fn split_spec(&self, seed: u64) -> SplitSpec {
        SplitSpec {
            fractions: self.split.fractions.clone(),
            seed,
        }
    }

    pub fn path_spec(&self) -> PathSpec {
        PathSpec::new(self.scenario.off_path.iter().cloned())
    }

    pub fn fit_config(&self, kind: crate::fairlearn::ModelKind, seed: u64) -> FitConfig {
        let mut f = FitConfig::for_kind(kind);
        if let Some(s) = self.fit.solver {
            f.solver = s;
        }
        if let Some(lr) = self.fit.learning_rate {
            f.learning_rate = lr;
        }
        if let Some(e) = self.fit.epochs {
            f.epochs = e;
        }
        f.seed = seed;
        f
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ExperimentError> {
        parse_toml(text, "")
    }

    /// Reads and resolves a config file; relative paths are taken from the
    /// file's directory.
    pub fn load(path: &Path) -> Result<ResolvedExperiment, ExperimentError> {
        let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::Config {
            path: String::new(),
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let base = if base.as_os_str().is_empty() { PathBuf::from(".") } else { base };
        Self::parse(&text)?.resolve(&base)
    }

    pub fn resolve(&self, base: &Path) -> Result<ResolvedExperiment, ExperimentError> {
        if self.format != CONFIG_FORMAT {
            return config_err("format", format!("unsupported format {}, expected {CONFIG_FORMAT}", self.format));
        }
        if self.seeds.is_empty() {
            return config_err("seeds", "at least one seed is required");
        }
        if self.seeds.iter().collect::<BTreeSet<_>>().len() != self.seeds.len() {
            return config_err("seeds", "seeds must be distinct");
        }
        let abs = |p: &PathBuf| -> PathBuf {
            let joined = if p.is_absolute() { p.clone() } else { base.join(p) };
            std::fs::canonicalize(&joined).unwrap_or(joined)
        };
        let mut dataset = self.dataset.clone();
        match dataset.kind {
            DatasetKind::Synthetic => {
                for (field, set) in [
                    ("path", dataset.path.is_some()),
                    ("schema", dataset.schema.is_some()),
                    ("exogenous", dataset.exogenous.is_some()),
                ] {
                    if set {
                        return config_err(&format!("dataset.{field}"), "not allowed for synthetic datasets");
                    }
                }
                match dataset.n {
                    None => dataset.n = Some(crate::data::SYNTHETIC_N),
                    Some(0) => return config_err("dataset.n", "must be ≥ 1"),
                    _ => {}
                }
            }
            DatasetKind::Csv => {
                if dataset.n.is_some() || dataset.seed.is_some() {
                    return config_err("dataset", "`n` and `seed` apply to synthetic datasets only");
                }
                for (field, p) in [("path", &mut dataset.path), ("schema", &mut dataset.schema)] {
                    match p {
                        Some(v) => *v = abs(v),
                        None => return config_err(&format!("dataset.{field}"), "required for csv datasets"),
                    }
                }
                if let Some(e) = &mut dataset.exogenous {
                    *e = abs(e);
                }
            }
        }
        let backend = self.resolve_backend(&abs)?;
        let is_vae = matches!(backend, ResolvedBackend::Vae { .. });
        let standardize = self.standardize.unwrap_or(is_vae);
        if standardize && !is_vae {
            return config_err("standardize", "an exact SCM is defined on raw values; standardization is unsupported");
        }
        let n_parts = self.split.fractions.len();
        if !(2..=3).contains(&n_parts) {
            return config_err("split.fractions", "expected [train, test] or [train, validation, test]");
        }
        SplitSpec {
            fractions: self.split.fractions.clone(),
            seed: 0,
        }
        .validate()
        .or_else(|e| config_err("split.fractions", e.to_string()))?;
        if let Some(lr) = self.fit.learning_rate {
            if !(lr.is_finite() && lr > 0.0) {
                return config_err("fit.learning_rate", "must be > 0");
            }
        }
        if self.fit.epochs == Some(0) {
            return config_err("fit.epochs", "must be ≥ 1");
        }
        if self.output.density_bins < 2 {
            return config_err("output.density_bins", "must be ≥ 2");
        }
        let methods = self.resolve_methods(dataset.kind)?;
        Ok(ResolvedExperiment {
            format: self.format,
            seeds: self.seeds.clone(),
            standardize,
            dataset,
            backend,
            split: self.split.clone(),
            scenario: self.scenario.clone(),
            fit: self.fit.clone(),
            methods,
            density_bins: self.output.density_bins,
        })
    }

    fn resolve_backend(&self, abs: &dyn Fn(&PathBuf) -> PathBuf) -> Result<ResolvedBackend, ExperimentError> {
        let b = &self.backend;
        match b.kind {
            BackendKind::Scm => {
                for (field, set) in [
                    ("preset", b.preset.is_some()),
                    ("train", b.train.is_some()),
                    ("train_no_label", b.train_no_label.is_some()),
                ] {
                    if set {
                        return config_err(&format!("backend.{field}"), "only VAE backends take training settings");
                    }
                }
                match (&b.builtin, &b.file) {
                    (Some(name), None) => {
                        if name != "synthetic" {
                            return config_err("backend.builtin", format!("unknown built-in SCM `{name}`"));
                        }
                    }
                    (None, Some(_)) => {}
                    _ => return config_err("backend", "set exactly one of `builtin` and `file`"),
                }
                Ok(ResolvedBackend::Scm {
                    builtin: b.builtin.clone(),
                    file: b.file.as_ref().map(abs),
                    abduction: b.abduction.unwrap_or(if b.builtin.is_some() {
                        Abduction::GroundTruth
                    } else {
                        Abduction::Additive
                    }),
                })
            }
            BackendKind::Cvae | BackendKind::Dcevae => {
                for (field, set) in [
                    ("builtin", b.builtin.is_some()),
                    ("file", b.file.is_some()),
                    ("abduction", b.abduction.is_some()),
                ] {
                    if set {
                        return config_err(&format!("backend.{field}"), "only SCM backends take this field");
                    }
                }
                let family = if b.kind == BackendKind::Cvae {
                    VaeFamily::Cvae
                } else {
                    VaeFamily::Dcevae
                };
                let preset = b.preset.unwrap_or_default();
                let base = match preset {
                    VaePreset::Default => VaeTrainConfig::new(family),
                    VaePreset::LawSchool => VaeTrainConfig::law_school(family),
                    VaePreset::Adult => VaeTrainConfig::adult(family),
                };
                let full = merge(&base, b.train.as_ref(), "backend.train")?;
                let mut no_label_base = full.without_label();
                if preset == VaePreset::Adult && family == VaeFamily::Dcevae {
                    no_label_base.w_u = 0.5;
                }
                let no_label = merge(&no_label_base, b.train_no_label.as_ref(), "backend.train_no_label")?;
                for (field, c) in [("backend.train", &full), ("backend.train_no_label", &no_label)] {
                    c.validate().or_else(|e| config_err(field, e.to_string()))?;
                }
                Ok(ResolvedBackend::Vae { family, full, no_label })
            }
        }
    }

    fn resolve_methods(&self, dataset: DatasetKind) -> Result<Vec<ResolvedMethod>, ExperimentError> {
        if self.methods.is_empty() {
            return config_err("method", "at least one [[method]] is required");
        }
        let default_lambda = match dataset {
            DatasetKind::Synthetic => 0.05,
            DatasetKind::Csv => 0.002,
        };
        let path = (!self.scenario.off_path.is_empty()).then(|| PathSpec::new(self.scenario.off_path.iter().cloned()));
        let n_cr = self.methods.iter().filter(|m| m.name == MethodName::Cr).count();
        let mut out: Vec<ResolvedMethod> = Vec::new();
        for (i, m) in self.methods.iter().enumerate() {
            let at = |f: &str| format!("method[{i}].{f}");
            let forbid = |field: &str, set: bool| -> Result<(), ExperimentError> {
                if set {
                    config_err(&at(field), format!("not used by method {:?}", m.name))
                } else {
                    Ok(())
                }
            };
            if m.name != MethodName::Cr {
                forbid("lambda", m.lambda.is_some())?;
            }
            if m.name != MethodName::Ours {
                forbid("symmetric", m.symmetric.is_some())?;
            }
            if m.name != MethodName::Ica {
                forbid("ica_attribute", m.ica_attribute.is_some())?;
            }
            let method = match m.name {
                MethodName::Uf => TrainMethod::Uf,
                MethodName::Ca => TrainMethod::Ca,
                MethodName::Ica => TrainMethod::Ica {
                    attribute: m.ica_attribute.unwrap_or_default(),
                },
                MethodName::Ce => TrainMethod::Ce,
                MethodName::Cr => {
                    let lambda = m.lambda.unwrap_or(default_lambda);
                    if !(lambda.is_finite() && lambda >= 0.0) {
                        return config_err(&at("lambda"), "must be a finite value ≥ 0");
                    }
                    TrainMethod::Cr { lambda }
                }
                MethodName::Ours => TrainMethod::Ours {
                    symmetric: m.symmetric.unwrap_or_default(),
                    path: path.clone(),
                },
            };
            let label = match (&m.label, &method) {
                (Some(l), _) => l.clone(),
                (None, TrainMethod::Cr { .. }) if n_cr == 1 => "CR".into(),
                (None, method) => method.label(),
            };
            if label.trim().is_empty() {
                return config_err(&at("label"), "must not be empty");
            }
            if out.iter().any(|o| o.label == label) {
                return config_err(&at("label"), format!("duplicate method label `{label}`"));
            }
            out.push(ResolvedMethod { label, method });
        }
        Ok(out)
    }
}

/// `base` with the keys of `overrides` replaced.
fn merge(base: &VaeTrainConfig, overrides: Option<&toml::Table>, field: &str) -> Result<VaeTrainConfig, ExperimentError> {
    let Some(o) = overrides else {
        return Ok(base.clone());
    };
    let mut table = toml::Table::try_from(base).expect("config serializes");
    for (k, v) in o {
        table.insert(k.clone(), v.clone());
    }
    parse_toml(&toml::to_string(&table).expect("table serializes"), &format!("{field}."))
}
