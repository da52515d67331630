//! Counterfactually fair representations.
//!
//! For a sample `(x, a)` the model abducts `u`, generates the features of
//! every other sensitive level from that same `u`, and summarises the whole
//! set `{x, x̌^[1], …}` with a symmetric function. Every member of the set
//! therefore maps to the same representation `[x_off, s(on-path block), u]`.

mod backend;
mod symmetric;

pub use backend::{Abduction, ScmBackend};
pub use symmetric::{apply_symmetric, SymmetricFn, SymmetricKind};

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Dataset, EncodedColumn};
use crate::scm::ScmError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReprError {
    #[error("symmetric function expects {expected} inputs, got {found}")]
    ArityMismatch { expected: usize, found: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid path spec: {0}")]
    InvalidPathSpec(String),
    #[error("unknown sensitive level {0}")]
    UnknownLevel(usize),
    #[error("sample carries no exogenous values")]
    MissingExogenous,
    #[error("sample carries no label but the model needs one")]
    MissingLabel,
    #[error(transparent)]
    Scm(#[from] ScmError),
    #[error("model: {0}")]
    Model(String),
}

/// One individual: encoded features, sensitive level index, optional label
/// and optional ground-truth exogenous values.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub x: Vec<f64>,
    pub a: usize,
    pub y: Option<f64>,
    pub u: Option<Vec<f64>>,
}

impl Sample {
    pub fn from_dataset(d: &Dataset, i: usize) -> Sample {
        Sample {
            x: d.x.row(i).to_vec(),
            a: d.a[i],
            y: Some(d.y[i]),
            u: d.exogenous.as_ref().map(|e| e.values.row(i).to_vec()),
        }
    }

    pub fn all(d: &Dataset) -> Vec<Sample> {
        (0..d.len()).map(|i| Sample::from_dataset(d, i)).collect()
    }
}

/// Abducted exogenous state: `full` is whatever the backend needs to
/// regenerate the sample, `repr` is the part placed in representations.
#[derive(Debug, Clone, PartialEq)]
pub struct Latent {
    pub full: Vec<f64>,
    pub repr: Vec<f64>,
}

/// Generated features and, if the model has a label equation, label.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub x: Vec<f64>,
    pub y: Option<f64>,
}

/// A causal model able to abduct and generate counterfactuals over encoded
/// feature vectors. Sensitive levels are indices `0..n_levels()`.
pub trait CausalModel: Send + Sync {
    fn n_levels(&self) -> usize;

    fn columns(&self) -> &[EncodedColumn];

    fn feature_dim(&self) -> usize {
        self.columns().iter().map(|c| c.width).sum()
    }

    fn sensitive_name(&self) -> &str;

    fn label_name(&self) -> &str;

    /// Encoded feature indices that are not descendants of the sensitive
    /// attribute.
    fn non_descendant_columns(&self) -> Vec<usize>;

    fn models_label(&self) -> bool;

    fn abduct(&self, s: &Sample) -> Result<Latent, ReprError>;

    /// Features under `do(A = level)` with the encoded indices in `clamp`
    /// held at their observed values. Features the intervention cannot
    /// reach keep their observed values.
    fn counterfactual(&self, s: &Sample, latent: &Latent, level: usize, clamp: &[usize]) -> Result<World, ReprError>;

    /// The model's own output under `do(A = level)`, without splicing
    /// observed values back in.
    fn decode(&self, latent: &Latent, level: usize) -> Result<World, ReprError>;
}

/// Features off every unfair path, by column name.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PathSpec {
    pub off_path: BTreeSet<String>,
}

impl PathSpec {
    pub fn new<I: IntoIterator<Item = S>, S: Into<String>>(names: I) -> Self {
        PathSpec {
            off_path: names.into_iter().map(Into::into).collect(),
        }
    }

    pub fn resolve(&self, model: &dyn CausalModel) -> Result<ResolvedPath, ReprError> {
        for name in &self.off_path {
            if name == model.sensitive_name() || name == model.label_name() {
                return Err(ReprError::InvalidPathSpec(format!(
                    "`{name}` is not a feature and cannot be off-path"
                )));
            }
            if !model.columns().iter().any(|c| &c.name == name) {
                return Err(ReprError::InvalidPathSpec(format!("unknown feature `{name}`")));
            }
        }
        let mut off = Vec::new();
        let mut on = Vec::new();
        for c in model.columns() {
            if self.off_path.contains(&c.name) {
                off.extend(c.range());
            } else {
                on.extend(c.range());
            }
        }
        Ok(ResolvedPath { off, on })
    }
}

/// Encoded column indices split into off-path and on-path blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedPath {
    pub off: Vec<usize>,
    pub on: Vec<usize>,
}

impl ResolvedPath {
    pub fn all_on(dim: usize) -> Self {
        ResolvedPath {
            off: vec![],
            on: (0..dim).collect(),
        }
    }
}

/// A sample together with its counterfactuals for every sensitive level,
/// all generated from one abducted `u`. `worlds[level]`; the factual slot
/// holds the observation.
#[derive(Debug, Clone, PartialEq)]
pub struct CounterfactualSet {
    pub latent: Latent,
    pub factual_level: usize,
    pub worlds: Vec<World>,
}

impl CounterfactualSet {
    pub fn build(model: &dyn CausalModel, s: &Sample, clamp: &[usize]) -> Result<Self, ReprError> {
        if s.a >= model.n_levels() {
            return Err(ReprError::UnknownLevel(s.a));
        }
        let latent = model.abduct(s)?;
        let worlds = (0..model.n_levels())
            .map(|l| {
                if l == s.a {
                    Ok(World {
                        x: s.x.clone(),
                        y: s.y,
                    })
                } else {
                    model.counterfactual(s, &latent, l, clamp)
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(CounterfactualSet {
            latent,
            factual_level: s.a,
            worlds,
        })
    }

    /// Levels other than the factual one, ascending.
    pub fn alternatives(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.worlds.len()).filter(move |&l| l != self.factual_level)
    }

    /// The first alternative level; TE is measured against it.
    pub fn first_alternative(&self) -> usize {
        self.alternatives().next().expect("at least two levels")
    }

    /// The member at `level` as a sample (`x̌`, `ǎ`), carrying the same
    /// ground-truth exogenous values as the factual one.
    pub fn member(&self, level: usize, factual: &Sample) -> Sample {
        Sample {
            x: self.worlds[level].x.clone(),
            a: level,
            y: self.worlds[level].y,
            u: factual.u.clone(),
        }
    }

    /// Representation seen from the member at `as_level`: the symmetric
    /// function receives that member first and the others after it.
    pub fn represent(&self, s: &SymmetricFn, path: &ResolvedPath, as_level: usize) -> Result<Representation, ReprError> {
        let pick = |w: &World, cols: &[usize]| -> Vec<f64> { cols.iter().map(|&c| w.x[c]).collect() };
        let mut order = vec![as_level];
        order.extend((0..self.worlds.len()).filter(|&l| l != as_level));
        let blocks: Vec<Vec<f64>> = order.iter().map(|&l| pick(&self.worlds[l], &path.on)).collect();
        Ok(Representation {
            passthrough: pick(&self.worlds[as_level], &path.off),
            summary: apply_symmetric(s, &blocks)?,
            exogenous: self.latent.repr.clone(),
        })
    }
}

/// `[passthrough, summary, exogenous]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Representation {
    pub passthrough: Vec<f64>,
    pub summary: Vec<f64>,
    pub exogenous: Vec<f64>,
}

impl Representation {
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dim());
        v.extend_from_slice(&self.passthrough);
        v.extend_from_slice(&self.summary);
        v.extend_from_slice(&self.exogenous);
        v
    }

    pub fn dim(&self) -> usize {
        self.passthrough.len() + self.summary.len() + self.exogenous.len()
    }
}

pub fn cf_representation(
    model: &dyn CausalModel,
    sample: &Sample,
    kind: SymmetricKind,
) -> Result<Representation, ReprError> {
    let set = CounterfactualSet::build(model, sample, &[])?;
    let s = SymmetricFn::new(kind, model.n_levels());
    set.represent(&s, &ResolvedPath::all_on(model.feature_dim()), sample.a)
}

/// Off-path features are clamped to their observed values while the
/// counterfactuals are generated, and passed through unsummarised.
pub fn pcf_representation(
    model: &dyn CausalModel,
    sample: &Sample,
    kind: SymmetricKind,
    path: &PathSpec,
) -> Result<Representation, ReprError> {
    let resolved = path.resolve(model)?;
    let set = CounterfactualSet::build(model, sample, &resolved.off)?;
    let s = SymmetricFn::new(kind, model.n_levels());
    set.represent(&s, &resolved, sample.a)
}
