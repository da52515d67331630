//! Downstream predictors and the training procedures compared in the
//! experiments: UF, CA, ICA, CE, CR and the representation method (OURS).

mod predictor;

pub use predictor::{
    fit, fit_counterfactual_regularized, FitConfig, LinearModel, LogisticModel, ModelKind, Predictor, Solver,
};

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Task;
use crate::repr::{CausalModel, CounterfactualSet, PathSpec, ReprError, ResolvedPath, Sample, SymmetricFn, SymmetricKind};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FairError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("normal equations are singular")]
    SingularSystem,
    #[error("training produced non-finite parameters")]
    NonFiniteLoss,
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Repr(#[from] ReprError),
}

/// Sensitive value paired with `x̌^[j]` in ICA's augmented samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IcaAttribute {
    #[default]
    Counterfactual,
    Factual,
}

/// Labels attached to generated samples for CA and ICA.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CfLabel {
    /// The observed label of the individual.
    Factual,
    /// The model's label output (thresholded at 0.5 for classification).
    #[default]
    Model,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum TrainMethod {
    Uf,
    Ca,
    Ica {
        #[serde(default)]
        attribute: IcaAttribute,
    },
    Ce,
    Cr {
        lambda: f64,
    },
    Ours {
        #[serde(default)]
        symmetric: SymmetricKind,
        #[serde(default)]
        path: Option<PathSpec>,
    },
}

impl TrainMethod {
    pub fn label(&self) -> String {
        match self {
            TrainMethod::Uf => "UF".into(),
            TrainMethod::Ca => "CA".into(),
            TrainMethod::Ica { .. } => "ICA".into(),
            TrainMethod::Ce => "CE".into(),
            TrainMethod::Cr { lambda } => format!("CR({lambda})"),
            TrainMethod::Ours { symmetric, .. } => match symmetric {
                SymmetricKind::Mean => "OURS".into(),
                k => format!("OURS({})", k.name()),
            },
        }
    }

    /// Whether the method's backend must be trained without the label.
    pub fn uses_label_free_backend(&self) -> bool {
        matches!(self, TrainMethod::Ce | TrainMethod::Ours { .. })
    }
}

/// A sample with its counterfactual set under the active path clamp.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub sample: Sample,
    pub set: CounterfactualSet,
}

pub fn prepare(model: &dyn CausalModel, samples: &[Sample], path: &ResolvedPath) -> Result<Vec<Prepared>, ReprError> {
    samples
        .iter()
        .map(|s| {
            Ok(Prepared {
                set: CounterfactualSet::build(model, s, &path.off)?,
                sample: s.clone(),
            })
        })
        .collect()
}

/// Maps a prepared sample to a method's predictor inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "space", rename_all = "snake_case")]
pub enum InputSpace {
    /// `[x, dummies of a]` with level 0 as reference.
    Raw { n_levels: usize },
    /// `[u, x at non-descendant columns]`.
    Exogenous { columns: Vec<usize> },
    Representation { symmetric: SymmetricFn, off: Vec<usize>, on: Vec<usize> },
}

fn raw(x: &[f64], a: usize, n_levels: usize) -> Vec<f64> {
    let mut v = x.to_vec();
    v.extend((1..n_levels).map(|l| if l == a { 1.0 } else { 0.0 }));
    v
}

impl InputSpace {
    /// Inputs for the member of the set at `level`.
    pub fn build(&self, p: &Prepared, level: usize) -> Result<Vec<f64>, FairError> {
        let w = &p.set.worlds[level];
        Ok(match self {
            InputSpace::Raw { n_levels } => raw(&w.x, level, *n_levels),
            InputSpace::Exogenous { columns } => {
                let mut v = p.set.latent.repr.clone();
                v.extend(columns.iter().map(|&c| w.x[c]));
                v
            }
            InputSpace::Representation { symmetric, off, on } => {
                let path = ResolvedPath {
                    off: off.clone(),
                    on: on.clone(),
                };
                p.set.represent(symmetric, &path, level)?.to_vec()
            }
        })
    }
}

/// A trained predictor and the input space it reads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedMethod {
    pub method: TrainMethod,
    pub inputs: InputSpace,
    pub predictor: Predictor,
}

impl TrainedMethod {
    pub fn predict(&self, p: &Prepared) -> Result<f64, FairError> {
        self.predictor.predict(&self.inputs.build(p, p.set.factual_level)?)
    }

    /// Prediction on the counterfactual sample at the first alternative level.
    pub fn predict_counterfactual(&self, p: &Prepared) -> Result<f64, FairError> {
        self.predictor.predict(&self.inputs.build(p, p.set.first_alternative())?)
    }

    /// Inference from a raw sample: abducts, generates and builds inputs.
    pub fn predict_sample(&self, model: &dyn CausalModel, s: &Sample, path: &ResolvedPath) -> Result<f64, FairError> {
        let p = Prepared {
            set: CounterfactualSet::build(model, s, &path.off)?,
            sample: s.clone(),
        };
        self.predict(&p)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainContext {
    pub task: Task,
    pub fit: FitConfig,
    pub cf_label: CfLabel,
    /// Clamp used when the prepared sets were built.
    pub path: ResolvedPath,
}

impl TrainContext {
    pub fn kind(&self) -> ModelKind {
        match self.task {
            Task::Regression => ModelKind::Linear,
            Task::Classification => ModelKind::Logistic,
        }
    }
}

fn matrix(rows: &[Vec<f64>]) -> Array2<f64> {
    let d = rows.first().map_or(0, Vec::len);
    Array2::from_shape_vec((rows.len(), d), rows.concat()).expect("equal row widths")
}

fn generated_label(ctx: &TrainContext, observed: Option<f64>, model: Option<f64>) -> Result<f64, FairError> {
    match ctx.cf_label {
        CfLabel::Factual => observed.ok_or(FairError::Repr(ReprError::MissingLabel)),
        CfLabel::Model => {
            let y = model.ok_or(FairError::Repr(ReprError::MissingLabel))?;
            Ok(match ctx.task {
                Task::Regression => y,
                Task::Classification => (y >= 0.5) as u8 as f64,
            })
        }
    }
}

/// Trains one method on prepared training samples. `model` is the causal
/// backend the sets were built with.
pub fn train_method(
    method: &TrainMethod,
    model: &dyn CausalModel,
    train: &[Prepared],
    ctx: &TrainContext,
) -> Result<TrainedMethod, FairError> {
    if train.is_empty() {
        return Err(FairError::EmptyTrainingSet);
    }
    let label = |p: &Prepared| p.sample.y.ok_or(FairError::Repr(ReprError::MissingLabel));
    let levels = model.n_levels();
    let raw_space = InputSpace::Raw { n_levels: levels };
    let kind = ctx.kind();
    let mut rows = Vec::new();
    let mut targets = Vec::new();
    let (inputs, predictor) = match method {
        TrainMethod::Uf | TrainMethod::Ca | TrainMethod::Ica { .. } => {
            for p in train {
                let s = &p.sample;
                let y = label(p)?;
                match method {
                    TrainMethod::Uf => {
                        rows.push(raw(&s.x, s.a, levels));
                        targets.push(y);
                    }
                    TrainMethod::Ca => {
                        for l in 0..levels {
                            let w = model.decode(&p.set.latent, l)?;
                            rows.push(raw(&w.x, l, levels));
                            targets.push(generated_label(ctx, Some(y), w.y)?);
                        }
                    }
                    TrainMethod::Ica { attribute } => {
                        rows.push(raw(&s.x, s.a, levels));
                        targets.push(y);
                        for l in p.set.alternatives() {
                            let w = model.decode(&p.set.latent, l)?;
                            let attr = match attribute {
                                IcaAttribute::Counterfactual => l,
                                IcaAttribute::Factual => s.a,
                            };
                            rows.push(raw(&w.x, attr, levels));
                            targets.push(generated_label(ctx, Some(y), w.y)?);
                        }
                    }
                    _ => unreachable!(),
                }
            }
            (raw_space, fit(kind, &matrix(&rows), &targets, &ctx.fit)?)
        }
        TrainMethod::Ce => {
            let space = InputSpace::Exogenous {
                columns: model.non_descendant_columns(),
            };
            for p in train {
                rows.push(space.build(p, p.set.factual_level)?);
                targets.push(label(p)?);
            }
            let pred = fit(kind, &matrix(&rows), &targets, &ctx.fit)?;
            (space, pred)
        }
        TrainMethod::Cr { lambda } => {
            let mut cf_rows = Vec::new();
            for p in train {
                rows.push(raw_space.build(p, p.set.factual_level)?);
                cf_rows.push(raw_space.build(p, p.set.first_alternative())?);
                targets.push(label(p)?);
            }
            let pred =
                fit_counterfactual_regularized(kind, &matrix(&rows), &targets, &matrix(&cf_rows), *lambda, &ctx.fit)?;
            (raw_space, pred)
        }
        TrainMethod::Ours { symmetric, path } => {
            let resolved = match path {
                Some(spec) => spec.resolve(model)?,
                None => ResolvedPath::all_on(model.feature_dim()),
            };
            if resolved.off != ctx.path.off {
                return Err(FairError::Config(
                    "the representation's off-path set must match the clamp the samples were prepared with".into(),
                ));
            }
            let space = InputSpace::Representation {
                symmetric: SymmetricFn::new(*symmetric, levels),
                off: resolved.off,
                on: resolved.on,
            };
            for p in train {
                rows.push(space.build(p, p.set.factual_level)?);
                targets.push(label(p)?);
            }
            let pred = fit(kind, &matrix(&rows), &targets, &ctx.fit)?;
            (space, pred)
        }
    };
    Ok(TrainedMethod {
        method: method.clone(),
        inputs,
        predictor,
    })
}
