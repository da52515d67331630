//! Structural causal models: graphs, structural equations, interventions,
//! abduction and counterfactual generation.
//!
//! Counterfactuals follow the usual abduction / action / prediction recipe.
//! Abduction is exact for additive-noise equations; other equation forms
//! need their exogenous inputs supplied (for instance from a simulator's
//! ground truth).

mod builder;
mod file;
mod graph;
mod library;
mod model;

pub use builder::ScmBuilder;
pub use file::{parse_scm_file, read_scm_file};
pub use graph::{topological_order, CausalGraph, VarKind, VariableId};
pub use library::{mediator_scm, law_school_pair, law_school_scm, random_additive_scm, synthetic_scm, LawSchoolParams};
pub use model::{
    AdditiveEquation, Assignment, DeterministicFn, EquationForm, ExogenousAssignment, Intervention, Prior, Scm,
    StructuralEquation, StructuralFn, Term,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScmError {
    #[error("cycle detected among edges {edges:?}")]
    CycleDetected { edges: Vec<(String, String)> },
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("duplicate variable `{0}`")]
    DuplicateVariable(String),
    #[error("exogenous variable `{0}` cannot have parents")]
    ExogenousWithParent(String),
    #[error("expected exactly one {kind:?} variable, found {found}")]
    RoleCount { kind: VarKind, found: usize },
    #[error("variable `{0}` is not reachable from any exogenous or sensitive variable")]
    Unreachable(String),
    #[error("no structural equation for `{0}`")]
    MissingEquation(String),
    #[error("more than one structural equation for `{0}`")]
    DuplicateEquation(String),
    #[error("exogenous variable `{0}` cannot have a structural equation")]
    EquationOnExogenous(String),
    #[error("declared parents of `{0}` do not match the graph's in-edges")]
    ParentMismatch(String),
    #[error("invalid additive equation for `{node}`: {reason}")]
    InvalidAdditive { node: String, reason: String },
    #[error("no prior for exogenous variable `{0}`")]
    MissingPrior(String),
    #[error("prior attached to endogenous variable `{0}`")]
    PriorOnEndogenous(String),
    #[error("invalid prior parameters for `{0}`")]
    InvalidPrior(String),
    #[error("sensitive levels must be at least two strictly increasing values")]
    InvalidLevels,
    #[error("value {0} is not a level of the sensitive variable")]
    UnknownLevel(f64),
    #[error("missing exogenous value for `{0}`")]
    MissingExogenous(String),
    #[error("cannot intervene on exogenous variable `{0}`")]
    InterventionOnExogenous(String),
    #[error("equation of `{0}` is not additive; its exogenous inputs cannot be abducted")]
    NonAdditiveEquation(String),
    #[error("evaluating `{node}` failed: {reason}")]
    EvaluationFailure { node: String, reason: String },
    #[error("SCM file: {0}")]
    File(String),
}
