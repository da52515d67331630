use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Bernoulli, Distribution, Normal, StandardNormal, Uniform, weighted::WeightedIndex};
use serde::{Deserialize, Serialize};

use super::graph::{CausalGraph, VarKind, VariableId};
use super::ScmError;

/// Prior distribution of an exogenous variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Prior {
    StandardNormal,
    Normal { mean: f64, std: f64 },
    Bernoulli { p: f64 },
    Uniform { low: f64, high: f64 },
    /// Level index `k` drawn with probability `probs[k]`.
    Categorical { probs: Vec<f64> },
}

impl Prior {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Prior::StandardNormal => StandardNormal.sample(rng),
            Prior::Normal { mean, std } => Normal::new(*mean, *std).expect("validated prior").sample(rng),
            Prior::Bernoulli { p } => {
                if Bernoulli::new(*p).expect("validated prior").sample(rng) {
                    1.0
                } else {
                    0.0
                }
            }
            Prior::Uniform { low, high } => Uniform::new(*low, *high).expect("validated prior").sample(rng),
            Prior::Categorical { probs } => WeightedIndex::new(probs).expect("validated prior").sample(rng) as f64,
        }
    }

    /// Prior mean; used as the point estimate for exogenous variables the
    /// observation says nothing about.
    pub fn mean(&self) -> f64 {
        match self {
            Prior::StandardNormal => 0.0,
            Prior::Normal { mean, .. } => *mean,
            Prior::Bernoulli { p } => *p,
            Prior::Uniform { low, high } => 0.5 * (low + high),
            Prior::Categorical { probs } => {
                let total: f64 = probs.iter().sum();
                probs.iter().enumerate().map(|(k, p)| k as f64 * p).sum::<f64>() / total
            }
        }
    }

    fn validate(&self, node: &str) -> Result<(), ScmError> {
        let ok = match self {
            Prior::StandardNormal => true,
            Prior::Normal { mean, std } => mean.is_finite() && std.is_finite() && *std > 0.0,
            Prior::Bernoulli { p } => (0.0..=1.0).contains(p),
            Prior::Uniform { low, high } => low.is_finite() && high.is_finite() && low < high,
            Prior::Categorical { probs } => {
                !probs.is_empty() && probs.iter().all(|p| p.is_finite() && *p >= 0.0) && probs.iter().sum::<f64>() > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(ScmError::InvalidPrior(node.to_string()))
        }
    }
}

/// One summand of an additive equation's deterministic part.
#[derive(Debug, Clone, PartialEq)]
pub enum Term {
    Linear { parent: String, coef: f64 },
    Power { parent: String, exponent: i32, coef: f64 },
    /// Offset looked up by the parent's level index; the parent must be categorical.
    Level { parent: String, effects: Vec<f64> },
}

impl Term {
    pub fn parent(&self) -> &str {
        match self {
            Term::Linear { parent, .. } | Term::Power { parent, .. } | Term::Level { parent, .. } => parent,
        }
    }
}

/// `target = intercept + Σ terms(observable parents) + noise`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdditiveEquation {
    pub intercept: f64,
    pub terms: Vec<Term>,
    pub noise: String,
}

/// A fallible structural function, e.g. a trained network.
pub trait StructuralFn: Send + Sync + fmt::Debug {
    fn eval(&self, parents: &[f64]) -> Result<f64, String>;
}

pub type DeterministicFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum EquationForm {
    Additive(AdditiveEquation),
    /// Arbitrary deterministic function of `parents` in declared order.
    Function(DeterministicFn),
    Learned(Arc<dyn StructuralFn>),
}

impl fmt::Debug for EquationForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EquationForm::Additive(eq) => f.debug_tuple("Additive").field(eq).finish(),
            EquationForm::Function(_) => f.write_str("Function(..)"),
            EquationForm::Learned(l) => f.debug_tuple("Learned").field(l).finish(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct StructuralEquation {
    pub target: String,
    /// Argument order for `Function`/`Learned`; for `Additive` the set of
    /// term parents plus the noise variable.
    pub parents: Vec<String>,
    pub form: EquationForm,
}

impl StructuralEquation {
    pub fn additive(target: impl Into<String>, eq: AdditiveEquation) -> Self {
        let mut parents: Vec<String> = Vec::new();
        for t in &eq.terms {
            if !parents.iter().any(|p| p == t.parent()) {
                parents.push(t.parent().to_string());
            }
        }
        parents.push(eq.noise.clone());
        Self {
            target: target.into(),
            parents,
            form: EquationForm::Additive(eq),
        }
    }

    pub fn function(
        target: impl Into<String>,
        parents: &[&str],
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            target: target.into(),
            parents: parents.iter().map(|p| p.to_string()).collect(),
            form: EquationForm::Function(Arc::new(f)),
        }
    }

    pub fn learned(target: impl Into<String>, parents: &[&str], f: Arc<dyn StructuralFn>) -> Self {
        Self {
            target: target.into(),
            parents: parents.iter().map(|p| p.to_string()).collect(),
            form: EquationForm::Learned(f),
        }
    }
}

/// `do(V = v)` assignments.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Intervention {
    pub assignments: BTreeMap<String, f64>,
}

impl Intervention {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn set(mut self, name: impl Into<String>, value: f64) -> Self {
        self.assignments.insert(name.into(), value);
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExogenousAssignment {
    pub values: BTreeMap<String, f64>,
}

/// Values keyed by variable name.
pub type Assignment = BTreeMap<String, f64>;

#[derive(Debug, Clone)]
enum CompiledTerm {
    Linear { parent: usize, coef: f64 },
    Power { parent: usize, exponent: i32, coef: f64 },
    Level { parent: usize, effects: Vec<f64> },
}

#[derive(Clone)]
enum Compiled {
    Additive {
        intercept: f64,
        terms: Vec<CompiledTerm>,
        noise: usize,
    },
    Function {
        parents: Vec<usize>,
        f: DeterministicFn,
    },
    Learned {
        parents: Vec<usize>,
        f: Arc<dyn StructuralFn>,
    },
}

/// Structural causal model: graph, one equation per endogenous node and one
/// prior per exogenous node.
#[derive(Clone)]
pub struct Scm {
    graph: CausalGraph,
    equations: Vec<Option<Compiled>>,
    sources: Vec<StructuralEquation>,
    priors: Vec<Option<Prior>>,
    sensitive: usize,
    label: usize,
    levels: Vec<f64>,
    exogenous: Vec<usize>,
}

impl fmt::Debug for Scm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Scm")
            .field("nodes", &self.graph.nodes())
            .field("levels", &self.levels)
            .finish_non_exhaustive()
    }
}

impl Scm {
    /// `levels` are the admissible values of the sensitive node, sorted ascending.
    pub fn new(
        graph: CausalGraph,
        equations: Vec<StructuralEquation>,
        priors: BTreeMap<String, Prior>,
        levels: Vec<f64>,
    ) -> Result<Self, ScmError> {
        graph.validate_roles()?;
        let n = graph.len();
        let sensitive = graph.nodes_of_kind(VarKind::Sensitive)[0];
        let label = graph.nodes_of_kind(VarKind::Label)[0];

        if levels.len() < 2 || levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ScmError::InvalidLevels);
        }

        let mut prior_slots: Vec<Option<Prior>> = vec![None; n];
        for (name, prior) in priors {
            let idx = graph.index_of(&name)?;
            if graph.node(idx).kind != VarKind::Exogenous {
                return Err(ScmError::PriorOnEndogenous(name));
            }
            prior.validate(&name)?;
            prior_slots[idx] = Some(prior);
        }
        let exogenous = graph.nodes_of_kind(VarKind::Exogenous);
        for &e in &exogenous {
            if prior_slots[e].is_none() {
                return Err(ScmError::MissingPrior(graph.node(e).name.clone()));
            }
        }

        let mut compiled: Vec<Option<Compiled>> = vec![None; n];
        for eq in &equations {
            let target = graph.index_of(&eq.target)?;
            if graph.node(target).kind == VarKind::Exogenous {
                return Err(ScmError::EquationOnExogenous(eq.target.clone()));
            }
            if compiled[target].is_some() {
                return Err(ScmError::DuplicateEquation(eq.target.clone()));
            }
            let mut declared: Vec<usize> = eq
                .parents
                .iter()
                .map(|p| graph.index_of(p))
                .collect::<Result<_, _>>()?;
            let mut in_edges = graph.parents_of(target).to_vec();
            declared.sort_unstable();
            declared.dedup();
            in_edges.sort_unstable();
            if declared != in_edges {
                return Err(ScmError::ParentMismatch(eq.target.clone()));
            }
            compiled[target] = Some(compile(&graph, eq, sensitive, levels.len())?);
        }
        for i in 0..n {
            if graph.node(i).kind != VarKind::Exogenous && compiled[i].is_none() {
                return Err(ScmError::MissingEquation(graph.node(i).name.clone()));
            }
        }

        Ok(Self {
            graph,
            equations: compiled,
            sources: equations,
            priors: prior_slots,
            sensitive,
            label,
            levels,
            exogenous,
        })
    }

    pub fn graph(&self) -> &CausalGraph {
        &self.graph
    }

    pub fn equations(&self) -> &[StructuralEquation] {
        &self.sources
    }

    pub fn prior(&self, idx: usize) -> Option<&Prior> {
        self.priors[idx].as_ref()
    }

    pub fn sensitive(&self) -> usize {
        self.sensitive
    }

    pub fn sensitive_name(&self) -> &str {
        &self.graph.node(self.sensitive).name
    }

    pub fn label(&self) -> usize {
        self.label
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    /// Exogenous node indices in declaration order.
    pub fn exogenous(&self) -> &[usize] {
        &self.exogenous
    }

    pub fn features(&self) -> Vec<usize> {
        self.graph.nodes_of_kind(VarKind::Feature)
    }

    pub fn level_index(&self, value: f64) -> Result<usize, ScmError> {
        self.levels
            .iter()
            .position(|&l| l == value)
            .ok_or(ScmError::UnknownLevel(value))
    }

    /// Whether the equation of `idx` is additive in a single noise term.
    pub fn is_additive(&self, idx: usize) -> bool {
        matches!(self.equations[idx], Some(Compiled::Additive { .. }))
    }

    /// Draws one exogenous assignment from the priors, as a node-indexed vector.
    pub fn sample_exogenous<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut u = vec![0.0; self.graph.len()];
        for &e in &self.exogenous {
            u[e] = self.priors[e].as_ref().expect("validated").sample(rng);
        }
        u
    }

    /// Evaluates every node in topological order. `values` is node-indexed;
    /// exogenous slots must be filled, other slots are overwritten.
    /// `interventions` pins nodes to fixed values.
    pub fn simulate_into(&self, values: &mut [f64], interventions: &[(usize, f64)]) -> Result<(), ScmError> {
        for &i in self.graph.order() {
            if let Some(&(_, v)) = interventions.iter().find(|(n, _)| *n == i) {
                values[i] = v;
                continue;
            }
            if let Some(eq) = &self.equations[i] {
                values[i] = self.eval(i, eq, values)?;
            }
        }
        Ok(())
    }

    fn eval(&self, node: usize, eq: &Compiled, values: &[f64]) -> Result<f64, ScmError> {
        match eq {
            Compiled::Additive { intercept, terms, noise } => {
                Ok(self.deterministic_part(*intercept, terms, values)? + values[*noise])
            }
            Compiled::Function { parents, f } => {
                let args: Vec<f64> = parents.iter().map(|&p| values[p]).collect();
                Ok(f(&args))
            }
            Compiled::Learned { parents, f } => {
                let args: Vec<f64> = parents.iter().map(|&p| values[p]).collect();
                f.eval(&args).map_err(|reason| ScmError::EvaluationFailure {
                    node: self.graph.node(node).name.clone(),
                    reason,
                })
            }
        }
    }

    fn deterministic_part(&self, intercept: f64, terms: &[CompiledTerm], values: &[f64]) -> Result<f64, ScmError> {
        let mut acc = intercept;
        for t in terms {
            acc += match t {
                CompiledTerm::Linear { parent, coef } => coef * values[*parent],
                CompiledTerm::Power { parent, exponent, coef } => coef * values[*parent].powi(*exponent),
                CompiledTerm::Level { parent, effects } => effects[self.level_index(values[*parent])?],
            };
        }
        Ok(acc)
    }

    /// Fills exogenous slots of a node-indexed vector from an assignment.
    pub fn exogenous_vector(&self, u: &ExogenousAssignment) -> Result<Vec<f64>, ScmError> {
        let mut values = vec![0.0; self.graph.len()];
        for &e in &self.exogenous {
            let name = &self.graph.node(e).name;
            values[e] = *u.values.get(name).ok_or_else(|| ScmError::MissingExogenous(name.clone()))?;
        }
        Ok(values)
    }

    fn resolve_intervention(&self, iv: &Intervention) -> Result<Vec<(usize, f64)>, ScmError> {
        iv.assignments
            .iter()
            .map(|(name, &v)| {
                let idx = self.graph.index_of(name)?;
                if self.graph.node(idx).kind == VarKind::Exogenous {
                    return Err(ScmError::InterventionOnExogenous(name.clone()));
                }
                if idx == self.sensitive {
                    self.level_index(v)?;
                }
                Ok((idx, v))
            })
            .collect()
    }

    /// Values of every node under `iv` given the exogenous assignment.
    pub fn simulate(&self, u: &ExogenousAssignment, iv: &Intervention) -> Result<Assignment, ScmError> {
        let mut values = self.exogenous_vector(u)?;
        let pins = self.resolve_intervention(iv)?;
        self.simulate_into(&mut values, &pins)?;
        Ok(self.to_assignment(&values))
    }

    pub fn to_assignment(&self, values: &[f64]) -> Assignment {
        self.graph
            .nodes()
            .iter()
            .zip(values)
            .map(|(n, &v)| (n.name.clone(), v))
            .collect()
    }

    /// Point abduction for additive models: each observed additive node
    /// yields `noise = observed - g(parents)`.
    pub fn abduct_additive(&self, observation: &Assignment) -> Result<ExogenousAssignment, ScmError> {
        let obs = self.observation_vector(observation)?;
        let known = vec![None; self.graph.len()];
        let values = self.abduct_vector(&obs, &known)?;
        Ok(ExogenousAssignment {
            values: self
                .exogenous
                .iter()
                .map(|&e| (self.graph.node(e).name.clone(), values[e]))
                .collect(),
        })
    }

    pub fn observation_vector(&self, observation: &Assignment) -> Result<Vec<Option<f64>>, ScmError> {
        let mut obs = vec![None; self.graph.len()];
        for (name, &v) in observation {
            let idx = self.graph.index_of(name)?;
            if self.graph.node(idx).kind != VarKind::Exogenous {
                obs[idx] = Some(v);
            }
        }
        Ok(obs)
    }

    /// Abduction over node-indexed vectors. `known` supplies exogenous values
    /// that are already available (e.g. simulation ground truth); the rest are
    /// recovered from additive equations of observed nodes, or set to their
    /// prior mean when nothing observed depends on them.
    ///
    /// Returns a node-indexed vector whose exogenous slots hold the
    /// abducted values and whose endogenous slots hold observed or
    /// reconstructed values.
    pub fn abduct_vector(&self, obs: &[Option<f64>], known: &[Option<f64>]) -> Result<Vec<f64>, ScmError> {
        let n = self.graph.len();
        let mut values = vec![0.0; n];
        let mut resolved = vec![false; n];
        for &e in &self.exogenous {
            if let Some(v) = known[e] {
                values[e] = v;
                resolved[e] = true;
            }
        }
        for &i in self.graph.order() {
            let Some(eq) = &self.equations[i] else { continue };
            match (eq, obs[i]) {
                (Compiled::Additive { intercept, terms, noise }, Some(x)) => {
                    if !resolved[*noise] {
                        values[*noise] = x - self.deterministic_part(*intercept, terms, &values)?;
                        resolved[*noise] = true;
                    }
                    values[i] = x;
                }
                (Compiled::Function { parents, .. } | Compiled::Learned { parents, .. }, Some(x)) => {
                    if parents
                        .iter()
                        .any(|&p| self.graph.node(p).kind == VarKind::Exogenous && !resolved[p])
                    {
                        return Err(ScmError::NonAdditiveEquation(self.graph.node(i).name.clone()));
                    }
                    values[i] = x;
                }
                (_, None) => {
                    for &p in self.graph.parents_of(i) {
                        if self.graph.node(p).kind == VarKind::Exogenous && !resolved[p] {
                            values[p] = self.priors[p].as_ref().expect("validated").mean();
                            resolved[p] = true;
                        }
                    }
                    values[i] = self.eval(i, eq, &values)?;
                }
            }
        }
        for &e in &self.exogenous {
            if !resolved[e] {
                values[e] = self.priors[e].as_ref().expect("validated").mean();
            }
        }
        Ok(values)
    }

    /// Counterfactual observables under `do(A = a_cf)`.
    ///
    /// Equals `simulate(u, do(A = a_cf))`, except that nodes which are not
    /// descendants of `A` keep their observed values.
    pub fn counterfactual(
        &self,
        observation: &Assignment,
        u: &ExogenousAssignment,
        a_cf: f64,
    ) -> Result<Assignment, ScmError> {
        let iv = Intervention::none().set(self.sensitive_name().to_string(), a_cf);
        self.counterfactual_under(observation, u, &iv)
    }

    /// Counterfactual under an arbitrary intervention (e.g. sensitive
    /// attribute plus clamped off-path features).
    pub fn counterfactual_under(
        &self,
        observation: &Assignment,
        u: &ExogenousAssignment,
        iv: &Intervention,
    ) -> Result<Assignment, ScmError> {
        let obs = self.observation_vector(observation)?;
        let mut values = self.exogenous_vector(u)?;
        let pins = self.resolve_intervention(iv)?;
        self.counterfactual_vector(&obs, &mut values, &pins)?;
        Ok(self
            .graph
            .nodes()
            .iter()
            .zip(&values)
            .filter(|(n, _)| n.kind != VarKind::Exogenous)
            .map(|(n, &v)| (n.name.clone(), v))
            .collect())
    }

    /// Vector form of [`Scm::counterfactual_under`]; `values` carries the
    /// exogenous assignment in and the counterfactual world out.
    pub fn counterfactual_vector(
        &self,
        obs: &[Option<f64>],
        values: &mut [f64],
        pins: &[(usize, f64)],
    ) -> Result<(), ScmError> {
        self.simulate_into(values, pins)?;
        let roots: Vec<usize> = pins.iter().map(|&(i, _)| i).collect();
        let affected = self.graph.descendants_of(&roots);
        for i in 0..values.len() {
            if pins.iter().any(|&(p, _)| p == i) || affected.contains(&i) {
                continue;
            }
            if let Some(x) = obs[i] {
                values[i] = x;
            }
        }
        Ok(())
    }

    pub fn variable(&self, idx: usize) -> &VariableId {
        self.graph.node(idx)
    }
}

fn compile(
    graph: &CausalGraph,
    eq: &StructuralEquation,
    sensitive: usize,
    n_levels: usize,
) -> Result<Compiled, ScmError> {
    let name = &eq.target;
    match &eq.form {
        EquationForm::Additive(add) => {
            let noise = graph.index_of(&add.noise)?;
            if graph.node(noise).kind != VarKind::Exogenous {
                return Err(ScmError::InvalidAdditive {
                    node: name.clone(),
                    reason: format!("noise `{}` is not exogenous", add.noise),
                });
            }
            if graph.children_of(noise).len() != 1 {
                return Err(ScmError::InvalidAdditive {
                    node: name.clone(),
                    reason: format!("noise `{}` must feed only this node", add.noise),
                });
            }
            let mut terms = Vec::with_capacity(add.terms.len());
            for t in &add.terms {
                let parent = graph.index_of(t.parent())?;
                if graph.node(parent).kind == VarKind::Exogenous {
                    return Err(ScmError::InvalidAdditive {
                        node: name.clone(),
                        reason: format!("term parent `{}` is exogenous", t.parent()),
                    });
                }
                terms.push(match t {
                    Term::Linear { coef, .. } => CompiledTerm::Linear { parent, coef: *coef },
                    Term::Power { exponent, coef, .. } => CompiledTerm::Power {
                        parent,
                        exponent: *exponent,
                        coef: *coef,
                    },
                    Term::Level { effects, .. } => {
                        if parent != sensitive || effects.len() != n_levels {
                            return Err(ScmError::InvalidAdditive {
                                node: name.clone(),
                                reason: "level effects need the sensitive parent and one effect per level".into(),
                            });
                        }
                        CompiledTerm::Level {
                            parent,
                            effects: effects.clone(),
                        }
                    }
                });
            }
            Ok(Compiled::Additive {
                intercept: add.intercept,
                terms,
                noise,
            })
        }
        EquationForm::Function(f) => Ok(Compiled::Function {
            parents: resolve(graph, &eq.parents)?,
            f: f.clone(),
        }),
        EquationForm::Learned(f) => Ok(Compiled::Learned {
            parents: resolve(graph, &eq.parents)?,
            f: f.clone(),
        }),
    }
}

fn resolve(graph: &CausalGraph, names: &[String]) -> Result<Vec<usize>, ScmError> {
    names.iter().map(|n| graph.index_of(n)).collect()
}
