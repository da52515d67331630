use std::collections::BTreeMap;

use super::graph::{CausalGraph, VarKind, VariableId};
use super::model::{AdditiveEquation, Prior, Scm, StructuralEquation, Term};
use super::ScmError;

/// Incremental construction of an [`Scm`]; edges are derived from the
/// parents of each equation.
#[derive(Debug, Default)]
pub struct ScmBuilder {
    nodes: Vec<VariableId>,
    priors: BTreeMap<String, Prior>,
    equations: Vec<StructuralEquation>,
    levels: Vec<f64>,
}

impl ScmBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn exogenous(mut self, name: &str, prior: Prior) -> Self {
        self.nodes.push(VariableId::new(name, VarKind::Exogenous));
        self.priors.insert(name.to_string(), prior);
        self
    }

    pub fn sensitive(mut self, name: &str, levels: Vec<f64>) -> Self {
        self.nodes.push(VariableId::new(name, VarKind::Sensitive));
        self.levels = levels;
        self
    }

    pub fn feature(mut self, name: &str) -> Self {
        self.nodes.push(VariableId::new(name, VarKind::Feature));
        self
    }

    pub fn label(mut self, name: &str) -> Self {
        self.nodes.push(VariableId::new(name, VarKind::Label));
        self
    }

    pub fn additive(mut self, target: &str, intercept: f64, terms: Vec<Term>, noise: &str) -> Self {
        self.equations.push(StructuralEquation::additive(
            target,
            AdditiveEquation {
                intercept,
                terms,
                noise: noise.to_string(),
            },
        ));
        self
    }

    pub fn equation(mut self, eq: StructuralEquation) -> Self {
        self.equations.push(eq);
        self
    }

    pub fn build(self) -> Result<Scm, ScmError> {
        let mut edges = Vec::new();
        for eq in &self.equations {
            for p in &eq.parents {
                edges.push((p.clone(), eq.target.clone()));
            }
        }
        let graph = CausalGraph::new(self.nodes, &edges)?;
        Scm::new(graph, self.equations, self.priors, self.levels)
    }
}
