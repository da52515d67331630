//! Directed acyclic causal graphs over named variables.

use std::collections::{BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::ScmError;

/// Role a variable plays in the causal model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarKind {
    Feature,
    Sensitive,
    Label,
    Exogenous,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VariableId {
    pub name: String,
    pub kind: VarKind,
}

impl VariableId {
    pub fn new(name: impl Into<String>, kind: VarKind) -> Self {
        Self {
            name: name.into(),
            kind,
        }
    }
}

/// Orders `nodes` so every parent precedes its children.
///
/// Ties are broken by declaration order, so the result is deterministic.
pub fn topological_order(
    nodes: &[VariableId],
    edges: &[(String, String)],
) -> Result<Vec<VariableId>, ScmError> {
    let index = name_index(nodes)?;
    let resolved = resolve_edges(&index, edges)?;
    let order = kahn(nodes.len(), &resolved).map_err(|remaining| cycle_error(nodes, &resolved, &remaining))?;
    Ok(order.into_iter().map(|i| nodes[i].clone()).collect())
}

fn name_index(nodes: &[VariableId]) -> Result<HashMap<String, usize>, ScmError> {
    let mut index = HashMap::with_capacity(nodes.len());
    for (i, node) in nodes.iter().enumerate() {
        if index.insert(node.name.clone(), i).is_some() {
            return Err(ScmError::DuplicateVariable(node.name.clone()));
        }
    }
    Ok(index)
}

fn resolve_edges(
    index: &HashMap<String, usize>,
    edges: &[(String, String)],
) -> Result<Vec<(usize, usize)>, ScmError> {
    edges
        .iter()
        .map(|(p, c)| {
            let pi = *index.get(p).ok_or_else(|| ScmError::UnknownVariable(p.clone()))?;
            let ci = *index.get(c).ok_or_else(|| ScmError::UnknownVariable(c.clone()))?;
            Ok((pi, ci))
        })
        .collect()
}

/// Kahn's algorithm. On failure returns the nodes that could not be ordered.
fn kahn(n: usize, edges: &[(usize, usize)]) -> Result<Vec<usize>, Vec<usize>> {
    let mut indegree = vec![0usize; n];
    let mut children = vec![Vec::new(); n];
    for &(p, c) in edges {
        indegree[c] += 1;
        children[p].push(c);
    }
    // BTreeSet gives smallest-index-first tie breaking.
    let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(next) = ready.pop_first() {
        order.push(next);
        for &c in &children[next] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.insert(c);
            }
        }
    }
    if order.len() == n {
        Ok(order)
    } else {
        Err((0..n).filter(|&i| indegree[i] > 0).collect())
    }
}

fn cycle_error(nodes: &[VariableId], edges: &[(usize, usize)], remaining: &[usize]) -> ScmError {
    let stuck: BTreeSet<usize> = remaining.iter().copied().collect();
    let offending = edges
        .iter()
        .filter(|(p, c)| stuck.contains(p) && stuck.contains(c))
        .map(|&(p, c)| (nodes[p].name.clone(), nodes[c].name.clone()))
        .collect();
    ScmError::CycleDetected { edges: offending }
}

/// A validated DAG. Parent lists keep the order in which edges were declared.
#[derive(Debug, Clone)]
pub struct CausalGraph {
    nodes: Vec<VariableId>,
    index: HashMap<String, usize>,
    edges: Vec<(usize, usize)>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    order: Vec<usize>,
}

impl CausalGraph {
    /// Builds the graph, rejecting duplicate names, unknown endpoints,
    /// cycles and exogenous nodes with parents.
    pub fn new(nodes: Vec<VariableId>, edges: &[(String, String)]) -> Result<Self, ScmError> {
        let index = name_index(&nodes)?;
        let resolved = resolve_edges(&index, edges)?;
        let mut parents = vec![Vec::new(); nodes.len()];
        let mut children = vec![Vec::new(); nodes.len()];
        for &(p, c) in &resolved {
            if parents[c].contains(&p) {
                continue;
            }
            if nodes[c].kind == VarKind::Exogenous {
                return Err(ScmError::ExogenousWithParent(nodes[c].name.clone()));
            }
            parents[c].push(p);
            children[p].push(c);
        }
        let order = kahn(nodes.len(), &resolved).map_err(|rem| cycle_error(&nodes, &resolved, &rem))?;
        Ok(Self {
            nodes,
            index,
            edges: resolved,
            parents,
            children,
            order,
        })
    }

    pub fn nodes(&self) -> &[VariableId] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn edges(&self) -> impl Iterator<Item = (&str, &str)> + '_ {
        self.edges
            .iter()
            .map(|&(p, c)| (self.nodes[p].name.as_str(), self.nodes[c].name.as_str()))
    }

    pub fn index_of(&self, name: &str) -> Result<usize, ScmError> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| ScmError::UnknownVariable(name.to_string()))
    }

    pub fn node(&self, idx: usize) -> &VariableId {
        &self.nodes[idx]
    }

    pub fn parents_of(&self, idx: usize) -> &[usize] {
        &self.parents[idx]
    }

    pub fn children_of(&self, idx: usize) -> &[usize] {
        &self.children[idx]
    }

    /// Node indices in topological order.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn topological_order(&self) -> Vec<&VariableId> {
        self.order.iter().map(|&i| &self.nodes[i]).collect()
    }

    pub fn nodes_of_kind(&self, kind: VarKind) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].kind == kind).collect()
    }

    /// Every node reachable from `v` by a directed path, excluding `v`.
    pub fn descendants(&self, v: &str) -> Result<BTreeSet<String>, ScmError> {
        let idx = self.index_of(v)?;
        Ok(self
            .descendants_of(&[idx])
            .into_iter()
            .map(|i| self.nodes[i].name.clone())
            .collect())
    }

    /// Union of descendants of `roots`, excluding the roots themselves unless
    /// one root descends from another.
    pub fn descendants_of(&self, roots: &[usize]) -> BTreeSet<usize> {
        let mut seen = BTreeSet::new();
        let mut queue: VecDeque<usize> = roots.iter().copied().collect();
        while let Some(n) = queue.pop_front() {
            for &c in &self.children[n] {
                if seen.insert(c) {
                    queue.push_back(c);
                }
            }
        }
        seen
    }

    /// Checks the role constraints a full causal model needs: one sensitive
    /// node, one label, and every endogenous node driven by an exogenous
    /// source or by the sensitive attribute.
    pub fn validate_roles(&self) -> Result<(), ScmError> {
        let labels = self.nodes_of_kind(VarKind::Label);
        if labels.len() != 1 {
            return Err(ScmError::RoleCount {
                kind: VarKind::Label,
                found: labels.len(),
            });
        }
        let sensitive = self.nodes_of_kind(VarKind::Sensitive);
        if sensitive.len() != 1 {
            return Err(ScmError::RoleCount {
                kind: VarKind::Sensitive,
                found: sensitive.len(),
            });
        }
        let mut sources = self.nodes_of_kind(VarKind::Exogenous);
        sources.extend(&sensitive);
        let reached = self.descendants_of(&sources);
        for (i, node) in self.nodes.iter().enumerate() {
            if node.kind != VarKind::Exogenous && node.kind != VarKind::Sensitive && !reached.contains(&i) {
                return Err(ScmError::Unreachable(node.name.clone()));
            }
        }
        Ok(())
    }
}
