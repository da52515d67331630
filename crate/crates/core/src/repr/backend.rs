use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{CausalModel, Latent, ReprError, Sample, World};
use crate::data::{Encoding, EncodedColumn, Group};
use crate::scm::{Scm, VarKind};

/// How exogenous values are recovered from a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Abduction {
    /// `noise = observed − g(parents)` for additive equations.
    Additive,
    /// Exogenous values travel with the sample (simulation ground truth);
    /// anything missing falls back to additive recovery.
    GroundTruth,
}

/// An exact [`Scm`] exposed through the [`CausalModel`] interface. Feature
/// columns map one-to-one onto the model's feature nodes.
#[derive(Debug, Clone)]
pub struct ScmBackend {
    scm: Scm,
    abduction: Abduction,
    columns: Vec<EncodedColumn>,
    /// Node of each feature column.
    nodes: Vec<usize>,
    /// Node of each entry in `Sample::u`.
    known: Vec<usize>,
    /// Exogenous nodes placed in the representation.
    repr_nodes: Vec<usize>,
}

impl ScmBackend {
    /// Columns in node order, named after the feature nodes.
    pub fn new(scm: Scm, abduction: Abduction) -> Result<Self, ReprError> {
        let names: Vec<String> = scm.features().iter().map(|&i| scm.variable(i).name.clone()).collect();
        let exo: Vec<String> = scm.exogenous().iter().map(|&i| scm.variable(i).name.clone()).collect();
        Self::with_columns(scm, abduction, &names, &exo)
    }

    /// `columns` orders the sample's feature vector; `exogenous` names the
    /// entries of `Sample::u`.
    pub fn with_columns(
        scm: Scm,
        abduction: Abduction,
        columns: &[String],
        exogenous: &[String],
    ) -> Result<Self, ReprError> {
        let g = scm.graph();
        let mut nodes = Vec::with_capacity(columns.len());
        for name in columns {
            let idx = g.index_of(name)?;
            if g.node(idx).kind != VarKind::Feature {
                return Err(ReprError::Model(format!("column `{name}` is not a feature node")));
            }
            nodes.push(idx);
        }
        let features: BTreeSet<usize> = scm.features().into_iter().collect();
        if nodes.iter().copied().collect::<BTreeSet<_>>() != features || nodes.len() != features.len() {
            return Err(ReprError::Model("feature columns must cover each feature node once".into()));
        }
        let known = exogenous
            .iter()
            .map(|n| {
                let idx = g.index_of(n)?;
                if g.node(idx).kind != VarKind::Exogenous {
                    return Err(ReprError::Model(format!("`{n}` is not exogenous")));
                }
                Ok(idx)
            })
            .collect::<Result<Vec<_>, ReprError>>()?;
        let sensitive_parents: BTreeSet<usize> = g.parents_of(scm.sensitive()).iter().copied().collect();
        let repr_nodes = scm
            .exogenous()
            .iter()
            .copied()
            .filter(|e| !sensitive_parents.contains(e) && g.children_of(*e).iter().any(|c| features.contains(c)))
            .collect();
        let encoded = columns
            .iter()
            .enumerate()
            .map(|(k, name)| EncodedColumn {
                name: name.clone(),
                encoding: Encoding::Continuous,
                group: Group::Beta,
                start: k,
                width: 1,
            })
            .collect();
        Ok(Self {
            scm,
            abduction,
            columns: encoded,
            nodes,
            known,
            repr_nodes,
        })
    }

    pub fn scm(&self) -> &Scm {
        &self.scm
    }

    pub fn abduction(&self) -> Abduction {
        self.abduction
    }

    /// Names of the exogenous variables that enter the representation.
    pub fn representation_exogenous(&self) -> Vec<&str> {
        self.repr_nodes.iter().map(|&i| self.scm.variable(i).name.as_str()).collect()
    }

    fn observation(&self, s: &Sample) -> Result<Vec<Option<f64>>, ReprError> {
        if s.x.len() != self.nodes.len() {
            return Err(ReprError::DimensionMismatch {
                expected: self.nodes.len(),
                found: s.x.len(),
            });
        }
        let mut obs = vec![None; self.scm.graph().len()];
        for (&node, &v) in self.nodes.iter().zip(&s.x) {
            obs[node] = Some(v);
        }
        obs[self.scm.sensitive()] = Some(self.level_value(s.a)?);
        obs[self.scm.label()] = s.y;
        Ok(obs)
    }

    fn level_value(&self, level: usize) -> Result<f64, ReprError> {
        self.scm
            .levels()
            .get(level)
            .copied()
            .ok_or(ReprError::UnknownLevel(level))
    }

    fn world(&self, values: &[f64]) -> World {
        World {
            x: self.nodes.iter().map(|&n| values[n]).collect(),
            y: Some(values[self.scm.label()]),
        }
    }
}

impl CausalModel for ScmBackend {
    fn n_levels(&self) -> usize {
        self.scm.levels().len()
    }

    fn columns(&self) -> &[EncodedColumn] {
        &self.columns
    }

    fn sensitive_name(&self) -> &str {
        self.scm.sensitive_name()
    }

    fn label_name(&self) -> &str {
        &self.scm.variable(self.scm.label()).name
    }

    fn non_descendant_columns(&self) -> Vec<usize> {
        let desc = self.scm.graph().descendants_of(&[self.scm.sensitive()]);
        (0..self.nodes.len()).filter(|&k| !desc.contains(&self.nodes[k])).collect()
    }

    fn models_label(&self) -> bool {
        true
    }

    fn abduct(&self, s: &Sample) -> Result<Latent, ReprError> {
        let obs = self.observation(s)?;
        let mut known = vec![None; self.scm.graph().len()];
        if self.abduction == Abduction::GroundTruth {
            let u = s.u.as_ref().ok_or(ReprError::MissingExogenous)?;
            if u.len() != self.known.len() {
                return Err(ReprError::DimensionMismatch {
                    expected: self.known.len(),
                    found: u.len(),
                });
            }
            for (&node, &v) in self.known.iter().zip(u) {
                known[node] = Some(v);
            }
        }
        let full = self.scm.abduct_vector(&obs, &known)?;
        let repr = self.repr_nodes.iter().map(|&e| full[e]).collect();
        Ok(Latent { full, repr })
    }

    fn counterfactual(&self, s: &Sample, latent: &Latent, level: usize, clamp: &[usize]) -> Result<World, ReprError> {
        let obs = self.observation(s)?;
        let mut pins = vec![(self.scm.sensitive(), self.level_value(level)?)];
        for &c in clamp {
            let node = *self.nodes.get(c).ok_or(ReprError::DimensionMismatch {
                expected: self.nodes.len(),
                found: c,
            })?;
            pins.push((node, s.x[c]));
        }
        let mut values = latent.full.clone();
        self.scm.counterfactual_vector(&obs, &mut values, &pins)?;
        Ok(self.world(&values))
    }

    fn decode(&self, latent: &Latent, level: usize) -> Result<World, ReprError> {
        let mut values = latent.full.clone();
        self.scm
            .simulate_into(&mut values, &[(self.scm.sensitive(), self.level_value(level)?)])?;
        Ok(self.world(&values))
    }
}
