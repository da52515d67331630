//! TOML description of additive structural causal models.
//!
//! ```toml
//! format = 1
//!
//! [[node]]
//! name = "U_G"
//! kind = "exogenous"
//! prior = { family = "standard_normal" }
//!
//! [[node]]
//! name = "A"
//! kind = "sensitive"
//! levels = [0, 1]
//!
//! [[equation]]
//! target = "GPA"
//! intercept = 1.0
//! noise = "U_G"
//! terms = [{ parent = "A", coef = 0.5 }, { parent = "LSAT", coef = 0.1, power = 2 }]
//! ```
//!
//! Edges are implied by each equation's term parents and noise variable.

use std::path::Path;

use serde::Deserialize;

use super::builder::ScmBuilder;
use super::graph::VarKind;
use super::model::{Prior, Scm, Term};
use super::ScmError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScm {
    format: u32,
    #[serde(default)]
    node: Vec<RawNode>,
    #[serde(default)]
    equation: Vec<RawEquation>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNode {
    name: String,
    kind: VarKind,
    prior: Option<Prior>,
    levels: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEquation {
    target: String,
    #[serde(default)]
    intercept: f64,
    noise: String,
    #[serde(default)]
    terms: Vec<RawTerm>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTerm {
    parent: String,
    coef: Option<f64>,
    power: Option<i32>,
    effects: Option<Vec<f64>>,
}

pub fn parse_scm_file(text: &str) -> Result<Scm, ScmError> {
    let raw: RawScm = toml::from_str(text).map_err(|e| ScmError::File(e.to_string()))?;
    if raw.format != 1 {
        return Err(ScmError::File(format!("unsupported format {}", raw.format)));
    }
    let mut b = ScmBuilder::new();
    for n in raw.node {
        b = match n.kind {
            VarKind::Exogenous => {
                let prior = n
                    .prior
                    .ok_or_else(|| ScmError::File(format!("exogenous node `{}` needs a prior", n.name)))?;
                b.exogenous(&n.name, prior)
            }
            VarKind::Sensitive => {
                let levels = n
                    .levels
                    .ok_or_else(|| ScmError::File(format!("sensitive node `{}` needs levels", n.name)))?;
                b.sensitive(&n.name, levels)
            }
            VarKind::Feature => b.feature(&n.name),
            VarKind::Label => b.label(&n.name),
        };
    }
    for eq in raw.equation {
        let terms = eq
            .terms
            .into_iter()
            .map(|t| match (t.coef, t.power, t.effects) {
                (Some(coef), None, None) => Ok(Term::Linear { parent: t.parent, coef }),
                (Some(coef), Some(exponent), None) => Ok(Term::Power { parent: t.parent, exponent, coef }),
                (None, None, Some(effects)) => Ok(Term::Level { parent: t.parent, effects }),
                _ => Err(ScmError::File(format!(
                    "term on `{}` in equation `{}` needs either `coef` (with optional `power`) or `effects`",
                    t.parent, eq.target
                ))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        b = b.additive(&eq.target, eq.intercept, terms, &eq.noise);
    }
    b.build()
}

pub fn read_scm_file(path: &Path) -> Result<Scm, ScmError> {
    let text = std::fs::read_to_string(path).map_err(|e| ScmError::File(format!("{}: {e}", path.display())))?;
    parse_scm_file(&text)
}
