use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::ReprError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymmetricKind {
    #[default]
    Mean,
    ElementwiseMin,
    ElementwiseMax,
    SortedConcat,
}

impl SymmetricKind {
    pub fn name(self) -> &'static str {
        match self {
            SymmetricKind::Mean => "mean",
            SymmetricKind::ElementwiseMin => "elementwise_min",
            SymmetricKind::ElementwiseMax => "elementwise_max",
            SymmetricKind::SortedConcat => "sorted_concat",
        }
    }
}

/// A permutation-invariant map from `arity` equal-length vectors to one vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymmetricFn {
    pub kind: SymmetricKind,
    pub arity: usize,
}

impl SymmetricFn {
    pub fn new(kind: SymmetricKind, arity: usize) -> Self {
        Self { kind, arity }
    }

    pub fn output_dim(&self, input_dim: usize) -> usize {
        match self.kind {
            SymmetricKind::SortedConcat => input_dim * self.arity,
            _ => input_dim,
        }
    }

    /// Output is bit-identical under any reordering of `inputs`: the mean
    /// sums each component in sorted order.
    pub fn apply(&self, inputs: &[&[f64]]) -> Result<Vec<f64>, ReprError> {
        if inputs.len() != self.arity || self.arity == 0 {
            return Err(ReprError::ArityMismatch {
                expected: self.arity,
                found: inputs.len(),
            });
        }
        let d = inputs[0].len();
        if let Some(bad) = inputs.iter().find(|v| v.len() != d) {
            return Err(ReprError::DimensionMismatch {
                expected: d,
                found: bad.len(),
            });
        }
        let n = inputs.len();
        Ok(match self.kind {
            SymmetricKind::Mean => {
                let mut col = vec![0.0; n];
                (0..d)
                    .map(|j| {
                        for (c, v) in col.iter_mut().zip(inputs) {
                            *c = v[j];
                        }
                        col.sort_by(f64::total_cmp);
                        col.iter().sum::<f64>() / n as f64
                    })
                    .collect()
            }
            SymmetricKind::ElementwiseMin => (0..d)
                .map(|j| inputs.iter().map(|v| v[j]).min_by(f64::total_cmp).expect("arity ≥ 1"))
                .collect(),
            SymmetricKind::ElementwiseMax => (0..d)
                .map(|j| inputs.iter().map(|v| v[j]).max_by(f64::total_cmp).expect("arity ≥ 1"))
                .collect(),
            SymmetricKind::SortedConcat => {
                let mut sorted: Vec<&[f64]> = inputs.to_vec();
                sorted.sort_by(|a, b| lex(a, b));
                sorted.concat()
            }
        })
    }
}

fn lex(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

pub fn apply_symmetric(s: &SymmetricFn, inputs: &[Vec<f64>]) -> Result<Vec<f64>, ReprError> {
    let refs: Vec<&[f64]> = inputs.iter().map(Vec::as_slice).collect();
    s.apply(&refs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_examples() {
        let s = SymmetricFn::new(SymmetricKind::Mean, 2);
        let v = vec![0.1, -3.7, 2.25];
        assert_eq!(apply_symmetric(&s, &[v.clone(), v.clone()]).unwrap(), v);
        assert_eq!(apply_symmetric(&s, &[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap(), vec![2.0, 3.0]);
    }

    #[test]
    fn other_kinds() {
        let inputs = [vec![1.0, 5.0], vec![0.0, 9.0], vec![1.0, 2.0]];
        let f = |k| apply_symmetric(&SymmetricFn::new(k, 3), &inputs).unwrap();
        assert_eq!(f(SymmetricKind::ElementwiseMin), vec![0.0, 2.0]);
        assert_eq!(f(SymmetricKind::ElementwiseMax), vec![1.0, 9.0]);
        assert_eq!(f(SymmetricKind::SortedConcat), vec![0.0, 9.0, 1.0, 2.0, 1.0, 5.0]);
        assert_eq!(SymmetricFn::new(SymmetricKind::SortedConcat, 3).output_dim(2), 6);
    }

    #[test]
    fn arity_and_dimension_errors() {
        let s = SymmetricFn::new(SymmetricKind::Mean, 2);
        assert_eq!(
            apply_symmetric(&s, &[vec![1.0]]),
            Err(ReprError::ArityMismatch { expected: 2, found: 1 })
        );
        assert_eq!(
            apply_symmetric(&s, &[vec![1.0], vec![1.0, 2.0]]),
            Err(ReprError::DimensionMismatch { expected: 1, found: 2 })
        );
    }

    #[test]
    fn empty_vectors_give_empty_output() {
        let s = SymmetricFn::new(SymmetricKind::Mean, 2);
        assert!(apply_symmetric(&s, &[vec![], vec![]]).unwrap().is_empty());
    }
}
