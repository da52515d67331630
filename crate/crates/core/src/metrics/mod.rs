//! Performance and counterfactual-fairness metrics.

mod report;

pub use report::{MetricsReport, ReportRow, SeedMetrics, Summary};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    EmptyInput,
    #[error("need at least 2 bins, got {0}")]
    TooFewBins(usize),
    #[error("report: {0}")]
    Report(String),
}

fn check(a: usize, b: usize) -> Result<(), MetricsError> {
    if a != b {
        return Err(MetricsError::LengthMismatch(a, b));
    }
    if a == 0 {
        return Err(MetricsError::EmptyInput);
    }
    Ok(())
}

pub fn mse(preds: &[f64], targets: &[f64]) -> Result<f64, MetricsError> {
    check(preds.len(), targets.len())?;
    Ok(preds.iter().zip(targets).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / preds.len() as f64)
}

/// Fraction of samples with `(pred >= 0.5) == (target == 1)`.
pub fn accuracy(preds: &[f64], targets: &[f64]) -> Result<f64, MetricsError> {
    check(preds.len(), targets.len())?;
    let hits = preds
        .iter()
        .zip(targets)
        .filter(|(p, t)| (**p >= 0.5) == (**t >= 0.5))
        .count();
    Ok(hits as f64 / preds.len() as f64)
}

/// Mean absolute difference between factual and counterfactual predictions.
pub fn total_effect(preds_f: &[f64], preds_cf: &[f64]) -> Result<f64, MetricsError> {
    check(preds_f.len(), preds_cf.len())?;
    Ok(preds_f.iter().zip(preds_cf).map(|(a, b)| (a - b).abs()).sum::<f64>() / preds_f.len() as f64)
}

/// Total effect restricted to each sensitive level; absent levels are omitted.
pub fn group_total_effect(
    preds_f: &[f64],
    preds_cf: &[f64],
    sensitive: &[usize],
) -> Result<BTreeMap<usize, f64>, MetricsError> {
    check(preds_f.len(), preds_cf.len())?;
    check(preds_f.len(), sensitive.len())?;
    let mut acc: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for ((a, b), &s) in preds_f.iter().zip(preds_cf).zip(sensitive) {
        let e = acc.entry(s).or_insert((0.0, 0));
        e.0 += (a - b).abs();
        e.1 += 1;
    }
    Ok(acc.into_iter().map(|(k, (sum, n))| (k, sum / n as f64)).collect())
}

/// Shared-edge histograms of factual and counterfactual predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityData {
    pub edges: Vec<f64>,
    pub factual: Vec<usize>,
    pub counterfactual: Vec<usize>,
}

pub const DEFAULT_BINS: usize = 40;

pub fn density_data(preds_f: &[f64], preds_cf: &[f64], bins: usize) -> Result<DensityData, MetricsError> {
    if bins < 2 {
        return Err(MetricsError::TooFewBins(bins));
    }
    if preds_f.is_empty() && preds_cf.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let all = preds_f.iter().chain(preds_cf);
    let (mut lo, mut hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    if lo == hi {
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins)
        .map(|i| if i == bins { hi } else { lo + width * i as f64 })
        .collect();
    let count = |values: &[f64]| {
        let mut c = vec![0usize; bins];
        for &v in values {
            let k = (((v - lo) / (hi - lo)) * bins as f64).floor() as usize;
            c[k.min(bins - 1)] += 1;
        }
        c
    };
    Ok(DensityData {
        factual: count(preds_f),
        counterfactual: count(preds_cf),
        edges,
    })
}

impl DensityData {
    /// Columns `bin_left, bin_right, factual_count, counterfactual_count`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_left,bin_right,factual_count,counterfactual_count\n");
        for i in 0..self.factual.len() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                self.edges[i],
                self.edges[i + 1],
                self.factual[i],
                self.counterfactual[i]
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mse_examples() {
        assert_eq!(mse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mse(&[0.0, 0.0], &[1.0, 3.0]).unwrap(), 5.0);
        assert_eq!(mse(&[0.0], &[1.0, 3.0]), Err(MetricsError::LengthMismatch(1, 2)));
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&[0.9, 0.1, 0.5], &[1.0, 0.0, 1.0]).unwrap(), 1.0);
        assert_eq!(accuracy(&[0.1, 0.9], &[1.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn total_effect_examples() {
        assert_eq!(total_effect(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(total_effect(&[1.0, 2.0], &[0.0, 4.0]).unwrap(), 1.5);
    }

    #[test]
    fn single_group_equals_total() {
        let f = [0.3, 1.2, -0.4];
        let cf = [0.1, 1.0, 0.4];
        let g = group_total_effect(&f, &cf, &[1, 1, 1]).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g[&1], total_effect(&f, &cf).unwrap());
    }

    #[test]
    fn density_examples() {
        let d = density_data(&[0.0, 1.0, 2.0], &[0.0, 1.0, 2.0], 4).unwrap();
        assert_eq!(d.factual, d.counterfactual);
        assert_eq!(d.factual.iter().sum::<usize>(), 3);
        let d = density_data(&[0.0, 0.1], &[9.9, 10.0], 10).unwrap();
        for i in 0..10 {
            assert!(d.factual[i] == 0 || d.counterfactual[i] == 0);
        }
        assert_eq!(d.edges.len(), 11);
        assert_eq!(density_data(&[1.0], &[1.0], 1), Err(MetricsError::TooFewBins(1)));
        assert_eq!(density_data(&[], &[], 5), Err(MetricsError::EmptyInput));
    }
}
