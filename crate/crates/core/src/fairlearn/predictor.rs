use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::FairError;
use crate::nn::sigmoid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Linear,
    Logistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    /// Normal equations with a 1e-8 ridge; linear models only.
    ClosedForm,
    /// Full-batch gradient descent from zero weights.
    Gradient,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub solver: Solver,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl FitConfig {
    pub fn for_kind(kind: ModelKind) -> Self {
        FitConfig {
            solver: match kind {
                ModelKind::Linear => Solver::ClosedForm,
                ModelKind::Logistic => Solver::Gradient,
            },
            learning_rate: 0.1,
            epochs: 2000,
            seed: 0,
        }
    }

    fn validate(&self, kind: ModelKind) -> Result<(), FairError> {
        if self.epochs == 0 {
            return Err(FairError::Config("epochs must be at least 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(FairError::Config("learning rate must be positive".into()));
        }
        if kind == ModelKind::Logistic && self.solver == Solver::ClosedForm {
            return Err(FairError::Config("logistic regression has no closed form".into()));
        }
        Ok(())
    }
}

const RIDGE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

/// Regression value or class-1 probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Predictor {
    Linear(LinearModel),
    Logistic(LogisticModel),
}

impl Predictor {
    pub fn zeros(kind: ModelKind, dim: usize) -> Predictor {
        let (weights, bias) = (vec![0.0; dim], 0.0);
        match kind {
            ModelKind::Linear => Predictor::Linear(LinearModel { weights, bias }),
            ModelKind::Logistic => Predictor::Logistic(LogisticModel { weights, bias }),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Predictor::Linear(_) => ModelKind::Linear,
            Predictor::Logistic(_) => ModelKind::Logistic,
        }
    }

    pub fn weights(&self) -> (&[f64], f64) {
        match self {
            Predictor::Linear(m) => (&m.weights, m.bias),
            Predictor::Logistic(m) => (&m.weights, m.bias),
        }
    }

    fn from_params(kind: ModelKind, params: &[f64]) -> Predictor {
        let (w, b) = params.split_at(params.len() - 1);
        let (weights, bias) = (w.to_vec(), b[0]);
        match kind {
            ModelKind::Linear => Predictor::Linear(LinearModel { weights, bias }),
            ModelKind::Logistic => Predictor::Logistic(LogisticModel { weights, bias }),
        }
    }

    pub fn predict(&self, r: &[f64]) -> Result<f64, FairError> {
        let (w, b) = self.weights();
        if r.len() != w.len() {
            return Err(FairError::DimensionMismatch {
                expected: w.len(),
                found: r.len(),
            });
        }
        let z = w.iter().zip(r).map(|(a, b)| a * b).sum::<f64>() + b;
        Ok(match self {
            Predictor::Linear(_) => z,
            Predictor::Logistic(_) => sigmoid(z),
        })
    }
}

/// Rows of `inputs` with a trailing 1 column.
fn design(inputs: &Array2<f64>) -> DMatrix<f64> {
    let (n, d) = inputs.dim();
    DMatrix::from_fn(n, d + 1, |i, j| if j == d { 1.0 } else { inputs[[i, j]] })
}

fn check(inputs: &Array2<f64>, targets: &[f64]) -> Result<(), FairError> {
    if inputs.nrows() != targets.len() {
        return Err(FairError::DimensionMismatch {
            expected: inputs.nrows(),
            found: targets.len(),
        });
    }
    if targets.is_empty() {
        return Err(FairError::EmptyTrainingSet);
    }
    Ok(())
}

fn solve(a: DMatrix<f64>, b: DVector<f64>) -> Result<DVector<f64>, FairError> {
    if let Some(ch) = a.clone().cholesky() {
        return Ok(ch.solve(&b));
    }
    a.lu().solve(&b).ok_or(FairError::SingularSystem)
}

fn finite(p: &[f64]) -> Result<(), FairError> {
    if p.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(FairError::NonFiniteLoss)
    }
}

pub fn fit(kind: ModelKind, inputs: &Array2<f64>, targets: &[f64], cfg: &FitConfig) -> Result<Predictor, FairError> {
    check(inputs, targets)?;
    cfg.validate(kind)?;
    let d = design(inputs);
    let y = DVector::from_column_slice(targets);
    let n = targets.len() as f64;
    let params: Vec<f64> = match (kind, cfg.solver) {
        (ModelKind::Linear, Solver::ClosedForm) => {
            let p = d.ncols();
            let a = d.transpose() * &d + DMatrix::identity(p, p) * RIDGE;
            solve(a, d.transpose() * &y)?.iter().copied().collect()
        }
        (ModelKind::Linear, Solver::Gradient) => {
            let mut w = DVector::zeros(d.ncols());
            for _ in 0..cfg.epochs {
                let g = d.transpose() * (&d * &w - &y) * (2.0 / n);
                w -= g * cfg.learning_rate;
            }
            w.iter().copied().collect()
        }
        (ModelKind::Logistic, _) => {
            let mut w = DVector::zeros(d.ncols());
            for _ in 0..cfg.epochs {
                let p = (&d * &w).map(sigmoid);
                let g = d.transpose() * (p - &y) / n;
                w -= g * cfg.learning_rate;
            }
            w.iter().copied().collect()
        }
    };
    finite(&params)?;
    Ok(Predictor::from_params(kind, &params))
}

/// Minimises `l(y, ŷ) + λ ‖ŷ − ŷ̌‖₂`, where `ŷ̌` are predictions on
/// `cf_inputs` and the norm runs over the whole training set.
///
/// Linear models use majorize-minimize: each step solves a ridge system
/// whose penalty weight is `λ / ‖ŷ − ŷ̌‖` at the previous iterate.
pub fn fit_counterfactual_regularized(
    kind: ModelKind,
    inputs: &Array2<f64>,
    targets: &[f64],
    cf_inputs: &Array2<f64>,
    lambda: f64,
    cfg: &FitConfig,
) -> Result<Predictor, FairError> {
    check(inputs, targets)?;
    if cf_inputs.dim() != inputs.dim() {
        return Err(FairError::DimensionMismatch {
            expected: inputs.nrows(),
            found: cf_inputs.nrows(),
        });
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(FairError::Config(format!("CR lambda {lambda} must be non-negative")));
    }
    if lambda == 0.0 {
        return fit(kind, inputs, targets, cfg);
    }
    cfg.validate(kind)?;
    let f = design(inputs);
    let fc = design(cf_inputs);
    let g = &f - &fc;
    let y = DVector::from_column_slice(targets);
    let n = targets.len() as f64;
    let params: Vec<f64> = match kind {
        ModelKind::Linear => {
            let p = f.ncols();
            let ftf = f.transpose() * &f * (2.0 / n);
            let gtg = g.transpose() * &g;
            let rhs = f.transpose() * &y * (2.0 / n);
            let mut w = solve(&ftf + DMatrix::identity(p, p) * RIDGE, rhs.clone())?;
            for _ in 0..1000 {
                let r = (&g * &w).norm().max(1e-12);
                let next = solve(&ftf + &gtg * (lambda / r) + DMatrix::identity(p, p) * RIDGE, rhs.clone())?;
                let delta = (&next - &w).norm();
                w = next;
                if delta <= 1e-13 * (1.0 + w.norm()) {
                    break;
                }
            }
            w.iter().copied().collect()
        }
        ModelKind::Logistic => {
            let mut w = DVector::zeros(f.ncols());
            for _ in 0..cfg.epochs {
                let p = (&f * &w).map(sigmoid);
                let pc = (&fc * &w).map(sigmoid);
                let mut grad = f.transpose() * (&p - &y) / n;
                let diff = &p - &pc;
                let norm = diff.norm();
                if norm > 0.0 {
                    let dp = p.zip_map(&diff, |p, d| d * p * (1.0 - p));
                    let dpc = pc.zip_map(&diff, |p, d| d * p * (1.0 - p));
                    grad += (f.transpose() * dp - fc.transpose() * dpc) * (lambda / norm);
                }
                w -= grad * cfg.learning_rate;
            }
            w.iter().copied().collect()
        }
    };
    finite(&params)?;
    Ok(Predictor::from_params(kind, &params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn closed_form_recovers_exact_coefficients() {
        let x = array![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [2.0, -1.0], [0.5, 3.0]];
        let y: Vec<f64> = x.rows().into_iter().map(|r| 2.0 * r[0] - 3.0 * r[1] + 0.5).collect();
        let p = fit(ModelKind::Linear, &x, &y, &FitConfig::for_kind(ModelKind::Linear)).unwrap();
        let (w, b) = p.weights();
        assert!((w[0] - 2.0).abs() < 1e-8 && (w[1] + 3.0).abs() < 1e-8 && (b - 0.5).abs() < 1e-8);
    }

    #[test]
    fn logistic_separates_two_points() {
        let x = array![[-1.0], [1.0]];
        let y = [0.0, 1.0];
        let p = fit(ModelKind::Logistic, &x, &y, &FitConfig::for_kind(ModelKind::Logistic)).unwrap();
        let loss: f64 = [(-1.0, 0.0), (1.0, 1.0)]
            .iter()
            .map(|&(xi, yi)| {
                let q = p.predict(&[xi]).unwrap();
                -(yi * q.ln() + (1.0 - yi) * (1.0 - q).ln())
            })
            .sum::<f64>()
            / 2.0;
        assert!(loss < 0.1, "{loss}");
    }

    #[test]
    fn closed_form_and_gradient_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = Array2::from_shape_simple_fn((200, 3), || rng.random_range(-1.0..1.0));
        let y: Vec<f64> = x
            .rows()
            .into_iter()
            .map(|r| r[0] - 0.5 * r[1] + 0.25 * r[2] + 0.1 + rng.random_range(-0.1..0.1))
            .collect();
        let cf = fit(ModelKind::Linear, &x, &y, &FitConfig::for_kind(ModelKind::Linear)).unwrap();
        let gd_cfg = FitConfig {
            solver: Solver::Gradient,
            epochs: 20_000,
            ..FitConfig::for_kind(ModelKind::Linear)
        };
        let gd = fit(ModelKind::Linear, &x, &y, &gd_cfg).unwrap();
        let (a, ab) = cf.weights();
        let (b, bb) = gd.weights();
        for (p, q) in a.iter().chain([&ab]).zip(b.iter().chain([&bb])) {
            assert!((p - q).abs() < 1e-4, "{p} vs {q}");
        }
    }

    #[test]
    fn zero_models_predict_bias_and_half() {
        assert_eq!(Predictor::zeros(ModelKind::Linear, 2).predict(&[3.0, 4.0]).unwrap(), 0.0);
        assert_eq!(Predictor::zeros(ModelKind::Logistic, 2).predict(&[3.0, 4.0]).unwrap(), 0.5);
        assert!(Predictor::zeros(ModelKind::Linear, 2).predict(&[1.0]).is_err());
    }

    #[test]
    fn cr_with_zero_lambda_is_plain_fit() {
        let x = array![[1.0], [2.0], [3.0], [4.0]];
        let xc = array![[2.0], [3.0], [4.0], [5.0]];
        let y = [1.0, 2.5, 2.9, 4.2];
        let cfg = FitConfig::for_kind(ModelKind::Linear);
        let a = fit(ModelKind::Linear, &x, &y, &cfg).unwrap();
        let b = fit_counterfactual_regularized(ModelKind::Linear, &x, &y, &xc, 0.0, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cr_linear_reaches_stationary_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = Array2::from_shape_simple_fn((100, 2), || rng.random_range(-1.0..1.0));
        let xc = &x + &Array2::from_shape_simple_fn((100, 2), || rng.random_range(0.0..1.0));
        let y: Vec<f64> = x.rows().into_iter().map(|r| r[0] + r[1]).collect();
        let lambda = 0.3;
        let cfg = FitConfig::for_kind(ModelKind::Linear);
        let p = fit_counterfactual_regularized(ModelKind::Linear, &x, &y, &xc, lambda, &cfg).unwrap();
        let (w, b) = p.weights();
        let objective = |w0: f64, w1: f64, b: f64| {
            let mut l = 0.0;
            let mut r = 0.0;
            for i in 0..100 {
                let f = w0 * x[[i, 0]] + w1 * x[[i, 1]] + b;
                let fc = w0 * xc[[i, 0]] + w1 * xc[[i, 1]] + b;
                l += (f - y[i]).powi(2);
                r += (f - fc).powi(2);
            }
            l / 100.0 + lambda * r.sqrt()
        };
        let best = objective(w[0], w[1], b);
        let h = 1e-4;
        for (dw0, dw1, db) in [(h, 0.0, 0.0), (-h, 0.0, 0.0), (0.0, h, 0.0), (0.0, -h, 0.0), (0.0, 0.0, h), (0.0, 0.0, -h)] {
            assert!(objective(w[0] + dw0, w[1] + dw1, b + db) >= best - 1e-12);
        }
    }
}
