//! Losses over batches. Reconstruction losses sum over columns and average
//! over rows, so a single-column mse is the usual mean squared error.

use ndarray::{Array2, ArrayView2, Zip};
use serde::{Deserialize, Serialize};

use super::{sigmoid, NnError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Mse,
    Bce,
    KlGaussianStandard,
    L2Pairwise,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub kind: LossKind,
    pub weight: f64,
}

/// Weighted loss value with gradients for both arguments.
#[derive(Debug, Clone)]
pub struct LossValue {
    pub value: f64,
    pub grad_a: Array2<f64>,
    pub grad_b: Array2<f64>,
}

impl LossSpec {
    pub fn new(kind: LossKind, weight: f64) -> Result<Self, NnError> {
        if !(weight.is_finite() && weight >= 0.0) {
            return Err(NnError::InvalidHyperparameter(format!("loss weight {weight}")));
        }
        Ok(Self { kind, weight })
    }

    /// Arguments per kind: mse `(pred, target)`, bce `(logits, target)`,
    /// kl `(mu, log_var)`, l2_pairwise `(a, b)`.
    pub fn evaluate(&self, a: ArrayView2<f64>, b: ArrayView2<f64>) -> Result<LossValue, NnError> {
        if a.dim() != b.dim() {
            return Err(NnError::DimensionMismatch {
                expected: a.len(),
                found: b.len(),
            });
        }
        if self.weight == 0.0 {
            return Ok(LossValue {
                value: 0.0,
                grad_a: Array2::zeros(a.dim()),
                grad_b: Array2::zeros(b.dim()),
            });
        }
        let (value, ga, gb) = match self.kind {
            LossKind::Mse => {
                let (v, g) = mse(a, b);
                let gb = -&g;
                (v, g, gb)
            }
            LossKind::Bce => {
                let (v, g) = bce_with_logits(a, b);
                let gb = a.mapv(|z| -z / a.nrows().max(1) as f64);
                (v, g, gb)
            }
            LossKind::KlGaussianStandard => kl_gaussian_standard_batch(a, b),
            LossKind::L2Pairwise => {
                let (v, g) = l2_pairwise(a, b);
                let gb = -&g;
                (v, g, gb)
            }
        };
        Ok(LossValue {
            value: self.weight * value,
            grad_a: ga * self.weight,
            grad_b: gb * self.weight,
        })
    }
}

fn rows(a: &ArrayView2<f64>) -> f64 {
    a.nrows().max(1) as f64
}

pub fn mse(pred: ArrayView2<f64>, target: ArrayView2<f64>) -> (f64, Array2<f64>) {
    let n = rows(&pred);
    let diff = &pred - &target;
    let value = diff.iter().map(|d| d * d).sum::<f64>() / n;
    (value, diff * (2.0 / n))
}

/// Binary cross-entropy on logits, `max(z,0) - z t + ln(1 + e^{-|z|})`.
pub fn bce_with_logits(logits: ArrayView2<f64>, target: ArrayView2<f64>) -> (f64, Array2<f64>) {
    let n = rows(&logits);
    let mut value = 0.0;
    let mut grad = Array2::zeros(logits.dim());
    Zip::from(&mut grad).and(&logits).and(&target).for_each(|g, &z, &t| {
        value += z.max(0.0) - z * t + (-z.abs()).exp().ln_1p();
        *g = (sigmoid(z) - t) / n;
    });
    (value / n, grad)
}

/// Softmax cross-entropy of one-hot `target` against `logits`, row-wise.
pub fn softmax_cross_entropy(logits: ArrayView2<f64>, target: ArrayView2<f64>) -> (f64, Array2<f64>) {
    let n = rows(&logits);
    let mut value = 0.0;
    let mut grad = Array2::zeros(logits.dim());
    for ((z, t), mut g) in logits.rows().into_iter().zip(target.rows()).zip(grad.rows_mut()) {
        let m = z.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        for j in 0..z.len() {
            value += t[j] * (lse - z[j]);
            g[j] = ((z[j] - lse).exp() - t[j]) / n;
        }
    }
    (value / n, grad)
}

/// `½ Σ (exp(log_var) + mu² − 1 − log_var)`.
pub fn kl_gaussian_standard(mu: &[f64], log_var: &[f64]) -> f64 {
    0.5 * mu
        .iter()
        .zip(log_var)
        .map(|(m, lv)| lv.exp() + m * m - 1.0 - lv)
        .sum::<f64>()
}

/// Row-averaged KL with gradients for `mu` and `log_var`.
pub fn kl_gaussian_standard_batch(mu: ArrayView2<f64>, log_var: ArrayView2<f64>) -> (f64, Array2<f64>, Array2<f64>) {
    let n = rows(&mu);
    let mut value = 0.0;
    let mut gmu = Array2::zeros(mu.dim());
    let mut glv = Array2::zeros(mu.dim());
    Zip::from(&mut gmu)
        .and(&mut glv)
        .and(&mu)
        .and(&log_var)
        .for_each(|gm, gl, &m, &lv| {
            value += 0.5 * (lv.exp() + m * m - 1.0 - lv);
            *gm = m / n;
            *gl = 0.5 * (lv.exp() - 1.0) / n;
        });
    (value / n, gmu, glv)
}

/// Euclidean norm of `a − b` over the whole batch; the gradient at
/// `a = b` is taken as zero.
pub fn l2_pairwise(a: ArrayView2<f64>, b: ArrayView2<f64>) -> (f64, Array2<f64>) {
    let diff = &a - &b;
    let norm = diff.iter().map(|d| d * d).sum::<f64>().sqrt();
    if norm == 0.0 {
        return (0.0, Array2::zeros(a.dim()));
    }
    (norm, diff / norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn kl_examples() {
        assert_eq!(kl_gaussian_standard(&[0.0, 0.0], &[0.0, 0.0]), 0.0);
        assert_eq!(kl_gaussian_standard(&[1.0], &[0.0]), 0.5);
    }

    #[test]
    fn kl_matches_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..5 {
            let mu: f64 = rng.random_range(-1.5..1.5);
            let lv: f64 = rng.random_range(-1.0..1.0);
            let sd = (0.5 * lv).exp();
            let q = Normal::new(mu, sd).unwrap();
            let m = 20_000;
            let samples: Vec<f64> = (0..m)
                .map(|_| {
                    let z: f64 = q.sample(&mut rng);
                    let log_q = -0.5 * ((z - mu) / sd).powi(2) - sd.ln();
                    let log_p = -0.5 * z * z;
                    log_q - log_p
                })
                .collect();
            let mean = samples.iter().sum::<f64>() / m as f64;
            let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
            let se = (var / m as f64).sqrt();
            let exact = kl_gaussian_standard(&[mu], &[lv]);
            assert!((mean - exact).abs() < 3.0 * se + 1e-12, "mc {mean} exact {exact} se {se}");
        }
    }

    #[test]
    fn bce_is_stable_for_large_logits() {
        let (v, g) = bce_with_logits(array![[800.0, -800.0]].view(), array![[1.0, 0.0]].view());
        assert!(v.abs() < 1e-300 || v == 0.0);
        assert!(g.iter().all(|x| x.is_finite()));
        let (v, _) = bce_with_logits(array![[-800.0]].view(), array![[1.0]].view());
        assert!((v - 800.0).abs() < 1e-9);
    }

    #[test]
    fn zero_weight_contributes_nothing() {
        let spec = LossSpec::new(LossKind::L2Pairwise, 0.0).unwrap();
        let out = spec.evaluate(array![[1.0, 2.0]].view(), array![[3.0, -1.0]].view()).unwrap();
        assert_eq!(out.value, 0.0);
        assert!(out.grad_a.iter().chain(out.grad_b.iter()).all(|&g| g == 0.0));
    }

    #[test]
    fn negative_weight_is_rejected() {
        assert!(LossSpec::new(LossKind::Mse, -1.0).is_err());
    }

    #[test]
    fn softmax_cross_entropy_of_uniform_logits() {
        let (v, _) = softmax_cross_entropy(array![[0.0, 0.0, 0.0, 0.0]].view(), array![[0.0, 1.0, 0.0, 0.0]].view());
        assert!((v - 4f64.ln()).abs() < 1e-15);
    }
}
