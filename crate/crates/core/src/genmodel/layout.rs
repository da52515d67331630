use ndarray::{s, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::GenError;
use crate::data::{Dataset, EncodedColumn, Encoding, Group};
use crate::nn::loss::{bce_with_logits, mse, softmax_cross_entropy};
use crate::nn::sigmoid;

/// Reconstruction loss of a block. Under `bce`, binary columns use
/// logistic cross-entropy, categorical columns softmax cross-entropy and
/// continuous columns squared error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReconLoss {
    Mse,
    Bce,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadKind {
    Continuous,
    Binary,
    Categorical,
}

impl From<Encoding> for HeadKind {
    fn from(e: Encoding) -> Self {
        match e {
            Encoding::Continuous => HeadKind::Continuous,
            Encoding::Binary => HeadKind::Binary,
            Encoding::Categorical => HeadKind::Categorical,
        }
    }
}

/// One feature column: `start..start + width` in the encoded feature vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Head {
    pub name: String,
    pub kind: HeadKind,
    pub start: usize,
    pub width: usize,
}

/// Where each block lives in the encoded features and how it is scored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VaeLayout {
    pub alpha: Vec<Head>,
    pub beta: Vec<Head>,
    pub feature_dim: usize,
    pub n_levels: usize,
    pub sensitive: String,
    pub label_name: String,
    pub label: HeadKind,
    pub l_alpha: ReconLoss,
    pub l_beta: ReconLoss,
    pub l_y: ReconLoss,
}

impl VaeLayout {
    pub fn from_dataset(d: &Dataset, l_alpha: ReconLoss, l_beta: ReconLoss, l_y: ReconLoss) -> Result<Self, GenError> {
        let head = |c: &EncodedColumn| Head {
            name: c.name.clone(),
            kind: c.encoding.into(),
            start: c.start,
            width: c.width,
        };
        let pick = |g: Group| d.columns.iter().filter(|c| c.group == g).map(head).collect::<Vec<_>>();
        if d.columns.iter().any(|c| c.group == Group::None) {
            return Err(GenError::Config("every feature must be in group alpha or beta".into()));
        }
        let layout = VaeLayout {
            alpha: pick(Group::Alpha),
            beta: pick(Group::Beta),
            feature_dim: d.feature_dim(),
            n_levels: d.n_levels(),
            sensitive: d.schema.sensitive().name.clone(),
            label_name: d.schema.label().name.clone(),
            label: d.schema.label().encoding.into(),
            l_alpha,
            l_beta,
            l_y,
        };
        layout.validate()?;
        Ok(layout)
    }

    pub fn validate(&self) -> Result<(), GenError> {
        if self.beta.is_empty() {
            return Err(GenError::Config("the beta block is empty".into()));
        }
        if self.n_levels < 2 {
            return Err(GenError::Config("the sensitive attribute needs at least two levels".into()));
        }
        let mut seen = vec![false; self.feature_dim];
        for h in self.alpha.iter().chain(&self.beta) {
            let width_ok = match h.kind {
                HeadKind::Categorical => h.width >= 2,
                _ => h.width == 1,
            };
            if !width_ok || h.start + h.width > self.feature_dim {
                return Err(GenError::Config(format!("column `{}` has an invalid span", h.name)));
            }
            for k in h.start..h.start + h.width {
                if std::mem::replace(&mut seen[k], true) {
                    return Err(GenError::Config(format!("column `{}` overlaps another", h.name)));
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(GenError::Config("feature columns do not cover the encoded vector".into()));
        }
        if self.label == HeadKind::Categorical {
            return Err(GenError::Config("the label must be continuous or binary".into()));
        }
        Ok(())
    }

    pub fn width(heads: &[Head]) -> usize {
        heads.iter().map(|h| h.width).sum()
    }

    pub fn alpha_width(&self) -> usize {
        Self::width(&self.alpha)
    }

    pub fn beta_width(&self) -> usize {
        Self::width(&self.beta)
    }

    /// Width of the dummy coding of the sensitive attribute (level 0 dropped).
    pub fn a_width(&self) -> usize {
        self.n_levels - 1
    }

    pub fn label_head(&self) -> Head {
        Head {
            name: self.label_name.clone(),
            kind: self.label,
            start: 0,
            width: 1,
        }
    }

    pub fn non_descendants(&self) -> Vec<usize> {
        self.alpha.iter().flat_map(|h| h.start..h.start + h.width).collect()
    }

    pub fn dummies(&self, levels: &[usize]) -> Array2<f64> {
        let mut out = Array2::zeros((levels.len(), self.a_width()));
        for (i, &l) in levels.iter().enumerate() {
            if l > 0 {
                out[[i, l - 1]] = 1.0;
            }
        }
        out
    }
}

/// Columns of `heads` taken from a full feature matrix.
pub fn gather(heads: &[Head], x: ArrayView2<f64>) -> Array2<f64> {
    let idx: Vec<usize> = heads.iter().flat_map(|h| h.start..h.start + h.width).collect();
    x.select(Axis(1), &idx)
}

/// Writes a block back into a full feature row.
pub fn scatter(heads: &[Head], block: &[f64], row: &mut [f64]) {
    let mut k = 0;
    for h in heads {
        row[h.start..h.start + h.width].copy_from_slice(&block[k..k + h.width]);
        k += h.width;
    }
}

fn spans(heads: &[Head]) -> impl Iterator<Item = (&Head, std::ops::Range<usize>)> {
    heads.iter().scan(0, |k, h| {
        let r = *k..*k + h.width;
        *k += h.width;
        Some((h, r))
    })
}

/// Loss of a decoder output against its target block, with the gradient
/// for the output.
pub fn block_loss(heads: &[Head], loss: ReconLoss, out: ArrayView2<f64>, target: ArrayView2<f64>) -> (f64, Array2<f64>) {
    let mut total = 0.0;
    let mut grad = Array2::zeros(out.dim());
    for (h, r) in spans(heads) {
        let o = out.slice(s![.., r.clone()]);
        let t = target.slice(s![.., r.clone()]);
        let (v, g) = match (loss, h.kind) {
            (ReconLoss::Bce, HeadKind::Binary) => bce_with_logits(o, t),
            (ReconLoss::Bce, HeadKind::Categorical) => softmax_cross_entropy(o, t),
            _ => mse(o, t),
        };
        total += v;
        grad.slice_mut(s![.., r]).assign(&g);
    }
    (total, grad)
}

/// Expected value of each column: probabilities under `bce`, raw output
/// otherwise.
pub fn block_mean(heads: &[Head], loss: ReconLoss, out: ArrayView2<f64>) -> Array2<f64> {
    let mut m = out.to_owned();
    if loss == ReconLoss::Mse {
        return m;
    }
    for (h, r) in spans(heads) {
        match h.kind {
            HeadKind::Binary => m.slice_mut(s![.., r]).mapv_inplace(sigmoid),
            HeadKind::Categorical => {
                for mut row in m.slice_mut(s![.., r]).rows_mut() {
                    let mx = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
                    row.mapv_inplace(|v| (v - mx).exp());
                    let z = row.sum();
                    row.mapv_inplace(|v| v / z);
                }
            }
            HeadKind::Continuous => {}
        }
    }
    m
}

/// Derivative of [`block_mean`] applied to an upstream gradient, for
/// single-column heads.
pub fn block_mean_backward(heads: &[Head], loss: ReconLoss, mean: ArrayView2<f64>, grad: ArrayView2<f64>) -> Array2<f64> {
    let mut g = grad.to_owned();
    if loss == ReconLoss::Mse {
        return g;
    }
    for (h, r) in spans(heads) {
        match h.kind {
            HeadKind::Binary => {
                let p = mean.slice(s![.., r.clone()]);
                let mut gs = g.slice_mut(s![.., r]);
                gs.zip_mut_with(&p, |d, &p| *d *= p * (1.0 - p));
            }
            HeadKind::Categorical => {
                for (mut gr, pr) in g.slice_mut(s![.., r.clone()]).rows_mut().into_iter().zip(mean.slice(s![.., r.clone()]).rows()) {
                    let dot: f64 = gr.iter().zip(pr.iter()).map(|(a, b)| a * b).sum();
                    gr.zip_mut_with(&pr, |d, &p| *d = p * (*d - dot));
                }
            }
            HeadKind::Continuous => {}
        }
    }
    g
}

/// Generated sample values: binary columns thresholded at 0.5, categorical
/// columns one-hot at the argmax, continuous columns as decoded.
pub fn block_sample(heads: &[Head], loss: ReconLoss, out: ArrayView2<f64>) -> Array2<f64> {
    let mut m = block_mean(heads, loss, out);
    for (h, r) in spans(heads) {
        match h.kind {
            HeadKind::Binary => m.slice_mut(s![.., r]).mapv_inplace(|p| if p >= 0.5 { 1.0 } else { 0.0 }),
            HeadKind::Categorical => {
                for mut row in m.slice_mut(s![.., r]).rows_mut() {
                    let best = row
                        .iter()
                        .enumerate()
                        .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
                        .map_or(0, |(i, _)| i);
                    row.fill(0.0);
                    row[best] = 1.0;
                }
            }
            HeadKind::Continuous => {}
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn heads() -> Vec<Head> {
        vec![
            Head {
                name: "c".into(),
                kind: HeadKind::Continuous,
                start: 0,
                width: 1,
            },
            Head {
                name: "b".into(),
                kind: HeadKind::Binary,
                start: 1,
                width: 1,
            },
            Head {
                name: "k".into(),
                kind: HeadKind::Categorical,
                start: 2,
                width: 3,
            },
        ]
    }

    #[test]
    fn bce_block_mixes_losses() {
        let out = array![[0.5, 0.0, 0.0, 0.0, 0.0]];
        let target = array![[1.0, 1.0, 0.0, 1.0, 0.0]];
        let (v, _) = block_loss(&heads(), ReconLoss::Bce, out.view(), target.view());
        let expected = 0.25 + std::f64::consts::LN_2 + 3f64.ln();
        assert!((v - expected).abs() < 1e-12);
        let (v, _) = block_loss(&heads(), ReconLoss::Mse, out.view(), target.view());
        assert!((v - (0.25 + 1.0 + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn sampling_thresholds_and_argmax() {
        let out = array![[1.7, 0.1, -1.0, 2.0, 0.3], [-0.2, -0.1, 5.0, 2.0, 0.3]];
        let s = block_sample(&heads(), ReconLoss::Bce, out.view());
        assert_eq!(s, array![[1.7, 1.0, 0.0, 1.0, 0.0], [-0.2, 0.0, 1.0, 0.0, 0.0]]);
        let s = block_sample(&heads(), ReconLoss::Mse, out.view());
        assert_eq!(s.row(0).to_vec(), vec![1.7, 0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn mean_backward_matches_finite_differences() {
        let out = array![[0.3, -0.4, 0.2, -1.0, 0.7]];
        let w = array![[0.5, -1.5, 2.0, 0.3, -0.7]];
        let f = |o: &Array2<f64>| (block_mean(&heads(), ReconLoss::Bce, o.view()) * &w).sum();
        let mean = block_mean(&heads(), ReconLoss::Bce, out.view());
        let g = block_mean_backward(&heads(), ReconLoss::Bce, mean.view(), w.view());
        for j in 0..5 {
            let mut p = out.clone();
            p[[0, j]] += 1e-6;
            let mut m = out.clone();
            m[[0, j]] -= 1e-6;
            let fd = (f(&p) - f(&m)) / 2e-6;
            assert!((fd - g[[0, j]]).abs() < 1e-7, "{j}: {fd} vs {}", g[[0, j]]);
        }
    }

    #[test]
    fn gather_and_scatter_round_trip() {
        let x = array![[1.0, 2.0, 3.0, 4.0, 5.0]];
        let hs = &heads()[1..];
        let block = gather(hs, x.view());
        assert_eq!(block, array![[2.0, 3.0, 4.0, 5.0]]);
        let mut row = vec![0.0; 5];
        scatter(hs, block.row(0).as_slice().unwrap(), &mut row);
        assert_eq!(row, vec![0.0, 2.0, 3.0, 4.0, 5.0]);
    }
}
