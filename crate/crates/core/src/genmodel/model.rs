use std::ops::Range;

use ndarray::{concatenate, s, Array2, ArrayView2, Axis};
use rand::Rng;

use super::layout::{block_loss, block_mean, block_mean_backward, block_sample, gather, scatter, Head, VaeLayout};
use super::{GenError, VaeFamily, VaeTrainConfig};
use crate::data::{EncodedColumn, Encoding, Group};
use crate::nn::loss::{bce_with_logits, kl_gaussian_standard_batch, l2_pairwise};
use crate::nn::{Activation, DenseNet, Gradients, NnError};
use crate::repr::{CausalModel, Latent, ReprError, Sample, World};

/// `mu + exp(log_var / 2) · eps`.
pub fn reparameterize(mu: ArrayView2<f64>, log_var: ArrayView2<f64>, eps: ArrayView2<f64>) -> Array2<f64> {
    let mut u = mu.to_owned();
    ndarray::Zip::from(&mut u)
        .and(log_var)
        .and(eps)
        .for_each(|u, &lv, &e| *u += (0.5 * lv).exp() * e);
    u
}

/// A training batch split into the model's input blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub x_alpha: Array2<f64>,
    pub x_beta: Array2<f64>,
    pub y: Array2<f64>,
    /// Dummy coding of the factual level.
    pub a: Array2<f64>,
    /// Dummy coding of the first alternative level.
    pub a_cf: Array2<f64>,
}

impl Batch {
    pub fn new(layout: &VaeLayout, x: ArrayView2<f64>, a: &[usize], y: &[f64]) -> Self {
        let alt: Vec<usize> = a.iter().map(|&l| if l == 0 { 1 } else { 0 }).collect();
        Batch {
            x_alpha: gather(&layout.alpha, x),
            x_beta: gather(&layout.beta, x),
            y: Array2::from_shape_vec((y.len(), 1), y.to_vec()).expect("column"),
            a: layout.dummies(a),
            a_cf: layout.dummies(&alt),
        }
    }

    pub fn len(&self) -> usize {
        self.a.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Weighted loss terms; `total` is their sum.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub alpha: f64,
    pub beta: f64,
    pub y: f64,
    pub kl: f64,
    pub fair: f64,
    pub tc: f64,
    pub total: f64,
}

/// Discriminator pass on real and permuted latents.
pub(crate) struct DiscriminatorStep {
    pub loss: f64,
    pub accuracy: f64,
    pub grads: Gradients,
    pub grad_real: Array2<f64>,
    pub grad_perm: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VaeModel {
    family: VaeFamily,
    with_label: bool,
    layout: VaeLayout,
    latent_alpha: usize,
    latent_beta: usize,
    columns: Vec<EncodedColumn>,
    pub(crate) encoders: Vec<DenseNet>,
    pub(crate) f_alpha: Option<DenseNet>,
    pub(crate) f_beta: DenseNet,
    pub(crate) f_y: Option<DenseNet>,
    pub(crate) discriminator: Option<DenseNet>,
}

#[derive(Clone, Copy)]
struct EncoderInputs {
    alpha: bool,
    beta: bool,
    y: bool,
    a: bool,
}

impl VaeModel {
    /// Fresh Xavier-initialised model. CVAE uses `cfg.latent_dim`; DCEVAE
    /// uses `cfg.latent_alpha + cfg.latent_beta`.
    pub fn new<R: Rng + ?Sized>(
        family: VaeFamily,
        with_label: bool,
        layout: VaeLayout,
        cfg: &VaeTrainConfig,
        rng: &mut R,
    ) -> Result<Self, GenError> {
        let (la, lb) = match family {
            VaeFamily::Cvae => (cfg.latent_dim, 0),
            VaeFamily::Dcevae => (cfg.latent_alpha, cfg.latent_beta),
        };
        let shell = Self::shell(family, with_label, layout, la, lb)?;
        let h = &cfg.hidden;
        let mlp = |i: usize, o: usize, rng: &mut R| DenseNet::mlp(i, h, o, Activation::Relu, Activation::Identity, rng);
        let encoders = (0..shell.encoder_ranges().len())
            .map(|e| {
                let r = &shell.encoder_ranges()[e];
                mlp(shell.encoder_input_dim(e), 2 * r.len(), rng)
            })
            .collect();
        let f_alpha = (shell.layout.alpha_width() > 0).then(|| mlp(shell.alpha_range().len(), shell.layout.alpha_width(), rng));
        let f_beta = mlp(shell.beta_range().len() + shell.layout.a_width(), shell.layout.beta_width(), rng);
        let f_y = with_label.then(|| mlp(shell.latent_dim() + shell.layout.a_width(), 1, rng));
        let discriminator = (family == VaeFamily::Dcevae).then(|| mlp(shell.latent_dim(), 1, rng));
        Self::from_parts(shell, encoders, f_alpha, f_beta, f_y, discriminator)
    }

    fn shell(family: VaeFamily, with_label: bool, layout: VaeLayout, la: usize, lb: usize) -> Result<Self, GenError> {
        layout.validate()?;
        if family == VaeFamily::Dcevae && layout.alpha.is_empty() {
            return Err(GenError::Config("a DCEVAE needs a non-empty alpha block".into()));
        }
        let columns = columns_of(&layout);
        let placeholder = DenseNet::new(vec![crate::nn::Dense::new(
            Array2::zeros((1, 1)),
            ndarray::Array1::zeros(1),
            Activation::Identity,
        )?])?;
        Ok(VaeModel {
            family,
            with_label,
            layout,
            latent_alpha: la,
            latent_beta: lb,
            columns,
            encoders: vec![],
            f_alpha: None,
            f_beta: placeholder,
            f_y: None,
            discriminator: None,
        })
    }

    /// Assembles a model from trained networks, checking every shape.
    pub(crate) fn from_parts(
        mut shell: VaeModel,
        encoders: Vec<DenseNet>,
        f_alpha: Option<DenseNet>,
        f_beta: DenseNet,
        f_y: Option<DenseNet>,
        discriminator: Option<DenseNet>,
    ) -> Result<Self, GenError> {
        shell.encoders = encoders;
        shell.f_alpha = f_alpha;
        shell.f_beta = f_beta;
        shell.f_y = f_y;
        shell.discriminator = discriminator;
        shell.check_shapes()?;
        Ok(shell)
    }

    pub(crate) fn assemble(
        family: VaeFamily,
        with_label: bool,
        layout: VaeLayout,
        latent: (usize, usize),
        nets: (Vec<DenseNet>, Option<DenseNet>, DenseNet, Option<DenseNet>, Option<DenseNet>),
    ) -> Result<Self, GenError> {
        let shell = Self::shell(family, with_label, layout, latent.0, latent.1)?;
        Self::from_parts(shell, nets.0, nets.1, nets.2, nets.3, nets.4)
    }

    fn check_shapes(&self) -> Result<(), GenError> {
        let check = |net: &DenseNet, input: usize, output: usize| -> Result<(), GenError> {
            for (expected, found) in [(input, net.input_dim()), (output, net.output_dim())] {
                if expected != found {
                    return Err(GenError::DimensionMismatch { expected, found });
                }
            }
            Ok(())
        };
        let ranges = self.encoder_ranges();
        if self.encoders.len() != ranges.len() {
            return Err(GenError::DimensionMismatch {
                expected: ranges.len(),
                found: self.encoders.len(),
            });
        }
        for (e, net) in self.encoders.iter().enumerate() {
            check(net, self.encoder_input_dim(e), 2 * ranges[e].len())?;
        }
        let lw = &self.layout;
        match (&self.f_alpha, lw.alpha_width()) {
            (Some(net), w) => check(net, self.alpha_range().len(), w)?,
            (None, 0) => {}
            (None, _) => return Err(GenError::Config("missing alpha decoder".into())),
        }
        check(&self.f_beta, self.beta_range().len() + lw.a_width(), lw.beta_width())?;
        match (&self.f_y, self.with_label) {
            (Some(net), true) => check(net, self.latent_dim() + lw.a_width(), 1)?,
            (None, false) => {}
            _ => return Err(GenError::Config("label decoder does not match the model family".into())),
        }
        match (&self.discriminator, self.family) {
            (Some(net), VaeFamily::Dcevae) => check(net, self.latent_dim(), 1)?,
            (None, VaeFamily::Cvae) => {}
            _ => return Err(GenError::Config("discriminator does not match the model family".into())),
        }
        Ok(())
    }

    pub fn family(&self) -> VaeFamily {
        self.family
    }

    pub fn with_label(&self) -> bool {
        self.with_label
    }

    pub fn layout(&self) -> &VaeLayout {
        &self.layout
    }

    /// `(latent_dim, 0)` for a CVAE, `(dim U_α, dim U_β)` for a DCEVAE.
    pub fn latent_dims(&self) -> (usize, usize) {
        (self.latent_alpha, self.latent_beta)
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_alpha + self.latent_beta
    }

    /// Latent coordinates read by `f_α`.
    pub fn alpha_range(&self) -> Range<usize> {
        0..self.latent_alpha
    }

    /// Latent coordinates read by `f_β`.
    pub fn beta_range(&self) -> Range<usize> {
        match self.family {
            VaeFamily::Cvae => 0..self.latent_alpha,
            VaeFamily::Dcevae => self.latent_alpha..self.latent_dim(),
        }
    }

    fn encoder_ranges(&self) -> Vec<Range<usize>> {
        match self.family {
            VaeFamily::Cvae => vec![0..self.latent_alpha],
            VaeFamily::Dcevae => vec![0..self.latent_alpha, self.latent_alpha..self.latent_dim()],
        }
    }

    fn encoder_inputs(&self, e: usize) -> EncoderInputs {
        let y = self.with_label;
        match (self.family, e) {
            (VaeFamily::Cvae, _) => EncoderInputs {
                alpha: true,
                beta: true,
                y,
                a: true,
            },
            (VaeFamily::Dcevae, 0) => EncoderInputs {
                alpha: true,
                beta: false,
                y,
                a: false,
            },
            _ => EncoderInputs {
                alpha: false,
                beta: true,
                y,
                a: true,
            },
        }
    }

    fn encoder_input_dim(&self, e: usize) -> usize {
        let i = self.encoder_inputs(e);
        let l = &self.layout;
        i.alpha as usize * l.alpha_width() + i.beta as usize * l.beta_width() + i.y as usize + i.a as usize * l.a_width()
    }

    fn encoder_input(&self, e: usize, b: &Batch) -> Array2<f64> {
        let i = self.encoder_inputs(e);
        let mut parts = Vec::new();
        if i.alpha {
            parts.push(b.x_alpha.view());
        }
        if i.beta {
            parts.push(b.x_beta.view());
        }
        if i.y {
            parts.push(b.y.view());
        }
        if i.a {
            parts.push(b.a.view());
        }
        concatenate(Axis(1), &parts).expect("equal rows")
    }

    /// Networks updated by the VAE optimizer, in parameter order.
    pub(crate) fn vae_nets(&self) -> Vec<&DenseNet> {
        let mut v: Vec<&DenseNet> = self.encoders.iter().collect();
        v.extend(self.f_alpha.iter());
        v.push(&self.f_beta);
        v.extend(self.f_y.iter());
        v
    }

    pub fn vae_params(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for n in self.vae_nets() {
            n.flat_params_into(&mut out);
        }
        out
    }

    pub fn set_vae_params(&mut self, params: &[f64]) -> Result<(), NnError> {
        let mut k = 0;
        let mut nets: Vec<&mut DenseNet> = self.encoders.iter_mut().collect();
        nets.extend(self.f_alpha.iter_mut());
        nets.push(&mut self.f_beta);
        nets.extend(self.f_y.iter_mut());
        for n in nets {
            let len = n.n_params();
            n.set_flat_params(&params[k..k + len])?;
            k += len;
        }
        Ok(())
    }

    /// Encoder means and log-variances.
    pub fn encode(&self, b: &Batch) -> Result<(Array2<f64>, Array2<f64>), GenError> {
        let n = b.len();
        let mut mu = Array2::zeros((n, self.latent_dim()));
        let mut lv = Array2::zeros((n, self.latent_dim()));
        for (e, r) in self.encoder_ranges().into_iter().enumerate() {
            let out = self.encoders[e].predict_batch(self.encoder_input(e, b).view())?;
            let d = r.len();
            mu.slice_mut(s![.., r.clone()]).assign(&out.slice(s![.., 0..d]));
            lv.slice_mut(s![.., r]).assign(&out.slice(s![.., d..2 * d]));
        }
        Ok((mu, lv))
    }

    /// Loss on a batch and, if `eps` is given, gradients for the VAE
    /// parameters. `eps = None` scores the encoder mean. `perm` enables the
    /// total-correlation term.
    pub fn evaluate(
        &self,
        b: &Batch,
        cfg: &VaeTrainConfig,
        eps: Option<ArrayView2<f64>>,
        perm: Option<&[usize]>,
        want_grad: bool,
    ) -> Result<(LossBreakdown, Vec<f64>), GenError> {
        let n = b.len();
        let ld = self.latent_dim();
        let lw = &self.layout;
        let ranges = self.encoder_ranges();
        let mut tapes = Vec::with_capacity(ranges.len());
        let mut mu = Array2::zeros((n, ld));
        let mut lv = Array2::zeros((n, ld));
        for (e, r) in ranges.iter().enumerate() {
            let tape = self.encoders[e].forward_batch(self.encoder_input(e, b).view())?;
            let d = r.len();
            mu.slice_mut(s![.., r.clone()]).assign(&tape.output.slice(s![.., 0..d]));
            lv.slice_mut(s![.., r.clone()]).assign(&tape.output.slice(s![.., d..2 * d]));
            tapes.push(tape);
        }
        let u = match eps {
            Some(eps) => reparameterize(mu.view(), lv.view(), eps),
            None => mu.clone(),
        };
        let mut loss = LossBreakdown::default();
        let mut du = Array2::<f64>::zeros((n, ld));
        let mut grads_alpha = None;
        if let Some(fa) = &self.f_alpha {
            let tape = fa.forward_batch(u.slice(s![.., self.alpha_range()]))?;
            let (v, g) = block_loss(&lw.alpha, lw.l_alpha, tape.output.view(), b.x_alpha.view());
            loss.alpha = cfg.w_alpha * v;
            if want_grad {
                let (gr, din) = fa.backward(&tape, (g * cfg.w_alpha).view());
                let mut t = du.slice_mut(s![.., self.alpha_range()]);
                t += &din;
                grads_alpha = Some(gr);
            }
        }
        let lb = self.beta_range().len();
        let beta_in = concatenate![Axis(1), u.slice(s![.., self.beta_range()]), b.a.view()];
        let tape = self.f_beta.forward_batch(beta_in.view())?;
        let (v, g) = block_loss(&lw.beta, lw.l_beta, tape.output.view(), b.x_beta.view());
        loss.beta = cfg.w_beta * v;
        let mut grads_beta = None;
        if want_grad {
            let (gr, din) = self.f_beta.backward(&tape, (g * cfg.w_beta).view());
            let mut t = du.slice_mut(s![.., self.beta_range()]);
            t += &din.slice(s![.., 0..lb]);
            grads_beta = Some(gr);
        }
        let mut grads_y = None;
        if let Some(fy) = &self.f_y {
            let head = [lw.label_head()];
            let tape = fy.forward_batch(concatenate![Axis(1), u.view(), b.a.view()].view())?;
            let (v, g) = block_loss(&head, lw.l_y, tape.output.view(), b.y.view());
            loss.y = cfg.w_y * v;
            let mut g_out = g * cfg.w_y;
            let mut cf = None;
            if cfg.w_fair > 0.0 {
                let tape_cf = fy.forward_batch(concatenate![Axis(1), u.view(), b.a_cf.view()].view())?;
                let m = block_mean(&head, lw.l_y, tape.output.view());
                let m_cf = block_mean(&head, lw.l_y, tape_cf.output.view());
                let (norm, gd) = l2_pairwise(m.view(), m_cf.view());
                loss.fair = cfg.w_fair * norm;
                let gd = gd * cfg.w_fair;
                g_out += &block_mean_backward(&head, lw.l_y, m.view(), gd.view());
                let g_cf = block_mean_backward(&head, lw.l_y, m_cf.view(), (-gd).view());
                cf = Some((tape_cf, g_cf));
            }
            if want_grad {
                let (mut gr, din) = fy.backward(&tape, g_out.view());
                du += &din.slice(s![.., 0..ld]);
                if let Some((tape_cf, g_cf)) = cf {
                    let (gr_cf, din_cf) = fy.backward(&tape_cf, g_cf.view());
                    add_grads(&mut gr, &gr_cf);
                    du += &din_cf.slice(s![.., 0..ld]);
                }
                grads_y = Some(gr);
            }
        }
        let (kl, gmu, glv) = kl_gaussian_standard_batch(mu.view(), lv.view());
        loss.kl = cfg.w_u * kl;
        if let (Some(_), Some(perm)) = (&self.discriminator, perm) {
            if cfg.w_h > 0.0 {
                let zp = self.permute_beta(u.view(), perm);
                let step = self.discriminator_step(u.view(), zp.view())?;
                loss.tc = -cfg.w_h * step.loss;
                if want_grad {
                    du -= &(step.grad_real * cfg.w_h);
                    let gp = step.grad_perm * cfg.w_h;
                    let ar = self.alpha_range();
                    let br = self.beta_range();
                    for (i, &p) in perm.iter().enumerate() {
                        for j in ar.clone() {
                            du[[i, j]] -= gp[[i, j]];
                        }
                        for j in br.clone() {
                            du[[p, j]] -= gp[[i, j]];
                        }
                    }
                }
            }
        }
        loss.total = loss.alpha + loss.beta + loss.y + loss.kl + loss.fair + loss.tc;
        if !want_grad {
            return Ok((loss, Vec::new()));
        }
        let dmu = &du + &(gmu * cfg.w_u);
        let mut dlv = glv * cfg.w_u;
        if let Some(eps) = eps {
            ndarray::Zip::from(&mut dlv)
                .and(&du)
                .and(eps)
                .and(&lv)
                .for_each(|g, &d, &e, &l| *g += d * e * 0.5 * (0.5 * l).exp());
        }
        let mut flat = Vec::new();
        for (e, r) in ranges.iter().enumerate() {
            let g_out = concatenate![Axis(1), dmu.slice(s![.., r.clone()]), dlv.slice(s![.., r.clone()])];
            let (gr, _) = self.encoders[e].backward(&tapes[e], g_out.view());
            gr.flatten_into(&mut flat);
        }
        for gr in grads_alpha.iter().chain(grads_beta.iter()).chain(grads_y.iter()) {
            gr.flatten_into(&mut flat);
        }
        Ok((loss, flat))
    }

    /// `[u_α, u_β]` with the `u_β` rows reordered by `perm`.
    pub(crate) fn permute_beta(&self, u: ArrayView2<f64>, perm: &[usize]) -> Array2<f64> {
        let mut zp = u.to_owned();
        let br = self.beta_range();
        for (i, &p) in perm.iter().enumerate() {
            zp.slice_mut(s![i, br.clone()]).assign(&u.slice(s![p, br.clone()]));
        }
        zp
    }

    /// Discriminator loss `bce(D(z), 1) + bce(D(z_perm), 0)` with parameter
    /// and input gradients.
    pub(crate) fn discriminator_step(&self, z: ArrayView2<f64>, zp: ArrayView2<f64>) -> Result<DiscriminatorStep, GenError> {
        let d = self
            .discriminator
            .as_ref()
            .ok_or_else(|| GenError::Config("model has no discriminator".into()))?;
        let n = z.nrows();
        let tr = d.forward_batch(z)?;
        let tp = d.forward_batch(zp)?;
        let (lr, gr) = bce_with_logits(tr.output.view(), Array2::ones((n, 1)).view());
        let (lp, gp) = bce_with_logits(tp.output.view(), Array2::zeros((n, 1)).view());
        let correct = tr.output.iter().filter(|&&v| v > 0.0).count() + tp.output.iter().filter(|&&v| v <= 0.0).count();
        let (mut grads, grad_real) = d.backward(&tr, gr.view());
        let (grads_p, grad_perm) = d.backward(&tp, gp.view());
        add_grads(&mut grads, &grads_p);
        Ok(DiscriminatorStep {
            loss: lr + lp,
            accuracy: correct as f64 / (2 * n) as f64,
            grads,
            grad_real,
            grad_perm,
        })
    }

    /// Encoder means for a batch of encoded rows.
    pub fn abduct_batch(&self, x: ArrayView2<f64>, a: &[usize], y: Option<&[f64]>) -> Result<Array2<f64>, GenError> {
        if x.ncols() != self.layout.feature_dim {
            return Err(GenError::DimensionMismatch {
                expected: self.layout.feature_dim,
                found: x.ncols(),
            });
        }
        let zeros;
        let y = match y {
            Some(y) => y,
            None if !self.with_label => {
                zeros = vec![0.0; a.len()];
                &zeros
            }
            None => return Err(GenError::Config("this model abducts from the label as well".into())),
        };
        Ok(self.encode(&Batch::new(&self.layout, x, a, y))?.0)
    }

    /// Generated features (sample form) and label expectation under
    /// `do(A = level)` for each row of `u`.
    pub fn decode_batch(&self, u: ArrayView2<f64>, levels: &[usize]) -> Result<(Array2<f64>, Option<Vec<f64>>), GenError> {
        if u.ncols() != self.latent_dim() {
            return Err(GenError::DimensionMismatch {
                expected: self.latent_dim(),
                found: u.ncols(),
            });
        }
        if let Some(&bad) = levels.iter().find(|&&l| l >= self.layout.n_levels) {
            return Err(GenError::Config(format!("unknown sensitive level {bad}")));
        }
        let lw = &self.layout;
        let n = u.nrows();
        let a = lw.dummies(levels);
        let mut x = Array2::zeros((n, lw.feature_dim));
        if let Some(fa) = &self.f_alpha {
            let out = block_sample(&lw.alpha, lw.l_alpha, fa.predict_batch(u.slice(s![.., self.alpha_range()]))?.view());
            place(&lw.alpha, out.view(), &mut x);
        }
        let beta_in = concatenate![Axis(1), u.slice(s![.., self.beta_range()]), a.view()];
        let out = block_sample(&lw.beta, lw.l_beta, self.f_beta.predict_batch(beta_in.view())?.view());
        place(&lw.beta, out.view(), &mut x);
        let y = match &self.f_y {
            Some(fy) => {
                let out = fy.predict_batch(concatenate![Axis(1), u, a.view()].view())?;
                Some(block_mean(&[lw.label_head()], lw.l_y, out.view()).column(0).to_vec())
            }
            None => None,
        };
        Ok((x, y))
    }

    pub fn abduct(&self, x: &[f64], a: usize, y: Option<f64>) -> Result<Vec<f64>, GenError> {
        let xv = ArrayView2::from_shape((1, x.len()), x).expect("row");
        let ys = y.map(|v| vec![v]);
        Ok(self.abduct_batch(xv, &[a], ys.as_deref())?.row(0).to_vec())
    }

    pub fn decode(&self, u: &[f64], level: usize) -> Result<(Vec<f64>, Option<f64>), GenError> {
        let uv = ArrayView2::from_shape((1, u.len()), u).expect("row");
        let (x, y) = self.decode_batch(uv, &[level])?;
        Ok((x.row(0).to_vec(), y.map(|v| v[0])))
    }
}

fn place(heads: &[Head], block: ArrayView2<f64>, x: &mut Array2<f64>) {
    for (i, row) in block.rows().into_iter().enumerate() {
        let mut target = x.row_mut(i);
        scatter(heads, row.as_slice().expect("contiguous"), target.as_slice_mut().expect("contiguous"));
    }
}

fn add_grads(acc: &mut Gradients, other: &Gradients) {
    for ((w, b), (w2, b2)) in acc.layers.iter_mut().zip(&other.layers) {
        *w += w2;
        *b += b2;
    }
}

fn columns_of(layout: &VaeLayout) -> Vec<EncodedColumn> {
    let mut cols: Vec<EncodedColumn> = layout
        .alpha
        .iter()
        .map(|h| (h, Group::Alpha))
        .chain(layout.beta.iter().map(|h| (h, Group::Beta)))
        .map(|(h, group)| EncodedColumn {
            name: h.name.clone(),
            encoding: match h.kind {
                super::HeadKind::Continuous => Encoding::Continuous,
                super::HeadKind::Binary => Encoding::Binary,
                super::HeadKind::Categorical => Encoding::Categorical,
            },
            group,
            start: h.start,
            width: h.width,
        })
        .collect();
    cols.sort_by_key(|c| c.start);
    cols
}

fn model_err(e: GenError) -> ReprError {
    ReprError::Model(e.to_string())
}

impl CausalModel for VaeModel {
    fn n_levels(&self) -> usize {
        self.layout.n_levels
    }

    fn columns(&self) -> &[EncodedColumn] {
        &self.columns
    }

    fn sensitive_name(&self) -> &str {
        &self.layout.sensitive
    }

    fn label_name(&self) -> &str {
        &self.layout.label_name
    }

    fn non_descendant_columns(&self) -> Vec<usize> {
        self.layout.non_descendants()
    }

    fn models_label(&self) -> bool {
        self.with_label
    }

    fn abduct(&self, s: &Sample) -> Result<Latent, ReprError> {
        if self.with_label && s.y.is_none() {
            return Err(ReprError::MissingLabel);
        }
        if s.a >= self.layout.n_levels {
            return Err(ReprError::UnknownLevel(s.a));
        }
        let u = VaeModel::abduct(self, &s.x, s.a, s.y).map_err(|e| match e {
            GenError::DimensionMismatch { expected, found } => ReprError::DimensionMismatch { expected, found },
            e => model_err(e),
        })?;
        Ok(Latent { full: u.clone(), repr: u })
    }

    fn counterfactual(&self, s: &Sample, latent: &Latent, level: usize, clamp: &[usize]) -> Result<World, ReprError> {
        if level >= self.layout.n_levels {
            return Err(ReprError::UnknownLevel(level));
        }
        let (mut x, y) = VaeModel::decode(self, &latent.full, level).map_err(model_err)?;
        for k in self.layout.non_descendants().into_iter().chain(clamp.iter().copied()) {
            let v = *s.x.get(k).ok_or(ReprError::DimensionMismatch {
                expected: self.layout.feature_dim,
                found: k,
            })?;
            x[k] = v;
        }
        Ok(World { x, y })
    }

    fn decode(&self, latent: &Latent, level: usize) -> Result<World, ReprError> {
        if level >= self.layout.n_levels {
            return Err(ReprError::UnknownLevel(level));
        }
        let (x, y) = VaeModel::decode(self, &latent.full, level).map_err(model_err)?;
        Ok(World { x, y })
    }
}
