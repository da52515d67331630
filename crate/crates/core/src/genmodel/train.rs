use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::model::{reparameterize, Batch, VaeModel};
use super::{GenError, VaeFamily, VaeLayout, VaeTrainConfig};
use crate::data::{split, Dataset, SplitSpec};
use crate::nn::Adam;

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean total loss over the epoch's batches.
    pub train_loss: f64,
    /// Total loss on the held-out rows with `u` at the encoder mean.
    pub val_loss: f64,
    pub discriminator_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainHistory {
    /// Mean-`u` loss of the initial model on the training rows.
    pub initial_train_loss: f64,
    pub initial_val_loss: f64,
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    /// Mean-`u` loss of the returned model on the training rows.
    pub final_train_loss: f64,
    pub stopped_early: bool,
}

#[derive(Debug, Clone)]
pub struct TrainedVae {
    pub model: VaeModel,
    pub history: TrainHistory,
}

impl Batch {
    pub fn select(&self, rows: &[usize]) -> Batch {
        Batch {
            x_alpha: self.x_alpha.select(Axis(0), rows),
            x_beta: self.x_beta.select(Axis(0), rows),
            y: self.y.select(Axis(0), rows),
            a: self.a.select(Axis(0), rows),
            a_cf: self.a_cf.select(Axis(0), rows),
        }
    }
}

fn normal(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rand::Rng::sample(rng, StandardNormal))
}

fn permutation(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

fn holdout(n: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>), GenError> {
    if fraction == 0.0 || n < 2 {
        let all: Vec<usize> = (0..n).collect();
        return Ok((all.clone(), all));
    }
    let spec = SplitSpec {
        fractions: vec![1.0 - fraction, fraction],
        seed,
    };
    let mut parts = split(n, &spec)?;
    let val = parts.pop().expect("two parts");
    Ok((parts.pop().expect("two parts"), val))
}

/// Trains a CVAE or DCEVAE on an encoded (and usually standardized)
/// dataset, holding out `cfg.val_fraction` of the rows for early stopping.
/// Returns the parameters with the lowest validation loss.
pub fn train_vae(
    family: VaeFamily,
    with_label: bool,
    data: &Dataset,
    cfg: &VaeTrainConfig,
    seed: u64,
) -> Result<TrainedVae, GenError> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(GenError::EmptyDataset);
    }
    let (train_rows, val_rows) = holdout(data.len(), cfg.val_fraction, seed ^ 0x5eed)?;
    train_vae_with_validation(family, with_label, &data.subset(&train_rows), &data.subset(&val_rows), cfg, seed)
}

/// As [`train_vae`] with an explicit validation set.
pub fn train_vae_with_validation(
    family: VaeFamily,
    with_label: bool,
    train: &Dataset,
    val: &Dataset,
    cfg: &VaeTrainConfig,
    seed: u64,
) -> Result<TrainedVae, GenError> {
    cfg.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(GenError::EmptyDataset);
    }
    let layout = VaeLayout::from_dataset(train, cfg.l_alpha, cfg.l_beta, cfg.l_y)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = VaeModel::new(family, with_label, layout.clone(), cfg, &mut rng)?;
    let train = Batch::new(&layout, train.x.view(), &train.a, &train.y);
    let val = Batch::new(&layout, val.x.view(), &val.a, &val.y);
    let score = |m: &VaeModel, b: &Batch| m.evaluate(b, cfg, None, None, false).map(|(l, _)| l.total);

    let mut params = model.vae_params();
    let mut adam = Adam::new(cfg.learning_rate, params.len())?;
    let mut disc_adam = match &model.discriminator {
        Some(d) => Some(Adam::new(cfg.learning_rate, d.n_params())?),
        None => None,
    };
    let initial_train_loss = score(&model, &train)?;
    let initial_val_loss = score(&model, &val)?;
    let mut best = (initial_val_loss, 0usize, model.clone());
    let mut since_best = 0;
    let mut epochs = Vec::new();
    let mut stopped_early = false;
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        let mut batches = 0;
        let mut disc_acc = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let b = train.select(chunk);
            let eps = normal(&mut rng, chunk.len(), model.latent_dim());
            let perm = model.discriminator.is_some().then(|| permutation(&mut rng, chunk.len()));
            if let (Some(perm), Some(opt)) = (&perm, disc_adam.as_mut()) {
                let (mu, lv) = model.encode(&b)?;
                let u = reparameterize(mu.view(), lv.view(), eps.view());
                disc_acc += discriminator_update(&mut model, u.view(), perm, opt)?;
            }
            let (loss, grads) = model.evaluate(&b, cfg, Some(eps.view()), perm.as_deref(), true)?;
            if !loss.total.is_finite() {
                return Err(GenError::NonFiniteLoss(epoch));
            }
            adam.step(&mut params, &grads).map_err(|_| GenError::NonFiniteLoss(epoch))?;
            model.set_vae_params(&params)?;
            sum += loss.total;
            batches += 1;
        }
        let val_loss = score(&model, &val)?;
        if !val_loss.is_finite() {
            return Err(GenError::NonFiniteLoss(epoch));
        }
        epochs.push(EpochRecord {
            epoch,
            train_loss: sum / batches as f64,
            val_loss,
            discriminator_accuracy: disc_adam.as_ref().map(|_| disc_acc / batches as f64),
        });
        log::debug!("{} epoch {epoch}: train {:.5} val {val_loss:.5}", family.tag(with_label), sum / batches as f64);
        if val_loss < best.0 {
            best = (val_loss, epoch, model.clone());
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                stopped_early = true;
                break;
            }
        }
    }
    let (best_val_loss, best_epoch, model) = best;
    let final_train_loss = score(&model, &train)?;
    Ok(TrainedVae {
        model,
        history: TrainHistory {
            initial_train_loss,
            initial_val_loss,
            epochs,
            best_epoch,
            best_val_loss,
            final_train_loss,
            stopped_early,
        },
    })
}

/// One optimizer step of the discriminator on detached latents. Returns
/// its accuracy before the step.
fn discriminator_update(model: &mut VaeModel, u: ArrayView2<f64>, perm: &[usize], opt: &mut Adam) -> Result<f64, GenError> {
    let zp = model.permute_beta(u, perm);
    let step = model.discriminator_step(u, zp.view())?;
    let d = model.discriminator.as_mut().expect("checked by caller");
    let mut p = d.flat_params();
    opt.step(&mut p, &step.grads.flatten())?;
    d.set_flat_params(&p)?;
    Ok(step.accuracy)
}
