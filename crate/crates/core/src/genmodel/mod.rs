//! Learned causal models. A CVAE abducts one latent `U`; a DCEVAE splits it
//! into `U_α` (behind `X_α`) and `U_β` (behind `X_β`, disentangled from
//! `U_α` by a permutation discriminator). Both expose the
//! [`CausalModel`](crate::repr::CausalModel) interface.

mod checkpoint;
mod layout;
mod model;
mod train;

pub use checkpoint::{VaeCheckpoint, VAE_FORMAT};
pub use layout::{Head, HeadKind, ReconLoss, VaeLayout};
pub use model::{reparameterize, Batch, LossBreakdown, VaeModel};
pub use train::{train_vae, train_vae_with_validation, EpochRecord, TrainHistory, TrainedVae};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::DataError;
use crate::nn::NnError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenError {
    #[error("training loss became non-finite at epoch {0}")]
    NonFiniteLoss(usize),
    #[error("dataset has no rows")]
    EmptyDataset,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VaeFamily {
    Cvae,
    Dcevae,
}

impl VaeFamily {
    /// Checkpoint tag: `cvae`, `cvae-noY`, `dcevae` or `dcevae-noY`.
    pub fn tag(self, with_label: bool) -> String {
        let base = match self {
            VaeFamily::Cvae => "cvae",
            VaeFamily::Dcevae => "dcevae",
        };
        if with_label {
            base.to_string()
        } else {
            format!("{base}-noY")
        }
    }

    pub fn parse_tag(tag: &str) -> Option<(VaeFamily, bool)> {
        Some(match tag {
            "cvae" => (VaeFamily::Cvae, true),
            "cvae-noY" => (VaeFamily::Cvae, false),
            "dcevae" => (VaeFamily::Dcevae, true),
            "dcevae-noY" => (VaeFamily::Dcevae, false),
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VaeTrainConfig {
    pub w_alpha: f64,
    pub w_beta: f64,
    pub w_y: f64,
    pub w_u: f64,
    pub w_fair: f64,
    /// Total-correlation weight (DCEVAE only).
    pub w_h: f64,
    pub l_alpha: ReconLoss,
    pub l_beta: ReconLoss,
    pub l_y: ReconLoss,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub patience: usize,
    /// CVAE latent width.
    pub latent_dim: usize,
    /// DCEVAE `U_α` and `U_β` widths.
    pub latent_alpha: usize,
    pub latent_beta: usize,
    pub hidden: Vec<usize>,
    /// Share of the training rows held out for early stopping.
    pub val_fraction: f64,
}

impl VaeTrainConfig {
    pub fn new(family: VaeFamily) -> Self {
        let (w_fair, w_h) = match family {
            VaeFamily::Cvae => (0.15, 0.0),
            VaeFamily::Dcevae => (0.2, 0.4),
        };
        VaeTrainConfig {
            w_alpha: 1.0,
            w_beta: 1.0,
            w_y: 1.0,
            w_u: 1.0,
            w_fair,
            w_h,
            l_alpha: ReconLoss::Mse,
            l_beta: ReconLoss::Mse,
            l_y: ReconLoss::Mse,
            batch_size: 256,
            learning_rate: 0.001,
            max_epochs: 200,
            patience: 10,
            latent_dim: 10,
            latent_alpha: 5,
            latent_beta: 5,
            hidden: vec![64, 64],
            val_fraction: 0.2,
        }
    }

    pub fn law_school(family: VaeFamily) -> Self {
        VaeTrainConfig {
            l_alpha: ReconLoss::Bce,
            ..Self::new(family)
        }
    }

    pub fn adult(family: VaeFamily) -> Self {
        VaeTrainConfig {
            l_alpha: ReconLoss::Bce,
            l_beta: ReconLoss::Bce,
            l_y: ReconLoss::Bce,
            ..Self::new(family)
        }
    }

    /// Settings for the model trained without `Y`.
    pub fn without_label(&self) -> Self {
        VaeTrainConfig {
            w_y: 0.0,
            w_fair: 0.0,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), GenError> {
        let weights = [
            ("w_alpha", self.w_alpha),
            ("w_beta", self.w_beta),
            ("w_y", self.w_y),
            ("w_u", self.w_u),
            ("w_fair", self.w_fair),
            ("w_h", self.w_h),
        ];
        for (name, w) in weights {
            if !(w.is_finite() && w >= 0.0) {
                return Err(GenError::Config(format!("{name} must be a finite value ≥ 0, got {w}")));
            }
        }
        if self.batch_size == 0 {
            return Err(GenError::Config("batch_size must be ≥ 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(GenError::Config(format!("learning_rate must be > 0, got {}", self.learning_rate)));
        }
        if self.max_epochs == 0 {
            return Err(GenError::Config("max_epochs must be ≥ 1".into()));
        }
        if self.latent_dim == 0 || self.latent_alpha == 0 || self.latent_beta == 0 {
            return Err(GenError::Config("latent widths must be ≥ 1".into()));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(GenError::Config(format!("val_fraction must lie in [0, 1), got {}", self.val_fraction)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_presets() {
        let law = VaeTrainConfig::law_school(VaeFamily::Cvae);
        assert_eq!((law.l_alpha, law.l_beta, law.l_y), (ReconLoss::Bce, ReconLoss::Mse, ReconLoss::Mse));
        let adult = VaeTrainConfig::adult(VaeFamily::Dcevae);
        assert_eq!((adult.l_alpha, adult.l_beta, adult.l_y), (ReconLoss::Bce, ReconLoss::Bce, ReconLoss::Bce));
        assert_eq!((adult.w_h, adult.w_fair), (0.4, 0.2));
        assert_eq!(law.w_fair, 0.15);
        assert_eq!((law.batch_size, law.learning_rate), (256, 0.001));
    }

    #[test]
    fn rejects_bad_settings() {
        let mut c = VaeTrainConfig::new(VaeFamily::Cvae);
        c.w_u = -1.0;
        assert!(c.validate().is_err());
        let mut c = VaeTrainConfig::new(VaeFamily::Cvae);
        c.batch_size = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn family_tags_round_trip() {
        for f in [VaeFamily::Cvae, VaeFamily::Dcevae] {
            for y in [true, false] {
                assert_eq!(VaeFamily::parse_tag(&f.tag(y)), Some((f, y)));
            }
        }
        assert_eq!(VaeFamily::parse_tag("vae"), None);
    }
}
