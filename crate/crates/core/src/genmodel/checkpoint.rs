use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::VaeModel;
use super::{GenError, VaeFamily, VaeLayout};
use crate::nn::DenseNet;

pub const VAE_FORMAT: &str = "cfrep-vae/1";

/// Serialized [`VaeModel`]. The header fields (`family`, `schema_hash`,
/// `latent_dims`) are checked on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VaeCheckpoint {
    pub format: String,
    /// `cvae`, `cvae-noY`, `dcevae` or `dcevae-noY`.
    pub family: String,
    pub schema_hash: String,
    pub latent_dims: Vec<usize>,
    pub layout: VaeLayout,
    pub encoders: Vec<DenseNet>,
    pub f_alpha: Option<DenseNet>,
    pub f_beta: DenseNet,
    pub f_y: Option<DenseNet>,
    pub discriminator: Option<DenseNet>,
}

impl VaeCheckpoint {
    pub fn from_model(m: &VaeModel, schema_hash: &str) -> Self {
        let (la, lb) = m.latent_dims();
        VaeCheckpoint {
            format: VAE_FORMAT.into(),
            family: m.family().tag(m.with_label()),
            schema_hash: schema_hash.into(),
            latent_dims: match m.family() {
                VaeFamily::Cvae => vec![la],
                VaeFamily::Dcevae => vec![la, lb],
            },
            layout: m.layout().clone(),
            encoders: m.encoders.clone(),
            f_alpha: m.f_alpha.clone(),
            f_beta: m.f_beta.clone(),
            f_y: m.f_y.clone(),
            discriminator: m.discriminator.clone(),
        }
    }

    /// Rebuilds the model; `schema_hash`, when given, must match the header.
    pub fn into_model(self, schema_hash: Option<&str>) -> Result<VaeModel, GenError> {
        if self.format != VAE_FORMAT {
            return Err(GenError::Checkpoint(format!("unsupported format `{}`", self.format)));
        }
        if let Some(h) = schema_hash {
            if h != self.schema_hash {
                return Err(GenError::Checkpoint("checkpoint was trained on a different schema".into()));
            }
        }
        let (family, with_label) = VaeFamily::parse_tag(&self.family)
            .ok_or_else(|| GenError::Checkpoint(format!("unknown model family `{}`", self.family)))?;
        let latent = match (family, self.latent_dims.as_slice()) {
            (VaeFamily::Cvae, &[l]) => (l, 0),
            (VaeFamily::Dcevae, &[la, lb]) => (la, lb),
            _ => return Err(GenError::Checkpoint("latent dims do not match the family".into())),
        };
        VaeModel::assemble(
            family,
            with_label,
            self.layout,
            latent,
            (self.encoders, self.f_alpha, self.f_beta, self.f_y, self.discriminator),
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, GenError> {
        serde_json::from_str(text).map_err(|e| GenError::Checkpoint(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<(), GenError> {
        std::fs::write(path, self.to_json()).map_err(|e| GenError::Checkpoint(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, GenError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| GenError::Checkpoint(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::generate_synthetic;
    use crate::genmodel::{VaeTrainConfig, ReconLoss};
    use rand::SeedableRng;

    fn model() -> VaeModel {
        let d = generate_synthetic(20, 0);
        let cfg = VaeTrainConfig::new(VaeFamily::Cvae);
        let layout = VaeLayout::from_dataset(&d, ReconLoss::Mse, ReconLoss::Mse, ReconLoss::Mse).unwrap();
        VaeModel::new(VaeFamily::Cvae, false, layout, &cfg, &mut rand_chacha::ChaCha8Rng::seed_from_u64(1)).unwrap()
    }

    #[test]
    fn round_trips_bit_exact() {
        let m = model();
        let ck = VaeCheckpoint::from_model(&m, "abc");
        assert_eq!(ck.family, "cvae-noY");
        assert_eq!(ck.latent_dims, vec![10]);
        let back = VaeCheckpoint::from_json(&ck.to_json()).unwrap().into_model(Some("abc")).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn rejects_mismatches() {
        let ck = VaeCheckpoint::from_model(&model(), "abc");
        assert!(ck.clone().into_model(Some("other")).is_err());
        let mut bad = ck.clone();
        bad.latent_dims = vec![5, 5];
        assert!(bad.into_model(None).is_err());
        let mut bad = ck.clone();
        bad.family = "cvae".into();
        assert!(bad.into_model(None).is_err());
        let mut bad = ck;
        bad.latent_dims = vec![9];
        assert!(matches!(bad.into_model(None), Err(GenError::DimensionMismatch { .. })));
    }
}
