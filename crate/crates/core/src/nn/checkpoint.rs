use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{Activation, Dense, DenseNet, NnError};

pub const NET_FORMAT: &str = "cfrep-densenet/1";

/// Serialized form of a [`DenseNet`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetCheckpoint {
    pub format: String,
    pub layers: Vec<LayerRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    pub input: usize,
    pub output: usize,
    pub activation: Activation,
    /// Row-major `output × input`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl From<DenseNet> for NetCheckpoint {
    fn from(net: DenseNet) -> Self {
        NetCheckpoint {
            format: NET_FORMAT.to_string(),
            layers: net
                .layers
                .into_iter()
                .map(|l| LayerRecord {
                    input: l.input_dim(),
                    output: l.output_dim(),
                    activation: l.activation,
                    weights: l.weights.iter().copied().collect(),
                    bias: l.bias.to_vec(),
                })
                .collect(),
        }
    }
}

impl TryFrom<NetCheckpoint> for DenseNet {
    type Error = NnError;

    fn try_from(c: NetCheckpoint) -> Result<Self, NnError> {
        if c.format != NET_FORMAT {
            return Err(NnError::Checkpoint(format!("unsupported format tag `{}`", c.format)));
        }
        let layers = c
            .layers
            .into_iter()
            .enumerate()
            .map(|(i, r)| {
                let w = Array2::from_shape_vec((r.output, r.input), r.weights)
                    .map_err(|_| NnError::Checkpoint(format!("layer {i}: weight count does not match shape")))?;
                Dense::new(w, Array1::from(r.bias), r.activation)
                    .map_err(|e| NnError::Checkpoint(format!("layer {i}: {e}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        DenseNet::new(layers)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn json_round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let net = DenseNet::mlp(3, &[4, 4], 2, Activation::Relu, Activation::Identity, &mut rng);
        let text = serde_json::to_string(&net).unwrap();
        let back: DenseNet = serde_json::from_str(&text).unwrap();
        assert_eq!(back, net);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let net = DenseNet::mlp(3, &[4], 2, Activation::Relu, Activation::Identity, &mut rng);
        let mut c = NetCheckpoint::from(net.clone());
        c.layers[0].weights.pop();
        assert!(matches!(DenseNet::try_from(c), Err(NnError::Checkpoint(_))));
        let mut c = NetCheckpoint::from(net);
        c.format = "other/2".into();
        assert!(DenseNet::try_from(c).is_err());
        let mut c2 = NetCheckpoint::from(DenseNet::mlp(3, &[4], 2, Activation::Relu, Activation::Identity, &mut rng));
        c2.layers[1].input = 5;
        c2.layers[1].weights.extend([0.0, 0.0]);
        assert!(DenseNet::try_from(c2).is_err());
    }
}
