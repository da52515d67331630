mod common;

use ndarray::Array2;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cfrep_core::nn::loss::kl_gaussian_standard;
use cfrep_core::nn::{Activation, DenseNet};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn backprop_matches_central_differences(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for act in common::ACTIVATIONS {
            for loss in common::GRAD_LOSSES {
                let err = common::gradient_relative_error(act, loss, &mut rng);
                prop_assert!(err < 1e-4, "{act:?}/{loss:?}: {err}");
            }
        }
    }

    #[test]
    fn kl_is_nonnegative(
        mu in proptest::collection::vec(-5.0f64..5.0, 1..8),
        lv in proptest::collection::vec(-5.0f64..5.0, 8),
    ) {
        let lv = &lv[..mu.len()];
        let kl = kl_gaussian_standard(&mu, lv);
        prop_assert!(kl >= 0.0);
        let zero = mu.iter().chain(lv).all(|&v| v == 0.0);
        if !zero {
            prop_assert!(kl > 0.0);
        }
    }

    #[test]
    fn forward_and_backward_are_deterministic(seed in any::<u64>()) {
        let build = || {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let net = DenseNet::mlp(4, &[6, 5], 3, Activation::Relu, Activation::Sigmoid, &mut rng);
            let x = Array2::from_shape_fn((7, 4), |(i, j)| ((i * 4 + j) as f64 * 0.37).sin());
            let tape = net.forward_batch(x.view()).unwrap();
            let (g, gx) = net.backward(&tape, tape.output.view());
            (tape.output, g.flatten(), gx)
        };
        let a = build();
        let b = build();
        prop_assert_eq!(a.0, b.0);
        prop_assert_eq!(a.1, b.1);
        prop_assert_eq!(a.2, b.2);
    }
}

#[test]
fn kl_is_zero_at_the_standard_normal() {
    assert_eq!(kl_gaussian_standard(&[0.0; 4], &[0.0; 4]), 0.0);
}
