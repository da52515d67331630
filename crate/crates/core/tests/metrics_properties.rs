use proptest::prelude::*;

use cfrep_core::metrics::{accuracy, density_data, group_total_effect, mse, total_effect};

fn pairs(max: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1..max).prop_flat_map(|n| {
        (
            proptest::collection::vec(-50.0f64..50.0, n),
            proptest::collection::vec(-50.0f64..50.0, n),
        )
    })
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn mse_and_total_effect_match_loops((p, t) in pairs(60)) {
        let mut sq = 0.0;
        let mut ab = 0.0;
        for i in 0..p.len() {
            sq += (p[i] - t[i]) * (p[i] - t[i]);
            ab += (p[i] - t[i]).abs();
        }
        prop_assert!(close(mse(&p, &t).unwrap(), sq / p.len() as f64));
        prop_assert!(close(total_effect(&p, &t).unwrap(), ab / p.len() as f64));
    }

    #[test]
    fn accuracy_matches_loop(probs in proptest::collection::vec(0.0f64..1.0, 1..80), seed in any::<u64>()) {
        let targets: Vec<f64> = (0..probs.len()).map(|i| ((seed >> (i % 64)) & 1) as f64).collect();
        let mut hits = 0;
        for i in 0..probs.len() {
            let class = if probs[i] >= 0.5 { 1.0 } else { 0.0 };
            if class == targets[i] {
                hits += 1;
            }
        }
        prop_assert_eq!(accuracy(&probs, &targets).unwrap(), hits as f64 / probs.len() as f64);
    }

    #[test]
    fn weighted_groups_recombine_to_total((p, q) in pairs(80), levels in 1usize..4, seed in any::<u64>()) {
        let s: Vec<usize> = (0..p.len()).map(|i| ((seed >> (i % 60)) as usize) % levels).collect();
        let te = total_effect(&p, &q).unwrap();
        let groups = group_total_effect(&p, &q, &s).unwrap();
        let n = p.len() as f64;
        let recombined: f64 = groups
            .iter()
            .map(|(&g, &v)| v * s.iter().filter(|&&x| x == g).count() as f64 / n)
            .sum();
        prop_assert!((recombined - te).abs() < 1e-12 * (1.0 + te), "{} vs {}", recombined, te);
    }

    #[test]
    fn total_effect_is_nonnegative_and_zero_only_for_equal_vectors((p, q) in pairs(40)) {
        let te = total_effect(&p, &q).unwrap();
        prop_assert!(te >= 0.0);
        prop_assert_eq!(te == 0.0, p == q);
        prop_assert_eq!(total_effect(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn metrics_ignore_sample_order((p, q) in pairs(50), rot in 0usize..50) {
        let k = rot % p.len();
        let mut p2 = p.clone();
        let mut q2 = q.clone();
        p2.rotate_left(k);
        q2.rotate_left(k);
        p2.reverse();
        q2.reverse();
        prop_assert!(close(mse(&p, &q).unwrap(), mse(&p2, &q2).unwrap()));
        prop_assert!(close(total_effect(&p, &q).unwrap(), total_effect(&p2, &q2).unwrap()));
        let d1 = density_data(&p, &q, 17).unwrap();
        let d2 = density_data(&p2, &q2, 17).unwrap();
        prop_assert_eq!(d1, d2);
    }

    #[test]
    fn density_counts_match_loop((p, q) in pairs(80), bins in 2usize..30) {
        let d = density_data(&p, &q, bins).unwrap();
        prop_assert_eq!(d.edges.len(), bins + 1);
        let lo = d.edges[0];
        let hi = d.edges[bins];
        for (values, counts) in [(&p, &d.factual), (&q, &d.counterfactual)] {
            let mut expected = vec![0usize; bins];
            for &v in values.iter() {
                let mut k = 0;
                while k + 1 < bins && v >= lo + (hi - lo) * (k + 1) as f64 / bins as f64 {
                    k += 1;
                }
                expected[k] += 1;
            }
            prop_assert_eq!(counts, &expected);
            prop_assert_eq!(counts.iter().sum::<usize>(), values.len());
        }
    }
}
