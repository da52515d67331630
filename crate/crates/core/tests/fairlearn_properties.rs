mod common;

use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use cfrep_core::data::Task;
use cfrep_core::experiment::{ExperimentConfig, ResolvedMethod};
use cfrep_core::fairlearn::{
    fit, prepare, train_method, CfLabel, FitConfig, InputSpace, ModelKind, Predictor, TrainContext, TrainMethod,
};
use cfrep_core::genmodel::{VaeFamily, VaeLayout, VaeModel, VaeTrainConfig};
use cfrep_core::repr::{Abduction, CausalModel, ResolvedPath, Sample, ScmBackend, SymmetricFn, SymmetricKind};
use cfrep_core::scm::{random_additive_scm, Scm};

fn samples<R: Rng>(scm: &Scm, n: usize, rng: &mut R) -> Vec<Sample> {
    (0..n)
        .map(|_| common::backend_sample(scm, &common::draw_world(scm, rng).values))
        .collect()
}

fn regression(path: ResolvedPath) -> TrainContext {
    TrainContext {
        task: Task::Regression,
        fit: FitConfig::for_kind(ModelKind::Linear),
        cf_label: CfLabel::Factual,
        path,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_weights_on_representations_predict_identically(seed in any::<u64>(), n in 3usize..=8, k in 0usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scm = random_additive_scm(&mut rng, n).unwrap();
        let backend = ScmBackend::new(scm.clone(), Abduction::Additive).unwrap();
        let path = ResolvedPath::all_on(backend.feature_dim());
        let space = InputSpace::Representation {
            symmetric: SymmetricFn::new(common::KINDS[k], backend.n_levels()),
            off: vec![],
            on: path.on.clone(),
        };
        let prepared = prepare(&backend, &samples(&scm, 20, &mut rng), &path).unwrap();
        let dim = space.build(&prepared[0], prepared[0].set.factual_level).unwrap().len();
        let mut predictor = Predictor::zeros(ModelKind::Linear, dim);
        if let Predictor::Linear(m) = &mut predictor {
            m.weights = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            m.bias = rng.sample(StandardNormal);
        }
        for p in &prepared {
            let f = predictor.predict(&space.build(p, p.set.factual_level).unwrap()).unwrap();
            for l in p.set.alternatives() {
                let cf = predictor.predict(&space.build(p, l).unwrap()).unwrap();
                prop_assert_eq!(f.to_bits(), cf.to_bits());
            }
        }
    }

    #[test]
    fn trained_ours_has_zero_total_effect_on_additive_models(seed in any::<u64>(), n in 3usize..=8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scm = random_additive_scm(&mut rng, n).unwrap();
        let backend = ScmBackend::new(scm.clone(), Abduction::Additive).unwrap();
        let path = ResolvedPath::all_on(backend.feature_dim());
        let train = prepare(&backend, &samples(&scm, 120, &mut rng), &path).unwrap();
        let test = prepare(&backend, &samples(&scm, 60, &mut rng), &path).unwrap();
        let ours = TrainMethod::Ours { symmetric: SymmetricKind::Mean, path: None };
        let m = train_method(&ours, &backend, &train, &regression(path.clone())).unwrap();
        let mut te = 0.0;
        for p in &test {
            let member = p.set.member(p.set.first_alternative(), &p.sample);
            te += (m.predict(p).unwrap() - m.predict_sample(&backend, &member, &path).unwrap()).abs();
        }
        te /= test.len() as f64;
        prop_assert!(te < 1e-9, "te {te}");
    }

    #[test]
    fn ce_predictions_ignore_the_sensitive_level(seed in any::<u64>(), n in 3usize..=8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scm = random_additive_scm(&mut rng, n).unwrap();
        let backend = ScmBackend::new(scm.clone(), Abduction::Additive).unwrap();
        let path = ResolvedPath::all_on(backend.feature_dim());
        let train = prepare(&backend, &samples(&scm, 80, &mut rng), &path).unwrap();
        let m = train_method(&TrainMethod::Ce, &backend, &train, &regression(path)).unwrap();
        for p in &train {
            prop_assert_eq!(m.predict(p).unwrap(), m.predict_counterfactual(p).unwrap());
        }
    }
}

#[test]
fn cr_total_effect_shrinks_with_lambda() {
    let mut cfg = ExperimentConfig::load(&common::workspace_root().join("configs/synthetic.cfg")).unwrap();
    let lambdas = [0.0, 0.01, 0.05, 0.25];
    cfg.methods = lambdas
        .iter()
        .map(|&lambda| {
            let method = TrainMethod::Cr { lambda };
            ResolvedMethod {
                label: method.label(),
                method,
            }
        })
        .collect();
    let report = cfrep_core::experiment::run_experiment(&cfg, 1).unwrap().report;
    let te: Vec<f64> = cfg
        .methods
        .iter()
        .map(|m| report.get(&m.label, "te", "").unwrap().mean)
        .collect();
    assert!(te.windows(2).all(|w| w[1] <= w[0]), "{te:?}");
}

#[test]
fn ca_fits_on_decoded_members() {
    let d = common::standardized(common::fixture("law_school.csv", "law_school.toml"));
    let cfg = VaeTrainConfig::law_school(VaeFamily::Cvae);
    let layout = VaeLayout::from_dataset(&d, cfg.l_alpha, cfg.l_beta, cfg.l_y).unwrap();
    let model = VaeModel::new(VaeFamily::Cvae, false, layout, &cfg, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
    let path = ResolvedPath::all_on(model.feature_dim());
    let train = prepare(&model, &Sample::all(&d)[..100], &path).unwrap();
    let ctx = regression(path);
    let m = train_method(&TrainMethod::Ca, &model, &train, &ctx).unwrap();

    let levels = model.n_levels();
    let mut rows = Vec::new();
    let mut targets = Vec::new();
    for p in &train {
        for l in 0..levels {
            let w = CausalModel::decode(&model, &p.set.latent, l).unwrap();
            let mut r = w.x.clone();
            r.extend((1..levels).map(|j| if j == l { 1.0 } else { 0.0 }));
            rows.push(r);
            targets.push(p.sample.y.unwrap());
        }
    }
    let x = Array2::from_shape_vec((rows.len(), rows[0].len()), rows.concat()).unwrap();
    let expected = fit(ModelKind::Linear, &x, &targets, &ctx.fit).unwrap();
    assert_eq!(m.predictor, expected);
}
