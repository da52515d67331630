#![allow(dead_code)]

use std::path::PathBuf;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use cfrep_core::data::{load_csv, Dataset, Schema};
use cfrep_core::genmodel::{Batch, VaeFamily, VaeLayout, VaeModel, VaeTrainConfig};
use cfrep_core::nn::{Activation, DenseNet, LossKind, LossSpec};
use cfrep_core::repr::{
    cf_representation, pcf_representation, Abduction, CausalModel, CounterfactualSet, PathSpec, Sample, ScmBackend,
    SymmetricFn, SymmetricKind,
};
use cfrep_core::scm::{Assignment, ExogenousAssignment, Intervention, Scm, VarKind};

pub const KINDS: [SymmetricKind; 4] = [
    SymmetricKind::Mean,
    SymmetricKind::ElementwiseMin,
    SymmetricKind::ElementwiseMax,
    SymmetricKind::SortedConcat,
];

pub fn workspace_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn fixture(name: &str, schema: &str) -> Dataset {
    let root = workspace_root();
    let schema = Schema::read(&root.join("schemas").join(schema)).unwrap();
    load_csv(&root.join("fixtures").join(name), &schema).unwrap()
}

pub fn standardized(mut d: Dataset) -> Dataset {
    let s = d.fit_standardizer();
    d.standardize(&s).unwrap();
    d
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// One factual world: exogenous draw plus every endogenous value.
pub struct World {
    pub u: ExogenousAssignment,
    pub values: Assignment,
}

pub fn draw_world<R: Rng + ?Sized>(scm: &Scm, rng: &mut R) -> World {
    let raw = scm.sample_exogenous(rng);
    let u = ExogenousAssignment {
        values: scm
            .exogenous()
            .iter()
            .map(|&e| (scm.variable(e).name.clone(), raw[e]))
            .collect(),
    };
    let values = scm.simulate(&u, &Intervention::none()).unwrap();
    World { u, values }
}

pub fn observables(scm: &Scm, values: &Assignment) -> Assignment {
    values
        .iter()
        .filter(|(k, _)| {
            let idx = scm.graph().index_of(k).unwrap();
            scm.variable(idx).kind != VarKind::Exogenous
        })
        .map(|(k, v)| (k.clone(), *v))
        .collect()
}

fn assignment_diff(a: &Assignment, b: &Assignment) -> f64 {
    a.iter().map(|(k, v)| (v - b[k]).abs()).fold(0.0, f64::max)
}

/// `[round trip, involution, consistency]` deviations on one random world.
pub fn engine_deviations<R: Rng + ?Sized>(scm: &Scm, rng: &mut R) -> [f64; 3] {
    let w = draw_world(scm, rng);
    let obs = observables(scm, &w.values);
    let u = scm.abduct_additive(&obs).unwrap();
    let again = observables(scm, &scm.simulate(&u, &Intervention::none()).unwrap());
    let round_trip = assignment_diff(&obs, &again);

    let a = obs[scm.sensitive_name()];
    let levels = scm.levels();
    let other = *levels.iter().find(|&&l| l != a).unwrap();
    let cf = scm.counterfactual(&obs, &u, other).unwrap();
    let back = scm.counterfactual(&cf, &u, a).unwrap();
    let involution = assignment_diff(&obs, &back);

    let same = scm.counterfactual(&obs, &u, a).unwrap();
    let consistency = assignment_diff(&obs, &same);
    [round_trip, involution, consistency]
}

/// The factual sample of a world as seen by an [`ScmBackend`] built with
/// [`ScmBackend::new`] (columns in feature-node order, no ground truth).
pub fn backend_sample(scm: &Scm, values: &Assignment) -> Sample {
    Sample {
        x: scm.features().iter().map(|&i| values[&scm.variable(i).name]).collect(),
        a: scm.level_index(values[scm.sensitive_name()]).unwrap(),
        y: Some(values[&scm.variable(scm.label()).name]),
        u: None,
    }
}

/// Largest prediction gap of a random linear predictor between the
/// representation of a factual sample and those of its counterfactuals,
/// each re-abducted from its own observation.
pub fn shared_u_gap<R: Rng + ?Sized>(scm: &Scm, kind: SymmetricKind, rng: &mut R) -> f64 {
    let backend = ScmBackend::new(scm.clone(), Abduction::Additive).unwrap();
    let w = draw_world(scm, rng);
    let s = backend_sample(scm, &w.values);
    let own = cf_representation(&backend, &s, kind).unwrap().to_vec();
    let weights: Vec<f64> = (0..own.len()).map(|_| rng.sample(StandardNormal)).collect();
    let set = CounterfactualSet::build(&backend, &s, &[]).unwrap();
    set.alternatives()
        .map(|l| {
            let other = cf_representation(&backend, &set.member(l, &s), kind).unwrap().to_vec();
            (dot(&own, &weights) - dot(&other, &weights)).abs()
        })
        .fold(0.0, f64::max)
}

/// With a random subset of features off-path: the largest prediction gap
/// of a random linear predictor between members of one shared-u set, and
/// the largest gap in the `[passthrough, summary]` segment when each member
/// is re-abducted from its own observation.
pub fn path_gaps<R: Rng + ?Sized>(scm: &Scm, kind: SymmetricKind, rng: &mut R) -> (f64, f64) {
    let backend = ScmBackend::new(scm.clone(), Abduction::Additive).unwrap();
    let mut names: Vec<String> = backend.columns().iter().map(|c| c.name.clone()).collect();
    names.shuffle(rng);
    let k = rng.random_range(0..=names.len());
    let path = PathSpec::new(names[..k].to_vec());
    let resolved = path.resolve(&backend).unwrap();
    let sym = SymmetricFn::new(kind, backend.n_levels());
    let w = draw_world(scm, rng);
    let s = backend_sample(scm, &w.values);
    let own = pcf_representation(&backend, &s, kind, &path).unwrap();
    let own_vec = own.to_vec();
    let weights: Vec<f64> = (0..own_vec.len()).map(|_| rng.sample(StandardNormal)).collect();
    let set = CounterfactualSet::build(&backend, &s, &resolved.off).unwrap();
    let mut pred_gap = 0.0f64;
    let mut repr_gap = 0.0f64;
    for l in set.alternatives() {
        let shared = set.represent(&sym, &resolved, l).unwrap().to_vec();
        pred_gap = pred_gap.max((dot(&own_vec, &weights) - dot(&shared, &weights)).abs());
        let re = pcf_representation(&backend, &set.member(l, &s), kind, &path).unwrap();
        repr_gap = repr_gap
            .max(max_abs_diff(&own.passthrough, &re.passthrough))
            .max(max_abs_diff(&own.summary, &re.summary));
    }
    (pred_gap, repr_gap)
}

/// Whether every member of each row's shared-u set yields the identical
/// representation vector (bit for bit).
pub fn vae_representations_identical(model: &dyn CausalModel, d: &Dataset, kind: SymmetricKind) -> bool {
    let path = cfrep_core::repr::ResolvedPath::all_on(model.feature_dim());
    let s = SymmetricFn::new(kind, model.n_levels());
    Sample::all(d).iter().all(|x| {
        let set = CounterfactualSet::build(model, x, &[]).unwrap();
        let own = set.represent(&s, &path, x.a).unwrap().to_vec();
        (0..model.n_levels()).all(|l| set.represent(&s, &path, l).unwrap().to_vec() == own)
    })
}

pub const ACTIVATIONS: [Activation; 4] = [Activation::Identity, Activation::Relu, Activation::Sigmoid, Activation::Tanh];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradLoss {
    Mse,
    Bce,
    SoftmaxCrossEntropy,
    Kl,
    L2Pairwise,
}

pub const GRAD_LOSSES: [GradLoss; 5] = [
    GradLoss::Mse,
    GradLoss::Bce,
    GradLoss::SoftmaxCrossEntropy,
    GradLoss::Kl,
    GradLoss::L2Pairwise,
];

fn random_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.sample(StandardNormal))
}

fn loss_and_grad(kind: GradLoss, out: &Array2<f64>, target: &Array2<f64>, want: bool) -> (f64, Array2<f64>) {
    use cfrep_core::nn::loss::softmax_cross_entropy;
    match kind {
        GradLoss::SoftmaxCrossEntropy => softmax_cross_entropy(out.view(), target.view()),
        GradLoss::Kl => {
            let d = out.ncols() / 2;
            let mu = out.slice(ndarray::s![.., ..d]);
            let lv = out.slice(ndarray::s![.., d..]);
            let v = LossSpec::new(LossKind::KlGaussianStandard, 0.7).unwrap().evaluate(mu, lv).unwrap();
            let mut g = Array2::zeros(out.dim());
            if want {
                g.slice_mut(ndarray::s![.., ..d]).assign(&v.grad_a);
                g.slice_mut(ndarray::s![.., d..]).assign(&v.grad_b);
            }
            (v.value, g)
        }
        other => {
            let k = match other {
                GradLoss::Mse => LossKind::Mse,
                GradLoss::Bce => LossKind::Bce,
                _ => LossKind::L2Pairwise,
            };
            let v = LossSpec::new(k, 1.3).unwrap().evaluate(out.view(), target.view()).unwrap();
            (v.value, v.grad_a)
        }
    }
}

/// Largest relative error between backpropagated and central-difference
/// gradients for one random net with hidden activation `act`.
pub fn gradient_relative_error<R: Rng + ?Sized>(act: Activation, loss: GradLoss, rng: &mut R) -> f64 {
    let (inp, hid, out, batch) = (3, 4, 4, 3);
    let (mut net, x) = loop {
        let net = DenseNet::mlp(inp, &[hid], out, act, act, rng);
        let x = random_matrix(rng, batch, inp);
        if act != Activation::Relu || relu_margin(&net, &x) > 1e-3 {
            break (net, x);
        }
    };
    let target = match loss {
        GradLoss::Bce => Array2::from_shape_simple_fn((batch, out), || rng.random_range(0..2) as f64),
        GradLoss::SoftmaxCrossEntropy => {
            let mut t = Array2::zeros((batch, out));
            for r in 0..batch {
                t[[r, rng.random_range(0..out)]] = 1.0;
            }
            t
        }
        _ => random_matrix(rng, batch, out),
    };
    let tape = net.forward_batch(x.view()).unwrap();
    let (_, g_out) = loss_and_grad(loss, &tape.output, &target, true);
    let (grads, _) = net.backward(&tape, g_out.view());
    let analytic = grads.flatten();
    let params = net.flat_params();
    let h = 1e-5;
    let mut worst = 0.0f64;
    for k in 0..params.len() {
        let mut p = params.clone();
        p[k] += h;
        net.set_flat_params(&p).unwrap();
        let up = loss_and_grad(loss, &net.predict_batch(x.view()).unwrap(), &target, false).0;
        p[k] -= 2.0 * h;
        net.set_flat_params(&p).unwrap();
        let down = loss_and_grad(loss, &net.predict_batch(x.view()).unwrap(), &target, false).0;
        let fd = (up - down) / (2.0 * h);
        let scale = analytic[k].abs().max(fd.abs());
        if scale > 1e-6 {
            worst = worst.max((analytic[k] - fd).abs() / scale);
        }
    }
    net.set_flat_params(&params).unwrap();
    worst
}

/// Smallest distance of any pre-activation to the ReLU kink; finite
/// differences straddling it are meaningless.
pub fn relu_margin(net: &DenseNet, x: &Array2<f64>) -> f64 {
    let mut h = x.clone();
    let mut margin = f64::INFINITY;
    for l in net.layers() {
        let mut z = h.dot(&l.weights.t());
        z += &l.bias;
        margin = margin.min(z.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min));
        h = z.mapv(|v| l.activation.apply(v));
    }
    margin
}

/// Relative error of the full VAE objective's gradient on a random
/// parameter draw, checked on `n_params` random coordinates.
pub fn vae_gradient_relative_error<R: Rng + ?Sized>(
    family: VaeFamily,
    data: &Dataset,
    cfg: &VaeTrainConfig,
    with_perm: bool,
    n_params: usize,
    rng: &mut R,
) -> f64 {
    let layout = VaeLayout::from_dataset(data, cfg.l_alpha, cfg.l_beta, cfg.l_y).unwrap();
    let mut model = VaeModel::new(family, true, layout.clone(), cfg, rng).unwrap();
    let b = Batch::new(&layout, data.x.view(), &data.a, &data.y);
    let eps = random_matrix(rng, data.len(), model.latent_dim());
    let mut perm: Vec<usize> = (0..data.len()).collect();
    perm.shuffle(rng);
    let perm = with_perm.then_some(perm.as_slice());
    let (_, grads) = model.evaluate(&b, cfg, Some(eps.view()), perm, true).unwrap();
    let params = model.vae_params();
    let h = 1e-6;
    let mut worst = 0.0f64;
    for _ in 0..n_params {
        let k = rng.random_range(0..params.len());
        let mut p = params.clone();
        p[k] += h;
        model.set_vae_params(&p).unwrap();
        let up = model.evaluate(&b, cfg, Some(eps.view()), perm, false).unwrap().0.total;
        p[k] -= 2.0 * h;
        model.set_vae_params(&p).unwrap();
        let down = model.evaluate(&b, cfg, Some(eps.view()), perm, false).unwrap().0.total;
        let fd = (up - down) / (2.0 * h);
        let scale = grads[k].abs().max(fd.abs());
        if scale > 1e-6 {
            worst = worst.max((grads[k] - fd).abs() / scale);
        }
    }
    model.set_vae_params(&params).unwrap();
    worst
}
