//! Ready-made causal models.

use rand::seq::SliceRandom;
use rand::Rng;

use super::builder::ScmBuilder;
use super::model::{Prior, Scm, StructuralEquation, Term};
use super::ScmError;

/// Parameters of the three-equation law-school model, in the order
/// `(b_G, b_L, b_F, w_G^Q, w_G^S, w_L^Q, w_L^S, w_F^Q, w_F^S)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LawSchoolParams(pub [f64; 9]);

impl LawSchoolParams {
    pub fn intercepts(&self) -> [f64; 3] {
        [self.0[0], self.0[1], self.0[2]]
    }

    /// `(w^Q, w^S)` for GPA, LSAT and FYA.
    pub fn weights(&self) -> [(f64, f64); 3] {
        [(self.0[3], self.0[4]), (self.0[5], self.0[6]), (self.0[7], self.0[8])]
    }
}

/// Decodes a law-school composite level into `(race q, sex s)`.
pub fn law_school_pair(level: usize) -> (f64, f64) {
    ((level / 2) as f64, (level % 2) as f64)
}

/// GPA, LSAT and FYA as additive functions of the race/sex pair plus
/// independent standard-normal errors.
///
/// The pair `(Q, S)` is one sensitive node `A` with four levels; level `k`
/// stands for `(q, s) = (k / 2, k % 2)`.
pub fn law_school_scm(params: LawSchoolParams) -> Scm {
    let effects = |(wq, ws): (f64, f64)| -> Vec<f64> {
        (0..4)
            .map(|k| {
                let (q, s) = law_school_pair(k);
                wq * q + ws * s
            })
            .collect()
    };
    let [b_g, b_l, b_f] = params.intercepts();
    let [w_g, w_l, w_f] = params.weights();
    ScmBuilder::new()
        .exogenous("U_A", Prior::Categorical { probs: vec![0.25; 4] })
        .exogenous("U_G", Prior::StandardNormal)
        .exogenous("U_L", Prior::StandardNormal)
        .exogenous("U_F", Prior::StandardNormal)
        .sensitive("A", vec![0.0, 1.0, 2.0, 3.0])
        .feature("GPA")
        .feature("LSAT")
        .label("FYA")
        .additive("A", 0.0, vec![], "U_A")
        .additive("GPA", b_g, vec![Term::Level { parent: "A".into(), effects: effects(w_g) }], "U_G")
        .additive("LSAT", b_l, vec![Term::Level { parent: "A".into(), effects: effects(w_l) }], "U_L")
        .additive("FYA", b_f, vec![Term::Level { parent: "A".into(), effects: effects(w_f) }], "U_F")
        .build()
        .expect("law-school model is well formed")
}

/// The simulation model: `A ~ Bernoulli(0.4)`, `U1, U2 ~ N(0, 1)`,
/// `X = sin U1 + cos(U2 A) + A + 0.1`, `Y = 0.2 X^2 + 1.2 X + 0.2`.
pub fn synthetic_scm() -> Scm {
    ScmBuilder::new()
        .exogenous("U_A", Prior::Bernoulli { p: 0.4 })
        .exogenous("U1", Prior::StandardNormal)
        .exogenous("U2", Prior::StandardNormal)
        .sensitive("A", vec![0.0, 1.0])
        .feature("X")
        .label("Y")
        .additive("A", 0.0, vec![], "U_A")
        .equation(StructuralEquation::function("X", &["U1", "U2", "A"], |p| {
            p[0].sin() + (p[1] * p[2]).cos() + p[2] + 0.1
        }))
        .equation(StructuralEquation::function("Y", &["X"], |p| 0.2 * p[0] * p[0] + 1.2 * p[0] + 0.2))
        .build()
        .expect("synthetic model is well formed")
}

/// Linear additive model on the graph `A→X1, A→X2, X1→X2, X1→Y, X2→Y`.
///
/// `coefs` = `(a→x1, a→x2, x1→x2, x1→y, x2→y)`.
pub fn mediator_scm(coefs: [f64; 5]) -> Scm {
    let lin = |p: &str, c: f64| Term::Linear { parent: p.into(), coef: c };
    ScmBuilder::new()
        .exogenous("U_A", Prior::Bernoulli { p: 0.5 })
        .exogenous("U1", Prior::StandardNormal)
        .exogenous("U2", Prior::StandardNormal)
        .exogenous("UY", Prior::StandardNormal)
        .sensitive("A", vec![0.0, 1.0])
        .feature("X1")
        .feature("X2")
        .label("Y")
        .additive("A", 0.0, vec![], "U_A")
        .additive("X1", 0.0, vec![lin("A", coefs[0])], "U1")
        .additive("X2", 0.0, vec![lin("A", coefs[1]), lin("X1", coefs[2])], "U2")
        .additive("Y", 0.0, vec![lin("X1", coefs[3]), lin("X2", coefs[4])], "UY")
        .build()
        .expect("example graph is well formed")
}

/// Random additive model with `n_observed` endogenous nodes (at least 3:
/// the sensitive node, one feature and the label), each with its own
/// Gaussian noise. Edges follow a random order, so the result is a DAG;
/// every feature depends on the sensitive node with probability 0.7 and
/// the label has at least one feature parent.
pub fn random_additive_scm<R: Rng + ?Sized>(rng: &mut R, n_observed: usize) -> Result<Scm, ScmError> {
    let n_observed = n_observed.max(3);
    let n_levels = if rng.random_bool(0.25) { 3 } else { 2 };
    let levels: Vec<f64> = (0..n_levels).map(|l| l as f64).collect();
    let n_features = n_observed - 2;
    let mut features: Vec<String> = (0..n_features).map(|i| format!("X{i}")).collect();
    features.shuffle(rng);

    let mut b = ScmBuilder::new()
        .exogenous("U_A", Prior::Categorical { probs: vec![1.0; n_levels] })
        .sensitive("A", levels);
    for f in &features {
        b = b.exogenous(&format!("U_{f}"), Prior::Normal { mean: 0.0, std: rng.random_range(0.5..2.0) });
    }
    b = b.exogenous("U_Y", Prior::StandardNormal);
    for f in &features {
        b = b.feature(f);
    }
    b = b.label("Y").additive("A", 0.0, vec![], "U_A");

    let coef = |rng: &mut R| rng.random_range(-2.0..2.0);
    for (i, f) in features.iter().enumerate() {
        let mut terms = Vec::new();
        if rng.random_bool(0.7) {
            if n_levels == 2 || rng.random_bool(0.5) {
                terms.push(Term::Linear { parent: "A".into(), coef: coef(rng) });
            } else {
                let effects = (0..n_levels).map(|_| coef(rng)).collect();
                terms.push(Term::Level { parent: "A".into(), effects });
            }
        }
        for earlier in &features[..i] {
            if rng.random_bool(0.4) {
                if rng.random_bool(0.2) {
                    terms.push(Term::Power { parent: earlier.clone(), exponent: 2, coef: 0.1 * coef(rng) });
                } else {
                    terms.push(Term::Linear { parent: earlier.clone(), coef: coef(rng) });
                }
            }
        }
        b = b.additive(f, coef(rng), terms, &format!("U_{f}"));
    }
    let mut y_terms = Vec::new();
    for f in &features {
        if rng.random_bool(0.6) {
            y_terms.push(Term::Linear { parent: f.clone(), coef: coef(rng) });
        }
    }
    if y_terms.is_empty() {
        y_terms.push(Term::Linear { parent: features[0].clone(), coef: coef(rng) });
    }
    if rng.random_bool(0.5) {
        y_terms.push(Term::Linear { parent: "A".into(), coef: coef(rng) });
    }
    b.additive("Y", coef(rng), y_terms, "U_Y").build()
}
