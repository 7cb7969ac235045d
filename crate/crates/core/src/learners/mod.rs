//! Small from-scratch classifiers used to probe samples for spurious bias.
//!
//! Four kinds are provided: L2-regularized logistic regression trained by
//! full-batch gradient descent, a linear SVM trained by subgradient descent on
//! the hinge loss, a Gaussian-kernel SVM solved with SMO, and Gaussian naive
//! Bayes. The SVMs and logistic regression standardize features with the
//! training fold's mean and standard deviation; the fitted scaler is part of
//! the model.
//!
//! Binary problems use the learner directly. With more than two classes the
//! margin learners are wrapped one-vs-rest; naive Bayes is natively multiclass.

pub mod logreg;
pub mod naive_bayes;
pub mod rbf_svm;
pub mod linear_svm;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::LabelId;

pub use naive_bayes::GaussianNb;
pub use rbf_svm::{RbfSvm, SmoSolution};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    Logreg,
    SvmLinear,
    SvmRbf,
    Gnb,
}

impl LearnerKind {
    pub const ALL: [LearnerKind; 4] = [
        LearnerKind::Logreg,
        LearnerKind::SvmLinear,
        LearnerKind::SvmRbf,
        LearnerKind::Gnb,
    ];

    /// Hyper-parameter names accepted by this kind, with their defaults.
    /// `gamma` for the RBF SVM defaults to `1 / dim` and is resolved at fit time.
    pub fn defaults(self) -> &'static [(&'static str, f64)] {
        match self {
            LearnerKind::Logreg => &[("learning_rate", 0.1), ("epochs", 500.0), ("l2", 1e-4)],
            LearnerKind::SvmLinear => &[("learning_rate", 0.05), ("epochs", 500.0), ("C", 1.0)],
            LearnerKind::SvmRbf => &[
                ("C", 1.0),
                ("gamma", f64::NAN),
                ("tol", 1e-3),
                ("max_passes", 50.0),
                ("max_iter", 10_000.0),
            ],
            LearnerKind::Gnb => &[("var_smoothing", 1e-9)],
        }
    }
}

impl fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LearnerKind::Logreg => "logreg",
            LearnerKind::SvmLinear => "svm_linear",
            LearnerKind::SvmRbf => "svm_rbf",
            LearnerKind::Gnb => "gnb",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnerSpec {
    pub kind: LearnerKind,
    #[serde(default)]
    pub hyper: BTreeMap<String, f64>,
    #[serde(default)]
    pub seed: u64,
}

impl LearnerSpec {
    pub fn new(kind: LearnerKind) -> Self {
        LearnerSpec {
            kind,
            hyper: BTreeMap::new(),
            seed: 0,
        }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.hyper.insert(key.to_string(), value);
        self
    }

    pub fn seeded(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// The four probe learners with default settings.
    pub fn default_suite() -> [LearnerSpec; 4] {
        LearnerKind::ALL.map(LearnerSpec::new)
    }

    pub fn validate(&self) -> Result<()> {
        let defaults = self.kind.defaults();
        for (key, &value) in &self.hyper {
            if !defaults.iter().any(|(k, _)| k == key) {
                return Err(Error::config(format!(
                    "{} does not take hyper-parameter {key:?}",
                    self.kind
                )));
            }
            let ok = match key.as_str() {
                "l2" => value.is_finite() && value >= 0.0,
                "epochs" | "max_passes" | "max_iter" => value >= 1.0 && value.fract() == 0.0,
                _ => value.is_finite() && value > 0.0,
            };
            if !ok {
                return Err(Error::config(format!("{}: invalid {key} = {value}", self.kind)));
            }
        }
        Ok(())
    }

    pub(crate) fn param(&self, key: &str) -> f64 {
        self.hyper.get(key).copied().unwrap_or_else(|| {
            self.kind
                .defaults()
                .iter()
                .find(|(k, _)| *k == key)
                .map(|(_, v)| *v)
                .expect("known hyper-parameter")
        })
    }
}

/// Per-feature affine map fitted on the training fold.
#[derive(Clone, Debug, PartialEq)]
pub struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(xs: &[Vec<f64>]) -> Self {
        let dim = xs[0].len();
        let n = xs.len() as f64;
        let mut mean = vec![0.0; dim];
        for x in xs {
            for (m, v) in mean.iter_mut().zip(x) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for x in xs {
            for ((s, v), m) in var.iter_mut().zip(x).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, scale }
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

/// Weights and bias over standardized features.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearModel {
    pub scaler: Standardizer,
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearModel {
    pub fn decision(&self, x: &[f64]) -> f64 {
        let z = self.scaler.transform(x);
        dot(&self.weights, &z) + self.bias
    }
}

/// Positive-versus-negative scorer: decision > 0 means the positive class.
#[derive(Clone, Debug, PartialEq)]
pub enum BinaryModel {
    Linear(LinearModel),
    Rbf(RbfSvm),
}

impl BinaryModel {
    pub fn decision(&self, x: &[f64]) -> f64 {
        match self {
            BinaryModel::Linear(m) => m.decision(x),
            BinaryModel::Rbf(m) => m.decision(x),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Body {
    Binary(BinaryModel),
    OneVsRest(Vec<BinaryModel>),
    Gnb(GaussianNb),
}

#[derive(Clone, Debug, PartialEq)]
pub struct FittedModel {
    kind: LearnerKind,
    dim: usize,
    /// Distinct training labels, ascending.
    classes: Vec<LabelId>,
    body: Body,
}

fn check_inputs(xs: &[Vec<f64>], ys: &[LabelId]) -> Result<(usize, Vec<LabelId>)> {
    if xs.len() != ys.len() {
        return Err(Error::DimMismatch {
            expected: xs.len(),
            got: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(Error::config("need at least two training samples"));
    }
    let dim = xs[0].len();
    if dim == 0 {
        return Err(Error::config("feature vectors are empty"));
    }
    for x in xs {
        if x.len() != dim {
            return Err(Error::DimMismatch {
                expected: dim,
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
    }
    let mut classes = ys.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::DegenerateLabels);
    }
    Ok((dim, classes))
}

fn fit_binary(spec: &LearnerSpec, xs: &[Vec<f64>], positive: &[bool]) -> BinaryModel {
    match spec.kind {
        LearnerKind::Logreg => BinaryModel::Linear(logreg::fit(spec, xs, positive)),
        LearnerKind::SvmLinear => BinaryModel::Linear(linear_svm::fit(spec, xs, positive)),
        LearnerKind::SvmRbf => BinaryModel::Rbf(rbf_svm::fit(spec, xs, positive)),
        LearnerKind::Gnb => unreachable!("naive Bayes is fitted natively"),
    }
}

/// Fits `spec` on rows `xs` with labels `ys`.
pub fn fit(spec: &LearnerSpec, xs: &[Vec<f64>], ys: &[LabelId]) -> Result<FittedModel> {
    spec.validate()?;
    let (dim, classes) = check_inputs(xs, ys)?;
    let body = match spec.kind {
        LearnerKind::Gnb => Body::Gnb(naive_bayes::fit(spec, xs, ys, &classes)),
        _ if classes.len() == 2 => {
            let positive: Vec<bool> = ys.iter().map(|&y| y == classes[1]).collect();
            Body::Binary(fit_binary(spec, xs, &positive))
        }
        _ => Body::OneVsRest(
            classes
                .iter()
                .map(|&c| {
                    let positive: Vec<bool> = ys.iter().map(|&y| y == c).collect();
                    fit_binary(spec, xs, &positive)
                })
                .collect(),
        ),
    };
    let model = FittedModel {
        kind: spec.kind,
        dim,
        classes,
        body,
    };
    if !model.is_finite() {
        return Err(Error::NonFiniteInput);
    }
    Ok(model)
}

impl FittedModel {
    pub fn kind(&self) -> LearnerKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn classes(&self) -> &[LabelId] {
        &self.classes
    }

    /// Binary linear model with explicit parameters and an identity scaler.
    pub fn linear(kind: LearnerKind, weights: Vec<f64>, bias: f64) -> Result<Self> {
        if !matches!(kind, LearnerKind::Logreg | LearnerKind::SvmLinear) {
            return Err(Error::config(format!("{kind} is not a linear learner")));
        }
        let dim = weights.len();
        let scaler = Standardizer {
            mean: vec![0.0; dim],
            scale: vec![1.0; dim],
        };
        Ok(FittedModel {
            kind,
            dim,
            classes: vec![0, 1],
            body: Body::Binary(BinaryModel::Linear(LinearModel {
                scaler,
                weights,
                bias,
            })),
        })
    }

    /// The underlying binary scorer, when the model is binary.
    pub fn binary(&self) -> Option<&BinaryModel> {
        match &self.body {
            Body::Binary(m) => Some(m),
            _ => None,
        }
    }

    pub fn naive_bayes(&self) -> Option<&GaussianNb> {
        match &self.body {
            Body::Gnb(m) => Some(m),
            _ => None,
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Raw margin (SVMs), log-odds (logreg), or log-posterior gap (naive
    /// Bayes) of the higher class over the lower one. Binary models only.
    pub fn decision_value(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        match &self.body {
            Body::Binary(m) => Ok(m.decision(x)),
            Body::Gnb(m) if self.classes.len() == 2 => {
                let jll = m.joint_log_likelihood(x);
                Ok(jll[1] - jll[0])
            }
            _ => Err(Error::config(
                "decision_value is defined for binary models; use decision_values",
            )),
        }
    }

    /// One score per class, in `classes()` order.
    pub fn decision_values(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        Ok(match &self.body {
            Body::Binary(m) => vec![0.0, m.decision(x)],
            Body::OneVsRest(ms) => ms.iter().map(|m| m.decision(x)).collect(),
            Body::Gnb(m) => m.joint_log_likelihood(x),
        })
    }

    /// A decision value of exactly zero goes to the lower label.
    pub fn predict(&self, x: &[f64]) -> Result<LabelId> {
        let scores = self.decision_values(x)?;
        let mut best = 0;
        for (i, s) in scores.iter().enumerate().skip(1) {
            if *s > scores[best] {
                best = i;
            }
        }
        Ok(self.classes[best])
    }

    fn is_finite(&self) -> bool {
        fn binary_ok(m: &BinaryModel) -> bool {
            match m {
                BinaryModel::Linear(l) => {
                    l.bias.is_finite() && l.weights.iter().all(|w| w.is_finite())
                }
                BinaryModel::Rbf(r) => r.is_finite(),
            }
        }
        match &self.body {
            Body::Binary(m) => binary_ok(m),
            Body::OneVsRest(ms) => ms.iter().all(binary_ok),
            Body::Gnb(m) => m.is_finite(),
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
