//! Split formation, sample weights, and the weighted metric.
//!
//! A sample with difficulty `B`, weight `W`, and correctness `K` (the reward
//! `d` if the prediction matches the gold label, the penalty `e` otherwise)
//! contributes `K·W`. The normalized metric is
//!
//! ```text
//! 100 · Σ K·W / Σ d·W
//! ```
//!
//! over all scored samples. Weights are either continuous (`a / B`, or
//! `B / a` for confidence scores) or per split (`b_1 … b_n`). Split 1 always
//! holds the easiest samples: highest `B` for bias and similarity scores,
//! lowest confidence for confidence scores.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::difficulty::DifficultyScore;
use crate::error::{Error, Result};
use crate::model::{Corpus, ModelRun};

pub const MIN_SPLITS: usize = 2;
pub const MAX_SPLITS: usize = 7;
/// Lower clamp on `B` wherever it is inverted.
pub const EPSILON: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SplitMode {
    EqualPopulation,
    EqualThresholds,
    Manual { thresholds: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub n: usize,
    #[serde(flatten)]
    pub mode: SplitMode,
}

impl SplitConfig {
    pub fn equal_population(n: usize) -> Self {
        SplitConfig { n, mode: SplitMode::EqualPopulation }
    }

    pub fn equal_thresholds(n: usize) -> Self {
        SplitConfig { n, mode: SplitMode::EqualThresholds }
    }

    pub fn manual(thresholds: Vec<f64>) -> Self {
        SplitConfig {
            n: thresholds.len() + 1,
            mode: SplitMode::Manual { thresholds },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(MIN_SPLITS..=MAX_SPLITS).contains(&self.n) {
            return Err(Error::config(format!(
                "split count {} outside supported range {MIN_SPLITS}-{MAX_SPLITS}",
                self.n
            )));
        }
        if let SplitMode::Manual { thresholds } = &self.mode {
            if thresholds.len() != self.n - 1 {
                return Err(Error::config(format!(
                    "{} splits need {} thresholds, got {}",
                    self.n,
                    self.n - 1,
                    thresholds.len()
                )));
            }
            if thresholds.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
                return Err(Error::config("manual thresholds must lie in (0, 1)"));
            }
            if thresholds.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::config("manual thresholds must be strictly ascending"));
            }
        }
        Ok(())
    }

    /// `th_1 < … < th_{n−1}` for the threshold modes; `None` for equal population.
    pub fn thresholds(&self) -> Option<Vec<f64>> {
        match &self.mode {
            SplitMode::EqualPopulation => None,
            SplitMode::EqualThresholds => {
                Some((1..self.n).map(|i| i as f64 / self.n as f64).collect())
            }
            SplitMode::Manual { thresholds } => Some(thresholds.clone()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub config: SplitConfig,
    /// Difficulty method the splits were formed from.
    pub method: String,
    /// Low `B` is the easy end (confidence scores).
    pub reciprocate: bool,
    /// Sample id → split index in `1..=n`.
    pub assignment: BTreeMap<String, usize>,
    pub sizes: Vec<usize>,
}

impl SplitAssignment {
    pub fn n(&self) -> usize {
        self.config.n
    }

    pub fn split_of(&self, id: &str) -> Option<usize> {
        self.assignment.get(id).copied()
    }
}

/// Forms splits, swapping the easy end for confidence-based scores.
pub fn form_splits(scores: &DifficultyScore, config: &SplitConfig) -> Result<SplitAssignment> {
    form_splits_with(scores, config, scores.method.is_confidence())
}

pub fn form_splits_with(
    scores: &DifficultyScore,
    config: &SplitConfig,
    reciprocate: bool,
) -> Result<SplitAssignment> {
    config.validate()?;
    let n = config.n;
    let mut assignment = BTreeMap::new();
    let mut sizes = vec![0usize; n];
    match config.thresholds() {
        None => {
            let total = scores.len();
            if total < n {
                return Err(Error::config(format!(
                    "{total} scored samples cannot fill {n} equally populated splits"
                )));
            }
            let order = if reciprocate {
                scores.ascending_order()
            } else {
                scores.descending_order()
            };
            let (base, extra) = (total / n, total % n);
            let mut cursor = 0;
            for (split, size) in sizes.iter_mut().enumerate() {
                *size = base + usize::from(split < extra);
                for id in &order[cursor..cursor + *size] {
                    assignment.insert(id.to_string(), split + 1);
                }
                cursor += *size;
            }
        }
        Some(th) => {
            for (id, &b) in &scores.values {
                // Number of thresholds strictly below B.
                let above = th.iter().filter(|&&t| b > t).count();
                let split = if reciprocate { above + 1 } else { n - above };
                sizes[split - 1] += 1;
                assignment.insert(id.clone(), split);
            }
        }
    }
    Ok(SplitAssignment {
        config: config.clone(),
        method: scores.method.to_string(),
        reciprocate,
        assignment,
        sizes,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightKind {
    Continuous,
    SplitWise,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Explicit,
    #[default]
    LinearAdd,
    LinearSub,
    Log,
    Square,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerSample {
    /// `coef / B`
    InvB,
    /// `coef · B`
    B,
}

/// Reward or penalty multiplier: a constant, or bound to the sample's `B`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Multiplier {
    Const(f64),
    Sample { coef: f64, per: PerSample },
}

impl Multiplier {
    pub fn eval(&self, b: f64) -> f64 {
        match *self {
            Multiplier::Const(c) => c,
            Multiplier::Sample { coef, per: PerSample::InvB } => coef / b.max(EPSILON),
            Multiplier::Sample { coef, per: PerSample::B } => coef * b,
        }
    }

    fn coef(&self) -> f64 {
        match *self {
            Multiplier::Const(c) => c,
            Multiplier::Sample { coef, .. } => coef,
        }
    }

    fn scaled(&self, c: f64) -> Self {
        match *self {
            Multiplier::Const(v) => Multiplier::Const(v * c),
            Multiplier::Sample { coef, per } => Multiplier::Sample { coef: coef * c, per },
        }
    }
}

impl From<f64> for Multiplier {
    fn from(v: f64) -> Self {
        Multiplier::Const(v)
    }
}

fn default_a() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightScheme {
    pub kind: WeightKind,
    #[serde(default = "default_a")]
    pub a: f64,
    /// Split weights; only read when `scale` is `explicit`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub b: Vec<f64>,
    #[serde(default)]
    pub scale: Scale,
    pub d: Multiplier,
    pub e: Multiplier,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub case_id: Option<u8>,
    /// Continuous weights become `B / a` instead of `a / B`.
    #[serde(default)]
    pub reciprocate: bool,
}

impl WeightScheme {
    /// `W ≡ 1, d = 1, e = 0`: the metric is plain accuracy × 100.
    pub fn uniform(n: usize) -> Self {
        WeightScheme {
            kind: WeightKind::SplitWise,
            a: 1.0,
            b: vec![1.0; n],
            scale: Scale::Explicit,
            d: Multiplier::Const(1.0),
            e: Multiplier::Const(0.0),
            case_id: None,
            reciprocate: false,
        }
    }

    pub fn split_wise(scale: Scale, d: f64, e: f64) -> Self {
        WeightScheme {
            kind: WeightKind::SplitWise,
            a: 1.0,
            b: Vec::new(),
            scale,
            d: Multiplier::Const(d),
            e: Multiplier::Const(e),
            case_id: None,
            reciprocate: false,
        }
    }

    pub fn explicit(b: Vec<f64>, d: f64, e: f64) -> Self {
        WeightScheme {
            b,
            ..WeightScheme::split_wise(Scale::Explicit, d, e)
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.a.is_finite() && self.a > 0.0) {
            return Err(Error::config("a must be positive"));
        }
        for m in [self.d, self.e] {
            if !m.coef().is_finite() {
                return Err(Error::config("reward and penalty must be finite"));
            }
        }
        let comparable = match (self.d, self.e) {
            (Multiplier::Const(_), Multiplier::Const(_)) => true,
            (Multiplier::Sample { per: p1, .. }, Multiplier::Sample { per: p2, .. }) => p1 == p2,
            _ => false,
        };
        if comparable && self.d.coef() < self.e.coef() {
            return Err(Error::config("reward d must be at least the penalty e"));
        }
        if self.kind == WeightKind::SplitWise {
            let b = expand_weights(self, n)?;
            if b.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
                return Err(Error::config("split weights must be positive"));
            }
        }
        Ok(())
    }

    /// Multiplies the split weights (or `a`) and both multipliers by positive
    /// factors; normalized scores are unchanged.
    pub fn rescaled(&self, weight_factor: f64, reward_factor: f64, n: usize) -> Result<Self> {
        let mut out = self.clone();
        match self.kind {
            WeightKind::SplitWise => {
                out.b = expand_weights(self, n)?.into_iter().map(|w| w * weight_factor).collect();
                out.scale = Scale::Explicit;
            }
            WeightKind::Continuous => out.a = if self.reciprocate {
                self.a / weight_factor
            } else {
                self.a * weight_factor
            },
        }
        out.d = self.d.scaled(reward_factor);
        out.e = self.e.scaled(reward_factor);
        out.case_id = None;
        Ok(out)
    }

    /// The Table-style case this scheme is equivalent to, if any.
    pub fn matching_case(&self, n: usize) -> Option<u8> {
        let b = if self.kind == WeightKind::SplitWise {
            Some(expand_weights(self, n).ok()?)
        } else {
            None
        };
        (1..=9).find(|&case| {
            let p = table1_preset(case, n).expect("valid case");
            let pb = (p.kind == WeightKind::SplitWise).then(|| expand_weights(&p, n).expect("preset weights"));
            p.kind == self.kind
                && p.d == self.d
                && p.e == self.e
                && pb == b
                && (p.kind == WeightKind::SplitWise || (p.reciprocate == self.reciprocate && p.a == self.a))
        })
    }
}

/// Split weights `b_1 … b_n` for the scheme's scale.
pub fn expand_weights(scheme: &WeightScheme, n: usize) -> Result<Vec<f64>> {
    let ramp = |f: fn(f64) -> f64| (1..=n).map(|i| f(i as f64)).collect();
    Ok(match scheme.scale {
        Scale::Explicit => {
            if scheme.b.len() != n {
                return Err(Error::config(format!(
                    "explicit weights need {n} values, got {}",
                    scheme.b.len()
                )));
            }
            scheme.b.clone()
        }
        Scale::LinearAdd => ramp(|i| i),
        Scale::LinearSub => (1..=n).map(|i| (n + 1 - i) as f64).collect(),
        Scale::Square => ramp(|i| i * i),
        Scale::Log => ramp(|i| (i + 1.0).log2()),
    })
}

fn weight_with(b: f64, split: usize, scheme: &WeightScheme, weights: &[f64]) -> f64 {
    match scheme.kind {
        WeightKind::Continuous if scheme.reciprocate => b.max(EPSILON) / scheme.a,
        WeightKind::Continuous => scheme.a / b.max(EPSILON),
        WeightKind::SplitWise => weights[split - 1],
    }
}

/// Weight `W` of a sample with difficulty `b` in 1-based `split`.
pub fn sample_weight(b: f64, split: usize, scheme: &WeightScheme, n: usize) -> Result<f64> {
    let weights = match scheme.kind {
        WeightKind::SplitWise => expand_weights(scheme, n)?,
        WeightKind::Continuous => Vec::new(),
    };
    if scheme.kind == WeightKind::SplitWise && !(1..=n).contains(&split) {
        return Err(Error::config(format!("split {split} outside 1..={n}")));
    }
    Ok(weight_with(b, split, scheme, &weights))
}

/// The weighting schemes of the reference table, generalized to `n` splits
/// with `b_i = i`. Cases 6 and 7 use continuous weights (`1/B` and `B`);
/// cases 8 and 9 bind the reward and penalty to `±1/B` and `±B`.
pub fn table1_preset(case_id: u8, n: usize) -> Result<WeightScheme> {
    use Multiplier::{Const, Sample};
    let split = |d: Multiplier, e: Multiplier| WeightScheme {
        kind: WeightKind::SplitWise,
        a: 1.0,
        b: Vec::new(),
        scale: Scale::LinearAdd,
        d,
        e,
        case_id: Some(case_id),
        reciprocate: false,
    };
    let continuous = |reciprocate: bool| WeightScheme {
        kind: WeightKind::Continuous,
        reciprocate,
        ..split(Const(1.0), Const(-1.0))
    };
    if !(MIN_SPLITS..=MAX_SPLITS).contains(&n) {
        return Err(Error::config(format!(
            "split count {n} outside supported range {MIN_SPLITS}-{MAX_SPLITS}"
        )));
    }
    Ok(match case_id {
        1 => split(Const(1.0), Const(-1.0)),
        2 => split(Const(1.0), Const(0.0)),
        3 => split(Const(0.0), Const(-1.0)),
        4 => split(Const(1.0), Const(-0.5)),
        5 => split(Const(0.5), Const(-1.0)),
        6 => continuous(false),
        7 => continuous(true),
        8 => split(
            Sample { coef: 1.0, per: PerSample::InvB },
            Sample { coef: -1.0, per: PerSample::InvB },
        ),
        9 => WeightScheme {
            reciprocate: true,
            ..split(
                Sample { coef: 1.0, per: PerSample::B },
                Sample { coef: -1.0, per: PerSample::B },
            )
        },
        other => return Err(Error::config(format!("no weighting case {other}; expected 1-9"))),
    })
}

pub fn case_description(case_id: u8) -> Option<&'static str> {
    Some(match case_id {
        1 => "Reward = Penalty",
        2 => "Reward Only",
        3 => "Penalty Only",
        4 => "Reward > Penalty",
        5 => "Penalty > Reward",
        6 => "Continuous Weights",
        7 => "Continuous Weights (*)",
        8 => "Reward = Penalty = B",
        9 => "Reward = Penalty = B (*)",
        _ => return None,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricResult {
    pub model_id: String,
    pub method: String,
    /// `100 · Σ K·W / Σ d·W` when normalized, otherwise the raw `Σ K·W`.
    pub overall: f64,
    pub normalized: bool,
    pub numerator: f64,
    pub denominator: f64,
    /// Per-split scores, each over its own `Σ d·W`; `None` for empty splits.
    pub split_scores: Vec<Option<f64>>,
    pub split_normalized: Vec<bool>,
    pub per_sample: BTreeMap<String, f64>,
    pub excluded: BTreeSet<String>,
    pub correct: usize,
    pub included: usize,
}

fn ratio(num: f64, den: f64) -> (f64, bool) {
    if den > 0.0 {
        (100.0 * num / den, true)
    } else {
        (num, false)
    }
}

/// Scores `run` on every sample that has a split.
pub fn weighted_metric(
    run: &ModelRun,
    corpus: &Corpus,
    scores: &DifficultyScore,
    splits: &SplitAssignment,
    scheme: &WeightScheme,
) -> Result<MetricResult> {
    let method = scores.method.to_string();
    if splits.method != method {
        return Err(Error::ProvenanceError(format!(
            "splits were formed from {} but scores come from {method}",
            splits.method
        )));
    }
    if let crate::difficulty::Method::Wmprob { model_id } = &scores.method {
        if model_id != run.model_id() {
            return Err(Error::ProvenanceError(format!(
                "confidence scores of {model_id} applied to {}",
                run.model_id()
            )));
        }
    }
    let n = splits.n();
    scheme.validate(n)?;
    let weights = match scheme.kind {
        WeightKind::SplitWise => expand_weights(scheme, n)?,
        WeightKind::Continuous => Vec::new(),
    };
    let mut numerator = 0.0;
    let mut denominator = 0.0;
    let mut split_num = vec![0.0; n];
    let mut split_den = vec![0.0; n];
    let mut split_count = vec![0usize; n];
    let mut per_sample = BTreeMap::new();
    let mut correct_count = 0;
    for (id, &split) in &splits.assignment {
        let b = scores.get(id).ok_or_else(|| {
            Error::ProvenanceError(format!("sample {id} has a split but no score"))
        })?;
        let correct = run.is_correct(corpus, id)?;
        let w = weight_with(b, split, scheme, &weights);
        let d = scheme.d.eval(b);
        let k = if correct { d } else { scheme.e.eval(b) };
        correct_count += usize::from(correct);
        numerator += k * w;
        denominator += d * w;
        split_num[split - 1] += k * w;
        split_den[split - 1] += d * w;
        split_count[split - 1] += 1;
        per_sample.insert(id.clone(), k * w);
    }
    let (overall, normalized) = ratio(numerator, denominator);
    let mut split_scores = Vec::with_capacity(n);
    let mut split_normalized = Vec::with_capacity(n);
    for s in 0..n {
        if split_count[s] == 0 {
            split_scores.push(None);
            split_normalized.push(false);
        } else {
            let (v, norm) = ratio(split_num[s], split_den[s]);
            split_scores.push(Some(v));
            split_normalized.push(norm);
        }
    }
    Ok(MetricResult {
        model_id: run.model_id().to_string(),
        method,
        overall,
        normalized,
        numerator,
        denominator,
        split_scores,
        split_normalized,
        per_sample,
        excluded: scores.undefined_ids.clone(),
        correct: correct_count,
        included: splits.assignment.len(),
    })
}
