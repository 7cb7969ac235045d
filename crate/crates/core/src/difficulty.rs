//! Per-sample difficulty scores `B ∈ [0, 1]`.
//!
//! Four producers share one output type:
//!
//! * [`bias_within_test`]: repeated small-subset probing inside the test set
//!   with two linear learners; `B` is the fraction of evaluations in which the
//!   sample was predicted correctly;
//! * [`bias_across_train_test`]: four learners trained on the train set;
//!   `B = (number correct) / 4`;
//! * [`wood_difficulty`]: mean of the top-p% train similarities of a test
//!   sample (high `B` = close to the training data);
//! * [`wmprob_difficulty`]: the model's own confidence.
//!
//! For the first three a high `B` means "easy". Confidence scores keep the raw
//! value; flipping the easy/hard reading is the scoring module's job.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::ingest::{write_json_line, EmbeddingFile, HoldoutMask};
use crate::learners::{self, LearnerKind, LearnerSpec};
use crate::model::{Corpus, LabelId, ModelRun, Partition};

/// Share of `R` allowed to end up without any evaluation before a warning.
pub const COVERAGE_WARN_FRACTION: f64 = 0.05;
pub const DEFAULT_ITERATIONS: usize = 64;
pub const HOLDOUT_FRACTION: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub enum Method {
    WsbiasAlg1,
    WsbiasAlg2,
    Wood { p: f64 },
    Wmprob { model_id: String },
}

impl Method {
    pub fn id(&self) -> &'static str {
        match self {
            Method::WsbiasAlg1 => "wsbias_alg1",
            Method::WsbiasAlg2 => "wsbias_alg2",
            Method::Wood { .. } => "wood",
            Method::Wmprob { .. } => "wmprob",
        }
    }

    /// Confidence-based scores read "high B = hard" and need reciprocation.
    pub fn is_confidence(&self) -> bool {
        matches!(self, Method::Wmprob { .. })
    }

    /// Model-independent methods share one score set across a leaderboard.
    pub fn is_model_specific(&self) -> bool {
        self.is_confidence()
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Wood { p } => write!(f, "wood(p={p})"),
            Method::Wmprob { model_id } => write!(f, "wmprob({model_id})"),
            m => f.write_str(m.id()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DifficultyScore {
    pub method: Method,
    /// Parameters used to produce the scores (seed, m, t, p, embedding source…).
    pub params: BTreeMap<String, Value>,
    pub values: BTreeMap<String, f64>,
    pub undefined_ids: BTreeSet<String>,
    pub warnings: Vec<String>,
}

impl DifficultyScore {
    pub fn new(method: Method) -> Self {
        DifficultyScore {
            method,
            params: BTreeMap::new(),
            values: BTreeMap::new(),
            undefined_ids: BTreeSet::new(),
            warnings: Vec::new(),
        }
    }

    /// Wraps externally computed scores; every value must lie in `[0, 1]`.
    pub fn from_values(method: Method, values: BTreeMap<String, f64>) -> Result<Self> {
        if let Some((id, v)) = values.iter().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(Error::RangeError { what: format!("B of {id}"), value: *v });
        }
        Ok(DifficultyScore { values, ..DifficultyScore::new(method) })
    }

    pub fn with_param(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }

    pub fn get(&self, id: &str) -> Option<f64> {
        self.values.get(id).copied()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Ids by increasing `B`, ties by ascending id.
    pub fn ascending_order(&self) -> Vec<&str> {
        let mut ids: Vec<(&str, f64)> = self.values.iter().map(|(k, v)| (k.as_str(), *v)).collect();
        ids.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(b.0)));
        ids.into_iter().map(|(k, _)| k).collect()
    }

    /// Ids by decreasing `B`, ties by ascending id.
    pub fn descending_order(&self) -> Vec<&str> {
        let mut ids: Vec<(&str, f64)> = self.values.iter().map(|(k, v)| (k.as_str(), *v)).collect();
        ids.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        ids.into_iter().map(|(k, _)| k).collect()
    }

    pub fn variance(&self) -> f64 {
        let n = self.values.len() as f64;
        let mean = self.values.values().sum::<f64>() / n;
        self.values.values().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
    }

    /// Header line `{"method","params","undefined","warnings"}` followed by
    /// one `{"sample_id","B"}` line per score in ascending id order.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        let mut params = self.params.clone();
        match &self.method {
            Method::Wood { p } => {
                params.insert("p".into(), json!(p));
            }
            Method::Wmprob { model_id } => {
                params.insert("model_id".into(), json!(model_id));
            }
            _ => {}
        }
        let header = json!({
            "method": self.method.id(),
            "params": params,
            "undefined": self.undefined_ids,
            "warnings": self.warnings,
        });
        write_json_line(&mut out, &header)?;
        for (id, b) in &self.values {
            write_json_line(&mut out, &ScoreLine { sample_id: id.clone(), b: *b })?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("in-memory write");
        buf
    }

    pub fn read_jsonl<R: Read>(reader: R) -> Result<Self> {
        let perr = |line: usize, m: String| Error::ParseError { line, message: m };
        let mut lines = BufReader::new(reader).lines();
        let header: ScoreHeader = match lines.next() {
            Some(l) => {
                let l = l.map_err(|e| perr(1, e.to_string()))?;
                serde_json::from_str(&l).map_err(|e| perr(1, e.to_string()))?
            }
            None => return Err(perr(0, "empty score file".into())),
        };
        let mut params = header.params;
        let method = match header.method.as_str() {
            "wsbias_alg1" => Method::WsbiasAlg1,
            "wsbias_alg2" => Method::WsbiasAlg2,
            "wood" => Method::Wood {
                p: params
                    .remove("p")
                    .and_then(|v| v.as_f64())
                    .ok_or_else(|| perr(1, "wood scores need params.p".into()))?,
            },
            "wmprob" => Method::Wmprob {
                model_id: params
                    .remove("model_id")
                    .and_then(|v| v.as_str().map(String::from))
                    .ok_or_else(|| perr(1, "wmprob scores need params.model_id".into()))?,
            },
            other => return Err(perr(1, format!("unknown method {other:?}"))),
        };
        let mut score = DifficultyScore::new(method);
        score.params = params;
        score.undefined_ids = header.undefined;
        score.warnings = header.warnings;
        for (i, l) in lines.enumerate() {
            let lineno = i + 2;
            let l = l.map_err(|e| perr(lineno, e.to_string()))?;
            if l.trim().is_empty() {
                continue;
            }
            let rec: ScoreLine = serde_json::from_str(&l).map_err(|e| perr(lineno, e.to_string()))?;
            if !(0.0..=1.0).contains(&rec.b) {
                return Err(Error::RangeError {
                    what: format!("B of {}", rec.sample_id),
                    value: rec.b,
                });
            }
            if score.values.insert(rec.sample_id.clone(), rec.b).is_some() {
                return Err(Error::DuplicateId(rec.sample_id));
            }
        }
        Ok(score)
    }
}

#[derive(Serialize, Deserialize)]
struct ScoreLine {
    sample_id: String,
    #[serde(rename = "B")]
    b: f64,
}

#[derive(Deserialize)]
struct ScoreHeader {
    method: String,
    #[serde(default)]
    params: BTreeMap<String, Value>,
    #[serde(default)]
    undefined: BTreeSet<String>,
    #[serde(default)]
    warnings: Vec<String>,
}

fn check_unit(score: &DifficultyScore) {
    debug_assert!(score.values.values().all(|b| (0.0..=1.0).contains(b)));
}

// ---------------------------------------------------------------------------
// Bias within the test set

#[derive(Clone, Debug, PartialEq)]
pub enum Holdout {
    /// Seeded, stratified 10% of the test partition.
    Auto,
    Mask(HoldoutMask),
}

#[derive(Clone, Debug, PartialEq)]
pub struct WithinTestConfig {
    pub m: usize,
    /// Probe training-subset size; defaults to `max(2, ⌊|R| / 100⌋)`.
    pub t: Option<usize>,
    pub seed: u64,
    pub holdout: Holdout,
    pub learners: [LearnerSpec; 2],
}

impl Default for WithinTestConfig {
    fn default() -> Self {
        WithinTestConfig {
            m: DEFAULT_ITERATIONS,
            t: None,
            seed: 0,
            holdout: Holdout::Auto,
            learners: [
                LearnerSpec::new(LearnerKind::Logreg),
                LearnerSpec::new(LearnerKind::SvmLinear),
            ],
        }
    }
}

/// Independent RNG stream for probe iteration `i`.
pub fn iteration_rng(seed: u64, i: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i as u64);
    rng
}

/// `t` distinct positions out of `0..n`, ascending.
pub fn draw_subset(rng: &mut ChaCha8Rng, n: usize, t: usize) -> Vec<usize> {
    let mut idx = rand::seq::index::sample(rng, n, t).into_vec();
    idx.sort_unstable();
    idx
}

/// Seed handed to learner `k` in iteration `i`.
pub fn learner_seed(seed: u64, i: usize, k: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add((i as u64) << 8)
        .wrapping_add(k as u64)
}

pub type Predictor = Box<dyn Fn(&[f64]) -> Result<LabelId> + Send + Sync>;

/// Fits `spec`; a single-class training subset yields a constant predictor
/// for that class.
pub fn fit_or_constant(spec: &LearnerSpec, xs: &[Vec<f64>], ys: &[LabelId]) -> Result<Predictor> {
    match learners::fit(spec, xs, ys) {
        Ok(model) => Ok(Box::new(move |x| model.predict(x))),
        Err(Error::DegenerateLabels) => {
            let only = ys[0];
            Ok(Box::new(move |_| Ok(only)))
        }
        Err(e) => Err(e),
    }
}

/// Probing loop over the test set minus the holdout (`R`): in each of `m`
/// iterations a random subset of size `t` trains both learners, which are then
/// evaluated on the rest of `R`. `B = correct / evaluated`.
pub fn bias_within_test(
    corpus: &Corpus,
    emb: &EmbeddingFile,
    config: &WithinTestConfig,
) -> Result<DifficultyScore> {
    if config.m == 0 {
        return Err(Error::config("m must be at least 1"));
    }
    let holdout = match &config.holdout {
        Holdout::Auto => HoldoutMask::stratified(corpus, HOLDOUT_FRACTION, config.seed)?,
        Holdout::Mask(mask) => HoldoutMask::new(mask.sample_ids.iter().cloned(), corpus)?,
    };
    let mut pool: Vec<(&str, LabelId)> = corpus
        .test()
        .filter(|s| !holdout.contains(&s.id))
        .map(|s| (s.id.as_str(), s.gold_label))
        .collect();
    pool.sort_unstable_by(|a, b| a.0.cmp(b.0));
    let n = pool.len();
    let t = config.t.unwrap_or_else(|| (n / 100).max(2));
    if t < 2 {
        return Err(Error::config("t must be at least 2"));
    }
    if t >= n {
        return Err(Error::config(format!(
            "t = {t} must be smaller than the probe pool (|R| = {n})"
        )));
    }
    let xs: Vec<Vec<f64>> = pool
        .iter()
        .map(|(id, _)| emb.require(id).map(<[f64]>::to_vec))
        .collect::<Result<_>>()?;
    let ys: Vec<LabelId> = pool.iter().map(|(_, y)| *y).collect();

    let iteration = |i: usize| -> Result<(Vec<u32>, Vec<u32>)> {
        let mut rng = iteration_rng(config.seed, i);
        let subset = draw_subset(&mut rng, n, t);
        let mut in_subset = vec![false; n];
        subset.iter().for_each(|&j| in_subset[j] = true);
        let train_x: Vec<Vec<f64>> = subset.iter().map(|&j| xs[j].clone()).collect();
        let train_y: Vec<LabelId> = subset.iter().map(|&j| ys[j]).collect();
        let mut evaluated = vec![0u32; n];
        let mut correct = vec![0u32; n];
        for (k, spec) in config.learners.iter().enumerate() {
            let spec = spec.clone().seeded(learner_seed(config.seed, i, k));
            let predict = fit_or_constant(&spec, &train_x, &train_y)?;
            for j in (0..n).filter(|&j| !in_subset[j]) {
                evaluated[j] += 1;
                if predict(&xs[j])? == ys[j] {
                    correct[j] += 1;
                }
            }
        }
        Ok((evaluated, correct))
    };
    let (evaluated, correct) = (0..config.m)
        .into_par_iter()
        .map(iteration)
        .try_reduce(
            || (vec![0u32; n], vec![0u32; n]),
            |(mut e1, mut c1), (e2, c2)| {
                e1.iter_mut().zip(e2).for_each(|(a, b)| *a += b);
                c1.iter_mut().zip(c2).for_each(|(a, b)| *a += b);
                Ok((e1, c1))
            },
        )?;

    let mut score = DifficultyScore::new(Method::WsbiasAlg1)
        .with_param("m", config.m)
        .with_param("t", t)
        .with_param("seed", config.seed)
        .with_param("holdout_size", holdout.len())
        .with_param(
            "learners",
            config.learners.iter().map(|l| l.kind.to_string()).collect::<Vec<_>>(),
        );
    score.undefined_ids = holdout.sample_ids.clone();
    let mut unevaluated = 0usize;
    for (j, (id, _)) in pool.iter().enumerate() {
        if evaluated[j] == 0 {
            unevaluated += 1;
            score.undefined_ids.insert(id.to_string());
        } else {
            score
                .values
                .insert(id.to_string(), correct[j] as f64 / evaluated[j] as f64);
        }
    }
    if unevaluated as f64 > COVERAGE_WARN_FRACTION * n as f64 {
        let msg = format!(
            "InsufficientCoverage: {unevaluated} of {n} probe samples were never evaluated"
        );
        log::warn!("{msg}");
        score.warnings.push(msg);
    }
    check_unit(&score);
    Ok(score)
}

// ---------------------------------------------------------------------------
// Bias across train and test

/// Ids, vectors and gold labels of one partition, in id order.
type Rows<'a> = (Vec<&'a str>, Vec<Vec<f64>>, Vec<LabelId>);

fn rows<'a>(corpus: &'a Corpus, emb: &EmbeddingFile, partition: Partition) -> Result<Rows<'a>> {
    let mut samples: Vec<_> = corpus.samples().iter().filter(|s| s.partition == partition).collect();
    samples.sort_unstable_by(|a, b| a.id.cmp(&b.id));
    let ids = samples.iter().map(|s| s.id.as_str()).collect();
    let xs = samples
        .iter()
        .map(|s| emb.require(&s.id).map(<[f64]>::to_vec))
        .collect::<Result<_>>()?;
    let ys = samples.iter().map(|s| s.gold_label).collect();
    Ok((ids, xs, ys))
}

/// Trains each learner on the full train set and counts, per test sample,
/// how many predict it correctly. `B = count / 4`.
pub fn bias_across_train_test(
    corpus: &Corpus,
    emb: &EmbeddingFile,
    specs: &[LearnerSpec],
) -> Result<DifficultyScore> {
    if specs.len() != 4 {
        return Err(Error::config(format!("expected four learners, got {}", specs.len())));
    }
    let (_, train_x, train_y) = rows(corpus, emb, Partition::Train)?;
    let (test_ids, test_x, test_y) = rows(corpus, emb, Partition::Test)?;
    if test_ids.is_empty() {
        return Err(Error::config("corpus has no test samples"));
    }
    let hits: Vec<Vec<bool>> = specs
        .par_iter()
        .map(|spec| {
            let model = learners::fit(spec, &train_x, &train_y)?;
            test_x
                .iter()
                .zip(&test_y)
                .map(|(x, y)| Ok(model.predict(x)? == *y))
                .collect::<Result<Vec<bool>>>()
        })
        .collect::<Result<_>>()?;
    let mut score = DifficultyScore::new(Method::WsbiasAlg2).with_param(
        "learners",
        specs.iter().map(|l| l.kind.to_string()).collect::<Vec<_>>(),
    );
    for (j, id) in test_ids.iter().enumerate() {
        let c = hits.iter().filter(|h| h[j]).count();
        score.values.insert(id.to_string(), c as f64 / 4.0);
    }
    check_unit(&score);
    Ok(score)
}

// ---------------------------------------------------------------------------
// Train/test similarity

/// `(cos(u, v) + 1) / 2`; a zero vector is at similarity 0.5 from anything.
pub fn similarity(u: &[f64], v: &[f64]) -> f64 {
    let nu = learners::dot(u, u);
    let nv = learners::dot(v, v);
    if nu == 0.0 || nv == 0.0 {
        return 0.5;
    }
    // sqrt(fl(x²)) == |x|, so parallel vectors land exactly on ±1.
    let cos = (learners::dot(u, v) / (nu * nv).sqrt()).clamp(-1.0, 1.0);
    (cos + 1.0) / 2.0
}

/// Similarity of every test sample (rows) to every train sample (columns),
/// both in ascending id order.
#[derive(Clone, Debug, PartialEq)]
pub struct StsMatrix {
    pub test_ids: Vec<String>,
    pub train_ids: Vec<String>,
    values: Vec<f64>,
}

impl StsMatrix {
    pub fn from_rows(test_ids: Vec<String>, train_ids: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.len() != test_ids.len() {
            return Err(Error::DimMismatch { expected: test_ids.len(), got: rows.len() });
        }
        let mut values = Vec::with_capacity(test_ids.len() * train_ids.len());
        for r in rows {
            if r.len() != train_ids.len() {
                return Err(Error::DimMismatch { expected: train_ids.len(), got: r.len() });
            }
            if r.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::config("similarities must lie in [0, 1]"));
            }
            values.extend(r);
        }
        Ok(StsMatrix { test_ids, train_ids, values })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.train_ids.len();
        &self.values[i * w..(i + 1) * w]
    }

    pub fn get(&self, test_id: &str, train_id: &str) -> Option<f64> {
        let i = self.test_ids.binary_search_by(|x| x.as_str().cmp(test_id)).ok()?;
        let j = self.train_ids.binary_search_by(|x| x.as_str().cmp(train_id)).ok()?;
        Some(self.row(i)[j])
    }
}

pub fn sts_matrix(corpus: &Corpus, emb: &EmbeddingFile) -> Result<StsMatrix> {
    let (train_ids, train_x, _) = rows(corpus, emb, Partition::Train)?;
    let (test_ids, test_x, _) = rows(corpus, emb, Partition::Test)?;
    let values: Vec<f64> = test_x
        .par_iter()
        .flat_map_iter(|u| train_x.iter().map(move |v| similarity(u, v)))
        .collect();
    Ok(StsMatrix {
        test_ids: test_ids.into_iter().map(String::from).collect(),
        train_ids: train_ids.into_iter().map(String::from).collect(),
        values,
    })
}

/// Number of train neighbours averaged at percentage `p`: `⌈p · n / 100⌉`.
pub fn top_count(p: f64, n: usize) -> usize {
    ((p * n as f64 / 100.0).ceil() as usize).clamp(1, n)
}

/// Running means of the descending-sorted values. Each step is clamped to
/// `[x_k, mean_{k−1}]`, which holds exactly in real arithmetic, so the
/// sequence is non-increasing and bracketed by the extremes in floating point.
fn top_means(sorted_desc: &[f64], k: usize) -> f64 {
    let mut mean = sorted_desc[0];
    for (j, &x) in sorted_desc.iter().enumerate().take(k).skip(1) {
        let next = mean + (x - mean) / (j + 1) as f64;
        mean = next.clamp(x, mean);
    }
    mean
}

/// Mean of the top `p`% similarities of each test sample.
pub fn wood_difficulty(sts: &StsMatrix, p: f64) -> Result<DifficultyScore> {
    if !(p > 0.0 && p <= 100.0) {
        return Err(Error::config(format!("STS percentage must be in (0, 100], got {p}")));
    }
    let n = sts.train_ids.len();
    if n == 0 {
        return Err(Error::config("train set is empty"));
    }
    let k = top_count(p, n);
    let values: Vec<f64> = (0..sts.test_ids.len())
        .into_par_iter()
        .map(|i| {
            let mut row = sts.row(i).to_vec();
            row.sort_unstable_by(|a, b| b.total_cmp(a));
            top_means(&row, k)
        })
        .collect();
    let mut score = DifficultyScore::new(Method::Wood { p }).with_param("k", k);
    score.values = sts.test_ids.iter().cloned().zip(values).collect();
    check_unit(&score);
    Ok(score)
}

/// `B` is the model's confidence on each test sample.
pub fn wmprob_difficulty(run: &ModelRun) -> DifficultyScore {
    let mut score = DifficultyScore::new(Method::Wmprob {
        model_id: run.model_id().to_string(),
    });
    score.values = run
        .records()
        .iter()
        .map(|(id, r)| (id.clone(), r.confidence))
        .collect();
    check_unit(&score);
    score
}
