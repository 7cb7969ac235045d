//! Generators and independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use eqlboard::difficulty::{DifficultyScore, Method};
use eqlboard::model::{Corpus, ModelRun, Partition, PredictionRecord, Sample};
use eqlboard::scoring::SplitConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn sample_id(i: usize) -> String {
    format!("s{i:04}")
}

pub struct Instance {
    pub corpus: Corpus,
    pub runs: Vec<ModelRun>,
    pub scores: DifficultyScore,
}

/// Difficulty values mixing the Algorithm-2 grid (to force ties) with
/// continuous draws from `[lo, 1]`.
pub fn random_b(rng: &mut ChaCha8Rng, lo: f64) -> f64 {
    if rng.random_bool(0.4) {
        let grid: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];
        grid[rng.random_range(0..5)].max(lo)
    } else {
        rng.random_range(lo..=1.0)
    }
}

/// Binary test corpus of `n` samples plus one train sample.
pub fn binary_corpus(rng: &mut ChaCha8Rng, n: usize) -> Corpus {
    let mut samples: Vec<Sample> = (0..n)
        .map(|i| Sample::new(sample_id(i), format!("text {i}"), rng.random_range(0..2), Partition::Test))
        .collect();
    samples.push(Sample::new("train0", "train", 0, Partition::Train));
    Corpus::new("synthetic", vec!["neg".into(), "pos".into()], samples).unwrap()
}

/// A run whose prediction on sample `i` is correct iff `correct[i]`.
pub fn run_from_flags(model_id: &str, corpus: &Corpus, correct: &[bool], confidence: &[f64]) -> ModelRun {
    let records = corpus
        .test_ids()
        .iter()
        .enumerate()
        .map(|(i, id)| {
            let gold = corpus.gold(id).unwrap();
            PredictionRecord {
                sample_id: id.to_string(),
                predicted_label: if correct[i] { gold } else { 1 - gold },
                confidence: confidence[i],
            }
        })
        .collect();
    ModelRun::new(model_id, records, corpus).unwrap()
}

pub fn random_runs(rng: &mut ChaCha8Rng, corpus: &Corpus, models: usize, conf_lo: f64) -> Vec<ModelRun> {
    let n = corpus.test_len();
    (0..models)
        .map(|m| {
            let p = rng.random_range(0.2..0.95);
            let flags: Vec<bool> = (0..n).map(|_| rng.random_bool(p)).collect();
            let conf: Vec<f64> = (0..n).map(|_| random_b(rng, conf_lo)).collect();
            run_from_flags(&format!("m{m}"), corpus, &flags, &conf)
        })
        .collect()
}

pub fn instance(rng: &mut ChaCha8Rng, samples: usize, models: usize, b_lo: f64) -> Instance {
    let corpus = binary_corpus(rng, samples);
    let runs = random_runs(rng, &corpus, models, b_lo);
    let values = corpus
        .test_ids()
        .iter()
        .map(|id| (id.to_string(), random_b(rng, b_lo)))
        .collect();
    let scores = DifficultyScore::from_values(Method::WsbiasAlg2, values).unwrap();
    Instance { corpus, runs, scores }
}

pub fn random_split_config(rng: &mut ChaCha8Rng, max_n: usize) -> SplitConfig {
    let n = rng.random_range(2..=max_n.min(7));
    if rng.random_bool(0.5) {
        SplitConfig::equal_population(n)
    } else {
        SplitConfig::equal_thresholds(n)
    }
}

pub fn correct_flags(run: &ModelRun, corpus: &Corpus) -> BTreeMap<String, bool> {
    run.records()
        .iter()
        .map(|(id, r)| (id.clone(), corpus.gold(id) == Some(r.predicted_label)))
        .collect()
}

// ---------------------------------------------------------------------------
// Direct-summation oracle

/// Split (1-based) of every sample. Split 1 holds the highest `B` unless
/// `low_is_easy`, in which case it holds the lowest.
pub fn oracle_splits(values: &BTreeMap<String, f64>, config: &SplitConfig, low_is_easy: bool) -> BTreeMap<String, usize> {
    let n = config.n;
    match config.thresholds() {
        Some(th) => values
            .iter()
            .map(|(id, &b)| {
                let below = th.iter().filter(|&&t| t < b).count();
                (id.clone(), if low_is_easy { below + 1 } else { n - below })
            })
            .collect(),
        None => {
            let mut ids: Vec<(&String, f64)> = values.iter().map(|(k, v)| (k, *v)).collect();
            ids.sort_by(|x, y| {
                let by_b = if low_is_easy { x.1.partial_cmp(&y.1) } else { y.1.partial_cmp(&x.1) };
                by_b.unwrap().then(x.0.cmp(y.0))
            });
            let total = ids.len();
            let mut out = BTreeMap::new();
            for (pos, (id, _)) in ids.into_iter().enumerate() {
                // Walk the cumulative sizes: the first `total % n` splits get one extra.
                let mut cum = 0;
                for s in 0..n {
                    cum += total / n + usize::from(s < total % n);
                    if pos < cum {
                        out.insert(id.clone(), s + 1);
                        break;
                    }
                }
            }
            out
        }
    }
}

/// `(W, d, e)` for one sample under reference case `case` with `b_i = i`.
pub fn oracle_terms(case: u8, split: usize, b: f64) -> (f64, f64, f64) {
    let eps = 1e-6;
    let i = split as f64;
    match case {
        1 => (i, 1.0, -1.0),
        2 => (i, 1.0, 0.0),
        3 => (i, 0.0, -1.0),
        4 => (i, 1.0, -0.5),
        5 => (i, 0.5, -1.0),
        6 => (1.0 / b.max(eps), 1.0, -1.0),
        7 => (b.max(eps), 1.0, -1.0),
        8 => (i, 1.0 / b.max(eps), -1.0 / b.max(eps)),
        9 => (i, b, -b),
        _ => panic!("no case {case}"),
    }
}

#[derive(Debug)]
pub struct OracleScore {
    pub overall: f64,
    pub normalized: bool,
    pub splits: Vec<Option<f64>>,
}

pub fn oracle_score(
    values: &BTreeMap<String, f64>,
    correct: &BTreeMap<String, bool>,
    split_of: &BTreeMap<String, usize>,
    n: usize,
    terms: impl Fn(usize, f64) -> (f64, f64, f64),
) -> OracleScore {
    let mut num = 0.0;
    let mut den = 0.0;
    let mut s_num = vec![0.0; n];
    let mut s_den = vec![0.0; n];
    let mut s_cnt = vec![0; n];
    for (id, &b) in values {
        let split = split_of[id];
        let (w, d, e) = terms(split, b);
        let k = if correct[id] { d } else { e };
        num += k * w;
        den += d * w;
        s_num[split - 1] += k * w;
        s_den[split - 1] += d * w;
        s_cnt[split - 1] += 1;
    }
    let ratio = |a: f64, b: f64| if b > 0.0 { 100.0 * a / b } else { a };
    OracleScore {
        overall: ratio(num, den),
        normalized: den > 0.0,
        splits: (0..n).map(|s| (s_cnt[s] > 0).then(|| ratio(s_num[s], s_den[s]))).collect(),
    }
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

// ---------------------------------------------------------------------------
// Learner oracles

/// Mean log-loss plus `l2/2 ‖w‖²`, written with the naive formula.
pub fn naive_logloss(w: &[f64], b: f64, xs: &[Vec<f64>], t: &[f64], l2: f64) -> f64 {
    let n = xs.len() as f64;
    let mut total = 0.0;
    for (x, &ti) in xs.iter().zip(t) {
        let z: f64 = w.iter().zip(x).map(|(a, c)| a * c).sum::<f64>() + b;
        let p = 1.0 / (1.0 + (-z).exp());
        total += -(ti * p.ln() + (1.0 - ti) * (1.0 - p).ln());
    }
    total / n + 0.5 * l2 * w.iter().map(|v| v * v).sum::<f64>()
}

/// XOR corner points and their labels (0 on the diagonal, 1 off it).
pub fn xor_points() -> (Vec<Vec<f64>>, Vec<usize>) {
    (
        vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]],
        vec![0, 0, 1, 1],
    )
}

pub struct DualOracle {
    pub alpha: Vec<f64>,
    pub bias: f64,
    pub support: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub gamma: f64,
}

impl DualOracle {
    pub fn decision(&self, z: &[f64]) -> f64 {
        let k = |a: &[f64], b: &[f64]| {
            (-self.gamma * a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()).exp()
        };
        self.alpha
            .iter()
            .zip(&self.y)
            .zip(&self.support)
            .map(|((a, y), s)| a * y * k(s, z))
            .sum::<f64>()
            + self.bias
    }
}

/// Maximizes the four-point dual by grid search over the equality-constrained
/// slice `α4 = α1 + α2 − α3` (labels `−,−,+,+`), refined twice around the
/// incumbent. Points are the standardized XOR corners.
pub fn xor_dual_grid(c: f64, gamma: f64) -> DualOracle {
    let pts = vec![vec![-1.0, -1.0], vec![1.0, 1.0], vec![-1.0, 1.0], vec![1.0, -1.0]];
    let y = vec![-1.0, -1.0, 1.0, 1.0];
    let kern: Vec<Vec<f64>> = pts
        .iter()
        .map(|a| {
            pts.iter()
                .map(|b: &Vec<f64>| {
                    (-gamma * a.iter().zip(b).map(|(x, z)| (x - z) * (x - z)).sum::<f64>()).exp()
                })
                .collect()
        })
        .collect();
    let objective = |a: &[f64; 4]| {
        let mut q = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                q += a[i] * a[j] * y[i] * y[j] * kern[i][j];
            }
        }
        a.iter().sum::<f64>() - 0.5 * q
    };
    let (mut center, mut half, steps) = ([c / 2.0; 3], c / 2.0, 40);
    let mut best = ([0.0; 4], f64::NEG_INFINITY);
    for _ in 0..3 {
        let axis = |k: usize, d: usize| center[d] - half + 2.0 * half * k as f64 / steps as f64;
        for i in 0..=steps {
            for j in 0..=steps {
                for l in 0..=steps {
                    let (a1, a2, a3) = (axis(i, 0), axis(j, 1), axis(l, 2));
                    let a4 = a1 + a2 - a3;
                    let a = [a1, a2, a3, a4];
                    if a.iter().any(|v| *v < 0.0 || *v > c) {
                        continue;
                    }
                    let v = objective(&a);
                    if v > best.1 {
                        best = (a, v);
                    }
                }
            }
        }
        center = [best.0[0], best.0[1], best.0[2]];
        half /= 10.0;
    }
    let alpha = best.0.to_vec();
    // Bias from the free multipliers.
    let free: Vec<usize> = (0..4).filter(|&i| alpha[i] > 1e-9 && alpha[i] < c - 1e-9).collect();
    let bias = free
        .iter()
        .map(|&i| y[i] - (0..4).map(|j| alpha[j] * y[j] * kern[i][j]).sum::<f64>())
        .sum::<f64>()
        / free.len().max(1) as f64;
    DualOracle { alpha, bias, support: pts, y, gamma }
}

// ---------------------------------------------------------------------------
// Corpora with vectors

/// Two noisy clusters along a random direction, `flip` of the labels
/// randomized so the bias scores spread out.
pub fn vector_corpus(rng: &mut ChaCha8Rng, train: usize, test: usize, dim: usize, flip: f64) -> Corpus {
    let dir: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut samples = Vec::new();
    for (i, part) in (0..train + test).map(|i| (i, if i < train { Partition::Train } else { Partition::Test })) {
        let label: usize = rng.random_range(0..2);
        let sign = if label == 1 { 1.0 } else { -1.0 };
        let v: Vec<f64> = dir.iter().map(|d| sign * d + rng.random_range(-1.2..1.2)).collect();
        let label = if rng.random_bool(flip) { 1 - label } else { label };
        let id = match part {
            Partition::Train => format!("tr{i:04}"),
            Partition::Test => sample_id(i - train),
        };
        samples.push(Sample::new(id, format!("text {i}"), label, part).with_vector(v));
    }
    Corpus::new("clusters", vec!["neg".into(), "pos".into()], samples).unwrap()
}

// ---------------------------------------------------------------------------
// On-disk fixtures

/// Writes a corpus (no inline vectors), an EMB1 embedding file and CSV
/// predictions for three models into `dir`, returning a manifest for them.
pub fn write_fixture(dir: &std::path::Path, seed: u64) -> eqlboard::session::Manifest {
    use eqlboard::ingest::{save_corpus, save_embeddings, save_predictions, EmbeddingFormat, PredictionFormat};
    let mut r = rng(seed);
    let with_vectors = vector_corpus(&mut r, 30, 40, 4, 0.15);
    let emb = eqlboard::ingest::EmbeddingFile::from_corpus(&with_vectors).unwrap();
    let plain: Vec<Sample> = with_vectors
        .samples()
        .iter()
        .map(|s| Sample { vector: None, ..s.clone() })
        .collect();
    let corpus = Corpus::new("fixture", with_vectors.label_vocab().to_vec(), plain).unwrap();
    let runs = random_runs(&mut r, &corpus, 3, 0.05);
    let paths = (dir.join("corpus.jsonl"), dir.join("predictions.csv"), dir.join("embeddings.bin"));
    save_corpus(&corpus, &paths.0).unwrap();
    save_predictions(&runs, &corpus, &paths.1, PredictionFormat::Csv).unwrap();
    save_embeddings(&emb, &paths.2, EmbeddingFormat::Bin).unwrap();
    eqlboard::session::Manifest {
        corpus: paths.0,
        predictions: paths.1,
        embeddings: Some(paths.2),
        seed: 17,
        ..Default::default()
    }
}

/// Sentence-embedding-like corpus: `topics` random centroids in `dim`
/// dimensions, each vector a centroid plus isotropic noise.
pub fn topic_corpus(rng: &mut ChaCha8Rng, train: usize, test: usize, dim: usize, topics: usize) -> Corpus {
    let centroids: Vec<Vec<f64>> = (0..topics).map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let samples = (0..train + test)
        .map(|i| {
            let t = rng.random_range(0..topics);
            let v: Vec<f64> = centroids[t].iter().map(|c| c + rng.random_range(-1.0..1.0)).collect();
            let (id, part) = if i < train {
                (format!("tr{i:04}"), Partition::Train)
            } else {
                (sample_id(i - train), Partition::Test)
            };
            Sample::new(id, format!("text {i}"), t % 2, part).with_vector(v)
        })
        .collect();
    Corpus::new("topics", vec!["neg".into(), "pos".into()], samples).unwrap()
}
