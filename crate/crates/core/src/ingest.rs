//! Loading and saving corpora, prediction dumps, and embedding files.
//!
//! Line-oriented formats:
//!
//! * corpus JSONL: `{"id","text","label","partition"}` per line, with an
//!   optional leading `{"corpus","label_vocab"}` header and an optional
//!   inline `"vector"` field;
//! * predictions JSONL: `{"model","sample_id","predicted","confidence"}`;
//! * predictions CSV: header row naming the same four columns, any order;
//! * embeddings JSONL: `{"sample_id","vector"}`.
//!
//! The binary embedding format is `EMB1`, a little-endian `u32` dimension,
//! then records of (`u16` id length, UTF-8 id, `dim` × `f32` LE).

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::model::{label_index, Corpus, ModelRun, Partition, PredictionRecord, Sample};

pub const EMB_MAGIC: &[u8; 4] = b"EMB1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictionFormat {
    Jsonl,
    Csv,
}

impl PredictionFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        match extension(path).as_deref() {
            Some("jsonl") | Some("json") => Ok(PredictionFormat::Jsonl),
            Some("csv") => Ok(PredictionFormat::Csv),
            _ => Err(Error::config(format!(
                "cannot infer prediction format of {}",
                path.display()
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingFormat {
    Jsonl,
    Bin,
}

impl EmbeddingFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        match extension(path).as_deref() {
            Some("jsonl") | Some("json") => Ok(EmbeddingFormat::Jsonl),
            Some("bin") | Some("emb") => Ok(EmbeddingFormat::Bin),
            _ => Err(Error::config(format!(
                "cannot infer embedding format of {}",
                path.display()
            ))),
        }
    }
}

fn extension(path: &Path) -> Option<String> {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn parse_err(line: usize, message: impl ToString) -> Error {
    Error::ParseError {
        line,
        message: message.to_string(),
    }
}

// ---------------------------------------------------------------------------
// Corpus

#[derive(Debug, Serialize, Deserialize)]
struct CorpusHeader {
    corpus: String,
    label_vocab: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CorpusLine {
    id: String,
    text: String,
    label: String,
    partition: Partition,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    vector: Option<Vec<f64>>,
}

/// Loads a JSONL corpus. Without a header line the vocabulary is the sorted
/// set of labels seen, and the corpus is named after the file stem.
pub fn load_corpus(path: &Path) -> Result<Corpus> {
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("corpus")
        .to_string();
    parse_corpus(open(path)?, &name)
}

pub fn parse_corpus<R: Read>(reader: R, default_name: &str) -> Result<Corpus> {
    let mut header: Option<CorpusHeader> = None;
    let mut lines = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| parse_err(lineno, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(&line).map_err(|e| parse_err(lineno, e))?;
        if value.get("label_vocab").is_some() {
            if header.is_some() || !lines.is_empty() {
                return Err(parse_err(lineno, "header must be the first record"));
            }
            header = Some(serde_json::from_value(value).map_err(|e| parse_err(lineno, e))?);
            continue;
        }
        let record: CorpusLine =
            serde_json::from_value(value).map_err(|e| parse_err(lineno, e))?;
        lines.push((lineno, record));
    }
    if lines.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let (name, vocab) = match header {
        Some(h) => (h.corpus, h.label_vocab),
        None => {
            let set: BTreeSet<&str> = lines.iter().map(|(_, r)| r.label.as_str()).collect();
            (
                default_name.to_string(),
                set.into_iter().map(String::from).collect(),
            )
        }
    };
    let mut samples = Vec::with_capacity(lines.len());
    for (lineno, r) in lines {
        let gold = label_index(&vocab, &r.label).map_err(|e| parse_err(lineno, e))?;
        samples.push(Sample {
            id: r.id,
            text: r.text,
            gold_label: gold,
            partition: r.partition,
            vector: r.vector,
        });
    }
    Corpus::new(name, vocab, samples)
}

/// Writes `corpus` as JSONL, header first, samples in stored order.
pub fn write_corpus<W: Write>(corpus: &Corpus, mut out: W) -> Result<()> {
    let header = CorpusHeader {
        corpus: corpus.name().to_string(),
        label_vocab: corpus.label_vocab().to_vec(),
    };
    write_json_line(&mut out, &header)?;
    for s in corpus.samples() {
        let line = CorpusLine {
            id: s.id.clone(),
            text: s.text.clone(),
            label: corpus.label_vocab()[s.gold_label].clone(),
            partition: s.partition,
            vector: s.vector.clone(),
        };
        write_json_line(&mut out, &line)?;
    }
    Ok(())
}

pub fn save_corpus(corpus: &Corpus, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    write_corpus(corpus, &mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn write_json_line<W: Write, T: Serialize>(out: &mut W, value: &T) -> Result<()> {
    let mut buf = serde_json::to_vec(value).expect("serializable record");
    buf.push(b'\n');
    out.write_all(&buf)
        .map_err(|e| Error::io("<output>", e))
}

// ---------------------------------------------------------------------------
// Predictions

#[derive(Debug, Deserialize)]
struct PredictionLine {
    model: String,
    sample_id: String,
    predicted: Value,
    confidence: f64,
}

#[derive(Serialize)]
struct PredictionOut<'a> {
    model: &'a str,
    sample_id: &'a str,
    predicted: &'a str,
    confidence: f64,
}

pub fn load_predictions(path: &Path, format: PredictionFormat, corpus: &Corpus) -> Result<Vec<ModelRun>> {
    let reader = open(path)?;
    match format {
        PredictionFormat::Jsonl => parse_predictions_jsonl(reader, corpus),
        PredictionFormat::Csv => parse_predictions_csv(reader, corpus),
    }
}

/// A predicted label may be written as a vocabulary string or a label index.
fn resolve_label(corpus: &Corpus, raw: &Value, line: usize) -> Result<usize> {
    match raw {
        Value::String(s) => resolve_label_str(corpus, s),
        Value::Number(n) => {
            let id = n
                .as_u64()
                .ok_or_else(|| parse_err(line, format!("bad label index {n}")))?
                as usize;
            if id >= corpus.label_vocab().len() {
                return Err(Error::UnknownLabel(n.to_string()));
            }
            Ok(id)
        }
        other => Err(parse_err(line, format!("bad predicted label {other}"))),
    }
}

fn resolve_label_str(corpus: &Corpus, s: &str) -> Result<usize> {
    if let Ok(id) = label_index(corpus.label_vocab(), s) {
        return Ok(id);
    }
    match s.trim().parse::<usize>() {
        Ok(id) if id < corpus.label_vocab().len() => Ok(id),
        _ => Err(Error::UnknownLabel(s.to_string())),
    }
}

fn check_confidence(model: &str, sample_id: &str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::RangeError {
            what: format!("confidence of {model}/{sample_id}"),
            value,
        })
    }
}

fn assemble_runs(
    grouped: BTreeMap<String, Vec<PredictionRecord>>,
    corpus: &Corpus,
) -> Result<Vec<ModelRun>> {
    if grouped.is_empty() {
        return Err(parse_err(0, "no prediction records"));
    }
    grouped
        .into_iter()
        .map(|(model, records)| ModelRun::new(model, records, corpus))
        .collect()
}

pub fn parse_predictions_jsonl<R: Read>(reader: R, corpus: &Corpus) -> Result<Vec<ModelRun>> {
    let mut grouped: BTreeMap<String, Vec<PredictionRecord>> = BTreeMap::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| parse_err(lineno, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: PredictionLine = serde_json::from_str(&line).map_err(|e| parse_err(lineno, e))?;
        check_confidence(&rec.model, &rec.sample_id, rec.confidence)?;
        let predicted_label = resolve_label(corpus, &rec.predicted, lineno)?;
        grouped.entry(rec.model).or_default().push(PredictionRecord {
            sample_id: rec.sample_id,
            predicted_label,
            confidence: rec.confidence,
        });
    }
    assemble_runs(grouped, corpus)
}

pub fn parse_predictions_csv<R: Read>(reader: R, corpus: &Corpus) -> Result<Vec<ModelRun>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| parse_err(1, e))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| parse_err(1, format!("missing column {name:?}")))
    };
    let (c_model, c_sample, c_pred, c_conf) =
        (col("model")?, col("sample_id")?, col("predicted")?, col("confidence")?);
    let mut grouped: BTreeMap<String, Vec<PredictionRecord>> = BTreeMap::new();
    for (i, row) in rdr.records().enumerate() {
        let lineno = i + 2;
        let row = row.map_err(|e| parse_err(lineno, e))?;
        let field = |c: usize| {
            row.get(c)
                .ok_or_else(|| parse_err(lineno, "short row"))
        };
        let model = field(c_model)?.to_string();
        let sample_id = field(c_sample)?.to_string();
        let confidence: f64 = field(c_conf)?
            .parse()
            .map_err(|e| parse_err(lineno, format!("confidence: {e}")))?;
        check_confidence(&model, &sample_id, confidence)?;
        let predicted_label = resolve_label_str(corpus, field(c_pred)?)?;
        grouped.entry(model).or_default().push(PredictionRecord {
            sample_id,
            predicted_label,
            confidence,
        });
    }
    assemble_runs(grouped, corpus)
}

/// Writes all runs as one JSONL dump, models and samples in ascending id order.
pub fn write_predictions_jsonl<W: Write>(runs: &[ModelRun], corpus: &Corpus, mut out: W) -> Result<()> {
    let mut sorted: Vec<&ModelRun> = runs.iter().collect();
    sorted.sort_by(|a, b| a.model_id().cmp(b.model_id()));
    for run in sorted {
        for rec in run.records().values() {
            let line = PredictionOut {
                model: run.model_id(),
                sample_id: &rec.sample_id,
                predicted: &corpus.label_vocab()[rec.predicted_label],
                confidence: rec.confidence,
            };
            write_json_line(&mut out, &line)?;
        }
    }
    Ok(())
}

pub fn write_predictions_csv<W: Write>(runs: &[ModelRun], corpus: &Corpus, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::io("<csv>", std::io::Error::other(e));
    w.write_record(["model", "sample_id", "predicted", "confidence"])
        .map_err(csv_err)?;
    let mut sorted: Vec<&ModelRun> = runs.iter().collect();
    sorted.sort_by(|a, b| a.model_id().cmp(b.model_id()));
    for run in sorted {
        for rec in run.records().values() {
            w.write_record([
                run.model_id(),
                rec.sample_id.as_str(),
                corpus.label_vocab()[rec.predicted_label].as_str(),
                &format_f64(rec.confidence),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

pub fn save_predictions(runs: &[ModelRun], corpus: &Corpus, path: &Path, format: PredictionFormat) -> Result<()> {
    let mut w = create(path)?;
    match format {
        PredictionFormat::Jsonl => write_predictions_jsonl(runs, corpus, &mut w)?,
        PredictionFormat::Csv => write_predictions_csv(runs, corpus, &mut w)?,
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Shortest decimal text that parses back to the same `f64`.
pub(crate) fn format_f64(x: f64) -> String {
    serde_json::to_string(&x).expect("finite float")
}

// ---------------------------------------------------------------------------
// Embeddings

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingFile {
    dim: usize,
    entries: BTreeMap<String, Vec<f64>>,
}

impl EmbeddingFile {
    pub fn new(dim: usize, entries: BTreeMap<String, Vec<f64>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::config("embedding dimension must be positive"));
        }
        for v in entries.values() {
            if v.len() != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    got: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFiniteInput);
            }
        }
        Ok(EmbeddingFile { dim, entries })
    }

    /// Collects inline sample vectors; fails if any sample lacks one.
    pub fn from_corpus(corpus: &Corpus) -> Result<Self> {
        let dim = corpus
            .dim()
            .ok_or_else(|| Error::MissingEmbedding(corpus.samples()[0].id.clone()))?;
        let mut entries = BTreeMap::new();
        for s in corpus.samples() {
            let v = s
                .vector
                .clone()
                .ok_or_else(|| Error::MissingEmbedding(s.id.clone()))?;
            entries.insert(s.id.clone(), v);
        }
        EmbeddingFile::new(dim, entries)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &BTreeMap<String, Vec<f64>> {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.entries.get(id).map(Vec::as_slice)
    }

    /// Like [`get`](Self::get) but reports a missing vector as an error.
    pub fn require(&self, id: &str) -> Result<&[f64]> {
        self.get(id)
            .ok_or_else(|| Error::MissingEmbedding(id.to_string()))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct EmbeddingLine {
    sample_id: String,
    vector: Vec<f64>,
}

pub fn load_embeddings(path: &Path, format: EmbeddingFormat) -> Result<EmbeddingFile> {
    let reader = open(path)?;
    match format {
        EmbeddingFormat::Jsonl => read_embeddings_jsonl(reader),
        EmbeddingFormat::Bin => read_embeddings_bin(reader),
    }
}

pub fn read_embeddings_jsonl<R: Read>(reader: R) -> Result<EmbeddingFile> {
    let mut dim: Option<usize> = None;
    let mut entries = BTreeMap::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| parse_err(lineno, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(&line).map_err(|e| parse_err(lineno, e))?;
        if let (Some(d), None) = (value.get("dim"), value.get("vector")) {
            if dim.is_some() || !entries.is_empty() {
                return Err(parse_err(lineno, "dim header must come first"));
            }
            dim = Some(
                d.as_u64()
                    .ok_or_else(|| parse_err(lineno, "dim must be a positive integer"))?
                    as usize,
            );
            continue;
        }
        let rec: EmbeddingLine = serde_json::from_value(value).map_err(|e| parse_err(lineno, e))?;
        let expected = *dim.get_or_insert(rec.vector.len());
        if rec.vector.len() != expected {
            return Err(Error::DimMismatch {
                expected,
                got: rec.vector.len(),
            });
        }
        if entries.insert(rec.sample_id.clone(), rec.vector).is_some() {
            return Err(Error::DuplicateId(rec.sample_id));
        }
    }
    let dim = dim.ok_or_else(|| parse_err(0, "embedding file has no entries"))?;
    EmbeddingFile::new(dim, entries)
}

pub fn write_embeddings_jsonl<W: Write>(emb: &EmbeddingFile, mut out: W) -> Result<()> {
    for (id, v) in &emb.entries {
        write_json_line(
            &mut out,
            &EmbeddingLine {
                sample_id: id.clone(),
                vector: v.clone(),
            },
        )?;
    }
    Ok(())
}

pub fn read_embeddings_bin<R: Read>(reader: R) -> Result<EmbeddingFile> {
    let mut r = BufReader::new(reader);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| parse_err(0, "truncated header"))?;
    if &magic != EMB_MAGIC {
        return Err(parse_err(0, "bad magic, expected EMB1"));
    }
    let mut u32buf = [0u8; 4];
    r.read_exact(&mut u32buf)
        .map_err(|_| parse_err(0, "truncated header"))?;
    let dim = u32::from_le_bytes(u32buf) as usize;
    if dim == 0 {
        return Err(parse_err(0, "dimension must be positive"));
    }
    let mut entries = BTreeMap::new();
    let mut record = 0usize;
    loop {
        record += 1;
        let mut lenbuf = [0u8; 2];
        match r.read(&mut lenbuf[..1]) {
            Ok(0) => break,
            Ok(_) => {}
            Err(e) => return Err(parse_err(record, e)),
        }
        r.read_exact(&mut lenbuf[1..])
            .map_err(|_| parse_err(record, "truncated id length"))?;
        let len = u16::from_le_bytes(lenbuf) as usize;
        let mut id = vec![0u8; len];
        r.read_exact(&mut id)
            .map_err(|_| parse_err(record, "truncated id"))?;
        let id = String::from_utf8(id).map_err(|e| parse_err(record, e))?;
        let mut raw = vec![0u8; dim * 4];
        r.read_exact(&mut raw)
            .map_err(|_| parse_err(record, "truncated vector"))?;
        let v: Vec<f64> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        if entries.insert(id.clone(), v).is_some() {
            return Err(Error::DuplicateId(id));
        }
    }
    EmbeddingFile::new(dim, entries)
}

/// Values are narrowed to `f32` on write.
pub fn write_embeddings_bin<W: Write>(emb: &EmbeddingFile, mut out: W) -> Result<()> {
    let io = |e| Error::io("<embeddings>", e);
    out.write_all(EMB_MAGIC).map_err(io)?;
    let dim = u32::try_from(emb.dim).map_err(|_| Error::config("dimension exceeds u32"))?;
    out.write_all(&dim.to_le_bytes()).map_err(io)?;
    for (id, v) in &emb.entries {
        let len = u16::try_from(id.len())
            .map_err(|_| Error::config(format!("sample id too long for EMB1: {id:?}")))?;
        out.write_all(&len.to_le_bytes()).map_err(io)?;
        out.write_all(id.as_bytes()).map_err(io)?;
        for x in v {
            out.write_all(&(*x as f32).to_le_bytes()).map_err(io)?;
        }
    }
    Ok(())
}

pub fn save_embeddings(emb: &EmbeddingFile, path: &Path, format: EmbeddingFormat) -> Result<()> {
    let mut w = create(path)?;
    match format {
        EmbeddingFormat::Jsonl => write_embeddings_jsonl(emb, &mut w)?,
        EmbeddingFormat::Bin => write_embeddings_bin(emb, &mut w)?,
    }
    w.flush().map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// Holdout

/// Test samples set aside for representation fine-tuning and never scored.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HoldoutMask {
    pub sample_ids: BTreeSet<String>,
}

impl HoldoutMask {
    pub fn new<I, S>(ids: I, corpus: &Corpus) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut sample_ids = BTreeSet::new();
        for id in ids {
            let id = id.into();
            match corpus.get(&id) {
                Some(s) if s.partition == Partition::Test => {}
                _ => return Err(Error::DanglingReference { reference: id }),
            }
            sample_ids.insert(id);
        }
        Ok(HoldoutMask { sample_ids })
    }

    pub fn empty() -> Self {
        HoldoutMask::default()
    }

    /// Seeded, label-stratified draw of `fraction` of the test partition.
    /// Each class contributes `round(fraction × class size)` samples.
    pub fn stratified(corpus: &Corpus, fraction: f64, seed: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&fraction) {
            return Err(Error::config("holdout fraction must be in [0, 1)"));
        }
        let mut by_class: BTreeMap<usize, Vec<&str>> = BTreeMap::new();
        for s in corpus.test() {
            by_class.entry(s.gold_label).or_default().push(&s.id);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(u64::MAX);
        let mut sample_ids = BTreeSet::new();
        for ids in by_class.values_mut() {
            ids.sort_unstable();
            ids.shuffle(&mut rng);
            let take = (fraction * ids.len() as f64).round() as usize;
            sample_ids.extend(ids.iter().take(take).map(|s| s.to_string()));
        }
        Ok(HoldoutMask { sample_ids })
    }

    pub fn contains(&self, id: &str) -> bool {
        self.sample_ids.contains(id)
    }

    pub fn len(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample_ids.is_empty()
    }
}

// ---------------------------------------------------------------------------
// Fallback features

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// FNV-1a 64-bit with the offset basis XOR-ed with `seed` (seed 0 is plain FNV-1a).
pub fn fnv1a64(seed: u64, bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET ^ seed, |h, &b| {
        (h ^ b as u64).wrapping_mul(FNV_PRIME)
    })
}

/// Signed hashed bag-of-words vector for one text, L2-normalized.
pub fn hash_features(text: &str, dim: usize, seed: u64) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    for token in text.split_whitespace() {
        let token = token.to_lowercase();
        let h = fnv1a64(seed, token.as_bytes());
        let bucket = (h % dim as u64) as usize;
        let sign = if (h >> 32).is_multiple_of(2) { 1.0 } else { -1.0 };
        v[bucket] += sign;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

/// Deterministic stand-in for learned sentence representations.
pub fn fallback_featurize(corpus: &Corpus, dim: usize, seed: u64) -> Result<EmbeddingFile> {
    if dim < 2 {
        return Err(Error::config("featurizer dimension must be at least 2"));
    }
    let entries = corpus
        .samples()
        .iter()
        .map(|s| (s.id.clone(), hash_features(&s.text, dim, seed)))
        .collect();
    EmbeddingFile::new(dim, entries)
}
