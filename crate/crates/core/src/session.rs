//! Manifests, loaded sessions and the batch pipeline shared by the CLI and
//! the HTTP server.
//!
//! Outputs never contain paths or timestamps, only content digests, so
//! running the same manifest twice yields byte-identical files.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::difficulty::{
    bias_across_train_test, bias_within_test, sts_matrix, wmprob_difficulty, wood_difficulty,
    DifficultyScore, Method, WithinTestConfig, DEFAULT_ITERATIONS,
};
use crate::error::{Error, Result};
use crate::ingest::{
    fallback_featurize, parse_corpus, parse_predictions_csv, parse_predictions_jsonl,
    read_embeddings_bin, read_embeddings_jsonl, EmbeddingFile, EmbeddingFormat, PredictionFormat,
};
use crate::leaderboard::{build_leaderboard, DifficultyInput, LeaderboardView, Weighting};
use crate::learners::LearnerSpec;
use crate::model::{Corpus, ModelRun};
use crate::plotdata::{build_chart_bundle, digest_hex, ChartBundle};
use crate::scoring::{table1_preset, SplitConfig, WeightScheme};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const DEFAULT_STS_PCT: f64 = 25.0;
pub const DEFAULT_SPLITS: usize = 7;
pub const DEFAULT_CASE: u8 = 1;

fn default_m() -> usize {
    DEFAULT_ITERATIONS
}

fn default_pct() -> f64 {
    DEFAULT_STS_PCT
}

/// A difficulty method and its parameters, as written in manifests and
/// request bodies.
///
/// ```
/// use eqlboard::session::MethodParams;
/// let p: MethodParams = serde_json::from_str(r#"{"method":"wood","sts_pct":10}"#).unwrap();
/// assert_eq!(p.slug(), "wood_p10");
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum MethodParams {
    Wsbias1 {
        #[serde(default = "default_m")]
        m: usize,
        #[serde(default)]
        t: Option<usize>,
        #[serde(default)]
        seed: Option<u64>,
    },
    Wsbias2 {
        #[serde(default)]
        seed: Option<u64>,
    },
    Wood {
        #[serde(default = "default_pct")]
        sts_pct: f64,
    },
    Wmprob,
}

impl MethodParams {
    pub fn wsbias1() -> Self {
        MethodParams::Wsbias1 { m: DEFAULT_ITERATIONS, t: None, seed: None }
    }

    pub fn wood(sts_pct: f64) -> Self {
        MethodParams::Wood { sts_pct }
    }

    /// Fills unset seeds from the session seed.
    pub fn resolved(&self, seed: u64) -> Self {
        match self.clone() {
            MethodParams::Wsbias1 { m, t, seed: s } => MethodParams::Wsbias1 { m, t, seed: Some(s.unwrap_or(seed)) },
            MethodParams::Wsbias2 { seed: s } => MethodParams::Wsbias2 { seed: Some(s.unwrap_or(seed)) },
            other => other,
        }
    }

    /// Canonical JSON of the resolved parameters.
    pub fn cache_key(&self, seed: u64) -> String {
        serde_json::to_string(&self.resolved(seed)).expect("serializable params")
    }

    pub fn slug(&self) -> String {
        match self {
            MethodParams::Wsbias1 { .. } => "wsbias1".into(),
            MethodParams::Wsbias2 { .. } => "wsbias2".into(),
            MethodParams::Wood { sts_pct } => format!("wood_p{sts_pct}"),
            MethodParams::Wmprob => "wmprob".into(),
        }
    }

    pub fn needs_embeddings(&self) -> bool {
        !matches!(self, MethodParams::Wmprob)
    }
}

/// Everything needed to reproduce a run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub corpus: PathBuf,
    pub predictions: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embeddings: Option<PathBuf>,
    /// Dimension of the hashed bag-of-words features used when neither an
    /// embedding file nor corpus vectors are available.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fallback_features: Option<usize>,
    #[serde(default)]
    pub methods: Vec<MethodParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub splits: Option<SplitConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub case: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<WeightScheme>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl Manifest {
    /// Reads a manifest; relative paths are taken relative to its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m: Manifest = serde_json::from_str(&text)
            .map_err(|e| Error::ParseError { line: e.line(), message: e.to_string() })?;
        let base = path.parent().unwrap_or(Path::new(""));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut m.corpus);
        fix(&mut m.predictions);
        if let Some(p) = m.embeddings.as_mut() {
            fix(p);
        }
        if let Some(p) = m.out.as_mut() {
            fix(p);
        }
        Ok(m)
    }

    pub fn split_config(&self) -> SplitConfig {
        self.splits.clone().unwrap_or_else(|| SplitConfig::equal_population(DEFAULT_SPLITS))
    }

    /// The weighting to rank with; see [`resolve_scheme`].
    pub fn weight_scheme(&self) -> Result<WeightScheme> {
        resolve_scheme(&self.split_config(), self.case, self.scheme.as_ref())
    }
}

/// A preset case or an explicit scheme, never both; case 1 when neither is
/// given. Validates both against the split configuration.
pub fn resolve_scheme(splits: &SplitConfig, case: Option<u8>, scheme: Option<&WeightScheme>) -> Result<WeightScheme> {
    splits.validate()?;
    match (case, scheme) {
        (Some(_), Some(_)) => Err(Error::ConfigError(
            "give either a preset case or an explicit weighting scheme, not both".into(),
        )),
        (Some(c), None) => table1_preset(c, splits.n),
        (None, Some(s)) => {
            s.validate(splits.n)?;
            Ok(s.clone())
        }
        (None, None) => table1_preset(DEFAULT_CASE, splits.n),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EmbeddingSource {
    File { format: EmbeddingFormat },
    Corpus,
    Hashed { dim: usize, seed: u64 },
    Missing,
}

struct RawInput {
    file_name: String,
    bytes: Vec<u8>,
}

/// A corpus with its model runs and representations, immutable after load.
pub struct Session {
    manifest: Manifest,
    corpus: Corpus,
    runs: Vec<ModelRun>,
    embeddings: Option<EmbeddingFile>,
    embedding_source: EmbeddingSource,
    digests: BTreeMap<String, String>,
    raw: BTreeMap<&'static str, RawInput>,
}

fn read_input(path: &Path) -> Result<RawInput> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let file_name = path
        .file_name()
        .and_then(|s| s.to_str())
        .ok_or_else(|| Error::ConfigError(format!("bad input path {}", path.display())))?
        .to_string();
    Ok(RawInput { file_name, bytes })
}

impl Session {
    pub fn load(manifest: &Manifest) -> Result<Self> {
        let mut raw = BTreeMap::new();
        let mut digests = BTreeMap::new();

        let corpus_in = read_input(&manifest.corpus)?;
        let stem = Path::new(&corpus_in.file_name)
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("corpus")
            .to_string();
        let corpus = parse_corpus(&corpus_in.bytes[..], &stem)?;
        digests.insert("corpus".to_string(), digest_hex(&corpus_in.bytes));
        raw.insert("corpus", corpus_in);

        let pred_in = read_input(&manifest.predictions)?;
        let runs = match PredictionFormat::from_path(&manifest.predictions)? {
            PredictionFormat::Jsonl => parse_predictions_jsonl(&pred_in.bytes[..], &corpus)?,
            PredictionFormat::Csv => parse_predictions_csv(&pred_in.bytes[..], &corpus)?,
        };
        digests.insert("predictions".to_string(), digest_hex(&pred_in.bytes));
        raw.insert("predictions", pred_in);

        let (embeddings, embedding_source) = if let Some(path) = &manifest.embeddings {
            let format = EmbeddingFormat::from_path(path)?;
            let input = read_input(path)?;
            let emb = match format {
                EmbeddingFormat::Jsonl => read_embeddings_jsonl(&input.bytes[..])?,
                EmbeddingFormat::Bin => read_embeddings_bin(&input.bytes[..])?,
            };
            digests.insert("embeddings".to_string(), digest_hex(&input.bytes));
            raw.insert("embeddings", input);
            (Some(emb), EmbeddingSource::File { format })
        } else if corpus.dim().is_some() {
            (Some(EmbeddingFile::from_corpus(&corpus)?), EmbeddingSource::Corpus)
        } else if let Some(dim) = manifest.fallback_features {
            let seed = manifest.seed;
            (Some(fallback_featurize(&corpus, dim, seed)?), EmbeddingSource::Hashed { dim, seed })
        } else {
            (None, EmbeddingSource::Missing)
        };
        Ok(Session {
            manifest: manifest.clone(),
            corpus,
            runs,
            embeddings,
            embedding_source,
            digests,
            raw,
        })
    }

    /// Loads a directory written by [`Session::persist`].
    pub fn open_dir(dir: &Path) -> Result<Self> {
        Session::load(&Manifest::load(&dir.join(MANIFEST_FILE))?)
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    pub fn runs(&self) -> &[ModelRun] {
        &self.runs
    }

    pub fn seed(&self) -> u64 {
        self.manifest.seed
    }

    pub fn digests(&self) -> &BTreeMap<String, String> {
        &self.digests
    }

    pub fn embedding_source(&self) -> &EmbeddingSource {
        &self.embedding_source
    }

    pub fn embeddings(&self) -> Result<&EmbeddingFile> {
        self.embeddings.as_ref().ok_or_else(|| {
            Error::MissingEmbedding(
                "no embedding file, corpus vectors or fallback features configured".into(),
            )
        })
    }

    fn provenance(&self) -> BTreeMap<String, Value> {
        let mut p = BTreeMap::new();
        p.insert("seed".into(), json!(self.seed()));
        p.insert("inputs".into(), json!(self.digests));
        p.insert("embeddings".into(), json!(self.embedding_source));
        p
    }

    /// Scores for one method: a single score set, or one per model for
    /// confidence scoring (in model id order).
    pub fn compute_scores(&self, params: &MethodParams) -> Result<Vec<DifficultyScore>> {
        let params = params.resolved(self.seed());
        let mut scores = match &params {
            MethodParams::Wsbias1 { m, t, seed } => {
                let cfg = WithinTestConfig {
                    m: *m,
                    t: *t,
                    seed: seed.unwrap_or_default(),
                    ..WithinTestConfig::default()
                };
                vec![bias_within_test(&self.corpus, self.embeddings()?, &cfg)?]
            }
            MethodParams::Wsbias2 { seed } => {
                let specs: Vec<LearnerSpec> = LearnerSpec::default_suite()
                    .into_iter()
                    .map(|s| s.seeded(seed.unwrap_or_default()))
                    .collect();
                vec![bias_across_train_test(&self.corpus, self.embeddings()?, &specs)?
                    .with_param("seed", seed.unwrap_or_default())]
            }
            MethodParams::Wood { sts_pct } => {
                let sts = sts_matrix(&self.corpus, self.embeddings()?)?;
                vec![wood_difficulty(&sts, *sts_pct)?]
            }
            MethodParams::Wmprob => self.runs.iter().map(wmprob_difficulty).collect(),
        };
        for s in &mut scores {
            s.params.insert("inputs".into(), json!(self.digests));
            if params.needs_embeddings() {
                s.params.insert("embeddings".into(), json!(self.embedding_source));
            }
        }
        Ok(scores)
    }

    /// Splits the scores and ranks every model under `scheme`.
    pub fn leaderboard(
        &self,
        scores: &[DifficultyScore],
        splits: &SplitConfig,
        scheme: &WeightScheme,
    ) -> Result<(LeaderboardView, ChartBundle)> {
        let input = match scores {
            [single] if !single.method.is_model_specific() => {
                DifficultyInput::shared(single.clone(), splits)?
            }
            many => DifficultyInput::PerModel(
                many.iter()
                    .map(|s| {
                        let Method::Wmprob { model_id } = &s.method else {
                            return Err(Error::ProvenanceError(format!("{} scores are not per model", s.method)));
                        };
                        let id = model_id.clone();
                        Ok((id, Weighting::new(s.clone(), splits)?))
                    })
                    .collect::<Result<_>>()?,
            ),
        };
        let mut view = build_leaderboard(&self.runs, &self.corpus, &input, scheme)?;
        view.provenance.extra = self.provenance();
        if let Some(s) = scores.first().filter(|s| s.method.is_model_specific()) {
            view.provenance.score_params = s.params.clone();
        }
        let mut bundle = build_chart_bundle(&view, &input, &self.runs, &self.corpus)?;
        bundle.provenance = self.provenance();
        Ok((view, bundle))
    }

    /// Score files for every method in the manifest.
    pub fn run_difficulty(&self) -> Result<Outputs> {
        let mut out = Outputs::default();
        for params in self.methods()? {
            self.add_scores(&mut out, params, &self.compute_scores(params)?);
        }
        Ok(out)
    }

    /// Score files, leaderboard reports and chart bundles for every method.
    pub fn run_rank(&self) -> Result<Outputs> {
        let splits = self.manifest.split_config();
        let scheme = self.manifest.weight_scheme()?;
        let mut out = Outputs::default();
        for params in self.methods()? {
            let scores = self.compute_scores(params)?;
            self.add_scores(&mut out, params, &scores);
            let (view, bundle) = self.leaderboard(&scores, &splits, &scheme)?;
            let slug = params.slug();
            out.insert(format!("leaderboard/{slug}.json"), view.to_json().into_bytes());
            out.insert(format!("leaderboard/{slug}.csv"), view.to_csv().into_bytes());
            out.insert(format!("charts/{slug}.json"), bundle.to_json().into_bytes());
        }
        Ok(out)
    }

    fn methods(&self) -> Result<&[MethodParams]> {
        if self.manifest.methods.is_empty() {
            return Err(Error::ConfigError("no difficulty method selected".into()));
        }
        Ok(&self.manifest.methods)
    }

    fn add_scores(&self, out: &mut Outputs, params: &MethodParams, scores: &[DifficultyScore]) {
        let slug = params.slug();
        for s in scores {
            let name = match &s.method {
                Method::Wmprob { model_id } => {
                    format!("scores/{slug}_{}.jsonl", file_safe(model_id))
                }
                _ => format!("scores/{slug}.jsonl"),
            };
            out.insert(name, s.to_jsonl());
        }
    }

    /// Writes copies of the inputs and a manifest pointing at them.
    pub fn persist(&self, dir: &Path) -> Result<()> {
        let mut manifest = Manifest {
            corpus: PathBuf::new(),
            predictions: PathBuf::new(),
            out: None,
            ..self.manifest.clone()
        };
        for (role, input) in &self.raw {
            let rel = PathBuf::from("inputs").join(role).join(&input.file_name);
            let path = dir.join(&rel);
            fs::create_dir_all(path.parent().expect("nested path")).map_err(|e| Error::io(&path, e))?;
            fs::write(&path, &input.bytes).map_err(|e| Error::io(&path, e))?;
            match *role {
                "corpus" => manifest.corpus = rel,
                "predictions" => manifest.predictions = rel,
                _ => manifest.embeddings = Some(rel),
            }
        }
        let path = dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(&manifest).expect("serializable manifest");
        text.push('\n');
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }
}

fn file_safe(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
        .collect()
}

/// Output files keyed by path relative to the output directory.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Outputs(pub BTreeMap<String, Vec<u8>>);

impl Outputs {
    pub fn insert(&mut self, path: String, bytes: Vec<u8>) {
        self.0.insert(path, bytes);
    }

    pub fn get(&self, path: &str) -> Option<&[u8]> {
        self.0.get(path).map(Vec::as_slice)
    }

    pub fn paths(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    pub fn write_to(&self, dir: &Path) -> Result<()> {
        for (rel, bytes) in &self.0 {
            let path = dir.join(rel);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
            fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}
