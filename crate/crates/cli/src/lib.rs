//! Command-line front end: `ingest`, `difficulty`, `rank`, `export` and
//! `serve`. Every flag can also be set through an `EQL_*` environment
//! variable.
//!
//! Exit codes: 0 ok, 1 usage or configuration, 2 data error, 3 runtime
//! failure (output not writable, port not bindable).

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use eqlboard::leaderboard::LeaderboardView;
use eqlboard::model::accuracy;
use eqlboard::scoring::{Scale, SplitConfig, WeightScheme};
use eqlboard::session::{Manifest, MethodParams, Session, DEFAULT_SPLITS, DEFAULT_STS_PCT};
use serde_json::json;

pub const DEFAULT_OUT: &str = "eqlboard-out";
pub const DEFAULT_DATA_DIR: &str = "eqlboard-data";

#[derive(Debug, Parser)]
#[command(name = "eqlboard", version, about = "Difficulty-weighted leaderboards")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: Opts,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate the inputs and print a summary.
    Ingest,
    /// Write difficulty score files.
    Difficulty,
    /// Write score files, leaderboard reports and chart bundles.
    Rank,
    /// Copy the inputs and a manifest into a self-contained session directory.
    Export,
    /// Run the HTTP API.
    Serve,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Wsbias1,
    Wsbias2,
    Wood,
    Wmprob,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SplitModeArg {
    Equal,
    Threshold,
    Manual,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ScaleArg {
    LinearAdd,
    LinearSub,
    Log,
    Square,
}

#[derive(Debug, Default, Args)]
pub struct Opts {
    /// Manifest to start from; flags override its fields.
    #[arg(long, global = true, env = "EQL_MANIFEST")]
    pub manifest: Option<PathBuf>,
    #[arg(long, global = true, env = "EQL_CORPUS")]
    pub corpus: Option<PathBuf>,
    #[arg(long, global = true, env = "EQL_PREDICTIONS")]
    pub predictions: Option<PathBuf>,
    #[arg(long, global = true, env = "EQL_EMBEDDINGS")]
    pub embeddings: Option<PathBuf>,
    /// Hashed bag-of-words dimension used when no vectors are available.
    #[arg(long, global = true, env = "EQL_FALLBACK_FEATURES")]
    pub fallback_features: Option<usize>,
    #[arg(long, global = true, value_delimiter = ',', env = "EQL_METHOD")]
    pub method: Vec<MethodArg>,
    #[arg(long, global = true, env = "EQL_STS_PCT")]
    pub sts_pct: Option<f64>,
    #[arg(long = "m", global = true, env = "EQL_M")]
    pub m: Option<usize>,
    #[arg(long = "t", global = true, env = "EQL_T")]
    pub t: Option<usize>,
    #[arg(long, global = true, env = "EQL_SPLITS")]
    pub splits: Option<usize>,
    #[arg(long, global = true, env = "EQL_SPLIT_MODE")]
    pub split_mode: Option<SplitModeArg>,
    #[arg(long, global = true, value_delimiter = ',', env = "EQL_THRESHOLDS")]
    pub thresholds: Vec<f64>,
    #[arg(long, global = true, env = "EQL_CASE")]
    pub case: Option<u8>,
    /// Explicit per-split weights, easiest split first.
    #[arg(long, global = true, value_delimiter = ',', env = "EQL_WEIGHTS")]
    pub weights: Vec<f64>,
    #[arg(long, global = true, env = "EQL_SCALE")]
    pub scale: Option<ScaleArg>,
    #[arg(long = "d", global = true, allow_negative_numbers = true, env = "EQL_D")]
    pub d: Option<f64>,
    #[arg(long = "e", global = true, allow_negative_numbers = true, env = "EQL_E")]
    pub e: Option<f64>,
    #[arg(long, global = true, env = "EQL_SEED")]
    pub seed: Option<u64>,
    /// Output directory; the data directory for `serve`.
    #[arg(long, global = true, env = "EQL_OUT")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 8080, env = "EQL_PORT")]
    pub port: u16,
    #[arg(long, global = true, default_value = "127.0.0.1", env = "EQL_HOST")]
    pub host: String,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(eqlboard::Error),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<eqlboard::Error> for CliError {
    fn from(e: eqlboard::Error) -> Self {
        match e {
            eqlboard::Error::ConfigError(m) => CliError::Usage(format!("ConfigError: {m}")),
            other => CliError::Data(other),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => f.write_str(m),
            CliError::Data(e) => write!(f, "{}: {e}", e.code()),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

impl Opts {
    /// The manifest file (if any) with every given flag applied on top.
    pub fn manifest(&self) -> CliResult<Manifest> {
        let mut m = match &self.manifest {
            Some(path) => Manifest::load(path)?,
            None => Manifest::default(),
        };
        if let Some(p) = &self.corpus {
            m.corpus = p.clone();
        }
        if let Some(p) = &self.predictions {
            m.predictions = p.clone();
        }
        if self.embeddings.is_some() {
            m.embeddings = self.embeddings.clone();
        }
        if self.fallback_features.is_some() {
            m.fallback_features = self.fallback_features;
        }
        if let Some(s) = self.seed {
            m.seed = s;
        }
        if self.out.is_some() {
            m.out = self.out.clone();
        }
        if m.corpus.as_os_str().is_empty() || m.predictions.as_os_str().is_empty() {
            return Err(CliError::Usage("--corpus and --predictions (or --manifest) are required".into()));
        }
        if !self.method.is_empty() {
            m.methods = self.method.iter().map(|k| self.method_params(*k)).collect();
        } else {
            for p in &mut m.methods {
                self.override_params(p);
            }
        }
        if let Some(cfg) = self.split_config(m.splits.as_ref())? {
            m.splits = Some(cfg);
        }
        if let Some(scheme) = self.scheme() {
            m.scheme = Some(scheme);
            m.case = self.case;
        } else if self.case.is_some() {
            m.case = self.case;
            m.scheme = None;
        }
        Ok(m)
    }

    fn method_params(&self, kind: MethodArg) -> MethodParams {
        let mut p = match kind {
            MethodArg::Wsbias1 => MethodParams::wsbias1(),
            MethodArg::Wsbias2 => MethodParams::Wsbias2 { seed: None },
            MethodArg::Wood => MethodParams::wood(DEFAULT_STS_PCT),
            MethodArg::Wmprob => MethodParams::Wmprob,
        };
        self.override_params(&mut p);
        p
    }

    fn override_params(&self, p: &mut MethodParams) {
        match p {
            MethodParams::Wsbias1 { m, t, .. } => {
                if let Some(v) = self.m {
                    *m = v;
                }
                if self.t.is_some() {
                    *t = self.t;
                }
            }
            MethodParams::Wood { sts_pct } => {
                if let Some(v) = self.sts_pct {
                    *sts_pct = v;
                }
            }
            _ => {}
        }
    }

    fn split_config(&self, base: Option<&SplitConfig>) -> CliResult<Option<SplitConfig>> {
        if self.splits.is_none() && self.split_mode.is_none() && self.thresholds.is_empty() {
            return Ok(None);
        }
        let mode = match (self.split_mode, self.thresholds.is_empty()) {
            (Some(m), _) => m,
            (None, false) => SplitModeArg::Manual,
            (None, true) => SplitModeArg::Equal,
        };
        let n = self.splits.or(base.map(|c| c.n)).unwrap_or(DEFAULT_SPLITS);
        let cfg = match mode {
            SplitModeArg::Equal => SplitConfig::equal_population(n),
            SplitModeArg::Threshold => SplitConfig::equal_thresholds(n),
            SplitModeArg::Manual => {
                if self.thresholds.is_empty() {
                    return Err(CliError::Usage("--split-mode manual needs --thresholds".into()));
                }
                let cfg = SplitConfig::manual(self.thresholds.clone());
                if self.splits.is_some_and(|n| n != cfg.n) {
                    return Err(CliError::Usage(format!(
                        "ConfigError: {} thresholds make {} splits, not {}",
                        self.thresholds.len(),
                        cfg.n,
                        self.splits.unwrap_or_default()
                    )));
                }
                cfg
            }
        };
        Ok(Some(cfg))
    }

    fn scheme(&self) -> Option<WeightScheme> {
        if self.weights.is_empty() && self.scale.is_none() && self.d.is_none() && self.e.is_none() {
            return None;
        }
        let (d, e) = (self.d.unwrap_or(1.0), self.e.unwrap_or(0.0));
        Some(if self.weights.is_empty() {
            let scale = match self.scale.unwrap_or(ScaleArg::LinearAdd) {
                ScaleArg::LinearAdd => Scale::LinearAdd,
                ScaleArg::LinearSub => Scale::LinearSub,
                ScaleArg::Log => Scale::Log,
                ScaleArg::Square => Scale::Square,
            };
            WeightScheme::split_wise(scale, d, e)
        } else {
            WeightScheme::explicit(self.weights.clone(), d, e)
        })
    }
}

fn out_dir(m: &Manifest, fallback: &str) -> PathBuf {
    m.out.clone().unwrap_or_else(|| PathBuf::from(fallback))
}

fn write_outputs(out: &eqlboard::session::Outputs, dir: &Path) -> CliResult<()> {
    out.write_to(dir).map_err(|e| CliError::Runtime(e.to_string()))
}

fn print_board(w: &mut dyn Write, slug: &str, view: &LeaderboardView) -> std::io::Result<()> {
    writeln!(w, "{slug} (tau {:.4})", view.tau)?;
    writeln!(w, "  rank  model                 score  accuracy  was")?;
    for r in &view.rows {
        let flag = if r.changed { "*" } else { "" };
        writeln!(
            w,
            "  {:>4}  {:<18} {:>8.3}  {:>8.3}  {:>3}{flag}",
            r.rank,
            r.model_id,
            r.overall,
            100.0 * r.accuracy,
            r.baseline_rank
        )?;
    }
    Ok(())
}

/// Runs one parsed command, printing reports to `stdout`.
pub fn run(cli: &Cli, stdout: &mut dyn Write) -> CliResult<()> {
    let io = |e: std::io::Error| CliError::Runtime(e.to_string());
    match cli.command {
        Command::Ingest => {
            let session = Session::load(&cli.opts.manifest()?)?;
            let models = session
                .runs()
                .iter()
                .map(|r| Ok(json!({ "model_id": r.model_id(), "accuracy": accuracy(r, session.corpus())? })))
                .collect::<eqlboard::Result<Vec<_>>>()?;
            let c = session.corpus();
            let summary = json!({
                "corpus": c.name(),
                "labels": c.label_vocab(),
                "train": c.train_len(),
                "test": c.test_len(),
                "models": models,
                "embeddings": session.embedding_source(),
                "inputs": session.digests(),
            });
            writeln!(stdout, "{}", serde_json::to_string_pretty(&summary).expect("json")).map_err(io)
        }
        Command::Difficulty => {
            let manifest = cli.opts.manifest()?;
            let out = Session::load(&manifest)?.run_difficulty()?;
            let dir = out_dir(&manifest, DEFAULT_OUT);
            write_outputs(&out, &dir)?;
            for p in out.paths() {
                writeln!(stdout, "{}", dir.join(p).display()).map_err(io)?;
            }
            Ok(())
        }
        Command::Rank => {
            let manifest = cli.opts.manifest()?;
            let session = Session::load(&manifest)?;
            let out = session.run_rank()?;
            let dir = out_dir(&manifest, DEFAULT_OUT);
            write_outputs(&out, &dir)?;
            for p in manifest.methods.iter().map(MethodParams::slug) {
                let bytes = out.get(&format!("leaderboard/{p}.json")).expect("report written");
                let view: LeaderboardView = serde_json::from_slice(bytes).expect("own report parses");
                print_board(stdout, &p, &view).map_err(io)?;
            }
            writeln!(stdout, "wrote {} files to {}", out.paths().count(), dir.display()).map_err(io)
        }
        Command::Export => {
            let manifest = cli.opts.manifest()?;
            let session = Session::load(&manifest)?;
            let dir = out_dir(&manifest, DEFAULT_OUT);
            session.persist(&dir).map_err(|e| CliError::Runtime(e.to_string()))?;
            writeln!(stdout, "{}", dir.join(eqlboard::session::MANIFEST_FILE).display()).map_err(io)
        }
        Command::Serve => serve(&cli.opts, stdout),
    }
}

fn serve(opts: &Opts, stdout: &mut dyn Write) -> CliResult<()> {
    let data_dir = opts.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_DATA_DIR));
    let state = eqlboard_server::AppState::open(&data_dir).map_err(|e| CliError::Runtime(e.to_string()))?;
    if opts.manifest.is_some() || opts.corpus.is_some() {
        let manifest = Manifest { out: None, ..opts.manifest()? };
        let id = state.create_session(&manifest)?;
        writeln!(stdout, "session {id}").map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    rt.block_on(async {
        let addr = (opts.host.as_str(), opts.port);
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| CliError::Runtime(format!("cannot bind {}:{}: {e}", opts.host, opts.port)))?;
        let local = listener.local_addr().map_err(|e| CliError::Runtime(e.to_string()))?;
        writeln!(stdout, "listening on http://{local}").map_err(|e| CliError::Runtime(e.to_string()))?;
        stdout.flush().ok();
        eqlboard_server::serve(listener, Arc::new(state)).await.map_err(|e| CliError::Runtime(e.to_string()))
    })
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            e.print().ok();
            return code;
        }
    };
    match run(&cli, &mut std::io::stdout().lock()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
