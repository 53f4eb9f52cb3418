//! Batch command-line front end.
//!
//! Subcommands: `ingest`, `summarize`, `score`, `analyze`, `simulate`,
//! `report`. Settings resolve as command-line flags, then a TOML file given
//! by `--config`, then built-in defaults.
//!
//! Recognised config keys:
//!
//! ```toml
//! registry = "data/registry.json"
//! cache_dir = ".cache/opinion-simplify"
//! mock = true
//! model = "gpt-4"
//! endpoint = "https://api.openai.com/v1/chat/completions"
//! styles = ["seventh_grade", "microblog_thread"]
//! seed = 42
//! parallelism = 4
//! context_limit = 8192
//! reserved_output = 4096
//! requests_per_second = 1.0
//! respondents = 120
//! education_share = 0.5
//! noise = 1.0
//! ```
//!
//! Exit codes: 0 success, 1 partial failure, 2 configuration or usage error.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::chunker::TokenBudget;
use crate::corpus::{load_registry, CaseRegistry, OpinionCase};
use crate::experiment::{
    estimate_interaction, estimate_treatment_effect, read_dataset, render_table, simulate_survey,
    write_dataset, Covariate, Dgp, Outcome, RegressionResult, RegressionSpec,
};
use crate::fsutil::atomic_write;
use crate::readability::{score_text, ScoredText};
use crate::summarizer::backend::{
    BackendError, CompletionBackend, HttpBackend, RateLimited, RateLimiter, RetryPolicy, Retrying,
};
use crate::summarizer::cache::ResponseCache;
use crate::summarizer::prompts::{sha256_hex, PromptTemplate};
use crate::summarizer::{
    Clock, FixedClock, MockBackend, OutputStyle, Summarizer, SummaryBundle, SystemClock,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARTIAL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

pub const DEFAULT_REGISTRY: &str = "data/registry.json";
pub const DEFAULT_MODEL: &str = "gpt-4";
pub const MOCK_MODEL: &str = "mock";
pub const DEFAULT_ENDPOINT: &str = "https://api.openai.com/v1/chat/completions";

#[derive(Debug, Parser)]
#[command(name = "opinion-simplify", version, about = "Simplify court opinions and analyse reader surveys")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default)]
pub struct GlobalArgs {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Case registry JSON [default: data/registry.json].
    #[arg(long, global = true)]
    pub registry: Option<PathBuf>,
    /// Persist backend responses here; in-memory if unset.
    #[arg(long, global = true)]
    pub cache_dir: Option<PathBuf>,
    /// Use the offline mock backend.
    #[arg(long, global = true, conflicts_with = "live")]
    pub mock: bool,
    /// Use the HTTP backend even if the config file selects the mock.
    #[arg(long, global = true)]
    pub live: bool,
    /// Model id sent to the endpoint [default: gpt-4].
    #[arg(long, global = true)]
    pub model: Option<String>,
    /// Chat-completions URL.
    #[arg(long, global = true)]
    pub endpoint: Option<String>,
    /// Comma-separated output styles.
    #[arg(long, global = true, value_delimiter = ',')]
    pub styles: Option<Vec<String>>,
    /// Seed for assignment and simulation.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Cases summarized concurrently.
    #[arg(long, global = true)]
    pub parallelism: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate the registry and print a per-topic overview.
    Ingest {
        /// Write the normalized registry JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the summarization pipeline and write one bundle per case.
    Summarize {
        /// Restrict to these case ids (repeatable).
        #[arg(long = "case")]
        cases: Vec<String>,
        #[arg(long, default_value = "out/bundles")]
        out: PathBuf,
    },
    /// Score text files, directories, or bundles and emit CSV.
    Score {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate treatment effects from a survey CSV.
    Analyze {
        dataset: PathBuf,
        /// Comma-separated outcome columns; all six by default.
        #[arg(long, value_delimiter = ',')]
        outcomes: Option<Vec<String>>,
        /// Add a treatment interaction with this covariate.
        #[arg(long)]
        interaction: Option<String>,
        /// Directory for `table.md` and `results.json`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate a survey dataset.
    Simulate {
        #[arg(long)]
        respondents: Option<usize>,
        #[arg(long)]
        education_share: Option<f64>,
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Markdown report from bundles and/or analysis results.
    Report {
        #[arg(long)]
        bundles: Option<PathBuf>,
        /// `results.json` written by `analyze`.
        #[arg(long)]
        analysis: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Keys accepted in the `--config` file.
#[derive(Debug, Default, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub registry: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub mock: Option<bool>,
    pub model: Option<String>,
    pub endpoint: Option<String>,
    pub styles: Option<Vec<String>>,
    pub seed: Option<u64>,
    pub parallelism: Option<usize>,
    pub context_limit: Option<usize>,
    pub reserved_output: Option<usize>,
    pub requests_per_second: Option<f64>,
    pub respondents: Option<usize>,
    pub education_share: Option<f64>,
    pub noise: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendConfig {
    Mock,
    Live { endpoint: String, model_id: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub registry_path: PathBuf,
    pub cache_dir: Option<PathBuf>,
    pub backend: BackendConfig,
    pub budget: TokenBudget,
    pub styles: BTreeSet<OutputStyle>,
    pub parallelism: usize,
    pub seed: u64,
    pub requests_per_second: f64,
    pub respondents: usize,
    pub education_share: f64,
    pub noise: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            registry_path: DEFAULT_REGISTRY.into(),
            cache_dir: None,
            backend: BackendConfig::Live {
                endpoint: DEFAULT_ENDPOINT.into(),
                model_id: DEFAULT_MODEL.into(),
            },
            budget: TokenBudget::default(),
            styles: BTreeSet::from([OutputStyle::SeventhGrade]),
            parallelism: 4,
            seed: 42,
            requests_per_second: 1.0,
            respondents: 120,
            education_share: 0.5,
            noise: 1.0,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Failed(_) => EXIT_PARTIAL,
        }
    }
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn parse_styles(names: &[String]) -> Result<BTreeSet<OutputStyle>, CliError> {
    let styles = names
        .iter()
        .map(|s| s.parse::<OutputStyle>())
        .collect::<Result<BTreeSet<_>, _>>()
        .map_err(CliError::Config)?;
    if styles.is_empty() {
        return Err(CliError::Config("at least one style is required".into()));
    }
    Ok(styles)
}

impl RunConfig {
    /// Resolves flags over file values over defaults.
    pub fn resolve(flags: &GlobalArgs, file: &FileConfig) -> Result<Self, CliError> {
        let d = RunConfig::default();
        let mock = if flags.mock {
            true
        } else if flags.live {
            false
        } else {
            file.mock.unwrap_or(false)
        };
        let model = flags.model.clone().or_else(|| file.model.clone());
        let backend = if mock {
            BackendConfig::Mock
        } else {
            BackendConfig::Live {
                endpoint: flags
                    .endpoint
                    .clone()
                    .or_else(|| file.endpoint.clone())
                    .unwrap_or_else(|| DEFAULT_ENDPOINT.into()),
                model_id: model.unwrap_or_else(|| DEFAULT_MODEL.into()),
            }
        };
        let styles = match flags.styles.as_ref().or(file.styles.as_ref()) {
            Some(names) => parse_styles(names)?,
            None => d.styles,
        };
        let parallelism = flags.parallelism.or(file.parallelism).unwrap_or(d.parallelism);
        if parallelism == 0 {
            return Err(CliError::Config("parallelism must be >= 1".into()));
        }
        let budget = TokenBudget::new(
            file.context_limit.unwrap_or(d.budget.context_limit),
            file.reserved_output.unwrap_or(d.budget.reserved_output),
            0,
        )
        .map_err(config_err)?;
        let requests_per_second = file.requests_per_second.unwrap_or(d.requests_per_second);
        if !(requests_per_second.is_finite() && requests_per_second > 0.0) {
            return Err(CliError::Config("requests_per_second must be > 0".into()));
        }
        Ok(RunConfig {
            registry_path: flags
                .registry
                .clone()
                .or_else(|| file.registry.clone())
                .unwrap_or(d.registry_path),
            cache_dir: flags.cache_dir.clone().or_else(|| file.cache_dir.clone()),
            backend,
            budget,
            styles,
            parallelism,
            seed: flags.seed.or(file.seed).unwrap_or(d.seed),
            requests_per_second,
            respondents: file.respondents.unwrap_or(d.respondents),
            education_share: file.education_share.unwrap_or(d.education_share),
            noise: file.noise.unwrap_or(d.noise),
        })
    }

    pub fn model_id(&self) -> &str {
        match &self.backend {
            BackendConfig::Mock => MOCK_MODEL,
            BackendConfig::Live { model_id, .. } => model_id,
        }
    }

    /// Builds the configured backend. The live backend fails here, before
    /// any request, when the API key is missing.
    pub fn build_summarizer(&self) -> Result<Summarizer, CliError> {
        let (backend, clock): (Arc<dyn CompletionBackend>, Arc<dyn Clock>) = match &self.backend {
            BackendConfig::Mock => (Arc::new(MockBackend::default()), Arc::new(FixedClock(0))),
            BackendConfig::Live { endpoint, .. } => {
                let http = HttpBackend::from_env(endpoint.clone()).map_err(|e| match e {
                    BackendError::Config(msg) => CliError::Config(msg),
                    other => config_err(other),
                })?;
                let limited = RateLimited::new(http, RateLimiter::per_second(self.requests_per_second));
                (
                    Arc::new(Retrying::new(limited, RetryPolicy::default())),
                    Arc::new(SystemClock),
                )
            }
        };
        let cache = match &self.cache_dir {
            Some(dir) => ResponseCache::in_dir(dir),
            None => ResponseCache::in_memory(),
        };
        Ok(Summarizer::new(backend, self.model_id())
            .with_budget(self.budget)
            .with_cache(cache)
            .with_clock(clock))
    }
}

fn load_file_config(path: Option<&Path>) -> Result<FileConfig, CliError> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn write_output(path: Option<&Path>, contents: &str) -> Result<(), CliError> {
    match path {
        Some(p) => atomic_write(p, contents.as_bytes())
            .map_err(|e| CliError::Failed(format!("writing {}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            match out.write_all(contents.as_bytes()).and_then(|_| out.flush()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                    Err(CliError::Failed(e.to_string()))
                }
                _ => Ok(()),
            }
        }
    }
}

/// Parses `args` (program name first), runs the command, and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<i32, CliError> {
    let file = load_file_config(cli.global.config.as_deref())?;
    let config = RunConfig::resolve(&cli.global, &file)?;
    match &cli.command {
        Command::Ingest { out } => cmd_ingest(&config, out.as_deref()),
        Command::Summarize { cases, out } => cmd_summarize(&config, cases, out),
        Command::Score { paths, out } => cmd_score(paths, out.as_deref()),
        Command::Analyze {
            dataset,
            outcomes,
            interaction,
            out,
        } => cmd_analyze(dataset, outcomes.as_deref(), interaction.as_deref(), out.as_deref()),
        Command::Simulate {
            respondents,
            education_share,
            noise,
            out,
        } => {
            let config = RunConfig {
                respondents: respondents.unwrap_or(config.respondents),
                education_share: education_share.unwrap_or(config.education_share),
                noise: noise.unwrap_or(config.noise),
                ..config
            };
            cmd_simulate(&config, out.as_deref())
        }
        Command::Report {
            bundles,
            analysis,
            out,
        } => cmd_report(bundles.as_deref(), analysis.as_deref(), out.as_deref()),
    }
}

fn load(config: &RunConfig) -> Result<CaseRegistry, CliError> {
    load_registry(&config.registry_path).map_err(config_err)
}

pub fn cmd_ingest(config: &RunConfig, out: Option<&Path>) -> Result<i32, CliError> {
    let registry = load(config)?;
    let mut text = format!("{} cases in {}\n", registry.len(), config.registry_path.display());
    for (topic, ids) in registry.by_topic() {
        text.push_str(&format!("  {:<20} {}\n", topic.label(), ids.join(", ")));
    }
    write_output(None, &text)?;
    if let Some(p) = out {
        write_output(Some(p), &registry.to_json())?;
    }
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
struct ManifestCase {
    case_id: String,
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    bundle: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    input_tokens: usize,
    output_tokens: usize,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    provenance: BTreeMap<String, crate::summarizer::StageProvenance>,
}

fn prompt_hashes(styles: &BTreeSet<OutputStyle>) -> BTreeMap<String, String> {
    let mut m = BTreeMap::new();
    m.insert("facts_summary".into(), sha256_hex(&PromptTemplate::facts_summary().render()));
    m.insert(
        "syllabus_summary".into(),
        sha256_hex(&PromptTemplate::syllabus_summary().render()),
    );
    for &s in styles {
        m.insert(
            format!("style_transfer:{s}"),
            sha256_hex(&PromptTemplate::style_transfer(s).render()),
        );
    }
    m
}

pub fn cmd_summarize(config: &RunConfig, filter: &[String], out: &Path) -> Result<i32, CliError> {
    let registry = load(config)?;
    let selected: Vec<&OpinionCase> = if filter.is_empty() {
        registry.cases().iter().collect()
    } else {
        filter
            .iter()
            .map(|id| {
                registry
                    .get(id)
                    .ok_or_else(|| CliError::Config(format!("unknown case `{id}`")))
            })
            .collect::<Result<_, _>>()?
    };
    let summarizer = config.build_summarizer()?;
    if selected.is_empty() {
        eprintln!("warning: registry has no cases; nothing to summarize");
    }

    let results = summarizer.run_many(&selected, &config.styles, config.parallelism);
    let mut failures = 0;
    let mut cases = Vec::new();
    for (case, result) in selected.iter().zip(results) {
        match result {
            Ok(bundle) => {
                let name = format!("{}.json", bundle.case_id);
                let path = out.join(&name);
                atomic_write(&path, bundle.to_json().as_bytes())
                    .map_err(|e| CliError::Failed(format!("writing {}: {e}", path.display())))?;
                cases.push(ManifestCase {
                    case_id: bundle.case_id.clone(),
                    status: "ok",
                    bundle: Some(name),
                    error: None,
                    input_tokens: bundle.provenance.values().map(|p| p.input_tokens).sum(),
                    output_tokens: bundle.provenance.values().map(|p| p.output_tokens).sum(),
                    provenance: bundle.provenance,
                });
            }
            Err(e) => {
                failures += 1;
                eprintln!("error: case {}: {e}", case.case_id);
                cases.push(ManifestCase {
                    case_id: case.case_id.clone(),
                    status: "error",
                    bundle: None,
                    error: Some(e.to_string()),
                    input_tokens: 0,
                    output_tokens: 0,
                    provenance: BTreeMap::new(),
                });
            }
        }
    }
    let stats = summarizer.stats();
    let manifest = json!({
        "model_id": config.model_id(),
        "backend": config.backend,
        "styles": config.styles,
        "budget": config.budget,
        "prompt_hashes": prompt_hashes(&config.styles),
        "cases": cases,
        "totals": {
            "cases": selected.len(),
            "failed": failures,
            "backend_calls": stats.backend_calls,
            "cache_hits": stats.cache_hits,
            "input_tokens": cases.iter().map(|c| c.input_tokens).sum::<usize>(),
            "output_tokens": cases.iter().map(|c| c.output_tokens).sum::<usize>(),
        },
    });
    let manifest_path = out.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    atomic_write(&manifest_path, text.as_bytes())
        .map_err(|e| CliError::Failed(format!("writing {}: {e}", manifest_path.display())))?;
    eprintln!(
        "{} bundles written to {} ({} failed, {} backend calls, {} cache hits)",
        selected.len() - failures,
        out.display(),
        failures,
        stats.backend_calls,
        stats.cache_hits
    );
    Ok(if failures == 0 { EXIT_OK } else { EXIT_PARTIAL })
}

/// One row per scoreable text: `(text_id, text)`. Bundles expand to their
/// syllabus, intermediate, and styled outputs, tagged `case_id:stage`.
pub fn bundle_texts(bundle: &SummaryBundle) -> Vec<(String, String)> {
    let mut rows = vec![
        (format!("{}:syllabus", bundle.case_id), bundle.source_text.clone()),
        (
            format!("{}:intermediate", bundle.case_id),
            bundle.intermediate_summary.clone(),
        ),
    ];
    for (style, text) in &bundle.styled_outputs {
        rows.push((format!("{}:{style}", bundle.case_id), text.clone()));
    }
    rows
}

fn collect_inputs(paths: &[PathBuf]) -> Result<Vec<(String, String)>, CliError> {
    let mut texts = Vec::new();
    for path in paths {
        if path.is_dir() {
            let mut entries: Vec<PathBuf> = std::fs::read_dir(path)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_file())
                .collect();
            entries.sort();
            for p in entries {
                match p.extension().and_then(|e| e.to_str()) {
                    Some("txt") | Some("md") => texts.push(read_text_input(&p)?),
                    Some("json") => {
                        if let Some(b) = read_bundle(&p)? {
                            texts.extend(bundle_texts(&b));
                        }
                    }
                    _ => {}
                }
            }
        } else if path.extension().is_some_and(|e| e == "json") {
            let b = read_bundle(path)?
                .ok_or_else(|| CliError::Config(format!("{}: not a summary bundle", path.display())))?;
            texts.extend(bundle_texts(&b));
        } else {
            texts.push(read_text_input(path)?);
        }
    }
    Ok(texts)
}

fn read_text_input(path: &Path) -> Result<(String, String), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    Ok((id, text))
}

fn read_bundle(path: &Path) -> Result<Option<SummaryBundle>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok(SummaryBundle::from_json(&text).ok())
}

fn score_rows(texts: &[(String, String)]) -> (Vec<ScoredText>, Vec<String>) {
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    for (id, text) in texts {
        match score_text(id, text, Default::default()) {
            Ok(s) => rows.push(s),
            Err(e) => errors.push(e.to_string()),
        }
    }
    (rows, errors)
}

pub fn cmd_score(paths: &[PathBuf], out: Option<&Path>) -> Result<i32, CliError> {
    let texts = collect_inputs(paths)?;
    let (rows, errors) = score_rows(&texts);
    for e in &errors {
        eprintln!("error: {e}");
    }
    let mean = if rows.is_empty() {
        f64::NAN
    } else {
        rows.iter().map(|r| r.score).sum::<f64>() / rows.len() as f64
    };
    let report = crate::readability::ReadabilityReport {
        per_text: rows,
        mean_score: mean,
    };
    write_output(out, &report.to_csv())?;
    if !report.per_text.is_empty() {
        eprintln!(
            "{} texts, mean Flesch reading ease {:.1} ({})",
            report.per_text.len(),
            report.mean_score,
            report.mean_band()
        );
    }
    Ok(if errors.is_empty() { EXIT_OK } else { EXIT_PARTIAL })
}

/// Main-model and optional interaction-model results, as written to
/// `results.json`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct AnalysisOutput {
    pub main: Vec<RegressionResult>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub interaction: Vec<RegressionResult>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub errors: Vec<String>,
}

impl AnalysisOutput {
    pub fn to_markdown(&self) -> String {
        let mut s = String::from("## Treatment effects\n\n");
        s.push_str(&render_table(&self.main, &[]));
        if !self.interaction.is_empty() {
            s.push_str("\n## Treatment x education\n\n");
            s.push_str(&render_table(&self.interaction, &[]));
        }
        s
    }
}

pub fn analyze(
    data: &[crate::experiment::SurveyResponse],
    outcomes: &[Outcome],
    interaction: Option<Covariate>,
) -> AnalysisOutput {
    let mut out = AnalysisOutput::default();
    for &o in outcomes {
        match estimate_treatment_effect(data, &RegressionSpec::main(o)) {
            Ok(r) => out.main.push(r),
            Err(e) => out.errors.push(format!("{o}: {e}")),
        }
        if let Some(cov) = interaction {
            let spec = RegressionSpec {
                interaction_with: Some(cov),
                ..RegressionSpec::main(o)
            };
            match estimate_interaction(data, &spec) {
                Ok(r) => out.interaction.push(r),
                Err(e) => out.errors.push(format!("{o} x {}: {e}", cov.field())),
            }
        }
    }
    out
}

pub fn cmd_analyze(
    dataset: &Path,
    outcomes: Option<&[String]>,
    interaction: Option<&str>,
    out: Option<&Path>,
) -> Result<i32, CliError> {
    let outcomes: Vec<Outcome> = match outcomes {
        Some(names) => names
            .iter()
            .map(|n| n.parse())
            .collect::<Result<_, _>>()
            .map_err(CliError::Config)?,
        None => Outcome::ALL.to_vec(),
    };
    let covariate = interaction
        .map(|c| c.parse::<Covariate>())
        .transpose()
        .map_err(CliError::Config)?;
    let data = read_dataset(dataset).map_err(config_err)?;
    let result = analyze(&data, &outcomes, covariate);
    for e in &result.errors {
        eprintln!("error: {e}");
    }
    let markdown = result.to_markdown();
    write_output(None, &markdown)?;
    if let Some(dir) = out {
        let json = serde_json::to_string_pretty(&result).expect("results serialize") + "\n";
        for (name, body) in [("table.md", markdown.as_str()), ("results.json", json.as_str())] {
            let p = dir.join(name);
            atomic_write(&p, body.as_bytes())
                .map_err(|e| CliError::Failed(format!("writing {}: {e}", p.display())))?;
        }
    }
    Ok(if result.errors.is_empty() { EXIT_OK } else { EXIT_PARTIAL })
}

pub fn cmd_simulate(config: &RunConfig, out: Option<&Path>) -> Result<i32, CliError> {
    let registry = load(config)?;
    let dgp = Dgp {
        noise: config.noise,
        education_share: config.education_share,
        ..Dgp::default()
    };
    let rows = simulate_survey(&registry, config.respondents, &dgp, config.seed).map_err(config_err)?;
    let mut buf = Vec::new();
    write_dataset(&mut buf, &rows).map_err(|e| CliError::Failed(e.to_string()))?;
    write_output(out, &String::from_utf8(buf).expect("csv is utf8"))?;
    if out.is_some() {
        eprintln!("{} rows simulated (seed {})", rows.len(), config.seed);
    }
    Ok(EXIT_OK)
}

/// Mean Flesch score per pipeline stage across a directory of bundles.
pub fn stage_readability(bundles: &[SummaryBundle]) -> (BTreeMap<String, (usize, f64)>, Vec<String>) {
    let mut sums: BTreeMap<String, (usize, f64)> = BTreeMap::new();
    let mut errors = Vec::new();
    for b in bundles {
        let (rows, errs) = score_rows(&bundle_texts(b));
        errors.extend(errs);
        for r in rows {
            let stage = r.text_id.rsplit(':').next().unwrap_or_default().to_string();
            let e = sums.entry(stage).or_default();
            e.0 += 1;
            e.1 += r.score;
        }
    }
    let means = sums
        .into_iter()
        .map(|(k, (n, total))| (k, (n, total / n as f64)))
        .collect();
    (means, errors)
}

pub fn cmd_report(
    bundles: Option<&Path>,
    analysis: Option<&Path>,
    out: Option<&Path>,
) -> Result<i32, CliError> {
    if bundles.is_none() && analysis.is_none() {
        return Err(CliError::Config("report needs --bundles and/or --analysis".into()));
    }
    let mut md = String::from("# Opinion simplification report\n\n");
    let mut errors = Vec::new();
    if let Some(dir) = bundles {
        let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(|e| CliError::Config(format!("{}: {e}", dir.display())))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "json"))
            .collect();
        paths.sort();
        let mut loaded = Vec::new();
        for p in &paths {
            if let Some(b) = read_bundle(p)? {
                loaded.push(b);
            }
        }
        let (means, errs) = stage_readability(&loaded);
        errors.extend(errs);
        md.push_str(&format!("## Readability by stage ({} cases)\n\n", loaded.len()));
        md.push_str("| Stage | Texts | Mean Flesch | Band |\n|---|---:|---:|---|\n");
        for (stage, (n, mean)) in &means {
            md.push_str(&format!(
                "| {stage} | {n} | {mean:.1} | {} |\n",
                crate::readability::interpret_score(*mean)
            ));
        }
        md.push('\n');
    }
    if let Some(path) = analysis {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let parsed: AnalysisOutput = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        md.push_str(&parsed.to_markdown());
    }
    for e in &errors {
        eprintln!("error: {e}");
    }
    write_output(out, &md)?;
    Ok(if errors.is_empty() { EXIT_OK } else { EXIT_PARTIAL })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flags(args: &[&str]) -> GlobalArgs {
        let mut v = vec!["opinion-simplify"];
        v.extend_from_slice(args);
        v.push("ingest");
        Cli::try_parse_from(v).unwrap().global
    }

    #[test]
    fn precedence_flags_over_file_over_defaults() {
        let file: FileConfig = toml::from_str("seed = 7\nparallelism = 2\nmock = true\nmodel = \"m\"").unwrap();
        let c = RunConfig::resolve(&flags(&["--seed", "9"]), &file).unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.parallelism, 2);
        assert_eq!(c.backend, BackendConfig::Mock);
        assert_eq!(c.registry_path, PathBuf::from(DEFAULT_REGISTRY));

        let live = RunConfig::resolve(&flags(&["--live"]), &file).unwrap();
        assert!(matches!(live.backend, BackendConfig::Live { ref model_id, .. } if model_id == "m"));
    }

    #[test]
    fn style_parsing() {
        let c = RunConfig::resolve(&flags(&["--styles", "7th-grade,twitter"]), &FileConfig::default()).unwrap();
        assert_eq!(
            c.styles,
            BTreeSet::from([OutputStyle::SeventhGrade, OutputStyle::MicroblogThread])
        );
        assert!(RunConfig::resolve(&flags(&["--styles", "haiku"]), &FileConfig::default()).is_err());
    }

    #[test]
    fn zero_parallelism_rejected() {
        let err = RunConfig::resolve(&flags(&["--parallelism", "0"]), &FileConfig::default()).unwrap_err();
        assert_eq!(err.exit_code(), EXIT_CONFIG);
    }

    #[test]
    fn unknown_config_key_rejected() {
        assert!(toml::from_str::<FileConfig>("colour = 1").is_err());
    }

    #[test]
    fn mock_and_live_conflict() {
        assert!(Cli::try_parse_from(["x", "--mock", "--live", "ingest"]).is_err());
    }
}
