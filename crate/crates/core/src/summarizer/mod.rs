//! The summarization pipeline: facts summary, per-chunk syllabus summaries,
//! concatenation into an intermediate summary, then one style transfer per
//! requested output style.
//!
//! Every backend call goes through the response cache, so a rerun with a warm
//! cache makes no backend requests.

pub mod backend;
pub mod cache;
pub mod prompts;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::chunker::{chunk_text, estimate_tokens, ChunkError, TokenBudget};
use crate::corpus::OpinionCase;
use backend::{BackendError, CompletionBackend, CompletionRequest};
use cache::{CacheEntry, CacheError, CacheKey, ResponseCache};
use prompts::{sha256_hex, PromptTemplate};

pub use backend::MockBackend;
pub use prompts::{OutputStyle, TemplateId};

pub const INTERMEDIATE_SEPARATOR: &str = "\n\n";
pub const DEFAULT_MAX_RECURSION: usize = 3;

#[derive(Debug, thiserror::Error)]
pub enum SummarizeError {
    #[error("stage {stage}: backend failure: {source}")]
    BackendFailure {
        stage: String,
        #[source]
        source: BackendError,
    },
    #[error("stage {stage}: budget unsatisfiable: {detail}")]
    BudgetUnsatisfiable { stage: String, detail: String },
    #[error("stage {stage}: invalid budget: {source}")]
    InvalidBudget {
        stage: String,
        #[source]
        source: ChunkError,
    },
    #[error("case {case_id}: `{field}` must be nonempty")]
    SchemaViolation { case_id: String, field: String },
    #[error(transparent)]
    Cache(#[from] CacheError),
}

impl SummarizeError {
    pub fn stage(&self) -> Option<&str> {
        match self {
            SummarizeError::BackendFailure { stage, .. }
            | SummarizeError::BudgetUnsatisfiable { stage, .. }
            | SummarizeError::InvalidBudget { stage, .. } => Some(stage),
            _ => None,
        }
    }

    fn from_chunk(stage: &str, err: ChunkError) -> Self {
        match err {
            ChunkError::BudgetUnsatisfiable { .. } => SummarizeError::BudgetUnsatisfiable {
                stage: stage.to_string(),
                detail: err.to_string(),
            },
            ChunkError::InvalidBudget { .. } => SummarizeError::InvalidBudget {
                stage: stage.to_string(),
                source: err,
            },
        }
    }
}

pub trait Clock: Send + Sync {
    /// Unix seconds.
    fn now(&self) -> u64;
}

pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> u64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0)
    }
}

/// Always returns the same instant; used for reproducible offline runs.
pub struct FixedClock(pub u64);

impl Clock for FixedClock {
    fn now(&self) -> u64 {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageProvenance {
    pub model_id: String,
    pub prompt_hash: String,
    pub input_hash: String,
    pub timestamp: u64,
    pub input_tokens: usize,
    pub output_tokens: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryBundle {
    pub case_id: String,
    /// The text that was chunked and summarized (the syllabus by default).
    pub source_text: String,
    pub facts_summary: String,
    pub chunk_summaries: Vec<String>,
    pub intermediate_summary: String,
    pub styled_outputs: BTreeMap<OutputStyle, String>,
    pub provenance: BTreeMap<String, StageProvenance>,
}

impl SummaryBundle {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("bundle serializes");
        s.push('\n');
        s
    }

    pub fn from_json(json: &str) -> serde_json::Result<Self> {
        serde_json::from_str(json)
    }
}

/// Facts summary first, then chunk summaries in order, separated by blank
/// lines.
pub fn build_intermediate(facts_summary: &str, chunk_summaries: &[String]) -> String {
    std::iter::once(facts_summary)
        .chain(chunk_summaries.iter().map(String::as_str))
        .collect::<Vec<_>>()
        .join(INTERMEDIATE_SEPARATOR)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CallStats {
    pub backend_calls: usize,
    pub cache_hits: usize,
}

pub struct Summarizer {
    backend: Arc<dyn CompletionBackend>,
    cache: ResponseCache,
    model_id: String,
    budget: TokenBudget,
    clock: Arc<dyn Clock>,
    max_recursion: usize,
    backend_calls: AtomicUsize,
    cache_hits: AtomicUsize,
}

struct StageOutput {
    text: String,
    provenance: StageProvenance,
}

impl Summarizer {
    pub fn new(backend: Arc<dyn CompletionBackend>, model_id: impl Into<String>) -> Self {
        Summarizer {
            backend,
            cache: ResponseCache::in_memory(),
            model_id: model_id.into(),
            budget: TokenBudget::default(),
            clock: Arc::new(SystemClock),
            max_recursion: DEFAULT_MAX_RECURSION,
            backend_calls: AtomicUsize::new(0),
            cache_hits: AtomicUsize::new(0),
        }
    }

    pub fn with_cache(mut self, cache: ResponseCache) -> Self {
        self.cache = cache;
        self
    }

    /// Only `context_limit` and `reserved_output` are used; the prompt
    /// overhead is measured per request.
    pub fn with_budget(mut self, budget: TokenBudget) -> Self {
        self.budget = budget;
        self
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn with_max_recursion(mut self, depth: usize) -> Self {
        self.max_recursion = depth;
        self
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn budget(&self) -> &TokenBudget {
        &self.budget
    }

    pub fn stats(&self) -> CallStats {
        CallStats {
            backend_calls: self.backend_calls.load(Ordering::SeqCst),
            cache_hits: self.cache_hits.load(Ordering::SeqCst),
        }
    }

    fn budget_for(&self, stage: &str, instruction: &str) -> Result<TokenBudget, SummarizeError> {
        self.budget
            .for_instruction(instruction)
            .map_err(|e| SummarizeError::from_chunk(stage, e))
    }

    /// One cached backend call.
    fn call(
        &self,
        case_id: &str,
        stage: &str,
        instruction: &str,
        input: &str,
    ) -> Result<StageOutput, SummarizeError> {
        let request = CompletionRequest::new(&self.model_id, instruction, input, &self.budget)
            .ok_or_else(|| SummarizeError::BudgetUnsatisfiable {
                stage: stage.to_string(),
                detail: format!(
                    "{} input tokens + {} output tokens exceed context limit {}",
                    estimate_tokens(instruction) + estimate_tokens(input),
                    self.budget.reserved_output,
                    self.budget.context_limit
                ),
            })?;
        let key = CacheKey {
            case_id: case_id.to_string(),
            stage: stage.to_string(),
            prompt_hash: sha256_hex(instruction),
            model_id: self.model_id.clone(),
            input_hash: sha256_hex(input),
        };
        let (entry, hit) = self.cache.get_or_compute(&key, || {
            self.backend_calls.fetch_add(1, Ordering::SeqCst);
            let output = self.backend.complete(&request).map_err(|source| {
                SummarizeError::BackendFailure {
                    stage: stage.to_string(),
                    source,
                }
            })?;
            Ok::<_, SummarizeError>(CacheEntry {
                key: key.clone(),
                output,
                timestamp: self.clock.now(),
            })
        })?;
        if hit {
            self.cache_hits.fetch_add(1, Ordering::SeqCst);
        }
        let provenance = StageProvenance {
            model_id: key.model_id,
            prompt_hash: key.prompt_hash,
            input_hash: key.input_hash,
            timestamp: entry.timestamp,
            input_tokens: request.estimated_input_tokens(),
            output_tokens: estimate_tokens(&entry.output),
        };
        Ok(StageOutput {
            text: entry.output,
            provenance,
        })
    }

    /// Chunks `text` under `instruction`'s budget and summarizes each piece.
    fn summarize_chunked(
        &self,
        case_id: &str,
        stage: &str,
        instruction: &str,
        text: &str,
        provenance: &mut BTreeMap<String, StageProvenance>,
    ) -> Result<Vec<String>, SummarizeError> {
        let budget = self.budget_for(stage, instruction)?;
        let chunks = chunk_text(text, &budget).map_err(|e| SummarizeError::from_chunk(stage, e))?;
        let mut out = Vec::with_capacity(chunks.len());
        for (i, chunk) in chunks.chunks.iter().enumerate() {
            let name = format!("{stage}[{i}]");
            let r = self.call(case_id, &name, instruction, chunk)?;
            provenance.insert(name, r.provenance);
            out.push(r.text);
        }
        Ok(out)
    }

    fn check_case(case: &OpinionCase) -> Result<(), SummarizeError> {
        for (field, text) in [
            ("facts_text", &case.facts_text),
            ("syllabus_text", &case.syllabus_text),
        ] {
            if text.trim().is_empty() {
                return Err(SummarizeError::SchemaViolation {
                    case_id: case.case_id.clone(),
                    field: field.to_string(),
                });
            }
        }
        Ok(())
    }

    fn facts_stage(
        &self,
        case: &OpinionCase,
        provenance: &mut BTreeMap<String, StageProvenance>,
    ) -> Result<String, SummarizeError> {
        let instruction = PromptTemplate::facts_summary().render();
        let budget = self.budget_for("facts", &instruction)?;
        if estimate_tokens(&case.facts_text) <= budget.input_allowance() {
            let r = self.call(&case.case_id, "facts", &instruction, &case.facts_text)?;
            provenance.insert("facts".to_string(), r.provenance);
            Ok(r.text)
        } else {
            let parts =
                self.summarize_chunked(&case.case_id, "facts", &instruction, &case.facts_text, provenance)?;
            Ok(parts.join(INTERMEDIATE_SEPARATOR))
        }
    }

    pub fn summarize_facts(&self, case: &OpinionCase) -> Result<String, SummarizeError> {
        Self::check_case(case)?;
        self.facts_stage(case, &mut BTreeMap::new())
    }

    pub fn summarize_syllabus(&self, case: &OpinionCase) -> Result<Vec<String>, SummarizeError> {
        Self::check_case(case)?;
        self.summarize_source(&case.case_id, &case.syllabus_text, &mut BTreeMap::new())
    }

    fn summarize_source(
        &self,
        case_id: &str,
        source: &str,
        provenance: &mut BTreeMap<String, StageProvenance>,
    ) -> Result<Vec<String>, SummarizeError> {
        let instruction = PromptTemplate::syllabus_summary().render();
        self.summarize_chunked(case_id, "syllabus", &instruction, source, provenance)
    }

    pub fn style_transfer(
        &self,
        case_id: &str,
        intermediate: &str,
        style: OutputStyle,
    ) -> Result<String, SummarizeError> {
        self.style_stage(case_id, intermediate, style, &mut BTreeMap::new())
    }

    fn style_stage(
        &self,
        case_id: &str,
        intermediate: &str,
        style: OutputStyle,
        provenance: &mut BTreeMap<String, StageProvenance>,
    ) -> Result<String, SummarizeError> {
        let stage = format!("style:{style}");
        let instruction = PromptTemplate::style_transfer(style).render();
        let allowance = self.budget_for(&stage, &instruction)?.input_allowance();

        // Condense an oversized intermediate by re-summarizing its chunks.
        let condense = PromptTemplate::syllabus_summary().render();
        let mut text = intermediate.to_string();
        let mut depth = 0;
        while estimate_tokens(&text) > allowance {
            if depth == self.max_recursion {
                return Err(SummarizeError::BudgetUnsatisfiable {
                    stage,
                    detail: format!(
                        "input still needs {} tokens (allowance {allowance}) after {depth} condensing rounds",
                        estimate_tokens(&text)
                    ),
                });
            }
            let parts =
                self.summarize_chunked(case_id, &format!("condense{depth}"), &condense, &text, provenance)?;
            text = parts.join(INTERMEDIATE_SEPARATOR);
            depth += 1;
        }

        let r = self.call(case_id, &stage, &instruction, &text)?;
        provenance.insert(stage, r.provenance);
        Ok(r.text)
    }

    /// Runs every stage for one case using its syllabus as the source.
    pub fn run_pipeline(
        &self,
        case: &OpinionCase,
        styles: &BTreeSet<OutputStyle>,
    ) -> Result<SummaryBundle, SummarizeError> {
        self.run_pipeline_on(case, &case.syllabus_text, styles)
    }

    /// Like [`run_pipeline`](Self::run_pipeline) with an arbitrary source
    /// text, e.g. a full majority opinion.
    pub fn run_pipeline_on(
        &self,
        case: &OpinionCase,
        source: &str,
        styles: &BTreeSet<OutputStyle>,
    ) -> Result<SummaryBundle, SummarizeError> {
        Self::check_case(case)?;
        if source.trim().is_empty() {
            return Err(SummarizeError::SchemaViolation {
                case_id: case.case_id.clone(),
                field: "source_text".into(),
            });
        }
        let mut provenance = BTreeMap::new();
        let facts_summary = self.facts_stage(case, &mut provenance)?;
        let chunk_summaries = self.summarize_source(&case.case_id, source, &mut provenance)?;
        let intermediate_summary = build_intermediate(&facts_summary, &chunk_summaries);
        let mut styled_outputs = BTreeMap::new();
        for &style in styles {
            let out = self.style_stage(&case.case_id, &intermediate_summary, style, &mut provenance)?;
            styled_outputs.insert(style, out);
        }
        Ok(SummaryBundle {
            case_id: case.case_id.clone(),
            source_text: source.to_string(),
            facts_summary,
            chunk_summaries,
            intermediate_summary,
            styled_outputs,
            provenance,
        })
    }

    /// Runs the pipeline for many cases on up to `parallelism` threads.
    /// Results come back in input order.
    pub fn run_many(
        &self,
        cases: &[&OpinionCase],
        styles: &BTreeSet<OutputStyle>,
        parallelism: usize,
    ) -> Vec<Result<SummaryBundle, SummarizeError>> {
        let next = AtomicUsize::new(0);
        let workers = parallelism.max(1).min(cases.len().max(1));
        let mut slots: Vec<Option<Result<SummaryBundle, SummarizeError>>> =
            (0..cases.len()).map(|_| None).collect();
        let results = std::sync::Mutex::new(&mut slots);
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some(case) = cases.get(i) else { break };
                    let r = self.run_pipeline(case, styles);
                    results.lock().unwrap()[i] = Some(r);
                });
            }
        });
        slots
            .into_iter()
            .map(|r| r.expect("every case processed"))
            .collect()
    }
}
