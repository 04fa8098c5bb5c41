//! Prompt dispatch to chat-completion providers, response caching, offline
//! replay and assessment sweeps.

mod cache;
mod parse;
mod provider;

pub use cache::{cache_key, CacheEntry, ResponseCache};
pub use parse::{parse_classification, parse_score, ClassificationParse, ParseStatus, ScoreParse, ScoreParseError};
pub use provider::{
    build_request, extract_reply, HttpRequest, HttpResponse, ModelProfile, ProviderKind, RetryPolicy, Transport,
    TransportError, UreqTransport,
};

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{AdherenceLabel, Corpus};
use crate::practices::{Catalog, PracticeId};
use crate::prompting::{self, CallContextOptions, CallGraph, PromptError, PromptStrategy, RenderedPrompt};

pub const DEFAULT_PARALLELISM: usize = 4;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GatewayError {
    #[error("cache error: {0}")]
    Cache(String),
    #[error("poisoned cache entry {key}: stored request does not match its key or the prompt")]
    CacheIntegrity { key: String },
    #[error("replay miss: no cached response for key {key}")]
    ReplayMiss { key: String },
    #[error("credential variable `{0}` is not set")]
    MissingCredential(String),
    #[error("network failure after {attempts} attempts: {message}")]
    Network { attempts: u32, message: String },
    #[error("provider returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed provider response: {0}")]
    BadResponse(String),
    #[error("prompt for `{function_id}` needs ~{measured} tokens, over the budget of {budget}")]
    BudgetExceeded { function_id: String, budget: usize, measured: usize },
    #[error("invalid model profile `{model_id}`: {message}")]
    InvalidProfile { model_id: String, message: String },
}

/// Dispatches prompts, serving cached responses first.
pub struct Gateway {
    cache: Arc<ResponseCache>,
    transport: Box<dyn Transport>,
    replay_only: bool,
    next_slot: Mutex<HashMap<String, Instant>>,
    network_calls: AtomicUsize,
}

impl Gateway {
    pub fn new(cache: Arc<ResponseCache>, transport: Box<dyn Transport>) -> Self {
        Gateway {
            cache,
            transport,
            replay_only: false,
            next_slot: Mutex::new(HashMap::new()),
            network_calls: AtomicUsize::new(0),
        }
    }

    /// Gateway that never performs network I/O, whatever the profile says.
    pub fn replay(cache: Arc<ResponseCache>) -> Self {
        Gateway { replay_only: true, ..Gateway::new(cache, Box::new(NoTransport)) }
    }

    pub fn with_replay_only(mut self, replay_only: bool) -> Self {
        self.replay_only = replay_only;
        self
    }

    pub fn cache(&self) -> &ResponseCache {
        &self.cache
    }

    /// Number of HTTP requests attempted so far, retries included.
    pub fn network_calls(&self) -> usize {
        self.network_calls.load(Ordering::SeqCst)
    }

    pub fn key_for(prompt: &RenderedPrompt, profile: &ModelProfile) -> String {
        cache_key(&profile.model_id, &prompt.template_version(), &prompt.content_hash)
    }

    pub fn dispatch(&self, prompt: &RenderedPrompt, profile: &ModelProfile) -> Result<String, GatewayError> {
        let measured = prompt.estimated_tokens();
        if measured > profile.token_budget {
            return Err(GatewayError::BudgetExceeded {
                function_id: prompt.function_id.clone(),
                budget: profile.token_budget,
                measured,
            });
        }
        let key = Self::key_for(prompt, profile);
        if let Some(hit) = self.cache.lookup(&key, &prompt.text)? {
            return Ok(hit.response_text);
        }
        if self.replay_only || profile.provider_kind == ProviderKind::Replay {
            return Err(GatewayError::ReplayMiss { key });
        }
        profile.validate()?;
        let var = profile.credential_env_var.as_deref().unwrap_or_default();
        let credential = std::env::var(var).map_err(|_| GatewayError::MissingCredential(var.to_string()))?;
        let request = build_request(profile, &prompt.text, &credential);
        let body = self.post_with_retry(profile, &request)?;
        let (response_text, provider_metadata) = extract_reply(profile.provider_kind, &body)?;
        let stored = self.cache.insert(CacheEntry {
            key,
            model_id: profile.model_id.clone(),
            template_version: prompt.template_version(),
            request_text: prompt.text.clone(),
            response_text,
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            provider_metadata,
        })?;
        Ok(stored.response_text)
    }

    fn wait_for_slot(&self, profile: &ModelProfile) {
        if profile.min_request_interval_ms == 0 {
            return;
        }
        let interval = Duration::from_millis(profile.min_request_interval_ms);
        let wait = {
            let mut slots = self.next_slot.lock().expect("rate limiter lock");
            let now = Instant::now();
            let slot = slots.entry(profile.model_id.clone()).or_insert(now);
            let start = (*slot).max(now);
            *slot = start + interval;
            start - now
        };
        if !wait.is_zero() {
            thread::sleep(wait);
        }
    }

    fn post_with_retry(&self, profile: &ModelProfile, request: &HttpRequest) -> Result<String, GatewayError> {
        let attempts = profile.retry.max_attempts;
        let mut backoff = Duration::from_millis(profile.retry.initial_backoff_ms);
        let mut last = None;
        for attempt in 1..=attempts {
            self.wait_for_slot(profile);
            self.network_calls.fetch_add(1, Ordering::SeqCst);
            let outcome = self.transport.post(request);
            let retryable = match &outcome {
                Ok(resp) if (200..300).contains(&resp.status) => return Ok(outcome.unwrap().body),
                Ok(resp) => resp.status == 429 || resp.status >= 500,
                Err(_) => true,
            };
            let error = match outcome {
                Ok(resp) => GatewayError::Http { status: resp.status, body: truncate(&resp.body, 512) },
                Err(TransportError(message)) => GatewayError::Network { attempts: attempt, message },
            };
            if !retryable {
                return Err(error);
            }
            last = Some(error);
            if attempt < attempts {
                thread::sleep(backoff);
                backoff *= 2;
            }
        }
        Err(last.expect("at least one attempt"))
    }
}

fn truncate(s: &str, max: usize) -> String {
    match s.char_indices().nth(max) {
        Some((i, _)) => format!("{}...", &s[..i]),
        None => s.to_string(),
    }
}

struct NoTransport;

impl Transport for NoTransport {
    fn post(&self, _: &HttpRequest) -> Result<HttpResponse, TransportError> {
        Err(TransportError("network disabled".into()))
    }
}

/// One parsed model answer. Classification verdicts carry `label`, score
/// verdicts carry `score`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelVerdict {
    pub function_id: String,
    pub practice_id: Option<PracticeId>,
    pub label: Option<AdherenceLabel>,
    pub score: Option<f64>,
    pub raw_response: String,
    pub parse_status: ParseStatus,
}

impl ModelVerdict {
    /// Builds a classification verdict. Unparseable answers count as
    /// `NotFollowed` and keep the `Failed` status.
    pub fn classification(function_id: &str, practice_id: PracticeId, raw: String) -> Self {
        let parsed = parse_classification(&raw);
        ModelVerdict {
            function_id: function_id.to_string(),
            practice_id: Some(practice_id),
            label: Some(parsed.label.unwrap_or(AdherenceLabel::NotFollowed)),
            score: None,
            raw_response: raw,
            parse_status: parsed.status,
        }
    }

    pub fn score(function_id: &str, raw: String) -> Result<Self, ScoreParseError> {
        let parsed = parse_score(&raw)?;
        Ok(ModelVerdict {
            function_id: function_id.to_string(),
            practice_id: None,
            label: None,
            score: Some(parsed.value),
            raw_response: raw,
            parse_status: parsed.status,
        })
    }

    /// The label for metric computation: `None` for failed parses.
    pub fn metric_label(&self) -> Option<AdherenceLabel> {
        match self.parse_status {
            ParseStatus::Failed => None,
            _ => self.label,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ItemError {
    pub function_id: String,
    pub practice_id: Option<PracticeId>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunHeader {
    pub tool_version: String,
    pub model_id: String,
    pub strategy: PromptStrategy,
    pub template_version: String,
    pub catalog_version: String,
    pub seed: u64,
    pub temperature: f64,
    pub complete: bool,
    pub verdict_count: usize,
    pub item_error_count: usize,
    pub failed_parses: usize,
    pub repaired_parses: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum RunRecord {
    Header(RunHeader),
    Verdict(ModelVerdict),
    ItemError(ItemError),
}

#[derive(Debug, Error)]
pub enum RunFileError {
    #[error("failed to access run file {path}: {message}")]
    Io { path: String, message: String },
    #[error("run file line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("run file has no header record")]
    MissingHeader,
}

/// A (model, strategy) sweep: header plus verdicts in canonical
/// `(function_id, practice_id)` order.
#[derive(Debug, Clone, PartialEq)]
pub struct AssessmentRun {
    pub header: RunHeader,
    pub verdicts: Vec<ModelVerdict>,
    pub item_errors: Vec<ItemError>,
}

impl AssessmentRun {
    pub fn is_complete(&self) -> bool {
        self.header.complete
    }

    pub fn label_counts(&self) -> BTreeMap<AdherenceLabel, usize> {
        let mut counts: BTreeMap<AdherenceLabel, usize> = AdherenceLabel::ALL.iter().map(|l| (*l, 0)).collect();
        for l in self.verdicts.iter().filter_map(|v| v.label) {
            *counts.entry(l).or_default() += 1;
        }
        counts
    }

    /// Classification labels per function, with the failed-parse policy applied.
    pub fn label_table(&self) -> BTreeMap<String, BTreeMap<PracticeId, AdherenceLabel>> {
        let mut table: BTreeMap<String, BTreeMap<PracticeId, AdherenceLabel>> = BTreeMap::new();
        for v in &self.verdicts {
            if let (Some(p), Some(l)) = (v.practice_id, v.label) {
                table.entry(v.function_id.clone()).or_default().insert(p, l);
            }
        }
        table
    }

    /// Score-estimation values per function.
    pub fn score_map(&self) -> BTreeMap<String, f64> {
        self.verdicts
            .iter()
            .filter_map(|v| v.score.map(|s| (v.function_id.clone(), s)))
            .collect()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let mut push = |r: RunRecord| {
            out.push_str(&serde_json::to_string(&r).expect("run record serializes"));
            out.push('\n');
        };
        push(RunRecord::Header(self.header.clone()));
        for v in &self.verdicts {
            push(RunRecord::Verdict(v.clone()));
        }
        for e in &self.item_errors {
            push(RunRecord::ItemError(e.clone()));
        }
        out
    }

    pub fn parse_jsonl(text: &str) -> Result<Self, RunFileError> {
        let mut header = None;
        let mut verdicts = Vec::new();
        let mut item_errors = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: RunRecord = serde_json::from_str(line)
                .map_err(|e| RunFileError::Malformed { line: i + 1, message: e.to_string() })?;
            match record {
                RunRecord::Header(h) if header.is_none() => header = Some(h),
                RunRecord::Header(_) => {
                    return Err(RunFileError::Malformed { line: i + 1, message: "second header record".into() })
                }
                RunRecord::Verdict(v) => verdicts.push(v),
                RunRecord::ItemError(e) => item_errors.push(e),
            }
        }
        let header = header.ok_or(RunFileError::MissingHeader)?;
        Ok(AssessmentRun { header, verdicts, item_errors })
    }

    pub fn write(&self, path: &Path) -> Result<(), RunFileError> {
        let io = |e: std::io::Error| RunFileError::Io { path: path.display().to_string(), message: e.to_string() };
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(io)?;
        }
        fs::write(path, self.to_jsonl()).map_err(io)
    }

    pub fn load(path: &Path) -> Result<Self, RunFileError> {
        let text = fs::read_to_string(path)
            .map_err(|e| RunFileError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Self::parse_jsonl(&text)
    }
}

/// Inputs a sweep needs beyond corpus, catalog, strategy and profile.
#[derive(Debug, Clone, Copy)]
pub struct SweepOptions<'a> {
    pub parallelism: usize,
    pub seed: u64,
    /// Required for the call-context strategy.
    pub call_graph: Option<&'a CallGraph>,
    pub call_context_depth: usize,
    /// Classification run whose labels feed the score-estimation prompt.
    pub prior_run: Option<&'a AssessmentRun>,
}

impl Default for SweepOptions<'_> {
    fn default() -> Self {
        SweepOptions { parallelism: DEFAULT_PARALLELISM, seed: 0, call_graph: None, call_context_depth: 1, prior_run: None }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SweepError {
    #[error("parallelism must be a positive integer")]
    ZeroParallelism,
    #[error("strategy {0} needs a call graph")]
    MissingCallGraph(PromptStrategy),
    #[error("score estimation needs a prior classification run")]
    MissingPriorRun,
    #[error(transparent)]
    Profile(#[from] GatewayError),
}

type Task = (String, Option<PracticeId>);

fn render(
    strategy: PromptStrategy,
    task: &Task,
    corpus: &Corpus,
    catalog: &Catalog,
    profile: &ModelProfile,
    options: &SweepOptions,
    prior: &BTreeMap<String, BTreeMap<PracticeId, AdherenceLabel>>,
) -> Result<RenderedPrompt, PromptError> {
    let function = corpus
        .get(&task.0)
        .ok_or_else(|| PromptError::UnknownFunction(task.0.clone()))?;
    if strategy == PromptStrategy::ScoreEstimation {
        let empty = BTreeMap::new();
        return prompting::render_score_estimation(function, prior.get(&task.0).unwrap_or(&empty));
    }
    let practice = catalog.get(task.1.ok_or(PromptError::PracticeRequired(strategy))?);
    match strategy {
        PromptStrategy::Baseline => Ok(prompting::render_baseline(function, practice)),
        PromptStrategy::CweAndBadExamples => prompting::render_cwe_examples(function, practice),
        PromptStrategy::RuleBased => prompting::render_rule_based(function, practice),
        PromptStrategy::CallContext => {
            let graph = options.call_graph.expect("checked before the sweep");
            let opts = CallContextOptions { depth: options.call_context_depth, token_budget: Some(profile.token_budget) };
            prompting::render_call_context(function, practice, graph, corpus, &opts)
        }
        PromptStrategy::ScoreEstimation => unreachable!(),
    }
}

#[allow(clippy::too_many_arguments)]
fn assess_one(
    gateway: &Gateway,
    strategy: PromptStrategy,
    task: &Task,
    corpus: &Corpus,
    catalog: &Catalog,
    profile: &ModelProfile,
    options: &SweepOptions,
    prior: &BTreeMap<String, BTreeMap<PracticeId, AdherenceLabel>>,
) -> Result<ModelVerdict, String> {
    let prompt = render(strategy, task, corpus, catalog, profile, options, prior).map_err(|e| e.to_string())?;
    let raw = gateway.dispatch(&prompt, profile).map_err(|e| e.to_string())?;
    match task.1 {
        Some(p) => Ok(ModelVerdict::classification(&task.0, p, raw)),
        None => ModelVerdict::score(&task.0, raw).map_err(|e| e.to_string()),
    }
}

/// Assesses every (function, practice) pair, or every function for score
/// estimation, with up to `parallelism` requests in flight. Per-item failures
/// are collected and mark the run incomplete.
pub fn run_sweep(
    gateway: &Gateway,
    corpus: &Corpus,
    catalog: &Catalog,
    strategy: PromptStrategy,
    profile: &ModelProfile,
    options: &SweepOptions,
) -> Result<AssessmentRun, SweepError> {
    if options.parallelism == 0 {
        return Err(SweepError::ZeroParallelism);
    }
    profile.validate()?;
    if strategy == PromptStrategy::CallContext && options.call_graph.is_none() {
        return Err(SweepError::MissingCallGraph(strategy));
    }
    let prior = match (strategy, options.prior_run) {
        (PromptStrategy::ScoreEstimation, Some(run)) => run.label_table(),
        (PromptStrategy::ScoreEstimation, None) => return Err(SweepError::MissingPriorRun),
        _ => BTreeMap::new(),
    };

    let tasks: Vec<Task> = corpus
        .function_ids()
        .flat_map(|fid| {
            let practices: Vec<Option<PracticeId>> = if strategy.is_per_practice() {
                PracticeId::all().map(Some).collect()
            } else {
                vec![None]
            };
            practices.into_iter().map(move |p| (fid.to_string(), p))
        })
        .collect();

    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<ModelVerdict, String>>>> = Mutex::new(vec![None; tasks.len()]);
    let workers = options.parallelism.min(tasks.len()).max(1);
    thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(task) = tasks.get(i) else { break };
                let outcome = assess_one(gateway, strategy, task, corpus, catalog, profile, options, &prior);
                results.lock().expect("sweep results lock")[i] = Some(outcome);
            });
        }
    });

    let mut verdicts = Vec::new();
    let mut item_errors = Vec::new();
    for (task, outcome) in tasks.into_iter().zip(results.into_inner().expect("sweep results lock")) {
        match outcome.expect("every task ran") {
            Ok(v) => verdicts.push(v),
            Err(message) => item_errors.push(ItemError { function_id: task.0, practice_id: task.1, message }),
        }
    }
    let header = RunHeader {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        model_id: profile.model_id.clone(),
        strategy,
        template_version: strategy.template_version(),
        catalog_version: catalog.version().to_string(),
        seed: options.seed,
        temperature: profile.temperature,
        complete: item_errors.is_empty(),
        verdict_count: verdicts.len(),
        item_error_count: item_errors.len(),
        failed_parses: verdicts.iter().filter(|v| v.parse_status == ParseStatus::Failed).count(),
        repaired_parses: verdicts.iter().filter(|v| v.parse_status == ParseStatus::Repaired).count(),
    };
    Ok(AssessmentRun { header, verdicts, item_errors })
}
