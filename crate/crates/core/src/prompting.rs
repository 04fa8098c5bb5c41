//! Prompt rendering for the five assessment strategies, plus the call
//! context used by the call-context strategy.
//!
//! Every prompt is a pure function of its inputs. Source code is embedded in
//! fenced blocks delimited by [`FENCE`] lines, so prompts stored in the cache
//! can be split back into their parts with [`extract_fenced_blocks`].

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{AdherenceLabel, Corpus, FunctionRecord, VariantKind};
use crate::practices::{is_placeholder, Practice, PracticeId};

/// Version of the shipped template set, embedded in every prompt.
pub const TEMPLATE_SET_VERSION: &str = "v1";

/// Sentinel token that opens and closes embedded source blocks.
pub const FENCE: &str = "<<<SOURCE>>>";

/// Marker appended by the call-context strategy when a function calls nothing in the corpus.
pub const EMPTY_CONTEXT_MARKER: &str = "\nCALLED FUNCTIONS\n(none)\n";

const CLASSIFICATION_TEMPLATE: &str = include_str!("../templates/classification.txt");
const SCORE_TEMPLATE: &str = include_str!("../templates/score_estimation.txt");
const INSTRUCTIONS_TEMPLATE: &str = include_str!("../templates/instructions.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PromptStrategy {
    Baseline,
    #[serde(rename = "cwe")]
    CweAndBadExamples,
    #[serde(rename = "callctx")]
    CallContext,
    #[serde(rename = "rules")]
    RuleBased,
    #[serde(rename = "score-est")]
    ScoreEstimation,
}

impl PromptStrategy {
    pub const ALL: [PromptStrategy; 5] = [
        PromptStrategy::Baseline,
        PromptStrategy::CweAndBadExamples,
        PromptStrategy::CallContext,
        PromptStrategy::RuleBased,
        PromptStrategy::ScoreEstimation,
    ];

    /// Command-line and directory name.
    pub fn slug(self) -> &'static str {
        match self {
            PromptStrategy::Baseline => "baseline",
            PromptStrategy::CweAndBadExamples => "cwe",
            PromptStrategy::CallContext => "callctx",
            PromptStrategy::RuleBased => "rules",
            PromptStrategy::ScoreEstimation => "score-est",
        }
    }

    /// Per-strategy template version, used in cache keys and run headers.
    pub fn template_version(self) -> String {
        format!("{}/{}", self.slug(), TEMPLATE_SET_VERSION)
    }

    /// Score estimation is function-level; the others are per practice.
    pub fn is_per_practice(self) -> bool {
        self != PromptStrategy::ScoreEstimation
    }
}

impl fmt::Display for PromptStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

impl FromStr for PromptStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PromptStrategy::ALL
            .into_iter()
            .find(|st| st.slug() == s)
            .ok_or_else(|| format!("unknown strategy `{s}` (expected baseline|cwe|callctx|rules|score-est)"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub strategy: PromptStrategy,
    pub function_id: String,
    pub practice_id: Option<PracticeId>,
    pub text: String,
    pub context_function_ids: Vec<String>,
    pub content_hash: String,
}

impl RenderedPrompt {
    fn new(
        strategy: PromptStrategy,
        function_id: &str,
        practice_id: Option<PracticeId>,
        text: String,
        context_function_ids: Vec<String>,
    ) -> Self {
        let content_hash = sha256_hex(&text);
        RenderedPrompt {
            strategy,
            function_id: function_id.to_string(),
            practice_id,
            text,
            context_function_ids,
            content_hash,
        }
    }

    pub fn template_version(&self) -> String {
        self.strategy.template_version()
    }

    pub fn estimated_tokens(&self) -> usize {
        estimate_tokens(&self.text)
    }
}

pub fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Token estimate used for budget checks: ceil(bytes / 4).
pub fn estimate_tokens(text: &str) -> usize {
    text.len().div_ceil(4)
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("practice {0} has no CWE mapping")]
    MissingCwe(PracticeId),
    #[error("practice {0} has no bad examples")]
    MissingExamples(PracticeId),
    #[error("practice {practice}: {clause} instruction is empty or a placeholder")]
    MissingClause { practice: PracticeId, clause: &'static str },
    #[error("verdict table is missing practice {0}")]
    IncompleteVerdicts(PracticeId),
    #[error("prompt for `{function_id}` needs ~{measured} tokens, over the budget of {budget}")]
    TokenBudgetExceeded {
        function_id: String,
        budget: usize,
        measured: usize,
    },
    #[error("call graph does not cover function `{0}`")]
    NotInGraph(String),
    #[error("function `{0}` is not in the corpus")]
    UnknownFunction(String),
    #[error("failed to read call graph {path}: {message}")]
    GraphIo { path: PathBuf, message: String },
    #[error("malformed call graph: {0}")]
    MalformedGraph(String),
    #[error("strategy {0} needs a practice")]
    PracticeRequired(PromptStrategy),
}

// Fencing.

/// Doubles every occurrence of [`FENCE`] so fence lines stay unambiguous.
pub fn escape_fenced(content: &str) -> String {
    content.replace(FENCE, &FENCE.repeat(2))
}

/// Inverse of [`escape_fenced`].
pub fn unescape_fenced(escaped: &str) -> String {
    escaped.replace(&FENCE.repeat(2), FENCE)
}

fn fenced_block(label: &str, content: &str) -> String {
    format!("{FENCE} {label}\n{}\n{FENCE}\n", escape_fenced(content))
}

/// Splits a rendered prompt back into its fenced `(label, content)` blocks.
pub fn extract_fenced_blocks(text: &str) -> Vec<(String, String)> {
    let mut blocks = Vec::new();
    let mut open: Option<(String, Vec<&str>)> = None;
    for line in text.split('\n') {
        match open.as_mut() {
            None => {
                if let Some(label) = line.strip_prefix(FENCE).and_then(|r| r.strip_prefix(' ')) {
                    open = Some((label.to_string(), Vec::new()));
                }
            }
            Some((_, lines)) => {
                if line == FENCE {
                    let (label, lines) = open.take().expect("open block");
                    blocks.push((label, unescape_fenced(&lines.join("\n"))));
                } else {
                    lines.push(line);
                }
            }
        }
    }
    blocks
}

/// Single-pass `{{name}}` substitution. Substituted values are not rescanned.
fn fill(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len() + 256);
    let mut rest = template;
    while let Some(start) = rest.find("{{") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        let end = after.find("}}").expect("unterminated placeholder in template");
        let name = &after[..end];
        let value = vars
            .iter()
            .find(|(k, _)| *k == name)
            .map(|(_, v)| *v)
            .unwrap_or_else(|| panic!("template placeholder `{name}` has no value"));
        out.push_str(value);
        rest = &after[end + 2..];
    }
    out.push_str(rest);
    out
}

fn classification_text(function: &FunctionRecord, practice: &Practice, practice_text: &str, supplement: &str) -> String {
    let id = practice.practice_id.to_string();
    let block = fenced_block(&function.function_id, &function.source_text);
    fill(
        CLASSIFICATION_TEMPLATE,
        &[
            ("template_set", TEMPLATE_SET_VERSION),
            ("practice_id", &id),
            ("practice_title", &practice.title),
            ("practice_text", practice_text.trim_end()),
            ("function_block", &block),
            ("supplement", supplement),
        ],
    )
}

/// Baseline: practice description, function source, Yes/No answer schema.
pub fn render_baseline(function: &FunctionRecord, practice: &Practice) -> RenderedPrompt {
    let text = classification_text(function, practice, &practice.description, "");
    RenderedPrompt::new(
        PromptStrategy::Baseline,
        &function.function_id,
        Some(practice.practice_id),
        text,
        Vec::new(),
    )
}

/// The CWE mapping and violation examples for a practice. Depends on the
/// practice alone, so it is byte-identical across functions.
pub fn cwe_block(practice: &Practice) -> Result<String, PromptError> {
    if practice.cwe_ids.is_empty() {
        return Err(PromptError::MissingCwe(practice.practice_id));
    }
    if practice.bad_examples.is_empty() {
        return Err(PromptError::MissingExamples(practice.practice_id));
    }
    let mut block = String::from("\nRELATED WEAKNESSES\n");
    for cwe in &practice.cwe_ids {
        block.push_str(&format!("- CWE-{cwe}\n"));
    }
    block.push_str("\nEXAMPLES OF VIOLATIONS\n");
    for (i, example) in practice.bad_examples.iter().enumerate() {
        block.push_str(&fenced_block(&format!("violation-{}", i + 1), example.trim_matches('\n')));
    }
    Ok(block)
}

/// CWE strategy: baseline plus CWE identifiers and bad examples.
pub fn render_cwe_examples(function: &FunctionRecord, practice: &Practice) -> Result<RenderedPrompt, PromptError> {
    let block = cwe_block(practice)?;
    let text = classification_text(function, practice, &practice.description, &block);
    Ok(RenderedPrompt::new(
        PromptStrategy::CweAndBadExamples,
        &function.function_id,
        Some(practice.practice_id),
        text,
        Vec::new(),
    ))
}

/// The INSTRUCTIONS block for a practice's rule clauses.
pub fn instructions_block(practice: &Practice) -> Result<String, PromptError> {
    let rules = &practice.rules;
    if is_placeholder(&rules.followed) {
        return Err(PromptError::MissingClause { practice: practice.practice_id, clause: "Followed" });
    }
    if is_placeholder(&rules.not_followed) {
        return Err(PromptError::MissingClause { practice: practice.practice_id, clause: "NotFollowed" });
    }
    Ok(fill(
        INSTRUCTIONS_TEMPLATE,
        &[("followed", rules.followed.trim()), ("not_followed", rules.not_followed.trim())],
    ))
}

/// Rule-based strategy: the baseline with the description replaced by the rule clauses.
pub fn render_rule_based(function: &FunctionRecord, practice: &Practice) -> Result<RenderedPrompt, PromptError> {
    let instructions = instructions_block(practice)?;
    let text = classification_text(function, practice, &instructions, "");
    Ok(RenderedPrompt::new(
        PromptStrategy::RuleBased,
        &function.function_id,
        Some(practice.practice_id),
        text,
        Vec::new(),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CallContextOptions {
    /// 1 includes direct callees only.
    pub depth: usize,
    pub token_budget: Option<usize>,
}

impl Default for CallContextOptions {
    fn default() -> Self {
        CallContextOptions { depth: 1, token_budget: None }
    }
}

/// Call-context strategy: baseline plus the source of every callee within `depth` hops.
pub fn render_call_context(
    function: &FunctionRecord,
    practice: &Practice,
    graph: &CallGraph,
    corpus: &Corpus,
    options: &CallContextOptions,
) -> Result<RenderedPrompt, PromptError> {
    if !graph.covers(&function.function_id) {
        return Err(PromptError::NotInGraph(function.function_id.clone()));
    }
    let context: Vec<&FunctionRecord> = graph
        .reachable(&function.function_id, options.depth)
        .into_iter()
        .filter_map(|id| corpus.get(&id))
        .collect();
    let supplement = if context.is_empty() {
        EMPTY_CONTEXT_MARKER.to_string()
    } else {
        let mut s = String::from("\nCALLED FUNCTIONS\n");
        for callee in &context {
            s.push_str(&fenced_block(&callee.function_id, &callee.source_text));
        }
        s
    };
    let text = classification_text(function, practice, &practice.description, &supplement);
    if let Some(budget) = options.token_budget {
        let measured = estimate_tokens(&text);
        if measured > budget {
            return Err(PromptError::TokenBudgetExceeded {
                function_id: function.function_id.clone(),
                budget,
                measured,
            });
        }
    }
    Ok(RenderedPrompt::new(
        PromptStrategy::CallContext,
        &function.function_id,
        Some(practice.practice_id),
        text,
        context.iter().map(|f| f.function_id.clone()).collect(),
    ))
}

/// Function-level prompt asking for a scalar score given all 16 verdicts.
pub fn render_score_estimation(
    function: &FunctionRecord,
    prior_verdicts: &BTreeMap<PracticeId, AdherenceLabel>,
) -> Result<RenderedPrompt, PromptError> {
    let mut table = String::new();
    for id in PracticeId::all() {
        let label = prior_verdicts.get(&id).ok_or(PromptError::IncompleteVerdicts(id))?;
        table.push_str(&format!("Practice {id}: {label}\n"));
    }
    let block = fenced_block(&function.function_id, &function.source_text);
    let text = fill(
        SCORE_TEMPLATE,
        &[
            ("template_set", TEMPLATE_SET_VERSION),
            ("function_block", &block),
            ("verdict_table", &table),
        ],
    );
    Ok(RenderedPrompt::new(
        PromptStrategy::ScoreEstimation,
        &function.function_id,
        None,
        text,
        Vec::new(),
    ))
}

// Call resolution.

#[derive(Debug, Clone, PartialEq, Eq)]
enum Token {
    Ident(String),
    Punct(char),
}

/// Identifiers and punctuation of Java-like source, with comments and
/// string/char literals removed.
fn tokenize(source: &str) -> Vec<Token> {
    let chars: Vec<char> = source.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let next = chars.get(i + 1).copied();
        if c == '/' && next == Some('/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
        } else if c == '/' && next == Some('*') {
            i += 2;
            while i < chars.len() && !(chars[i] == '*' && chars.get(i + 1) == Some(&'/')) {
                i += 1;
            }
            i += 2;
        } else if c == '"' && next == Some('"') && chars.get(i + 2) == Some(&'"') {
            // text block
            i += 3;
            while i < chars.len() && !(chars[i] == '"' && chars.get(i + 1) == Some(&'"') && chars.get(i + 2) == Some(&'"')) {
                i += if chars[i] == '\\' { 2 } else { 1 };
            }
            i += 3;
        } else if c == '"' || c == '\'' {
            i += 1;
            while i < chars.len() && chars[i] != c && chars[i] != '\n' {
                i += if chars[i] == '\\' { 2 } else { 1 };
            }
            i += 1;
        } else if c.is_alphabetic() || c == '_' || c == '$' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '$') {
                i += 1;
            }
            tokens.push(Token::Ident(chars[start..i].iter().collect()));
        } else if c.is_numeric() {
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '.' || chars[i] == '_') {
                i += 1;
            }
        } else {
            if !c.is_whitespace() {
                tokens.push(Token::Punct(c));
            }
            i += 1;
        }
    }
    tokens
}

const NON_CALL_KEYWORDS: &[&str] = &[
    "if", "for", "while", "switch", "catch", "synchronized", "return", "new", "throw", "super", "this",
    "assert", "try", "else", "do", "case", "instanceof", "yield",
];

fn matching_paren(tokens: &[Token], open: usize) -> Option<usize> {
    let mut depth = 0usize;
    for (j, t) in tokens.iter().enumerate().skip(open) {
        match t {
            Token::Punct('(') => depth += 1,
            Token::Punct(')') => {
                depth -= 1;
                if depth == 0 {
                    return Some(j);
                }
            }
            _ => {}
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum NameUse {
    Declaration,
    Call,
}

/// Every `name(` occurrence, classified as a method declaration (followed
/// by a body or `throws`) or a call.
fn name_uses(source: &str) -> Vec<(String, NameUse)> {
    let tokens = tokenize(source);
    let mut uses = Vec::new();
    for i in 0..tokens.len() {
        let Token::Ident(name) = &tokens[i] else { continue };
        if tokens.get(i + 1) != Some(&Token::Punct('(')) || NON_CALL_KEYWORDS.contains(&name.as_str()) {
            continue;
        }
        if i > 0 && tokens[i - 1] == Token::Ident("new".into()) {
            continue;
        }
        let kind = match matching_paren(&tokens, i + 1).and_then(|j| tokens.get(j + 1)) {
            Some(Token::Punct('{')) => NameUse::Declaration,
            Some(Token::Ident(t)) if t == "throws" => NameUse::Declaration,
            _ => NameUse::Call,
        };
        uses.push((name.clone(), kind));
    }
    uses
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CallResolution {
    /// Corpus function ids, in source order of first call.
    pub callees: Vec<String>,
    /// Called names declared in the function's own source.
    pub local: Vec<String>,
    /// Called names that match nothing, or more than one candidate, in the corpus.
    pub unresolved: Vec<String>,
}

fn simple_name(function_id: &str) -> &str {
    function_id
        .rsplit(['.', '#', ':', '/'])
        .next()
        .unwrap_or(function_id)
}

fn same_variant_family(a: &VariantKind, b: &VariantKind) -> bool {
    a.tag() == b.tag()
}

fn resolve_name(name: &str, function: &FunctionRecord, corpus: &Corpus) -> Option<String> {
    let declared = function.declared_callees.iter().flatten().find(|id| {
        corpus.get(id).map(|r| r.operation_name == name).unwrap_or(false) || simple_name(id) == name
    });
    if let Some(id) = declared {
        return corpus.contains(id).then(|| id.clone());
    }
    let candidates: Vec<&FunctionRecord> = corpus
        .records()
        .iter()
        .filter(|r| r.operation_name == name && r.function_id != function.function_id)
        .collect();
    let unique = |rs: Vec<&&FunctionRecord>| (rs.len() == 1).then(|| rs[0].function_id.clone());
    unique(
        candidates
            .iter()
            .filter(|r| r.service_id == function.service_id && same_variant_family(&r.variant, &function.variant))
            .collect(),
    )
    .or_else(|| unique(candidates.iter().filter(|r| r.service_id == function.service_id).collect()))
    .or_else(|| unique(candidates.iter().collect()))
}

/// Lexical call resolution: identifiers directly before `(` in call
/// position, matched against corpus operation names and declared callees.
pub fn resolve_calls(function: &FunctionRecord, corpus: &Corpus) -> CallResolution {
    let uses = name_uses(&function.source_text);
    let declared_here: BTreeSet<&str> = uses
        .iter()
        .filter(|(_, k)| *k == NameUse::Declaration)
        .map(|(n, _)| n.as_str())
        .collect();
    let mut out = CallResolution::default();
    let mut seen = BTreeSet::new();
    for (name, kind) in &uses {
        if *kind != NameUse::Call || !seen.insert(name.as_str()) {
            continue;
        }
        if declared_here.contains(name.as_str()) {
            out.local.push(name.clone());
        } else if let Some(id) = resolve_name(name, function, corpus) {
            if !out.callees.contains(&id) {
                out.callees.push(id);
            }
        } else {
            out.unresolved.push(name.clone());
        }
    }
    out
}

/// function_id → ordered callee ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CallGraph {
    edges: BTreeMap<String, Vec<String>>,
    external: BTreeSet<String>,
    warnings: Vec<String>,
}

impl CallGraph {
    /// Uses each record's declared callees when present, the lexical resolver otherwise.
    pub fn from_corpus(corpus: &Corpus) -> Self {
        let mut edges = BTreeMap::new();
        for rec in corpus.records() {
            let callees = match &rec.declared_callees {
                Some(declared) => declared.clone(),
                None => resolve_calls(rec, corpus).callees,
            };
            edges.insert(rec.function_id.clone(), callees);
        }
        CallGraph::with_edges(edges, corpus)
    }

    fn with_edges(edges: BTreeMap<String, Vec<String>>, corpus: &Corpus) -> Self {
        let mut external = BTreeSet::new();
        let mut warnings = Vec::new();
        for (caller, callees) in &edges {
            for id in std::iter::once(caller).chain(callees) {
                if !corpus.contains(id) && external.insert(id.clone()) {
                    warnings.push(format!("call graph references `{id}`, which is not in the corpus"));
                }
            }
        }
        CallGraph { edges, external, warnings }
    }

    pub fn covers(&self, function_id: &str) -> bool {
        self.edges.contains_key(function_id)
    }

    pub fn callees(&self, function_id: &str) -> &[String] {
        self.edges.get(function_id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn is_external(&self, function_id: &str) -> bool {
        self.external.contains(function_id)
    }

    pub fn edge_count(&self) -> usize {
        self.edges.values().map(Vec::len).sum()
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Functions within `depth` hops, breadth-first, each once, excluding the start.
    pub fn reachable(&self, start: &str, depth: usize) -> Vec<String> {
        let mut seen = BTreeSet::from([start.to_string()]);
        let mut order = Vec::new();
        let mut queue = VecDeque::from([(start.to_string(), 0usize)]);
        while let Some((id, d)) = queue.pop_front() {
            if d == depth {
                continue;
            }
            for callee in self.callees(&id) {
                if seen.insert(callee.clone()) {
                    order.push(callee.clone());
                    queue.push_back((callee.clone(), d + 1));
                }
            }
        }
        order
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.edges).expect("graph serializes")
    }
}

/// Parses a call graph in the `{"caller": ["callee", ...]}` format.
pub fn parse_call_graph(text: &str, corpus: &Corpus) -> Result<CallGraph, PromptError> {
    let edges: BTreeMap<String, Vec<String>> =
        serde_json::from_str(text).map_err(|e| PromptError::MalformedGraph(e.to_string()))?;
    Ok(CallGraph::with_edges(edges, corpus))
}

pub fn import_call_graph(path: &Path, corpus: &Corpus) -> Result<CallGraph, PromptError> {
    let text = fs::read_to_string(path).map_err(|e| PromptError::GraphIo {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    parse_call_graph(&text, corpus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::practices::{Catalog, RuleInstructions};
    use std::path::PathBuf;

    fn func(id: &str, op: &str, source: &str) -> FunctionRecord {
        FunctionRecord {
            function_id: id.into(),
            service_id: "svc".into(),
            operation_name: op.into(),
            variant: VariantKind::Secure,
            source_text: source.into(),
            source_file: PathBuf::from(format!("{id}.java")),
            declared_callees: None,
        }
    }

    fn p1() -> Practice {
        Catalog::builtin().get(PracticeId::new(1).unwrap()).clone()
    }

    #[test]
    fn baseline_has_description_source_and_one_schema() {
        let f = func("f", "f", "void f(String s) { use(s); }\n");
        let prompt = render_baseline(&f, &p1());
        assert!(prompt.text.contains(&p1().description));
        assert!(prompt.text.contains(&f.source_text));
        assert_eq!(prompt.text.matches("ANSWER FORMAT").count(), 1);
        assert_eq!(prompt.text.matches("Applicability: Yes|No").count(), 1);
        assert_eq!(prompt.content_hash, sha256_hex(&prompt.text));
        assert_eq!(render_baseline(&f, &p1()).content_hash, prompt.content_hash);
    }

    #[test]
    fn fence_in_source_is_escaped_and_recoverable() {
        let nasty = format!("void f() {{\n  String s = \"{FENCE}\";\n}}\n{FENCE}\n{FENCE} g\n{FENCE}{FENCE}\n");
        let f = func("f", "f", &nasty);
        let prompt = render_baseline(&f, &p1());
        let blocks = extract_fenced_blocks(&prompt.text);
        assert_eq!(blocks, vec![("f".to_string(), nasty.clone())]);
        assert_eq!(unescape_fenced(&escape_fenced(&nasty)), nasty);
    }

    #[test]
    fn cwe_prompt_lists_practice_one_cwes() {
        let f = func("f", "f", "void f() {}\n");
        let prompt = render_cwe_examples(&f, &p1()).unwrap();
        for cwe in ["CWE-20\n", "CWE-602\n", "CWE-807\n"] {
            assert!(prompt.text.contains(cwe), "{cwe}");
        }
    }

    #[test]
    fn cwe_block_is_constant_across_functions() {
        let a = render_cwe_examples(&func("a", "a", "void a() {}\n"), &p1()).unwrap();
        let b = render_cwe_examples(&func("b", "b", "int b(int x) { return x; }\n"), &p1()).unwrap();
        let block = cwe_block(&p1()).unwrap();
        assert!(a.text.contains(&block) && b.text.contains(&block));
    }

    #[test]
    fn cwe_prompt_requires_mapping() {
        let mut p = p1();
        p.cwe_ids.clear();
        assert_eq!(
            render_cwe_examples(&func("a", "a", "void a() {}\n"), &p),
            Err(PromptError::MissingCwe(p.practice_id))
        );
        let mut p = p1();
        p.bad_examples.clear();
        assert!(matches!(render_cwe_examples(&func("a", "a", "x\n"), &p), Err(PromptError::MissingExamples(_))));
    }

    #[test]
    fn rule_prompt_carries_both_clauses() {
        let f = func("f", "f", "void f() {}\n");
        let prompt = render_rule_based(&f, &p1()).unwrap();
        assert!(prompt.text.contains("INSTRUCTIONS"));
        assert!(prompt.text.contains(&p1().rules.followed));
        assert!(prompt.text.contains(&p1().rules.not_followed));
        assert!(prompt.text.contains("server-side validation"));
        assert!(prompt.text.contains("client-side validation"));
        assert!(!prompt.text.contains(&p1().description));
        assert_eq!(render_rule_based(&f, &p1()).unwrap().content_hash, prompt.content_hash);
    }

    #[test]
    fn placeholder_instructions_are_rejected() {
        let mut p = p1();
        p.rules = RuleInstructions { followed: "<followed>".into(), not_followed: "TBD".into() };
        assert!(matches!(
            render_rule_based(&func("f", "f", "x\n"), &p),
            Err(PromptError::MissingClause { clause: "Followed", .. })
        ));
    }

    fn all_labels(label: AdherenceLabel) -> BTreeMap<PracticeId, AdherenceLabel> {
        PracticeId::all().map(|p| (p, label)).collect()
    }

    #[test]
    fn score_prompt_lists_sixteen_rows_in_order() {
        let f = func("f", "f", "void f() {}\n");
        let prompt = render_score_estimation(&f, &all_labels(AdherenceLabel::Followed)).unwrap();
        assert_eq!(prompt.text.matches(": Followed\n").count(), 16);
        assert!(prompt.text.contains("SCORE: <number between 0 and 1>"));
        assert_eq!(prompt.practice_id, None);

        let mut mixed = all_labels(AdherenceLabel::NotApplicable);
        mixed.insert(PracticeId::new(10).unwrap(), AdherenceLabel::NotFollowed);
        let text = render_score_estimation(&f, &mixed).unwrap().text;
        let positions: Vec<usize> = PracticeId::all()
            .map(|p| text.find(&format!("Practice {p}: ")).unwrap())
            .collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]));
        assert!(text.contains("Practice 10: NotFollowed\n"));
    }

    #[test]
    fn score_prompt_needs_sixteen_rows() {
        let mut labels = all_labels(AdherenceLabel::Followed);
        labels.remove(&PracticeId::new(16).unwrap());
        assert!(matches!(
            render_score_estimation(&func("f", "f", "x\n"), &labels),
            Err(PromptError::IncompleteVerdicts(p)) if p.get() == 16
        ));
    }

    fn corpus_of(records: Vec<FunctionRecord>) -> Corpus {
        Corpus::from_records(Some("java".into()), records).unwrap()
    }

    #[test]
    fn sanitize_call_resolves_to_helper() {
        let main = func("svc.enter", "enter", "public void enter(String s) {\n  String t = sanitize(s);\n  stmt.executeQuery(t);\n}\n");
        let helper = func("svc.sanitize", "sanitize", "static String sanitize(String s) { return s.replace(\"'\", \"''\"); }\n");
        let corpus = corpus_of(vec![main.clone(), helper]);
        let r = resolve_calls(&main, &corpus);
        assert_eq!(r.callees, vec!["svc.sanitize".to_string()]);
        assert_eq!(r.unresolved, vec!["executeQuery".to_string()]);
    }

    #[test]
    fn no_calls_no_edges() {
        let f = func("f", "f", "int f(int a, int b) {\n  return a + b;\n}\n");
        let r = resolve_calls(&f, &corpus_of(vec![f.clone()]));
        assert!(r.callees.is_empty() && r.unresolved.is_empty() && r.local.is_empty());
    }

    #[test]
    fn nested_calls_follow_source_order() {
        // tokens: f ( ) { foo ( bar ( x ) ) ; } -> foo first, then bar
        let f = func("f", "f", "void f() { foo(bar(x)); }\n");
        let corpus = corpus_of(vec![
            f.clone(),
            func("b", "bar", "int bar(int x) { return x; }\n"),
            func("a", "foo", "void foo(int x) {}\n"),
        ]);
        assert_eq!(resolve_calls(&f, &corpus).callees, vec!["a".to_string(), "b".to_string()]);
    }

    #[test]
    fn strings_comments_and_local_helpers_are_ignored() {
        let src = "void f(String s) {\n  // sanitize(s) is not called here\n  String q = \"sanitize(\" + s;\n  /* check(s) */\n  local(s);\n}\nprivate void local(String s) throws Exception {\n  if (s == null) return;\n}\n";
        let f = func("f", "f", src);
        let corpus = corpus_of(vec![
            f.clone(),
            func("s", "sanitize", "void sanitize() {}\n"),
            func("c", "check", "void check() {}\n"),
        ]);
        let r = resolve_calls(&f, &corpus);
        assert!(r.callees.is_empty(), "{r:?}");
        assert_eq!(r.local, vec!["local".to_string()]);
    }

    #[test]
    fn resolver_prefers_same_service_and_variant() {
        let mut main = func("s1.op.Vx0", "op", "void op() { helper(); }\n");
        main.service_id = "s1".into();
        let mut h_same = func("s1.helper.Vx0", "helper", "void helper() {}\n");
        h_same.service_id = "s1".into();
        let mut h_vuln = func("s1.helper.VxA", "helper", "void helper() {}\n");
        h_vuln.service_id = "s1".into();
        h_vuln.variant = VariantKind::FullyVulnerable;
        let mut h_other = func("s2.helper.Vx0", "helper", "void helper() {}\n");
        h_other.service_id = "s2".into();
        let corpus = corpus_of(vec![main.clone(), h_same, h_vuln, h_other]);
        assert_eq!(resolve_calls(&main, &corpus).callees, vec!["s1.helper.Vx0".to_string()]);
    }

    fn chain_corpus() -> Corpus {
        corpus_of(vec![
            func("a", "a", "void a(String s) { b(s); }\n"),
            func("b", "b", "void b(String s) { c(s); }\n"),
            func("c", "c", "void c(String s) { System.out.println(s); }\n"),
        ])
    }

    #[test]
    fn depth_one_context_includes_direct_callee_only() {
        let corpus = chain_corpus();
        let graph = CallGraph::from_corpus(&corpus);
        let a = corpus.get("a").unwrap();
        let prompt = render_call_context(a, &p1(), &graph, &corpus, &CallContextOptions::default()).unwrap();
        assert_eq!(prompt.context_function_ids, vec!["b".to_string()]);
        assert!(prompt.text.contains(&corpus.get("b").unwrap().source_text));
        assert!(!prompt.text.contains(&corpus.get("c").unwrap().source_text));

        let deep = render_call_context(a, &p1(), &graph, &corpus, &CallContextOptions { depth: 2, token_budget: None }).unwrap();
        assert_eq!(deep.context_function_ids, vec!["b".to_string(), "c".to_string()]);
    }

    #[test]
    fn leaf_context_differs_from_baseline_only_by_marker() {
        let corpus = chain_corpus();
        let graph = CallGraph::from_corpus(&corpus);
        let c = corpus.get("c").unwrap();
        let ctx = render_call_context(c, &p1(), &graph, &corpus, &CallContextOptions::default()).unwrap();
        let base = render_baseline(c, &p1());
        assert!(ctx.context_function_ids.is_empty());
        assert_eq!(ctx.text.replacen(EMPTY_CONTEXT_MARKER, "", 1), base.text);
    }

    #[test]
    fn over_budget_context_is_a_structured_error() {
        let corpus = chain_corpus();
        let graph = CallGraph::from_corpus(&corpus);
        let a = corpus.get("a").unwrap();
        let full = render_call_context(a, &p1(), &graph, &corpus, &CallContextOptions::default()).unwrap();
        let measured = full.estimated_tokens();
        let err = render_call_context(a, &p1(), &graph, &corpus, &CallContextOptions { depth: 1, token_budget: Some(measured - 1) })
            .unwrap_err();
        assert_eq!(
            err,
            PromptError::TokenBudgetExceeded { function_id: "a".into(), budget: measured - 1, measured }
        );
        assert!(render_call_context(a, &p1(), &graph, &corpus, &CallContextOptions { depth: 1, token_budget: Some(measured) }).is_ok());
    }

    #[test]
    fn imported_graphs() {
        let corpus = chain_corpus();
        let g = parse_call_graph(r#"{"a":["b"]}"#, &corpus).unwrap();
        assert_eq!(g.edge_count(), 1);
        assert!(g.warnings().is_empty());

        let g = parse_call_graph(r#"{"a":["lib.Util.trim", "b"]}"#, &corpus).unwrap();
        assert!(g.is_external("lib.Util.trim"));
        assert_eq!(g.warnings().len(), 1);
        assert_eq!(g.callees("a"), ["lib.Util.trim".to_string(), "b".to_string()]);

        let g = parse_call_graph("{}", &corpus).unwrap();
        assert_eq!(g.edge_count(), 0);
        assert!(parse_call_graph("[1,2]", &corpus).is_err());
    }

    #[test]
    fn token_estimate_rounds_up() {
        assert_eq!(estimate_tokens(""), 0);
        assert_eq!(estimate_tokens("abcd"), 1);
        assert_eq!(estimate_tokens("abcde"), 2);
    }

    #[test]
    fn strategy_slugs_round_trip() {
        for s in PromptStrategy::ALL {
            assert_eq!(s.slug().parse::<PromptStrategy>().unwrap(), s);
            let json = serde_json::to_string(&s).unwrap();
            assert_eq!(json, format!("\"{}\"", s.slug()));
        }
    }
}
