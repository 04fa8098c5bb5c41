//! Trustworthiness scoring with the LSP weighted power mean.
//!
//! For a function with applicable practices i and binary adherence r_i, the
//! score is the weighted power mean `(Σ w_i · r_i^r)^(1/r)`. The default
//! exponent r = -1 is the harmonic "weak simultaneity" operator: one
//! violated practice drags the whole score down. NotApplicable practices are
//! removed and their weight is spread proportionally over the rest.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{AdherenceLabel, GroundTruthMatrix};
use crate::gateway::AssessmentRun;
use crate::practices::{redistribute_for_na, PracticeId, WeightError, WeightVector, WEIGHT_SUM_TOLERANCE};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ZeroMode {
    /// NotFollowed maps to 0, so any violation yields a score of exactly 0 when r < 0.
    PureZero,
    /// NotFollowed maps to `epsilon`.
    Floor { epsilon: f64 },
}

impl Default for ZeroMode {
    fn default() -> Self {
        ZeroMode::Floor { epsilon: 0.01 }
    }
}

impl ZeroMode {
    fn violated_value(self) -> f64 {
        match self {
            ZeroMode::PureZero => 0.0,
            ZeroMode::Floor { epsilon } => epsilon,
        }
    }

    pub fn describe(self) -> String {
        match self {
            ZeroMode::PureZero => "pure_zero".into(),
            ZeroMode::Floor { epsilon } => format!("floor({epsilon})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HierarchyChild {
    Practice(PracticeId),
    Node(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HierarchyNode {
    pub node_id: String,
    pub children: Vec<HierarchyChild>,
    pub node_weights: Vec<f64>,
    pub node_exponent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hierarchy {
    pub root: String,
    pub nodes: Vec<HierarchyNode>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QualityModelConfig {
    pub weights: WeightVector,
    pub exponent_r: f64,
    pub zero_mode: ZeroMode,
    pub hierarchy: Option<Hierarchy>,
    /// Carried for completeness of the model tuple; not used by scoring.
    pub thresholds: Option<serde_json::Value>,
}

impl QualityModelConfig {
    pub fn new(weights: WeightVector) -> Self {
        QualityModelConfig {
            weights,
            exponent_r: -1.0,
            zero_mode: ZeroMode::default(),
            hierarchy: None,
            thresholds: None,
        }
    }

    pub fn with_zero_mode(mut self, mode: ZeroMode) -> Self {
        self.zero_mode = mode;
        self
    }

    /// Checks the config. Returns warnings for allowed-but-unusual settings.
    pub fn validate(&self) -> Result<Vec<String>, QualityModelError> {
        let mut warnings = Vec::new();
        if !self.exponent_r.is_finite() {
            return Err(QualityModelError::InvalidConfig(format!("exponent_r must be finite, got {}", self.exponent_r)));
        }
        if self.exponent_r >= 0.0 {
            warnings.push(format!(
                "exponent_r = {} is not conjunctive (r < 0 expected)",
                self.exponent_r
            ));
        }
        if let ZeroMode::Floor { epsilon } = self.zero_mode {
            if !(epsilon > 0.0 && epsilon < 1.0) {
                return Err(QualityModelError::InvalidConfig(format!("floor epsilon must be in (0,1), got {epsilon}")));
            }
        }
        if let Some(h) = &self.hierarchy {
            validate_hierarchy(h, &self.weights)?;
        }
        Ok(warnings)
    }
}

fn validate_hierarchy(h: &Hierarchy, weights: &WeightVector) -> Result<(), QualityModelError> {
    let invalid = |m: String| Err(QualityModelError::InvalidConfig(m));
    let mut nodes = BTreeMap::new();
    for node in &h.nodes {
        if nodes.insert(node.node_id.as_str(), node).is_some() {
            return invalid(format!("hierarchy node `{}` defined twice", node.node_id));
        }
        if node.children.is_empty() || node.children.len() != node.node_weights.len() {
            return invalid(format!("node `{}` needs one weight per child", node.node_id));
        }
        if node.node_weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return invalid(format!("node `{}` has a non-positive weight", node.node_id));
        }
        let sum: f64 = node.node_weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return invalid(format!("node `{}` weights sum to {sum}", node.node_id));
        }
        if !node.node_exponent.is_finite() {
            return invalid(format!("node `{}` exponent must be finite", node.node_id));
        }
    }
    if !nodes.contains_key(h.root.as_str()) {
        return invalid(format!("root node `{}` is not defined", h.root));
    }
    // Walk from the root: every node reached once, no cycles, every practice once.
    let mut visited = BTreeSet::new();
    let mut leaves: BTreeMap<PracticeId, usize> = BTreeMap::new();
    let mut stack = vec![h.root.as_str()];
    while let Some(id) = stack.pop() {
        if !visited.insert(id) {
            return invalid(format!("node `{id}` is reachable twice (cycle or shared subtree)"));
        }
        let node = nodes.get(id).ok_or_else(|| QualityModelError::InvalidConfig(format!("unknown node `{id}`")))?;
        for child in &node.children {
            match child {
                HierarchyChild::Practice(p) => *leaves.entry(*p).or_default() += 1,
                HierarchyChild::Node(n) => stack.push(n.as_str()),
            }
        }
    }
    if visited.len() != nodes.len() {
        return invalid("hierarchy has nodes unreachable from the root".into());
    }
    for p in weights.practices() {
        match leaves.get(&p) {
            Some(1) => {}
            Some(n) => return invalid(format!("practice {p} appears {n} times in the hierarchy")),
            None => return invalid(format!("practice {p} is missing from the hierarchy")),
        }
    }
    if let Some(extra) = leaves.keys().find(|p| weights.get(**p).is_none()) {
        return invalid(format!("hierarchy practice {extra} has no weight"));
    }
    Ok(())
}

#[derive(Debug, Error, PartialEq)]
pub enum QualityModelError {
    #[error("invalid quality-model config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Weights(#[from] WeightError),
    #[error("function `{function_id}` has no verdict for practice {practice}")]
    IncompleteRun { function_id: String, practice: PracticeId },
    #[error("run is marked incomplete ({0} item errors)")]
    RunNotComplete(usize),
    #[error("run holds score-estimation verdicts, not classifications")]
    NotAClassificationRun,
    #[error("failed to read quality-model config: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrustScore {
    pub function_id: String,
    /// `None` when no practice applies.
    pub value: Option<f64>,
    pub applicable_count: usize,
    pub violated_practices: Vec<PracticeId>,
    pub mode_used: ZeroMode,
}

impl TrustScore {
    pub fn is_defined(&self) -> bool {
        self.value.is_some()
    }
}

/// Weighted power mean of values in [0, 1] with weights summing to one.
///
/// r < 0 with any zero value gives 0; r = 0 is the weighted geometric mean.
/// Equal values return that value exactly, and the result is clamped to
/// [min, max] of the inputs.
pub fn weighted_power_mean(values: &[f64], weights: &[f64], r: f64) -> f64 {
    assert_eq!(values.len(), weights.len());
    assert!(!values.is_empty());
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if min == max {
        return min;
    }
    let mean = if r == 0.0 {
        if min == 0.0 {
            0.0
        } else {
            values.iter().zip(weights).map(|(x, w)| w * x.ln()).sum::<f64>().exp()
        }
    } else if r < 0.0 && min == 0.0 {
        0.0
    } else {
        values
            .iter()
            .zip(weights)
            .map(|(x, w)| w * x.powf(r))
            .sum::<f64>()
            .powf(1.0 / r)
    };
    mean.clamp(min, max)
}

fn label_value(label: AdherenceLabel, mode: ZeroMode) -> f64 {
    match label {
        AdherenceLabel::Followed => 1.0,
        _ => mode.violated_value(),
    }
}

/// Scores one function from its per-practice labels.
pub fn trust_score(
    function_id: &str,
    labels: &BTreeMap<PracticeId, AdherenceLabel>,
    config: &QualityModelConfig,
) -> Result<TrustScore, QualityModelError> {
    let applicable: Vec<PracticeId> = config
        .weights
        .practices()
        .filter(|p| labels.get(p).is_some_and(|l| *l != AdherenceLabel::NotApplicable))
        .collect();
    let violated: Vec<PracticeId> = applicable
        .iter()
        .copied()
        .filter(|p| labels[p] == AdherenceLabel::NotFollowed)
        .collect();
    let weights = match redistribute_for_na(&config.weights, labels) {
        Ok(w) => w,
        Err(WeightError::AllNotApplicable) => {
            return Ok(TrustScore {
                function_id: function_id.to_string(),
                value: None,
                applicable_count: 0,
                violated_practices: Vec::new(),
                mode_used: config.zero_mode,
            })
        }
        Err(e) => return Err(e.into()),
    };
    let value = match &config.hierarchy {
        None => {
            let (vals, ws): (Vec<f64>, Vec<f64>) = weights
                .iter()
                .map(|(p, w)| (label_value(labels[&p], config.zero_mode), w))
                .unzip();
            weighted_power_mean(&vals, &ws, config.exponent_r)
        }
        Some(h) => hierarchy_score(h, labels, config.zero_mode)?
            .expect("at least one applicable practice"),
    };
    Ok(TrustScore {
        function_id: function_id.to_string(),
        value: Some(value),
        applicable_count: applicable.len(),
        violated_practices: violated,
        mode_used: config.zero_mode,
    })
}

/// Bottom-up evaluation. Subtrees with no applicable practice drop out and
/// their node weight is spread proportionally over the remaining siblings.
fn hierarchy_score(
    h: &Hierarchy,
    labels: &BTreeMap<PracticeId, AdherenceLabel>,
    mode: ZeroMode,
) -> Result<Option<f64>, QualityModelError> {
    let nodes: BTreeMap<&str, &HierarchyNode> = h.nodes.iter().map(|n| (n.node_id.as_str(), n)).collect();
    fn eval(
        id: &str,
        nodes: &BTreeMap<&str, &HierarchyNode>,
        labels: &BTreeMap<PracticeId, AdherenceLabel>,
        mode: ZeroMode,
    ) -> Result<Option<f64>, QualityModelError> {
        let node = nodes
            .get(id)
            .ok_or_else(|| QualityModelError::InvalidConfig(format!("unknown node `{id}`")))?;
        let mut vals = Vec::new();
        let mut ws = Vec::new();
        for (child, w) in node.children.iter().zip(&node.node_weights) {
            let v = match child {
                HierarchyChild::Practice(p) => match labels.get(p) {
                    None => return Err(WeightError::MissingLabel(*p).into()),
                    Some(AdherenceLabel::NotApplicable) => None,
                    Some(l) => Some(label_value(*l, mode)),
                },
                HierarchyChild::Node(n) => eval(n, nodes, labels, mode)?,
            };
            if let Some(v) = v {
                vals.push(v);
                ws.push(*w);
            }
        }
        if vals.is_empty() {
            return Ok(None);
        }
        let total: f64 = ws.iter().sum();
        let ws: Vec<f64> = ws.iter().map(|w| w / total).collect();
        Ok(Some(weighted_power_mean(&vals, &ws, node.node_exponent)))
    }
    eval(&h.root, &nodes, labels, mode)
}

/// Scores every function of a label table. Each function must carry a label
/// for every weighted practice.
pub fn score_label_table(
    table: &BTreeMap<String, BTreeMap<PracticeId, AdherenceLabel>>,
    config: &QualityModelConfig,
) -> Result<BTreeMap<String, TrustScore>, QualityModelError> {
    config.validate()?;
    let mut out = BTreeMap::new();
    for (fid, labels) in table {
        if let Some(p) = config.weights.practices().find(|p| !labels.contains_key(p)) {
            return Err(QualityModelError::IncompleteRun { function_id: fid.clone(), practice: p });
        }
        out.insert(fid.clone(), trust_score(fid, labels, config)?);
    }
    Ok(out)
}

/// Reference scores from the ground-truth labels.
pub fn reference_scores(
    truth: &GroundTruthMatrix,
    config: &QualityModelConfig,
) -> Result<BTreeMap<String, TrustScore>, QualityModelError> {
    score_label_table(&truth.by_function(), config)
}

/// Scores a classification run. Failed parses already carry `NotFollowed`.
pub fn score_run(
    run: &AssessmentRun,
    config: &QualityModelConfig,
) -> Result<BTreeMap<String, TrustScore>, QualityModelError> {
    if !run.header.strategy.is_per_practice() {
        return Err(QualityModelError::NotAClassificationRun);
    }
    if !run.is_complete() {
        return Err(QualityModelError::RunNotComplete(run.item_errors.len()));
    }
    score_label_table(&run.label_table(), config)
}

/// CSV `function_id,score,applicable_count,violated_ids`. Undefined scores print as `NA`.
pub fn scores_to_csv(scores: &BTreeMap<String, TrustScore>) -> String {
    let mut out = String::from("function_id,score,applicable_count,violated_ids\n");
    for s in scores.values() {
        let value = s.value.map(|v| format!("{v:.12}")).unwrap_or_else(|| "NA".into());
        let violated: Vec<String> = s.violated_practices.iter().map(|p| p.to_string()).collect();
        out.push_str(&format!("{},{},{},{}\n", s.function_id, value, s.applicable_count, violated.join(";")));
    }
    out
}

/// Parses the CSV written by [`scores_to_csv`] into function_id → optional score.
pub fn parse_scores_csv(text: &str) -> Result<BTreeMap<String, Option<f64>>, String> {
    let mut out = BTreeMap::new();
    let mut header_seen = false;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !header_seen {
            header_seen = true;
            if !line.starts_with("function_id,score") {
                return Err(format!("line {}: unexpected header", i + 1));
            }
            continue;
        }
        let mut parts = line.split(',');
        let fid = parts.next().ok_or_else(|| format!("line {}: empty", i + 1))?;
        let score = parts.next().ok_or_else(|| format!("line {}: missing score", i + 1))?;
        let value = if score == "NA" {
            None
        } else {
            Some(score.parse::<f64>().map_err(|_| format!("line {}: bad score `{score}`", i + 1))?)
        };
        out.insert(fid.to_string(), value);
    }
    Ok(out)
}

// Config file.

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WeightsSpec {
    Named(String),
    /// Practice number (as a string key) to weight.
    Explicit(BTreeMap<String, f64>),
}

/// On-disk quality-model config. Every field is optional; absent fields fall
/// back to the defaults (uniform weights unless the caller supplies others).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QualityModelFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<WeightsSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponent_r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zero_mode: Option<ZeroMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hierarchy: Option<Hierarchy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<serde_json::Value>,
}

impl QualityModelFile {
    pub fn parse(text: &str) -> Result<Self, QualityModelError> {
        serde_json::from_str(text).map_err(|e| QualityModelError::InvalidConfig(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, QualityModelError> {
        let text = fs::read_to_string(path).map_err(|e| QualityModelError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Builds a validated config, using `default_weights` unless the file names its own.
    pub fn resolve(&self, default_weights: &WeightVector) -> Result<QualityModelConfig, QualityModelError> {
        let weights = match &self.weights {
            None => default_weights.clone(),
            Some(WeightsSpec::Named(name)) if name == "uniform" => WeightVector::uniform16(),
            Some(WeightsSpec::Named(other)) => {
                return Err(QualityModelError::InvalidConfig(format!("unknown weights preset `{other}`")))
            }
            Some(WeightsSpec::Explicit(map)) => {
                let mut parsed = BTreeMap::new();
                for (k, w) in map {
                    let id: PracticeId = k
                        .trim()
                        .parse()
                        .map_err(|_| QualityModelError::InvalidConfig(format!("bad practice id `{k}` in weights")))?;
                    parsed.insert(id, *w);
                }
                WeightVector::new(parsed)?
            }
        };
        let config = QualityModelConfig {
            weights,
            exponent_r: self.exponent_r.unwrap_or(-1.0),
            zero_mode: self.zero_mode.unwrap_or_default(),
            hierarchy: self.hierarchy.clone(),
            thresholds: self.thresholds.clone(),
        };
        config.validate()?;
        Ok(config)
    }
}
