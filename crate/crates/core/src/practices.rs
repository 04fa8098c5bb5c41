//! The OWASP Input Validation practice catalog and practice weights.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::AdherenceLabel;

pub const PRACTICE_COUNT: usize = 16;

/// Tolerance on Σ w_i = 1 for in-memory weight vectors.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-12;

/// Tolerance when reading weights from a CSV file, whose values carry 12 decimals.
pub const WEIGHT_FILE_TOLERANCE: f64 = 1e-9;

const BUILTIN_CATALOG: &str = include_str!("../data/owasp_input_validation.toml");

/// Practice number in `1..=16`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct PracticeId(u8);

impl PracticeId {
    pub fn new(id: u8) -> Option<Self> {
        (1..=PRACTICE_COUNT as u8).contains(&id).then_some(PracticeId(id))
    }

    pub fn get(self) -> u8 {
        self.0
    }

    pub fn all() -> impl Iterator<Item = PracticeId> + Clone {
        (1..=PRACTICE_COUNT as u8).map(PracticeId)
    }
}

impl TryFrom<u8> for PracticeId {
    type Error = String;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        PracticeId::new(value).ok_or_else(|| format!("practice id {value} outside 1..=16"))
    }
}

impl From<PracticeId> for u8 {
    fn from(id: PracticeId) -> u8 {
        id.0
    }
}

impl FromStr for PracticeId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let n: u8 = s.trim().parse().map_err(|_| format!("invalid practice id `{s}`"))?;
        PracticeId::try_from(n)
    }
}

impl fmt::Display for PracticeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleInstructions {
    pub followed: String,
    pub not_followed: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Practice {
    #[serde(rename = "id")]
    pub practice_id: PracticeId,
    pub title: String,
    pub description: String,
    #[serde(default)]
    pub cwe_ids: Vec<u32>,
    #[serde(default)]
    pub bad_examples: Vec<String>,
    pub rules: RuleInstructions,
    #[serde(default)]
    pub cve_count: u64,
}

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("malformed catalog: {0}")]
    Parse(String),
    #[error("catalog lists practice {0} more than once")]
    DuplicatePractice(PracticeId),
    #[error("catalog is missing practice {0}")]
    MissingPractice(PracticeId),
    #[error("practice {practice}: {clause} clause is empty or a placeholder")]
    MissingClause { practice: PracticeId, clause: &'static str },
    #[error("practice {0}: empty description")]
    EmptyDescription(PracticeId),
    #[error("practice {practice}: bad example {index} has {lines} lines (allowed 1..=10)")]
    ExampleLength { practice: PracticeId, index: usize, lines: usize },
    #[error("practice {0}: CWE id 0 is not valid")]
    InvalidCwe(PracticeId),
}

/// True when a text carries no real content: blank, punctuation only, or a
/// conventional stand-in such as `TODO` or `<...>`.
pub fn is_placeholder(text: &str) -> bool {
    let t = text.trim();
    if t.is_empty() || !t.chars().any(char::is_alphanumeric) {
        return true;
    }
    let lower = t.to_ascii_lowercase();
    if matches!(
        lower.trim_end_matches(['.', ':', ';']),
        "todo" | "tbd" | "fixme" | "placeholder" | "n/a" | "none" | "xxx"
    ) {
        return true;
    }
    (t.starts_with('<') && t.ends_with('>') && !t[1..t.len() - 1].contains(['<', '>']))
        || (t.starts_with("{{") && t.ends_with("}}"))
}

impl Practice {
    pub fn validate(&self) -> Result<(), CatalogError> {
        let id = self.practice_id;
        if self.description.trim().is_empty() {
            return Err(CatalogError::EmptyDescription(id));
        }
        if is_placeholder(&self.rules.followed) {
            return Err(CatalogError::MissingClause { practice: id, clause: "Followed" });
        }
        if is_placeholder(&self.rules.not_followed) {
            return Err(CatalogError::MissingClause { practice: id, clause: "NotFollowed" });
        }
        for (index, example) in self.bad_examples.iter().enumerate() {
            let lines = example.trim_matches('\n').lines().count();
            if !(1..=10).contains(&lines) {
                return Err(CatalogError::ExampleLength { practice: id, index, lines });
            }
        }
        if self.cwe_ids.contains(&0) {
            return Err(CatalogError::InvalidCwe(id));
        }
        Ok(())
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CatalogDoc {
    #[serde(default)]
    version: Option<String>,
    practice: Vec<Practice>,
}

/// All 16 practices, indexed by id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Catalog {
    version: String,
    practices: BTreeMap<PracticeId, Practice>,
}

impl Catalog {
    pub fn parse(text: &str) -> Result<Self, CatalogError> {
        let doc: CatalogDoc = toml::from_str(text).map_err(|e| CatalogError::Parse(e.to_string()))?;
        let mut practices = BTreeMap::new();
        for p in doc.practice {
            p.validate()?;
            let id = p.practice_id;
            if practices.insert(id, p).is_some() {
                return Err(CatalogError::DuplicatePractice(id));
            }
        }
        if let Some(missing) = PracticeId::all().find(|id| !practices.contains_key(id)) {
            return Err(CatalogError::MissingPractice(missing));
        }
        Ok(Catalog {
            version: doc.version.unwrap_or_else(|| "unversioned".into()),
            practices,
        })
    }

    /// The catalog shipped with the crate.
    pub fn builtin() -> Self {
        Catalog::parse(BUILTIN_CATALOG).expect("builtin catalog is valid")
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn get(&self, id: PracticeId) -> &Practice {
        &self.practices[&id]
    }

    pub fn practices(&self) -> impl Iterator<Item = &Practice> {
        self.practices.values()
    }

    pub fn cve_counts(&self) -> BTreeMap<PracticeId, u64> {
        self.practices.iter().map(|(id, p)| (*id, p.cve_count)).collect()
    }
}

pub fn load_catalog(path: &Path) -> Result<Catalog, CatalogError> {
    let text = fs::read_to_string(path).map_err(|source| CatalogError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Catalog::parse(&text)
}

#[derive(Debug, Error, PartialEq)]
pub enum WeightError {
    #[error("no practices given")]
    Empty,
    #[error("all CVE counts are zero")]
    AllZeroCounts,
    #[error("weight for practice {practice} must be positive and finite, got {weight}")]
    NonPositive { practice: PracticeId, weight: f64 },
    #[error("weights sum to {sum}, expected 1 within {tolerance:e}")]
    NotNormalized { sum: f64, tolerance: f64 },
    #[error("no label for weighted practice {0}")]
    MissingLabel(PracticeId),
    #[error("label given for practice {0} which carries no weight")]
    UnweightedLabel(PracticeId),
    #[error("every practice is NotApplicable")]
    AllNotApplicable,
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("duplicate practice {0}")]
    Duplicate(PracticeId),
}

/// Practice weights, each in (0, 1], summing to 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightVector(BTreeMap<PracticeId, f64>);

impl WeightVector {
    pub fn new(weights: BTreeMap<PracticeId, f64>) -> Result<Self, WeightError> {
        Self::with_tolerance(weights, WEIGHT_SUM_TOLERANCE)
    }

    fn with_tolerance(weights: BTreeMap<PracticeId, f64>, tolerance: f64) -> Result<Self, WeightError> {
        if weights.is_empty() {
            return Err(WeightError::Empty);
        }
        for (&practice, &weight) in &weights {
            if !(weight.is_finite() && weight > 0.0 && weight <= 1.0) {
                return Err(WeightError::NonPositive { practice, weight });
            }
        }
        let sum: f64 = weights.values().sum();
        if (sum - 1.0).abs() > tolerance {
            return Err(WeightError::NotNormalized { sum, tolerance });
        }
        Ok(WeightVector(weights))
    }

    /// Scales positive values to sum to one.
    fn normalized(values: BTreeMap<PracticeId, f64>) -> Result<Self, WeightError> {
        let total: f64 = values.values().sum();
        WeightVector::new(values.into_iter().map(|(k, v)| (k, v / total)).collect())
    }

    pub fn uniform(practices: impl IntoIterator<Item = PracticeId>) -> Result<Self, WeightError> {
        WeightVector::normalized(practices.into_iter().map(|p| (p, 1.0)).collect())
    }

    /// Uniform weights over all 16 practices.
    pub fn uniform16() -> Self {
        WeightVector::uniform(PracticeId::all()).expect("16 practices")
    }

    pub fn get(&self, id: PracticeId) -> Option<f64> {
        self.0.get(&id).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (PracticeId, f64)> + '_ {
        self.0.iter().map(|(k, v)| (*k, *v))
    }

    pub fn practices(&self) -> impl Iterator<Item = PracticeId> + '_ {
        self.0.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.0.values().sum()
    }

    pub fn as_map(&self) -> &BTreeMap<PracticeId, f64> {
        &self.0
    }

    /// CSV `practice_id,weight` with 12 decimals.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("practice_id,weight\n");
        for (id, w) in &self.0 {
            out.push_str(&format!("{id},{w:.12}\n"));
        }
        out
    }

    /// Reads `practice_id,weight` CSV. The file sum must be within
    /// [`WEIGHT_FILE_TOLERANCE`] of one; values are then renormalized.
    pub fn from_csv(text: &str) -> Result<Self, WeightError> {
        let rows = parse_two_column_csv(text, "weight")?;
        let mut weights = BTreeMap::new();
        for (line, id, token) in rows {
            let w: f64 = token.parse().map_err(|_| WeightError::Malformed {
                line,
                message: format!("invalid weight `{token}`"),
            })?;
            if weights.insert(id, w).is_some() {
                return Err(WeightError::Duplicate(id));
            }
        }
        WeightVector::with_tolerance(weights.clone(), WEIGHT_FILE_TOLERANCE)?;
        WeightVector::normalized(weights)
    }
}

fn parse_two_column_csv(text: &str, value_column: &str) -> Result<Vec<(usize, PracticeId, String)>, WeightError> {
    let mut rows = Vec::new();
    let mut seen_header = false;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (a, b) = trimmed.split_once(',').ok_or_else(|| WeightError::Malformed {
            line,
            message: "expected two comma-separated fields".into(),
        })?;
        if !seen_header {
            seen_header = true;
            if a.trim() != "practice_id" || b.trim() != value_column {
                return Err(WeightError::Malformed {
                    line,
                    message: format!("header must be `practice_id,{value_column}`"),
                });
            }
            continue;
        }
        let id: PracticeId = a.parse().map_err(|message| WeightError::Malformed { line, message })?;
        rows.push((line, id, b.trim().to_string()));
    }
    Ok(rows)
}

/// Reads a CVE-counts CSV (`practice_id,count`).
pub fn parse_cve_counts(text: &str) -> Result<BTreeMap<PracticeId, u64>, WeightError> {
    let mut counts = BTreeMap::new();
    for (line, id, token) in parse_two_column_csv(text, "count")? {
        let c: u64 = token.parse().map_err(|_| WeightError::Malformed {
            line,
            message: format!("invalid count `{token}`"),
        })?;
        if counts.insert(id, c).is_some() {
            return Err(WeightError::Duplicate(id));
        }
    }
    Ok(counts)
}

/// Proportional weights from CVE occurrence counts. A zero count is raised
/// to a floor of one before normalizing so every practice keeps w_i > 0.
pub fn derive_weights(cve_counts: &BTreeMap<PracticeId, u64>) -> Result<WeightVector, WeightError> {
    if cve_counts.is_empty() {
        return Err(WeightError::Empty);
    }
    if cve_counts.values().all(|&c| c == 0) {
        return Err(WeightError::AllZeroCounts);
    }
    WeightVector::normalized(cve_counts.iter().map(|(&id, &c)| (id, c.max(1) as f64)).collect())
}

/// Drops NotApplicable practices and rescales the survivors to sum to one.
pub fn redistribute_for_na(
    weights: &WeightVector,
    labels: &BTreeMap<PracticeId, AdherenceLabel>,
) -> Result<WeightVector, WeightError> {
    if let Some(extra) = labels.keys().find(|id| weights.get(**id).is_none()) {
        return Err(WeightError::UnweightedLabel(*extra));
    }
    let mut kept = BTreeMap::new();
    for (id, w) in weights.iter() {
        match labels.get(&id) {
            None => return Err(WeightError::MissingLabel(id)),
            Some(AdherenceLabel::NotApplicable) => {}
            Some(_) => {
                kept.insert(id, w);
            }
        }
    }
    if kept.is_empty() {
        return Err(WeightError::AllNotApplicable);
    }
    if kept.len() == weights.len() {
        return Ok(weights.clone());
    }
    WeightVector::normalized(kept)
}
