//! Function corpus, variant pairing and the ground-truth label matrix.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io;
use std::num::NonZeroU32;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::practices::{PracticeId, PRACTICE_COUNT};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("malformed manifest {path}: {message}")]
    Manifest { path: PathBuf, message: String },
    #[error("duplicate function_id `{0}`")]
    DuplicateFunction(String),
    #[error("function `{0}` has empty source text")]
    EmptySource(String),
    #[error("line_hint is only allowed on VxLine variants (function `{0}`)")]
    UnexpectedLineHint(String),
}

#[derive(Debug, Error)]
pub enum GroundTruthError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: unknown function_id `{function_id}`")]
    UnknownFunction { line: usize, function_id: String },
    #[error("line {line}: unknown practice_id `{token}`")]
    UnknownPractice { line: usize, token: String },
    #[error("line {line}: unparsable label `{token}` (expected 1, 0 or NA)")]
    BadLabel { line: usize, token: String },
    #[error("line {line}: duplicate entry for ({function_id}, {practice_id})")]
    Duplicate {
        line: usize,
        function_id: String,
        practice_id: PracticeId,
    },
    #[error("incomplete ground truth: missing ({function_id}, {practice_id})")]
    MissingPair {
        function_id: String,
        practice_id: PracticeId,
    },
    #[error("invalid curation_date `{0}` (expected YYYY-MM-DD)")]
    BadDate(String),
}

/// Three-valued adherence verdict. Encoded as `1`, `0` and `NA`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AdherenceLabel {
    Followed,
    NotFollowed,
    NotApplicable,
}

impl AdherenceLabel {
    pub const ALL: [AdherenceLabel; 3] = [
        AdherenceLabel::Followed,
        AdherenceLabel::NotFollowed,
        AdherenceLabel::NotApplicable,
    ];

    pub fn token(self) -> &'static str {
        match self {
            AdherenceLabel::Followed => "1",
            AdherenceLabel::NotFollowed => "0",
            AdherenceLabel::NotApplicable => "NA",
        }
    }

    /// Axis position in confusion matrices.
    pub fn index(self) -> usize {
        match self {
            AdherenceLabel::Followed => 0,
            AdherenceLabel::NotFollowed => 1,
            AdherenceLabel::NotApplicable => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AdherenceLabel::Followed => "Followed",
            AdherenceLabel::NotFollowed => "NotFollowed",
            AdherenceLabel::NotApplicable => "NotApplicable",
        }
    }
}

impl fmt::Display for AdherenceLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AdherenceLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "1" => Ok(AdherenceLabel::Followed),
            "0" => Ok(AdherenceLabel::NotFollowed),
            "NA" => Ok(AdherenceLabel::NotApplicable),
            other => Err(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VariantKind {
    /// Vx0
    Secure,
    /// VxA
    FullyVulnerable,
    /// VxLine
    SingleVulnerability { line_hint: Option<NonZeroU32> },
}

impl VariantKind {
    pub fn tag(&self) -> &'static str {
        match self {
            VariantKind::Secure => "Vx0",
            VariantKind::FullyVulnerable => "VxA",
            VariantKind::SingleVulnerability { .. } => "VxLine",
        }
    }

    pub fn line_hint(&self) -> Option<NonZeroU32> {
        match self {
            VariantKind::SingleVulnerability { line_hint } => *line_hint,
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionRecord {
    pub function_id: String,
    pub service_id: String,
    pub operation_name: String,
    pub variant: VariantKind,
    pub source_text: String,
    /// Relative path of the source file, as named in the manifest.
    pub source_file: PathBuf,
    /// `None` when the manifest omits the field; the call resolver fills the gap.
    pub declared_callees: Option<Vec<String>>,
}

// Wire format of the manifest.

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    language: Option<String>,
    services: Vec<ServiceDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ServiceDoc {
    service_id: String,
    operations: Vec<OperationDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OperationDoc {
    operation_name: String,
    variants: Vec<VariantDoc>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
enum VariantTag {
    Vx0,
    VxA,
    VxLine,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VariantDoc {
    variant: VariantTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    line_hint: Option<NonZeroU32>,
    source_file: PathBuf,
    function_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    declared_callees: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CorpusStats {
    pub services: usize,
    pub operations: usize,
    pub functions: usize,
    pub secure: usize,
    pub fully_vulnerable: usize,
    pub single_vulnerability: usize,
}

/// An indexed, immutable function corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    language: Option<String>,
    records: Vec<FunctionRecord>,
    index: BTreeMap<String, usize>,
    warnings: Vec<String>,
}

impl Corpus {
    /// Builds a corpus from already-loaded records, checking the record invariants.
    pub fn from_records(
        language: Option<String>,
        records: Vec<FunctionRecord>,
    ) -> Result<Self, CorpusError> {
        let mut index = BTreeMap::new();
        for (i, rec) in records.iter().enumerate() {
            if rec.source_text.trim().is_empty() {
                return Err(CorpusError::EmptySource(rec.function_id.clone()));
            }
            if index.insert(rec.function_id.clone(), i).is_some() {
                return Err(CorpusError::DuplicateFunction(rec.function_id.clone()));
            }
        }
        let mut warnings = Vec::new();
        for rec in &records {
            for callee in rec.declared_callees.iter().flatten() {
                if !index.contains_key(callee) {
                    warnings.push(format!(
                        "function `{}` declares callee `{}` which is not in the corpus",
                        rec.function_id, callee
                    ));
                }
            }
        }
        Ok(Corpus {
            language,
            records,
            index,
            warnings,
        })
    }

    pub fn language(&self) -> Option<&str> {
        self.language.as_deref()
    }

    /// Records in manifest order.
    pub fn records(&self) -> &[FunctionRecord] {
        &self.records
    }

    pub fn get(&self, function_id: &str) -> Option<&FunctionRecord> {
        self.index.get(function_id).map(|&i| &self.records[i])
    }

    pub fn contains(&self, function_id: &str) -> bool {
        self.index.contains_key(function_id)
    }

    /// Function ids in ascending order.
    pub fn function_ids(&self) -> impl Iterator<Item = &str> {
        self.index.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Non-fatal findings from loading, such as dangling declared callees.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn stats(&self) -> CorpusStats {
        let services: BTreeSet<&str> = self.records.iter().map(|r| r.service_id.as_str()).collect();
        let operations: BTreeSet<(&str, &str)> = self
            .records
            .iter()
            .map(|r| (r.service_id.as_str(), r.operation_name.as_str()))
            .collect();
        let count = |pred: fn(&VariantKind) -> bool| self.records.iter().filter(|r| pred(&r.variant)).count();
        CorpusStats {
            services: services.len(),
            operations: operations.len(),
            functions: self.records.len(),
            secure: count(|v| matches!(v, VariantKind::Secure)),
            fully_vulnerable: count(|v| matches!(v, VariantKind::FullyVulnerable)),
            single_vulnerability: count(|v| matches!(v, VariantKind::SingleVulnerability { .. })),
        }
    }

    /// Writes a manifest plus one source file per record under `dir`.
    pub fn write_to_dir(&self, dir: &Path) -> Result<PathBuf, CorpusError> {
        let io_err = |path: &Path| {
            let path = path.to_path_buf();
            move |source| CorpusError::Io { path, source }
        };
        let mut services: Vec<ServiceDoc> = Vec::new();
        for rec in &self.records {
            let target = dir.join(&rec.source_file);
            if let Some(parent) = target.parent() {
                fs::create_dir_all(parent).map_err(io_err(parent))?;
            }
            fs::write(&target, &rec.source_text).map_err(io_err(&target))?;

            let service = match services.iter().position(|s| s.service_id == rec.service_id) {
                Some(i) => &mut services[i],
                None => {
                    services.push(ServiceDoc {
                        service_id: rec.service_id.clone(),
                        operations: Vec::new(),
                    });
                    services.last_mut().expect("just pushed")
                }
            };
            let op = match service
                .operations
                .iter()
                .position(|o| o.operation_name == rec.operation_name)
            {
                Some(i) => &mut service.operations[i],
                None => {
                    service.operations.push(OperationDoc {
                        operation_name: rec.operation_name.clone(),
                        variants: Vec::new(),
                    });
                    service.operations.last_mut().expect("just pushed")
                }
            };
            let (variant, line_hint) = match rec.variant {
                VariantKind::Secure => (VariantTag::Vx0, None),
                VariantKind::FullyVulnerable => (VariantTag::VxA, None),
                VariantKind::SingleVulnerability { line_hint } => (VariantTag::VxLine, line_hint),
            };
            op.variants.push(VariantDoc {
                variant,
                line_hint,
                source_file: rec.source_file.clone(),
                function_id: rec.function_id.clone(),
                declared_callees: rec.declared_callees.clone(),
            });
        }
        let doc = ManifestDoc {
            language: self.language.clone(),
            services,
        };
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&doc).expect("manifest serializes");
        fs::write(&path, text + "\n").map_err(io_err(&path))?;
        Ok(path)
    }
}

/// Loads a corpus manifest. Source paths resolve relative to the manifest's directory.
pub fn load_corpus(manifest_path: &Path) -> Result<Corpus, CorpusError> {
    let text = fs::read_to_string(manifest_path).map_err(|source| CorpusError::Io {
        path: manifest_path.to_path_buf(),
        source,
    })?;
    let doc: ManifestDoc = serde_json::from_str(&text).map_err(|e| CorpusError::Manifest {
        path: manifest_path.to_path_buf(),
        message: e.to_string(),
    })?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));

    let mut records = Vec::new();
    for service in doc.services {
        for op in service.operations {
            for v in op.variants {
                let variant = match (v.variant, v.line_hint) {
                    (VariantTag::Vx0, None) => VariantKind::Secure,
                    (VariantTag::VxA, None) => VariantKind::FullyVulnerable,
                    (VariantTag::VxLine, line_hint) => VariantKind::SingleVulnerability { line_hint },
                    (_, Some(_)) => return Err(CorpusError::UnexpectedLineHint(v.function_id)),
                };
                let src_path = base.join(&v.source_file);
                let source_text = fs::read_to_string(&src_path).map_err(|source| CorpusError::Io {
                    path: src_path.clone(),
                    source,
                })?;
                records.push(FunctionRecord {
                    function_id: v.function_id,
                    service_id: service.service_id.clone(),
                    operation_name: op.operation_name.clone(),
                    variant,
                    source_text,
                    source_file: v.source_file,
                    declared_callees: v.declared_callees,
                });
            }
        }
    }
    Corpus::from_records(doc.language, records)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VariantPair {
    pub secure: String,
    pub vulnerable: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Pairing {
    pub pairs: Vec<VariantPair>,
    /// (service_id, operation_name) groups lacking a Vx0 or a VxA side.
    pub omitted: Vec<(String, String)>,
}

/// Pairs Vx0 with VxA variants of the same service operation.
///
/// Groups are visited in (service, operation) order; within a group the
/// secure and vulnerable ids are sorted and zipped so no id is reused.
pub fn variant_pairs(corpus: &Corpus) -> Pairing {
    // (secure ids, vulnerable ids, has a single-vulnerability variant)
    type Group<'a> = (Vec<&'a str>, Vec<&'a str>, bool);
    let mut groups: BTreeMap<(&str, &str), Group> = BTreeMap::new();
    for rec in corpus.records() {
        let entry = groups
            .entry((rec.service_id.as_str(), rec.operation_name.as_str()))
            .or_default();
        match rec.variant {
            VariantKind::Secure => entry.0.push(&rec.function_id),
            VariantKind::FullyVulnerable => entry.1.push(&rec.function_id),
            VariantKind::SingleVulnerability { .. } => entry.2 = true,
        }
    }
    let mut pairing = Pairing::default();
    for ((service, op), (mut secure, mut vulnerable, _)) in groups {
        if secure.is_empty() || vulnerable.is_empty() {
            pairing.omitted.push((service.to_string(), op.to_string()));
            continue;
        }
        secure.sort_unstable();
        vulnerable.sort_unstable();
        for (s, v) in secure.into_iter().zip(vulnerable) {
            pairing.pairs.push(VariantPair {
                secure: s.to_string(),
                vulnerable: v.to_string(),
            });
        }
    }
    pairing
}

/// Complete (function, practice) → label matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruthMatrix {
    entries: BTreeMap<(String, PracticeId), AdherenceLabel>,
    pub annotator: String,
    pub curation_date: Option<NaiveDate>,
}

impl GroundTruthMatrix {
    pub fn entries(&self) -> &BTreeMap<(String, PracticeId), AdherenceLabel> {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, function_id: &str, practice: PracticeId) -> Option<AdherenceLabel> {
        self.entries.get(&(function_id.to_string(), practice)).copied()
    }

    /// Labels grouped per function, practices ascending.
    pub fn by_function(&self) -> BTreeMap<String, BTreeMap<PracticeId, AdherenceLabel>> {
        let mut out: BTreeMap<String, BTreeMap<PracticeId, AdherenceLabel>> = BTreeMap::new();
        for ((fid, pid), label) in &self.entries {
            out.entry(fid.clone()).or_default().insert(*pid, *label);
        }
        out
    }
}

/// Parses ground-truth CSV text (`function_id,practice_id,label`).
///
/// Leading `# annotator: ...` and `# curation_date: YYYY-MM-DD` comment lines
/// carry the matrix metadata; other `#` lines are ignored.
pub fn parse_ground_truth(text: &str, corpus: &Corpus) -> Result<GroundTruthMatrix, GroundTruthError> {
    let mut annotator = String::new();
    let mut curation_date = None;
    let mut body = String::new();
    let mut body_line_numbers = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if let Some(comment) = line.trim_start().strip_prefix('#') {
            if let Some((key, value)) = comment.split_once(':') {
                match key.trim() {
                    "annotator" => annotator = value.trim().to_string(),
                    "curation_date" => {
                        let value = value.trim();
                        curation_date = Some(
                            NaiveDate::parse_from_str(value, "%Y-%m-%d")
                                .map_err(|_| GroundTruthError::BadDate(value.to_string()))?,
                        );
                    }
                    _ => {}
                }
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        body.push_str(line);
        body.push('\n');
        body_line_numbers.push(i + 1);
    }

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(body.as_bytes());
    let headers = reader.headers().map_err(|e| GroundTruthError::Malformed {
        line: body_line_numbers.first().copied().unwrap_or(1),
        message: e.to_string(),
    })?;
    if headers.iter().collect::<Vec<_>>() != ["function_id", "practice_id", "label"] {
        return Err(GroundTruthError::Malformed {
            line: body_line_numbers.first().copied().unwrap_or(1),
            message: "header must be `function_id,practice_id,label`".into(),
        });
    }

    let mut entries = BTreeMap::new();
    for (row_no, record) in reader.records().enumerate() {
        let line = body_line_numbers.get(row_no + 1).copied().unwrap_or(0);
        let record = record.map_err(|e| GroundTruthError::Malformed {
            line,
            message: e.to_string(),
        })?;
        if record.len() != 3 {
            return Err(GroundTruthError::Malformed {
                line,
                message: format!("expected 3 fields, found {}", record.len()),
            });
        }
        let function_id = record[0].to_string();
        if !corpus.contains(&function_id) {
            return Err(GroundTruthError::UnknownFunction { line, function_id });
        }
        let practice_id: PracticeId = record[1].parse().map_err(|_| GroundTruthError::UnknownPractice {
            line,
            token: record[1].to_string(),
        })?;
        let label: AdherenceLabel = record[2].parse().map_err(|token| GroundTruthError::BadLabel { line, token })?;
        if entries.insert((function_id.clone(), practice_id), label).is_some() {
            return Err(GroundTruthError::Duplicate {
                line,
                function_id,
                practice_id,
            });
        }
    }

    for fid in corpus.function_ids() {
        for pid in PracticeId::all() {
            if !entries.contains_key(&(fid.to_string(), pid)) {
                return Err(GroundTruthError::MissingPair {
                    function_id: fid.to_string(),
                    practice_id: pid,
                });
            }
        }
    }
    debug_assert_eq!(entries.len(), corpus.len() * PRACTICE_COUNT);
    Ok(GroundTruthMatrix {
        entries,
        annotator,
        curation_date,
    })
}

pub fn load_ground_truth(path: &Path, corpus: &Corpus) -> Result<GroundTruthMatrix, GroundTruthError> {
    let text = fs::read_to_string(path).map_err(|source| GroundTruthError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_ground_truth(&text, corpus)
}

/// Serializes a matrix back to the CSV format read by [`parse_ground_truth`].
pub fn ground_truth_to_csv(matrix: &GroundTruthMatrix) -> String {
    let mut out = String::new();
    if !matrix.annotator.is_empty() {
        out.push_str(&format!("# annotator: {}\n", matrix.annotator));
    }
    if let Some(date) = matrix.curation_date {
        out.push_str(&format!("# curation_date: {}\n", date.format("%Y-%m-%d")));
    }
    out.push_str("function_id,practice_id,label\n");
    for ((fid, pid), label) in &matrix.entries {
        out.push_str(&format!("{fid},{pid},{}\n", label.token()));
    }
    out
}
