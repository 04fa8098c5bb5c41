//! Run manifest parsing and loading of everything it references.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use trustlens_core::corpus::{load_corpus, load_ground_truth, Corpus, GroundTruthMatrix};
use trustlens_core::gateway::{ModelProfile, ProviderKind, ResponseCache, DEFAULT_PARALLELISM};
use trustlens_core::practices::{derive_weights, load_catalog, parse_cve_counts, Catalog, WeightVector};
use trustlens_core::prompting::{import_call_graph, CallGraph, PromptStrategy};
use trustlens_core::quality_model::{QualityModelConfig, QualityModelFile};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightsSource {
    Uniform,
    /// CVE counts carried by the practice catalog.
    Catalog,
    /// `practice_id,weight` CSV.
    WeightsCsv(PathBuf),
    /// `practice_id,count` CSV; weights are count / total.
    CveCounts(PathBuf),
}

fn default_catalog() -> String {
    "builtin".into()
}

fn default_strategies() -> Vec<PromptStrategy> {
    PromptStrategy::ALL.to_vec()
}

fn default_depth() -> usize {
    1
}

fn default_prior() -> PromptStrategy {
    PromptStrategy::Baseline
}

fn default_parallelism() -> usize {
    DEFAULT_PARALLELISM
}

fn default_weights() -> WeightsSource {
    WeightsSource::Uniform
}

/// Paths are relative to the manifest's directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub corpus: PathBuf,
    /// `builtin` or a path to a catalog TOML file.
    #[serde(default = "default_catalog")]
    pub catalog: String,
    pub ground_truth: PathBuf,
    #[serde(default = "default_weights")]
    pub weights: WeightsSource,
    pub models: Vec<ModelProfile>,
    #[serde(default = "default_strategies")]
    pub strategies: Vec<PromptStrategy>,
    pub cache: PathBuf,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quality_model: Option<PathBuf>,
    /// Externally produced call graph; the built-in resolver is used otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub call_graph: Option<PathBuf>,
    #[serde(default = "default_depth")]
    pub call_context_depth: usize,
    /// Classification strategy whose run feeds score estimation.
    #[serde(default = "default_prior")]
    pub score_prior_strategy: PromptStrategy,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
}

/// Command-line overrides applied on top of the manifest.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub qm_config: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

/// A manifest with every referenced input loaded and checked.
pub struct Workspace {
    pub manifest: RunManifest,
    pub base: PathBuf,
    pub corpus: Corpus,
    pub catalog: Catalog,
    pub truth: GroundTruthMatrix,
    pub weights: WeightVector,
    pub quality_model: QualityModelConfig,
    pub call_graph: CallGraph,
    pub cache_path: PathBuf,
    pub out_dir: PathBuf,
    pub warnings: Vec<String>,
}

fn invalid(context: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Validation(format!("{context}: {e}"))
}

pub fn read_manifest(path: &Path) -> Result<RunManifest, CliError> {
    let text = fs::read_to_string(path).map_err(|e| invalid(&format!("manifest {}", path.display()), e))?;
    serde_json::from_str(&text).map_err(|e| invalid(&format!("manifest {}", path.display()), e))
}

impl Workspace {
    pub fn load(manifest_path: &Path, overrides: &Overrides) -> Result<Self, CliError> {
        let manifest = read_manifest(manifest_path)?;
        let base = manifest_path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
        let at = |p: &Path| base.join(p);
        let mut warnings = Vec::new();

        let corpus = load_corpus(&at(&manifest.corpus)).map_err(|e| invalid("corpus", e))?;
        warnings.extend(corpus.warnings().iter().cloned());
        let catalog = if manifest.catalog == "builtin" {
            Catalog::builtin()
        } else {
            load_catalog(&at(Path::new(&manifest.catalog))).map_err(|e| invalid("catalog", e))?
        };
        let truth = load_ground_truth(&at(&manifest.ground_truth), &corpus).map_err(|e| invalid("ground truth", e))?;

        let weights = match &manifest.weights {
            WeightsSource::Uniform => WeightVector::uniform16(),
            WeightsSource::Catalog => derive_weights(&catalog.cve_counts()).map_err(|e| invalid("weights", e))?,
            WeightsSource::WeightsCsv(p) => {
                let text = fs::read_to_string(at(p)).map_err(|e| invalid(&format!("weights {}", p.display()), e))?;
                WeightVector::from_csv(&text).map_err(|e| invalid(&format!("weights {}", p.display()), e))?
            }
            WeightsSource::CveCounts(p) => {
                let text = fs::read_to_string(at(p)).map_err(|e| invalid(&format!("CVE counts {}", p.display()), e))?;
                let counts = parse_cve_counts(&text).map_err(|e| invalid(&format!("CVE counts {}", p.display()), e))?;
                derive_weights(&counts).map_err(|e| invalid("weights", e))?
            }
        };

        let qm_path = overrides.qm_config.clone().or_else(|| manifest.quality_model.as_ref().map(|p| at(p)));
        let qm_file = match &qm_path {
            Some(p) => QualityModelFile::load(p).map_err(|e| invalid("quality model", e))?,
            None => QualityModelFile::default(),
        };
        let quality_model = qm_file.resolve(&weights).map_err(|e| invalid("quality model", e))?;
        warnings.extend(quality_model.validate().map_err(|e| invalid("quality model", e))?);

        let call_graph = match &manifest.call_graph {
            Some(p) => import_call_graph(&at(p), &corpus).map_err(|e| invalid("call graph", e))?,
            None => CallGraph::from_corpus(&corpus),
        };
        warnings.extend(call_graph.warnings().iter().cloned());

        if manifest.models.is_empty() {
            return Err(CliError::Validation("manifest lists no models".into()));
        }
        let mut ids = BTreeSet::new();
        for m in &manifest.models {
            m.validate().map_err(|e| invalid("model profile", e))?;
            if !ids.insert(m.model_id.as_str()) {
                return Err(CliError::Validation(format!("duplicate model_id `{}`", m.model_id)));
            }
        }
        if manifest.parallelism == 0 {
            return Err(CliError::Validation("parallelism must be a positive integer".into()));
        }
        if manifest.call_context_depth == 0 {
            return Err(CliError::Validation("call_context_depth must be at least 1".into()));
        }
        if !manifest.score_prior_strategy.is_per_practice() {
            return Err(CliError::Validation("score_prior_strategy must be a classification strategy".into()));
        }

        let cache_path = at(&manifest.cache);
        if cache_path.exists() {
            let cache = ResponseCache::open(&cache_path).map_err(|e| invalid("cache", e))?;
            let bad = cache.entries().iter().filter(|e| !e.is_consistent()).count();
            if bad > 0 {
                warnings.push(format!("cache holds {bad} entries whose key does not match their fields"));
            }
        } else if manifest.models.iter().any(|m| m.provider_kind == ProviderKind::Replay) {
            return Err(CliError::Validation(format!(
                "cache {} does not exist but replay models need it",
                cache_path.display()
            )));
        }

        let out_dir = overrides.out.clone().unwrap_or_else(|| at(&manifest.output_dir));
        Ok(Workspace {
            manifest,
            base,
            corpus,
            catalog,
            truth,
            weights,
            quality_model,
            call_graph,
            cache_path,
            out_dir,
            warnings,
        })
    }

    pub fn model(&self, model_id: &str) -> Result<&ModelProfile, CliError> {
        self.manifest
            .models
            .iter()
            .find(|m| m.model_id == model_id)
            .ok_or_else(|| CliError::Validation(format!("model `{model_id}` is not in the manifest")))
    }

    pub fn run_dir(&self, model_id: &str, strategy: PromptStrategy) -> PathBuf {
        self.out_dir.join("runs").join(model_slug(model_id)).join(strategy.slug())
    }

    pub fn run_path(&self, model_id: &str, strategy: PromptStrategy) -> PathBuf {
        self.run_dir(model_id, strategy).join("run.jsonl")
    }
}

/// Directory-safe form of a model id.
pub fn model_slug(model_id: &str) -> String {
    model_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '_') { c } else { '_' })
        .collect()
}
