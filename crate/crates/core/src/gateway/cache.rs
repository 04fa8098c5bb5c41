//! Append-only JSONL response cache with an in-memory index.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::GatewayError;
use crate::prompting::sha256_hex;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CacheEntry {
    pub key: String,
    pub model_id: String,
    pub template_version: String,
    pub request_text: String,
    pub response_text: String,
    pub timestamp: String,
    pub provider_metadata: String,
}

impl CacheEntry {
    /// True when the stored key matches the one recomputed from the stored fields.
    pub fn is_consistent(&self) -> bool {
        self.key == cache_key(&self.model_id, &self.template_version, &sha256_hex(&self.request_text))
    }
}

/// SHA-256 over model id, template version and prompt hash.
pub fn cache_key(model_id: &str, template_version: &str, content_hash: &str) -> String {
    let mut h = Sha256::new();
    for part in [model_id, template_version, content_hash] {
        h.update(part.as_bytes());
        h.update([0u8]);
    }
    hex::encode(h.finalize())
}

/// Concurrent reads through the index; appends are serialized by the writer lock.
#[derive(Debug, Default)]
pub struct ResponseCache {
    path: Option<PathBuf>,
    index: RwLock<HashMap<String, CacheEntry>>,
    writer: Mutex<Option<File>>,
}

impl ResponseCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens (or prepares to create) the cache file at `path`. The first
    /// entry for a key wins; later duplicates are ignored.
    pub fn open(path: &Path) -> Result<Self, GatewayError> {
        let mut index = HashMap::new();
        if path.exists() {
            let text = fs::read_to_string(path).map_err(|e| GatewayError::Cache(format!("{}: {e}", path.display())))?;
            for (i, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let entry: CacheEntry = serde_json::from_str(line)
                    .map_err(|e| GatewayError::Cache(format!("{} line {}: {e}", path.display(), i + 1)))?;
                index.entry(entry.key.clone()).or_insert(entry);
            }
        }
        Ok(ResponseCache {
            path: Some(path.to_path_buf()),
            index: RwLock::new(index),
            writer: Mutex::new(None),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn len(&self) -> usize {
        self.index.read().expect("cache index lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Looks up `key` and checks the entry against the prompt it should answer.
    pub fn lookup(&self, key: &str, request_text: &str) -> Result<Option<CacheEntry>, GatewayError> {
        let index = self.index.read().expect("cache index lock");
        let Some(entry) = index.get(key) else {
            return Ok(None);
        };
        if !entry.is_consistent() || entry.request_text != request_text {
            return Err(GatewayError::CacheIntegrity { key: key.to_string() });
        }
        Ok(Some(entry.clone()))
    }

    /// Appends an entry unless its key is already present, in which case the
    /// stored entry is returned unchanged.
    pub fn insert(&self, entry: CacheEntry) -> Result<CacheEntry, GatewayError> {
        let mut writer = self.writer.lock().expect("cache writer lock");
        if let Some(existing) = self.index.read().expect("cache index lock").get(&entry.key) {
            return Ok(existing.clone());
        }
        if let Some(path) = &self.path {
            if writer.is_none() {
                if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                    fs::create_dir_all(parent).map_err(|e| GatewayError::Cache(e.to_string()))?;
                }
                let file = OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(path)
                    .map_err(|e| GatewayError::Cache(format!("{}: {e}", path.display())))?;
                *writer = Some(file);
            }
            let mut line = serde_json::to_string(&entry).expect("cache entry serializes");
            line.push('\n');
            let file = writer.as_mut().expect("writer opened");
            file.write_all(line.as_bytes())
                .and_then(|_| file.flush())
                .map_err(|e| GatewayError::Cache(e.to_string()))?;
        }
        self.index
            .write()
            .expect("cache index lock")
            .insert(entry.key.clone(), entry.clone());
        Ok(entry)
    }

    /// All entries sorted by key.
    pub fn entries(&self) -> Vec<CacheEntry> {
        let mut v: Vec<CacheEntry> = self.index.read().expect("cache index lock").values().cloned().collect();
        v.sort_by(|a, b| a.key.cmp(&b.key));
        v
    }
}
