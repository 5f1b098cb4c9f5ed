use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::PromptError;
use crate::jsonl::{self, JsonlError};

/// Hex SHA-256 over client identity, prompt and decoding parameters.
pub fn cache_key(client: &str, prompt: &str, params: &BTreeMap<String, String>) -> String {
    let mut h = Sha256::new();
    for part in [client, prompt] {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part.as_bytes());
    }
    for (k, v) in params {
        h.update((k.len() as u64).to_le_bytes());
        h.update(k.as_bytes());
        h.update((v.len() as u64).to_le_bytes());
        h.update(v.as_bytes());
    }
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    pub client: String,
    pub output: String,
}

/// Content-addressed output cache, optionally backed by an append-only
/// JSONL file. Later lines override earlier ones on load.
#[derive(Debug, Default)]
pub struct GenerationCache {
    entries: RwLock<HashMap<String, String>>,
    file: Option<(PathBuf, Mutex<File>)>,
}

impl GenerationCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn open(path: &Path) -> Result<Self, PromptError> {
        let mut entries = HashMap::new();
        if path.exists() {
            for (_, e) in jsonl::read::<CacheEntry>(path)? {
                entries.insert(e.key, e.output);
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|source| JsonlError::Io { path: path.display().to_string(), source })?;
        Ok(Self { entries: RwLock::new(entries), file: Some((path.to_path_buf(), Mutex::new(file))) })
    }

    pub fn get(&self, key: &str) -> Option<String> {
        self.entries.read().get(key).cloned()
    }

    pub fn insert(&self, key: String, client: &str, output: String) -> Result<(), PromptError> {
        if let Some((path, file)) = &self.file {
            let line = serde_json::to_string(&CacheEntry { key: key.clone(), client: client.into(), output: output.clone() })
                .expect("cache entry serializes");
            let mut f = file.lock();
            writeln!(f, "{line}").map_err(|source| JsonlError::Io { path: path.display().to_string(), source })?;
        }
        self.entries.write().insert(key, output);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.read().is_empty()
    }
}
