use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{DecodeParams, LlmError, RenderedPrompt};
use crate::digest::sha256_hex;

#[derive(Serialize)]
struct KeyMaterial<'a> {
    model: &'a str,
    system: &'a str,
    user: &'a str,
    temperature: f64,
    max_tokens: u32,
}

/// SHA-256 over a canonical JSON encoding of the request.
pub fn cache_key(model: &str, prompt: &RenderedPrompt, decode: &DecodeParams) -> String {
    let material = KeyMaterial {
        model,
        system: &prompt.system,
        user: &prompt.user,
        temperature: decode.temperature,
        max_tokens: decode.max_tokens,
    };
    sha256_hex(&serde_json::to_vec(&material).expect("key material serializes"))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    /// Model reference including version, as sent.
    pub model: String,
    pub text: String,
}

/// Content-addressed response store: one JSON file per key under `root/ab/<key>.json`.
#[derive(Debug, Clone)]
pub struct ResponseCache {
    root: PathBuf,
}

impl ResponseCache {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, LlmError> {
        let root = root.into();
        std::fs::create_dir_all(&root).map_err(|e| LlmError::Io(root.display().to_string(), e))?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn path_for(&self, key: &str) -> PathBuf {
        let shard = key.get(..2).unwrap_or("xx");
        self.root.join(shard).join(format!("{key}.json"))
    }

    pub fn get(&self, key: &str) -> Option<CacheEntry> {
        let bytes = std::fs::read(self.path_for(key)).ok()?;
        let entry: CacheEntry = serde_json::from_slice(&bytes).ok()?;
        (entry.key == key).then_some(entry)
    }

    /// Writes through a temporary file and rename, so readers never see a partial entry.
    pub fn put(&self, entry: &CacheEntry) -> Result<(), LlmError> {
        let path = self.path_for(&entry.key);
        let dir = path.parent().expect("sharded path has a parent");
        std::fs::create_dir_all(dir).map_err(|e| LlmError::Io(dir.display().to_string(), e))?;
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| LlmError::Io(dir.display().to_string(), e))?;
        let bytes = serde_json::to_vec_pretty(entry).expect("cache entry serializes");
        tmp.write_all(&bytes).map_err(|e| LlmError::Io(path.display().to_string(), e))?;
        tmp.persist(&path).map_err(|e| LlmError::Io(path.display().to_string(), e.error))?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        let Ok(shards) = std::fs::read_dir(&self.root) else { return 0 };
        shards
            .flatten()
            .filter_map(|s| std::fs::read_dir(s.path()).ok())
            .map(|d| d.flatten().filter(|f| f.path().extension().is_some_and(|e| e == "json")).count())
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
