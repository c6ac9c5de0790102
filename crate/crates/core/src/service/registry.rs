use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ServiceError;
use crate::llm::BackendConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryStatus {
    Active,
    Retired,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRegistryEntry {
    pub model_id: String,
    pub version: String,
    pub backend: BackendConfig,
    pub created_at: String,
    pub status: EntryStatus,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
enum LogRecord {
    /// Inserts or replaces an entry; an active put retires the id's other versions.
    Put { entry: ModelRegistryEntry },
}

/// Versioned model catalog with one active version per model id.
///
/// Persisted as a JSON-lines append log that is replayed on open and
/// rewritten in place once it grows well past the number of entries.
#[derive(Debug)]
pub struct ModelRegistry {
    entries: Vec<ModelRegistryEntry>,
    path: Option<PathBuf>,
    log_lines: usize,
}

impl ModelRegistry {
    pub fn in_memory() -> Self {
        Self { entries: Vec::new(), path: None, log_lines: 0 }
    }

    pub fn open(path: &Path) -> Result<Self, ServiceError> {
        let mut reg = Self { entries: Vec::new(), path: Some(path.to_path_buf()), log_lines: 0 };
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(reg),
            Err(e) => return Err(ServiceError::Internal(format!("{}: {e}", path.display()))),
        };
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: LogRecord = serde_json::from_str(line)
                .map_err(|e| ServiceError::Internal(format!("{}:{}: {e}", path.display(), i + 1)))?;
            reg.apply(rec);
            reg.log_lines += 1;
        }
        Ok(reg)
    }

    fn apply(&mut self, rec: LogRecord) {
        let LogRecord::Put { entry } = rec;
        if entry.status == EntryStatus::Active {
            for e in self.entries.iter_mut().filter(|e| e.model_id == entry.model_id) {
                e.status = EntryStatus::Retired;
            }
        }
        match self.entries.iter_mut().find(|e| e.model_id == entry.model_id && e.version == entry.version) {
            Some(slot) => *slot = entry,
            None => self.entries.push(entry),
        }
    }

    /// Appends `rec` to the log, then applies it.
    fn commit(&mut self, rec: LogRecord) -> Result<(), ServiceError> {
        let Some(path) = &self.path else {
            self.apply(rec);
            return Ok(());
        };
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| ServiceError::Internal(format!("{}: {e}", dir.display())))?;
        }
        let line = serde_json::to_string(&rec).expect("log record serializes") + "\n";
        let io = |e: std::io::Error| ServiceError::Internal(format!("{}: {e}", path.display()));
        let mut f = OpenOptions::new().create(true).append(true).open(path).map_err(io)?;
        f.write_all(line.as_bytes()).map_err(io)?;
        f.sync_data().map_err(io)?;
        self.apply(rec);
        self.log_lines += 1;
        if self.log_lines > 2 * self.entries.len() + 16 {
            self.compact()?;
        }
        Ok(())
    }

    /// Rewrites the log as one record per entry.
    pub fn compact(&mut self) -> Result<(), ServiceError> {
        let Some(path) = &self.path else { return Ok(()) };
        let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
        let io = |e: std::io::Error| ServiceError::Internal(format!("{}: {e}", path.display()));
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
        for entry in &self.entries {
            let rec = LogRecord::Put { entry: entry.clone() };
            tmp.write_all((serde_json::to_string(&rec).expect("log record serializes") + "\n").as_bytes())
                .map_err(io)?;
        }
        tmp.as_file().sync_data().map_err(io)?;
        tmp.persist(path).map_err(|e| io(e.error))?;
        self.log_lines = self.entries.len();
        Ok(())
    }

    /// Adds `version` of `model_id` as the active version, retiring the previous one.
    pub fn register(
        &mut self,
        model_id: &str,
        version: &str,
        mut backend: BackendConfig,
    ) -> Result<ModelRegistryEntry, ServiceError> {
        if model_id.trim().is_empty() || version.trim().is_empty() {
            return Err(ServiceError::BadRequest("model_id and version must be non-empty".into()));
        }
        if self.entries.iter().any(|e| e.model_id == model_id && e.version == version) {
            return Err(ServiceError::Conflict(format!("model `{model_id}` version `{version}` already registered")));
        }
        backend.id = format!("{model_id}@{version}");
        backend.validate().map_err(|e| ServiceError::BadRequest(e.to_string()))?;
        let entry = ModelRegistryEntry {
            model_id: model_id.to_owned(),
            version: version.to_owned(),
            backend,
            created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
            status: EntryStatus::Active,
        };
        self.commit(LogRecord::Put { entry: entry.clone() })?;
        Ok(entry)
    }

    /// Makes an existing version the active one again.
    pub fn activate(&mut self, model_id: &str, version: &str) -> Result<ModelRegistryEntry, ServiceError> {
        let mut entry = self
            .entries
            .iter()
            .find(|e| e.model_id == model_id && e.version == version)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(format!("model `{model_id}` version `{version}`")))?;
        entry.status = EntryStatus::Active;
        self.commit(LogRecord::Put { entry: entry.clone() })?;
        Ok(entry)
    }

    /// All entries in registration order.
    pub fn list(&self) -> &[ModelRegistryEntry] {
        &self.entries
    }

    pub fn active(&self, model_id: &str) -> Option<&ModelRegistryEntry> {
        self.entries.iter().find(|e| e.model_id == model_id && e.status == EntryStatus::Active)
    }

    pub fn log_lines(&self) -> usize {
        self.log_lines
    }
}
