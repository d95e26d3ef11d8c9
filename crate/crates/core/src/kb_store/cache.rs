use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::text_index::normalize_key;

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("cache I/O on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cache entry encoding: {0}")]
    Encoding(#[from] serde_json::Error),
    #[error("cache lock poisoned")]
    Poisoned,
}

/// One cached response. `response` is the serialized answer payload.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    pub response: String,
    pub created_at: u64,
}

/// SHA-256 hex digest of the normalized (lowercased, whitespace-collapsed)
/// query text.
pub fn cache_key(query: &str) -> String {
    hex::encode(Sha256::digest(normalize_key(query).as_bytes()))
}

/// Response cache collection.
///
/// Entries live in memory; when opened on a file, every put is also
/// appended as one JSON line and the file is replayed on open, so the
/// latest line for a key wins. No expiry.
#[derive(Debug, Default)]
pub struct ResponseCache {
    entries: RwLock<HashMap<String, CacheEntry>>,
    log: Option<(PathBuf, Mutex<File>)>,
    // serializes puts so the log order matches the in-memory winner
    write_lock: Mutex<()>,
}

impl ResponseCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens (or creates) an append-only cache file and replays it.
    /// Lines that fail to decode, e.g. a torn final write, are skipped.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, CacheError> {
        let path = path.as_ref().to_path_buf();
        let io_err = |source| CacheError::Io {
            path: path.clone(),
            source,
        };
        let mut entries = HashMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(&path).map_err(io_err)?);
            for line in reader.lines() {
                let line = line.map_err(io_err)?;
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<CacheEntry>(&line) {
                    Ok(entry) => {
                        entries.insert(entry.key.clone(), entry);
                    }
                    Err(e) => tracing::warn!(path = %path.display(), error = %e, "skipping unreadable cache line"),
                }
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(io_err)?;
        Ok(Self {
            entries: RwLock::new(entries),
            log: Some((path, Mutex::new(file))),
            write_lock: Mutex::new(()),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.log.as_ref().map(|(p, _)| p.as_path())
    }

    pub fn get(&self, key: &str) -> Result<Option<CacheEntry>, CacheError> {
        let entries = self.entries.read().map_err(|_| CacheError::Poisoned)?;
        Ok(entries.get(key).cloned())
    }

    /// Stores `response` under `key`, replacing any previous entry.
    pub fn put(&self, key: &str, response: String) -> Result<(), CacheError> {
        let created_at = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let entry = CacheEntry {
            key: key.to_string(),
            response,
            created_at,
        };
        let _guard = self.write_lock.lock().map_err(|_| CacheError::Poisoned)?;
        if let Some((path, file)) = &self.log {
            let mut line = serde_json::to_string(&entry)?;
            line.push('\n');
            let mut file = file.lock().map_err(|_| CacheError::Poisoned)?;
            file.write_all(line.as_bytes())
                .and_then(|_| file.flush())
                .map_err(|source| CacheError::Io {
                    path: path.clone(),
                    source,
                })?;
        }
        self.entries
            .write()
            .map_err(|_| CacheError::Poisoned)?
            .insert(entry.key.clone(), entry);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.read().map(|e| e.len()).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
