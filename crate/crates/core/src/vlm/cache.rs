//! Append-only JSONL response cache keyed by request hash.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use serde::{Deserialize, Serialize};

use super::{ModelResponse, Prompt};
use crate::error::{Error, Result};
use crate::hash::content_hash;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub request_hash: String,
    pub response: ModelResponse,
    pub timestamp_unix_ms: u64,
}

/// SHA-256 over (provider, model id, serialized prompt).
pub fn request_hash(provider: &str, model: &str, prompt: &Prompt) -> String {
    content_hash(&(provider, model, prompt))
}

fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' })
        .collect()
}

#[derive(Debug)]
pub struct ResponseCache {
    path: PathBuf,
    entries: RwLock<HashMap<String, CacheEntry>>,
    writer: Mutex<Option<File>>,
}

impl ResponseCache {
    /// Opens `<dir>/<provider>/<model>.jsonl`, loading existing records.
    pub fn open(dir: &Path, provider: &str, model: &str) -> Result<Self> {
        let path = dir.join(sanitize(provider)).join(format!("{}.jsonl", sanitize(model)));
        Self::open_file(&path)
    }

    pub fn open_file(path: &Path) -> Result<Self> {
        let mut entries = HashMap::new();
        if path.exists() {
            let f = File::open(path).map_err(|e| Error::io(path, e))?;
            for (i, line) in BufReader::new(f).lines().enumerate() {
                let line = line.map_err(|e| Error::io(path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                let entry: CacheEntry = serde_json::from_str(&line).map_err(|e| Error::Decode {
                    path: path.to_path_buf(),
                    message: format!("line {}: {e}", i + 1),
                })?;
                // first record for a key wins; later duplicates are audit trail only
                entries.entry(entry.request_hash.clone()).or_insert(entry);
            }
        }
        Ok(ResponseCache { path: path.to_path_buf(), entries: RwLock::new(entries), writer: Mutex::new(None) })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.entries.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, request_hash: &str) -> Option<CacheEntry> {
        self.entries.read().unwrap().get(request_hash).cloned()
    }

    /// Appends `entry` unless its key is already cached.
    pub fn put(&self, entry: CacheEntry) -> Result<()> {
        let mut writer = self.writer.lock().unwrap();
        if self.entries.read().unwrap().contains_key(&entry.request_hash) {
            return Ok(());
        }
        if writer.is_none() {
            if let Some(parent) = self.path.parent() {
                std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
            let f = OpenOptions::new()
                .create(true)
                .append(true)
                .open(&self.path)
                .map_err(|e| Error::io(&self.path, e))?;
            *writer = Some(f);
        }
        let line = serde_json::to_string(&entry)?;
        let f = writer.as_mut().unwrap();
        writeln!(f, "{line}").map_err(|e| Error::io(&self.path, e))?;
        f.flush().map_err(|e| Error::io(&self.path, e))?;
        self.entries.write().unwrap().insert(entry.request_hash.clone(), entry);
        Ok(())
    }
}
