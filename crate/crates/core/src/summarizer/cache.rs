//! Response cache keyed by (case, stage, prompt hash, model, input hash).
//!
//! Directory-backed caches store one `<key>.json` file per entry; writes are
//! atomic. A per-key lock keeps two threads from computing the same entry.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::prompts::sha256_hex;
use crate::fsutil::atomic_write;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CacheKey {
    pub case_id: String,
    pub stage: String,
    pub prompt_hash: String,
    pub model_id: String,
    pub input_hash: String,
}

impl CacheKey {
    pub fn digest(&self) -> String {
        let joined = serde_json::to_string(&[
            &self.case_id,
            &self.stage,
            &self.prompt_hash,
            &self.model_id,
            &self.input_hash,
        ])
        .expect("strings serialize");
        sha256_hex(&joined)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: CacheKey,
    pub output: String,
    /// Unix seconds at which the entry was computed.
    pub timestamp: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum CacheError {
    #[error("cache io at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt cache entry {path}: {detail}")]
    Corrupt { path: PathBuf, detail: String },
}

enum Store {
    Memory(Mutex<HashMap<String, CacheEntry>>),
    Dir(PathBuf),
}

pub struct ResponseCache {
    store: Store,
    locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl ResponseCache {
    pub fn in_memory() -> Self {
        ResponseCache {
            store: Store::Memory(Mutex::new(HashMap::new())),
            locks: Mutex::new(HashMap::new()),
        }
    }

    pub fn in_dir(dir: impl Into<PathBuf>) -> Self {
        ResponseCache {
            store: Store::Dir(dir.into()),
            locks: Mutex::new(HashMap::new()),
        }
    }

    pub fn dir(&self) -> Option<&Path> {
        match &self.store {
            Store::Dir(d) => Some(d),
            Store::Memory(_) => None,
        }
    }

    fn entry_path(dir: &Path, digest: &str) -> PathBuf {
        dir.join(format!("{digest}.json"))
    }

    pub fn get(&self, key: &CacheKey) -> Result<Option<CacheEntry>, CacheError> {
        let digest = key.digest();
        match &self.store {
            Store::Memory(m) => Ok(m.lock().unwrap().get(&digest).cloned()),
            Store::Dir(dir) => {
                let path = Self::entry_path(dir, &digest);
                let text = match std::fs::read_to_string(&path) {
                    Ok(t) => t,
                    Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
                    Err(source) => return Err(CacheError::Io { path, source }),
                };
                let entry: CacheEntry =
                    serde_json::from_str(&text).map_err(|e| CacheError::Corrupt {
                        path: path.clone(),
                        detail: e.to_string(),
                    })?;
                if entry.key != *key {
                    return Err(CacheError::Corrupt {
                        path,
                        detail: "stored key does not match digest".into(),
                    });
                }
                Ok(Some(entry))
            }
        }
    }

    pub fn put(&self, entry: &CacheEntry) -> Result<(), CacheError> {
        let digest = entry.key.digest();
        match &self.store {
            Store::Memory(m) => {
                m.lock().unwrap().insert(digest, entry.clone());
                Ok(())
            }
            Store::Dir(dir) => {
                let path = Self::entry_path(dir, &digest);
                let json = serde_json::to_vec_pretty(entry).expect("entry serializes");
                atomic_write(&path, &json).map_err(|source| CacheError::Io { path, source })
            }
        }
    }

    /// Runs `compute` under the key's lock unless an entry already exists.
    /// Returns the entry and whether it was a hit.
    pub fn get_or_compute<E>(
        &self,
        key: &CacheKey,
        compute: impl FnOnce() -> Result<CacheEntry, E>,
    ) -> Result<(CacheEntry, bool), E>
    where
        E: From<CacheError>,
    {
        let lock = {
            let mut locks = self.locks.lock().unwrap();
            locks.entry(key.digest()).or_default().clone()
        };
        let _guard = lock.lock().unwrap();
        if let Some(hit) = self.get(key)? {
            return Ok((hit, true));
        }
        let entry = compute()?;
        self.put(&entry)?;
        Ok((entry, false))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key(stage: &str) -> CacheKey {
        CacheKey {
            case_id: "c".into(),
            stage: stage.into(),
            prompt_hash: "p".into(),
            model_id: "m".into(),
            input_hash: "i".into(),
        }
    }

    fn roundtrip(cache: &ResponseCache) {
        let k = key("facts");
        assert!(cache.get(&k).unwrap().is_none());
        let entry = CacheEntry {
            key: k.clone(),
            output: "out".into(),
            timestamp: 7,
        };
        cache.put(&entry).unwrap();
        assert_eq!(cache.get(&k).unwrap().unwrap(), entry);
        assert!(cache.get(&key("other")).unwrap().is_none());
    }

    #[test]
    fn memory_store() {
        roundtrip(&ResponseCache::in_memory());
    }

    #[test]
    fn dir_store_persists() {
        let dir = tempfile::tempdir().unwrap();
        roundtrip(&ResponseCache::in_dir(dir.path()));
        let again = ResponseCache::in_dir(dir.path());
        assert_eq!(again.get(&key("facts")).unwrap().unwrap().output, "out");
    }

    #[test]
    fn compute_only_on_miss() {
        let cache = ResponseCache::in_memory();
        let k = key("s");
        let mut calls = 0;
        let mut hits = Vec::new();
        for _ in 0..3 {
            let (_, hit) = cache
                .get_or_compute::<CacheError>(&k, || {
                    calls += 1;
                    Ok(CacheEntry {
                        key: k.clone(),
                        output: "x".into(),
                        timestamp: 0,
                    })
                })
                .unwrap();
            hits.push(hit);
        }
        assert_eq!(calls, 1);
        assert_eq!(hits, [false, true, true]);
    }

    #[test]
    fn digest_separates_fields() {
        let mut a = key("ab");
        a.case_id = "x".into();
        let mut b = key("b");
        b.case_id = "xa".into();
        assert_ne!(a.digest(), b.digest());
    }
}
