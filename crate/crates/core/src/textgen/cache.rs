use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{cache_key, generate, sha256_hex, GenError, GenerationBackend, GenerationRequest, GenerationResult};

/// Overrides the default cache directory.
pub const CACHE_DIR_ENV: &str = "ARTQA_CACHE_DIR";

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("cache entry {} is corrupt: {reason}", path.display())]
    Corrupt { path: PathBuf, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Serialize, Deserialize)]
struct CacheEntry {
    key: String,
    checksum: String,
    result: GenerationResult,
}

fn checksum(result: &GenerationResult) -> String {
    sha256_hex(&serde_json::to_vec(result).expect("result serializes"))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CacheStats {
    pub entries: usize,
    pub bytes: u64,
}

/// Generation results on disk, one JSON file per cache key at
/// `<root>/<key[0..2]>/<key[2..]>.json`.
///
/// Writes go to a temporary file in the same directory and are renamed into
/// place, so readers never see partial entries. Concurrent writers of the
/// same key race benignly: the last rename wins.
#[derive(Debug, Clone)]
pub struct Cache {
    root: PathBuf,
}

impl Cache {
    pub fn open(root: impl Into<PathBuf>) -> std::io::Result<Self> {
        let root = root.into();
        std::fs::create_dir_all(&root)?;
        Ok(Cache { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path_for(&self, key: &str) -> PathBuf {
        let (fan, rest) = key.split_at(2.min(key.len()));
        self.root.join(fan).join(format!("{rest}.json"))
    }

    pub fn lookup(&self, key: &str) -> Result<Option<GenerationResult>, CacheError> {
        let path = self.path_for(key);
        let raw = match std::fs::read(&path) {
            Ok(raw) => raw,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        let corrupt = |reason: String| CacheError::Corrupt { path: path.clone(), reason };
        let entry: CacheEntry = serde_json::from_slice(&raw).map_err(|e| corrupt(e.to_string()))?;
        if entry.key != key {
            return Err(corrupt(format!("stored key {} does not match", entry.key)));
        }
        if entry.checksum != checksum(&entry.result) {
            return Err(corrupt("checksum mismatch".into()));
        }
        Ok(Some(entry.result))
    }

    pub fn put(&self, key: &str, result: &GenerationResult) -> std::io::Result<()> {
        let path = self.path_for(key);
        let dir = path.parent().expect("cache path has a parent");
        std::fs::create_dir_all(dir)?;
        let entry = CacheEntry { key: key.to_owned(), checksum: checksum(result), result: result.clone() };
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        serde_json::to_writer_pretty(&mut tmp, &entry).map_err(std::io::Error::other)?;
        tmp.write_all(b"\n")?;
        tmp.as_file().sync_all()?;
        tmp.persist(&path).map_err(|e| e.error)?;
        Ok(())
    }

    fn entry_files(&self) -> std::io::Result<Vec<PathBuf>> {
        let mut files = Vec::new();
        for fan in std::fs::read_dir(&self.root)? {
            let fan = fan?;
            if !fan.file_type()?.is_dir() {
                continue;
            }
            for entry in std::fs::read_dir(fan.path())? {
                let path = entry?.path();
                if path.extension().is_some_and(|e| e == "json") {
                    files.push(path);
                }
            }
        }
        Ok(files)
    }

    pub fn stats(&self) -> std::io::Result<CacheStats> {
        let mut stats = CacheStats::default();
        for path in self.entry_files()? {
            stats.entries += 1;
            stats.bytes += std::fs::metadata(&path)?.len();
        }
        Ok(stats)
    }

    /// Deletes every entry; returns how many were removed.
    pub fn clear(&self) -> std::io::Result<usize> {
        let files = self.entry_files()?;
        for path in &files {
            std::fs::remove_file(path)?;
        }
        Ok(files.len())
    }
}

/// Returns the cached result for `request` when present (with `cached`
/// set), otherwise generates, stores and returns a fresh result.
///
/// Corrupt entries are logged and regenerated.
pub fn cached_generate(
    cache: &Cache,
    backend: &dyn GenerationBackend,
    request: &GenerationRequest,
) -> Result<GenerationResult, GenError> {
    let key = cache_key(request);
    match cache.lookup(&key) {
        Ok(Some(mut hit)) => {
            hit.cached = true;
            return Ok(hit);
        }
        Ok(None) => {}
        Err(e) => log::warn!("{e}; regenerating"),
    }
    let result = generate(backend, request)?;
    cache.put(&key, &result).map_err(|e| GenError::CacheWrite(e.to_string()))?;
    Ok(result)
}
