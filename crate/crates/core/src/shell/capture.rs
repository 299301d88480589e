use std::io;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Retrieves content for online capture. The shell never opens sockets on
/// its own; only an explicitly configured fetcher does.
pub trait Fetcher: Send + Sync {
    fn fetch(&self, url: &str) -> Result<Vec<u8>, String>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptureRecord {
    pub url: String,
    /// Name the attacker saw the file saved under, if any.
    pub outfile: Option<String>,
    pub sha256: Option<String>,
    /// Location of the blob on the operator side.
    pub stored: Option<PathBuf>,
    pub size: u64,
    /// `true` when identical content was already captured.
    pub duplicate: bool,
    pub error: Option<String>,
}

impl CaptureRecord {
    pub fn offline(url: &str, outfile: Option<String>) -> Self {
        Self { url: url.to_string(), outfile, sha256: None, stored: None, size: 0, duplicate: false, error: None }
    }
}

/// Operator-side store for downloaded content, keyed by SHA-256.
pub struct CaptureStore {
    online: Option<(PathBuf, Arc<dyn Fetcher>)>,
    lock: Mutex<()>,
}

impl std::fmt::Debug for CaptureStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CaptureStore").field("dir", &self.dir()).finish()
    }
}

impl CaptureStore {
    /// Records URLs only; nothing is fetched.
    pub fn offline() -> Self {
        Self { online: None, lock: Mutex::new(()) }
    }

    pub fn online(dir: impl AsRef<Path>, fetcher: Arc<dyn Fetcher>) -> io::Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        std::fs::create_dir_all(&dir)?;
        Ok(Self { online: Some((dir, fetcher)), lock: Mutex::new(()) })
    }

    pub fn is_online(&self) -> bool {
        self.online.is_some()
    }

    pub fn dir(&self) -> Option<&Path> {
        self.online.as_ref().map(|(d, _)| d.as_path())
    }

    pub fn capture(&self, url: &str, outfile: Option<String>) -> CaptureRecord {
        let mut record = CaptureRecord::offline(url, outfile);
        let Some((dir, fetcher)) = &self.online else {
            return record;
        };
        match fetcher.fetch(url) {
            Ok(bytes) => {
                let digest = hex::encode(Sha256::digest(&bytes));
                let path = dir.join(&digest);
                let _guard = self.lock.lock().unwrap();
                record.duplicate = path.exists();
                if !record.duplicate {
                    let tmp = dir.join(format!(".{digest}.partial"));
                    if let Err(e) = std::fs::write(&tmp, &bytes).and_then(|_| std::fs::rename(&tmp, &path)) {
                        record.error = Some(format!("capture write failed: {e}"));
                    }
                }
                record.size = bytes.len() as u64;
                record.sha256 = Some(digest);
                record.stored = Some(path);
            }
            Err(e) => record.error = Some(e),
        }
        record
    }

    /// Number of stored blobs.
    pub fn blob_count(&self) -> usize {
        self.dir()
            .and_then(|d| std::fs::read_dir(d).ok())
            .map(|entries| {
                entries
                    .filter_map(Result::ok)
                    .filter(|e| !e.file_name().to_string_lossy().starts_with('.'))
                    .count()
            })
            .unwrap_or(0)
    }
}
