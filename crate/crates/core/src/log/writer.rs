use std::fs::{File, OpenOptions};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use super::SessionEvent;

/// Destination for session events. Implementations append each event as a
/// whole; concurrent callers never interleave within one event.
pub trait EventSink: Send + Sync {
    fn append(&self, event: &SessionEvent) -> io::Result<()>;
    fn flush(&self) -> io::Result<()>;
}

pub type SharedSink = Arc<dyn EventSink>;

/// Size-based rotation: once the active file would exceed `max_bytes`, it is
/// renamed to `<path>.1`, older files shift up by one, and at most `keep`
/// rotated files are retained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rotation {
    pub max_bytes: u64,
    pub keep: usize,
}

#[derive(Debug)]
struct Active {
    out: BufWriter<File>,
    written: u64,
}

/// Append-only NDJSON file writer.
#[derive(Debug)]
pub struct LogWriter {
    path: PathBuf,
    rotation: Option<Rotation>,
    active: Mutex<Option<Active>>,
}

impl LogWriter {
    pub fn open(path: impl AsRef<Path>) -> io::Result<Self> {
        Self::open_with(path, None)
    }

    pub fn open_with(path: impl AsRef<Path>, rotation: Option<Rotation>) -> io::Result<Self> {
        let path = path.as_ref().to_path_buf();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let active = open_active(&path)?;
        Ok(Self { path, rotation, active: Mutex::new(Some(active)) })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Flushes and closes the file. Later appends fail.
    pub fn close(&self) -> io::Result<()> {
        let mut guard = self.active.lock().unwrap();
        if let Some(mut active) = guard.take() {
            active.out.flush()?;
        }
        Ok(())
    }

    fn rotate(&self, active: &mut Active, keep: usize) -> io::Result<()> {
        active.out.flush()?;
        if keep == 0 {
            *active = Active { out: BufWriter::new(File::create(&self.path)?), written: 0 };
            return Ok(());
        }
        let _ = std::fs::remove_file(rotated_path(&self.path, keep));
        for n in (1..keep).rev() {
            let from = rotated_path(&self.path, n);
            if from.exists() {
                std::fs::rename(&from, rotated_path(&self.path, n + 1))?;
            }
        }
        std::fs::rename(&self.path, rotated_path(&self.path, 1))?;
        *active = open_active(&self.path)?;
        Ok(())
    }
}

impl EventSink for LogWriter {
    fn append(&self, event: &SessionEvent) -> io::Result<()> {
        let mut line = event.to_line();
        line.push('\n');
        let mut guard = self.active.lock().unwrap();
        let active = guard.as_mut().ok_or_else(|| io::Error::other("log writer is closed"))?;
        if let Some(rot) = self.rotation {
            if active.written > 0 && active.written + line.len() as u64 > rot.max_bytes {
                self.rotate(active, rot.keep)?;
            }
        }
        active.out.write_all(line.as_bytes())?;
        active.written += line.len() as u64;
        Ok(())
    }

    fn flush(&self) -> io::Result<()> {
        match self.active.lock().unwrap().as_mut() {
            Some(active) => active.out.flush(),
            None => Ok(()),
        }
    }
}

impl Drop for LogWriter {
    fn drop(&mut self) {
        let _ = self.close();
    }
}

fn open_active(path: &Path) -> io::Result<Active> {
    let file = OpenOptions::new().create(true).append(true).open(path)?;
    let written = file.metadata()?.len();
    Ok(Active { out: BufWriter::new(file), written })
}

pub fn rotated_path(path: &Path, n: usize) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(format!(".{n}"));
    PathBuf::from(name)
}

/// The active file and its rotated predecessors, oldest first.
pub fn rotation_set(path: &Path) -> Vec<PathBuf> {
    let mut older = Vec::new();
    let mut n = 1;
    while rotated_path(path, n).exists() {
        older.push(rotated_path(path, n));
        n += 1;
    }
    older.reverse();
    if path.exists() {
        older.push(path.to_path_buf());
    }
    older
}

/// Keeps events in memory; used by tests and the in-process simulator.
#[derive(Debug, Default)]
pub struct MemorySink {
    events: Mutex<Vec<SessionEvent>>,
}

impl MemorySink {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn events(&self) -> Vec<SessionEvent> {
        self.events.lock().unwrap().clone()
    }

    pub fn take(&self) -> Vec<SessionEvent> {
        std::mem::take(&mut *self.events.lock().unwrap())
    }

    pub fn len(&self) -> usize {
        self.events.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl EventSink for MemorySink {
    fn append(&self, event: &SessionEvent) -> io::Result<()> {
        self.events.lock().unwrap().push(event.clone());
        Ok(())
    }

    fn flush(&self) -> io::Result<()> {
        Ok(())
    }
}
