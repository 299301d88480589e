//! Shell configuration, loaded from TOML. Every field has a default.
//!
//! ```toml
//! hostname = "srv-app01"
//! users = ["jmiller", "asmith"]
//! session_cap_secs = 900
//! idle_timeout_secs = 180
//! command_delays = true
//! capture_dir = "captures"
//!
//! [[files]]
//! path = "/etc/motd"
//! content = "Authorized use only.\n"
//! owner = "root"
//! mode = "644"
//!
//! [[directories]]
//! path = "/srv/backup"
//! mode = "750"
//!
//! [commands]
//! nproc = "4\n"
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::fs::{build_fs, resolve, FakeFs, FakeFsNode, DEFAULT_USERS};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed shell config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid shell config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    #[serde(default)]
    pub content: String,
    #[serde(default = "root")]
    pub owner: String,
    #[serde(default = "file_mode")]
    pub mode: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirEntry {
    pub path: String,
    #[serde(default = "root")]
    pub owner: String,
    #[serde(default = "dir_mode")]
    pub mode: String,
}

fn root() -> String {
    "root".into()
}

fn file_mode() -> String {
    "644".into()
}

fn dir_mode() -> String {
    "755".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShellConfig {
    pub hostname: String,
    pub users: Vec<String>,
    /// Absolute session length after which no further command is accepted.
    pub session_cap_secs: u64,
    pub idle_timeout_secs: u64,
    /// Whether slow commands (package managers, downloads) advance the clock.
    pub command_delays: bool,
    pub capture_dir: PathBuf,
    pub files: Vec<FileEntry>,
    pub directories: Vec<DirEntry>,
    /// Extra commands with fixed output; these take precedence over the
    /// built-in emulation.
    pub commands: BTreeMap<String, String>,
}

impl Default for ShellConfig {
    fn default() -> Self {
        Self {
            hostname: "srv-app01".into(),
            users: DEFAULT_USERS.iter().map(|u| u.to_string()).collect(),
            session_cap_secs: 900,
            idle_timeout_secs: 180,
            command_delays: true,
            capture_dir: PathBuf::from("captures"),
            files: Vec::new(),
            directories: Vec::new(),
            commands: BTreeMap::new(),
        }
    }
}

/// Longest simulated run time of one input line.
pub const MAX_COMMAND_DELAY: Duration = Duration::from_secs(60);

impl ShellConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.users.is_empty() {
            return Err(ConfigError::Invalid("at least one user is required".into()));
        }
        if self.session_cap_secs == 0 || self.idle_timeout_secs == 0 {
            return Err(ConfigError::Invalid("time limits must be positive".into()));
        }
        for mode in self.files.iter().map(|f| &f.mode).chain(self.directories.iter().map(|d| &d.mode)) {
            parse_mode(mode)?;
        }
        for path in self.files.iter().map(|f| &f.path).chain(self.directories.iter().map(|d| &d.path)) {
            if !path.starts_with('/') || resolve("/", "/", path).is_empty() {
                return Err(ConfigError::Invalid(format!("{path:?} is not an absolute file path")));
            }
        }
        Ok(())
    }

    pub fn session_cap(&self) -> Duration {
        Duration::from_secs(self.session_cap_secs)
    }

    pub fn idle_timeout(&self) -> Duration {
        Duration::from_secs(self.idle_timeout_secs)
    }

    /// Template filesystem: the default tree for the configured users plus
    /// configured extra entries.
    pub fn build_template(&self) -> Result<FakeFs, ConfigError> {
        self.validate()?;
        let users: Vec<&str> = self.users.iter().map(String::as_str).collect();
        let mut fs = build_fs(&users);
        let t = fs.root().meta.modified;
        for d in &self.directories {
            fs.insert(&resolve("/", "/", &d.path), FakeFsNode::dir("", &d.owner, parse_mode(&d.mode)?, t));
        }
        for f in &self.files {
            let node = FakeFsNode::file("", f.content.as_bytes(), &f.owner, parse_mode(&f.mode)?, t);
            fs.insert(&resolve("/", "/", &f.path), node);
        }
        Ok(fs)
    }
}

pub fn parse_mode(mode: &str) -> Result<u32, ConfigError> {
    u32::from_str_radix(mode, 8)
        .ok()
        .filter(|m| *m <= 0o7777)
        .ok_or_else(|| ConfigError::Invalid(format!("bad octal mode {mode:?}")))
}
