//! Run manifests and output directories.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use sha2::{Digest, Sha256};

/// Hash of `content` as git computes blob ids in SHA-256 repositories:
/// `sha256("blob <len>\0" + content)`.
pub fn content_hash(content: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", content.len()).as_bytes());
    h.update(content);
    h.finalize().iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

pub fn unix_seconds() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Creates `path` if needed. A missing directory is first built under a
/// temporary sibling name and then renamed into place, so it never appears
/// half-made.
pub fn create_out_dir(path: &Path) -> io::Result<()> {
    if path.is_dir() {
        return Ok(());
    }
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent)?;
    let name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "output path has no final component"))?;
    let staging = parent.join(format!(".{}.staging-{}", name.to_string_lossy(), std::process::id()));
    fs::create_dir(&staging)?;
    match fs::rename(&staging, path) {
        Ok(()) => Ok(()),
        Err(e) => {
            let _ = fs::remove_dir(&staging);
            if path.is_dir() {
                Ok(())
            } else {
                Err(e)
            }
        }
    }
}

/// Provenance of one command invocation, written as `manifest.txt`.
#[derive(Debug, Clone)]
pub struct RunManifest {
    pub command: String,
    pub config_path: String,
    pub config_hash: String,
    pub out_dir: String,
    pub grid: Vec<(String, String)>,
    pub seed: u64,
    pub started: u64,
    pub finished: Option<u64>,
    pub status: String,
    pub exit_code: Option<i32>,
    pub diagnostic: Vec<(String, String)>,
}

impl RunManifest {
    pub fn new(command: &str, config_path: &Path, out_dir: &Path) -> RunManifest {
        RunManifest {
            command: command.to_string(),
            config_path: config_path.display().to_string(),
            config_hash: String::new(),
            out_dir: out_dir.display().to_string(),
            grid: Vec::new(),
            seed: 0,
            started: unix_seconds(),
            finished: None,
            status: "running".to_string(),
            exit_code: None,
            diagnostic: Vec::new(),
        }
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "command = {}", self.command);
        let _ = writeln!(s, "config = {}", self.config_path);
        let _ = writeln!(s, "config_hash = {}", self.config_hash);
        let _ = writeln!(s, "out = {}", self.out_dir);
        for (k, v) in &self.grid {
            let _ = writeln!(s, "grid.{k} = {v}");
        }
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "started = {}", self.started);
        if let Some(f) = self.finished {
            let _ = writeln!(s, "finished = {f}");
        }
        let _ = writeln!(s, "status = {}", self.status);
        if let Some(code) = self.exit_code {
            let _ = writeln!(s, "exit_code = {code}");
        }
        for (k, v) in &self.diagnostic {
            let _ = writeln!(s, "diagnostic.{k} = {}", v.replace('\n', " "));
        }
        s
    }

    pub fn write(&self, dir: &Path) -> io::Result<()> {
        fs::write(dir.join("manifest.txt"), self.render())
    }

    /// Records the outcome and rewrites the manifest.
    pub fn finish(&mut self, dir: &Path, status: &str, code: i32) -> io::Result<()> {
        self.status = status.to_string();
        self.exit_code = Some(code);
        self.finished = Some(unix_seconds());
        self.write(dir)
    }
}
