//! Run manifests: resolved configuration plus SHA-256 hashes of every
//! artifact the run produced.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

pub struct Manifest {
    command: String,
    entries: Vec<(String, String)>,
    artifacts: Vec<PathBuf>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        Manifest {
            command: command.to_string(),
            entries: Vec::new(),
            artifacts: Vec::new(),
        }
    }

    pub fn record(&mut self, key: &str, value: impl ToString) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn record_artifact(&mut self, path: &Path) {
        self.artifacts.push(path.to_path_buf());
    }

    fn machine_fingerprint() -> String {
        let host = std::fs::read_to_string("/etc/hostname")
            .map(|s| s.trim().to_string())
            .unwrap_or_else(|_| "unknown".into());
        format!(
            "{}-{}-{}",
            std::env::consts::OS,
            std::env::consts::ARCH,
            host
        )
    }

    /// Write `manifest.txt` into the output directory.
    pub fn write(&self, out_dir: &Path) -> std::io::Result<()> {
        let mut text = String::new();
        writeln!(text, "command = {}", self.command).unwrap();
        writeln!(text, "machine = {}", Self::machine_fingerprint()).unwrap();
        let mut entries = self.entries.clone();
        entries.sort();
        for (key, value) in entries {
            writeln!(text, "{key} = {value}").unwrap();
        }
        for artifact in &self.artifacts {
            let bytes = std::fs::read(artifact)?;
            let digest = Sha256::digest(&bytes);
            let name = artifact
                .file_name()
                .map(|n| n.to_string_lossy().to_string())
                .unwrap_or_default();
            writeln!(text, "sha256 {name} = {digest:x}").unwrap();
        }
        std::fs::write(out_dir.join("manifest.txt"), text)
    }
}
