//! Errors, exit codes, atomic file output and run manifests.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use driftwatch::DriftError;
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_STARVATION: u8 = 4;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Drift(DriftError),
    Io { path: PathBuf, source: std::io::Error },
    Data { path: Option<PathBuf>, message: String },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn data(path: Option<&Path>, message: impl Into<String>) -> Self {
        CliError::Data {
            path: path.map(Path::to_path_buf),
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Drift(DriftError::InvalidConfig(_)) => EXIT_USAGE,
            CliError::Drift(DriftError::Starvation { .. }) => EXIT_STARVATION,
            _ => EXIT_DATA,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Io { .. } => "io",
            CliError::Data { .. } => "data",
            CliError::Drift(e) => match e {
                DriftError::InvalidConfig(_) => "usage",
                DriftError::Starvation { .. } => "starvation",
                DriftError::Io { .. } => "io",
                DriftError::Format { .. } => "format",
                DriftError::ChecksumMismatch { .. } => "checksum_mismatch",
                DriftError::ThresholdMissing { .. } => "threshold_missing",
                DriftError::TableMismatch(_) => "table_mismatch",
                DriftError::NonFinite { .. } => "non_finite",
                _ => "data",
            },
        }
    }

    fn path(&self) -> Option<&Path> {
        match self {
            CliError::Io { path, .. } => Some(path),
            CliError::Data { path, .. } => path.as_deref(),
            CliError::Drift(DriftError::Io { path, .. } | DriftError::Format { path, .. }) => Some(path),
            _ => None,
        }
    }

    /// The machine-readable form written to stderr.
    pub fn to_json(&self) -> String {
        let mut v = json!({
            "error": self.kind(),
            "message": self.to_string(),
            "exit_code": self.exit_code(),
        });
        if let Some(p) = self.path() {
            v["path"] = json!(p.display().to_string());
        }
        v.to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Drift(e) => write!(f, "{e}"),
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            CliError::Data { path: Some(p), message } => write!(f, "{}: {message}", p.display()),
            CliError::Data { path: None, message } => f.write_str(message),
        }
    }
}

impl From<DriftError> for CliError {
    fn from(e: DriftError) -> Self {
        CliError::Drift(e)
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Files written by one command, for the manifest.
#[derive(Debug, Default)]
pub struct Outputs {
    files: Vec<(PathBuf, String)>,
}

impl Outputs {
    /// Writes `bytes` to a temporary file beside `path`, then renames it.
    pub fn write(&mut self, path: &Path, bytes: &[u8]) -> CliResult<()> {
        let dir = match path.parent() {
            Some(d) if !d.as_os_str().is_empty() => d,
            _ => Path::new("."),
        };
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
        tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
        tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
        self.files.push((path.to_path_buf(), hex_sha256(bytes)));
        Ok(())
    }

    /// To `path` when given, else to stdout.
    pub fn emit(&mut self, path: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
        match path {
            Some(p) => self.write(p, bytes),
            None => {
                let mut out = std::io::stdout().lock();
                out.write_all(bytes)
                    .and_then(|_| out.flush())
                    .map_err(|e| CliError::io(Path::new("<stdout>"), e))
            }
        }
    }

    pub fn first(&self) -> Option<&Path> {
        self.files.first().map(|(p, _)| p.as_path())
    }

    /// Echoes the resolved command and hashes of every output. No timestamp,
    /// so reruns produce the identical manifest.
    pub fn write_manifest<C: Serialize>(&mut self, path: &Path, command: &C) -> CliResult<()> {
        let outputs: Vec<_> = self
            .files
            .iter()
            .map(|(p, h)| json!({ "path": p.display().to_string(), "sha256": h }))
            .collect();
        let manifest = json!({
            "tool": "driftwatch",
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "outputs": outputs,
        });
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
        self.write(path, text.as_bytes())
    }
}

fn hex_sha256(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// `<file>.manifest.json` next to a primary output.
pub fn manifest_beside(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    path.with_file_name(name)
}
