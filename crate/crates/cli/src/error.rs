use std::io;
use std::path::{Path, PathBuf};

use coderl_core::harness::{CheckpointError, ConfigError, CorpusError};
use coderl_core::memory::MemoryError;
use coderl_core::mrlf::TrainError;
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error("{path}: {source}")]
    Checkpoint { path: PathBuf, source: CheckpointError },
    #[error("{path}: {source}")]
    Memory { path: PathBuf, source: MemoryError },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("unknown task id {0:?}")]
    UnknownTask(String),
    #[error("gradient check failed: max relative error {worst:.3e} exceeds {tolerance:.0e}")]
    GradientMismatch { worst: f64, tolerance: f64 },
}

impl CliError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }

    pub fn checkpoint(path: &Path, source: CheckpointError) -> Self {
        Self::Checkpoint { path: path.to_path_buf(), source }
    }

    pub fn memory(path: &Path, source: MemoryError) -> Self {
        Self::Memory { path: path.to_path_buf(), source }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Usage(_) | Self::Config(_) => "config",
            Self::Corpus(_) => "corpus",
            _ => "runtime",
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) | Self::Config(_) => 2,
            Self::Corpus(_) => 3,
            _ => 4,
        }
    }

    fn io_source(&self) -> Option<&io::Error> {
        match self {
            Self::Io { source, .. } => Some(source),
            Self::Checkpoint { source: CheckpointError::Io(e), .. } => Some(e),
            Self::Memory { source: MemoryError::Io(e), .. } => Some(e),
            Self::Corpus(CorpusError::Io { source, .. }) => Some(source),
            Self::Config(ConfigError::Io { source, .. }) => Some(source),
            _ => None,
        }
    }

    fn path(&self) -> Option<&Path> {
        match self {
            Self::Io { path, .. } | Self::Checkpoint { path, .. } | Self::Memory { path, .. } => Some(path),
            Self::Corpus(CorpusError::Io { path, .. }) | Self::Config(ConfigError::Io { path, .. }) => Some(path),
            _ => None,
        }
    }

    pub fn code(&self) -> &'static str {
        if let Some(e) = self.io_source() {
            return match e.kind() {
                io::ErrorKind::NotFound => "file_not_found",
                io::ErrorKind::PermissionDenied => "permission_denied",
                _ => "io",
            };
        }
        match self {
            Self::Usage(_) => "usage",
            Self::Config(ConfigError::Parse(_)) => "parse",
            Self::Config(_) => "invalid",
            Self::Corpus(CorpusError::Parse { .. }) => "parse",
            Self::Corpus(CorpusError::Empty) => "empty_corpus",
            Self::Corpus(CorpusError::DuplicateId { .. }) => "duplicate_id",
            Self::Corpus(CorpusError::ReferenceFails { .. }) => "reference_fails",
            Self::Checkpoint { .. } => "bad_checkpoint",
            Self::Memory { .. } => "bad_memory_file",
            Self::UnknownTask(_) => "unknown_task",
            Self::GradientMismatch { .. } => "gradient_mismatch",
            _ => "training",
        }
    }

    /// One-line JSON error record.
    pub fn record(&self) -> String {
        let mut r = json!({
            "error": self.kind(),
            "code": self.code(),
            "exit_code": self.exit_code(),
            "message": self.to_string(),
        });
        if let Some(p) = self.path() {
            r["path"] = json!(p.display().to_string());
        }
        r.to_string()
    }
}
