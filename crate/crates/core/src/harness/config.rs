use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::minilang::Vocab;
use crate::mrlf::TrainerConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {}", .0.join("; "))]
    Invalid(Vec<String>),
}

/// Evaluation settings for pass@k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub n_samples: usize,
    pub k_list: Vec<usize>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { n_samples: 10, k_list: vec![1, 5] }
    }
}

/// Where a run's artifacts go. Relative paths resolve against the output
/// directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PersistenceConfig {
    pub checkpoint: PathBuf,
    pub lmb: PathBuf,
    pub metrics: PathBuf,
    /// Save an intermediate checkpoint every this many iterations; 0 saves
    /// only the final one.
    pub checkpoint_every: usize,
}

impl Default for PersistenceConfig {
    fn default() -> Self {
        Self {
            checkpoint: "policy.ckpt".into(),
            lmb: "memory.lmb".into(),
            metrics: "metrics.jsonl".into(),
            checkpoint_every: 0,
        }
    }
}

/// Pins the token vocabulary a config was written for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct VocabSpec {
    pub fingerprint: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Task corpus; the bundled starter corpus when absent.
    pub corpus: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub vocab: VocabSpec,
    pub trainer: TrainerConfig,
    pub eval: EvalConfig,
    pub persistence: PersistenceConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            corpus: None,
            output_dir: "runs/default".into(),
            vocab: VocabSpec::default(),
            trainer: TrainerConfig::default(),
            eval: EvalConfig::default(),
            persistence: PersistenceConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let config: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut bad = self.trainer.validate().err().unwrap_or_default();
        if self.trainer.seed > i64::MAX as u64 {
            bad.push("trainer.seed must fit in a signed 64-bit integer".into());
        }
        if self.eval.k_list.is_empty() {
            bad.push("eval.k_list must not be empty".into());
        }
        if let Some(&k) = self.eval.k_list.iter().find(|&&k| k == 0 || k > self.eval.n_samples) {
            bad.push(format!("eval.k_list entry {k} must be in 1..=eval.n_samples"));
        }
        if let Some(fp) = self.vocab.fingerprint {
            let have = Vocab::new().fingerprint();
            if fp != have {
                bad.push(format!("vocab.fingerprint {fp} does not match the built-in vocabulary {have}"));
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(bad))
        }
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.output_dir.join(p)
        }
    }
}
