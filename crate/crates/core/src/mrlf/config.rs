use serde::{Deserialize, Serialize};

use crate::memory::{DEFAULT_EMBED_DIM, DEFAULT_SMB_CAPACITY, DEFAULT_TOP_K};
use crate::policy::{DEFAULT_DESC_BUCKETS, DEFAULT_HIDDEN};
use crate::rewards::{FeedbackConfig, RewardWeights};

/// Which memory buffers a run may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemoryAblation {
    pub use_lmb: bool,
    pub use_smb: bool,
}

impl Default for MemoryAblation {
    fn default() -> Self {
        Self { use_lmb: true, use_smb: true }
    }
}

impl MemoryAblation {
    /// The ablation grid in report order: neither, long only, short only, both.
    pub const GRID: [MemoryAblation; 4] = [
        MemoryAblation { use_lmb: false, use_smb: false },
        MemoryAblation { use_lmb: true, use_smb: false },
        MemoryAblation { use_lmb: false, use_smb: true },
        MemoryAblation { use_lmb: true, use_smb: true },
    ];

    pub fn label(self) -> &'static str {
        match (self.use_lmb, self.use_smb) {
            (false, false) => "-/-",
            (true, false) => "L/-",
            (false, true) => "-/S",
            (true, true) => "L/S",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerConfig {
    /// Inner-loop step size.
    pub inner_rate: f64,
    /// Meta step size.
    pub meta_rate: f64,
    pub inner_steps: usize,
    /// Tasks per meta-iteration.
    pub task_batch_size: usize,
    /// Replay items drawn from short-term memory, and extra supervised
    /// targets drawn from long-term memory, per task.
    pub minibatch_size: usize,
    pub samples_per_task: usize,
    /// Rollouts from the adapted parameters used to assess each task.
    pub eval_samples: usize,
    pub demos_per_task: usize,
    pub max_iterations: usize,
    pub plateau_window: usize,
    pub plateau_epsilon: f64,
    /// Iterations without a windowed improvement before stopping.
    pub plateau_patience: usize,
    pub seed: u64,
    pub memory: MemoryAblation,
    pub weights: RewardWeights,
    pub feedback: FeedbackConfig,
    pub hidden: usize,
    pub desc_buckets: usize,
    pub max_len: usize,
    /// Sampling temperature for training rollouts.
    pub temperature: f64,
    /// Sampling temperature for assessment and pass@k.
    pub eval_temperature: f64,
    /// Global-norm clip applied to inner and meta gradients; 0 disables.
    pub clip_norm: f64,
    /// Subtract the per-task mean of each full-span reward over the fresh
    /// rollouts before weighting log-probabilities.
    pub baseline: bool,
    /// Multiplier on every reinforcement channel.
    pub rl_weight: f64,
    /// Divide each scored program's token weights by its length.
    pub length_normalize: bool,
    /// Long-term entries qualify as supervised targets at this fraction of
    /// the reference's score.
    pub sl_score_ratio: f64,
    pub smb_capacity: usize,
    pub top_k: usize,
    /// Description words taken from each retrieved entry for conditioning.
    pub context_words: usize,
    pub embed_dim: usize,
    pub error_window: Option<usize>,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            inner_rate: 0.05,
            meta_rate: 0.15,
            inner_steps: 1,
            task_batch_size: 4,
            minibatch_size: 4,
            samples_per_task: 4,
            eval_samples: 5,
            demos_per_task: 0,
            max_iterations: 500,
            plateau_window: 20,
            plateau_epsilon: 0.001,
            plateau_patience: 100,
            seed: 0,
            memory: MemoryAblation::default(),
            weights: RewardWeights::default(),
            feedback: FeedbackConfig::default(),
            hidden: DEFAULT_HIDDEN,
            desc_buckets: DEFAULT_DESC_BUCKETS,
            max_len: 64,
            temperature: 1.0,
            eval_temperature: 0.5,
            clip_norm: 5.0,
            baseline: true,
            rl_weight: 0.2,
            length_normalize: true,
            sl_score_ratio: 0.9,
            smb_capacity: DEFAULT_SMB_CAPACITY,
            top_k: DEFAULT_TOP_K,
            context_words: 8,
            embed_dim: DEFAULT_EMBED_DIM,
            error_window: None,
        }
    }
}

impl TrainerConfig {
    /// Every violated constraint, or `Ok` when the config is usable.
    pub fn validate(&self) -> Result<(), Vec<String>> {
        let mut bad = Vec::new();
        for (name, v) in [
            ("inner_rate", self.inner_rate),
            ("meta_rate", self.meta_rate),
            ("plateau_epsilon", self.plateau_epsilon),
            ("clip_norm", self.clip_norm),
            ("rl_weight", self.rl_weight),
            ("sl_score_ratio", self.sl_score_ratio),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                bad.push(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        for (name, v) in [("temperature", self.temperature), ("eval_temperature", self.eval_temperature)] {
            if !(v.is_finite() && v > 0.0) {
                bad.push(format!("{name} must be finite and > 0, got {v}"));
            }
        }
        for (name, v) in [
            ("task_batch_size", self.task_batch_size),
            ("samples_per_task", self.samples_per_task),
            ("plateau_window", self.plateau_window),
            ("plateau_patience", self.plateau_patience),
            ("hidden", self.hidden),
            ("desc_buckets", self.desc_buckets),
            ("max_len", self.max_len),
            ("embed_dim", self.embed_dim),
            ("feedback.step_budget", self.feedback.step_budget as usize),
        ] {
            if v == 0 {
                bad.push(format!("{name} must be >= 1"));
            }
        }
        if !self.weights.is_valid() {
            bad.push("reward weights must be finite and >= 0".into());
        }
        if self.error_window == Some(0) {
            bad.push("error_window must be >= 1 when set".into());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(bad)
        }
    }
}
