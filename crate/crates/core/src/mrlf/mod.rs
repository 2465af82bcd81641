//! Meta-reinforcement-learning trainer: per-task inner adaptation on a
//! support batch drawn from fresh rollouts and the memory buffers, a
//! first-order meta-update across the task batch, and pass@k evaluation.

mod batch;
mod config;
mod eval;
mod meta;
mod passk;
mod trainer;

pub use batch::{InnerLossReport, RlItem, SlTarget, SupportBatch};
pub use config::{MemoryAblation, TrainerConfig};
pub use eval::{evaluate, EvalReport, EvalSettings, TaskEval};
pub use meta::{adapt, clip_by_norm, first_order_meta_gradient, l2_norm, meta_step, Adapted, Objective};
pub use passk::pass_at_k;
pub use trainer::{
    inner_adapt, meta_update, train, IterationRecord, StopReason, TaskRecord, TrainHistory, TrainResult, Trainer,
};

use rand::Rng;
use thiserror::Error;

use crate::memory::LongTermMemory;
use crate::minilang::TokenizeError;
use crate::policy::{Conditioning, ParamsError, PolicyError};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid trainer config: {}", .0.join("; "))]
    InvalidConfig(Vec<String>),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("task batch size {requested} exceeds corpus size {available}")]
    BatchTooLarge { requested: usize, available: usize },
    #[error("reference solution of task {task_id} does not tokenize: {source}")]
    Reference { task_id: String, source: TokenizeError },
    #[error("non-finite gradient in loss component {component}")]
    NonFiniteGradient { component: &'static str },
    #[error("iteration {iteration}, task {task_id}: {source}")]
    AtTask { iteration: u64, task_id: String, source: Box<TrainError> },
    #[error("pass@{k} needs at least {k} samples per task, got {n}")]
    TooFewSamples { n: usize, k: usize },
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Params(#[from] ParamsError),
}

/// Uniform sample of `n` distinct task indices out of `corpus_len`.
pub fn sample_tasks(corpus_len: usize, n: usize, rng: &mut impl Rng) -> Vec<usize> {
    assert!(n <= corpus_len, "cannot draw {n} tasks from {corpus_len}");
    rand::seq::index::sample(rng, corpus_len, n).into_vec()
}

/// Builds the policy's conditioning for a description, optionally extended
/// with words from the nearest long-term memory entries.
#[derive(Debug, Clone, Copy)]
pub struct Conditioner<'a> {
    pub buckets: usize,
    pub lmb: Option<&'a LongTermMemory>,
    pub top_k: usize,
    pub words: usize,
}

impl<'a> Conditioner<'a> {
    pub fn plain(buckets: usize) -> Self {
        Self { buckets, lmb: None, top_k: 0, words: 0 }
    }

    pub fn condition(&self, description: &str) -> Conditioning {
        let mut c = Conditioning::from_text(description, self.buckets);
        if let Some(lmb) = self.lmb {
            if self.top_k > 0 && self.words > 0 && !lmb.is_empty() {
                let block = lmb.context_for(description, self.top_k);
                c.extend_text(&block.conditioning_text(self.words), self.buckets);
            }
        }
        c
    }
}
