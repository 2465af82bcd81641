//! Feedback-driven reinforcement learning for program synthesis on a toy
//! language.
//!
//! The pieces, bottom-up:
//!
//! - [`minilang`]: the target language, its sandboxed interpreter, and the
//!   rubric judges for style and complexity.
//! - [`policy`]: a small recurrent token policy with exact log-probabilities
//!   and hand-derived gradients.
//! - [`rewards`]: the feedback channels and their token-span allocation.
//! - [`memory`]: long-term (retrieval + error statistics) and short-term
//!   (recent samples) buffers.
//! - [`mrlf`]: the meta-reinforcement-learning trainer and pass@k evaluation.
//! - [`task`]: the task record shared by all of the above.
//! - [`harness`]: configuration, corpus ingestion, reports and checkpoints.

pub mod harness;
pub mod memory;
pub mod minilang;
pub mod mrlf;
pub mod policy;
pub mod rewards;
pub mod seed;
pub mod task;
