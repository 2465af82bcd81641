//! Run configuration, corpus ingestion, metrics reports, checkpoints and
//! the memory ablation grid.

mod ablation;
mod checkpoint;
mod config;
mod corpus;
mod metrics;

pub use ablation::{eval_settings, evaluate_result, run_ablation, AblationReport, AblationRow};
pub use checkpoint::{
    checkpoint_bytes, load_checkpoint, parse_checkpoint, save_checkpoint, Checkpoint, CheckpointError,
    CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use config::{ConfigError, EvalConfig, PersistenceConfig, RunConfig, VocabSpec};
pub use corpus::{load_corpus, parse_corpus, starter_corpus, tier_tasks, CorpusError, STARTER_CORPUS};
pub use metrics::{emit_report, read_metrics, render_table, sig4, summary_table, to_json_line, MetricsRecord};
