//! Long-term memory (every attempt, error statistics, similarity retrieval)
//! and short-term memory (the most recent attempts).

mod embed;
mod index;
mod lmb;
mod smb;
mod stats;

pub use embed::{char_ngrams, embed, embed_with_dim, EmbeddingVector, DEFAULT_EMBED_DIM};
pub use index::FlatIndex;
pub use lmb::{
    AccessCounts, ContextBlock, ContextItem, LongTermMemory, MemoryEntry, MemoryError, LMB_MAGIC, LMB_VERSION,
};
pub use smb::{ShortTermMemory, DEFAULT_SMB_CAPACITY};
pub use stats::ErrorStats;

pub const DEFAULT_TOP_K: usize = 3;
