use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::embed::{embed_with_dim, EmbeddingVector};
use super::index::FlatIndex;
use super::stats::ErrorStats;
use crate::minilang::{ErrorType, OutcomeKind, Program, SourceProgram, TestReport};
use crate::rewards::{FeedbackBundle, RewardWeights};
use crate::task::Task;

/// One stored attempt at a task, with its full feedback.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryEntry {
    pub task_id: String,
    pub description: String,
    pub program: Program,
    pub bundle: FeedbackBundle,
    /// Composite reward of `bundle` under the weights in force at insertion.
    pub eval_score: f64,
    pub iteration: u64,
}

impl MemoryEntry {
    pub fn new(task: &Task, program: Program, bundle: FeedbackBundle, weights: &RewardWeights, iteration: u64) -> Self {
        Self {
            task_id: task.id.clone(),
            description: task.description.clone(),
            eval_score: bundle.breakdown(weights).composite,
            program,
            bundle,
            iteration,
        }
    }

    pub fn source(&self) -> &SourceProgram {
        self.program.source()
    }

    pub fn report(&self) -> &TestReport {
        &self.bundle.report
    }
}

/// Read and write tallies, used to check that disabled buffers are never
/// touched.
#[derive(Debug, Default)]
pub struct AccessCounters {
    reads: AtomicU64,
    writes: AtomicU64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AccessCounts {
    pub reads: u64,
    pub writes: u64,
}

impl AccessCounters {
    pub(crate) fn read(&self) {
        self.reads.fetch_add(1, Ordering::Relaxed);
    }

    pub(crate) fn write(&self) {
        self.writes.fetch_add(1, Ordering::Relaxed);
    }

    pub fn snapshot(&self) -> AccessCounts {
        AccessCounts { reads: self.reads.load(Ordering::Relaxed), writes: self.writes.load(Ordering::Relaxed) }
    }
}

/// One retrieved neighbour, as logged and used for conditioning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextItem {
    pub id: usize,
    pub similarity: f64,
    pub task_id: String,
    pub description: String,
    pub program: SourceProgram,
    pub outcome: OutcomeKind,
    pub eval_score: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ContextBlock {
    pub query: String,
    pub items: Vec<ContextItem>,
}

impl ContextBlock {
    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// The first `words_per_item` words of each retrieved description, in
    /// retrieval order.
    pub fn conditioning_text(&self, words_per_item: usize) -> String {
        self.items
            .iter()
            .flat_map(|it| it.description.split_whitespace().take(words_per_item))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

#[derive(Debug, Error)]
pub enum MemoryError {
    #[error("memory file i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("memory file version {found}, expected {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("corrupt memory file: {0}")]
    Corrupt(String),
}

pub const LMB_MAGIC: [u8; 4] = *b"CRLM";
pub const LMB_VERSION: u32 = 1;

/// Long-term buffer: every stored entry, its embedding, and running error
/// statistics.
#[derive(Debug)]
pub struct LongTermMemory {
    entries: Vec<MemoryEntry>,
    index: FlatIndex,
    stats: ErrorStats,
    access: AccessCounters,
}

impl LongTermMemory {
    pub fn new(dim: usize, window: Option<usize>) -> Self {
        Self {
            entries: Vec::new(),
            index: FlatIndex::new(dim),
            stats: ErrorStats::new(window),
            access: AccessCounters::default(),
        }
    }

    pub fn dim(&self) -> usize {
        self.index.dim()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn access(&self) -> AccessCounts {
        self.access.snapshot()
    }

    pub fn insert(&mut self, entry: MemoryEntry) -> usize {
        self.access.write();
        self.stats.record(&entry.bundle.errors);
        self.index.add(&embed_with_dim(&entry.description, &entry.bundle.summary(), self.index.dim()));
        self.entries.push(entry);
        self.entries.len() - 1
    }

    pub fn entry(&self, id: usize) -> Option<&MemoryEntry> {
        self.access.read();
        self.entries.get(id)
    }

    pub fn entries(&self) -> &[MemoryEntry] {
        self.access.read();
        &self.entries
    }

    pub fn entries_for_task<'a>(&'a self, task_id: &'a str) -> impl Iterator<Item = &'a MemoryEntry> + 'a {
        self.access.read();
        self.entries.iter().filter(move |e| e.task_id == task_id)
    }

    pub fn stats(&self) -> &ErrorStats {
        self.access.read();
        &self.stats
    }

    pub fn error_proportions(&self) -> BTreeMap<ErrorType, f64> {
        self.access.read();
        self.stats.proportions()
    }

    pub fn embed(&self, description: &str, feedback_summary: &str) -> EmbeddingVector {
        embed_with_dim(description, feedback_summary, self.index.dim())
    }

    pub fn query_topk(&self, q: &EmbeddingVector, k: usize) -> Vec<(usize, f64)> {
        self.access.read();
        self.index.query_topk(q, k)
    }

    pub fn assemble_context(&self, task: &Task, k: usize) -> ContextBlock {
        self.context_for(&task.description, k)
    }

    /// Context for a bare description.
    pub fn context_for(&self, description: &str, k: usize) -> ContextBlock {
        let hits = self.query_topk(&self.embed(description, ""), k);
        ContextBlock {
            query: description.to_string(),
            items: hits
                .into_iter()
                .map(|(id, similarity)| {
                    let e = &self.entries[id];
                    ContextItem {
                        id,
                        similarity,
                        task_id: e.task_id.clone(),
                        description: e.description.clone(),
                        program: e.source().clone(),
                        outcome: e.bundle.outcome,
                        eval_score: e.eval_score,
                    }
                })
                .collect(),
        }
    }

    /// Layout (little-endian): magic `CRLM`, `u32` version, `u32` dim,
    /// `u64` count, `count` entries as `u32` length + JSON, `u32` length +
    /// stats JSON, then `count * dim` raw `f64` vectors.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&LMB_MAGIC);
        out.extend_from_slice(&LMB_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.index.dim() as u32).to_le_bytes());
        out.extend_from_slice(&(self.entries.len() as u64).to_le_bytes());
        let mut record = |bytes: Vec<u8>| {
            out.extend_from_slice(&(bytes.len() as u32).to_le_bytes());
            out.extend_from_slice(&bytes);
        };
        for e in &self.entries {
            record(serde_json::to_vec(e).expect("entries serialize"));
        }
        record(serde_json::to_vec(&self.stats).expect("stats serialize"));
        for v in self.index.raw() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, MemoryError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != LMB_MAGIC {
            return Err(MemoryError::Corrupt("bad magic".into()));
        }
        let version = r.u32()?;
        if version != LMB_VERSION {
            return Err(MemoryError::VersionMismatch { found: version, expected: LMB_VERSION });
        }
        let dim = r.u32()? as usize;
        if dim == 0 {
            return Err(MemoryError::Corrupt("zero embedding dimension".into()));
        }
        let count = r.u64()? as usize;
        let mut entries = Vec::new();
        for i in 0..count {
            let len = r.u32()? as usize;
            let e: MemoryEntry = serde_json::from_slice(r.take(len)?)
                .map_err(|err| MemoryError::Corrupt(format!("entry {i}: {err}")))?;
            entries.push(e);
        }
        let len = r.u32()? as usize;
        let stats: ErrorStats =
            serde_json::from_slice(r.take(len)?).map_err(|err| MemoryError::Corrupt(format!("stats: {err}")))?;
        let n = count.checked_mul(dim).ok_or_else(|| MemoryError::Corrupt("vector block too large".into()))?;
        let mut data = Vec::with_capacity(n.min(bytes.len() / 8));
        for _ in 0..n {
            data.push(f64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes")));
        }
        if r.pos != bytes.len() {
            return Err(MemoryError::Corrupt(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(Self { entries, index: FlatIndex::from_raw(dim, data), stats, access: AccessCounters::default() })
    }

    pub fn persist(&self, path: &Path) -> Result<(), MemoryError> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, MemoryError> {
        Self::from_bytes(&fs::read(path)?)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], MemoryError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| MemoryError::Corrupt(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, MemoryError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, MemoryError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}
