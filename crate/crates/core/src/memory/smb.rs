use std::collections::VecDeque;

use super::lmb::{AccessCounters, AccessCounts, MemoryEntry};

pub const DEFAULT_SMB_CAPACITY: usize = 64;

/// Short-term buffer: the last `capacity` entries, oldest evicted first.
#[derive(Debug)]
pub struct ShortTermMemory {
    capacity: usize,
    entries: VecDeque<MemoryEntry>,
    access: AccessCounters,
}

impl ShortTermMemory {
    pub fn new(capacity: usize) -> Self {
        Self { capacity, entries: VecDeque::with_capacity(capacity), access: AccessCounters::default() }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
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

    pub fn push(&mut self, entry: MemoryEntry) {
        self.access.write();
        if self.capacity == 0 {
            return;
        }
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(entry);
    }

    /// Up to `limit` entries, newest first.
    pub fn recent(&self, limit: usize) -> Vec<&MemoryEntry> {
        self.access.read();
        self.entries.iter().rev().take(limit).collect()
    }
}
