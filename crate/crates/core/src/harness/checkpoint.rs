use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::minilang::Vocab;
use crate::policy::{ParamsError, PolicyDims, PolicyParams};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"CRCK";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error("checkpoint version {found}, expected {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("checkpoint vocabulary fingerprint {found:#x} does not match {expected:#x}")]
    VocabMismatch { found: u64, expected: u64 },
    #[error(transparent)]
    Params(#[from] ParamsError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: PolicyParams,
    pub seed: u64,
}

/// Layout (little-endian): magic `CRCK`, `u32` version, `u64` vocab size,
/// hidden, description buckets, `u64` vocabulary fingerprint, `u64` seed,
/// `u64` value count, then the raw `f64` parameter values.
pub fn checkpoint_bytes(params: &PolicyParams, seed: u64) -> Vec<u8> {
    let d = params.dims();
    let mut out = Vec::with_capacity(48 + 8 * params.len());
    out.extend_from_slice(&CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    for v in [
        d.vocab_size as u64,
        d.hidden as u64,
        d.desc_buckets as u64,
        Vocab::new().fingerprint(),
        seed,
        params.len() as u64,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in params.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn parse_checkpoint(bytes: &[u8]) -> Result<Checkpoint, CheckpointError> {
    let corrupt = |m: &str| CheckpointError::Corrupt(m.to_string());
    if bytes.len() < 8 || bytes[..4] != CHECKPOINT_MAGIC {
        return Err(corrupt("bad magic"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != CHECKPOINT_VERSION {
        return Err(CheckpointError::VersionMismatch { found: version, expected: CHECKPOINT_VERSION });
    }
    if bytes.len() < 56 {
        return Err(corrupt("truncated header"));
    }
    let word = |i: usize| u64::from_le_bytes(bytes[8 + 8 * i..16 + 8 * i].try_into().expect("8 bytes"));
    let dims = PolicyDims { vocab_size: word(0) as usize, hidden: word(1) as usize, desc_buckets: word(2) as usize };
    let expected = Vocab::new().fingerprint();
    if word(3) != expected {
        return Err(CheckpointError::VocabMismatch { found: word(3), expected });
    }
    let seed = word(4);
    let n = word(5) as usize;
    let body = &bytes[56..];
    if body.len() != n.saturating_mul(8) {
        return Err(corrupt(&format!("expected {n} values, found {} bytes", body.len())));
    }
    if !dims.is_valid() {
        return Err(corrupt("zero dimension"));
    }
    let values = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    Ok(Checkpoint { params: PolicyParams::from_values(dims, values)?, seed })
}

pub fn save_checkpoint(path: &Path, params: &PolicyParams, seed: u64) -> Result<(), CheckpointError> {
    fs::write(path, checkpoint_bytes(params, seed))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, CheckpointError> {
    parse_checkpoint(&fs::read(path)?)
}
