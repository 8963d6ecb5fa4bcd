//! Pipeline checkpoint in at most 1 KiB.
//!
//! ```text
//! "SCKP" | version u8 | stage u8 | group u32 | stripe_cursor u64 |
//! generator [32] | backup_len u16 | backup | crc32 u32
//! ```
//!
//! The CRC covers every preceding byte.

use super::raid::Reader;
use super::StorageError;

const MAGIC: &[u8; 4] = b"SCKP";
const VERSION: u8 = 1;
const FIXED_LEN: usize = 4 + 1 + 1 + 4 + 8 + 32 + 2 + 4;

/// Upper bound on a serialized checkpoint.
pub const CHECKPOINT_LIMIT: usize = 1024;
/// Largest backup area that keeps the checkpoint within the limit.
pub const MAX_BACKUP: usize = CHECKPOINT_LIMIT - FIXED_LEN;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Encode = 0,
    Encrypt = 1,
    Stripe = 2,
    Done = 3,
}

impl Stage {
    fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(Stage::Encode),
            1 => Some(Stage::Encrypt),
            2 => Some(Stage::Stripe),
            3 => Some(Stage::Done),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckpointState {
    pub stage: Stage,
    /// Groups fully processed so far.
    pub group: u32,
    pub stripe_cursor: u64,
    pub generator: [u8; 32],
    backup: Vec<u8>,
}

impl CheckpointState {
    pub fn new(
        stage: Stage,
        group: u32,
        stripe_cursor: u64,
        generator: [u8; 32],
        backup: Vec<u8>,
    ) -> Result<Self, StorageError> {
        if backup.len() > MAX_BACKUP {
            return Err(StorageError::Checkpoint(format!(
                "backup of {} bytes exceeds {MAX_BACKUP}",
                backup.len()
            )));
        }
        Ok(Self {
            stage,
            group,
            stripe_cursor,
            generator,
            backup,
        })
    }

    pub fn backup(&self) -> &[u8] {
        &self.backup
    }

    pub fn serialized_len(&self) -> usize {
        FIXED_LEN + self.backup.len()
    }
}

pub fn save_checkpoint(state: &CheckpointState) -> Vec<u8> {
    let mut out = Vec::with_capacity(state.serialized_len());
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.push(state.stage as u8);
    out.extend_from_slice(&state.group.to_le_bytes());
    out.extend_from_slice(&state.stripe_cursor.to_le_bytes());
    out.extend_from_slice(&state.generator);
    out.extend_from_slice(&(state.backup.len() as u16).to_le_bytes());
    out.extend_from_slice(&state.backup);
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    debug_assert!(out.len() <= CHECKPOINT_LIMIT);
    out
}

pub fn restore_checkpoint(bytes: &[u8]) -> Result<CheckpointState, StorageError> {
    let bad = |m: &str| StorageError::Checkpoint(m.to_string());
    if bytes.len() < FIXED_LEN || bytes.len() > CHECKPOINT_LIMIT {
        return Err(bad("checkpoint size out of range"));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    if crc32fast::hash(body) != u32::from_le_bytes(tail.try_into().unwrap()) {
        return Err(bad("checkpoint CRC mismatch"));
    }
    let mut r = Reader { bytes: body, pos: 0 };
    let wrap = |_| bad("truncated checkpoint");
    if r.take(4).map_err(wrap)? != MAGIC || r.u8().map_err(wrap)? != VERSION {
        return Err(bad("not a checkpoint"));
    }
    let stage = Stage::from_u8(r.u8().map_err(wrap)?).ok_or_else(|| bad("unknown stage"))?;
    let group = r.u32().map_err(wrap)?;
    let stripe_cursor = r.u64().map_err(wrap)?;
    let generator = r.take(32).map_err(wrap)?.try_into().unwrap();
    let len = usize::from(r.u16().map_err(wrap)?);
    let backup = r.take(len).map_err(wrap)?.to_vec();
    if r.pos != body.len() {
        return Err(bad("trailing bytes in checkpoint"));
    }
    CheckpointState::new(stage, group, stripe_cursor, generator, backup)
}
