//! Simulated drive pool with RAID-5 striping, peer-to-peer transfer
//! accounting, the archive container and the write/read pipelines.

mod checkpoint;
mod container;
mod drive;
mod pipeline;
mod pool;
mod raid;
mod transfer;

pub use checkpoint::{restore_checkpoint, save_checkpoint, CheckpointState, Stage, CHECKPOINT_LIMIT, MAX_BACKUP};
pub use container::{ArchiveContainer, ContainerHeader, SegmentEntry, PARITY_RAID5};
pub use drive::{Drive, DriveKind, BLOCK_BYTES};
pub use pipeline::{
    archive, decrypt_segment, encrypt_segment, retrieve, ArchiveOptions, ArchiveOutput, Retrieved, Staging,
};
pub use pool::{create_pool, Backing, DrivePool, DriveSpec, PoolLayout, DEFAULT_STRIPE_SIZE};
pub use raid::{raid_read, raid_write, reconstruct, verify_parity, StripeEntry, StripeMap};
pub use transfer::{host_transfer, p2p_transfer, DriveIo, TransferStats};

use crate::codec::CodecError;
use crate::exemplar::ExemplarError;
use crate::rlwe::RlweError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StorageError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("capacity exceeded: need {needed} bytes per drive, {available} available")]
    CapacityExceeded { needed: u64, available: u64 },
    #[error("drive {0} has failed")]
    DriveFailed(u32),
    #[error("stripe {stripe} is unrecoverable: drives {drives:?} are missing")]
    Unrecoverable { stripe: u64, drives: Vec<u32> },
    #[error("drive {0} is not a computational storage drive")]
    NotCsd(u32),
    #[error("CRC mismatch in segment {segment}")]
    Crc { segment: usize },
    #[error("segment {segment}: plaintext check failed (wrong key or corrupt data)")]
    Plaintext { segment: usize },
    #[error("decode error: {0}")]
    Decode(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("archive aborted after group {group}")]
    Aborted { group: usize },
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Crypto(#[from] RlweError),
    #[error(transparent)]
    Exemplar(#[from] ExemplarError),
}

impl StorageError {
    /// Errors caused by bad or damaged data rather than by the caller or
    /// the environment.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            StorageError::Unrecoverable { .. }
                | StorageError::Crc { .. }
                | StorageError::Plaintext { .. }
                | StorageError::Decode(_)
                | StorageError::Checkpoint(_)
                | StorageError::DriveFailed(_)
                | StorageError::Codec(CodecError::Decode(_))
                | StorageError::Crypto(RlweError::Wire(_))
        )
    }
}
