use super::drive::{DriveKind, BLOCK_BYTES};
use super::pool::DrivePool;
use super::StorageError;
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DriveIo {
    pub read: u64,
    pub written: u64,
}

/// Byte accounting for block movement. Every byte read from a source
/// drive is counted once, either as host traffic or as peer-to-peer.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TransferStats {
    pub host_bytes: u64,
    pub p2p_bytes: u64,
    pub per_drive: BTreeMap<u32, DriveIo>,
}

impl TransferStats {
    pub fn total(&self) -> u64 {
        self.host_bytes + self.p2p_bytes
    }

    pub fn total_read(&self) -> u64 {
        self.per_drive.values().map(|d| d.read).sum()
    }

    pub fn merge(&mut self, other: &TransferStats) {
        self.host_bytes += other.host_bytes;
        self.p2p_bytes += other.p2p_bytes;
        for (id, io) in &other.per_drive {
            let e = self.per_drive.entry(*id).or_default();
            e.read += io.read;
            e.written += io.written;
        }
    }
}

fn read_blocks(pool: &DrivePool, src: u32, blocks: &[u64], stats: &mut TransferStats) -> Result<Vec<u8>, StorageError> {
    let drive = pool.drive(src)?;
    let mut out = Vec::with_capacity(blocks.len() * BLOCK_BYTES);
    for &b in blocks {
        out.extend_from_slice(&drive.read_block(b)?);
        stats.per_drive.entry(src).or_default().read += BLOCK_BYTES as u64;
    }
    Ok(out)
}

/// Moves blocks from `src` straight into the compute-local buffer of the
/// CSD `dst` without staging them in host memory.
pub fn p2p_transfer(pool: &DrivePool, src: u32, dst: u32, blocks: &[u64]) -> Result<TransferStats, StorageError> {
    let target = pool.drive(dst)?;
    if target.kind() != DriveKind::Csd {
        return Err(StorageError::NotCsd(dst));
    }
    if target.is_failed() {
        return Err(StorageError::DriveFailed(dst));
    }
    let mut stats = TransferStats::default();
    let data = read_blocks(pool, src, blocks, &mut stats)?;
    target.push_local(&data);
    if !data.is_empty() {
        stats.per_drive.entry(dst).or_default().written += data.len() as u64;
    }
    stats.p2p_bytes = data.len() as u64;
    Ok(stats)
}

/// The host-routed alternative: blocks are read into host memory.
pub fn host_transfer(pool: &DrivePool, src: u32, blocks: &[u64]) -> Result<(Vec<u8>, TransferStats), StorageError> {
    let mut stats = TransferStats::default();
    let data = read_blocks(pool, src, blocks, &mut stats)?;
    stats.host_bytes = data.len() as u64;
    Ok((data, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::storage::{create_pool, PoolLayout};

    fn pool() -> DrivePool {
        let kinds = [DriveKind::Plain, DriveKind::Plain, DriveKind::Plain, DriveKind::Csd];
        create_pool(&PoolLayout::memory(&kinds, 64 * 4096, 4096)).unwrap()
    }

    #[test]
    fn ten_blocks_peer_to_peer() {
        let p = pool();
        p.drive(0).unwrap().write_at(4096, &[7u8; 4096]).unwrap();
        let blocks: Vec<u64> = (0..10).collect();
        let s = p2p_transfer(&p, 0, 3, &blocks).unwrap();
        assert_eq!((s.p2p_bytes, s.host_bytes), (40960, 0));
        assert_eq!(s.total_read(), s.total());
        assert_eq!(s.per_drive[&3].written, 40960);
        let buf = p.drive(3).unwrap().local_buffer();
        assert_eq!(buf.len(), 40960);
        assert!(buf[4096..8192].iter().all(|&b| b == 7));

        let (data, h) = host_transfer(&p, 0, &blocks).unwrap();
        assert_eq!((h.host_bytes, h.p2p_bytes), (40960, 0));
        assert_eq!(data, buf);

        let mut all = s.clone();
        all.merge(&h);
        assert_eq!(all.total_read(), all.total());
    }

    #[test]
    fn empty_list_and_non_csd() {
        let p = pool();
        assert_eq!(p2p_transfer(&p, 1, 3, &[]).unwrap(), TransferStats::default());
        assert_eq!(host_transfer(&p, 1, &[]).unwrap().1, TransferStats::default());
        assert!(matches!(p2p_transfer(&p, 0, 1, &[0]), Err(StorageError::NotCsd(1))));
        assert!(p2p_transfer(&p, 9, 3, &[0]).is_err());
    }
}
