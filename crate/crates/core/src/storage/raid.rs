//! RAID-5 with left-symmetric parity rotation.
//!
//! Stripe `s` over `N` drives keeps parity on position `N-1 - (s mod N)` and
//! data chunk `j` on position `(parity + 1 + j) mod N`. Every chunk of
//! stripe `s` lives at byte offset `s * stripe_size` on its drive. Chunks
//! are written full-size; the tail of the last data chunk is zero padding.
//!
//! Stripe maps serialize as
//!
//! ```text
//! "SMAP" | version u8 | id_len u16 | object id (utf-8) | length u64 |
//! stripe_size u32 | drive_count u8 | drive ids u32* | stripe_count u32 |
//! { stripe index u64 | parity drive id u32 }*
//! ```

use super::pool::DrivePool;
use super::StorageError;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

const MAGIC: &[u8; 4] = b"SMAP";
const VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StripeEntry {
    /// Global stripe index on the drives.
    pub index: u64,
    pub parity_drive: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StripeMap {
    pub object_id: String,
    pub length: u64,
    pub stripe_size: u32,
    /// Pool drive ids in position order.
    pub drive_ids: Vec<u32>,
    pub stripes: Vec<StripeEntry>,
}

pub(crate) fn parity_position(index: u64, n: usize) -> usize {
    n - 1 - (index % n as u64) as usize
}

pub(crate) fn data_position(parity: usize, j: usize, n: usize) -> usize {
    (parity + 1 + j) % n
}

fn xor_into(acc: &mut [u8], other: &[u8]) {
    for (a, b) in acc.iter_mut().zip(other) {
        *a ^= b;
    }
}

impl StripeMap {
    pub fn data_per_stripe(&self) -> u64 {
        (self.drive_ids.len() as u64 - 1) * u64::from(self.stripe_size)
    }

    fn check_against(&self, pool: &DrivePool) -> Result<(), StorageError> {
        let ids: Vec<u32> = pool.drives().iter().map(|d| d.id()).collect();
        if ids != self.drive_ids || self.stripe_size != pool.stripe_size() {
            return Err(StorageError::InvalidInput("stripe map does not belong to this pool".into()));
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.extend_from_slice(&(self.object_id.len() as u16).to_le_bytes());
        out.extend_from_slice(self.object_id.as_bytes());
        out.extend_from_slice(&self.length.to_le_bytes());
        out.extend_from_slice(&self.stripe_size.to_le_bytes());
        out.push(self.drive_ids.len() as u8);
        for id in &self.drive_ids {
            out.extend_from_slice(&id.to_le_bytes());
        }
        out.extend_from_slice(&(self.stripes.len() as u32).to_le_bytes());
        for s in &self.stripes {
            out.extend_from_slice(&s.index.to_le_bytes());
            out.extend_from_slice(&s.parity_drive.to_le_bytes());
        }
        out
    }

    /// Parses a map and checks its internal consistency: stripe count
    /// matches the length and parity sits where the rotation puts it.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, StorageError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(StorageError::Decode("bad stripe map magic".into()));
        }
        if r.u8()? != VERSION {
            return Err(StorageError::Decode("unsupported stripe map version".into()));
        }
        let id_len = usize::from(r.u16()?);
        let object_id = String::from_utf8(r.take(id_len)?.to_vec())
            .map_err(|_| StorageError::Decode("object id is not utf-8".into()))?;
        let length = r.u64()?;
        let stripe_size = r.u32()?;
        let n = usize::from(r.u8()?);
        let drive_ids = (0..n).map(|_| r.u32()).collect::<Result<Vec<_>, _>>()?;
        let count = r.u32()? as usize;
        if n < 3 || stripe_size == 0 {
            return Err(StorageError::Decode("stripe map geometry invalid".into()));
        }
        let per = (n as u64 - 1) * u64::from(stripe_size);
        if length.div_ceil(per) != count as u64 || count > bytes.len() / 12 {
            return Err(StorageError::Decode("stripe count does not match length".into()));
        }
        let mut stripes = Vec::with_capacity(count);
        for _ in 0..count {
            let index = r.u64()?;
            let parity_drive = r.u32()?;
            if drive_ids[parity_position(index, n)] != parity_drive {
                return Err(StorageError::Decode(format!("stripe {index} parity is not left-symmetric")));
            }
            stripes.push(StripeEntry { index, parity_drive });
        }
        if r.pos != bytes.len() {
            return Err(StorageError::Decode("trailing bytes after stripe map".into()));
        }
        Ok(Self {
            object_id,
            length,
            stripe_size,
            drive_ids,
            stripes,
        })
    }
}

pub(crate) struct Reader<'a> {
    pub bytes: &'a [u8],
    pub pos: usize,
}

impl<'a> Reader<'a> {
    pub fn take(&mut self, n: usize) -> Result<&'a [u8], StorageError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| StorageError::Decode("truncated input".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8, StorageError> {
        Ok(self.take(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16, StorageError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    pub fn u32(&mut self) -> Result<u32, StorageError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64, StorageError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Stripes `data` onto the next free stripes of the pool.
pub fn raid_write(pool: &mut DrivePool, object_id: &str, data: &[u8]) -> Result<StripeMap, StorageError> {
    if let Some(&id) = pool.failed_drives().first() {
        return Err(StorageError::DriveFailed(id));
    }
    if object_id.len() > u16::MAX as usize {
        return Err(StorageError::InvalidInput("object id too long".into()));
    }
    let n = pool.drive_count();
    let ss = pool.stripe_size() as usize;
    let per = (n - 1) * ss;
    let count = data.len().div_ceil(per) as u64;
    let first = pool.next_stripe();
    if first + count > pool.stripe_capacity() {
        return Err(StorageError::CapacityExceeded {
            needed: (first + count) * ss as u64,
            available: pool.stripe_capacity() * ss as u64,
        });
    }
    let drive_ids: Vec<u32> = pool.drives().iter().map(|d| d.id()).collect();
    let mut stripes = Vec::with_capacity(count as usize);
    for (k, piece) in data.chunks(per).enumerate() {
        let index = first + k as u64;
        let p = parity_position(index, n);
        let offset = index * ss as u64;
        let mut parity = vec![0u8; ss];
        for j in 0..n - 1 {
            let mut chunk = vec![0u8; ss];
            let start = (j * ss).min(piece.len());
            let end = ((j + 1) * ss).min(piece.len());
            chunk[..end - start].copy_from_slice(&piece[start..end]);
            xor_into(&mut parity, &chunk);
            pool.drives()[data_position(p, j, n)].write_at(offset, &chunk)?;
        }
        pool.drives()[p].write_at(offset, &parity)?;
        stripes.push(StripeEntry {
            index,
            parity_drive: drive_ids[p],
        });
    }
    pool.advance(count)?;
    Ok(StripeMap {
        object_id: object_id.to_string(),
        length: data.len() as u64,
        stripe_size: pool.stripe_size(),
        drive_ids,
        stripes,
    })
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Request {
    stripe: usize,
    drive: usize,
}

pub(crate) type Completion = (usize, Vec<u8>);

/// Requests needed per stripe; a stripe with a missing data chunk reads
/// every surviving chunk, parity included.
fn plan(pool: &DrivePool, map: &StripeMap) -> Result<(Vec<Request>, Option<usize>), StorageError> {
    let n = pool.drive_count();
    let failed: Vec<usize> = (0..n).filter(|&i| pool.drives()[i].is_failed()).collect();
    if failed.len() >= 2 {
        if let Some(s) = map.stripes.first() {
            return Err(StorageError::Unrecoverable {
                stripe: s.index,
                drives: failed.iter().map(|&i| pool.drives()[i].id()).collect(),
            });
        }
    }
    let missing = failed.first().copied();
    let mut reqs = Vec::new();
    for (si, s) in map.stripes.iter().enumerate() {
        let p = parity_position(s.index, n);
        match missing {
            Some(m) if m != p => {
                reqs.extend((0..n).filter(|&d| d != m).map(|drive| Request { stripe: si, drive }));
            }
            _ => reqs.extend((0..n - 1).map(|j| Request {
                stripe: si,
                drive: data_position(p, j, n),
            })),
        }
    }
    Ok((reqs, missing))
}

/// Runs the requests on up to `parallelism` workers and returns the chunks
/// in completion order.
fn fetch(pool: &DrivePool, map: &StripeMap, reqs: &[Request], parallelism: usize) -> Result<Vec<Completion>, StorageError> {
    let ss = pool.stripe_size() as usize;
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<Result<Completion, StorageError>>();
    std::thread::scope(|scope| {
        for _ in 0..parallelism.min(reqs.len()) {
            let tx = tx.clone();
            let next = &next;
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(r) = reqs.get(i) else { break };
                let mut buf = vec![0u8; ss];
                let offset = map.stripes[r.stripe].index * ss as u64;
                let res = pool.drives()[r.drive].read_at(offset, &mut buf).map(|()| (i, buf));
                let failed = res.is_err();
                if tx.send(res).is_err() || failed {
                    break;
                }
            });
        }
    });
    drop(tx);
    rx.into_iter().collect()
}

/// Rebuilds the object bytes from completions in any order.
fn assemble(
    pool_n: usize,
    map: &StripeMap,
    reqs: &[Request],
    missing: Option<usize>,
    completions: &[Completion],
) -> Result<Vec<u8>, StorageError> {
    let n = pool_n;
    let ss = map.stripe_size as usize;
    let mut chunks: Vec<Vec<Option<&[u8]>>> = vec![vec![None; n]; map.stripes.len()];
    for (i, buf) in completions {
        let r = reqs[*i];
        chunks[r.stripe][r.drive] = Some(buf);
    }
    let mut out = Vec::with_capacity(map.length as usize);
    for (si, s) in map.stripes.iter().enumerate() {
        let p = parity_position(s.index, n);
        for j in 0..n - 1 {
            let d = data_position(p, j, n);
            let chunk = if missing == Some(d) {
                let mut acc = vec![0u8; ss];
                for (other, c) in chunks[si].iter().enumerate() {
                    if other != d {
                        xor_into(&mut acc, c.ok_or_else(|| StorageError::Decode("missing completion".into()))?);
                    }
                }
                acc
            } else {
                chunks[si][d]
                    .ok_or_else(|| StorageError::Decode("missing completion".into()))?
                    .to_vec()
            };
            let remaining = map.length as usize - out.len();
            out.extend_from_slice(&chunk[..remaining.min(ss)]);
        }
    }
    Ok(out)
}

/// Reads an object back with up to `parallelism` outstanding chunk
/// fetches. One missing drive is tolerated by XOR reconstruction.
pub fn raid_read(pool: &DrivePool, map: &StripeMap, parallelism: usize) -> Result<Vec<u8>, StorageError> {
    raid_read_with(pool, map, parallelism, |_| {})
}

pub(crate) fn raid_read_with(
    pool: &DrivePool,
    map: &StripeMap,
    parallelism: usize,
    reorder: impl FnOnce(&mut Vec<Completion>),
) -> Result<Vec<u8>, StorageError> {
    if parallelism == 0 {
        return Err(StorageError::InvalidInput("parallelism must be at least 1".into()));
    }
    map.check_against(pool)?;
    let (reqs, missing) = plan(pool, map)?;
    let mut completions = fetch(pool, map, &reqs, parallelism)?;
    reorder(&mut completions);
    assemble(pool.drive_count(), map, &reqs, missing, &completions)
}

/// Rebuilds every allocated stripe of `failed_id` onto a replacement drive.
/// Returns the number of stripes rebuilt.
pub fn reconstruct(pool: &DrivePool, failed_id: u32) -> Result<u64, StorageError> {
    let pos = pool.position(failed_id)?;
    let failed = pool.failed_drives();
    if !failed.contains(&failed_id) {
        return Err(StorageError::InvalidInput(format!("drive {failed_id} has not failed")));
    }
    if failed.len() > 1 {
        return Err(StorageError::Unrecoverable { stripe: 0, drives: failed });
    }
    let ss = pool.stripe_size() as usize;
    pool.drives()[pos].replace()?;
    for s in 0..pool.next_stripe() {
        let offset = s * ss as u64;
        let mut acc = vec![0u8; ss];
        let mut buf = vec![0u8; ss];
        for (i, d) in pool.drives().iter().enumerate() {
            if i != pos {
                d.read_at(offset, &mut buf)?;
                xor_into(&mut acc, &buf);
            }
        }
        pool.drives()[pos].write_at(offset, &acc)?;
    }
    Ok(pool.next_stripe())
}

/// Indices of allocated stripes whose chunks do not XOR to zero.
pub fn verify_parity(pool: &DrivePool) -> Result<Vec<u64>, StorageError> {
    if let Some(&id) = pool.failed_drives().first() {
        return Err(StorageError::DriveFailed(id));
    }
    let ss = pool.stripe_size() as usize;
    let mut bad = Vec::new();
    let mut buf = vec![0u8; ss];
    for s in 0..pool.next_stripe() {
        let mut acc = vec![0u8; ss];
        for d in pool.drives() {
            d.read_at(s * ss as u64, &mut buf)?;
            xor_into(&mut acc, &buf);
        }
        if acc.iter().any(|&b| b != 0) {
            bad.push(s);
        }
    }
    Ok(bad)
}
