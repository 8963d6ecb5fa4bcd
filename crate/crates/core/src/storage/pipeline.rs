//! Write path (encode, encrypt, stripe) and read path (gather, decrypt,
//! inflate, select exemplars).
//!
//! A segment holds one encoded group. Its plaintext is
//! `len u32 | SGOP bytes | crc32(SGOP) u32`, zero-padded to a whole number
//! of `n/8`-byte blocks, and every block becomes one packed ciphertext.
//! The inner CRC is the only way a wrong key or damaged ciphertext is
//! noticed, since decryption itself never fails.

use super::checkpoint::{restore_checkpoint, save_checkpoint, CheckpointState, Stage};
use super::container::{ArchiveContainer, ContainerHeader, PARITY_RAID5};
use super::pool::DrivePool;
use super::raid::{raid_read, raid_write, StripeMap};
use super::StorageError;
use crate::codec::{decode_gop, encode_gop, CodecParams, EncodedGop, FeatureExtractor, Frame};
use crate::exemplar::{classify_drift, ClusterModel, DriftCase};
use crate::ring::RingParams;
use crate::rlwe::{decrypt, encrypt, packed_len, Ciphertext, KeyPair, Plaintext, PublicKey, SecretKey};
use crate::rng::{fnv1a64, Xoshiro256};
use sha2::{Digest, Sha256};
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

const SESSION_LEN: usize = 16;
const BACKUP_LEN: usize = SESSION_LEN + 4 + 8 + 8 + 32;

/// Runs `f` over `items` on all available cores, keeping input order.
fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    if workers <= 1 || items.len() <= 1 {
        return items.iter().map(f).collect();
    }
    let per = items.len().div_ceil(workers);
    let f = &f;
    std::thread::scope(|scope| {
        let handles: Vec<_> = items
            .chunks(per)
            .map(|chunk| scope.spawn(move || chunk.iter().map(f).collect::<Vec<R>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker panicked"))
            .collect()
    })
}

/// Encrypts one serialized group, drawing one encryption seed per block
/// from `generator`.
pub fn encrypt_segment(
    sgop: &[u8],
    pk: &PublicKey,
    ring: &RingParams,
    generator: &mut Xoshiro256,
) -> Result<Vec<u8>, StorageError> {
    let block = ring.n / 8;
    let len = u32::try_from(sgop.len()).map_err(|_| StorageError::InvalidInput("group too large".into()))?;
    let mut plain = Vec::with_capacity(sgop.len() + 8 + block);
    plain.extend_from_slice(&len.to_le_bytes());
    plain.extend_from_slice(sgop);
    plain.extend_from_slice(&crc32fast::hash(sgop).to_le_bytes());
    plain.resize(plain.len().div_ceil(block) * block, 0);
    let jobs: Vec<(&[u8], u64)> = plain.chunks(block).map(|c| (c, generator.next_u64())).collect();
    let cts = par_map(&jobs, |&(chunk, seed)| {
        let m = Plaintext::from_bytes(chunk, ring)?;
        encrypt(&m, pk, ring, seed)
    });
    let mut out = Vec::with_capacity(jobs.len() * 2 * packed_len(ring.n));
    for ct in cts {
        ct?.to_packed(&mut out);
    }
    Ok(out)
}

/// Decrypts segment `index` and returns the serialized group.
pub fn decrypt_segment(payload: &[u8], index: usize, sk: &SecretKey, ring: &RingParams) -> Result<Vec<u8>, StorageError> {
    let ct_len = 2 * packed_len(ring.n);
    if payload.is_empty() || !payload.len().is_multiple_of(ct_len) {
        return Err(StorageError::Decode(format!(
            "segment {index} length {} is not a whole number of ciphertexts",
            payload.len()
        )));
    }
    let chunks: Vec<&[u8]> = payload.chunks(ct_len).collect();
    let blocks = par_map(&chunks, |c| -> Result<Vec<u8>, StorageError> {
        let ct = Ciphertext::from_packed(c, ring).map_err(crate::rlwe::RlweError::from)?;
        Ok(decrypt(&ct, sk, ring)?.to_bytes())
    });
    let mut plain = Vec::with_capacity(chunks.len() * ring.n / 8);
    for b in blocks {
        plain.extend_from_slice(&b?);
    }
    let bad = StorageError::Plaintext { segment: index };
    let len = u32::from_le_bytes(plain[..4].try_into().unwrap()) as usize;
    if len + 8 > plain.len() || plain.len() - (len + 8) >= ring.n / 8 {
        return Err(bad);
    }
    let sgop = &plain[4..4 + len];
    let crc = u32::from_le_bytes(plain[4 + len..8 + len].try_into().unwrap());
    if crc != crc32fast::hash(sgop) || plain[8 + len..].iter().any(|&b| b != 0) {
        return Err(bad);
    }
    Ok(sgop.to_vec())
}

/// Completed segments plus the checkpoint that vouches for them. With a
/// directory, both survive a restart: segments are appended to
/// `segments.bin` before `checkpoint.bin` is replaced, so a segment
/// without a checkpoint is discarded on reopen.
#[derive(Debug, Default)]
pub struct Staging {
    dir: Option<PathBuf>,
    segments: Vec<Vec<u8>>,
    checkpoint: Option<Vec<u8>>,
}

impl Staging {
    pub fn memory() -> Self {
        Self::default()
    }

    pub fn open(dir: &Path) -> Result<Self, StorageError> {
        std::fs::create_dir_all(dir)?;
        let mut s = Self {
            dir: Some(dir.to_path_buf()),
            ..Self::default()
        };
        let ck_path = dir.join("checkpoint.bin");
        if !ck_path.exists() {
            s.write_segments_file()?;
            return Ok(s);
        }
        let ck = std::fs::read(&ck_path)?;
        let state = restore_checkpoint(&ck)?;
        let raw = std::fs::read(dir.join("segments.bin")).unwrap_or_default();
        let mut pos = 0;
        while s.segments.len() < state.group as usize {
            let Some(len) = raw.get(pos..pos + 8).map(|b| u64::from_le_bytes(b.try_into().unwrap()) as usize) else {
                break;
            };
            let Some(seg) = raw.get(pos + 8..).and_then(|r| r.get(..len)) else {
                break;
            };
            s.segments.push(seg.to_vec());
            pos += 8 + len;
        }
        if s.segments.len() != state.group as usize {
            return Err(StorageError::Checkpoint("staged segments missing".into()));
        }
        s.checkpoint = Some(ck);
        s.write_segments_file()?;
        Ok(s)
    }

    pub fn segments(&self) -> &[Vec<u8>] {
        &self.segments
    }

    pub fn checkpoint(&self) -> Option<&[u8]> {
        self.checkpoint.as_deref()
    }

    fn write_segments_file(&self) -> Result<(), StorageError> {
        if let Some(dir) = &self.dir {
            let mut buf = Vec::new();
            for seg in &self.segments {
                buf.extend_from_slice(&(seg.len() as u64).to_le_bytes());
                buf.extend_from_slice(seg);
            }
            std::fs::write(dir.join("segments.bin"), buf)?;
        }
        Ok(())
    }

    fn write_checkpoint(&mut self, ck: Vec<u8>) -> Result<(), StorageError> {
        if let Some(dir) = &self.dir {
            let tmp = dir.join("checkpoint.tmp");
            std::fs::write(&tmp, &ck)?;
            std::fs::rename(tmp, dir.join("checkpoint.bin"))?;
        }
        self.checkpoint = Some(ck);
        Ok(())
    }

    fn commit(&mut self, segment: Vec<u8>, ck: Vec<u8>) -> Result<(), StorageError> {
        if let Some(dir) = &self.dir {
            let mut f = OpenOptions::new().append(true).create(true).open(dir.join("segments.bin"))?;
            f.write_all(&(segment.len() as u64).to_le_bytes())?;
            f.write_all(&segment)?;
            f.sync_data()?;
        }
        self.segments.push(segment);
        self.write_checkpoint(ck)
    }

    /// Drops all staged state.
    pub fn clear(&mut self) -> Result<(), StorageError> {
        self.segments.clear();
        self.checkpoint = None;
        if let Some(dir) = &self.dir {
            for name in ["segments.bin", "checkpoint.bin"] {
                match std::fs::remove_file(dir.join(name)) {
                    Ok(()) => {}
                    Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
                    Err(e) => return Err(e.into()),
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ArchiveOptions {
    pub seed: u64,
    pub object_id: String,
    /// Simulated power loss once this many groups are staged.
    pub abort_after: Option<usize>,
}

impl Default for ArchiveOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            object_id: "archive".into(),
            abort_after: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ArchiveOutput {
    pub container: ArchiveContainer,
    pub map: StripeMap,
    /// Raw sample bytes of the input.
    pub raw_bytes: u64,
    /// Serialized groups before encryption.
    pub encoded_bytes: u64,
    /// Groups taken from a checkpoint rather than recomputed.
    pub resumed_groups: usize,
}

/// Identifies the inputs a checkpoint belongs to.
fn session_id(frames: &[Frame], params: &CodecParams, key_id: &[u8; 16], opts: &ArchiveOptions) -> [u8; SESSION_LEN] {
    let mut h = Sha256::new();
    h.update(opts.seed.to_le_bytes());
    h.update((opts.object_id.len() as u64).to_le_bytes());
    h.update(opts.object_id.as_bytes());
    h.update(key_id);
    for v in [params.layers, usize::from(params.base_step), params.anchor_interval, params.search_radius] {
        h.update((v as u64).to_le_bytes());
    }
    h.update((frames.len() as u64).to_le_bytes());
    for f in frames {
        h.update((f.width() as u64).to_le_bytes());
        h.update((f.height() as u64).to_le_bytes());
        h.update(f.samples());
    }
    h.finalize()[..SESSION_LEN].try_into().unwrap()
}

/// Running summary of staged segments kept in the checkpoint backup area.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Ledger {
    session: [u8; SESSION_LEN],
    count: u32,
    total: u64,
    /// Serialized group bytes before encryption.
    encoded: u64,
    chain: [u8; 32],
}

impl Ledger {
    fn new(session: [u8; SESSION_LEN]) -> Self {
        Self {
            session,
            count: 0,
            total: 0,
            encoded: 0,
            chain: [0; 32],
        }
    }

    fn push(&mut self, segment: &[u8], encoded: usize) {
        self.encoded += encoded as u64;
        let mut h = Sha256::new();
        h.update(self.chain);
        h.update(segment);
        self.chain = h.finalize().into();
        self.count += 1;
        self.total += segment.len() as u64;
    }

    fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(BACKUP_LEN);
        out.extend_from_slice(&self.session);
        out.extend_from_slice(&self.count.to_le_bytes());
        out.extend_from_slice(&self.total.to_le_bytes());
        out.extend_from_slice(&self.encoded.to_le_bytes());
        out.extend_from_slice(&self.chain);
        out
    }

    fn from_bytes(b: &[u8]) -> Option<Self> {
        (b.len() == BACKUP_LEN).then(|| Self {
            session: b[..16].try_into().unwrap(),
            count: u32::from_le_bytes(b[16..20].try_into().unwrap()),
            total: u64::from_le_bytes(b[20..28].try_into().unwrap()),
            encoded: u64::from_le_bytes(b[28..36].try_into().unwrap()),
            chain: b[36..].try_into().unwrap(),
        })
    }
}

fn check_frames(frames: &[Frame]) -> Result<(u16, u16, u32), StorageError> {
    let first = frames
        .first()
        .ok_or_else(|| StorageError::InvalidInput("no frames to archive".into()))?;
    if frames.iter().any(|f| !f.same_dims(first)) {
        return Err(StorageError::InvalidInput("frames differ in size".into()));
    }
    let w = u16::try_from(first.width()).map_err(|_| StorageError::InvalidInput("frame too wide".into()))?;
    let h = u16::try_from(first.height()).map_err(|_| StorageError::InvalidInput("frame too tall".into()))?;
    let n = u32::try_from(frames.len()).map_err(|_| StorageError::InvalidInput("too many frames".into()))?;
    Ok((w, h, n))
}

/// Archives `frames` into `pool`. With a checkpoint in `staging` from an
/// interrupted run over the same inputs, completed groups are reused and
/// the result is byte-identical to an uninterrupted run.
pub fn archive(
    frames: &[Frame],
    pool: &mut DrivePool,
    pk: &PublicKey,
    ring: &RingParams,
    params: &CodecParams,
    opts: &ArchiveOptions,
    staging: &mut Staging,
) -> Result<ArchiveOutput, StorageError> {
    params.validate()?;
    ring.validate().map_err(crate::rlwe::RlweError::from)?;
    let (width, height, frame_count) = check_frames(frames)?;
    if let Some(&id) = pool.failed_drives().first() {
        return Err(StorageError::DriveFailed(id));
    }
    let key_id = pk.key_id(ring);
    let session = session_id(frames, params, &key_id, opts);
    let groups: Vec<&[Frame]> = frames.chunks(params.anchor_interval).collect();

    let (mut ledger, mut generator) = match staging.checkpoint() {
        Some(bytes) => {
            let state = restore_checkpoint(bytes)?;
            let ledger = Ledger::from_bytes(state.backup())
                .ok_or_else(|| StorageError::Checkpoint("checkpoint backup malformed".into()))?;
            if ledger.session != session {
                return Err(StorageError::Checkpoint("checkpoint belongs to different inputs".into()));
            }
            if state.stripe_cursor != pool.next_stripe() {
                return Err(StorageError::Checkpoint(format!(
                    "pool cursor moved from {} to {}",
                    state.stripe_cursor,
                    pool.next_stripe()
                )));
            }
            let mut replay = Ledger::new(session);
            staging.segments().iter().for_each(|s| replay.push(s, 0));
            replay.encoded = ledger.encoded;
            if replay != ledger || ledger.count != state.group || state.group as usize > groups.len() {
                return Err(StorageError::Checkpoint("staged segments do not match checkpoint".into()));
            }
            (ledger, Xoshiro256::from_bytes(&state.generator))
        }
        None => {
            if !staging.segments().is_empty() {
                return Err(StorageError::Checkpoint("staged segments without checkpoint".into()));
            }
            (Ledger::new(session), Xoshiro256::seed_from(opts.seed ^ fnv1a64("archive")))
        }
    };
    let resumed = ledger.count as usize;

    for (g, group) in groups.iter().enumerate().skip(resumed) {
        let sgop = encode_gop(group, params)?.to_bytes();
        let segment = encrypt_segment(&sgop, pk, ring, &mut generator)?;
        ledger.push(&segment, sgop.len());
        let stage = if g + 1 == groups.len() { Stage::Stripe } else { Stage::Encode };
        let state = CheckpointState::new(stage, (g + 1) as u32, pool.next_stripe(), generator.to_bytes(), ledger.to_bytes())?;
        staging.commit(segment, save_checkpoint(&state))?;
        if opts.abort_after == Some(g + 1) {
            return Err(StorageError::Aborted { group: g + 1 });
        }
    }

    let header = ContainerHeader {
        width,
        height,
        frames: frame_count,
        layers: params.layers as u8,
        anchor_interval: params.anchor_interval as u8,
        n: ring.n as u16,
        q: ring.q,
        key_id,
        stripe_size: pool.stripe_size(),
        drive_count: pool.drive_count() as u8,
        parity: PARITY_RAID5,
    };
    let container = ArchiveContainer::new(header, staging.segments().to_vec());
    let map = raid_write(pool, &opts.object_id, &container.to_bytes())?;
    pool.save_state()?;
    staging.clear()?;
    Ok(ArchiveOutput {
        container,
        map,
        raw_bytes: frames.iter().map(|f| f.samples().len() as u64).sum(),
        encoded_bytes: ledger.encoded,
        resumed_groups: resumed,
    })
}

#[derive(Debug, Clone)]
pub struct Retrieved {
    pub container: ArchiveContainer,
    pub frames: Vec<Frame>,
    /// Drift tag per frame; empty without a cluster model.
    pub tags: Vec<DriftCase>,
    /// Indices of frames tagged Drifted or Novel.
    pub exemplars: Vec<usize>,
}

impl Retrieved {
    pub fn exemplar_frames(&self) -> Vec<&Frame> {
        self.exemplars.iter().map(|&i| &self.frames[i]).collect()
    }
}

/// Reads the object back, checks and decrypts every segment, decodes with
/// `k_max` layers and, given a model, tags each frame.
pub fn retrieve(
    pool: &DrivePool,
    map: &StripeMap,
    keys: &KeyPair,
    ring: &RingParams,
    k_max: usize,
    model: Option<&ClusterModel>,
    parallelism: usize,
) -> Result<Retrieved, StorageError> {
    let bytes = raid_read(pool, map, parallelism)?;
    let container = ArchiveContainer::from_bytes(&bytes)?;
    let h = container.header();
    if usize::from(h.n) != ring.n || h.q != ring.q {
        return Err(StorageError::InvalidInput(format!(
            "archive uses n={} q={}, keys use n={} q={}",
            h.n, h.q, ring.n, ring.q
        )));
    }
    if k_max == 0 || k_max > usize::from(h.layers) {
        return Err(StorageError::InvalidInput(format!("k_max {k_max} outside 1..={}", h.layers)));
    }
    let mut frames = Vec::with_capacity(h.frames as usize);
    for i in 0..container.segment_count() {
        let sgop = decrypt_segment(container.segment(i)?, i, &keys.secret, ring)?;
        let gop = EncodedGop::from_bytes(&sgop)?;
        if gop.width() != usize::from(h.width) || gop.height() != usize::from(h.height) {
            return Err(StorageError::Decode(format!("segment {i} frame size disagrees with header")));
        }
        frames.extend(decode_gop(&gop, k_max)?);
    }
    if frames.len() != h.frames as usize {
        return Err(StorageError::Decode(format!(
            "decoded {} frames, header says {}",
            frames.len(),
            h.frames
        )));
    }
    let (tags, exemplars) = match model {
        Some(m) => {
            let extractor = FeatureExtractor::new();
            let feats = par_map(&frames, |f| extractor.extract(f));
            let mut tags = Vec::with_capacity(frames.len());
            for f in feats {
                let f = f?;
                if f.len() != m.dims() {
                    return Err(StorageError::InvalidInput(format!(
                        "model has {} dims, features have {}",
                        m.dims(),
                        f.len()
                    )));
                }
                tags.push(classify_drift(&f, m));
            }
            let ex = (0..tags.len()).filter(|&i| tags[i] != DriftCase::Known).collect();
            (tags, ex)
        }
        None => (Vec::new(), Vec::new()),
    };
    Ok(Retrieved {
        container,
        frames,
        tags,
        exemplars,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rlwe::keygen;
    use crate::rng::SplitMix64;
    use crate::storage::{create_pool, DriveKind, PoolLayout};

    fn clip(frames: usize, seed: u64) -> Vec<Frame> {
        let mut g = SplitMix64::new(seed);
        let phase = g.next_below(50) as usize;
        (0..frames)
            .map(|t| {
                Frame::from_fn(32, 32, |y, x| {
                    let v = (x * 5 + y * 3 + t * 2 + phase) % 256;
                    let noise = ((x * 31 + y * 17 + t * 7 + phase).wrapping_mul(2_654_435_761) >> 13) & 1;
                    v as u8 ^ noise as u8
                })
                .unwrap()
            })
            .collect()
    }

    fn pool() -> DrivePool {
        let kinds = [DriveKind::Plain, DriveKind::Plain, DriveKind::Plain, DriveKind::Csd];
        create_pool(&PoolLayout::memory(&kinds, 256 * 4096, 4096)).unwrap()
    }

    fn params() -> CodecParams {
        CodecParams {
            anchor_interval: 4,
            ..CodecParams::default()
        }
    }

    #[test]
    fn segment_roundtrip_and_wrong_key() {
        let ring = RingParams::default();
        let keys = keygen(&ring, 1).unwrap();
        let other = keygen(&ring, 2).unwrap();
        let mut gen = Xoshiro256::seed_from(5);
        for len in [0usize, 1, 23, 24, 25, 100] {
            let data: Vec<u8> = (0..len).map(|i| (i * 7) as u8).collect();
            let seg = encrypt_segment(&data, &keys.public, &ring, &mut gen).unwrap();
            assert_eq!(seg.len() % 832, 0);
            assert_eq!(decrypt_segment(&seg, 3, &keys.secret, &ring).unwrap(), data);
            assert!(matches!(
                decrypt_segment(&seg, 3, &other.secret, &ring),
                Err(StorageError::Plaintext { segment: 3 })
            ));
        }
        assert!(decrypt_segment(&[0u8; 100], 0, &keys.secret, &ring).is_err());
    }

    #[test]
    fn archive_retrieve_identity_and_degraded() {
        let ring = RingParams::default();
        let keys = keygen(&ring, 3).unwrap();
        let frames = clip(10, 1);
        let mut p = pool();
        let out = archive(
            &frames,
            &mut p,
            &keys.public,
            &ring,
            &params(),
            &ArchiveOptions::default(),
            &mut Staging::memory(),
        )
        .unwrap();
        assert_eq!(out.container.segment_count(), 3);
        let got = retrieve(&p, &out.map, &keys, &ring, 4, None, 4).unwrap();
        assert_eq!(got.frames, frames);
        assert_eq!(got.container, out.container);
        p.fail_drive(2).unwrap();
        assert_eq!(retrieve(&p, &out.map, &keys, &ring, 4, None, 2).unwrap().frames, frames);
        let coarse = retrieve(&p, &out.map, &keys, &ring, 1, None, 2).unwrap();
        assert_eq!(coarse.frames[0], frames[0]);
        p.fail_drive(0).unwrap();
        assert!(matches!(
            retrieve(&p, &out.map, &keys, &ring, 4, None, 2),
            Err(StorageError::Unrecoverable { .. })
        ));
    }

    #[test]
    fn abort_at_every_boundary_resumes_identically() {
        let ring = RingParams::default();
        let keys = keygen(&ring, 4).unwrap();
        let frames = clip(10, 2);
        let opts = ArchiveOptions::default();
        let reference = archive(&frames, &mut pool(), &keys.public, &ring, &params(), &opts, &mut Staging::memory())
            .unwrap()
            .container
            .to_bytes();
        for stop in 1..=3 {
            let dir = tempfile::tempdir().unwrap();
            let mut p = pool();
            let aborting = ArchiveOptions {
                abort_after: Some(stop),
                ..opts.clone()
            };
            let mut st = Staging::open(dir.path()).unwrap();
            let err = archive(&frames, &mut p, &keys.public, &ring, &params(), &aborting, &mut st).unwrap_err();
            assert!(matches!(err, StorageError::Aborted { group } if group == stop));
            assert!(st.checkpoint().unwrap().len() <= 1024);
            drop(st);
            let mut st = Staging::open(dir.path()).unwrap();
            assert_eq!(st.segments().len(), stop);
            let out = archive(&frames, &mut p, &keys.public, &ring, &params(), &opts, &mut st).unwrap();
            assert_eq!(out.resumed_groups, stop);
            assert_eq!(out.container.to_bytes(), reference);
            assert!(st.checkpoint().is_none());
        }
    }

    #[test]
    fn resume_rejects_foreign_checkpoint() {
        let ring = RingParams::default();
        let keys = keygen(&ring, 4).unwrap();
        let mut p = pool();
        let mut st = Staging::memory();
        let opts = ArchiveOptions {
            abort_after: Some(1),
            ..ArchiveOptions::default()
        };
        archive(&clip(10, 3), &mut p, &keys.public, &ring, &params(), &opts, &mut st).unwrap_err();
        let err = archive(&clip(10, 4), &mut p, &keys.public, &ring, &params(), &ArchiveOptions::default(), &mut st)
            .unwrap_err();
        assert!(matches!(err, StorageError::Checkpoint(_)));
    }

    #[test]
    fn corrupted_segment_is_named() {
        let ring = RingParams::default();
        let keys = keygen(&ring, 5).unwrap();
        let frames = clip(10, 5);
        let mut p = pool();
        let out = archive(&frames, &mut p, &keys.public, &ring, &params(), &ArchiveOptions::default(), &mut Staging::memory())
            .unwrap();
        let target = out.container.entries()[1].offset + 5;
        let ss = u64::from(p.stripe_size());
        let per = 3 * ss;
        let stripe = &out.map.stripes[(target / per) as usize];
        let j = ((target % per) / ss) as usize;
        let parity = crate::storage::raid::parity_position(stripe.index, 4);
        let drive = &p.drives()[crate::storage::raid::data_position(parity, j, 4)];
        let off = stripe.index * ss + target % ss;
        let mut b = [0u8; 1];
        drive.read_at(off, &mut b).unwrap();
        drive.write_at(off, &[b[0] ^ 0xFF]).unwrap();
        assert!(matches!(
            retrieve(&p, &out.map, &keys, &ring, 4, None, 3),
            Err(StorageError::Crc { segment: 1 })
        ));
    }
}
