//! The `SALT` archive container.
//!
//! ```text
//! "SALT" | version u8 | width u16 | height u16 | frames u32 | K u8 |
//! anchor_interval u8 | n u16 | q u16 | key_id [16] | stripe_size u32 |
//! drive_count u8 | parity u8 | segment_count u32 |
//! { offset u64 | length u64 | crc32 u32 }* | payloads
//! ```
//!
//! Offsets are absolute and payloads are stored back to back in table
//! order. The CRC covers the encrypted payload.

use super::raid::Reader;
use super::StorageError;

const MAGIC: &[u8; 4] = b"SALT";
const VERSION: u8 = 1;
const HEADER_LEN: usize = 4 + 1 + 2 + 2 + 4 + 1 + 1 + 2 + 2 + 16 + 4 + 1 + 1 + 4;
const ENTRY_LEN: usize = 8 + 8 + 4;

/// Parity scheme tag for RAID-5.
pub const PARITY_RAID5: u8 = 5;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContainerHeader {
    pub width: u16,
    pub height: u16,
    pub frames: u32,
    pub layers: u8,
    pub anchor_interval: u8,
    pub n: u16,
    pub q: u16,
    pub key_id: [u8; 16],
    pub stripe_size: u32,
    pub drive_count: u8,
    pub parity: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SegmentEntry {
    pub offset: u64,
    pub length: u64,
    pub crc: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArchiveContainer {
    header: ContainerHeader,
    entries: Vec<SegmentEntry>,
    payloads: Vec<Vec<u8>>,
}

impl ArchiveContainer {
    pub fn new(header: ContainerHeader, payloads: Vec<Vec<u8>>) -> Self {
        let mut offset = (HEADER_LEN + ENTRY_LEN * payloads.len()) as u64;
        let entries = payloads
            .iter()
            .map(|p| {
                let e = SegmentEntry {
                    offset,
                    length: p.len() as u64,
                    crc: crc32fast::hash(p),
                };
                offset += p.len() as u64;
                e
            })
            .collect();
        Self {
            header,
            entries,
            payloads,
        }
    }

    pub fn header(&self) -> &ContainerHeader {
        &self.header
    }

    pub fn entries(&self) -> &[SegmentEntry] {
        &self.entries
    }

    pub fn segment_count(&self) -> usize {
        self.payloads.len()
    }

    pub fn payload_len(&self) -> u64 {
        self.entries.iter().map(|e| e.length).sum()
    }

    /// Payload of segment `i` after checking its CRC.
    pub fn segment(&self, i: usize) -> Result<&[u8], StorageError> {
        let p = self
            .payloads
            .get(i)
            .ok_or_else(|| StorageError::InvalidInput(format!("no segment {i}")))?;
        if crc32fast::hash(p) != self.entries[i].crc {
            return Err(StorageError::Crc { segment: i });
        }
        Ok(p)
    }

    /// First segment whose CRC does not match.
    pub fn verify(&self) -> Result<(), StorageError> {
        (0..self.payloads.len()).try_for_each(|i| self.segment(i).map(|_| ()))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let h = &self.header;
        let mut out = Vec::with_capacity(HEADER_LEN + ENTRY_LEN * self.entries.len() + self.payload_len() as usize);
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.extend_from_slice(&h.width.to_le_bytes());
        out.extend_from_slice(&h.height.to_le_bytes());
        out.extend_from_slice(&h.frames.to_le_bytes());
        out.push(h.layers);
        out.push(h.anchor_interval);
        out.extend_from_slice(&h.n.to_le_bytes());
        out.extend_from_slice(&h.q.to_le_bytes());
        out.extend_from_slice(&h.key_id);
        out.extend_from_slice(&h.stripe_size.to_le_bytes());
        out.push(h.drive_count);
        out.push(h.parity);
        out.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        for e in &self.entries {
            out.extend_from_slice(&e.offset.to_le_bytes());
            out.extend_from_slice(&e.length.to_le_bytes());
            out.extend_from_slice(&e.crc.to_le_bytes());
        }
        for p in &self.payloads {
            out.extend_from_slice(p);
        }
        out
    }

    /// Parses the layout. CRCs are kept as stored and checked on access,
    /// so a damaged payload is reported by segment index.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, StorageError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(StorageError::Decode("bad container magic".into()));
        }
        if r.u8()? != VERSION {
            return Err(StorageError::Decode("unsupported container version".into()));
        }
        let header = ContainerHeader {
            width: r.u16()?,
            height: r.u16()?,
            frames: r.u32()?,
            layers: r.u8()?,
            anchor_interval: r.u8()?,
            n: r.u16()?,
            q: r.u16()?,
            key_id: r.take(16)?.try_into().unwrap(),
            stripe_size: r.u32()?,
            drive_count: r.u8()?,
            parity: r.u8()?,
        };
        if header.parity != PARITY_RAID5 {
            return Err(StorageError::Decode(format!("unknown parity scheme {}", header.parity)));
        }
        if header.layers == 0 || header.anchor_interval == 0 || header.drive_count < 3 {
            return Err(StorageError::Decode("container header fields out of range".into()));
        }
        let count = r.u32()? as usize;
        if count > (bytes.len() - r.pos) / ENTRY_LEN {
            return Err(StorageError::Decode("segment table exceeds container".into()));
        }
        let expected_segments = (header.frames as usize).div_ceil(usize::from(header.anchor_interval));
        if count != expected_segments {
            return Err(StorageError::Decode(format!(
                "{count} segments for {} frames in groups of {}",
                header.frames, header.anchor_interval
            )));
        }
        let mut entries = Vec::with_capacity(count);
        let mut offset = (HEADER_LEN + ENTRY_LEN * count) as u64;
        for _ in 0..count {
            let e = SegmentEntry {
                offset: r.u64()?,
                length: r.u64()?,
                crc: r.u32()?,
            };
            if e.offset != offset {
                return Err(StorageError::Decode("segment offsets are not contiguous".into()));
            }
            offset = offset
                .checked_add(e.length)
                .ok_or_else(|| StorageError::Decode("segment length overflow".into()))?;
            entries.push(e);
        }
        if offset != bytes.len() as u64 {
            return Err(StorageError::Decode("segment lengths do not match container size".into()));
        }
        let payloads = entries
            .iter()
            .map(|e| bytes[e.offset as usize..(e.offset + e.length) as usize].to_vec())
            .collect();
        Ok(Self {
            header,
            entries,
            payloads,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ArchiveContainer {
        let header = ContainerHeader {
            width: 64,
            height: 48,
            frames: 20,
            layers: 4,
            anchor_interval: 16,
            n: 256,
            q: 7681,
            key_id: [9; 16],
            stripe_size: 65536,
            drive_count: 4,
            parity: PARITY_RAID5,
        };
        ArchiveContainer::new(header, vec![vec![1, 2, 3], vec![4; 10]])
    }

    #[test]
    fn roundtrip_and_offsets() {
        let c = sample();
        let bytes = c.to_bytes();
        assert_eq!(bytes.len(), HEADER_LEN + 2 * ENTRY_LEN + 13);
        assert_eq!(c.entries()[0].offset as usize, HEADER_LEN + 2 * ENTRY_LEN);
        assert_eq!(c.entries()[1].offset, c.entries()[0].offset + 3);
        assert_eq!(c.entries()[0].crc, 0x55BC801D);
        let back = ArchiveContainer::from_bytes(&bytes).unwrap();
        assert_eq!(back, c);
        back.verify().unwrap();
        for cut in 0..bytes.len() {
            assert!(ArchiveContainer::from_bytes(&bytes[..cut]).is_err());
        }
    }

    #[test]
    fn corrupt_payload_names_segment() {
        let mut bytes = sample().to_bytes();
        let last = bytes.len() - 1;
        bytes[last] ^= 0x40;
        let c = ArchiveContainer::from_bytes(&bytes).unwrap();
        assert!(c.segment(0).is_ok());
        assert!(matches!(c.verify(), Err(StorageError::Crc { segment: 1 })));
    }
}
