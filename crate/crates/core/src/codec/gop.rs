//! Groups of pictures and the `SGOP` byte layout.
//!
//! ```text
//! "SGOP" | version u8 | width u16 | height u16 | anchor_interval u8 | K u8 |
//! base_step u8 | anchor_len u32 | anchor | { record_len u32 | record }*
//! record = varint(mv_len) | mv | K u8 | { step u8 | varint(len) | payload }*K
//! ```
//!
//! All integers are little-endian. The anchor is a left-neighbour DPCM
//! residual (first column predicted from above, the origin from 128) passed
//! through the run-length coder, which keeps it lossless. Motion fields are
//! run-length coded as the flattened `dy, dx` component sequence.

use super::frame::{Frame, MotionVectorField};
use super::layers::{decode_layers, encode_layers, layer_step, LayeredBitstream};
use super::motion::{estimate_motion, predict, reconstruct, residual};
use super::rle::{decode_runs, encode_runs, read_varint, write_varint};
use super::{CodecError, CodecParams, BLOCK_SIZE};

const MAGIC: &[u8; 4] = b"SGOP";
const VERSION: u8 = 1;
const HEADER_LEN: usize = 4 + 1 + 2 + 2 + 1 + 1 + 1 + 4;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameRecord {
    pub motion: MotionVectorField,
    pub residual: LayeredBitstream,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedGop {
    width: usize,
    height: usize,
    anchor_interval: u8,
    layers: u8,
    base_step: u8,
    anchor: Vec<u8>,
    records: Vec<FrameRecord>,
}

fn encode_anchor(frame: &Frame) -> Vec<u8> {
    let w = frame.width();
    let s = frame.samples();
    let diffs = (0..s.len()).map(|i| {
        let pred = if i % w > 0 {
            s[i - 1]
        } else if i >= w {
            s[i - w]
        } else {
            128
        };
        i32::from(s[i]) - i32::from(pred)
    });
    let mut out = Vec::new();
    encode_runs(diffs, &mut out);
    out
}

fn decode_anchor(bytes: &[u8], width: usize, height: usize) -> Result<Frame, CodecError> {
    let diffs = decode_runs(bytes, width * height, 255)?;
    let mut s = vec![0u8; width * height];
    for i in 0..s.len() {
        let pred = if i % width > 0 {
            s[i - 1]
        } else if i >= width {
            s[i - width]
        } else {
            128
        };
        let v = i32::from(pred) + diffs[i];
        s[i] = u8::try_from(v)
            .map_err(|_| CodecError::Decode(format!("anchor sample {v} out of range")))?;
    }
    Frame::new(width, height, s)
}

fn encode_motion(mv: &MotionVectorField, out: &mut Vec<u8>) {
    let mut bytes = Vec::new();
    encode_runs(
        mv.vectors()
            .iter()
            .flat_map(|&(dy, dx)| [i32::from(dy), i32::from(dx)]),
        &mut bytes,
    );
    write_varint(bytes.len() as u64, out);
    out.extend_from_slice(&bytes);
}

fn decode_motion(bytes: &[u8], pos: &mut usize, rows: usize, cols: usize) -> Result<MotionVectorField, CodecError> {
    let len = usize::try_from(read_varint(bytes, pos)?)
        .map_err(|_| CodecError::Decode("motion length overflow".into()))?;
    let end = pos
        .checked_add(len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| CodecError::Decode("truncated motion field".into()))?;
    let comps = decode_runs(&bytes[*pos..end], 2 * rows * cols, i64::from(i8::MAX))?;
    *pos = end;
    let vectors = comps.chunks_exact(2).map(|c| (c[0] as i8, c[1] as i8)).collect();
    MotionVectorField::new(BLOCK_SIZE, rows, cols, vectors)
}

fn check_sequence(frames: &[Frame]) -> Result<(), CodecError> {
    let first = frames
        .first()
        .ok_or_else(|| CodecError::InvalidInput("empty frame sequence".into()))?;
    first.check_blocks(BLOCK_SIZE)?;
    if let Some(i) = frames.iter().position(|f| !f.same_dims(first)) {
        return Err(CodecError::InvalidInput(format!(
            "frame {i} is {}x{}, expected {}x{}",
            frames[i].width(),
            frames[i].height(),
            first.width(),
            first.height()
        )));
    }
    Ok(())
}

/// Encodes one group and also returns the encoder's own reconstructions,
/// which are the prediction references.
pub(crate) fn encode_group(frames: &[Frame], params: &CodecParams) -> Result<(EncodedGop, Vec<Frame>), CodecError> {
    params.validate()?;
    check_sequence(frames)?;
    if frames.len() > params.anchor_interval {
        return Err(CodecError::InvalidInput(format!(
            "{} frames exceed anchor interval {}",
            frames.len(),
            params.anchor_interval
        )));
    }
    let anchor = encode_anchor(&frames[0]);
    let mut reference = frames[0].clone();
    let mut recon = vec![reference.clone()];
    let mut records = Vec::with_capacity(frames.len() - 1);
    for cur in &frames[1..] {
        let motion = estimate_motion(&reference, cur, BLOCK_SIZE, params.search_radius)?;
        let predicted = predict(&reference, &motion)?;
        let r = residual(cur, &predicted)?;
        let layered = encode_layers(&r, params.layers, params.base_step)?;
        reference = reconstruct(&predicted, &decode_layers(&layered, params.layers)?)?;
        recon.push(reference.clone());
        records.push(FrameRecord {
            motion,
            residual: layered,
        });
    }
    let gop = EncodedGop {
        width: frames[0].width(),
        height: frames[0].height(),
        anchor_interval: params.anchor_interval as u8,
        layers: params.layers as u8,
        base_step: params.base_step,
        anchor,
        records,
    };
    Ok((gop, recon))
}

/// Encodes a single group of at most `anchor_interval` frames.
pub fn encode_gop(frames: &[Frame], params: &CodecParams) -> Result<EncodedGop, CodecError> {
    encode_group(frames, params).map(|(g, _)| g)
}

/// Splits `frames` into groups of `anchor_interval` and encodes them,
/// groups in parallel.
pub fn encode_sequence(frames: &[Frame], params: &CodecParams) -> Result<Vec<EncodedGop>, CodecError> {
    params.validate()?;
    check_sequence(frames)?;
    let groups: Vec<&[Frame]> = frames.chunks(params.anchor_interval).collect();
    let workers = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(groups.len());
    let mut results: Vec<Option<Result<EncodedGop, CodecError>>> = vec![None; groups.len()];
    std::thread::scope(|scope| {
        for (t, slots) in results.chunks_mut(groups.len().div_ceil(workers)).enumerate() {
            let first = t * groups.len().div_ceil(workers);
            let groups = &groups;
            scope.spawn(move || {
                for (i, slot) in slots.iter_mut().enumerate() {
                    *slot = Some(encode_gop(groups[first + i], params));
                }
            });
        }
    });
    results.into_iter().map(|r| r.expect("every group encoded")).collect()
}

/// Reconstructs the group using the first `k_max` residual layers.
pub fn decode_gop(g: &EncodedGop, k_max: usize) -> Result<Vec<Frame>, CodecError> {
    if k_max == 0 || k_max > usize::from(g.layers) {
        return Err(CodecError::InvalidInput(format!(
            "k_max {k_max} outside 1..={}",
            g.layers
        )));
    }
    let mut reference = decode_anchor(&g.anchor, g.width, g.height)?;
    let mut out = Vec::with_capacity(g.records.len() + 1);
    out.push(reference.clone());
    for rec in &g.records {
        let predicted = predict(&reference, &rec.motion)?;
        reference = reconstruct(&predicted, &decode_layers(&rec.residual, k_max)?)?;
        out.push(reference.clone());
    }
    Ok(out)
}

pub fn decode_sequence(groups: &[EncodedGop], k_max: usize) -> Result<Vec<Frame>, CodecError> {
    let mut out = Vec::new();
    for g in groups {
        out.extend(decode_gop(g, k_max)?);
    }
    Ok(out)
}

fn take<'a>(bytes: &'a [u8], pos: &mut usize, n: usize) -> Result<&'a [u8], CodecError> {
    let end = pos
        .checked_add(n)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| CodecError::Decode("truncated group".into()))?;
    let s = &bytes[*pos..end];
    *pos = end;
    Ok(s)
}

impl EncodedGop {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn num_layers(&self) -> usize {
        usize::from(self.layers)
    }

    pub fn base_step(&self) -> u8 {
        self.base_step
    }

    pub fn anchor_interval(&self) -> usize {
        usize::from(self.anchor_interval)
    }

    pub fn anchor_payload(&self) -> &[u8] {
        &self.anchor
    }

    pub fn records(&self) -> &[FrameRecord] {
        &self.records
    }

    pub fn frame_count(&self) -> usize {
        self.records.len() + 1
    }

    fn record_bytes(rec: &FrameRecord) -> Vec<u8> {
        let mut out = Vec::new();
        encode_motion(&rec.motion, &mut out);
        rec.residual.write(&mut out);
        out
    }

    /// Serialized size of the predicted-frame records, length prefixes
    /// included.
    pub fn records_len(&self) -> usize {
        self.records
            .iter()
            .map(|r| 4 + Self::record_bytes(r).len())
            .sum()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.anchor.len());
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.extend_from_slice(&(self.width as u16).to_le_bytes());
        out.extend_from_slice(&(self.height as u16).to_le_bytes());
        out.push(self.anchor_interval);
        out.push(self.layers);
        out.push(self.base_step);
        out.extend_from_slice(&(self.anchor.len() as u32).to_le_bytes());
        out.extend_from_slice(&self.anchor);
        for rec in &self.records {
            let body = Self::record_bytes(rec);
            out.extend_from_slice(&(body.len() as u32).to_le_bytes());
            out.extend_from_slice(&body);
        }
        out
    }

    /// Parses and structurally validates a group. Sample-level corruption in
    /// the payloads surfaces from [`decode_gop`].
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CodecError> {
        let mut pos = 0;
        let header = take(bytes, &mut pos, HEADER_LEN)?;
        if &header[..4] != MAGIC {
            return Err(CodecError::Decode("bad magic".into()));
        }
        if header[4] != VERSION {
            return Err(CodecError::Decode(format!("unsupported version {}", header[4])));
        }
        let width = usize::from(u16::from_le_bytes([header[5], header[6]]));
        let height = usize::from(u16::from_le_bytes([header[7], header[8]]));
        let (anchor_interval, layers, base_step) = (header[9], header[10], header[11]);
        if width == 0 || height == 0 || width % BLOCK_SIZE != 0 || height % BLOCK_SIZE != 0 {
            return Err(CodecError::Decode(format!("bad dimensions {width}x{height}")));
        }
        if anchor_interval == 0 || layers == 0 || !base_step.is_power_of_two() {
            return Err(CodecError::Decode("bad codec parameters".into()));
        }
        let anchor_len = u32::from_le_bytes(header[12..16].try_into().unwrap()) as usize;
        let anchor = take(bytes, &mut pos, anchor_len)?.to_vec();
        let (rows, cols) = (height / BLOCK_SIZE, width / BLOCK_SIZE);
        let mut records = Vec::new();
        while pos < bytes.len() {
            if records.len() + 1 >= usize::from(anchor_interval) {
                return Err(CodecError::Decode("more records than the anchor interval allows".into()));
            }
            let len_bytes = take(bytes, &mut pos, 4)?;
            let len = u32::from_le_bytes(len_bytes.try_into().unwrap()) as usize;
            let body = take(bytes, &mut pos, len)?;
            let mut p = 0;
            let motion = decode_motion(body, &mut p, rows, cols)?;
            let residual = LayeredBitstream::read(body, &mut p, width, height)?;
            if p != body.len() {
                return Err(CodecError::Decode("trailing bytes in record".into()));
            }
            if residual.num_layers() != usize::from(layers)
                || residual
                    .layers()
                    .iter()
                    .enumerate()
                    .any(|(k, l)| l.step != layer_step(base_step, k + 1))
            {
                return Err(CodecError::Decode("layer steps disagree with header".into()));
            }
            records.push(FrameRecord { motion, residual });
        }
        Ok(Self {
            width,
            height,
            anchor_interval,
            layers,
            base_step,
            anchor,
            records,
        })
    }
}
