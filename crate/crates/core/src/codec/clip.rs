//! Raw clip files: `width u16 | height u16 | frames u32` (little-endian)
//! followed by the frames' 8-bit samples, frame after frame.

use super::{CodecError, Frame};

const HEADER_LEN: usize = 8;

pub fn read_raw_clip(bytes: &[u8]) -> Result<Vec<Frame>, CodecError> {
    if bytes.len() < HEADER_LEN {
        return Err(CodecError::Decode("raw clip shorter than its header".into()));
    }
    let w = usize::from(u16::from_le_bytes([bytes[0], bytes[1]]));
    let h = usize::from(u16::from_le_bytes([bytes[2], bytes[3]]));
    let n = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    if w == 0 || h == 0 || n == 0 {
        return Err(CodecError::Decode("raw clip has an empty dimension".into()));
    }
    let body = &bytes[HEADER_LEN..];
    let per = w * h;
    if per.checked_mul(n) != Some(body.len()) {
        return Err(CodecError::Decode(format!(
            "raw clip body is {} bytes, expected {n} frames of {w}x{h}",
            body.len()
        )));
    }
    body.chunks(per)
        .map(|c| Frame::new(w, h, c.to_vec()).map_err(|e| CodecError::Decode(e.to_string())))
        .collect()
}

pub fn write_raw_clip(frames: &[Frame]) -> Result<Vec<u8>, CodecError> {
    let first = frames
        .first()
        .ok_or_else(|| CodecError::InvalidInput("no frames".into()))?;
    if frames.iter().any(|f| !f.same_dims(first)) {
        return Err(CodecError::InvalidInput("frames differ in size".into()));
    }
    let n = u32::try_from(frames.len()).map_err(|_| CodecError::InvalidInput("too many frames".into()))?;
    let mut out = Vec::with_capacity(HEADER_LEN + frames.len() * first.samples().len());
    out.extend_from_slice(&(first.width() as u16).to_le_bytes());
    out.extend_from_slice(&(first.height() as u16).to_le_bytes());
    out.extend_from_slice(&n.to_le_bytes());
    for f in frames {
        out.extend_from_slice(f.samples());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_rejects() {
        let frames: Vec<Frame> = (0..3)
            .map(|t| Frame::from_fn(4, 2, |y, x| (y * 4 + x + t) as u8).unwrap())
            .collect();
        let bytes = write_raw_clip(&frames).unwrap();
        assert_eq!(&bytes[..8], &[4, 0, 2, 0, 3, 0, 0, 0]);
        assert_eq!(read_raw_clip(&bytes).unwrap(), frames);
        assert!(read_raw_clip(&bytes[..bytes.len() - 1]).is_err());
        assert!(read_raw_clip(&[0, 0, 1, 0, 1, 0, 0, 0]).is_err());
        assert!(write_raw_clip(&[]).is_err());
    }
}
