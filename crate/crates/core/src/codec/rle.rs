//! Zero-run / value coding of integer sequences.
//!
//! Each nonzero value is written as `varint(zero_run)` followed by
//! `zigzag_varint(value)`, where `zero_run` counts the zeros since the
//! previous nonzero value. Trailing zeros are implied by the sequence length,
//! which the decoder is told up front, so an all-zero sequence encodes to
//! nothing.

use super::CodecError;

pub fn write_varint(mut v: u64, out: &mut Vec<u8>) {
    while v >= 0x80 {
        out.push((v as u8) | 0x80);
        v >>= 7;
    }
    out.push(v as u8);
}

pub fn read_varint(bytes: &[u8], pos: &mut usize) -> Result<u64, CodecError> {
    let mut value = 0u64;
    for shift in (0..64).step_by(7) {
        let b = *bytes
            .get(*pos)
            .ok_or_else(|| CodecError::Decode("truncated varint".into()))?;
        *pos += 1;
        let chunk = u64::from(b & 0x7F);
        if shift == 63 && chunk > 1 {
            return Err(CodecError::Decode("varint overflow".into()));
        }
        value |= chunk << shift;
        if b & 0x80 == 0 {
            return Ok(value);
        }
    }
    Err(CodecError::Decode("varint too long".into()))
}

#[inline]
pub fn zigzag(v: i64) -> u64 {
    ((v << 1) ^ (v >> 63)) as u64
}

#[inline]
pub fn unzigzag(v: u64) -> i64 {
    ((v >> 1) as i64) ^ -((v & 1) as i64)
}

pub fn encode_runs(values: impl IntoIterator<Item = i32>, out: &mut Vec<u8>) {
    let mut run = 0u64;
    for v in values {
        if v == 0 {
            run += 1;
        } else {
            write_varint(run, out);
            write_varint(zigzag(i64::from(v)), out);
            run = 0;
        }
    }
}

/// Decodes exactly `count` values; every value must satisfy
/// `|v| <= limit`.
pub fn decode_runs(bytes: &[u8], count: usize, limit: i64) -> Result<Vec<i32>, CodecError> {
    let mut out = vec![0i32; count];
    let mut pos = 0usize;
    let mut idx = 0usize;
    while pos < bytes.len() {
        let run = read_varint(bytes, &mut pos)?;
        idx = usize::try_from(run)
            .ok()
            .and_then(|r| idx.checked_add(r))
            .filter(|&i| i < count)
            .ok_or_else(|| CodecError::Decode("zero run past end of block".into()))?;
        let v = unzigzag(read_varint(bytes, &mut pos)?);
        if v == 0 {
            return Err(CodecError::Decode("explicit zero value".into()));
        }
        if v.unsigned_abs() > limit.unsigned_abs() {
            return Err(CodecError::Decode(format!("value {v} exceeds {limit}")));
        }
        out[idx] = v as i32;
        idx += 1;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zigzag_mapping() {
        assert_eq!(zigzag(0), 0);
        assert_eq!(zigzag(-1), 1);
        assert_eq!(zigzag(1), 2);
        assert_eq!(zigzag(-2), 3);
        assert_eq!(unzigzag(zigzag(i64::MIN)), i64::MIN);
    }

    #[test]
    fn zero_sequence_is_empty() {
        let mut out = Vec::new();
        encode_runs(vec![0; 4096], &mut out);
        assert!(out.is_empty());
        assert_eq!(decode_runs(&out, 4096, 255).unwrap(), vec![0; 4096]);
    }

    #[test]
    fn known_encoding() {
        let mut out = Vec::new();
        encode_runs([0, 0, 5, -1, 0], &mut out);
        assert_eq!(out, vec![2, 10, 0, 1]);
    }

    #[test]
    fn rejects_corrupt_input() {
        assert!(decode_runs(&[5, 2], 3, 255).is_err()); // run past end
        assert!(decode_runs(&[0, 0], 3, 255).is_err()); // explicit zero
        assert!(decode_runs(&[0], 3, 255).is_err()); // truncated
        assert!(decode_runs(&[0, 0x80, 0x04], 3, 255).is_err()); // 256 > limit
        assert!(decode_runs(&[0xFF; 11], 3, 255).is_err());
    }

    proptest! {
        #[test]
        fn runs_roundtrip(values in proptest::collection::vec(
            prop_oneof![3 => Just(0i32), 1 => -300i32..300], 0..200)) {
            let mut out = Vec::new();
            encode_runs(values.iter().copied(), &mut out);
            prop_assert_eq!(decode_runs(&out, values.len(), 300).unwrap(), values);
        }
    }
}
