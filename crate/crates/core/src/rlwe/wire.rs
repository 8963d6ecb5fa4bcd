//! `SLWE` serialization of keys and ciphertexts.
//!
//! ```text
//! "SLWE" | version u8 | n u16 | q u16 | poly_0 | poly_1 | ...
//! ```
//!
//! Each polynomial is `n` coefficients packed as consecutive 13-bit
//! little-endian bit fields, zero-padded to a byte boundary. The number of
//! polynomials is implied by the payload length: two for a public key or a
//! ciphertext, one for a secret key, three for a key pair (`a`, `b`, `s`).
//! Secret coefficients are stored as their representative in `[0, q)`.

use thiserror::Error;

use super::{Ciphertext, KeyPair, PublicKey, SecretKey};
use crate::ring::{center, RingParams, RingPoly, SignedPoly};

pub const WIRE_MAGIC: &[u8; 4] = b"SLWE";
pub const WIRE_VERSION: u8 = 1;
const HEADER_LEN: usize = 9;
const COEFF_BITS: usize = 13;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WireError {
    #[error("bad magic")]
    Magic,
    #[error("unsupported version {0}")]
    Version(u8),
    #[error("truncated input")]
    Truncated,
    #[error("invalid header: {0}")]
    Header(String),
    #[error("expected {expected} polynomials worth of bytes, found {found} bytes")]
    Length { expected: usize, found: usize },
    #[error("coefficient {value} not reduced mod {q}")]
    Unreduced { value: u16, q: u16 },
    #[error("secret coefficient {0} outside the Gaussian tail")]
    SecretRange(i32),
    #[error("parameters differ from the expected ones")]
    ParamsMismatch,
}

/// Bytes occupied by one packed polynomial of degree `n`.
pub fn packed_len(n: usize) -> usize {
    (n * COEFF_BITS).div_ceil(8)
}

pub fn pack13(coeffs: &[u16], out: &mut Vec<u8>) {
    let mut acc = 0u32;
    let mut bits = 0usize;
    for &c in coeffs {
        acc |= u32::from(c & 0x1FFF) << bits;
        bits += COEFF_BITS;
        while bits >= 8 {
            out.push(acc as u8);
            acc >>= 8;
            bits -= 8;
        }
    }
    if bits > 0 {
        out.push(acc as u8);
    }
}

/// Inverse of [`pack13`]; `bytes` must hold exactly [`packed_len`]`(n)`.
pub fn unpack13(bytes: &[u8], n: usize) -> Result<Vec<u16>, WireError> {
    if bytes.len() != packed_len(n) {
        return Err(WireError::Length {
            expected: packed_len(n),
            found: bytes.len(),
        });
    }
    let mut out = Vec::with_capacity(n);
    let mut acc = 0u32;
    let mut bits = 0usize;
    let mut iter = bytes.iter();
    while out.len() < n {
        while bits < COEFF_BITS {
            let b = iter.next().ok_or(WireError::Truncated)?;
            acc |= u32::from(*b) << bits;
            bits += 8;
        }
        out.push((acc & 0x1FFF) as u16);
        acc >>= COEFF_BITS;
        bits -= COEFF_BITS;
    }
    Ok(out)
}

fn write_header(params: &RingParams, out: &mut Vec<u8>) {
    out.extend_from_slice(WIRE_MAGIC);
    out.push(WIRE_VERSION);
    out.extend_from_slice(&(params.n as u16).to_le_bytes());
    out.extend_from_slice(&params.q.to_le_bytes());
}

fn encode_polys(params: &RingParams, polys: &[&[u16]]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + polys.len() * packed_len(params.n));
    write_header(params, &mut out);
    for p in polys {
        pack13(p, &mut out);
    }
    out
}

/// Parses the header and `count` polynomials. Noise parameters come from
/// `RingParams::default()`; only `n` and `q` travel on the wire.
fn decode_polys(bytes: &[u8], count: usize) -> Result<(RingParams, Vec<RingPoly>), WireError> {
    if bytes.len() < HEADER_LEN {
        return Err(WireError::Truncated);
    }
    if &bytes[..4] != WIRE_MAGIC {
        return Err(WireError::Magic);
    }
    if bytes[4] != WIRE_VERSION {
        return Err(WireError::Version(bytes[4]));
    }
    let n = usize::from(u16::from_le_bytes([bytes[5], bytes[6]]));
    let q = u16::from_le_bytes([bytes[7], bytes[8]]);
    let params = RingParams {
        n,
        q,
        ..RingParams::default()
    };
    params
        .validate()
        .map_err(|e| WireError::Header(e.to_string()))?;
    let body = &bytes[HEADER_LEN..];
    let per = packed_len(n);
    if body.len() != per * count {
        return Err(WireError::Length {
            expected: count,
            found: body.len(),
        });
    }
    let polys = body
        .chunks_exact(per)
        .map(|chunk| {
            let coeffs = unpack13(chunk, n)?;
            if let Some(&value) = coeffs.iter().find(|&&c| c >= q) {
                return Err(WireError::Unreduced { value, q });
            }
            Ok(RingPoly::from_coeffs(coeffs, &params).expect("checked above"))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((params, polys))
}

fn secret_from_ring(poly: &RingPoly, params: &RingParams) -> Result<SignedPoly, WireError> {
    let coeffs = poly
        .coeffs()
        .iter()
        .map(|&c| {
            let v = center(c, params.q);
            if v.abs() > i32::from(params.tailcut) {
                Err(WireError::SecretRange(v))
            } else {
                Ok(v as i8)
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SignedPoly::from_coeffs(coeffs, params).expect("checked above"))
}

impl PublicKey {
    pub fn to_bytes(&self, params: &RingParams) -> Vec<u8> {
        encode_polys(params, &[self.a.coeffs(), self.b.coeffs()])
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<(Self, RingParams), WireError> {
        let (params, mut polys) = decode_polys(bytes, 2)?;
        let b = polys.pop().expect("two polys");
        let a = polys.pop().expect("two polys");
        Ok((Self { a, b }, params))
    }

    /// First 16 bytes of the SHA-256 of the serialized key.
    pub fn key_id(&self, params: &RingParams) -> [u8; 16] {
        use sha2::{Digest, Sha256};
        let digest = Sha256::digest(self.to_bytes(params));
        let mut id = [0u8; 16];
        id.copy_from_slice(&digest[..16]);
        id
    }
}

impl SecretKey {
    pub fn to_bytes(&self, params: &RingParams) -> Vec<u8> {
        encode_polys(params, &[self.s.to_ring(params.q).coeffs()])
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<(Self, RingParams), WireError> {
        let (params, polys) = decode_polys(bytes, 1)?;
        let s = secret_from_ring(&polys[0], &params)?;
        Ok((Self { s }, params))
    }
}

impl KeyPair {
    pub fn to_bytes(&self, params: &RingParams) -> Vec<u8> {
        let s = self.secret.s.to_ring(params.q);
        encode_polys(
            params,
            &[self.public.a.coeffs(), self.public.b.coeffs(), s.coeffs()],
        )
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<(Self, RingParams), WireError> {
        let (params, polys) = decode_polys(bytes, 3)?;
        let s = secret_from_ring(&polys[2], &params)?;
        let mut polys = polys.into_iter();
        let a = polys.next().expect("three polys");
        let b = polys.next().expect("three polys");
        Ok((
            Self {
                public: PublicKey { a, b },
                secret: SecretKey { s },
            },
            params,
        ))
    }
}

impl Ciphertext {
    pub fn to_bytes(&self, params: &RingParams) -> Vec<u8> {
        encode_polys(params, &[self.c1.coeffs(), self.c2.coeffs()])
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<(Self, RingParams), WireError> {
        let (params, mut polys) = decode_polys(bytes, 2)?;
        let c2 = polys.pop().expect("two polys");
        let c1 = polys.pop().expect("two polys");
        Ok((Self { c1, c2 }, params))
    }

    /// Headerless form: the two packed polynomials back to back.
    pub fn to_packed(&self, out: &mut Vec<u8>) {
        pack13(self.c1.coeffs(), out);
        pack13(self.c2.coeffs(), out);
    }

    pub fn from_packed(bytes: &[u8], params: &RingParams) -> Result<Self, WireError> {
        let per = packed_len(params.n);
        if bytes.len() != 2 * per {
            return Err(WireError::Length {
                expected: 2,
                found: bytes.len(),
            });
        }
        let poly = |chunk: &[u8]| -> Result<RingPoly, WireError> {
            let coeffs = unpack13(chunk, params.n)?;
            RingPoly::from_coeffs(coeffs, params).map_err(|_| WireError::Unreduced {
                value: 0x1FFF,
                q: params.q,
            })
        };
        Ok(Self {
            c1: poly(&bytes[..per])?,
            c2: poly(&bytes[per..])?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rlwe::{encrypt, keygen, Plaintext};
    use proptest::prelude::*;

    #[test]
    fn layout_of_header_and_sizes() {
        let p = RingParams::default();
        let keys = keygen(&p, 7).unwrap();
        let bytes = keys.to_bytes(&p);
        assert_eq!(&bytes[..4], b"SLWE");
        assert_eq!(bytes[4], 1);
        assert_eq!(u16::from_le_bytes([bytes[5], bytes[6]]), 256);
        assert_eq!(u16::from_le_bytes([bytes[7], bytes[8]]), 7681);
        assert_eq!(packed_len(256), 416);
        assert_eq!(bytes.len(), 9 + 3 * 416);
        let (back, params) = KeyPair::from_bytes(&bytes).unwrap();
        assert_eq!(back, keys);
        assert_eq!(params, p);
    }

    #[test]
    fn pack13_bit_layout() {
        let mut out = Vec::new();
        pack13(&[0x1FFF, 0x0001], &mut out);
        // 13 ones, then a one at bit 13, zero padded to 32 bits.
        assert_eq!(out, vec![0xFF, 0x3F, 0x00, 0x00]);
        assert_eq!(unpack13(&out, 2).unwrap(), vec![0x1FFF, 1]);
    }

    #[test]
    fn rejects_malformed() {
        let p = RingParams::default();
        let keys = keygen(&p, 1).unwrap();
        let bytes = keys.public.to_bytes(&p);
        assert_eq!(PublicKey::from_bytes(&bytes[..8]), Err(WireError::Truncated));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert_eq!(PublicKey::from_bytes(&bad), Err(WireError::Magic));
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert_eq!(PublicKey::from_bytes(&bad), Err(WireError::Version(9)));
        assert!(matches!(
            PublicKey::from_bytes(&bytes[..bytes.len() - 1]),
            Err(WireError::Length { .. })
        ));
        // A public key is not a key pair.
        assert!(KeyPair::from_bytes(&bytes).is_err());
        let mut bad = bytes.clone();
        bad[9] = 0xFF;
        bad[10] = 0xFF;
        assert!(matches!(PublicKey::from_bytes(&bad), Err(WireError::Unreduced { .. })));
    }

    #[test]
    fn secret_out_of_tail_is_rejected() {
        let p = RingParams::default();
        let mut coeffs = vec![0u16; 256];
        coeffs[0] = 100;
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"SLWE\x01");
        bytes.extend_from_slice(&256u16.to_le_bytes());
        bytes.extend_from_slice(&p.q.to_le_bytes());
        pack13(&coeffs, &mut bytes);
        assert_eq!(SecretKey::from_bytes(&bytes), Err(WireError::SecretRange(100)));
    }

    #[test]
    fn ciphertext_forms_roundtrip() {
        let p = RingParams::default();
        let keys = keygen(&p, 2).unwrap();
        let m = Plaintext::from_bytes(&[0xA5; 32], &p).unwrap();
        let ct = encrypt(&m, &keys.public, &p, 77).unwrap();
        assert_eq!(Ciphertext::from_bytes(&ct.to_bytes(&p)).unwrap().0, ct);
        let mut packed = Vec::new();
        ct.to_packed(&mut packed);
        assert_eq!(packed.len(), 832);
        assert_eq!(Ciphertext::from_packed(&packed, &p).unwrap(), ct);
        let sk = SecretKey::from_bytes(&keys.secret.to_bytes(&p)).unwrap().0;
        assert_eq!(sk, keys.secret);
    }

    proptest! {
        #[test]
        fn pack_unpack_identity(coeffs in proptest::collection::vec(0u16..8192, 1..64)) {
            let mut out = Vec::new();
            pack13(&coeffs, &mut out);
            prop_assert_eq!(out.len(), packed_len(coeffs.len()));
            prop_assert_eq!(unpack13(&out, coeffs.len()).unwrap(), coeffs);
        }
    }
}
