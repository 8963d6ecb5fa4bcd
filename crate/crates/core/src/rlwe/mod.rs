//! Ring-LWE public-key encryption over `Z_q[x]/(x^n + 1)`.
//!
//! Key generation, encryption and decryption follow the LPR construction:
//!
//! ```text
//! keygen:  a <- uniform, s, e <- Gaussian,      b  = a*s + e
//! encrypt: r, e1, e2 <- Gaussian,               c1 = a*r + e1
//!                                               c2 = b*r + e2 + encode(m)
//! decrypt: decode(c2 - c1*s)
//! ```
//!
//! Every product goes through [`hspm_multiply`], so the Gaussian operand is
//! always the signed `b` input of the kernel. Randomness comes from labeled
//! [`SplitMix64`] streams (`"a"`, `"s"`, `"e"` for keys and `"r"`, `"e1"`,
//! `"e2"` for encryption), which makes keys and ciphertexts pure functions of
//! their seed.

mod gaussian;
mod wire;

pub use gaussian::{sample_gaussian_signed, CdtSampler};
pub use wire::{pack13, unpack13, packed_len, WireError, WIRE_MAGIC, WIRE_VERSION};

use thiserror::Error;

use crate::mulkern::{hspm_multiply, KernelError};
use crate::ring::{center, RingError, RingParams, RingPoly, SignedPoly};
use crate::rng::SplitMix64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RlweError {
    #[error(transparent)]
    Ring(#[from] RingError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error("plaintext must have {expected} bits, got {got}")]
    PlaintextLength { expected: usize, got: usize },
}

/// A message of exactly `n` bits.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Plaintext {
    bits: Vec<bool>,
}

impl Plaintext {
    pub fn new(bits: Vec<bool>, params: &RingParams) -> Result<Self, RlweError> {
        if bits.len() != params.n {
            return Err(RlweError::PlaintextLength {
                expected: params.n,
                got: bits.len(),
            });
        }
        Ok(Self { bits })
    }

    /// Bits taken least-significant first from each byte.
    pub fn from_bytes(bytes: &[u8], params: &RingParams) -> Result<Self, RlweError> {
        let bits = bytes
            .iter()
            .flat_map(|&b| (0..8).map(move |i| (b >> i) & 1 == 1))
            .collect();
        Self::new(bits, params)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.bits
            .chunks(8)
            .map(|chunk| {
                chunk
                    .iter()
                    .enumerate()
                    .fold(0u8, |acc, (i, &bit)| acc | (u8::from(bit) << i))
            })
            .collect()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublicKey {
    pub a: RingPoly,
    pub b: RingPoly,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SecretKey {
    pub s: SignedPoly,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyPair {
    pub public: PublicKey,
    pub secret: SecretKey,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ciphertext {
    pub c1: RingPoly,
    pub c2: RingPoly,
}

/// Coefficient `i` is `bit_i * floor(q/2)`.
pub fn encode_message(m: &Plaintext, params: &RingParams) -> RingPoly {
    let half = params.half_q();
    let coeffs = m.bits.iter().map(|&b| if b { half } else { 0 }).collect();
    RingPoly::from_coeffs(coeffs, params).expect("half q is reduced")
}

/// A coefficient decodes to one when its centered magnitude lies within
/// `q/4` of `floor(q/2)`.
pub fn decode_message(m: &RingPoly, params: &RingParams) -> Plaintext {
    let half = i32::from(params.half_q());
    let quarter = i32::from(params.q) / 4;
    let bits = m
        .centered(params.q)
        .into_iter()
        .map(|c| half - c.abs() <= quarter)
        .collect();
    Plaintext { bits }
}

fn uniform_poly(params: &RingParams, rng: &mut SplitMix64) -> RingPoly {
    let q = u64::from(params.q);
    let coeffs = (0..params.n).map(|_| rng.next_below(q) as u16).collect();
    RingPoly::from_coeffs(coeffs, params).expect("uniform draws are reduced")
}

pub fn keygen(params: &RingParams, seed: u64) -> Result<KeyPair, RlweError> {
    params.validate()?;
    let a = uniform_poly(params, &mut SplitMix64::stream(seed, "a"));
    let s = sample_gaussian_signed(params, seed, "s");
    let e = sample_gaussian_signed(params, seed, "e");
    let (b, _) = hspm_multiply(&a, &s, &e.to_ring(params.q), params)?;
    Ok(KeyPair {
        public: PublicKey { a, b },
        secret: SecretKey { s },
    })
}

pub fn encrypt(
    m: &Plaintext,
    pk: &PublicKey,
    params: &RingParams,
    seed: u64,
) -> Result<Ciphertext, RlweError> {
    params.validate()?;
    if m.bits.len() != params.n {
        return Err(RlweError::PlaintextLength {
            expected: params.n,
            got: m.bits.len(),
        });
    }
    let r = sample_gaussian_signed(params, seed, "r");
    let e1 = sample_gaussian_signed(params, seed, "e1");
    let e2 = sample_gaussian_signed(params, seed, "e2");
    let (c1, _) = hspm_multiply(&pk.a, &r, &e1.to_ring(params.q), params)?;
    let offset = e2.to_ring(params.q).add(&encode_message(m, params), params.q);
    let (c2, _) = hspm_multiply(&pk.b, &r, &offset, params)?;
    Ok(Ciphertext { c1, c2 })
}

/// `c2 - c1*s` before decoding; the message plus accumulated noise.
pub fn decrypt_raw(ct: &Ciphertext, sk: &SecretKey, params: &RingParams) -> Result<RingPoly, RlweError> {
    let (c1s, _) = hspm_multiply(&ct.c1, &sk.s, &RingPoly::zero(params.n), params)?;
    Ok(ct.c2.sub(&c1s, params.q))
}

/// A wrong key yields garbage bits rather than an error.
pub fn decrypt(ct: &Ciphertext, sk: &SecretKey, params: &RingParams) -> Result<Plaintext, RlweError> {
    Ok(decode_message(&decrypt_raw(ct, sk, params)?, params))
}

/// Centered noise `c2 - c1*s - encode(m)`.
pub fn decryption_noise(
    ct: &Ciphertext,
    sk: &SecretKey,
    m: &Plaintext,
    params: &RingParams,
) -> Result<Vec<i32>, RlweError> {
    let raw = decrypt_raw(ct, sk, params)?;
    Ok(raw
        .sub(&encode_message(m, params), params.q)
        .coeffs()
        .iter()
        .map(|&c| center(c, params.q))
        .collect())
}
