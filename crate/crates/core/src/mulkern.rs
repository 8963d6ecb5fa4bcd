//! Software models of the polynomial multiplication datapath.
//!
//! * SDMM: one wide multiplication `a * (|b0| + |b1| << 18)` yields two
//!   18-bit partial products, each reduced separately. Negative operands are
//!   handled after reduction by `r = (q - r) mod q`, steered by the sign bit.
//! * Approximate reduction for `q = 7681 = 2^13 - 2^9 + 1`: since
//!   `2^13 = 2^9 - 1 (mod q)`, the high bits fold back with one shift, one
//!   subtraction and one addition. Two folds bring any 18-bit value below
//!   `2q`, so a single conditional subtraction finishes the job.
//! * HSPM: schoolbook negacyclic multiply-accumulate `d = a*b + c` over
//!   `n/2` dual-product lanes, with a three-stage cycle account.

use thiserror::Error;

use crate::ring::{add_mod, sub_mod, RingParams, RingPoly, SignedPoly};

/// The modulus the shift-fold reduction is built for.
pub const FOLD_MODULUS: u16 = 7681;
/// Width of each packed product field.
pub const FIELD_BITS: u32 = 18;
/// Largest magnitude a signed-Gaussian operand may carry (6-bit signed).
pub const MAX_SIGNED_MAGNITUDE: i8 = 31;
/// Multiplier plus reduction latency of one SDMM unit, in cycles.
pub const SDMM_LATENCY: u64 = 2;

const FIELD_MASK: u64 = (1 << FIELD_BITS) - 1;
const FOLD_SHIFT: u32 = 13;
const FOLD_LOW_MASK: u32 = (1 << FOLD_SHIFT) - 1;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KernelError {
    #[error("operand {name} = {value} out of range")]
    OperandOutOfRange { name: &'static str, value: i64 },
    #[error("polynomial {name} has degree {got}, expected {expected}")]
    DegreeMismatch {
        name: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid kernel parameters: {0}")]
    Params(String),
}

/// Two partial products sharing one multiplier output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PackedProduct {
    raw: u64,
}

impl PackedProduct {
    /// `a * (m0 + m1 * 2^18)` for magnitudes `m0, m1 <= 31` and `a < 2^13`.
    pub fn multiply(a: u16, m0: u8, m1: u8) -> Self {
        debug_assert!(a < 1 << 13 && m0 <= 31 && m1 <= 31);
        let packed_b = u64::from(m0) | (u64::from(m1) << FIELD_BITS);
        Self {
            raw: u64::from(a) * packed_b,
        }
    }

    pub fn raw(self) -> u64 {
        self.raw
    }

    /// Lowest 18 bits: `a * m0`.
    pub fn low(self) -> u32 {
        (self.raw & FIELD_MASK) as u32
    }

    /// Next 18 bits: `a * m1`.
    pub fn high(self) -> u32 {
        ((self.raw >> FIELD_BITS) & FIELD_MASK) as u32
    }
}

/// Two fold rounds of `x = lo + (hi << 9) - hi` with `hi = x >> 13`.
///
/// The result is congruent to `x` mod 7681 and below `2 * 7681` for every
/// `x < 2^18`.
#[inline]
pub fn fold_twice(x: u32) -> u32 {
    let once = fold(x);
    fold(once)
}

#[inline]
fn fold(x: u32) -> u32 {
    let hi = x >> FOLD_SHIFT;
    (x & FOLD_LOW_MASK) + (hi << 9) - hi
}

/// Reduces an 18-bit value modulo 7681 with the shift-fold datapath.
pub fn mod_reduce_approx(x: u32) -> Result<u16, KernelError> {
    if x >= 1 << FIELD_BITS {
        return Err(KernelError::OperandOutOfRange {
            name: "x",
            value: i64::from(x),
        });
    }
    Ok(reduce_unchecked(x))
}

#[inline]
fn reduce_unchecked(x: u32) -> u16 {
    let folded = fold_twice(x);
    let q = u32::from(FOLD_MODULUS);
    (if folded >= q { folded - q } else { folded }) as u16
}

#[inline]
fn reduce_for(x: u32, q: u16) -> u16 {
    if q == FOLD_MODULUS {
        reduce_unchecked(x)
    } else {
        // Other moduli take the exact path.
        (x % u32::from(q)) as u16
    }
}

#[inline]
fn apply_sign(r: u16, negative: bool, q: u16) -> u16 {
    if negative && r != 0 {
        q - r
    } else {
        r
    }
}

/// Signed double modular multiply: `(a*b0 mod q, a*b1 mod q)` from one
/// packed multiplication.
pub fn sdmm_packed(a: u16, b0: i8, b1: i8, q: u16) -> Result<(u16, u16), KernelError> {
    if !(2..1 << 13).contains(&q) {
        return Err(KernelError::OperandOutOfRange {
            name: "q",
            value: i64::from(q),
        });
    }
    if a >= q {
        return Err(KernelError::OperandOutOfRange {
            name: "a",
            value: i64::from(a),
        });
    }
    for (name, b) in [("b0", b0), ("b1", b1)] {
        if !(-MAX_SIGNED_MAGNITUDE..=MAX_SIGNED_MAGNITUDE).contains(&b) {
            return Err(KernelError::OperandOutOfRange {
                name,
                value: i64::from(b),
            });
        }
    }
    Ok(sdmm_unchecked(a, b0, b1, q))
}

#[inline]
fn sdmm_unchecked(a: u16, b0: i8, b1: i8, q: u16) -> (u16, u16) {
    let p = PackedProduct::multiply(a, b0.unsigned_abs(), b1.unsigned_abs());
    let r0 = reduce_for(p.low(), q);
    let r1 = reduce_for(p.high(), q);
    (apply_sign(r0, b0 < 0, q), apply_sign(r1, b1 < 0, q))
}

/// Per-stage cycle account of one HSPM call.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CycleCount {
    pub load: u64,
    pub compute: u64,
    pub readout: u64,
    pub total: u64,
}

impl CycleCount {
    pub fn new(load: u64, compute: u64, readout: u64) -> Self {
        Self {
            load,
            compute,
            readout,
            total: load + compute + readout,
        }
    }

    /// Serial load of `b`, `n` broadcast steps plus pipeline fill, serial
    /// readout.
    pub fn for_degree(n: usize) -> Self {
        let n = n as u64;
        Self::new(n, n + SDMM_LATENCY, n)
    }
}

/// Number of dual-product SDMM lanes for degree `n`.
pub fn hspm_lanes(n: usize) -> usize {
    n / 2
}

/// `d = a*b + c` in `Z_q[x]/(x^n + 1)`.
///
/// Each of the `n` steps broadcasts one coefficient `a_i` to all lanes;
/// lane `j` multiplies it with `b_{2j}` and `b_{2j+1}` in one SDMM and adds
/// the products into accumulators `i + 2j` and `i + 2j + 1`, negated when
/// the index wraps past `n - 1`.
pub fn hspm_multiply(
    a: &RingPoly,
    b: &SignedPoly,
    c: &RingPoly,
    params: &RingParams,
) -> Result<(RingPoly, CycleCount), KernelError> {
    params
        .validate()
        .map_err(|e| KernelError::Params(e.to_string()))?;
    let n = params.n;
    let q = params.q;
    for (name, len) in [("a", a.len()), ("b", b.len()), ("c", c.len())] {
        if len != n {
            return Err(KernelError::DegreeMismatch {
                name,
                expected: n,
                got: len,
            });
        }
    }
    if let Some(&v) = a.coeffs().iter().chain(c.coeffs()).find(|&&v| v >= q) {
        return Err(KernelError::OperandOutOfRange {
            name: "a/c",
            value: i64::from(v),
        });
    }
    if let Some(&v) = b
        .coeffs()
        .iter()
        .find(|&&v| !(-MAX_SIGNED_MAGNITUDE..=MAX_SIGNED_MAGNITUDE).contains(&v))
    {
        return Err(KernelError::OperandOutOfRange {
            name: "b",
            value: i64::from(v),
        });
    }

    let b = b.coeffs();
    let mut acc = vec![0u16; n];
    let accumulate = |acc: &mut [u16], idx: usize, p: u16| {
        if idx < n {
            acc[idx] = add_mod(acc[idx], p, q);
        } else {
            acc[idx - n] = sub_mod(acc[idx - n], p, q);
        }
    };
    for (i, &ai) in a.coeffs().iter().enumerate() {
        for lane in 0..hspm_lanes(n) {
            let j = 2 * lane;
            let (p0, p1) = sdmm_unchecked(ai, b[j], b[j + 1], q);
            accumulate(&mut acc, i + j, p0);
            accumulate(&mut acc, i + j + 1, p1);
        }
    }
    let d = acc
        .iter()
        .zip(c.coeffs())
        .map(|(&p, &ci)| add_mod(p, ci, q))
        .collect();
    let d = RingPoly::from_coeffs(d, params).expect("accumulators stay reduced");
    Ok((d, CycleCount::for_degree(n)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn naive_negacyclic(a: &[u16], b: &[i8], c: &[u16], q: u16) -> Vec<u16> {
        let n = a.len();
        let mut out = vec![0i64; n];
        for i in 0..n {
            for j in 0..n {
                let prod = i64::from(a[i]) * i64::from(b[j]);
                if i + j < n {
                    out[i + j] += prod;
                } else {
                    out[i + j - n] -= prod;
                }
            }
        }
        out.iter()
            .zip(c)
            .map(|(&v, &ci)| (v + i64::from(ci)).rem_euclid(i64::from(q)) as u16)
            .collect()
    }

    fn random_triple(g: &mut SplitMix64, p: &RingParams) -> (RingPoly, SignedPoly, RingPoly) {
        let q = u64::from(p.q);
        let a = (0..p.n).map(|_| g.next_below(q) as u16).collect();
        let b = (0..p.n).map(|_| g.next_below(63) as i8 - 31).collect();
        let c = (0..p.n).map(|_| g.next_below(q) as u16).collect();
        (
            RingPoly::from_coeffs(a, p).unwrap(),
            SignedPoly::from_coeffs(b, p).unwrap(),
            RingPoly::from_coeffs(c, p).unwrap(),
        )
    }

    #[test]
    fn sdmm_examples() {
        assert_eq!(sdmm_packed(5000, -3, 7, 7681).unwrap(), (362, 4276));
        assert_eq!(sdmm_packed(1234, 0, 0, 7681).unwrap(), (0, 0));
        assert_eq!(sdmm_packed(1, 31, -31, 7681).unwrap(), (31, 7650));
    }

    #[test]
    fn sdmm_rejects_out_of_range() {
        assert!(sdmm_packed(7681, 1, 1, 7681).is_err());
        assert!(sdmm_packed(1, 32, 1, 7681).is_err());
        assert!(sdmm_packed(1, 1, -32, 7681).is_err());
    }

    #[test]
    fn sdmm_other_modulus_uses_exact_path() {
        assert_eq!(sdmm_packed(3000, -5, 9, 3329).unwrap(), (1645, 368));
    }

    #[test]
    fn reduce_examples() {
        assert_eq!(mod_reduce_approx(0).unwrap(), 0);
        assert_eq!(mod_reduce_approx(7681).unwrap(), 0);
        assert_eq!(mod_reduce_approx(100_000).unwrap(), 147);
        assert_eq!(mod_reduce_approx((1 << 18) - 1).unwrap(), (262_143 % 7681) as u16);
        assert!(mod_reduce_approx(1 << 18).is_err());
    }

    #[test]
    fn packed_fields_do_not_overlap_at_extremes() {
        let p = PackedProduct::multiply(7680, 31, 31);
        assert_eq!(p.low(), 7680 * 31);
        assert_eq!(p.high(), 7680 * 31);
        assert!(p.low() < 1 << 18);
    }

    #[test]
    fn hspm_identity_and_cycles() {
        let p = RingParams::default();
        let mut g = SplitMix64::new(11);
        let (a, _, _) = random_triple(&mut g, &p);
        let one = SignedPoly::monomial(0, &p);
        let (d, cycles) = hspm_multiply(&a, &one, &RingPoly::zero(p.n), &p).unwrap();
        assert_eq!(d, a);
        assert_eq!(cycles, CycleCount::new(256, 258, 256));
        assert_eq!(cycles.total, 770);
        assert_eq!(hspm_lanes(256), 128);
    }

    #[test]
    fn hspm_wraps_negacyclically() {
        let p = RingParams::default();
        let mut a = vec![0u16; 256];
        a[255] = 1;
        let a = RingPoly::from_coeffs(a, &p).unwrap();
        let x = SignedPoly::monomial(1, &p);
        let (d, _) = hspm_multiply(&a, &x, &RingPoly::zero(256), &p).unwrap();
        // x^255 * x = x^256 = -1
        assert_eq!(d.coeffs()[0], 7680);
        assert!(d.coeffs()[1..].iter().all(|&v| v == 0));
    }

    #[test]
    fn hspm_matches_naive_on_random_inputs() {
        let p = RingParams::default();
        let mut g = SplitMix64::new(2024);
        for _ in 0..5 {
            let (a, b, c) = random_triple(&mut g, &p);
            let (d, _) = hspm_multiply(&a, &b, &c, &p).unwrap();
            assert_eq!(d.coeffs(), naive_negacyclic(a.coeffs(), b.coeffs(), c.coeffs(), p.q));
        }
    }

    #[test]
    fn hspm_small_degree() {
        let p = RingParams {
            n: 8,
            ..RingParams::default()
        };
        let mut g = SplitMix64::new(5);
        let (a, b, c) = random_triple(&mut g, &p);
        let (d, cycles) = hspm_multiply(&a, &b, &c, &p).unwrap();
        assert_eq!(d.coeffs(), naive_negacyclic(a.coeffs(), b.coeffs(), c.coeffs(), p.q));
        assert_eq!(cycles, CycleCount::new(8, 10, 8));
    }

    #[test]
    fn hspm_rejects_degree_mismatch() {
        let p = RingParams::default();
        let small = RingParams { n: 128, ..p };
        let a = RingPoly::zero(128);
        let b = SignedPoly::monomial(0, &p);
        assert!(matches!(
            hspm_multiply(&a, &b, &RingPoly::zero(256), &p),
            Err(KernelError::DegreeMismatch { name: "a", .. })
        ));
        let b_small = SignedPoly::monomial(0, &small);
        assert!(hspm_multiply(&RingPoly::zero(256), &b_small, &RingPoly::zero(256), &p).is_err());
    }
}
