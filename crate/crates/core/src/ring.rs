//! Elements of `Z_q[x]/(x^n + 1)` shared by the kernels and the cipher.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RingError {
    #[error("invalid ring parameters: {0}")]
    InvalidParams(String),
    #[error("expected {expected} coefficients, got {got}")]
    Degree { expected: usize, got: usize },
    #[error("coefficient {index} = {value} is not reduced mod {q}")]
    Unreduced { index: usize, value: i64, q: u16 },
    #[error("coefficient {index} = {value} exceeds tail bound {tailcut}")]
    TailExceeded { index: usize, value: i64, tailcut: u8 },
}

/// Ring and noise parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RingParams {
    pub n: usize,
    pub q: u16,
    /// Gaussian parameter: the standard deviation of the untruncated
    /// discrete Gaussian, `rho(x) = exp(-x^2 / (2 sigma^2))`.
    pub sigma: f64,
    /// Largest sample magnitude; must fit a 6-bit signed field.
    pub tailcut: u8,
}

impl Default for RingParams {
    fn default() -> Self {
        Self {
            n: 256,
            q: 7681,
            sigma: 3.2,
            tailcut: 31,
        }
    }
}

impl RingParams {
    pub fn validate(&self) -> Result<(), RingError> {
        let bad = |m: &str| Err(RingError::InvalidParams(m.to_string()));
        if self.n < 2 || !self.n.is_power_of_two() {
            return bad("n must be a power of two >= 2");
        }
        if self.n > u16::MAX as usize {
            return bad("n must fit in 16 bits");
        }
        if self.q < 4 || self.q >= 1 << 13 {
            return bad("q must be a 13-bit modulus >= 4");
        }
        if self.tailcut == 0 || self.tailcut > 31 {
            return bad("tailcut must be in 1..=31");
        }
        if u32::from(self.tailcut) * 2 >= u32::from(self.q) {
            return bad("tailcut too large for q");
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return bad("sigma must be positive and finite");
        }
        Ok(())
    }

    /// `floor(q / 2)`, the encoding of a one bit.
    pub fn half_q(&self) -> u16 {
        self.q / 2
    }
}

/// Polynomial with coefficients reduced into `[0, q)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RingPoly {
    coeffs: Vec<u16>,
}

impl RingPoly {
    pub fn zero(n: usize) -> Self {
        Self { coeffs: vec![0; n] }
    }

    pub fn from_coeffs(coeffs: Vec<u16>, params: &RingParams) -> Result<Self, RingError> {
        if coeffs.len() != params.n {
            return Err(RingError::Degree {
                expected: params.n,
                got: coeffs.len(),
            });
        }
        if let Some((index, &v)) = coeffs.iter().enumerate().find(|(_, &v)| v >= params.q) {
            return Err(RingError::Unreduced {
                index,
                value: i64::from(v),
                q: params.q,
            });
        }
        Ok(Self { coeffs })
    }

    /// Reduces arbitrary signed integers into the ring.
    pub fn from_signed(values: &[i64], params: &RingParams) -> Result<Self, RingError> {
        let q = i64::from(params.q);
        Self::from_coeffs(
            values.iter().map(|v| v.rem_euclid(q) as u16).collect(),
            params,
        )
    }

    pub fn coeffs(&self) -> &[u16] {
        &self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn add(&self, other: &Self, q: u16) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(&a, &b)| add_mod(a, b, q))
            .collect();
        Self { coeffs }
    }

    pub fn sub(&self, other: &Self, q: u16) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(&a, &b)| sub_mod(a, b, q))
            .collect();
        Self { coeffs }
    }

    /// Centered representatives in `(-q/2, q/2]`.
    pub fn centered(&self, q: u16) -> Vec<i32> {
        self.coeffs.iter().map(|&c| center(c, q)).collect()
    }
}

/// Polynomial with small signed coefficients in `[-tailcut, tailcut]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SignedPoly {
    coeffs: Vec<i8>,
}

impl SignedPoly {
    pub fn from_coeffs(coeffs: Vec<i8>, params: &RingParams) -> Result<Self, RingError> {
        if coeffs.len() != params.n {
            return Err(RingError::Degree {
                expected: params.n,
                got: coeffs.len(),
            });
        }
        let bound = i16::from(params.tailcut);
        if let Some((index, &v)) = coeffs
            .iter()
            .enumerate()
            .find(|(_, &v)| i16::from(v).abs() > bound)
        {
            return Err(RingError::TailExceeded {
                index,
                value: i64::from(v),
                tailcut: params.tailcut,
            });
        }
        Ok(Self { coeffs })
    }

    /// `x^k` for `k < n`.
    pub fn monomial(k: usize, params: &RingParams) -> Self {
        let mut coeffs = vec![0i8; params.n];
        coeffs[k] = 1;
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[i8] {
        &self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Same polynomial with coefficients lifted into `[0, q)`.
    pub fn to_ring(&self, q: u16) -> RingPoly {
        let coeffs = self
            .coeffs
            .iter()
            .map(|&c| i32::from(c).rem_euclid(i32::from(q)) as u16)
            .collect();
        RingPoly { coeffs }
    }
}

#[inline]
pub(crate) fn add_mod(a: u16, b: u16, q: u16) -> u16 {
    let s = u32::from(a) + u32::from(b);
    let q = u32::from(q);
    (if s >= q { s - q } else { s }) as u16
}

#[inline]
pub(crate) fn sub_mod(a: u16, b: u16, q: u16) -> u16 {
    if a >= b {
        a - b
    } else {
        (u32::from(a) + u32::from(q) - u32::from(b)) as u16
    }
}

#[inline]
pub(crate) fn center(c: u16, q: u16) -> i32 {
    let c = i32::from(c);
    let q = i32::from(q);
    if c > q / 2 {
        c - q
    } else {
        c
    }
}
