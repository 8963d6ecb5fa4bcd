//! Centered discrete Gaussian sampling from a cumulative distribution table.

use crate::ring::{RingParams, SignedPoly};
use crate::rng::SplitMix64;

const SCALE_BITS: u32 = 63;

/// Cumulative table over magnitudes `0..=tailcut`, scaled to `2^63`.
///
/// Each draw consumes one 64-bit word: bit 0 chooses the sign and the upper
/// 63 bits are compared against every table entry (a fixed-length scan,
/// independent of the sampled value).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CdtSampler {
    table: Vec<u64>,
}

impl CdtSampler {
    pub fn new(sigma: f64, tailcut: u8) -> Self {
        let weights: Vec<f64> = (0..=i32::from(tailcut))
            .map(|k| {
                let rho = (-f64::from(k * k) / (2.0 * sigma * sigma)).exp();
                if k == 0 {
                    rho
                } else {
                    2.0 * rho
                }
            })
            .collect();
        let total: f64 = weights.iter().sum();
        let scale = (1u64 << SCALE_BITS) as f64;
        let mut cumulative = 0.0;
        let mut table: Vec<u64> = weights
            .iter()
            .map(|w| {
                cumulative += w;
                ((cumulative / total) * scale).round().min(scale) as u64
            })
            .collect();
        *table.last_mut().expect("non-empty table") = 1u64 << SCALE_BITS;
        Self { table }
    }

    pub fn for_params(params: &RingParams) -> Self {
        Self::new(params.sigma, params.tailcut)
    }

    pub fn tailcut(&self) -> u8 {
        (self.table.len() - 1) as u8
    }

    pub fn table(&self) -> &[u64] {
        &self.table
    }

    /// Maps one uniform word to a signed sample.
    pub fn sample_word(&self, word: u64) -> i8 {
        let u = word >> 1;
        let magnitude = self
            .table
            .iter()
            .fold(0u8, |acc, &t| acc + u8::from(u >= t));
        if word & 1 == 1 {
            -(magnitude as i8)
        } else {
            magnitude as i8
        }
    }

    pub fn sample(&self, rng: &mut SplitMix64) -> i8 {
        self.sample_word(rng.next_u64())
    }

    /// Probability of each value in `-tailcut..=tailcut`, read back from the
    /// table itself.
    pub fn probabilities(&self) -> Vec<(i32, f64)> {
        let scale = (1u64 << SCALE_BITS) as f64;
        let mut out = Vec::with_capacity(2 * self.table.len() - 1);
        let mut prev = 0u64;
        for (k, &t) in self.table.iter().enumerate() {
            let mass = (t - prev) as f64 / scale;
            prev = t;
            if k == 0 {
                out.push((0, mass));
            } else {
                out.push((k as i32, mass / 2.0));
                out.push((-(k as i32), mass / 2.0));
            }
        }
        out.sort_by_key(|&(v, _)| v);
        out
    }
}

/// `n` draws from the stream labeled `stream` under `seed`.
pub fn sample_gaussian_signed(params: &RingParams, seed: u64, stream: &str) -> SignedPoly {
    let sampler = CdtSampler::for_params(params);
    let mut rng = SplitMix64::stream(seed, stream);
    sample_with(&sampler, params, &mut rng)
}

pub(crate) fn sample_with(sampler: &CdtSampler, params: &RingParams, rng: &mut SplitMix64) -> SignedPoly {
    let coeffs = (0..params.n).map(|_| sampler.sample(rng)).collect();
    SignedPoly::from_coeffs(coeffs, params).expect("samples are bounded by the tailcut")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_stream() {
        let p = RingParams::default();
        assert_eq!(
            sample_gaussian_signed(&p, 42, "e1"),
            sample_gaussian_signed(&p, 42, "e1")
        );
        assert_ne!(
            sample_gaussian_signed(&p, 42, "e1"),
            sample_gaussian_signed(&p, 42, "e2")
        );
    }

    #[test]
    fn outputs_fit_six_bit_signed() {
        let p = RingParams::default();
        for seed in 0..50 {
            let s = sample_gaussian_signed(&p, seed, "s");
            assert!(s.coeffs().iter().all(|&v| (-31..=31).contains(&v)));
        }
    }

    #[test]
    fn table_is_monotone_and_complete() {
        let cdt = CdtSampler::new(3.2, 31);
        assert_eq!(cdt.tailcut(), 31);
        assert!(cdt.table().windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(*cdt.table().last().unwrap(), 1u64 << 63);
        let total: f64 = cdt.probabilities().iter().map(|p| p.1).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn extreme_words_map_to_extremes() {
        let cdt = CdtSampler::new(3.2, 31);
        assert_eq!(cdt.sample_word(0), 0);
        // All-ones upper bits land on the largest magnitude with table mass.
        let top = cdt
            .table()
            .iter()
            .filter(|&&t| t <= (u64::MAX >> 1))
            .count() as i8;
        assert!(top > 20 && top <= 31);
        assert_eq!(cdt.sample_word(u64::MAX), -top);
        assert_eq!(cdt.sample_word(u64::MAX - 1), top);
    }

    #[test]
    fn empirical_moments_match_table() {
        let cdt = CdtSampler::new(3.2, 31);
        let probs = cdt.probabilities();
        let exact_mean: f64 = probs.iter().map(|&(v, p)| f64::from(v) * p).sum();
        let exact_var: f64 = probs
            .iter()
            .map(|&(v, p)| (f64::from(v) - exact_mean).powi(2) * p)
            .sum();
        assert!(exact_mean.abs() < 1e-12);
        // Truncation at ~9.7 sigma leaves the variance at sigma^2 to many digits.
        assert!((exact_var - 3.2f64 * 3.2).abs() < 1e-6);

        let mut rng = SplitMix64::stream(1, "moments");
        let draws = 1_000_000;
        let (mut sum, mut sum_sq) = (0f64, 0f64);
        for _ in 0..draws {
            let v = f64::from(cdt.sample(&mut rng));
            sum += v;
            sum_sq += v * v;
        }
        let mean = sum / draws as f64;
        let var = sum_sq / draws as f64 - mean * mean;
        assert!(mean.abs() < 0.05, "mean {mean}");
        assert!((var - exact_var).abs() < 0.1 * exact_var, "var {var} vs {exact_var}");
    }
}
