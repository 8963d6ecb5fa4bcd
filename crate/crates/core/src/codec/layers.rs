//! Quantizer-pyramid layer stack.
//!
//! Layer `k` (1-based) uses step `max(base_step >> (k - 1), 1)` and codes
//! the residual left over after reconstructing layers `1..k`. Quantization
//! rounds half away from zero, so the reconstruction after each layer is a
//! nearest multiple of that layer's step and the per-sample error never
//! grows as layers are added. With a final step of 1 the stack is lossless.

use super::frame::{ResidualFrame, RESIDUAL_LIMIT};
use super::rle::{decode_runs, encode_runs, read_varint, write_varint};
use super::CodecError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layer {
    pub step: u8,
    pub payload: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayeredBitstream {
    width: usize,
    height: usize,
    layers: Vec<Layer>,
}

/// Step of layer `k` (1-based).
pub fn layer_step(base_step: u8, k: usize) -> u8 {
    let shift = (k - 1).min(7) as u32;
    (base_step >> shift).max(1)
}

pub(crate) fn validate_base_step(base_step: u8) -> Result<(), CodecError> {
    if !base_step.is_power_of_two() {
        return Err(CodecError::InvalidInput(format!(
            "base step {base_step} is not a power of two"
        )));
    }
    Ok(())
}

#[inline]
fn quantize(v: i32, step: i32) -> i32 {
    let mag = (v.abs() + step / 2) / step;
    if v < 0 {
        -mag
    } else {
        mag
    }
}

pub fn encode_layers(r: &ResidualFrame, k: usize, base_step: u8) -> Result<LayeredBitstream, CodecError> {
    if k == 0 || k > u8::MAX as usize {
        return Err(CodecError::InvalidInput(format!("layer count {k} out of range")));
    }
    validate_base_step(base_step)?;
    let mut recon = vec![0i32; r.values().len()];
    let mut layers = Vec::with_capacity(k);
    for layer in 1..=k {
        let step = layer_step(base_step, layer);
        let s = i32::from(step);
        let quantized: Vec<i32> = r
            .values()
            .iter()
            .zip(&recon)
            .map(|(&v, &acc)| quantize(i32::from(v) - acc, s))
            .collect();
        for (acc, q) in recon.iter_mut().zip(&quantized) {
            *acc += q * s;
        }
        let mut payload = Vec::new();
        encode_runs(quantized, &mut payload);
        layers.push(Layer { step, payload });
    }
    Ok(LayeredBitstream {
        width: r.width(),
        height: r.height(),
        layers,
    })
}

/// Sum of the dequantized layers `1..=k_max`.
pub fn decode_layers(b: &LayeredBitstream, k_max: usize) -> Result<ResidualFrame, CodecError> {
    if k_max == 0 || k_max > b.layers.len() {
        return Err(CodecError::InvalidInput(format!(
            "k_max {k_max} outside 1..={}",
            b.layers.len()
        )));
    }
    let count = b.width * b.height;
    let mut acc = vec![0i32; count];
    let limit = i32::from(RESIDUAL_LIMIT);
    for layer in &b.layers[..k_max] {
        let step = i32::from(layer.step);
        let values = decode_runs(&layer.payload, count, i64::from(2 * limit / step + 1))?;
        for (a, q) in acc.iter_mut().zip(values) {
            *a += q * step;
            if a.abs() > limit {
                return Err(CodecError::Decode(format!("reconstruction {a} out of range")));
            }
        }
    }
    ResidualFrame::new(b.width, b.height, acc.into_iter().map(|v| v as i16).collect())
}

impl LayeredBitstream {
    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn is_lossless(&self) -> bool {
        self.layers.last().is_some_and(|l| l.step == 1)
    }

    /// Total payload bytes, excluding framing.
    pub fn payload_len(&self) -> usize {
        self.layers.iter().map(|l| l.payload.len()).sum()
    }

    /// `K` then, per layer, `step | varint(len) | payload`.
    pub fn write(&self, out: &mut Vec<u8>) {
        out.push(self.layers.len() as u8);
        for l in &self.layers {
            out.push(l.step);
            write_varint(l.payload.len() as u64, out);
            out.extend_from_slice(&l.payload);
        }
    }

    /// Parses the framing written by [`write`](Self::write). Steps must be
    /// powers of two and non-increasing.
    pub fn read(bytes: &[u8], pos: &mut usize, width: usize, height: usize) -> Result<Self, CodecError> {
        let k = usize::from(
            *bytes
                .get(*pos)
                .ok_or_else(|| CodecError::Decode("truncated layer count".into()))?,
        );
        *pos += 1;
        if k == 0 {
            return Err(CodecError::Decode("zero layers".into()));
        }
        let mut layers = Vec::with_capacity(k);
        let mut prev_step = u8::MAX;
        for _ in 0..k {
            let step = *bytes
                .get(*pos)
                .ok_or_else(|| CodecError::Decode("truncated layer step".into()))?;
            *pos += 1;
            if !step.is_power_of_two() || step > prev_step {
                return Err(CodecError::Decode(format!("invalid layer step {step}")));
            }
            prev_step = step;
            let len = usize::try_from(read_varint(bytes, pos)?)
                .map_err(|_| CodecError::Decode("layer length overflow".into()))?;
            let end = pos
                .checked_add(len)
                .filter(|&e| e <= bytes.len())
                .ok_or_else(|| CodecError::Decode("truncated layer payload".into()))?;
            layers.push(Layer {
                step,
                payload: bytes[*pos..end].to_vec(),
            });
            *pos = end;
        }
        Ok(Self {
            width,
            height,
            layers,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn random_residual(seed: u64, w: usize, h: usize) -> ResidualFrame {
        let mut g = SplitMix64::new(seed);
        let values = (0..w * h).map(|_| g.next_below(511) as i16 - 255).collect();
        ResidualFrame::new(w, h, values).unwrap()
    }

    /// True when `got` is a nearest multiple of `step` to `v`. At an exact
    /// tie both neighbours qualify, since refinement can land on either.
    fn is_nearest_multiple(v: i32, got: i32, step: i32) -> bool {
        got % step == 0 && 2 * (v - got).abs() <= step
    }

    #[test]
    fn steps_follow_schedule() {
        assert_eq!(
            (1..=6).map(|k| layer_step(8, k)).collect::<Vec<_>>(),
            vec![8, 4, 2, 1, 1, 1]
        );
        assert_eq!(layer_step(128, 8), 1);
    }

    #[test]
    fn zero_residual_is_tiny() {
        let r = ResidualFrame::zeros(64, 64);
        let b = encode_layers(&r, 3, 4).unwrap();
        assert_eq!(b.num_layers(), 3);
        let mut bytes = Vec::new();
        b.write(&mut bytes);
        assert!(bytes.len() * 100 < 64 * 64 * 2);
        assert_eq!(decode_layers(&b, 3).unwrap(), r);
    }

    #[test]
    fn identity_quantizer_is_exact() {
        let r = random_residual(1, 16, 16);
        let b = encode_layers(&r, 1, 1).unwrap();
        assert!(b.is_lossless());
        assert_eq!(decode_layers(&b, 1).unwrap(), r);
    }

    #[test]
    fn layers_match_direct_requantization() {
        for seed in 0..10 {
            let r = random_residual(seed, 16, 16);
            let b = encode_layers(&r, 4, 8).unwrap();
            let mut prev_mse = f64::INFINITY;
            for k in 1..=4 {
                let d = decode_layers(&b, k).unwrap();
                let step = i32::from(layer_step(8, k));
                for (&got, &v) in d.values().iter().zip(r.values()) {
                    assert!(is_nearest_multiple(i32::from(v), i32::from(got), step), "{v} -> {got} at step {step}");
                }
                let mse = d.mse(&r);
                assert!(mse <= prev_mse);
                prev_mse = mse;
            }
            assert_eq!(decode_layers(&b, 4).unwrap(), r);
        }
    }

    #[test]
    fn coarsest_layer_error_bound() {
        for seed in 0..10 {
            let r = random_residual(seed + 50, 16, 16);
            let b = encode_layers(&r, 3, 16).unwrap();
            let d = decode_layers(&b, 1).unwrap();
            assert!(d.mse(&r) <= 16.0 * 16.0 / 4.0);
            assert!(d
                .values()
                .iter()
                .zip(r.values())
                .all(|(a, b)| (a - b).abs() <= 8));
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        let r = ResidualFrame::zeros(8, 8);
        assert!(encode_layers(&r, 0, 8).is_err());
        assert!(encode_layers(&r, 2, 6).is_err());
        let b = encode_layers(&r, 2, 2).unwrap();
        assert!(decode_layers(&b, 0).is_err());
        assert!(decode_layers(&b, 3).is_err());
    }

    #[test]
    fn framing_roundtrip_and_corruption() {
        let r = random_residual(3, 8, 8);
        let b = encode_layers(&r, 3, 4).unwrap();
        let mut bytes = Vec::new();
        b.write(&mut bytes);
        let mut pos = 0;
        let back = LayeredBitstream::read(&bytes, &mut pos, 8, 8).unwrap();
        assert_eq!(pos, bytes.len());
        assert_eq!(back, b);
        for cut in 0..bytes.len() {
            let mut pos = 0;
            if let Ok(partial) = LayeredBitstream::read(&bytes[..cut], &mut pos, 8, 8) {
                let _ = decode_layers(&partial, partial.num_layers());
            }
        }
        let mut bad = bytes.clone();
        bad[1] = 3; // non power-of-two step
        assert!(LayeredBitstream::read(&bad, &mut 0, 8, 8).is_err());
    }
}
