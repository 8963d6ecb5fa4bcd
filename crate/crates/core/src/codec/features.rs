//! Frozen convolutional feature extractor.
//!
//! Two 3x3, stride-2, zero-padded convolutions (1 -> 8 -> 16 channels) with
//! ReLU and no bias, followed by a per-channel spatial mean. Kernels are
//! drawn once from a fixed seed and never change.

use super::{CodecError, Frame};
use crate::rng::SplitMix64;

pub const FEATURE_DIM: usize = 16;
const HIDDEN: usize = 8;
const EXTRACTOR_SEED: u64 = 0x5A17_F00D_0000_0001;

pub type FeatureVector = Vec<f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureExtractor {
    /// `[out][in][ky][kx]`, HIDDEN x 1 x 3 x 3.
    conv1: Vec<f64>,
    /// FEATURE_DIM x HIDDEN x 3 x 3.
    conv2: Vec<f64>,
}

impl Default for FeatureExtractor {
    fn default() -> Self {
        Self::new()
    }
}

fn uniform_kernels(g: &mut SplitMix64, count: usize, fan_in: usize) -> Vec<f64> {
    let bound = (6.0 / fan_in as f64).sqrt();
    (0..count).map(|_| (2.0 * g.next_f64() - 1.0) * bound).collect()
}

/// Stride-2, pad-1, 3x3 convolution with ReLU. `input` is channel-major.
fn conv_relu(input: &[f64], cin: usize, h: usize, w: usize, kernels: &[f64], cout: usize) -> Vec<f64> {
    let (oh, ow) = (h / 2, w / 2);
    let mut out = vec![0.0; cout * oh * ow];
    for o in 0..cout {
        for i in 0..oh {
            for j in 0..ow {
                let mut acc = 0.0;
                for c in 0..cin {
                    let k = &kernels[(o * cin + c) * 9..(o * cin + c + 1) * 9];
                    let plane = &input[c * h * w..(c + 1) * h * w];
                    for ky in 0..3 {
                        let y = (2 * i + ky).wrapping_sub(1);
                        if y >= h {
                            continue;
                        }
                        for kx in 0..3 {
                            let x = (2 * j + kx).wrapping_sub(1);
                            if x < w {
                                acc += k[ky * 3 + kx] * plane[y * w + x];
                            }
                        }
                    }
                }
                out[(o * oh + i) * ow + j] = acc.max(0.0);
            }
        }
    }
    out
}

impl FeatureExtractor {
    pub fn new() -> Self {
        let mut g = SplitMix64::new(EXTRACTOR_SEED);
        Self {
            conv1: uniform_kernels(&mut g, HIDDEN * 9, 9),
            conv2: uniform_kernels(&mut g, FEATURE_DIM * HIDDEN * 9, HIDDEN * 9),
        }
    }

    pub fn conv1(&self) -> &[f64] {
        &self.conv1
    }

    pub fn conv2(&self) -> &[f64] {
        &self.conv2
    }

    /// Frame dimensions must be multiples of 4.
    pub fn extract(&self, frame: &Frame) -> Result<FeatureVector, CodecError> {
        let (h, w) = (frame.height(), frame.width());
        if h % 4 != 0 || w % 4 != 0 {
            return Err(CodecError::InvalidInput(format!(
                "{w}x{h} frame is not a multiple of the extractor stride"
            )));
        }
        let input: Vec<f64> = frame.samples().iter().map(|&s| f64::from(s) / 255.0).collect();
        let hidden = conv_relu(&input, 1, h, w, &self.conv1, HIDDEN);
        let out = conv_relu(&hidden, HIDDEN, h / 2, w / 2, &self.conv2, FEATURE_DIM);
        let area = (h / 4) * (w / 4);
        Ok(out
            .chunks_exact(area)
            .map(|plane| plane.iter().sum::<f64>() / area as f64)
            .collect())
    }
}

pub fn extract_features(frame: &Frame, extractor: &FeatureExtractor) -> Result<FeatureVector, CodecError> {
    extractor.extract(frame)
}
