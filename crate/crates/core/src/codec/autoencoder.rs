//! Linear motion-aware autoencoder trained on top of the frozen extractor.
//!
//! For a clip with features `f_t`, normalised motion fields `m_t` and target
//! pixels `x_t` in `[0, 1]`:
//!
//! ```text
//! u_t = E^T f_t
//! c_0 = u_0,    c_t = R^T [u_t; c_{t-1}; m_t]   (t > 0)
//! y_t = D^T c_t
//! L   = sum_t |x_t - y_t|^2
//! ```
//!
//! Only `E`, `R` and `D` are trained; gradients are taken by
//! backpropagation through time over each clip and applied as full-batch
//! gradient descent.

use super::features::{FeatureExtractor, FEATURE_DIM};
use super::{estimate_motion, CodecError, Frame, BLOCK_SIZE};
use crate::rng::SplitMix64;

pub const CODE_DIM: usize = 8;
const MOTION_RADIUS: usize = 7;

#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderWeights {
    extractor: FeatureExtractor,
    pixels: usize,
    motion_dim: usize,
    /// FEATURE_DIM x CODE_DIM, row-major.
    pub encoder: Vec<f64>,
    /// (2 * CODE_DIM + motion_dim) x CODE_DIM.
    pub reencoder: Vec<f64>,
    /// CODE_DIM x pixels.
    pub decoder: Vec<f64>,
    pub learning_rate: f64,
    pub epochs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub encoder: Vec<f64>,
    pub reencoder: Vec<f64>,
    pub decoder: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedAutoencoder {
    pub weights: AutoencoderWeights,
    /// Loss at the start of each epoch.
    pub loss_trace: Vec<f64>,
}

struct Step {
    features: Vec<f64>,
    motion: Vec<f64>,
    target: Vec<f64>,
}

/// Clips with their features and motion fields precomputed.
pub struct TrainingSet {
    clips: Vec<Vec<Step>>,
    width: usize,
    height: usize,
}

fn uniform(g: &mut SplitMix64, n: usize, bound: f64) -> Vec<f64> {
    (0..n).map(|_| (2.0 * g.next_f64() - 1.0) * bound).collect()
}

/// `out[j] = sum_i v[i] * m[i * cols + j]`
fn mat_t_vec(m: &[f64], v: &[f64], cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; cols];
    for (i, &vi) in v.iter().enumerate() {
        let row = &m[i * cols..(i + 1) * cols];
        for (o, &w) in out.iter_mut().zip(row) {
            *o += vi * w;
        }
    }
    out
}

/// `out[i] = sum_j m[i * cols + j] * v[j]`
fn mat_vec(m: &[f64], v: &[f64], cols: usize) -> Vec<f64> {
    m.chunks_exact(cols)
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

/// `g[i * cols + j] += a[i] * b[j]`
fn outer_acc(g: &mut [f64], a: &[f64], b: &[f64]) {
    let cols = b.len();
    for (i, &ai) in a.iter().enumerate() {
        for (gij, &bj) in g[i * cols..(i + 1) * cols].iter_mut().zip(b) {
            *gij += ai * bj;
        }
    }
}

impl TrainingSet {
    pub fn new(clips: &[Vec<Frame>], extractor: &FeatureExtractor) -> Result<Self, CodecError> {
        let first = clips
            .iter()
            .flatten()
            .next()
            .ok_or_else(|| CodecError::InvalidInput("no training frames".into()))?;
        let (width, height) = (first.width(), first.height());
        first.check_blocks(BLOCK_SIZE)?;
        let mut prepared = Vec::with_capacity(clips.len());
        for clip in clips {
            if clip.is_empty() {
                return Err(CodecError::InvalidInput("empty clip".into()));
            }
            let mut steps = Vec::with_capacity(clip.len());
            for (t, frame) in clip.iter().enumerate() {
                if frame.width() != width || frame.height() != height {
                    return Err(CodecError::InvalidInput("training frames differ in size".into()));
                }
                let motion = if t == 0 {
                    Vec::new()
                } else {
                    estimate_motion(&clip[t - 1], frame, BLOCK_SIZE, MOTION_RADIUS)?
                        .vectors()
                        .iter()
                        .flat_map(|&(dy, dx)| [f64::from(dy), f64::from(dx)])
                        .map(|v| v / MOTION_RADIUS as f64)
                        .collect()
                };
                steps.push(Step {
                    features: extractor.extract(frame)?,
                    motion,
                    target: frame.samples().iter().map(|&s| f64::from(s) / 255.0).collect(),
                });
            }
            prepared.push(steps);
        }
        Ok(Self {
            clips: prepared,
            width,
            height,
        })
    }

    fn pixels(&self) -> usize {
        self.width * self.height
    }

    fn check(&self, w: &AutoencoderWeights) {
        assert_eq!(w.pixels, self.pixels(), "weights built for another frame size");
    }

    pub fn loss(&self, w: &AutoencoderWeights) -> f64 {
        self.check(w);
        self.clips
            .iter()
            .map(|clip| {
                w.codes(clip.iter().map(|s| (&s.features[..], &s.motion[..])))
                    .iter()
                    .zip(clip)
                    .map(|(c, s)| {
                        mat_t_vec(&w.decoder, c, w.pixels)
                            .iter()
                            .zip(&s.target)
                            .map(|(y, x)| (x - y).powi(2))
                            .sum::<f64>()
                    })
                    .sum::<f64>()
            })
            .sum()
    }

    pub fn loss_and_gradient(&self, w: &AutoencoderWeights) -> (f64, Gradients) {
        self.check(w);
        let c = CODE_DIM;
        let mut g = Gradients {
            encoder: vec![0.0; w.encoder.len()],
            reencoder: vec![0.0; w.reencoder.len()],
            decoder: vec![0.0; w.decoder.len()],
        };
        let mut loss = 0.0;
        for clip in &self.clips {
            let us: Vec<Vec<f64>> = clip.iter().map(|s| mat_t_vec(&w.encoder, &s.features, c)).collect();
            let mut codes: Vec<Vec<f64>> = Vec::with_capacity(clip.len());
            let mut stacked: Vec<Vec<f64>> = Vec::with_capacity(clip.len());
            for (t, s) in clip.iter().enumerate() {
                if t == 0 {
                    codes.push(us[0].clone());
                    stacked.push(Vec::new());
                } else {
                    let z: Vec<f64> = us[t]
                        .iter()
                        .chain(&codes[t - 1])
                        .chain(&s.motion)
                        .copied()
                        .collect();
                    codes.push(mat_t_vec(&w.reencoder, &z, c));
                    stacked.push(z);
                }
            }
            let mut carry = vec![0.0; c];
            for t in (0..clip.len()).rev() {
                let y = mat_t_vec(&w.decoder, &codes[t], w.pixels);
                let dy: Vec<f64> = y
                    .iter()
                    .zip(&clip[t].target)
                    .map(|(y, x)| {
                        loss += (x - y).powi(2);
                        2.0 * (y - x)
                    })
                    .collect();
                outer_acc(&mut g.decoder, &codes[t], &dy);
                let mut dc = mat_vec(&w.decoder, &dy, w.pixels);
                for (d, k) in dc.iter_mut().zip(&carry) {
                    *d += k;
                }
                let du = if t == 0 {
                    dc
                } else {
                    outer_acc(&mut g.reencoder, &stacked[t], &dc);
                    let dz = mat_vec(&w.reencoder, &dc, c);
                    carry = dz[c..2 * c].to_vec();
                    dz[..c].to_vec()
                };
                outer_acc(&mut g.encoder, &clip[t].features, &du);
            }
        }
        (loss, g)
    }
}

impl AutoencoderWeights {
    /// Fresh weights for `width x height` frames.
    pub fn new(width: usize, height: usize, seed: u64) -> Self {
        let pixels = width * height;
        let motion_dim = 2 * (width / BLOCK_SIZE) * (height / BLOCK_SIZE);
        let mut g = SplitMix64::stream(seed, "autoencoder");
        let encoder = uniform(&mut g, FEATURE_DIM * CODE_DIM, 1.0 / (FEATURE_DIM as f64).sqrt());
        let reencoder = uniform(
            &mut g,
            (2 * CODE_DIM + motion_dim) * CODE_DIM,
            1.0 / ((2 * CODE_DIM + motion_dim) as f64).sqrt(),
        );
        let decoder = uniform(&mut g, CODE_DIM * pixels, 0.1 / (CODE_DIM as f64).sqrt());
        Self {
            extractor: FeatureExtractor::new(),
            pixels,
            motion_dim,
            encoder,
            reencoder,
            decoder,
            learning_rate: 0.0,
            epochs: 0,
        }
    }

    pub fn extractor(&self) -> &FeatureExtractor {
        &self.extractor
    }

    pub fn pixels(&self) -> usize {
        self.pixels
    }

    pub fn motion_dim(&self) -> usize {
        self.motion_dim
    }

    fn codes<'a>(&self, steps: impl Iterator<Item = (&'a [f64], &'a [f64])>) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = Vec::new();
        for (features, motion) in steps {
            let u = mat_t_vec(&self.encoder, features, CODE_DIM);
            let code = match out.last() {
                None => u,
                Some(prev) => {
                    let z: Vec<f64> = u.iter().chain(prev).chain(motion).copied().collect();
                    mat_t_vec(&self.reencoder, &z, CODE_DIM)
                }
            };
            out.push(code);
        }
        out
    }

    /// Code vectors for a clip.
    pub fn compress(&self, clip: &[Frame]) -> Result<Vec<Vec<f64>>, CodecError> {
        let set = TrainingSet::new(&[clip.to_vec()], &self.extractor)?;
        if set.pixels() != self.pixels {
            return Err(CodecError::InvalidInput("clip size differs from the weights".into()));
        }
        Ok(self.codes(set.clips[0].iter().map(|s| (&s.features[..], &s.motion[..]))))
    }

    /// Decodes a clip's codes back to frames, clamped to 8 bits.
    pub fn reconstruct(&self, clip: &[Frame]) -> Result<Vec<Frame>, CodecError> {
        let (w, h) = (clip[0].width(), clip[0].height());
        self.compress(clip)?
            .iter()
            .map(|c| {
                let samples = mat_t_vec(&self.decoder, c, self.pixels)
                    .iter()
                    .map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
                    .collect();
                Frame::new(w, h, samples)
            })
            .collect()
    }

    pub fn flat_params(&self) -> Vec<f64> {
        [&self.encoder[..], &self.reencoder, &self.decoder].concat()
    }

    pub fn set_flat_params(&mut self, p: &[f64]) {
        let (e, rest) = p.split_at(self.encoder.len());
        let (r, d) = rest.split_at(self.reencoder.len());
        self.encoder.copy_from_slice(e);
        self.reencoder.copy_from_slice(r);
        self.decoder.copy_from_slice(d);
    }
}

impl Gradients {
    pub fn flat(&self) -> Vec<f64> {
        [&self.encoder[..], &self.reencoder, &self.decoder].concat()
    }
}

/// Full-batch gradient descent on the clip set. Weights are initialised
/// from `seed`; `lr = 0` leaves them untouched.
pub fn train_autoencoder(
    clips: &[Vec<Frame>],
    epochs: usize,
    lr: f64,
    seed: u64,
) -> Result<TrainedAutoencoder, CodecError> {
    if !(lr.is_finite() && lr >= 0.0) {
        return Err(CodecError::InvalidInput(format!("learning rate {lr} is not a finite non-negative value")));
    }
    let extractor = FeatureExtractor::new();
    let set = TrainingSet::new(clips, &extractor)?;
    let mut weights = AutoencoderWeights::new(set.width, set.height, seed);
    weights.learning_rate = lr;
    weights.epochs = epochs;
    let mut loss_trace = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        let (loss, grad) = set.loss_and_gradient(&weights);
        if !loss.is_finite() {
            return Err(CodecError::Diverged { epoch });
        }
        loss_trace.push(loss);
        for (w, g) in weights
            .encoder
            .iter_mut()
            .chain(weights.reencoder.iter_mut())
            .chain(weights.decoder.iter_mut())
            .zip(grad.flat())
        {
            *w -= lr * g;
        }
    }
    Ok(TrainedAutoencoder {
        weights,
        loss_trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn toy_clips() -> Vec<Vec<Frame>> {
        (0..5)
            .map(|c| {
                (0..4)
                    .map(|t| {
                        Frame::from_fn(16, 16, |y, x| {
                            let v = 128.0
                                + 90.0 * (((x + t * (c % 3)) as f64) * 0.4 + c as f64).sin()
                                    * ((y as f64) * 0.3).cos();
                            v.round() as u8
                        })
                        .unwrap()
                    })
                    .collect()
            })
            .collect()
    }

    pub(crate) fn check_gradient(set: &TrainingSet, w: &AutoencoderWeights) -> f64 {
        let (_, g) = set.loss_and_gradient(w);
        let analytic = g.flat();
        let base = w.flat_params();
        let h = 1e-4;
        let mut probe = w.clone();
        let numeric: Vec<f64> = (0..base.len())
            .map(|i| {
                let mut p = base.clone();
                p[i] = base[i] + h;
                probe.set_flat_params(&p);
                let up = set.loss(&probe);
                p[i] = base[i] - h;
                probe.set_flat_params(&p);
                let down = set.loss(&probe);
                (up - down) / (2.0 * h)
            })
            .collect();
        let scale = numeric.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        analytic
            .iter()
            .zip(&numeric)
            .map(|(a, n)| (a - n).abs() / n.abs().max(1e-3 * scale))
            .fold(0.0, f64::max)
    }

    #[test]
    fn zero_learning_rate_is_flat() {
        let clips = toy_clips();
        let t = train_autoencoder(&clips, 3, 0.0, 9).unwrap();
        assert_eq!(t.weights.flat_params(), AutoencoderWeights::new(16, 16, 9).flat_params());
        assert!(t.loss_trace.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn loss_decreases() {
        let t = train_autoencoder(&toy_clips(), 10, 2e-4, 1).unwrap();
        assert_eq!(t.loss_trace.len(), 10);
        assert!(t.loss_trace.windows(2).all(|w| w[1] < w[0]), "{:?}", t.loss_trace);
        assert_eq!(t.weights.extractor(), &FeatureExtractor::new());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let clips = toy_clips();
        let set = TrainingSet::new(&clips, &FeatureExtractor::new()).unwrap();
        for seed in 0..2 {
            let w = AutoencoderWeights::new(16, 16, seed + 100);
            let err = check_gradient(&set, &w);
            assert!(err < 1e-4, "relative error {err}");
        }
    }

    #[test]
    fn divergence_names_epoch() {
        let err = train_autoencoder(&toy_clips(), 200, 10.0, 1).unwrap_err();
        assert!(matches!(err, CodecError::Diverged { .. }), "{err:?}");
    }

    #[test]
    fn rejects_bad_input() {
        assert!(train_autoencoder(&[], 1, 0.1, 0).is_err());
        assert!(train_autoencoder(&[vec![]], 1, 0.1, 0).is_err());
        assert!(train_autoencoder(&toy_clips(), 1, -1.0, 0).is_err());
        assert!(train_autoencoder(&toy_clips(), 1, f64::NAN, 0).is_err());
    }

    #[test]
    fn reconstruct_shapes() {
        let clips = toy_clips();
        let t = train_autoencoder(&clips, 2, 1e-4, 3).unwrap();
        let out = t.weights.reconstruct(&clips[0]).unwrap();
        assert_eq!(out.len(), 4);
        assert!(out.iter().all(|f| f.width() == 16 && f.height() == 16));
    }
}
