//! Layered residual video codec.
//!
//! A group of pictures starts with a losslessly coded anchor frame. Every
//! later frame is predicted from the reconstruction of its predecessor by
//! block motion compensation, and the prediction residual is coded as a
//! stack of progressively finer quantizer layers.

mod autoencoder;
mod clip;
mod features;
mod frame;
mod gop;
mod layers;
mod motion;
pub mod rle;

pub use autoencoder::{
    train_autoencoder, AutoencoderWeights, Gradients, TrainedAutoencoder, TrainingSet, CODE_DIM,
};
pub use clip::{read_raw_clip, write_raw_clip};
pub use features::{extract_features, FeatureExtractor, FeatureVector, FEATURE_DIM};
pub use frame::{Frame, MotionVectorField, ResidualFrame, RESIDUAL_LIMIT};
pub use gop::{decode_gop, decode_sequence, encode_gop, encode_sequence, EncodedGop, FrameRecord};
pub use layers::{decode_layers, encode_layers, layer_step, Layer, LayeredBitstream};
pub use motion::{estimate_motion, predict, reconstruct, residual};

use thiserror::Error;

/// Motion block edge in pixels.
pub const BLOCK_SIZE: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CodecError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("decode error: {0}")]
    Decode(String),
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CodecParams {
    /// Number of residual layers `K`.
    pub layers: usize,
    /// Quantizer step of the coarsest layer; a power of two.
    pub base_step: u8,
    /// Frames per group, anchor included.
    pub anchor_interval: usize,
    pub search_radius: usize,
}

impl Default for CodecParams {
    fn default() -> Self {
        Self {
            layers: 4,
            base_step: 8,
            anchor_interval: 16,
            search_radius: 7,
        }
    }
}

impl CodecParams {
    pub fn validate(&self) -> Result<(), CodecError> {
        if self.layers == 0 || self.layers > u8::MAX as usize {
            return Err(CodecError::InvalidInput(format!(
                "layer count {} out of range",
                self.layers
            )));
        }
        layers::validate_base_step(self.base_step)?;
        if self.anchor_interval == 0 || self.anchor_interval > u8::MAX as usize {
            return Err(CodecError::InvalidInput(format!(
                "anchor interval {} out of range",
                self.anchor_interval
            )));
        }
        if self.search_radius > i8::MAX as usize {
            return Err(CodecError::InvalidInput(format!(
                "search radius {} out of range",
                self.search_radius
            )));
        }
        Ok(())
    }

    /// Whether the finest layer has step 1.
    pub fn is_lossless(&self) -> bool {
        layer_step(self.base_step, self.layers) == 1
    }
}
