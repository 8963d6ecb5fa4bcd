use super::CodecError;

/// A single-channel 8-bit picture, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Frame {
    width: usize,
    height: usize,
    samples: Vec<u8>,
}

impl Frame {
    /// Dimensions must be positive and fit in 16 bits. Codec operations
    /// additionally require multiples of the block size.
    pub fn new(width: usize, height: usize, samples: Vec<u8>) -> Result<Self, CodecError> {
        if width == 0 || height == 0 || width > u16::MAX as usize || height > u16::MAX as usize {
            return Err(CodecError::InvalidInput(format!(
                "frame dimensions {width}x{height} out of range"
            )));
        }
        if samples.len() != width * height {
            return Err(CodecError::InvalidInput(format!(
                "{} samples for a {width}x{height} frame",
                samples.len()
            )));
        }
        Ok(Self {
            width,
            height,
            samples,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self, CodecError> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        f: impl Fn(usize, usize) -> u8,
    ) -> Result<Self, CodecError> {
        let samples = (0..height)
            .flat_map(|y| (0..width).map(move |x| (y, x)))
            .map(|(y, x)| f(y, x))
            .collect();
        Self::new(width, height, samples)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn samples(&self) -> &[u8] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<u8> {
        self.samples
    }

    #[inline]
    pub fn at(&self, y: usize, x: usize) -> u8 {
        self.samples[y * self.width + x]
    }

    /// Sample at a possibly out-of-bounds position, clamped to the edge.
    #[inline]
    pub fn at_clamped(&self, y: isize, x: isize) -> u8 {
        let y = y.clamp(0, self.height as isize - 1) as usize;
        let x = x.clamp(0, self.width as isize - 1) as usize;
        self.at(y, x)
    }

    pub fn same_dims(&self, other: &Frame) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub(crate) fn check_blocks(&self, block_size: usize) -> Result<(), CodecError> {
        if block_size == 0 || !self.width.is_multiple_of(block_size) || !self.height.is_multiple_of(block_size) {
            return Err(CodecError::InvalidInput(format!(
                "block size {block_size} does not divide {}x{}",
                self.width, self.height
            )));
        }
        Ok(())
    }

    pub fn mse(&self, other: &Frame) -> f64 {
        debug_assert!(self.same_dims(other));
        let sum: f64 = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(&a, &b)| (f64::from(a) - f64::from(b)).powi(2))
            .sum();
        sum / self.samples.len() as f64
    }
}

/// Signed difference between a frame and its prediction.
///
/// Exact residuals lie in `[-255, 255]`. Partially decoded layered
/// approximations are nearest multiples of a power-of-two step and may reach
/// `+-256`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResidualFrame {
    width: usize,
    height: usize,
    values: Vec<i16>,
}

/// Largest magnitude a decoded residual approximation can take.
pub const RESIDUAL_LIMIT: i16 = 256;

impl ResidualFrame {
    pub fn new(width: usize, height: usize, values: Vec<i16>) -> Result<Self, CodecError> {
        if values.len() != width * height {
            return Err(CodecError::InvalidInput(format!(
                "{} residual values for {width}x{height}",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| v.abs() > RESIDUAL_LIMIT) {
            return Err(CodecError::InvalidInput(format!("residual value {v} out of range")));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            values: vec![0; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[i16] {
        &self.values
    }

    pub fn mse(&self, other: &ResidualFrame) -> f64 {
        let sum: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| (f64::from(a) - f64::from(b)).powi(2))
            .sum();
        sum / self.values.len().max(1) as f64
    }
}

/// One `(dy, dx)` displacement per block; the source of block `(by, bx)`
/// starts at `(by*bs + dy, bx*bs + dx)` in the reference frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MotionVectorField {
    block_size: usize,
    rows: usize,
    cols: usize,
    vectors: Vec<(i8, i8)>,
}

impl MotionVectorField {
    pub fn new(
        block_size: usize,
        rows: usize,
        cols: usize,
        vectors: Vec<(i8, i8)>,
    ) -> Result<Self, CodecError> {
        if block_size == 0 || vectors.len() != rows * cols {
            return Err(CodecError::InvalidInput(format!(
                "{} vectors for a {rows}x{cols} grid",
                vectors.len()
            )));
        }
        Ok(Self {
            block_size,
            rows,
            cols,
            vectors,
        })
    }

    pub fn zeros(block_size: usize, rows: usize, cols: usize) -> Self {
        Self {
            block_size,
            rows,
            cols,
            vectors: vec![(0, 0); rows * cols],
        }
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn vectors(&self) -> &[(i8, i8)] {
        &self.vectors
    }

    pub fn get(&self, by: usize, bx: usize) -> (i8, i8) {
        self.vectors[by * self.cols + bx]
    }

    pub fn is_zero(&self) -> bool {
        self.vectors.iter().all(|&v| v == (0, 0))
    }

    pub(crate) fn matches(&self, frame: &Frame) -> bool {
        self.rows * self.block_size == frame.height() && self.cols * self.block_size == frame.width()
    }
}
