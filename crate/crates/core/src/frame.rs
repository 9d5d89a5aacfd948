//! Planar 8-bit RGB frames.
//!
//! All pipeline stages exchange frames in one fixed layout: three planes
//! (R, G, B), each row-major `height * width` bytes. Decoders normalize
//! whatever the source format is into this layout.

use crate::error::{Error, Result};

/// Rec. 601 luma weights applied to 8-bit RGB.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

/// A planar 8-bit RGB image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl Frame {
    /// Wraps raw planar data (`[R plane][G plane][B plane]`, row-major).
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput("frame dimensions must be positive".into()));
        }
        if data.len() != width * height * 3 {
            return Err(Error::InvalidInput(format!(
                "frame data length {} != 3*{}*{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(Self { width, height, data })
    }

    /// Builds a frame by evaluating `f(channel, x, y)` at every sample.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize, usize) -> u8) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for c in 0..3 {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, x, y));
                }
            }
        }
        Self { width, height, data }
    }

    /// Solid-color frame.
    pub fn constant(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        Self::from_fn(width, height, |c, _, _| rgb[c])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Shorter of the two sides.
    pub fn short_side(&self) -> usize {
        self.width.min(self.height)
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    /// One channel plane, row-major.
    pub fn plane(&self, channel: usize) -> &[u8] {
        let n = self.width * self.height;
        &self.data[channel * n..(channel + 1) * n]
    }

    #[inline]
    pub fn get(&self, channel: usize, x: usize, y: usize) -> u8 {
        self.data[channel * self.width * self.height + y * self.width + x]
    }

    /// Rec. 601 luma of every pixel, row-major.
    pub fn luma(&self) -> Vec<f64> {
        let n = self.width * self.height;
        let (r, g, b) = (self.plane(0), self.plane(1), self.plane(2));
        (0..n)
            .map(|i| {
                LUMA_WEIGHTS[0] * r[i] as f64 + LUMA_WEIGHTS[1] * g[i] as f64 + LUMA_WEIGHTS[2] * b[i] as f64
            })
            .collect()
    }

    /// Central crop of size `cw x ch` (clamped to the frame).
    pub fn crop_center(&self, cw: usize, ch: usize) -> Frame {
        let cw = cw.min(self.width).max(1);
        let ch = ch.min(self.height).max(1);
        let x0 = (self.width - cw) / 2;
        let y0 = (self.height - ch) / 2;
        Frame::from_fn(cw, ch, |c, x, y| self.get(c, x0 + x, y0 + y))
    }
}
