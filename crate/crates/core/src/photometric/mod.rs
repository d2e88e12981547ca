//! Photometric self-supervision terms: warping, SSIM, L1+SSIM loss and
//! edge-aware smoothness, with an analytic gradient of the loss.

mod gradient;
mod loss;
mod ssim;
mod warp;

pub use gradient::{photometric_gradient, PhotometricGradient};
pub use loss::{photometric_loss, smoothness_loss};
pub use ssim::{ssim, SSIM_C1, SSIM_C2};
pub use warp::warp_image;

use crate::{Error, Result};

/// Row-major image with interleaved channels, values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::Config(format!("images need 1 or 3 channels, got {channels}")));
        }
        if data.len() != width * height * channels {
            return Err(Error::shape(width * height * channels, data.len()));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Config(format!("image value {v} outside [0, 1]")));
        }
        Ok(Self { width, height, channels, data })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Self {
        Self { width, height, channels, data: vec![value; width * height * channels] }
    }

    /// Builds an image by evaluating `f(u, v, channel)`.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * channels);
        for v in 0..height {
            for u in 0..width {
                for c in 0..channels {
                    data.push(f(u, v, c));
                }
            }
        }
        Self::new(width, height, channels, data)
    }

    pub fn from_u8(width: usize, height: usize, channels: usize, bytes: &[u8]) -> Result<Self> {
        Self::new(width, height, channels, bytes.iter().map(|&b| b as f64 / 255.0).collect())
    }

    pub fn to_u8(&self) -> Vec<u8> {
        self.data.iter().map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8).collect()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, u: usize, v: usize, c: usize) -> f64 {
        self.data[(v * self.width + u) * self.channels + c]
    }

    /// Same size and channel count as `other`.
    pub fn check_shape(&self, other: &Image) -> Result<()> {
        if (self.width, self.height, self.channels) != (other.width, other.height, other.channels) {
            return Err(Error::Shape {
                expected: format!("{}x{}x{}", self.width, self.height, self.channels),
                actual: format!("{}x{}x{}", other.width, other.height, other.channels),
            });
        }
        Ok(())
    }

    fn plane(&self, c: usize) -> Vec<f64> {
        self.data.iter().skip(c).step_by(self.channels).copied().collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossConfig {
    pub alpha: f64,
    pub smoothness_lambda: f64,
    pub ssim_window: usize,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { alpha: 0.85, smoothness_lambda: 1e-4, ssim_window: 3 }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        if self.ssim_window % 2 == 0 {
            return Err(Error::Config(format!("ssim window {} must be odd", self.ssim_window)));
        }
        Ok(())
    }
}
