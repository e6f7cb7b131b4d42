//! Planar float images, resampling, PNG I/O and full-reference metrics.

mod metrics;
mod png_io;
mod resize;

pub use metrics::{mse, psnr, ssim, PSNR_CAP_DB};
pub use png_io::{read_png, write_png};
pub use resize::{bicubic_resize, keys_cubic, Scale};

use crate::error::{Error, Result};

/// Smallest side length accepted by the degradation and adaptation pipeline.
pub const MIN_PIPELINE_SIDE: usize = 8;

/// A channel-planar image with samples in `[0, 1]`.
///
/// Samples are stored plane by plane, each plane row-major, so sample
/// `(c, y, x)` lives at `c * h * w + y * w + x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl Image {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidArgument(format!(
                "images have 1 or 3 channels, got {channels}"
            )));
        }
        if data.len() != channels * height * width {
            return Err(Error::Shape(format!(
                "data length {} does not match {channels}x{height}x{width}",
                data.len()
            )));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn filled(channels: usize, height: usize, width: usize, value: f32) -> Self {
        Self::new(channels, height, width, vec![value; channels * height * width])
            .expect("valid dimensions")
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self::filled(channels, height, width, 0.0)
    }

    /// Builds an image by evaluating `f(c, y, x)` at every sample.
    pub fn from_fn(
        channels: usize,
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Self {
        let mut data = Vec::with_capacity(channels * height * width);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, y, x));
                }
            }
        }
        Self::new(channels, height, width, data).expect("valid dimensions")
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// `(channels, height, width)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, v: f32) {
        self.data[(c * self.height + y) * self.width + x] = v;
    }

    pub fn plane(&self, c: usize) -> &[f32] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn plane_mut(&mut self, c: usize) -> &mut [f32] {
        let n = self.height * self.width;
        &mut self.data[c * n..(c + 1) * n]
    }

    pub fn same_dims(&self, other: &Image) -> bool {
        self.dims() == other.dims()
    }

    /// Clamps every sample into `[0, 1]`, mapping NaN to 0.
    pub fn clamp_unit(mut self) -> Self {
        for v in &mut self.data {
            *v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        }
        self
    }

    pub fn map(&self, mut f: impl FnMut(f32) -> f32) -> Image {
        Image {
            channels: self.channels,
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Extracts the `height x width` window whose top-left corner is `(top, left)`.
    pub fn crop(&self, top: usize, left: usize, height: usize, width: usize) -> Result<Image> {
        if top + height > self.height || left + width > self.width {
            return Err(Error::Shape(format!(
                "crop {height}x{width} at ({top},{left}) exceeds {}x{}",
                self.height, self.width
            )));
        }
        Ok(Image::from_fn(self.channels, height, width, |c, y, x| {
            self.get(c, top + y, left + x)
        }))
    }

    /// Center crop to the largest dimensions divisible by `factor`.
    pub fn crop_to_multiple(&self, factor: usize) -> Image {
        let h = self.height / factor * factor;
        let w = self.width / factor * factor;
        let top = (self.height - h) / 2;
        let left = (self.width - w) / 2;
        self.crop(top, left, h, w).expect("window inside image")
    }

    /// ITU-R BT.601 luma for RGB images; grayscale images are returned as is.
    pub fn luminance(&self) -> Vec<f64> {
        if self.channels == 1 {
            return self.data.iter().map(|&v| f64::from(v)).collect();
        }
        let (r, g, b) = (self.plane(0), self.plane(1), self.plane(2));
        r.iter()
            .zip(g)
            .zip(b)
            .map(|((&r, &g), &b)| 0.299 * f64::from(r) + 0.587 * f64::from(g) + 0.114 * f64::from(b))
            .collect()
    }

    /// Fails unless both sides are at least `MIN_PIPELINE_SIDE`.
    pub fn check_pipeline_size(&self) -> Result<()> {
        if self.height < MIN_PIPELINE_SIDE || self.width < MIN_PIPELINE_SIDE {
            return Err(Error::TooSmall(format!(
                "{}x{} is below the {MIN_PIPELINE_SIDE}x{MIN_PIPELINE_SIDE} pipeline minimum",
                self.height, self.width
            )));
        }
        Ok(())
    }

    /// Quantizes every sample to the nearest multiple of 1/255.
    pub fn quantize_u8(&self) -> Image {
        self.map(|v| (v.clamp(0.0, 1.0) * 255.0).round() / 255.0)
    }

    /// Samples as 8-bit values, interleaved per pixel.
    pub fn to_interleaved_u8(&self) -> Vec<u8> {
        let n = self.height * self.width;
        let mut out = Vec::with_capacity(n * self.channels);
        for i in 0..n {
            for c in 0..self.channels {
                out.push((self.data[c * n + i].clamp(0.0, 1.0) * 255.0).round() as u8);
            }
        }
        out
    }

    pub fn from_interleaved_u8(channels: usize, height: usize, width: usize, bytes: &[u8]) -> Result<Image> {
        if bytes.len() != channels * height * width {
            return Err(Error::Shape(format!(
                "{} bytes for a {channels}x{height}x{width} image",
                bytes.len()
            )));
        }
        Ok(Image::from_fn(channels, height, width, |c, y, x| {
            f32::from(bytes[(y * width + x) * channels + c]) / 255.0
        }))
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().map(|&v| f64::from(v)).sum::<f64>() / self.data.len() as f64
    }
}
