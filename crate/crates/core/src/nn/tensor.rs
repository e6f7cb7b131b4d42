use super::Real;
use crate::error::{Error, Result};
use crate::imaging::Image;

/// A `(channels, height, width)` activation tensor, plane-major like [`Image`].
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![T::ZERO; channels * height * width],
        }
    }

    pub fn from_vec(channels: usize, height: usize, width: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(Error::Shape(format!(
                "tensor data length {} for shape ({channels},{height},{width})",
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

    pub fn from_image(img: &Image) -> Self {
        let (c, h, w) = img.dims();
        Self {
            channels: c,
            height: h,
            width: w,
            data: img.data().iter().map(|&v| T::from_f32(v)).collect(),
        }
    }

    /// Converts to an image, clamping into `[0, 1]`.
    pub fn to_image(&self) -> Result<Image> {
        Image::new(
            self.channels,
            self.height,
            self.width,
            self.data.iter().map(|v| v.to_f32()).collect(),
        )
        .map(Image::clamp_unit)
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn add_assign(&mut self, other: &Tensor<T>) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    /// Spatial window `[top, top+h) x [left, left+w)` of every channel.
    pub fn crop(&self, top: usize, left: usize, h: usize, w: usize) -> Result<Tensor<T>> {
        if top + h > self.height || left + w > self.width {
            return Err(Error::Shape(format!(
                "tensor crop {h}x{w} at ({top},{left}) exceeds {}x{}",
                self.height, self.width
            )));
        }
        let mut data = Vec::with_capacity(self.channels * h * w);
        for c in 0..self.channels {
            for y in top..top + h {
                let row = (c * self.height + y) * self.width;
                data.extend_from_slice(&self.data[row + left..row + left + w]);
            }
        }
        Tensor::from_vec(self.channels, h, w, data)
    }
}

/// Sub-pixel rearrangement `(C r^2, H, W) -> (C, rH, rW)`.
///
/// Output `(c, y r + i, x r + j)` takes input channel `c r^2 + i r + j` at
/// `(y, x)`.
pub fn pixel_shuffle<T: Real>(t: &Tensor<T>, r: usize) -> Result<Tensor<T>> {
    let rr = r * r;
    if r == 0 || t.channels % rr != 0 {
        return Err(Error::Shape(format!(
            "pixel shuffle by {r} needs channels divisible by {rr}, got {}",
            t.channels
        )));
    }
    let (c_out, h, w) = (t.channels / rr, t.height, t.width);
    let (oh, ow) = (h * r, w * r);
    let mut out = Tensor::zeros(c_out, oh, ow);
    for c in 0..c_out {
        for i in 0..r {
            for j in 0..r {
                let src = &t.data[(c * rr + i * r + j) * h * w..][..h * w];
                for y in 0..h {
                    let dst_row = (c * oh + y * r + i) * ow;
                    for x in 0..w {
                        out.data[dst_row + x * r + j] = src[y * w + x];
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Inverse of [`pixel_shuffle`]; also the adjoint used in backpropagation.
pub fn pixel_unshuffle<T: Real>(t: &Tensor<T>, r: usize) -> Result<Tensor<T>> {
    if r == 0 || t.height % r != 0 || t.width % r != 0 {
        return Err(Error::Shape(format!(
            "pixel unshuffle by {r} needs spatial dims divisible by {r}, got {}x{}",
            t.height, t.width
        )));
    }
    let rr = r * r;
    let (h, w) = (t.height / r, t.width / r);
    let mut out = Tensor::zeros(t.channels * rr, h, w);
    for c in 0..t.channels {
        for i in 0..r {
            for j in 0..r {
                let dst = &mut out.data[(c * rr + i * r + j) * h * w..][..h * w];
                for y in 0..h {
                    let src_row = (c * t.height + y * r + i) * t.width;
                    for x in 0..w {
                        dst[y * w + x] = t.data[src_row + x * r + j];
                    }
                }
            }
        }
    }
    Ok(out)
}
