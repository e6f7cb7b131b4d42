use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::Image;

pub const KERNEL_SIZES: [usize; 8] = [7, 9, 11, 13, 15, 17, 19, 21];
pub const SIGMA_RANGE: (f64, f64) = (0.2, 3.0);

/// A normalized square blur kernel.
///
/// `weights[i][j]` is the tap at row offset `i - size/2`, column offset
/// `j - size/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlurKernel {
    pub size: usize,
    pub sigma1: f64,
    pub sigma2: f64,
    pub angle: f64,
    pub weights: Vec<Vec<f64>>,
}

/// Unnormalized density of a bivariate Gaussian with principal deviations
/// `sigma1`, `sigma2`, the first axis rotated by `angle`, at offset `(dx, dy)`.
pub fn gaussian_density(sigma1: f64, sigma2: f64, angle: f64, dx: f64, dy: f64) -> f64 {
    let (s, c) = angle.sin_cos();
    // Coordinates in the kernel's principal frame.
    let u = c * dx + s * dy;
    let v = -s * dx + c * dy;
    (-0.5 * (u * u / (sigma1 * sigma1) + v * v / (sigma2 * sigma2))).exp()
}

impl BlurKernel {
    pub fn gaussian(size: usize, sigma1: f64, sigma2: f64, angle: f64) -> Result<Self> {
        if size % 2 == 0 || size == 0 {
            return Err(Error::InvalidArgument(format!("kernel size must be odd, got {size}")));
        }
        if !(sigma1 > 0.0 && sigma2 > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "kernel sigmas must be positive, got ({sigma1}, {sigma2})"
            )));
        }
        let r = (size / 2) as f64;
        let mut weights: Vec<Vec<f64>> = (0..size)
            .map(|i| {
                (0..size)
                    .map(|j| gaussian_density(sigma1, sigma2, angle, j as f64 - r, i as f64 - r))
                    .collect()
            })
            .collect();
        let total: f64 = weights.iter().flatten().sum();
        weights.iter_mut().flatten().for_each(|w| *w /= total);
        Ok(Self {
            size,
            sigma1,
            sigma2,
            angle,
            weights,
        })
    }

    pub fn is_isotropic(&self) -> bool {
        self.sigma1 == self.sigma2
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().flatten().sum()
    }
}

/// Draws a random Gaussian kernel: odd size in 7..=21, deviations in
/// `[0.2, 3]`, isotropic with probability one half, otherwise rotated by a
/// uniform angle.
pub fn sample_gaussian_kernel<R: Rng + ?Sized>(rng: &mut R) -> BlurKernel {
    let size = KERNEL_SIZES[rng.random_range(0..KERNEL_SIZES.len())];
    let sigma1 = rng.random_range(SIGMA_RANGE.0..=SIGMA_RANGE.1);
    let (sigma2, angle) = if rng.random_bool(0.5) {
        (sigma1, 0.0)
    } else {
        (rng.random_range(SIGMA_RANGE.0..=SIGMA_RANGE.1), rng.random_range(-PI..=PI))
    };
    BlurKernel::gaussian(size, sigma1, sigma2, angle).expect("sampled parameters are valid")
}

/// Per-channel 2-D convolution of `img` with a square `size`x`size` kernel
/// given row-major, using replicate-edge padding. The output is clamped.
pub fn convolve(img: &Image, weights: &[f64], size: usize) -> Result<Image> {
    debug_assert_eq!(weights.len(), size * size);
    let (c, h, w) = img.dims();
    if h < size || w < size {
        return Err(Error::TooSmall(format!("{h}x{w} image for a {size}x{size} kernel")));
    }
    let r = (size / 2) as isize;
    let (ph, pw) = (h + 2 * size / 2, w + 2 * size / 2);
    let mut out = Image::zeros(c, h, w);
    let mut padded = vec![0f64; ph * pw];
    for ch in 0..c {
        let src = img.plane(ch);
        for py in 0..ph {
            let sy = (py as isize - r).clamp(0, h as isize - 1) as usize;
            for px in 0..pw {
                let sx = (px as isize - r).clamp(0, w as isize - 1) as usize;
                padded[py * pw + px] = f64::from(src[sy * w + sx]);
            }
        }
        let dst = out.plane_mut(ch);
        for y in 0..h {
            for x in 0..w {
                // out(y, x) = sum k(i, j) in(y - (i - r), x - (j - r)); the
                // flipped tap lands at padded row y + 2r - i.
                let mut acc = 0.0;
                for i in 0..size {
                    let row = &padded[(y + size - 1 - i) * pw + x..][..size];
                    let k = &weights[i * size..][..size];
                    for j in 0..size {
                        acc += k[j] * row[size - 1 - j];
                    }
                }
                dst[y * w + x] = acc.clamp(0.0, 1.0) as f32;
            }
        }
    }
    Ok(out)
}

/// Blurs every channel with `k`; output has the input's dimensions.
pub fn apply_blur(img: &Image, k: &BlurKernel) -> Result<Image> {
    let flat: Vec<f64> = k.weights.iter().flatten().copied().collect();
    convolve(img, &flat, k.size)
}
