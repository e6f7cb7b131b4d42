use super::Image;
use crate::error::{Error, Result};

/// A positive rational resampling factor, `num / den`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Scale {
    num: u32,
    den: u32,
}

impl Scale {
    pub fn new(num: u32, den: u32) -> Result<Self> {
        if num == 0 || den == 0 {
            return Err(Error::InvalidArgument(format!(
                "scale {num}/{den} must be positive"
            )));
        }
        Ok(Self { num, den })
    }

    /// Upscaling by an integer factor.
    pub fn up(factor: u32) -> Self {
        Self::new(factor, 1).expect("positive factor")
    }

    /// Downscaling by an integer factor.
    pub fn down(factor: u32) -> Self {
        Self::new(1, factor).expect("positive factor")
    }

    pub fn is_identity(&self) -> bool {
        self.num == self.den
    }

    pub fn as_f64(&self) -> f64 {
        f64::from(self.num) / f64::from(self.den)
    }

    /// `round(len * num / den)`.
    pub fn apply(&self, len: usize) -> usize {
        let n = len as u64 * u64::from(self.num);
        let d = u64::from(self.den);
        ((2 * n + d) / (2 * d)) as usize
    }
}

const KEYS_A: f64 = -0.5;

/// Keys cubic convolution kernel with `a = -0.5`.
pub fn keys_cubic(x: f64) -> f64 {
    let x = x.abs();
    if x < 1.0 {
        ((KEYS_A + 2.0) * x - (KEYS_A + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((KEYS_A * x - 5.0 * KEYS_A) * x + 8.0 * KEYS_A) * x - 4.0 * KEYS_A
    } else {
        0.0
    }
}

/// Per output index: the first contributing source index (before clamping)
/// and its normalized weights.
struct AxisTaps {
    taps: Vec<(Vec<usize>, Vec<f64>)>,
}

impl AxisTaps {
    fn new(in_len: usize, out_len: usize) -> Self {
        let ratio = out_len as f64 / in_len as f64;
        // Downscaling widens the kernel so every source sample contributes.
        let stretch = ratio.min(1.0);
        let support = 2.0 / stretch;
        let last = in_len as isize - 1;
        let taps = (0..out_len)
            .map(|i| {
                let center = (i as f64 + 0.5) / ratio - 0.5;
                let lo = (center - support).floor() as isize;
                let hi = (center + support).ceil() as isize;
                let mut idx = Vec::with_capacity((hi - lo + 1) as usize);
                let mut w = Vec::with_capacity((hi - lo + 1) as usize);
                for j in lo..=hi {
                    let k = keys_cubic((j as f64 - center) * stretch);
                    if k != 0.0 {
                        idx.push(j.clamp(0, last) as usize);
                        w.push(k);
                    }
                }
                let total: f64 = w.iter().sum();
                for v in &mut w {
                    *v /= total;
                }
                (idx, w)
            })
            .collect();
        Self { taps }
    }
}

/// Cubic-convolution resampling (Keys, `a = -0.5`) with edge replication.
///
/// When shrinking, the kernel is widened by the inverse scale (antialiasing).
/// Output samples are clamped to `[0, 1]`.
pub fn bicubic_resize(img: &Image, scale: Scale) -> Result<Image> {
    if scale.is_identity() {
        return Ok(img.clone());
    }
    let (c, h, w) = img.dims();
    let (oh, ow) = (scale.apply(h), scale.apply(w));
    if oh < 1 || ow < 1 {
        return Err(Error::TooSmall(format!(
            "resizing {h}x{w} by {} gives {oh}x{ow}",
            scale.as_f64()
        )));
    }
    let xt = AxisTaps::new(w, ow);
    let yt = AxisTaps::new(h, oh);
    let mut out = Image::zeros(c, oh, ow);
    let mut rows = vec![0f64; h * ow];
    for ch in 0..c {
        let plane = img.plane(ch);
        for y in 0..h {
            let src = &plane[y * w..(y + 1) * w];
            for (x, (idx, wt)) in xt.taps.iter().enumerate() {
                rows[y * ow + x] = idx
                    .iter()
                    .zip(wt)
                    .map(|(&j, &k)| f64::from(src[j]) * k)
                    .sum();
            }
        }
        let dst = out.plane_mut(ch);
        for (y, (idx, wt)) in yt.taps.iter().enumerate() {
            for x in 0..ow {
                let v: f64 = idx.iter().zip(wt).map(|(&j, &k)| rows[j * ow + x] * k).sum();
                dst[y * ow + x] = v.clamp(0.0, 1.0) as f32;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_kernel_interpolates() {
        assert_eq!(keys_cubic(0.0), 1.0);
        assert_eq!(keys_cubic(1.0), 0.0);
        assert_eq!(keys_cubic(2.0), 0.0);
        assert!((keys_cubic(0.5) - 0.5625).abs() < 1e-12);
        assert!((keys_cubic(1.5) + 0.0625).abs() < 1e-12);
    }

    #[test]
    fn identity_scale_is_bit_identical() {
        let img = Image::from_fn(3, 9, 11, |c, y, x| ((c * 31 + y * 7 + x * 3) % 17) as f32 / 16.0);
        assert_eq!(bicubic_resize(&img, Scale::new(3, 3).unwrap()).unwrap(), img);
    }

    #[test]
    fn constant_survives_downscale() {
        let img = Image::filled(3, 32, 32, 0.5);
        let out = bicubic_resize(&img, Scale::down(2)).unwrap();
        assert_eq!(out.dims(), (3, 16, 16));
        assert!(out.data().iter().all(|&v| (v - 0.5).abs() < 1e-7));
    }

    #[test]
    fn output_dims_round() {
        let img = Image::filled(1, 9, 10, 0.2);
        let out = bicubic_resize(&img, Scale::down(2)).unwrap();
        assert_eq!(out.dims(), (1, 5, 5));
        let out = bicubic_resize(&img, Scale::up(4)).unwrap();
        assert_eq!(out.dims(), (1, 36, 40));
    }

    #[test]
    fn collapse_to_zero_fails() {
        let img = Image::filled(1, 1, 1, 0.2);
        assert!(bicubic_resize(&img, Scale::down(4)).is_err());
    }

    #[test]
    fn zero_scale_rejected() {
        assert!(Scale::new(0, 2).is_err());
    }
}
