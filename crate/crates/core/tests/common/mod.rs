//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use srtta::degrade::BlurKernel;
use srtta::imaging::Image;

/// Smooth-plus-edges content resembling a natural photo crop.
pub fn photo_like(seed: u64, h: usize, w: usize) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f: Vec<(f32, f32, f32)> = (0..6)
        .map(|_| (rng.random_range(0.02..0.3), rng.random_range(0.02..0.3), rng.random_range(0.0..6.0)))
        .collect();
    let edge = rng.random_range(0.2..0.8) * w as f32;
    Image::from_fn(3, h, w, |c, y, x| {
        let mut v = 0.45 + 0.1 * c as f32;
        for (i, &(fx, fy, ph)) in f.iter().enumerate() {
            v += 0.06 / (1 + i) as f32 * ((x as f32 * fx + y as f32 * fy + ph + c as f32).sin());
        }
        if (x as f32) + 0.3 * y as f32 > edge {
            v += 0.2;
        }
        v.clamp(0.0, 1.0)
    })
}

/// Encode and decode through the `image` crate's baseline JPEG codec.
pub fn reference_jpeg(img: &Image, q: u8) -> Image {
    use image::codecs::jpeg::JpegEncoder;
    use image::ExtendedColorType;
    let (c, h, w) = img.dims();
    assert_eq!(c, 3);
    let mut buf = Vec::new();
    JpegEncoder::new_with_quality(&mut buf, q)
        .encode(&img.to_interleaved_u8(), w as u32, h as u32, ExtendedColorType::Rgb8)
        .unwrap();
    let decoded = image::load_from_memory_with_format(&buf, image::ImageFormat::Jpeg)
        .unwrap()
        .to_rgb8();
    Image::from_interleaved_u8(3, h, w, decoded.as_raw()).unwrap()
}

/// Normalized kernel from the covariance form `R diag(s1^2, s2^2) R^T`,
/// row-major.
pub fn direct_kernel(k: &BlurKernel) -> Vec<f64> {
    let r = (k.size / 2) as f64;
    let (s, c) = k.angle.sin_cos();
    let (v1, v2) = (k.sigma1 * k.sigma1, k.sigma2 * k.sigma2);
    let a = c * c * v1 + s * s * v2;
    let b = c * s * (v1 - v2);
    let d = s * s * v1 + c * c * v2;
    let det = a * d - b * b;
    let raw: Vec<f64> = (0..k.size * k.size)
        .map(|n| {
            let (dy, dx) = ((n / k.size) as f64 - r, (n % k.size) as f64 - r);
            (-0.5 * (d * dx * dx - 2.0 * b * dx * dy + a * dy * dy) / det).exp()
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// PSNR through the root mean squared error, with no cap.
pub fn naive_psnr(a: &Image, b: &Image) -> f64 {
    let n = a.data().len() as f64;
    let sq: f64 = a.data().iter().zip(b.data()).map(|(&x, &y)| (f64::from(x) - f64::from(y)).powi(2)).sum();
    -20.0 * (sq / n).sqrt().log10()
}

fn luma(img: &Image) -> Vec<f64> {
    let (_, h, w) = img.dims();
    (0..h * w)
        .map(|i| {
            let (y, x) = (i / w, i % w);
            if img.channels() == 1 {
                f64::from(img.get(0, y, x))
            } else {
                [0.299, 0.587, 0.114].iter().enumerate().map(|(c, k)| k * f64::from(img.get(c, y, x))).sum()
            }
        })
        .collect()
}

/// Mean SSIM with a direct 2-D 11x11 Gaussian window (sigma 1.5), weighted
/// central moments per window, luma only, dynamic range 1.
pub fn naive_ssim(a: &Image, b: &Image) -> f64 {
    let (_, h, w) = a.dims();
    let (la, lb) = (luma(a), luma(b));
    let mut win = [[0.0f64; 11]; 11];
    let mut total = 0.0;
    for (i, row) in win.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let (dy, dx) = (i as f64 - 5.0, j as f64 - 5.0);
            *v = (-(dx * dx + dy * dy) / 4.5).exp();
            total += *v;
        }
    }
    let (c1, c2) = (0.01f64.powi(2), 0.03f64.powi(2));
    let mut sum = 0.0;
    let mut count = 0usize;
    for y in 0..=h - 11 {
        for x in 0..=w - 11 {
            let at = |p: &[f64], i: usize, j: usize| p[(y + i) * w + x + j];
            let (mut ma, mut mb) = (0.0, 0.0);
            for i in 0..11 {
                for j in 0..11 {
                    let g = win[i][j] / total;
                    ma += g * at(&la, i, j);
                    mb += g * at(&lb, i, j);
                }
            }
            let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
            for i in 0..11 {
                for j in 0..11 {
                    let g = win[i][j] / total;
                    let (da, db) = (at(&la, i, j) - ma, at(&lb, i, j) - mb);
                    va += g * da * da;
                    vb += g * db * db;
                    cov += g * da * db;
                }
            }
            sum += (2.0 * ma * mb + c1) * (2.0 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            count += 1;
        }
    }
    sum / count as f64
}
