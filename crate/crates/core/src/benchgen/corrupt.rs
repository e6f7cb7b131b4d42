use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::degrade::{apply_blur, convolve, jpeg_codec, sample_gaussian_kernel, BlurKernel};
use crate::error::Result;
use crate::imaging::Image;

/// Gaussian-noise deviation levels, in 8-bit units.
pub const GAUSSIAN_NOISE_LEVELS: (u32, u32) = (2, 25);
pub const BENCH_JPEG_QUALITY: (u8, u8) = (30, 90);
pub const DEFOCUS_RADIUS: (f64, f64) = (2.0, 6.0);
pub const DEFOCUS_SMOOTHING: f64 = 0.5;
pub const GLASS_SIGMA: (f64, f64) = (0.7, 1.5);
pub const GLASS_WINDOW: (usize, usize) = (2, 4);
pub const GLASS_ROUNDS: (usize, usize) = (1, 2);
pub const POISSON_PEAK: (f64, f64) = (30.0, 300.0);
pub const IMPULSE_FRACTION: (f64, f64) = (0.01, 0.05);
pub const SPECKLE_SIGMA: (f64, f64) = (0.05, 0.25);

/// One realized corruption. Every random draw is either stored directly or
/// regenerated from the stored `seed`, so [`Corruption::apply`] replays it
/// exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Corruption {
    GaussianBlur { kernel: BlurKernel },
    DefocusBlur { radius: f64, smoothing: f64 },
    GlassBlur { sigma: f64, window: usize, rounds: usize, seed: u64 },
    /// Independent per-sample noise with deviation `level / 255`.
    GaussianNoise { level: u32, seed: u64 },
    /// `Pois(x * peak) / peak`.
    PoissonNoise { peak: f64, seed: u64 },
    /// Each sample becomes 0 or 1 (evenly) with probability `fraction`.
    ImpulseNoise { fraction: f64, seed: u64 },
    /// `x + x * n`, `n ~ N(0, sigma^2)`.
    SpeckleNoise { sigma: f64, seed: u64 },
    Jpeg { quality: u8 },
}

impl Corruption {
    pub fn sample_gaussian_blur<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Corruption::GaussianBlur {
            kernel: sample_gaussian_kernel(rng),
        }
    }

    pub fn sample_defocus_blur<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Corruption::DefocusBlur {
            radius: rng.random_range(DEFOCUS_RADIUS.0..=DEFOCUS_RADIUS.1),
            smoothing: DEFOCUS_SMOOTHING,
        }
    }

    pub fn sample_glass_blur<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Corruption::GlassBlur {
            sigma: rng.random_range(GLASS_SIGMA.0..=GLASS_SIGMA.1),
            window: rng.random_range(GLASS_WINDOW.0..=GLASS_WINDOW.1),
            rounds: rng.random_range(GLASS_ROUNDS.0..=GLASS_ROUNDS.1),
            seed: rng.random(),
        }
    }

    pub fn sample_gaussian_noise<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Corruption::GaussianNoise {
            level: rng.random_range(GAUSSIAN_NOISE_LEVELS.0..=GAUSSIAN_NOISE_LEVELS.1),
            seed: rng.random(),
        }
    }

    pub fn sample_poisson_noise<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Corruption::PoissonNoise {
            peak: rng.random_range(POISSON_PEAK.0..=POISSON_PEAK.1),
            seed: rng.random(),
        }
    }

    pub fn sample_impulse_noise<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Corruption::ImpulseNoise {
            fraction: rng.random_range(IMPULSE_FRACTION.0..=IMPULSE_FRACTION.1),
            seed: rng.random(),
        }
    }

    pub fn sample_speckle_noise<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Corruption::SpeckleNoise {
            sigma: rng.random_range(SPECKLE_SIGMA.0..=SPECKLE_SIGMA.1),
            seed: rng.random(),
        }
    }

    pub fn sample_jpeg<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Corruption::Jpeg {
            quality: rng.random_range(BENCH_JPEG_QUALITY.0..=BENCH_JPEG_QUALITY.1),
        }
    }

    pub fn is_blur(&self) -> bool {
        matches!(
            self,
            Corruption::GaussianBlur { .. } | Corruption::DefocusBlur { .. } | Corruption::GlassBlur { .. }
        )
    }

    pub fn is_noise(&self) -> bool {
        matches!(
            self,
            Corruption::GaussianNoise { .. }
                | Corruption::PoissonNoise { .. }
                | Corruption::ImpulseNoise { .. }
                | Corruption::SpeckleNoise { .. }
        )
    }

    pub fn apply(&self, img: &Image) -> Result<Image> {
        match *self {
            Corruption::GaussianBlur { ref kernel } => apply_blur(img, kernel),
            Corruption::DefocusBlur { radius, smoothing } => {
                let (w, size) = defocus_kernel(radius, smoothing);
                convolve(img, &w, size)
            }
            Corruption::GlassBlur {
                sigma,
                window,
                rounds,
                seed,
            } => glass_blur(img, sigma, window, rounds, seed),
            Corruption::GaussianNoise { level, seed } => {
                let sd = f64::from(level) / 255.0;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                Ok(img.map(|v| (f64::from(v) + sd * rng.sample::<f64, _>(StandardNormal)).clamp(0.0, 1.0) as f32))
            }
            Corruption::PoissonNoise { peak, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                Ok(img.map(|v| {
                    let rate = f64::from(v) * peak;
                    let k = if rate > 0.0 {
                        Poisson::new(rate).expect("positive finite rate").sample(&mut rng)
                    } else {
                        0.0
                    };
                    (k / peak).clamp(0.0, 1.0) as f32
                }))
            }
            Corruption::ImpulseNoise { fraction, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                Ok(img.map(|v| {
                    if rng.random_bool(fraction) {
                        if rng.random_bool(0.5) {
                            1.0
                        } else {
                            0.0
                        }
                    } else {
                        v
                    }
                }))
            }
            Corruption::SpeckleNoise { sigma, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                Ok(img.map(|v| {
                    let x = f64::from(v);
                    (x + x * sigma * rng.sample::<f64, _>(StandardNormal)).clamp(0.0, 1.0) as f32
                }))
            }
            Corruption::Jpeg { quality } => jpeg_codec(img, quality),
        }
    }
}

/// Disk of `radius` smoothed by a 3x3 Gaussian of deviation `smoothing`,
/// normalized; returns row-major weights and the side length.
pub fn defocus_kernel(radius: f64, smoothing: f64) -> (Vec<f64>, usize) {
    let r = radius.ceil() as isize + 1;
    let size = (2 * r + 1) as usize;
    let disk = |y: isize, x: isize| -> f64 {
        if y.abs() > r || x.abs() > r {
            0.0
        } else if ((y * y + x * x) as f64) <= radius * radius {
            1.0
        } else {
            0.0
        }
    };
    let g: Vec<f64> = (-1..=1)
        .flat_map(|dy: isize| (-1..=1).map(move |dx: isize| (dy, dx)))
        .map(|(dy, dx)| (-((dy * dy + dx * dx) as f64) / (2.0 * smoothing * smoothing)).exp())
        .collect();
    let mut w = vec![0.0; size * size];
    for y in -r..=r {
        for x in -r..=r {
            let mut acc = 0.0;
            for (n, gv) in g.iter().enumerate() {
                let (dy, dx) = (n as isize / 3 - 1, n as isize % 3 - 1);
                acc += gv * disk(y - dy, x - dx);
            }
            w[((y + r) * (2 * r + 1) + x + r) as usize] = acc;
        }
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    (w, size)
}

fn glass_blur(img: &Image, sigma: f64, window: usize, rounds: usize, seed: u64) -> Result<Image> {
    let size = 2 * (3.0 * sigma).ceil() as usize + 1;
    let k = BlurKernel::gaussian(size, sigma, sigma, 0.0)?;
    let mut out = apply_blur(img, &k)?;
    let (c, h, w) = out.dims();
    let d = window as i64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..rounds {
        // Swap every interior pixel (all channels together) with a random
        // neighbor inside the window, sweeping bottom-right to top-left.
        for y in (window..h.saturating_sub(window)).rev() {
            for x in (window..w.saturating_sub(window)).rev() {
                let ny = (y as i64 + rng.random_range(-d..=d)) as usize;
                let nx = (x as i64 + rng.random_range(-d..=d)) as usize;
                for ch in 0..c {
                    let p = out.plane_mut(ch);
                    p.swap(y * w + x, ny * w + nx);
                }
            }
        }
    }
    apply_blur(&out, &k)
}
