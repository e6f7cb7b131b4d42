use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::Image;
use crate::nn::Tensor;

pub const NOISE_SCALE_RANGE: (f64, f64) = (1.0, 30.0);
pub const PER_CHANNEL_PROB: f64 = 0.6;

/// Additive Gaussian noise. `scale` is a standard deviation in 8-bit units;
/// the realized map is `scale / 255` times standard-normal draws from a
/// generator seeded with `seed`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub per_channel: bool,
    pub scale: f64,
    pub seed: u64,
}

impl NoiseSpec {
    /// Regenerates the (unclamped) noise map for a `channels x height x width` image.
    pub fn realize(&self, channels: usize, height: usize, width: usize) -> Tensor<f32> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let sd = self.scale / 255.0;
        let plane = height * width;
        let mut draw = |n: usize| -> Vec<f32> {
            (0..n)
                .map(|_| (rng.sample::<f64, _>(StandardNormal) * sd) as f32)
                .collect()
        };
        let data = if self.per_channel || channels == 1 {
            draw(channels * plane)
        } else {
            draw(plane).repeat(channels)
        };
        Tensor::from_vec(channels, height, width, data).expect("length matches shape")
    }
}

pub fn sample_noise_spec<R: Rng + ?Sized>(rng: &mut R) -> NoiseSpec {
    NoiseSpec {
        per_channel: rng.random_bool(PER_CHANNEL_PROB),
        scale: rng.random_range(NOISE_SCALE_RANGE.0..=NOISE_SCALE_RANGE.1),
        seed: rng.random(),
    }
}

/// Samples a noise spec and realizes its map for the given shape.
pub fn sample_noise<R: Rng + ?Sized>(rng: &mut R, shape: (usize, usize, usize)) -> (NoiseSpec, Tensor<f32>) {
    let spec = sample_noise_spec(rng);
    let (c, h, w) = shape;
    (spec, spec.realize(c, h, w))
}

/// `clamp(img + noise)`.
pub fn add_noise(img: &Image, noise: &Tensor<f32>) -> Result<Image> {
    if img.dims() != noise.shape() {
        return Err(Error::Shape(format!("image {:?} vs noise map {:?}", img.dims(), noise.shape())));
    }
    let (c, h, w) = img.dims();
    let data = img.data().iter().zip(&noise.data).map(|(a, b)| (a + b).clamp(0.0, 1.0)).collect();
    Image::new(c, h, w, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_scale_has_one_level_deviation() {
        let spec = NoiseSpec {
            per_channel: true,
            scale: 1.0,
            seed: 3,
        };
        let map = spec.realize(1, 250, 400);
        let n = map.len() as f64;
        let mean = map.data.iter().map(|&v| f64::from(v)).sum::<f64>() / n;
        let sd = (map.data.iter().map(|&v| (f64::from(v) - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!((sd * 255.0 - 1.0).abs() < 0.05, "{}", sd * 255.0);
        assert!(mean.abs() < 3.0 * (1.0 / 255.0) / n.sqrt());
    }

    #[test]
    fn shared_mode_replicates_planes() {
        let spec = NoiseSpec {
            per_channel: false,
            scale: 12.0,
            seed: 9,
        };
        let map = spec.realize(3, 8, 9);
        let p = map.plane_len();
        assert_eq!(map.data[..p], map.data[p..2 * p]);
        assert_eq!(map.data[..p], map.data[2 * p..]);
    }

    #[test]
    fn per_channel_fraction_and_scale_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut per = 0;
        for _ in 0..10_000 {
            let s = sample_noise_spec(&mut rng);
            assert!((1.0..=30.0).contains(&s.scale));
            per += usize::from(s.per_channel);
        }
        let frac = per as f64 / 10_000.0;
        assert!((0.57..=0.63).contains(&frac), "{frac}");
    }

    #[test]
    fn realization_is_replayable() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (spec, map) = sample_noise(&mut rng, (3, 10, 11));
        assert_eq!(spec.realize(3, 10, 11), map);
    }
}
