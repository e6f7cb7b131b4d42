//! Random degradations: blur, additive noise and JPEG, composed into the
//! first-order (HR to test image) and second-order (test image to a further
//! degraded copy at the same resolution) models.

mod jpeg;
mod kernel;
mod noise;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{bicubic_resize, Image, Scale};

pub use jpeg::{jpeg_codec, scaled_table, JpegSpec, CHROMA_BASE, LUMA_BASE};
pub use kernel::{
    apply_blur, convolve, gaussian_density, sample_gaussian_kernel, BlurKernel, KERNEL_SIZES, SIGMA_RANGE,
};
pub use noise::{add_noise, sample_noise, sample_noise_spec, NoiseSpec, NOISE_SCALE_RANGE, PER_CHANNEL_PROB};

/// JPEG qualities drawn for second-order degradation.
pub const SECOND_ORDER_QUALITY: (u8, u8) = (30, 95);

/// Which coarse degradation types an image carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct DegradationLabel {
    pub blur: bool,
    pub noise: bool,
    pub jpeg: bool,
}

impl DegradationLabel {
    pub const CLEAN: Self = Self {
        blur: false,
        noise: false,
        jpeg: false,
    };

    pub fn new(blur: bool, noise: bool, jpeg: bool) -> Self {
        Self { blur, noise, jpeg }
    }

    pub fn is_clean(&self) -> bool {
        !(self.blur || self.noise || self.jpeg)
    }

    /// `[c_b, c_n, c_j]` as 0/1 values.
    pub fn as_array(&self) -> [u8; 3] {
        [self.blur, self.noise, self.jpeg].map(u8::from)
    }
}

impl std::fmt::Display for DegradationLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_clean() {
            return f.write_str("clean");
        }
        let parts: Vec<&str> = [(self.blur, "blur"), (self.noise, "noise"), (self.jpeg, "jpeg")]
            .into_iter()
            .filter_map(|(on, name)| on.then_some(name))
            .collect();
        f.write_str(&parts.join("+"))
    }
}

/// Concrete parameters of one degradation. `scale` is the downsampling factor
/// of a first-order degradation and 1 for same-resolution degradations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegradationSpec {
    pub blur: Option<BlurKernel>,
    pub noise: Option<NoiseSpec>,
    pub jpeg: Option<JpegSpec>,
    pub scale: usize,
}

impl DegradationSpec {
    pub fn identity(scale: usize) -> Self {
        Self {
            blur: None,
            noise: None,
            jpeg: None,
            scale,
        }
    }

    pub fn label(&self) -> DegradationLabel {
        DegradationLabel::new(self.blur.is_some(), self.noise.is_some(), self.jpeg.is_some())
    }

    /// Noise then JPEG, at the image's own resolution.
    fn apply_noise_jpeg(&self, img: Image) -> Result<Image> {
        let mut img = img;
        if let Some(n) = &self.noise {
            let (c, h, w) = img.dims();
            img = add_noise(&img, &n.realize(c, h, w))?;
        }
        if let Some(j) = &self.jpeg {
            img = jpeg_codec(&img, j.quality)?;
        }
        Ok(img)
    }
}

/// Where the blur of a first-order degradation happens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StageOrder {
    /// Blur the HR image, then downsample, then noise and JPEG.
    BlurFirst,
    /// Downsample first; every present component acts on the LR image.
    DownsampleFirst,
}

/// Degrades an HR image `y` into a test image:
/// `[(y * k) downsampled + n]_JPEG` with absent components skipped.
pub fn first_order_degrade(y: &Image, spec: &DegradationSpec, order: StageOrder) -> Result<Image> {
    let s = spec.scale;
    if !matches!(s, 2 | 4) {
        return Err(Error::InvalidArgument(format!("first-order scale must be 2 or 4, got {s}")));
    }
    if y.height() % s != 0 || y.width() % s != 0 {
        return Err(Error::Shape(format!(
            "{}x{} HR image is not divisible by scale {s}",
            y.height(),
            y.width()
        )));
    }
    let down = |img: &Image| bicubic_resize(img, Scale::down(s as u32));
    let lr = match (order, &spec.blur) {
        (StageOrder::BlurFirst, Some(k)) => down(&apply_blur(y, k)?)?,
        (StageOrder::DownsampleFirst, Some(k)) => apply_blur(&down(y)?, k)?,
        (_, None) => down(y)?,
    };
    spec.apply_noise_jpeg(lr)
}

/// Builds a same-resolution degraded copy of `x` carrying exactly the
/// degradation types of `label`, with parameters drawn fresh from `rng`:
/// blur, then additive noise, then JPEG.
pub fn second_order_degrade<R: Rng + ?Sized>(
    x: &Image,
    label: DegradationLabel,
    rng: &mut R,
) -> Result<(Image, DegradationSpec)> {
    if label.is_clean() {
        return Err(Error::CleanLabel);
    }
    let spec = DegradationSpec {
        blur: label.blur.then(|| sample_gaussian_kernel(rng)),
        noise: label.noise.then(|| sample_noise_spec(rng)),
        jpeg: label.jpeg.then(|| JpegSpec {
            quality: rng.random_range(SECOND_ORDER_QUALITY.0..=SECOND_ORDER_QUALITY.1),
        }),
        scale: 1,
    };
    let out = apply_same_resolution(x, &spec)?;
    Ok((out, spec))
}

/// Replays a same-resolution spec (scale ignored).
pub fn apply_same_resolution(x: &Image, spec: &DegradationSpec) -> Result<Image> {
    let blurred = match &spec.blur {
        Some(k) => apply_blur(x, k)?,
        None => x.clone(),
    };
    spec.apply_noise_jpeg(blurred)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn textured(h: usize, w: usize) -> Image {
        Image::from_fn(3, h, w, |c, y, x| {
            (0.5 + 0.3 * ((x as f32 * 0.37 + c as f32).sin() * (y as f32 * 0.23).cos())).clamp(0.0, 1.0)
        })
    }

    #[test]
    fn empty_spec_is_plain_bicubic() {
        let y = textured(32, 24);
        let out = first_order_degrade(&y, &DegradationSpec::identity(2), StageOrder::BlurFirst).unwrap();
        assert_eq!(out, bicubic_resize(&y, Scale::down(2)).unwrap());
    }

    #[test]
    fn blur_first_blurs_the_hr_image() {
        let y = textured(32, 32);
        let k = BlurKernel::gaussian(7, 1.2, 1.2, 0.0).unwrap();
        let spec = DegradationSpec {
            blur: Some(k.clone()),
            ..DegradationSpec::identity(2)
        };
        let out = first_order_degrade(&y, &spec, StageOrder::BlurFirst).unwrap();
        let expected = bicubic_resize(&apply_blur(&y, &k).unwrap(), Scale::down(2)).unwrap();
        assert_eq!(out, expected);
    }

    #[test]
    fn full_spec_is_deterministic() {
        let y = textured(48, 48);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let spec = DegradationSpec {
            blur: Some(sample_gaussian_kernel(&mut rng)),
            noise: Some(sample_noise_spec(&mut rng)),
            jpeg: Some(JpegSpec { quality: 40 }),
            scale: 2,
        };
        let a = first_order_degrade(&y, &spec, StageOrder::BlurFirst).unwrap();
        let b = first_order_degrade(&y, &spec, StageOrder::BlurFirst).unwrap();
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn indivisible_hr_fails() {
        let err = first_order_degrade(&textured(33, 32), &DegradationSpec::identity(2), StageOrder::BlurFirst);
        assert!(matches!(err, Err(Error::Shape(_))));
    }

    #[test]
    fn second_order_blur_only() {
        let x = textured(30, 26);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let (out, spec) = second_order_degrade(&x, DegradationLabel::new(true, false, false), &mut rng).unwrap();
        assert!(spec.noise.is_none() && spec.jpeg.is_none());
        assert_eq!(out.dims(), x.dims());
        assert_eq!(out, apply_blur(&x, spec.blur.as_ref().unwrap()).unwrap());
    }

    #[test]
    fn second_order_noise_only_leaves_clamped_noise() {
        let x = textured(24, 24);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (out, spec) = second_order_degrade(&x, DegradationLabel::new(false, true, false), &mut rng).unwrap();
        let map = spec.noise.unwrap().realize(3, 24, 24);
        for ((o, i), n) in out.data().iter().zip(x.data()).zip(&map.data) {
            assert_eq!(o - i, (i + n).clamp(0.0, 1.0) - i);
        }
    }

    #[test]
    fn second_order_jpeg_q95_on_gray_is_near_identity() {
        let x = Image::filled(3, 24, 24, 0.5);
        let spec = DegradationSpec {
            jpeg: Some(JpegSpec { quality: 95 }),
            ..DegradationSpec::identity(1)
        };
        let out = apply_same_resolution(&x, &spec).unwrap();
        assert!(out.data().iter().all(|&v| (v - 0.5).abs() <= 1.0 / 255.0));
    }

    #[test]
    fn clean_label_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            second_order_degrade(&textured(24, 24), DegradationLabel::CLEAN, &mut rng),
            Err(Error::CleanLabel)
        ));
    }

    #[test]
    fn spec_json_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let spec = DegradationSpec {
            blur: Some(sample_gaussian_kernel(&mut rng)),
            noise: Some(sample_noise_spec(&mut rng)),
            jpeg: Some(JpegSpec { quality: 77 }),
            scale: 4,
        };
        let json = serde_json::to_string(&spec).unwrap();
        assert!(json.contains("\"weights\":[["));
        assert_eq!(serde_json::from_str::<DegradationSpec>(&json).unwrap(), spec);
    }

    #[test]
    fn label_display() {
        assert_eq!(DegradationLabel::CLEAN.to_string(), "clean");
        assert_eq!(DegradationLabel::new(true, false, true).to_string(), "blur+jpeg");
    }
}
