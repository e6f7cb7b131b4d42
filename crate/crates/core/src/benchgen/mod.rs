//! Corrupted benchmark construction: eight single-degradation domains and
//! four mixed ones, built deterministically from an HR corpus.

mod corpus;
mod corrupt;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::degrade::DegradationLabel;
use crate::error::{Error, Result};
use crate::imaging::{bicubic_resize, read_png, write_png, Image, Scale};
use crate::fsutil::write_atomic;
use crate::rng;

pub use corpus::{load_png_corpus, procedural_corpus, procedural_image, CorpusImage, MIN_CORPUS_SIDE};
pub use corrupt::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainId {
    GaussianBlur,
    DefocusBlur,
    GlassBlur,
    GaussianNoise,
    PoissonNoise,
    ImpulseNoise,
    SpeckleNoise,
    Jpeg,
    BlurNoise,
    BlurJpeg,
    NoiseJpeg,
    BlurNoiseJpeg,
    /// Bicubic downsampling only; not part of the benchmark lists.
    Clean,
}

impl DomainId {
    pub const SINGLE: [DomainId; 8] = [
        DomainId::GaussianBlur,
        DomainId::DefocusBlur,
        DomainId::GlassBlur,
        DomainId::GaussianNoise,
        DomainId::PoissonNoise,
        DomainId::ImpulseNoise,
        DomainId::SpeckleNoise,
        DomainId::Jpeg,
    ];
    pub const MIXED: [DomainId; 4] = [
        DomainId::BlurNoise,
        DomainId::BlurJpeg,
        DomainId::NoiseJpeg,
        DomainId::BlurNoiseJpeg,
    ];

    pub fn benchmark() -> impl Iterator<Item = DomainId> {
        Self::SINGLE.into_iter().chain(Self::MIXED)
    }

    pub fn name(self) -> &'static str {
        match self {
            DomainId::GaussianBlur => "gaussian_blur",
            DomainId::DefocusBlur => "defocus_blur",
            DomainId::GlassBlur => "glass_blur",
            DomainId::GaussianNoise => "gaussian_noise",
            DomainId::PoissonNoise => "poisson_noise",
            DomainId::ImpulseNoise => "impulse_noise",
            DomainId::SpeckleNoise => "speckle_noise",
            DomainId::Jpeg => "jpeg",
            DomainId::BlurNoise => "blur_noise",
            DomainId::BlurJpeg => "blur_jpeg",
            DomainId::NoiseJpeg => "noise_jpeg",
            DomainId::BlurNoiseJpeg => "blur_noise_jpeg",
            DomainId::Clean => "clean",
        }
    }

    pub fn is_mixed(self) -> bool {
        Self::MIXED.contains(&self)
    }

    /// The coarse degradation types this domain carries.
    pub fn label(self) -> DegradationLabel {
        use DomainId::*;
        match self {
            GaussianBlur | DefocusBlur | GlassBlur => DegradationLabel::new(true, false, false),
            GaussianNoise | PoissonNoise | ImpulseNoise | SpeckleNoise => DegradationLabel::new(false, true, false),
            Jpeg => DegradationLabel::new(false, false, true),
            BlurNoise => DegradationLabel::new(true, true, false),
            BlurJpeg => DegradationLabel::new(true, false, true),
            NoiseJpeg => DegradationLabel::new(false, true, true),
            BlurNoiseJpeg => DegradationLabel::new(true, true, true),
            Clean => DegradationLabel::CLEAN,
        }
    }
}

impl fmt::Display for DomainId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DomainId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::benchmark()
            .chain([DomainId::Clean])
            .find(|d| d.name() == s)
            .ok_or_else(|| Error::UnknownDomain(s.to_string()))
    }
}

/// Applies one single-degradation domain's recipe to `source` at its own
/// resolution. Blur domains expect an HR source, the others an LR source.
pub fn corrupt<R: Rng + ?Sized>(source: &Image, domain: DomainId, rng: &mut R) -> Result<(Image, Corruption)> {
    let c = match domain {
        DomainId::GaussianBlur => Corruption::sample_gaussian_blur(rng),
        DomainId::DefocusBlur => Corruption::sample_defocus_blur(rng),
        DomainId::GlassBlur => Corruption::sample_glass_blur(rng),
        DomainId::GaussianNoise => Corruption::sample_gaussian_noise(rng),
        DomainId::PoissonNoise => Corruption::sample_poisson_noise(rng),
        DomainId::ImpulseNoise => Corruption::sample_impulse_noise(rng),
        DomainId::SpeckleNoise => Corruption::sample_speckle_noise(rng),
        DomainId::Jpeg => Corruption::sample_jpeg(rng),
        other => {
            return Err(Error::InvalidArgument(format!(
                "`{other}` is not a single-degradation domain; use degrade_hr"
            )))
        }
    };
    Ok((c.apply(source)?, c))
}

/// Realized degradation of one HR image: `hr_stages`, bicubic downsampling
/// by `scale`, then `lr_stages`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub domain: DomainId,
    pub scale: usize,
    /// Human-readable stage sequence, e.g. `["blur", "downsample", "noise", "jpeg"]`.
    pub order: Vec<String>,
    pub hr_stages: Vec<Corruption>,
    pub lr_stages: Vec<Corruption>,
}

fn stage_name(c: &Corruption) -> &'static str {
    if c.is_blur() {
        "blur"
    } else if c.is_noise() {
        "noise"
    } else {
        "jpeg"
    }
}

impl DomainSpec {
    pub fn sample<R: Rng + ?Sized>(domain: DomainId, scale: usize, rng: &mut R) -> Self {
        use DomainId::*;
        let mut hr = Vec::new();
        let mut lr = Vec::new();
        match domain {
            GaussianBlur => hr.push(Corruption::sample_gaussian_blur(rng)),
            DefocusBlur => hr.push(Corruption::sample_defocus_blur(rng)),
            GlassBlur => hr.push(Corruption::sample_glass_blur(rng)),
            GaussianNoise => lr.push(Corruption::sample_gaussian_noise(rng)),
            PoissonNoise => lr.push(Corruption::sample_poisson_noise(rng)),
            ImpulseNoise => lr.push(Corruption::sample_impulse_noise(rng)),
            SpeckleNoise => lr.push(Corruption::sample_speckle_noise(rng)),
            Jpeg => lr.push(Corruption::sample_jpeg(rng)),
            BlurNoise | BlurJpeg | NoiseJpeg | BlurNoiseJpeg => {
                let label = domain.label();
                if label.blur {
                    hr.push(Corruption::sample_gaussian_blur(rng));
                }
                if label.noise {
                    lr.push(Corruption::sample_gaussian_noise(rng));
                }
                if label.jpeg {
                    lr.push(Corruption::sample_jpeg(rng));
                }
            }
            Clean => {}
        }
        let order = hr
            .iter()
            .map(stage_name)
            .chain(["downsample"])
            .chain(lr.iter().map(stage_name))
            .map(String::from)
            .collect();
        DomainSpec {
            domain,
            scale,
            order,
            hr_stages: hr,
            lr_stages: lr,
        }
    }

    /// Recomputes the LR image from `hr`; bit-exact with the original build.
    pub fn replay(&self, hr: &Image) -> Result<Image> {
        if hr.height() % self.scale != 0 || hr.width() % self.scale != 0 {
            return Err(Error::Shape(format!(
                "{}x{} HR image is not divisible by scale {}",
                hr.height(),
                hr.width(),
                self.scale
            )));
        }
        let mut img = hr.clone();
        for c in &self.hr_stages {
            img = c.apply(&img)?;
        }
        img = bicubic_resize(&img, Scale::down(self.scale as u32))?;
        for c in &self.lr_stages {
            img = c.apply(&img)?;
        }
        Ok(img.quantize_u8())
    }
}

/// Degrades `hr` into an 8-bit-quantized LR image following `domain`'s recipe.
pub fn degrade_hr<R: Rng + ?Sized>(hr: &Image, domain: DomainId, scale: usize, rng: &mut R) -> Result<(Image, DomainSpec)> {
    let spec = DomainSpec::sample(domain, scale, rng);
    let lr = spec.replay(hr)?;
    Ok((lr, spec))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainEntry {
    pub name: String,
    pub hr: Image,
    pub lr: Image,
    pub spec: DomainSpec,
    /// Original HR dimensions when the image had to be center-cropped.
    pub cropped_from: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainDataset {
    pub domain: DomainId,
    pub scale: usize,
    pub seed: u64,
    pub entries: Vec<DomainEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestEntry {
    name: String,
    lr_path: String,
    hr_path: String,
    cropped_from: Option<(usize, usize)>,
    spec: DomainSpec,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    domain: DomainId,
    scale: usize,
    seed: u64,
    entries: Vec<ManifestEntry>,
}

fn center_crop_to_multiple(img: &Image, s: usize) -> (Image, Option<(usize, usize)>) {
    let (h, w) = (img.height(), img.width());
    let (nh, nw) = (h / s * s, w / s * s);
    if (nh, nw) == (h, w) {
        (img.clone(), None)
    } else {
        let crop = img.crop((h - nh) / 2, (w - nw) / 2, nh, nw).expect("crop lies inside the image");
        (crop, Some((h, w)))
    }
}

/// Builds one domain. Image `i` uses its own generator stream derived from
/// `(seed, domain, i)`, so results do not depend on corpus order elsewhere.
pub fn build_domain(corpus: &[CorpusImage], domain: DomainId, scale: usize, seed: u64) -> Result<DomainDataset> {
    if !matches!(scale, 2 | 4) {
        return Err(Error::InvalidArgument(format!("scale must be 2 or 4, got {scale}")));
    }
    let entries = corpus
        .iter()
        .enumerate()
        .map(|(i, item)| {
            let (hr, cropped_from) = center_crop_to_multiple(&item.image, scale);
            let mut r = rng::stream(seed, &[rng::tag(domain.name()), i as u64]);
            let (lr, spec) = degrade_hr(&hr, domain, scale, &mut r)?;
            Ok(DomainEntry {
                name: item.name.clone(),
                hr,
                lr,
                spec,
                cropped_from,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DomainDataset {
        domain,
        scale,
        seed,
        entries,
    })
}

impl DomainDataset {
    pub fn manifest_path(root: &Path, domain: DomainId) -> PathBuf {
        root.join(domain.name()).join("manifest.json")
    }

    /// Writes `<root>/HR/<name>.png`, `<root>/<domain>/LR/<name>.png` and
    /// `<root>/<domain>/manifest.json`.
    pub fn write(&self, root: impl AsRef<Path>) -> Result<()> {
        let root = root.as_ref();
        let mut entries = Vec::with_capacity(self.entries.len());
        for e in &self.entries {
            let hr_rel = format!("HR/{}.png", e.name);
            let lr_rel = format!("{}/LR/{}.png", self.domain.name(), e.name);
            write_png(root.join(&hr_rel), &e.hr)?;
            write_png(root.join(&lr_rel), &e.lr)?;
            entries.push(ManifestEntry {
                name: e.name.clone(),
                lr_path: lr_rel,
                hr_path: hr_rel,
                cropped_from: e.cropped_from,
                spec: e.spec.clone(),
            });
        }
        let manifest = Manifest {
            domain: self.domain,
            scale: self.scale,
            seed: self.seed,
            entries,
        };
        let json = serde_json::to_vec_pretty(&manifest)?;
        write_atomic(&Self::manifest_path(root, self.domain), &json)
    }

    /// Reads a dataset previously written with [`DomainDataset::write`].
    pub fn load(root: impl AsRef<Path>, domain: DomainId) -> Result<Self> {
        let root = root.as_ref();
        let path = Self::manifest_path(root, domain);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let m: Manifest = serde_json::from_slice(&bytes)?;
        if m.domain != domain {
            return Err(Error::Config(format!(
                "{} describes domain `{}`, expected `{domain}`",
                path.display(),
                m.domain
            )));
        }
        let entries = m
            .entries
            .into_iter()
            .map(|e| {
                Ok(DomainEntry {
                    hr: read_png(root.join(&e.hr_path))?,
                    lr: read_png(root.join(&e.lr_path))?,
                    name: e.name,
                    spec: e.spec,
                    cropped_from: e.cropped_from,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DomainDataset {
            domain,
            scale: m.scale,
            seed: m.seed,
            entries,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn corpus() -> Vec<CorpusImage> {
        procedural_corpus(2, 96, 3).unwrap()
    }

    #[test]
    fn names_round_trip() {
        for d in DomainId::benchmark().chain([DomainId::Clean]) {
            assert_eq!(d.name().parse::<DomainId>().unwrap(), d);
            assert_eq!(serde_json::to_string(&d).unwrap(), format!("\"{}\"", d.name()));
        }
        assert!(matches!("fog".parse::<DomainId>(), Err(Error::UnknownDomain(_))));
        assert_eq!(DomainId::benchmark().count(), 12);
    }

    #[test]
    fn gaussian_noise_deviation_at_lowest_level() {
        let img = Image::filled(3, 64, 64, 0.5);
        let out = Corruption::GaussianNoise { level: 2, seed: 4 }.apply(&img).unwrap();
        let n = out.data().len() as f64;
        let mean = out.mean();
        let sd = (out.data().iter().map(|&v| (f64::from(v) - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!((sd * 255.0 / 2.0 - 1.0).abs() < 0.1, "{}", sd * 255.0);
    }

    #[test]
    fn impulse_noise_only_saturates() {
        let img = procedural_image(&mut ChaCha8Rng::seed_from_u64(1), 48, 48);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (out, _) = corrupt(&img, DomainId::ImpulseNoise, &mut rng).unwrap();
        let mut altered = 0;
        for (a, b) in img.data().iter().zip(out.data()) {
            if a.to_bits() != b.to_bits() {
                assert!(*b == 0.0 || *b == 1.0);
                altered += 1;
            }
        }
        assert!(altered > 0);
    }

    #[test]
    fn jpeg_domain_starts_from_bicubic_lr() {
        let c = corpus();
        let ds = build_domain(&c, DomainId::Jpeg, 2, 9).unwrap();
        for (e, item) in ds.entries.iter().zip(&c) {
            let clean = bicubic_resize(&item.image, Scale::down(2)).unwrap();
            let Corruption::Jpeg { quality } = e.spec.lr_stages[0] else {
                panic!("expected a jpeg stage")
            };
            assert_eq!(e.lr, crate::degrade::jpeg_codec(&clean, quality).unwrap().quantize_u8());
            assert!(e.spec.hr_stages.is_empty());
        }
    }

    #[test]
    fn mixed_domain_records_stage_order() {
        let ds = build_domain(&corpus(), DomainId::BlurNoiseJpeg, 2, 1).unwrap();
        for e in &ds.entries {
            assert_eq!(e.spec.order, ["blur", "downsample", "noise", "jpeg"]);
            assert_eq!(e.lr.height() * 2, e.hr.height());
        }
    }

    #[test]
    fn odd_sizes_are_center_cropped() {
        let mut c = corpus();
        c[0].image = c[0].image.crop(0, 0, 95, 93).unwrap();
        let ds = build_domain(&c, DomainId::GaussianNoise, 2, 1).unwrap();
        assert_eq!(ds.entries[0].cropped_from, Some((95, 93)));
        assert_eq!(ds.entries[0].hr.dims(), (3, 94, 92));
    }

    #[test]
    fn write_load_and_replay() {
        let dir = tempfile::tempdir().unwrap();
        let ds = build_domain(&corpus(), DomainId::GlassBlur, 2, 5).unwrap();
        ds.write(dir.path()).unwrap();
        let back = DomainDataset::load(dir.path(), DomainId::GlassBlur).unwrap();
        assert_eq!(back, ds);
        for e in &back.entries {
            assert_eq!(e.spec.replay(&e.hr).unwrap(), e.lr);
        }
    }
}
