use std::f32::consts::PI;
use std::fs;
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::imaging::{read_png, Image};
use crate::rng;

/// A named HR image.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusImage {
    pub name: String,
    pub image: Image,
}

pub const MIN_CORPUS_SIDE: usize = 96;

fn smoothstep_edge(signed_distance: f32) -> f32 {
    // Anti-aliased coverage of a half-plane: about one pixel of transition.
    1.0 / (1.0 + (-signed_distance * 2.5).exp())
}

#[derive(Clone, Copy)]
enum Shape {
    Disc { cy: f32, cx: f32, r: f32 },
    Rect { cy: f32, cx: f32, hh: f32, hw: f32, angle: f32 },
    Stripe { offset: f32, angle: f32, period: f32, duty: f32 },
}

impl Shape {
    /// Signed distance, positive inside.
    fn inside(&self, y: f32, x: f32) -> f32 {
        match *self {
            Shape::Disc { cy, cx, r } => r - ((y - cy).powi(2) + (x - cx).powi(2)).sqrt(),
            Shape::Rect { cy, cx, hh, hw, angle } => {
                let (s, c) = angle.sin_cos();
                let (dy, dx) = (y - cy, x - cx);
                let u = c * dx + s * dy;
                let v = -s * dx + c * dy;
                (hw - u.abs()).min(hh - v.abs())
            }
            Shape::Stripe {
                offset,
                angle,
                period,
                duty,
            } => {
                let (s, c) = angle.sin_cos();
                let t = (c * x + s * y + offset).rem_euclid(period);
                let on = duty * period;
                if t < on {
                    t.min(on - t)
                } else {
                    -(t - on).min(period - t)
                }
            }
        }
    }
}

/// Band-limited texture: value noise on a lattice of `cell` pixels with
/// smooth Hermite interpolation.
struct ValueNoise {
    cell: f32,
    cols: usize,
    lattice: Vec<f32>,
    amp: [f32; 3],
}

impl ValueNoise {
    fn new<R: Rng + ?Sized>(rng: &mut R, height: usize, width: usize, cell: f32, amp: f32) -> Self {
        let rows = (height as f32 / cell).ceil() as usize + 2;
        let cols = (width as f32 / cell).ceil() as usize + 2;
        let lattice = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
        let tint = [rng.random_range(0.5..1.0), rng.random_range(0.5..1.0), rng.random_range(0.5..1.0)];
        ValueNoise {
            cell,
            cols,
            lattice,
            amp: tint.map(|t: f32| t * amp),
        }
    }

    fn at(&self, y: f32, x: f32) -> f32 {
        let (gy, gx) = (y / self.cell, x / self.cell);
        let (iy, ix) = (gy.floor() as usize, gx.floor() as usize);
        let hermite = |t: f32| t * t * (3.0 - 2.0 * t);
        let (ty, tx) = (hermite(gy.fract()), hermite(gx.fract()));
        let v = |r: usize, c: usize| self.lattice[r * self.cols + c];
        let top = v(iy, ix) * (1.0 - tx) + v(iy, ix + 1) * tx;
        let bottom = v(iy + 1, ix) * (1.0 - tx) + v(iy + 1, ix + 1) * tx;
        top * (1.0 - ty) + bottom * ty
    }
}

fn random_color<R: Rng + ?Sized>(rng: &mut R) -> [f32; 3] {
    [rng.random_range(0.05..0.95), rng.random_range(0.05..0.95), rng.random_range(0.05..0.95)]
}

/// One procedural HR image: a color gradient, sinusoidal waves, anti-aliased
/// geometric shapes and multi-octave value-noise texture on top.
pub fn procedural_image<R: Rng + ?Sized>(rng: &mut R, height: usize, width: usize) -> Image {
    let (c0, c1) = (random_color(rng), random_color(rng));
    let g_angle = rng.random_range(0.0..2.0 * PI);
    let (gs, gc) = g_angle.sin_cos();
    let diag = (height.max(width)) as f32;

    let waves: Vec<(f32, f32, f32, f32, usize)> = (0..rng.random_range(3..7))
        .map(|_| {
            let f = rng.random_range(0.05..0.9);
            let a = rng.random_range(0.0..2.0 * PI);
            (f * a.cos(), f * a.sin(), rng.random_range(0.0..2.0 * PI), rng.random_range(0.01..0.06), rng.random_range(0..3))
        })
        .collect();

    let shapes: Vec<(Shape, [f32; 3], f32)> = (0..rng.random_range(3..9))
        .map(|_| {
            let shape = match rng.random_range(0..3) {
                0 => Shape::Disc {
                    cy: rng.random_range(0.0..height as f32),
                    cx: rng.random_range(0.0..width as f32),
                    r: rng.random_range(4.0..diag / 3.0),
                },
                1 => Shape::Rect {
                    cy: rng.random_range(0.0..height as f32),
                    cx: rng.random_range(0.0..width as f32),
                    hh: rng.random_range(3.0..diag / 4.0),
                    hw: rng.random_range(3.0..diag / 4.0),
                    angle: rng.random_range(0.0..PI),
                },
                _ => Shape::Stripe {
                    offset: rng.random_range(0.0..50.0),
                    angle: rng.random_range(0.0..PI),
                    period: rng.random_range(4.0..24.0),
                    duty: rng.random_range(0.3..0.7),
                },
            };
            (shape, random_color(rng), rng.random_range(0.5..1.0))
        })
        .collect();

    let mut textures = Vec::new();
    for cell in [2.0, 4.0, 8.0, 16.0] {
        if rng.random_bool(0.6) {
            let amp = rng.random_range(0.0..0.08);
            textures.push(ValueNoise::new(rng, height, width, cell, amp));
        }
    }

    let mut img = Image::zeros(3, height, width);
    for y in 0..height {
        for x in 0..width {
            let (yf, xf) = (y as f32 + 0.5, x as f32 + 0.5);
            let t = ((gc * xf + gs * yf) / diag * 0.5 + 0.5).clamp(0.0, 1.0);
            let mut px = [0f32; 3];
            for (ch, p) in px.iter_mut().enumerate() {
                *p = c0[ch] * (1.0 - t) + c1[ch] * t;
            }
            for &(fx, fy, ph, amp, ch) in &waves {
                let v = amp * (fx * xf + fy * yf + ph).sin();
                for (k, p) in px.iter_mut().enumerate() {
                    *p += if k == ch { v } else { 0.5 * v };
                }
            }
            for &(shape, color, opacity) in &shapes {
                let cover = smoothstep_edge(shape.inside(yf, xf)) * opacity;
                for (ch, p) in px.iter_mut().enumerate() {
                    *p = *p * (1.0 - cover) + color[ch] * cover;
                }
            }
            for t in &textures {
                let v = t.at(yf, xf);
                for (ch, p) in px.iter_mut().enumerate() {
                    *p += v * t.amp[ch];
                }
            }
            for (ch, p) in px.iter().enumerate() {
                img.set(ch, y, x, p.clamp(0.0, 1.0));
            }
        }
    }
    img.quantize_u8()
}

/// `count` procedural images of `side`x`side`, named `proc_0000`, ...
/// Image `i` depends only on `(seed, i)`.
pub fn procedural_corpus(count: usize, side: usize, seed: u64) -> Result<Vec<CorpusImage>> {
    if side < MIN_CORPUS_SIDE {
        return Err(Error::InvalidArgument(format!(
            "procedural corpus side must be at least {MIN_CORPUS_SIDE}, got {side}"
        )));
    }
    Ok((0..count)
        .map(|i| {
            let mut r = rng::stream(seed, &[rng::tag("corpus"), i as u64]);
            CorpusImage {
                name: format!("proc_{i:04}"),
                image: procedural_image(&mut r, side, side),
            }
        })
        .collect())
}

/// Every `.png` in `dir`, sorted by file name; grayscale is expanded to RGB.
pub fn load_png_corpus(dir: impl AsRef<Path>) -> Result<Vec<CorpusImage>> {
    let dir = dir.as_ref();
    let mut paths: Vec<_> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let img = read_png(&p)?;
            let image = if img.channels() == 1 {
                Image::from_fn(3, img.height(), img.width(), |_, y, x| img.get(0, y, x))
            } else {
                img
            };
            let name = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            Ok(CorpusImage { name, image })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn procedural_images_are_deterministic_and_varied() {
        let a = procedural_corpus(3, 96, 7).unwrap();
        let b = procedural_corpus(3, 96, 7).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0].image, a[1].image);
        for img in &a {
            assert_eq!(img.image.dims(), (3, 96, 96));
            assert!(img.image.data().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn small_side_is_rejected() {
        assert!(procedural_corpus(1, 64, 0).is_err());
    }
}
