//! Baseline-JPEG transform-domain round trip.
//!
//! Entropy coding is lossless, so only the color transform, the 8x8 DCT and
//! the quantization are simulated. Chroma is kept at full resolution (4:4:4).

use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::Image;

/// Annex K luminance table, natural (row-major) order.
pub const LUMA_BASE: [u16; 64] = [
    16, 11, 10, 16, 24, 40, 51, 61, //
    12, 12, 14, 19, 26, 58, 60, 55, //
    14, 13, 16, 24, 40, 57, 69, 56, //
    14, 17, 22, 29, 51, 87, 80, 62, //
    18, 22, 37, 56, 68, 109, 103, 77, //
    24, 35, 55, 64, 81, 104, 113, 92, //
    49, 64, 78, 87, 103, 121, 120, 101, //
    72, 92, 95, 98, 112, 100, 103, 99,
];

/// Annex K chrominance table, natural order.
pub const CHROMA_BASE: [u16; 64] = [
    17, 18, 24, 47, 99, 99, 99, 99, //
    18, 21, 26, 66, 99, 99, 99, 99, //
    24, 26, 56, 99, 99, 99, 99, 99, //
    47, 66, 99, 99, 99, 99, 99, 99, //
    99, 99, 99, 99, 99, 99, 99, 99, //
    99, 99, 99, 99, 99, 99, 99, 99, //
    99, 99, 99, 99, 99, 99, 99, 99, //
    99, 99, 99, 99, 99, 99, 99, 99,
];

/// Quality setting of a JPEG round trip. Chroma is always 4:4:4.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct JpegSpec {
    pub quality: u8,
}

/// libjpeg's quality curve applied to a base table.
pub fn scaled_table(base: &[u16; 64], quality: u8) -> Result<[u16; 64]> {
    if !(1..=100).contains(&quality) {
        return Err(Error::InvalidArgument(format!("JPEG quality must be in 1..=100, got {quality}")));
    }
    let q = u32::from(quality);
    let percent = if q < 50 { 5000 / q } else { 200 - 2 * q };
    let mut out = [0u16; 64];
    for (o, &b) in out.iter_mut().zip(base) {
        *o = ((u32::from(b) * percent + 50) / 100).clamp(1, 255) as u16;
    }
    Ok(out)
}

/// `basis[u][x] = c(u)/2 * cos((2x+1) u pi / 16)`; orthonormal 8-point DCT-II.
fn dct_basis() -> &'static [[f64; 8]; 8] {
    static BASIS: OnceLock<[[f64; 8]; 8]> = OnceLock::new();
    BASIS.get_or_init(|| {
        let mut b = [[0.0; 8]; 8];
        for (u, row) in b.iter_mut().enumerate() {
            let cu = if u == 0 { 0.5f64.sqrt() } else { 1.0 };
            for (x, v) in row.iter_mut().enumerate() {
                *v = 0.5 * cu * (((2 * x + 1) as f64 * u as f64 * PI) / 16.0).cos();
            }
        }
        b
    })
}

fn fdct(block: &[f64; 64]) -> [f64; 64] {
    let b = dct_basis();
    let mut tmp = [0.0; 64];
    for y in 0..8 {
        for u in 0..8 {
            tmp[y * 8 + u] = (0..8).map(|x| b[u][x] * block[y * 8 + x]).sum();
        }
    }
    let mut out = [0.0; 64];
    for v in 0..8 {
        for u in 0..8 {
            out[v * 8 + u] = (0..8).map(|y| b[v][y] * tmp[y * 8 + u]).sum();
        }
    }
    out
}

fn idct(coef: &[f64; 64]) -> [f64; 64] {
    let b = dct_basis();
    let mut tmp = [0.0; 64];
    for v in 0..8 {
        for x in 0..8 {
            tmp[v * 8 + x] = (0..8).map(|u| b[u][x] * coef[v * 8 + u]).sum();
        }
    }
    let mut out = [0.0; 64];
    for y in 0..8 {
        for x in 0..8 {
            out[y * 8 + x] = (0..8).map(|v| b[v][y] * tmp[v * 8 + x]).sum();
        }
    }
    out
}

/// Quantizes and dequantizes one level-shifted plane in place. The plane's
/// dimensions must be multiples of 8.
fn quantize_plane(plane: &mut [f64], h: usize, w: usize, table: &[u16; 64]) {
    let mut block = [0.0; 64];
    for by in (0..h).step_by(8) {
        for bx in (0..w).step_by(8) {
            for y in 0..8 {
                block[y * 8..y * 8 + 8].copy_from_slice(&plane[(by + y) * w + bx..][..8]);
            }
            let mut coef = fdct(&block);
            for (c, &q) in coef.iter_mut().zip(table) {
                let q = f64::from(q);
                *c = (*c / q).round() * q;
            }
            let rec = idct(&coef);
            for y in 0..8 {
                plane[(by + y) * w + bx..][..8].copy_from_slice(&rec[y * 8..y * 8 + 8]);
            }
        }
    }
}

/// Compress-decompress round trip at quality `quality`.
///
/// Input is first quantized to 8-bit levels; the decoded result is rounded
/// back to 8-bit levels and clamped. Partial edge blocks are filled by edge
/// replication and cropped afterwards.
pub fn jpeg_codec(img: &Image, quality: u8) -> Result<Image> {
    let luma_q = scaled_table(&LUMA_BASE, quality)?;
    let chroma_q = scaled_table(&CHROMA_BASE, quality)?;
    let (c, h, w) = img.dims();
    let (ph, pw) = (h.div_ceil(8) * 8, w.div_ceil(8) * 8);
    let level = |ch: usize, y: usize, x: usize| -> f64 {
        (f64::from(img.get(ch, y.min(h - 1), x.min(w - 1))) * 255.0).round().clamp(0.0, 255.0)
    };

    let mut planes: Vec<Vec<f64>> = vec![vec![0.0; ph * pw]; c];
    for y in 0..ph {
        for x in 0..pw {
            let i = y * pw + x;
            if c == 1 {
                planes[0][i] = level(0, y, x) - 128.0;
            } else {
                let (r, g, b) = (level(0, y, x), level(1, y, x), level(2, y, x));
                planes[0][i] = 0.299 * r + 0.587 * g + 0.114 * b - 128.0;
                planes[1][i] = -0.168_735_892 * r - 0.331_264_108 * g + 0.5 * b;
                planes[2][i] = 0.5 * r - 0.418_687_589 * g - 0.081_312_411 * b;
            }
        }
    }
    for (k, plane) in planes.iter_mut().enumerate() {
        quantize_plane(plane, ph, pw, if k == 0 { &luma_q } else { &chroma_q });
    }

    let to_unit = |v: f64| (v.round().clamp(0.0, 255.0) / 255.0) as f32;
    let mut out = Image::zeros(c, h, w);
    for y in 0..h {
        for x in 0..w {
            let i = y * pw + x;
            let yy = planes[0][i] + 128.0;
            if c == 1 {
                out.set(0, y, x, to_unit(yy));
            } else {
                let (cb, cr) = (planes[1][i], planes[2][i]);
                out.set(0, y, x, to_unit(yy + 1.402 * cr));
                out.set(1, y, x, to_unit(yy - 0.344_136_286 * cb - 0.714_136_286 * cr));
                out.set(2, y, x, to_unit(yy + 1.772 * cb));
            }
        }
    }
    Ok(out)
}
