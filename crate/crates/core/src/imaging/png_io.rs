use std::fs;
use std::io::{BufReader, Cursor};
use std::path::Path;

use super::Image;
use crate::error::{Error, Result};

fn png_err(path: &Path, message: impl ToString) -> Error {
    Error::Png {
        path: path.to_path_buf(),
        message: message.to_string(),
    }
}

/// Reads an 8-bit grayscale or RGB PNG, mapping byte `v` to `v / 255`.
pub fn read_png(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let decoder = png::Decoder::new(BufReader::new(file));
    let mut reader = decoder.read_info().map_err(|e| png_err(path, e))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| png_err(path, "image too large"))?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf).map_err(|e| png_err(path, e))?;
    if info.bit_depth != png::BitDepth::Eight {
        return Err(png_err(
            path,
            format!("unsupported bit depth {:?}, expected 8", info.bit_depth),
        ));
    }
    let channels = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::Rgb => 3,
        other => {
            return Err(png_err(
                path,
                format!("unsupported color type {other:?}, expected grayscale or RGB"),
            ))
        }
    };
    let (w, h) = (info.width as usize, info.height as usize);
    let mut packed = Vec::with_capacity(w * h * channels);
    for row in buf.chunks(info.line_size).take(h) {
        packed.extend_from_slice(&row[..w * channels]);
    }
    Image::from_interleaved_u8(channels, h, w, &packed)
}

/// Writes `round(v * 255)` per sample. The file is encoded in memory and
/// moved into place, so a failed encode never leaves a partial file behind.
pub fn write_png(path: impl AsRef<Path>, image: &Image) -> Result<()> {
    let path = path.as_ref();
    let mut encoded = Vec::new();
    {
        let mut encoder = png::Encoder::new(
            Cursor::new(&mut encoded),
            image.width() as u32,
            image.height() as u32,
        );
        encoder.set_color(if image.channels() == 1 {
            png::ColorType::Grayscale
        } else {
            png::ColorType::Rgb
        });
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder.write_header().map_err(|e| png_err(path, e))?;
        writer
            .write_image_data(&image.to_interleaved_u8())
            .map_err(|e| png_err(path, e))?;
        writer.finish().map_err(|e| png_err(path, e))?;
    }
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let tmp = path.with_extension("png.partial");
    fs::write(&tmp, &encoded).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))?;
    Ok(())
}
