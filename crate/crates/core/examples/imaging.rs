//! Image basics: procedural content, bicubic resizing, PSNR/SSIM and PNG I/O.
//!
//! `cargo run --example imaging`

use srtta::benchgen::procedural_image;
use srtta::imaging::{bicubic_resize, psnr, read_png, ssim, write_png, Scale};
use srtta::rng;

fn main() -> srtta::Result<()> {
    let hr = procedural_image(&mut rng::stream(7, &[]), 96, 128);
    let lr = bicubic_resize(&hr, Scale::down(2))?;
    let up = bicubic_resize(&lr, Scale::up(2))?;
    println!("HR {:?} -> LR {:?} -> bicubic {:?}", hr.dims(), lr.dims(), up.dims());
    println!("bicubic x2: {:.3} dB PSNR, SSIM {:.4}", psnr(&up, &hr)?, ssim(&up, &hr)?);

    let path = std::env::temp_dir().join("srtta_example_lr.png");
    write_png(&path, &lr)?;
    let back = read_png(&path)?;
    // PNG stores 8-bit samples, so the round trip equals the quantized image.
    assert_eq!(back, lr.quantize_u8());
    println!("wrote and re-read {}", path.display());
    Ok(())
}
