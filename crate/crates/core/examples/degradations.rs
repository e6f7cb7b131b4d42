//! The degradation model: sampled anisotropic Gaussian kernels, noise, the
//! built-in JPEG codec, first-order test degradations and the random
//! second-order degradations used to build adaptation pairs.
//!
//! `cargo run --example degradations`

use srtta::benchgen::procedural_image;
use srtta::degrade::{
    first_order_degrade, jpeg_codec, sample_gaussian_kernel, sample_noise_spec, second_order_degrade,
    DegradationLabel, DegradationSpec, JpegSpec, StageOrder,
};
use srtta::imaging::psnr;
use srtta::rng;

fn main() -> srtta::Result<()> {
    let mut r = rng::stream(3, &[rng::tag("degradations")]);
    let hr = procedural_image(&mut r, 96, 96);

    let k = sample_gaussian_kernel(&mut r);
    println!(
        "kernel {}x{}: sigma ({:.2}, {:.2}), angle {:.2}, sum {:.9}",
        k.size, k.size, k.sigma1, k.sigma2, k.angle, k.sum()
    );

    for q in [30, 60, 90] {
        println!("JPEG q{q}: {:.2} dB", psnr(&jpeg_codec(&hr, q)?, &hr)?);
    }

    let spec = DegradationSpec {
        blur: Some(k),
        noise: Some(sample_noise_spec(&mut r)),
        jpeg: Some(JpegSpec { quality: 50 }),
        scale: 2,
    };
    let lr = first_order_degrade(&hr, &spec, StageOrder::BlurFirst)?;
    println!("first-order {} test image: {:?}", spec.label(), lr.dims());

    for label in [
        DegradationLabel::new(true, false, false),
        DegradationLabel::new(false, true, false),
        DegradationLabel::new(true, true, true),
    ] {
        let (x_sd, s) = second_order_degrade(&lr, label, &mut r)?;
        println!("second-order {label}: {:.2} dB from its input (spec label {})", psnr(&x_sd, &lr)?, s.label());
    }
    Ok(())
}
