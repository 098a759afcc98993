//! Synthetic covers for unit tests.

use rand::Rng;

use crate::codec::RasterImage;

/// Smooth gradients with mild per-sample noise, so low bit-planes look like a
/// photograph's rather than a constant image's.
pub(crate) fn natural_cover<R: Rng>(
    rng: &mut R,
    width: usize,
    height: usize,
    channels: usize,
) -> RasterImage {
    let fx: f64 = rng.gen_range(0.2..2.0);
    let fy: f64 = rng.gen_range(0.2..2.0);
    let base: f64 = rng.gen_range(40.0..200.0);
    let mut samples = Vec::with_capacity(width * height * channels);
    for y in 0..height {
        for x in 0..width {
            for c in 0..channels {
                let v = base
                    + 40.0 * ((x as f64 * fx / 10.0) + c as f64).sin()
                    + 30.0 * (y as f64 * fy / 13.0).cos()
                    + rng.gen_range(-6.0..6.0);
                samples.push(v.clamp(0.0, 255.0) as u8);
            }
        }
    }
    RasterImage::new(width, height, channels, samples).expect("consistent dimensions")
}
