use super::conv::{replicate_pad, FeatureMap};
use super::ImageBuffer;
use crate::error::{ensure, Result};

/// Mean Sobel gradient magnitude `sqrt(gx^2 + gy^2)` of a single-channel
/// image, with edge-replicated borders.
///
/// The 3x3 kernels are evaluated as weighted differences of opposite taps,
/// so flat regions give exactly zero.
pub fn sobel_magnitude(img: &ImageBuffer) -> Result<f64> {
    ensure!(
        img.channels() == 1,
        "sobel_magnitude needs a single channel, got {}",
        img.channels()
    );
    let (h, w) = (img.height(), img.width());
    let padded = replicate_pad(&FeatureMap::from(img), 1, 1);
    let pw = w + 2;
    let p = &padded.data;
    let mut total = 0.0;
    for y in 0..h {
        let (up, mid, down) = (&p[y * pw..], &p[(y + 1) * pw..], &p[(y + 2) * pw..]);
        for x in 0..w {
            let gx = (up[x + 2] - up[x]) + 2.0 * (mid[x + 2] - mid[x]) + (down[x + 2] - down[x]);
            let gy = (down[x] - up[x]) + 2.0 * (down[x + 1] - up[x + 1]) + (down[x + 2] - up[x + 2]);
            total += gx.hypot(gy);
        }
    }
    Ok(total / (h * w) as f64)
}
