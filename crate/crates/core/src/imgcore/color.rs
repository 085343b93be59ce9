//! Luminance transform used by SR evaluation (ITU-R BT.601, studio swing).

use super::ImageBuffer;
use crate::error::{ensure, Result};

const KR: f64 = 65.481;
const KG: f64 = 128.553;
const KB: f64 = 24.966;

/// `Y = (65.481 R + 128.553 G + 24.966 B + 16) / 255` for RGB in [0, 1].
pub fn rgb_to_y(img: &ImageBuffer) -> Result<ImageBuffer> {
    ensure!(img.channels() == 3, "rgb_to_y needs 3 channels, got {}", img.channels());
    let (r, g, b) = (img.plane(0), img.plane(1), img.plane(2));
    let data = r
        .iter()
        .zip(g)
        .zip(b)
        .map(|((&r, &g), &b)| (KR * r + KG * g + KB * b + 16.0) / 255.0)
        .collect();
    Ok(ImageBuffer::from_parts(img.height(), img.width(), 1, data))
}

/// Luminance of an RGB or grayscale image. Gray input is treated as R = G = B.
pub fn to_luma(img: &ImageBuffer) -> Result<ImageBuffer> {
    match img.channels() {
        3 => rgb_to_y(img),
        1 => Ok(ImageBuffer::from_parts(
            img.height(),
            img.width(),
            1,
            img.data()
                .iter()
                .map(|&v| ((KR + KG + KB) * v + 16.0) / 255.0)
                .collect(),
        )),
        c => Err(crate::Error::contract(format!("to_luma: unsupported channel count {c}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rgb(r: f64, g: f64, b: f64) -> ImageBuffer {
        ImageBuffer::new(1, 1, 3, vec![r, g, b]).unwrap()
    }

    #[test]
    fn luma_endpoints() {
        let y_black = rgb_to_y(&rgb(0.0, 0.0, 0.0)).unwrap().get(0, 0, 0);
        let y_white = rgb_to_y(&rgb(1.0, 1.0, 1.0)).unwrap().get(0, 0, 0);
        assert!((y_black - 16.0 / 255.0).abs() < 1e-12);
        assert!((y_white - 235.0 / 255.0).abs() < 1e-12);
        assert!((y_black - 0.06275).abs() < 1e-5);
        assert!((y_white - 0.92157).abs() < 1e-5);
    }

    #[test]
    fn pure_red() {
        let y = rgb_to_y(&rgb(1.0, 0.0, 0.0)).unwrap().get(0, 0, 0);
        assert!((y - 81.481 / 255.0).abs() < 1e-12);
        assert!((y - 0.31953).abs() < 1e-5);
    }

    #[test]
    fn wrong_channel_count() {
        let gray = ImageBuffer::filled(2, 2, 1, 0.5).unwrap();
        assert!(matches!(rgb_to_y(&gray), Err(crate::Error::Contract(_))));
    }

    #[test]
    fn gray_matches_equal_rgb() {
        let gray = ImageBuffer::new(1, 1, 1, vec![0.3]).unwrap();
        let a = to_luma(&gray).unwrap().get(0, 0, 0);
        let b = rgb_to_y(&rgb(0.3, 0.3, 0.3)).unwrap().get(0, 0, 0);
        assert!((a - b).abs() < 1e-15);
    }
}
