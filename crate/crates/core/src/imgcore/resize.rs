//! Bicubic resampling following the MATLAB `imresize` convention: Keys cubic
//! with a = -0.5, kernel widened by `1/scale` when antialiasing a downscale,
//! per-output weights normalized to one, clamped (edge-replicated) taps.

use std::fmt;

use super::ImageBuffer;
use crate::error::{ensure, Result};

/// Positive rational resampling factor `num / den`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ScaleFactor {
    num: u32,
    den: u32,
}

impl ScaleFactor {
    pub fn new(num: u32, den: u32) -> Result<Self> {
        ensure!(num > 0 && den > 0, "scale must be positive, got {num}/{den}");
        Ok(Self { num, den })
    }

    pub fn up(factor: u32) -> Result<Self> {
        Self::new(factor, 1)
    }

    pub fn down(factor: u32) -> Result<Self> {
        Self::new(1, factor)
    }

    pub fn value(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// `floor(len * num / den)` in exact integer arithmetic.
    pub fn apply(self, len: usize) -> usize {
        (len as u64 * self.num as u64 / self.den as u64) as usize
    }
}

impl fmt::Display for ScaleFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResampleSpec {
    pub scale: ScaleFactor,
    pub antialias: bool,
}

impl ResampleSpec {
    pub fn new(scale: ScaleFactor, antialias: bool) -> Self {
        Self { scale, antialias }
    }
}

/// Keys cubic convolution kernel, a = -0.5.
#[inline]
pub fn cubic(x: f64) -> f64 {
    let a = x.abs();
    let a2 = a * a;
    let a3 = a2 * a;
    if a <= 1.0 {
        1.5 * a3 - 2.5 * a2 + 1.0
    } else if a <= 2.0 {
        -0.5 * a3 + 2.5 * a2 - 4.0 * a + 2.0
    } else {
        0.0
    }
}

/// Input taps contributing to one output sample.
#[derive(Clone, Debug)]
struct Taps {
    index: Vec<usize>,
    weight: Vec<f64>,
}

fn contributions(in_len: usize, out_len: usize, scale: f64, antialias: bool) -> Vec<Taps> {
    let widen = antialias && scale < 1.0;
    let kernel_width = if widen { 4.0 / scale } else { 4.0 };
    let taps = kernel_width.ceil() as i64 + 2;
    let kernel = |x: f64| if widen { scale * cubic(scale * x) } else { cubic(x) };

    (0..out_len)
        .map(|o| {
            // 1-based coordinates, as in MATLAB.
            let u = (o + 1) as f64 / scale + 0.5 * (1.0 - 1.0 / scale);
            let left = (u - kernel_width / 2.0).floor() as i64;
            let mut index = Vec::with_capacity(taps as usize);
            let mut weight = Vec::with_capacity(taps as usize);
            for j in left..left + taps {
                let w = kernel(u - j as f64);
                if w != 0.0 {
                    index.push((j - 1).clamp(0, in_len as i64 - 1) as usize);
                    weight.push(w);
                }
            }
            let total: f64 = weight.iter().sum();
            weight.iter_mut().for_each(|w| *w /= total);
            Taps { index, weight }
        })
        .collect()
}

/// Resamples each channel separably: along rows first, then along columns.
/// Output values are clamped to [0, 1].
pub fn bicubic_resize(img: &ImageBuffer, spec: &ResampleSpec) -> Result<ImageBuffer> {
    let (h, w, c) = img.dims();
    let (oh, ow) = (spec.scale.apply(h), spec.scale.apply(w));
    ensure!(
        oh >= 1 && ow >= 1,
        "resizing {h}x{w} by {} yields an empty image",
        spec.scale
    );
    let s = spec.scale.value();
    let col_taps = contributions(w, ow, s, spec.antialias);
    let row_taps = contributions(h, oh, s, spec.antialias);

    let mut out = Vec::with_capacity(oh * ow * c);
    let mut horiz = vec![0.0; h * ow];
    for ch in 0..c {
        let plane = img.plane(ch);
        for y in 0..h {
            let src = &plane[y * w..(y + 1) * w];
            let dst = &mut horiz[y * ow..(y + 1) * ow];
            for (d, t) in dst.iter_mut().zip(&col_taps) {
                *d = t.index.iter().zip(&t.weight).map(|(&i, &wt)| wt * src[i]).sum();
            }
        }
        let mut row = vec![0.0; ow];
        for t in &row_taps {
            row.iter_mut().for_each(|v| *v = 0.0);
            for (&i, &wt) in t.index.iter().zip(&t.weight) {
                let src = &horiz[i * ow..(i + 1) * ow];
                for (v, &s) in row.iter_mut().zip(src) {
                    *v += wt * s;
                }
            }
            out.extend(row.iter().map(|v| v.clamp(0.0, 1.0)));
        }
    }
    Ok(ImageBuffer::from_parts(oh, ow, c, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_shape() {
        assert_eq!(cubic(0.0), 1.0);
        assert_eq!(cubic(1.0), 0.0);
        assert_eq!(cubic(2.0), 0.0);
        assert_eq!(cubic(2.5), 0.0);
        assert!((cubic(0.5) - 0.5625).abs() < 1e-15);
        assert!((cubic(1.5) + 0.0625).abs() < 1e-15);
    }

    #[test]
    fn rational_dims() {
        let third = ScaleFactor::down(3).unwrap();
        assert_eq!(third.apply(480), 160);
        assert_eq!(third.apply(100), 33);
        assert_eq!(ScaleFactor::up(4).unwrap().apply(25), 100);
        assert!(ScaleFactor::new(0, 1).is_err());
        assert!(ScaleFactor::new(1, 0).is_err());
    }

    #[test]
    fn identity_scale() {
        let img = ImageBuffer::from_fn(7, 5, 3, |c, y, x| ((c + 2 * y + 3 * x) % 11) as f64 / 10.0).unwrap();
        let spec = ResampleSpec::new(ScaleFactor::new(1, 1).unwrap(), true);
        let out = bicubic_resize(&img, &spec).unwrap();
        assert_eq!(out.dims(), img.dims());
        for (a, b) in out.data().iter().zip(img.data()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn constant_preserved() {
        let img = ImageBuffer::filled(12, 12, 1, 0.7).unwrap();
        for scale in [
            ScaleFactor::down(4),
            ScaleFactor::down(3),
            ScaleFactor::down(2),
            ScaleFactor::up(2),
            ScaleFactor::up(3),
            ScaleFactor::up(4),
        ] {
            let scale = scale.unwrap();
            for aa in [false, true] {
                let out = bicubic_resize(&img, &ResampleSpec::new(scale, aa)).unwrap();
                assert!(out.data().iter().all(|v| (v - 0.7).abs() < 1e-6));
            }
        }
    }

    #[test]
    fn antialias_taps_are_wider() {
        let plain = contributions(16, 8, 0.5, false);
        let wide = contributions(16, 8, 0.5, true);
        assert!(wide[4].weight.len() > plain[4].weight.len());
        for t in plain.iter().chain(&wide) {
            assert!((t.weight.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
