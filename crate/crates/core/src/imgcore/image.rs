use crate::error::{ensure, Result};

/// Planar floating-point image. Plane `c` holds `height * width` values in
/// row-major order, so sample `(c, y, x)` lives at `(c * height + y) * width + x`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageBuffer {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl ImageBuffer {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        ensure!(height >= 1 && width >= 1, "image dims must be >= 1, got {height}x{width}");
        ensure!(
            channels == 1 || channels == 3,
            "image must have 1 or 3 channels, got {channels}"
        );
        ensure!(
            data.len() == height * width * channels,
            "data length {} does not match {height}x{width}x{channels}",
            data.len()
        );
        ensure!(data.iter().all(|v| v.is_finite()), "image contains non-finite values");
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f64) -> Result<Self> {
        Self::new(height, width, channels, vec![value; height * width * channels])
    }

    /// Builds an image from `f(channel, y, x)`.
    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width * channels);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, y, x));
                }
            }
        }
        Self::new(height, width, channels, data)
    }

    /// Trusted constructor for kernels that already uphold the invariants.
    pub(crate) fn from_parts(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), height * width * channels);
        debug_assert!(data.iter().all(|v| v.is_finite()));
        Self {
            height,
            width,
            channels,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// `(height, width, channels)`
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(
            self.height,
            self.width,
            self.channels,
            self.data.iter().map(|&v| f(v)).collect(),
        )
    }

    pub fn transpose(&self) -> Self {
        let (h, w) = (self.height, self.width);
        let mut data = vec![0.0; self.data.len()];
        for c in 0..self.channels {
            let src = self.plane(c);
            let dst = &mut data[c * h * w..(c + 1) * h * w];
            for y in 0..h {
                for x in 0..w {
                    dst[x * h + y] = src[y * w + x];
                }
            }
        }
        Self::from_parts(w, h, self.channels, data)
    }

    /// Mirrors the image left to right.
    pub fn flip_horizontal(&self) -> Self {
        let w = self.width;
        let mut data = self.data.clone();
        for row in data.chunks_mut(w) {
            row.reverse();
        }
        Self::from_parts(self.height, w, self.channels, data)
    }

    /// Copies the `height x width` window whose top-left corner is `(top, left)`.
    pub fn crop(&self, top: usize, left: usize, height: usize, width: usize) -> Result<Self> {
        ensure!(height >= 1 && width >= 1, "empty crop {height}x{width}");
        ensure!(
            top + height <= self.height && left + width <= self.width,
            "crop {height}x{width} at ({top}, {left}) exceeds image {}x{}",
            self.height,
            self.width
        );
        let mut data = Vec::with_capacity(height * width * self.channels);
        for c in 0..self.channels {
            let plane = self.plane(c);
            for y in top..top + height {
                data.extend_from_slice(&plane[y * self.width + left..y * self.width + left + width]);
            }
        }
        Ok(Self::from_parts(height, width, self.channels, data))
    }

    /// Removes `border` pixels from every side.
    pub fn shave(&self, border: usize) -> Result<Self> {
        ensure!(
            2 * border < self.height && 2 * border < self.width,
            "border {border} too large for {}x{} image",
            self.height,
            self.width
        );
        self.crop(border, border, self.height - 2 * border, self.width - 2 * border)
    }

    /// Crops bottom/right so both dims are multiples of `m`.
    pub fn crop_to_multiple(&self, m: usize) -> Result<Self> {
        ensure!(m >= 1, "multiple must be >= 1");
        self.crop(0, 0, self.height - self.height % m, self.width - self.width % m)
    }

    /// Rounds every sample to the nearest 8-bit level, channel-planar order.
    pub fn to_u8(&self) -> Vec<u8> {
        self.data.iter().map(|&v| quantize(v)).collect()
    }

    pub fn from_u8(height: usize, width: usize, channels: usize, data: &[u8]) -> Result<Self> {
        Self::new(height, width, channels, data.iter().map(|&b| b as f64 / 255.0).collect())
    }

    /// Values rounded to the 8-bit grid, as stored on disk.
    pub fn quantized(&self) -> Self {
        let data = self.data.iter().map(|&v| quantize(v) as f64 / 255.0).collect();
        Self::from_parts(self.height, self.width, self.channels, data)
    }
}

#[inline]
pub fn quantize(v: f64) -> u8 {
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}
