//! Multi-channel 2-D cross-correlation.

use super::ImageBuffer;
use crate::error::{ensure, Result};

/// Channel-planar stack of feature planes with any number of channels.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl FeatureMap {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn plane_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.height * self.width;
        &mut self.data[c * n..(c + 1) * n]
    }
}

impl From<&ImageBuffer> for FeatureMap {
    fn from(img: &ImageBuffer) -> Self {
        Self {
            channels: img.channels(),
            height: img.height(),
            width: img.width(),
            data: img.data().to_vec(),
        }
    }
}

/// Kernel weights laid out as `(out_ch, in_ch, kh, kw)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvKernel {
    pub out_ch: usize,
    pub in_ch: usize,
    pub kh: usize,
    pub kw: usize,
    pub data: Vec<f64>,
}

impl ConvKernel {
    pub fn new(out_ch: usize, in_ch: usize, kh: usize, kw: usize, data: Vec<f64>) -> Result<Self> {
        ensure!(out_ch >= 1 && in_ch >= 1, "kernel needs at least one input and output channel");
        ensure!(
            kh % 2 == 1 && kw % 2 == 1,
            "kernel dims must be odd, got {kh}x{kw}"
        );
        ensure!(
            data.len() == out_ch * in_ch * kh * kw,
            "kernel data length {} does not match {out_ch}x{in_ch}x{kh}x{kw}",
            data.len()
        );
        Ok(Self {
            out_ch,
            in_ch,
            kh,
            kw,
            data,
        })
    }

    pub fn zeros(out_ch: usize, in_ch: usize, kh: usize, kw: usize) -> Result<Self> {
        Self::new(out_ch, in_ch, kh, kw, vec![0.0; out_ch * in_ch * kh * kw])
    }

    /// The `kh * kw` taps connecting input channel `i` to output channel `o`.
    pub fn taps(&self, o: usize, i: usize) -> &[f64] {
        let n = self.kh * self.kw;
        let start = (o * self.in_ch + i) * n;
        &self.data[start..start + n]
    }

    pub fn taps_mut(&mut self, o: usize, i: usize) -> &mut [f64] {
        let n = self.kh * self.kw;
        let start = (o * self.in_ch + i) * n;
        &mut self.data[start..start + n]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Padding {
    /// Output keeps the input size; out-of-range taps read the nearest edge pixel.
    SameReplicate,
    /// No padding; output shrinks by `kernel - 1` along each axis.
    Valid,
}

/// Edge-replicates `ry` rows and `rx` columns on each side.
pub fn replicate_pad(fm: &FeatureMap, ry: usize, rx: usize) -> FeatureMap {
    let (h, w) = (fm.height, fm.width);
    let (ph, pw) = (h + 2 * ry, w + 2 * rx);
    let mut out = FeatureMap::zeros(fm.channels, ph, pw);
    for c in 0..fm.channels {
        let src = fm.plane(c);
        let dst = out.plane_mut(c);
        for py in 0..ph {
            let sy = py.saturating_sub(ry).min(h - 1);
            let srow = &src[sy * w..(sy + 1) * w];
            let drow = &mut dst[py * pw..(py + 1) * pw];
            drow[..rx].fill(srow[0]);
            drow[rx..rx + w].copy_from_slice(srow);
            drow[rx + w..].fill(srow[w - 1]);
        }
    }
    out
}

/// Adjoint of [`replicate_pad`]: sums gradients of padded pixels back onto
/// the edge pixels they were copied from.
pub(crate) fn fold_padding(padded: &FeatureMap, ry: usize, rx: usize) -> FeatureMap {
    let (ph, pw) = (padded.height, padded.width);
    let (h, w) = (ph - 2 * ry, pw - 2 * rx);
    let mut out = FeatureMap::zeros(padded.channels, h, w);
    for c in 0..padded.channels {
        let src = padded.plane(c);
        let dst = out.plane_mut(c);
        for py in 0..ph {
            let sy = py.saturating_sub(ry).min(h - 1);
            let srow = &src[py * pw..(py + 1) * pw];
            let drow = &mut dst[sy * w..(sy + 1) * w];
            for (d, s) in drow.iter_mut().zip(&srow[rx..rx + w]) {
                *d += s;
            }
            drow[0] += srow[..rx].iter().sum::<f64>();
            drow[w - 1] += srow[rx + w..].iter().sum::<f64>();
        }
    }
    out
}

/// Valid cross-correlation of an already padded map.
pub(crate) fn correlate_valid(input: &FeatureMap, kernel: &ConvKernel, bias: &[f64]) -> FeatureMap {
    let (kh, kw) = (kernel.kh, kernel.kw);
    let (oh, ow) = (input.height + 1 - kh, input.width + 1 - kw);
    let pw = input.width;
    let mut out = FeatureMap::zeros(kernel.out_ch, oh, ow);
    for o in 0..kernel.out_ch {
        let dst = out.plane_mut(o);
        dst.fill(bias[o]);
        for i in 0..kernel.in_ch {
            let src = input.plane(i);
            let taps = kernel.taps(o, i);
            for y in 0..oh {
                let orow = &mut dst[y * ow..(y + 1) * ow];
                for ky in 0..kh {
                    let prow = &src[(y + ky) * pw..(y + ky + 1) * pw];
                    for kx in 0..kw {
                        let wt = taps[ky * kw + kx];
                        for (d, &s) in orow.iter_mut().zip(&prow[kx..kx + ow]) {
                            *d += wt * s;
                        }
                    }
                }
            }
        }
    }
    out
}

/// Gradients of [`correlate_valid`] given the upstream gradient `grad_out`.
/// Returns `(d_kernel, d_bias, d_input)`; `d_input` only when requested.
pub(crate) fn correlate_valid_backward(
    input: &FeatureMap,
    kernel: &ConvKernel,
    grad_out: &FeatureMap,
    want_input_grad: bool,
) -> (ConvKernel, Vec<f64>, Option<FeatureMap>) {
    let (kh, kw) = (kernel.kh, kernel.kw);
    let (oh, ow) = (grad_out.height, grad_out.width);
    let pw = input.width;
    let mut d_kernel = ConvKernel {
        out_ch: kernel.out_ch,
        in_ch: kernel.in_ch,
        kh,
        kw,
        data: vec![0.0; kernel.data.len()],
    };
    let d_bias = (0..kernel.out_ch)
        .map(|o| grad_out.plane(o).iter().sum())
        .collect();

    for o in 0..kernel.out_ch {
        let g = grad_out.plane(o);
        for i in 0..kernel.in_ch {
            let src = input.plane(i);
            let dtaps = d_kernel.taps_mut(o, i);
            for y in 0..oh {
                let grow = &g[y * ow..(y + 1) * ow];
                for ky in 0..kh {
                    let prow = &src[(y + ky) * pw..(y + ky + 1) * pw];
                    for kx in 0..kw {
                        dtaps[ky * kw + kx] += grow
                            .iter()
                            .zip(&prow[kx..kx + ow])
                            .map(|(a, b)| a * b)
                            .sum::<f64>();
                    }
                }
            }
        }
    }

    let d_input = want_input_grad.then(|| {
        let mut d_in = FeatureMap::zeros(input.channels, input.height, input.width);
        for i in 0..kernel.in_ch {
            let dst = d_in.plane_mut(i);
            for o in 0..kernel.out_ch {
                let g = grad_out.plane(o);
                let taps = kernel.taps(o, i);
                for y in 0..oh {
                    let grow = &g[y * ow..(y + 1) * ow];
                    for ky in 0..kh {
                        let prow = &mut dst[(y + ky) * pw..(y + ky + 1) * pw];
                        for kx in 0..kw {
                            let wt = taps[ky * kw + kx];
                            for (d, &s) in prow[kx..kx + ow].iter_mut().zip(grow) {
                                *d += wt * s;
                            }
                        }
                    }
                }
            }
        }
        d_in
    });
    (d_kernel, d_bias, d_input)
}

/// Cross-correlates a feature map with `kernel` and adds a per-output bias.
pub fn correlate(
    input: &FeatureMap,
    kernel: &ConvKernel,
    bias: &[f64],
    padding: Padding,
) -> Result<FeatureMap> {
    ensure!(
        kernel.kh % 2 == 1 && kernel.kw % 2 == 1,
        "kernel dims must be odd, got {}x{}",
        kernel.kh,
        kernel.kw
    );
    ensure!(
        kernel.in_ch == input.channels,
        "kernel expects {} input channels, image has {}",
        kernel.in_ch,
        input.channels
    );
    ensure!(
        bias.len() == kernel.out_ch,
        "bias length {} does not match {} output channels",
        bias.len(),
        kernel.out_ch
    );
    match padding {
        Padding::SameReplicate => {
            let padded = replicate_pad(input, kernel.kh / 2, kernel.kw / 2);
            Ok(correlate_valid(&padded, kernel, bias))
        }
        Padding::Valid => {
            ensure!(
                input.height >= kernel.kh && input.width >= kernel.kw,
                "{}x{} input is smaller than {}x{} kernel",
                input.height,
                input.width,
                kernel.kh,
                kernel.kw
            );
            Ok(correlate_valid(input, kernel, bias))
        }
    }
}

/// [`correlate`] on an [`ImageBuffer`]; the kernel must produce 1 or 3 channels.
pub fn conv2d(
    img: &ImageBuffer,
    kernel: &ConvKernel,
    bias: &[f64],
    padding: Padding,
) -> Result<ImageBuffer> {
    let fm = correlate(&FeatureMap::from(img), kernel, bias, padding)?;
    ImageBuffer::new(fm.height, fm.width, fm.channels, fm.data)
}
