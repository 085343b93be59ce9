//! Full-reference quality metrics on [0, 1] images.

use super::ImageBuffer;
use crate::error::{ensure, Result};

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

fn same_dims(a: &ImageBuffer, b: &ImageBuffer) -> Result<()> {
    ensure!(
        a.dims() == b.dims(),
        "dimension mismatch: {:?} vs {:?}",
        a.dims(),
        b.dims()
    );
    Ok(())
}

pub fn mse(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    same_dims(a, b)?;
    let sum: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok(sum / a.data().len() as f64)
}

/// PSNR in dB with a peak of 1 after shaving `border_crop` pixels per side.
/// Identical images yield `f64::INFINITY`.
pub fn psnr(reference: &ImageBuffer, test: &ImageBuffer, border_crop: usize) -> Result<f64> {
    same_dims(reference, test)?;
    let err = mse(&reference.shave(border_crop)?, &test.shave(border_crop)?)?;
    if err == 0.0 {
        Ok(f64::INFINITY)
    } else {
        Ok(10.0 * (1.0 / err).log10())
    }
}

/// Normalized 1-D Gaussian; the 2-D SSIM window is its outer product.
pub fn gaussian_window(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size / 2) as f64;
    let mut w: Vec<f64> = (0..size)
        .map(|i| (-((i as f64 - c).powi(2)) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    w
}

/// Separable valid filtering of a single plane.
fn filter_valid(plane: &[f64], h: usize, w: usize, win: &[f64]) -> (Vec<f64>, usize, usize) {
    let n = win.len();
    let (oh, ow) = (h + 1 - n, w + 1 - n);
    let mut horiz = vec![0.0; h * ow];
    for y in 0..h {
        let row = &plane[y * w..(y + 1) * w];
        for x in 0..ow {
            horiz[y * ow + x] = win.iter().zip(&row[x..x + n]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for (k, &wk) in win.iter().enumerate() {
            let src = &horiz[(y + k) * ow..(y + k + 1) * ow];
            for (d, s) in out[y * ow..(y + 1) * ow].iter_mut().zip(src) {
                *d += wk * s;
            }
        }
    }
    (out, oh, ow)
}

/// Single-scale SSIM (11x11 Gaussian window, sigma 1.5, K1 = 0.01,
/// K2 = 0.03, L = 1) averaged over valid window positions.
pub fn ssim(reference: &ImageBuffer, test: &ImageBuffer, border_crop: usize) -> Result<f64> {
    same_dims(reference, test)?;
    ensure!(reference.channels() == 1, "ssim needs single-channel images");
    let a = reference.shave(border_crop)?;
    let b = test.shave(border_crop)?;
    let (h, w, _) = a.dims();
    ensure!(
        h >= SSIM_WINDOW && w >= SSIM_WINDOW,
        "{h}x{w} after cropping is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window"
    );
    let win = gaussian_window(SSIM_WINDOW, SSIM_SIGMA);
    let (pa, pb) = (a.plane(0), b.plane(0));
    let aa: Vec<f64> = pa.iter().map(|v| v * v).collect();
    let bb: Vec<f64> = pb.iter().map(|v| v * v).collect();
    let ab: Vec<f64> = pa.iter().zip(pb).map(|(x, y)| x * y).collect();

    let (mu_a, oh, ow) = filter_valid(pa, h, w, &win);
    let (mu_b, _, _) = filter_valid(pb, h, w, &win);
    let (e_aa, _, _) = filter_valid(&aa, h, w, &win);
    let (e_bb, _, _) = filter_valid(&bb, h, w, &win);
    let (e_ab, _, _) = filter_valid(&ab, h, w, &win);

    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let mut total = 0.0;
    for i in 0..oh * ow {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let var_a = e_aa[i] - ma * ma;
        let var_b = e_bb[i] - mb * mb;
        let cov = e_ab[i] - ma * mb;
        total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
            / ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
    }
    Ok(total / (oh * ow) as f64)
}
