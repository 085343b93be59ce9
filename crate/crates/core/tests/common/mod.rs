//! Independent reference implementations used as test oracles. Each one is a
//! direct, loop-level transcription of the definition and shares no code with
//! the library kernels it checks.
#![allow(dead_code)]

use rand::Rng;
use srprune::imgcore::ImageBuffer;

pub fn random_image<R: Rng>(rng: &mut R, h: usize, w: usize, c: usize) -> ImageBuffer {
    ImageBuffer::from_fn(h, w, c, |_, _, _| rng.random::<f64>()).unwrap()
}

fn clampi(v: i64, n: usize) -> usize {
    v.clamp(0, n as i64 - 1) as usize
}

/// Quadruple-loop cross-correlation. `kernel` is `(out, in, kh, kw)`.
pub fn naive_conv(
    input: &[f64],
    (c, h, w): (usize, usize, usize),
    kernel: &[f64],
    (out_ch, kh, kw): (usize, usize, usize),
    bias: &[f64],
    same: bool,
) -> (Vec<f64>, usize, usize) {
    let (ry, rx) = ((kh / 2) as i64, (kw / 2) as i64);
    let (oh, ow) = if same { (h, w) } else { (h + 1 - kh, w + 1 - kw) };
    let mut out = vec![0.0; out_ch * oh * ow];
    for o in 0..out_ch {
        for y in 0..oh {
            for x in 0..ow {
                let mut acc = bias[o];
                for i in 0..c {
                    for ky in 0..kh {
                        for kx in 0..kw {
                            let (sy, sx) = if same {
                                (
                                    clampi(y as i64 + ky as i64 - ry, h),
                                    clampi(x as i64 + kx as i64 - rx, w),
                                )
                            } else {
                                (y + ky, x + kx)
                            };
                            acc += kernel[((o * c + i) * kh + ky) * kw + kx] * input[(i * h + sy) * w + sx];
                        }
                    }
                }
                out[(o * oh + y) * ow + x] = acc;
            }
        }
    }
    (out, oh, ow)
}

fn keys(x: f64) -> f64 {
    let a = x.abs();
    if a <= 1.0 {
        (1.5 * a - 2.5) * a * a + 1.0
    } else if a <= 2.0 {
        ((-0.5 * a + 2.5) * a - 4.0) * a + 2.0
    } else {
        0.0
    }
}

/// Every (row tap, column tap) of every output pixel enumerated explicitly,
/// with the 2-D weight normalized over all taps.
pub fn resize_oracle(img: &ImageBuffer, num: usize, den: usize, antialias: bool) -> ImageBuffer {
    let (h, w, c) = img.dims();
    let (oh, ow) = (h * num / den, w * num / den);
    let s = num as f64 / den as f64;
    let widen = antialias && s < 1.0;
    let support = if widen { 2.0 / s } else { 2.0 };
    let weight = |d: f64| if widen { s * keys(s * d) } else { keys(d) };
    ImageBuffer::from_fn(oh, ow, c, |ch, oy, ox| {
        let cy = (oy as f64 + 1.0) / s + 0.5 * (1.0 - 1.0 / s);
        let cx = (ox as f64 + 1.0) / s + 0.5 * (1.0 - 1.0 / s);
        let (mut acc, mut total) = (0.0, 0.0);
        let lo_y = (cy - support).floor() as i64 - 1;
        let lo_x = (cx - support).floor() as i64 - 1;
        for jy in lo_y..=(cy + support).ceil() as i64 + 1 {
            for jx in lo_x..=(cx + support).ceil() as i64 + 1 {
                let wt = weight(cy - jy as f64) * weight(cx - jx as f64);
                if wt == 0.0 {
                    continue;
                }
                acc += wt * img.get(ch, clampi(jy - 1, h), clampi(jx - 1, w));
                total += wt;
            }
        }
        (acc / total).clamp(0.0, 1.0)
    })
    .unwrap()
}

pub fn sobel_oracle(img: &ImageBuffer) -> f64 {
    let (h, w, _) = img.dims();
    let px = |y: i64, x: i64| img.get(0, clampi(y, h), clampi(x, w));
    let mut total = 0.0;
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let gx = (px(y - 1, x + 1) + 2.0 * px(y, x + 1) + px(y + 1, x + 1))
                - (px(y - 1, x - 1) + 2.0 * px(y, x - 1) + px(y + 1, x - 1));
            let gy = (px(y + 1, x - 1) + 2.0 * px(y + 1, x) + px(y + 1, x + 1))
                - (px(y - 1, x - 1) + 2.0 * px(y - 1, x) + px(y - 1, x + 1));
            total += (gx * gx + gy * gy).sqrt();
        }
    }
    total / (h * w) as f64
}

pub fn mse_oracle(a: &ImageBuffer, b: &ImageBuffer) -> f64 {
    let (h, w, c) = a.dims();
    let mut s = 0.0;
    for ch in 0..c {
        for y in 0..h {
            for x in 0..w {
                let d = a.get(ch, y, x) - b.get(ch, y, x);
                s += d * d;
            }
        }
    }
    s / (h * w * c) as f64
}

pub fn psnr_oracle(a: &ImageBuffer, b: &ImageBuffer, crop: usize) -> f64 {
    let (h, w, _) = a.dims();
    let mut s = 0.0;
    let mut n = 0usize;
    for y in crop..h - crop {
        for x in crop..w - crop {
            let d = a.get(0, y, x) - b.get(0, y, x);
            s += d * d;
            n += 1;
        }
    }
    if s == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * (s / n as f64).log10()
    }
}

/// SSIM with an explicit 11x11 window and two-pass windowed moments.
pub fn ssim_oracle(a: &ImageBuffer, b: &ImageBuffer, crop: usize) -> f64 {
    let (h, w, _) = a.dims();
    let mut win = [[0.0f64; 11]; 11];
    let mut total = 0.0;
    for (i, row) in win.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let (di, dj) = (i as f64 - 5.0, j as f64 - 5.0);
            *v = (-(di * di + dj * dj) / (2.0 * 1.5 * 1.5)).exp();
            total += *v;
        }
    }
    win.iter_mut().flatten().for_each(|v| *v /= total);
    let (c1, c2) = (0.01f64.powi(2), 0.03f64.powi(2));
    let (y0, x0) = (crop, crop);
    let (hh, ww) = (h - 2 * crop, w - 2 * crop);
    let mut acc = 0.0;
    let mut count = 0usize;
    for y in 0..=hh - 11 {
        for x in 0..=ww - 11 {
            let at = |img: &ImageBuffer, i: usize, j: usize| img.get(0, y0 + y + i, x0 + x + j);
            let (mut ma, mut mb) = (0.0, 0.0);
            for i in 0..11 {
                for j in 0..11 {
                    ma += win[i][j] * at(a, i, j);
                    mb += win[i][j] * at(b, i, j);
                }
            }
            let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
            for i in 0..11 {
                for j in 0..11 {
                    let da = at(a, i, j) - ma;
                    let db = at(b, i, j) - mb;
                    va += win[i][j] * da * da;
                    vb += win[i][j] * db * db;
                    cov += win[i][j] * da * db;
                }
            }
            acc += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            count += 1;
        }
    }
    acc / count as f64
}

/// Best achievable subset sum over all `k`-subsets of `scores`.
pub fn brute_force_best(scores: &[f64], k: usize, maximize: bool) -> f64 {
    let n = scores.len();
    let mut best = if maximize { f64::NEG_INFINITY } else { f64::INFINITY };
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != k {
            continue;
        }
        let s: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| scores[i]).sum();
        best = if maximize { best.max(s) } else { best.min(s) };
    }
    best
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Random-case sweeps of each library kernel against its oracle. Each
/// returns the worst absolute deviation over `cases` draws.
pub mod sweeps {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use srprune::imgcore::*;

    pub fn conv(cases: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sizes = [1usize, 3, 5, 7, 9];
        let mut worst: f64 = 0.0;
        for case in 0..cases {
            let c = [1, 3][rng.random_range(0..2)];
            let out_ch = [1, 3][rng.random_range(0..2)];
            let kh = sizes[rng.random_range(0..sizes.len())];
            let kw = sizes[rng.random_range(0..sizes.len())];
            let same = case % 2 == 0;
            let (min_h, min_w) = if same { (1, 1) } else { (kh, kw) };
            let h = rng.random_range(min_h..=9);
            let w = rng.random_range(min_w..=9);
            let img = random_image(&mut rng, h, w, c);
            let mut kernel = ConvKernel::zeros(out_ch, c, kh, kw).unwrap();
            kernel.data.iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
            let bias: Vec<f64> = (0..out_ch).map(|_| rng.random_range(-0.5..0.5)).collect();
            let padding = if same { Padding::SameReplicate } else { Padding::Valid };
            let got = conv2d(&img, &kernel, &bias, padding).unwrap();
            let (want, oh, ow) = naive_conv(img.data(), (c, h, w), &kernel.data, (out_ch, kh, kw), &bias, same);
            assert_eq!(got.dims(), (oh, ow, out_ch));
            worst = worst.max(max_abs_diff(got.data(), &want));
        }
        worst
    }

    pub fn resize(cases: usize, seed: u64, antialias: bool) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scales = [(1usize, 2usize), (1, 3), (1, 4), (2, 1), (3, 1), (4, 1), (2, 3), (3, 2)];
        let mut worst: f64 = 0.0;
        for case in 0..cases {
            let (num, den) = scales[case % scales.len()];
            let c = if case % 3 == 0 { 3 } else { 1 };
            let h = rng.random_range(den.max(2)..=12);
            let w = rng.random_range(den.max(2)..=12);
            let img = random_image(&mut rng, h, w, c);
            let spec = ResampleSpec::new(ScaleFactor::new(num as u32, den as u32).unwrap(), antialias);
            let got = bicubic_resize(&img, &spec).unwrap();
            let want = resize_oracle(&img, num, den, antialias);
            assert_eq!(got.dims(), want.dims());
            worst = worst.max(max_abs_diff(got.data(), want.data()));
        }
        worst
    }

    pub fn sobel(cases: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..cases {
            let (h, w) = (rng.random_range(1..=12), rng.random_range(1..=12));
            let img = random_image(&mut rng, h, w, 1);
            worst = worst.max((sobel_magnitude(&img).unwrap() - sobel_oracle(&img)).abs());
        }
        worst
    }

    pub fn mse(cases: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for case in 0..cases {
            let (h, w, c) = (rng.random_range(1..=10), rng.random_range(1..=10), [1, 3][case % 2]);
            let a = random_image(&mut rng, h, w, c);
            let b = random_image(&mut rng, h, w, c);
            worst = worst.max((srprune::imgcore::mse(&a, &b).unwrap() - mse_oracle(&a, &b)).abs());
        }
        worst
    }

    pub fn psnr(cases: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..cases {
            let crop = rng.random_range(0..=3);
            let (h, w) = (rng.random_range(2 * crop + 1..=14), rng.random_range(2 * crop + 1..=14));
            let a = random_image(&mut rng, h, w, 1);
            let b = random_image(&mut rng, h, w, 1);
            worst = worst.max((srprune::imgcore::psnr(&a, &b, crop).unwrap() - psnr_oracle(&a, &b, crop)).abs());
        }
        worst
    }

    pub fn ssim(cases: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..cases {
            let crop = rng.random_range(0..=2);
            let h = rng.random_range(11 + 2 * crop..=18);
            let w = rng.random_range(11 + 2 * crop..=18);
            let a = random_image(&mut rng, h, w, 1);
            // Correlated pairs cover the whole range of the index.
            let mix: f64 = rng.random();
            let noise = random_image(&mut rng, h, w, 1);
            let b = ImageBuffer::from_fn(h, w, 1, |_, y, x| mix * a.get(0, y, x) + (1.0 - mix) * noise.get(0, y, x))
                .unwrap();
            worst = worst.max((srprune::imgcore::ssim(&a, &b, crop).unwrap() - ssim_oracle(&a, &b, crop)).abs());
        }
        worst
    }
}

/// Layer 1 and 2 pre-activations and the raw network output, composed from
/// three `naive_conv` calls.
pub fn srcnn_oracle(w: &srprune::srcnn::SrcnnWeights, input: &ImageBuffer) -> (Vec<f64>, Vec<f64>) {
    let (h, wd, _) = input.dims();
    let mut pre = Vec::new();
    let mut x = input.data().to_vec();
    let mut c = 1;
    for (i, layer) in w.layers().iter().enumerate() {
        let k = &layer.kernel;
        let (mut out, _, _) = naive_conv(&x, (c, h, wd), &k.data, (k.out_ch, k.kh, k.kw), &layer.bias, true);
        if i < 2 {
            pre.extend_from_slice(&out);
            out.iter_mut().for_each(|v| *v = v.max(0.0));
        }
        x = out;
        c = k.out_ch;
    }
    (pre, x)
}

/// Worst relative error between analytic gradients and central differences
/// (step 1e-4) over `instances` random 1→2→2→1 networks with 8×8 batches.
pub fn gradient_check(instances: usize, seed: u64) -> f64 {
    use rand::SeedableRng;
    use srprune::srcnn::{loss_and_gradients, Architecture, SrcnnWeights, TrainPair};

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let eps = 1e-4;
    let loss = |w: &SrcnnWeights, b: &[TrainPair]| loss_and_gradients(w, b).unwrap().0;
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < instances {
        let mut w = SrcnnWeights::zeros(Architecture::reduced(2, 2).unwrap());
        for p in w.params_mut() {
            *p = rng.random_range(-0.3..0.3);
        }
        let n = rng.random_range(1..=2);
        let batch: Vec<TrainPair> = (0..n)
            .map(|_| TrainPair::new(random_image(&mut rng, 8, 8, 1), random_image(&mut rng, 8, 8, 1)).unwrap())
            .collect();
        // A pre-activation within reach of the perturbation would put a ReLU
        // kink inside the difference stencil; draw another instance instead.
        if batch.iter().any(|p| srcnn_oracle(&w, &p.input).0.iter().any(|z| z.abs() < 1e-3)) {
            continue;
        }
        let (_, grads) = loss_and_gradients(&w, &batch).unwrap();
        for (i, &a) in grads.params().enumerate() {
            let mut plus = w.clone();
            *plus.params_mut().nth(i).unwrap() += eps;
            let mut minus = w.clone();
            *minus.params_mut().nth(i).unwrap() -= eps;
            let numeric = (loss(&plus, &batch) - loss(&minus, &batch)) / (2.0 * eps);
            worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6));
        }
        done += 1;
    }
    worst
}
