use rayon::prelude::*;

use super::{ConvLayer, SrcnnWeights};
use crate::error::{ensure, Result};
use crate::imgcore::conv::{correlate_valid, correlate_valid_backward, fold_padding};
use crate::imgcore::{replicate_pad, FeatureMap, ImageBuffer};

/// One training example: the pre-upscaled LR luminance and its HR target.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainPair {
    pub input: ImageBuffer,
    pub target: ImageBuffer,
}

impl TrainPair {
    pub fn new(input: ImageBuffer, target: ImageBuffer) -> Result<Self> {
        ensure!(
            input.channels() == 1 && target.channels() == 1,
            "training pairs must be single-channel"
        );
        ensure!(
            input.dims() == target.dims(),
            "input {:?} and target {:?} differ in size",
            input.dims(),
            target.dims()
        );
        Ok(Self { input, target })
    }
}

fn apply_layer(input: &FeatureMap, layer: &ConvLayer) -> (FeatureMap, FeatureMap) {
    let r = layer.kernel.kh / 2;
    let padded = replicate_pad(input, r, r);
    let out = correlate_valid(&padded, &layer.kernel, &layer.bias);
    (padded, out)
}

fn relu_in_place(fm: &mut FeatureMap) {
    fm.data.iter_mut().for_each(|v| *v = v.max(0.0));
}

fn check_input(input: &ImageBuffer) -> Result<()> {
    ensure!(
        input.channels() == 1,
        "SRCNN takes single-channel luminance, got {} channels",
        input.channels()
    );
    Ok(())
}

fn forward_map(w: &SrcnnWeights, input: &ImageBuffer) -> FeatureMap {
    let [l1, l2, l3] = w.layers();
    let (_, mut a1) = apply_layer(&FeatureMap::from(input), l1);
    relu_in_place(&mut a1);
    let (_, mut a2) = apply_layer(&a1, l2);
    relu_in_place(&mut a2);
    apply_layer(&a2, l3).1
}

/// Network output without the final clamp; used for losses and scores.
pub fn forward_raw(w: &SrcnnWeights, input: &ImageBuffer) -> Result<ImageBuffer> {
    check_input(input)?;
    let out = forward_map(w, input);
    ImageBuffer::new(out.height, out.width, 1, out.data)
}

/// Network output clamped to [0, 1].
pub fn srcnn_forward(w: &SrcnnWeights, input: &ImageBuffer) -> Result<ImageBuffer> {
    check_input(input)?;
    let mut out = forward_map(w, input);
    out.data.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    ImageBuffer::new(out.height, out.width, 1, out.data)
}

fn relu_backward(grad: &mut FeatureMap, activation: &FeatureMap) {
    for (g, &a) in grad.data.iter_mut().zip(&activation.data) {
        if a <= 0.0 {
            *g = 0.0;
        }
    }
}

fn pair_loss_and_gradients(w: &SrcnnWeights, pair: &TrainPair) -> (f64, SrcnnWeights) {
    let [l1, l2, l3] = w.layers();
    let (p1, mut a1) = apply_layer(&FeatureMap::from(&pair.input), l1);
    relu_in_place(&mut a1);
    let (p2, mut a2) = apply_layer(&a1, l2);
    relu_in_place(&mut a2);
    let (p3, y) = apply_layer(&a2, l3);

    let n = y.data.len() as f64;
    let target = pair.target.data();
    let mut loss = 0.0;
    let mut grad_y = FeatureMap::zeros(1, y.height, y.width);
    for ((g, &out), &t) in grad_y.data.iter_mut().zip(&y.data).zip(target) {
        let r = out - t;
        loss += r * r;
        *g = 2.0 * r / n;
    }
    loss /= n;

    let (dk3, db3, dp3) = correlate_valid_backward(&p3, &l3.kernel, &grad_y, true);
    let mut da2 = fold_padding(&dp3.expect("requested"), l3.kernel.kh / 2, l3.kernel.kw / 2);
    relu_backward(&mut da2, &a2);
    let (dk2, db2, dp2) = correlate_valid_backward(&p2, &l2.kernel, &da2, true);
    let mut da1 = fold_padding(&dp2.expect("requested"), l2.kernel.kh / 2, l2.kernel.kw / 2);
    relu_backward(&mut da1, &a1);
    let (dk1, db1, _) = correlate_valid_backward(&p1, &l1.kernel, &da1, false);

    let grads = SrcnnWeights {
        layers: [
            ConvLayer { kernel: dk1, bias: db1 },
            ConvLayer { kernel: dk2, bias: db2 },
            ConvLayer { kernel: dk3, bias: db3 },
        ],
    };
    (loss, grads)
}

/// Mean per-pair MSE over the batch (unclamped output) and its exact
/// gradient with respect to every parameter, averaged over the batch.
///
/// Pairs are evaluated in parallel but reduced in batch order, so the result
/// does not depend on the number of worker threads.
pub fn loss_and_gradients(w: &SrcnnWeights, batch: &[TrainPair]) -> Result<(f64, SrcnnWeights)> {
    ensure!(!batch.is_empty(), "loss_and_gradients needs a non-empty batch");
    for pair in batch {
        check_input(&pair.input)?;
        ensure!(
            pair.input.dims() == pair.target.dims(),
            "input and target dims differ"
        );
    }
    let per_pair: Vec<(f64, SrcnnWeights)> = batch
        .par_iter()
        .map(|pair| pair_loss_and_gradients(w, pair))
        .collect();

    let mut loss = 0.0;
    let mut grads = SrcnnWeights::zeros(w.architecture());
    for (l, g) in &per_pair {
        loss += l;
        grads.add_scaled(g, 1.0);
    }
    let inv = 1.0 / batch.len() as f64;
    grads.scale(inv);
    Ok((loss * inv, grads))
}
