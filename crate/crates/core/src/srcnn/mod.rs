//! Three-layer SRCNN: conv(9x9) -> ReLU -> conv(5x5) -> ReLU -> conv(5x5),
//! every layer with same-size edge-replicated padding, operating on the
//! luminance of a bicubically pre-upscaled LR patch.

mod format;
mod net;
mod train;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::imgcore::ConvKernel;

pub use self::format::{decode_weights, encode_weights, load_weights, load_weights_as, save_weights, weights_hash};
pub use self::net::{forward_raw, loss_and_gradients, srcnn_forward, TrainPair};
pub use self::train::{train, TrainConfig, TrainOutcome};

/// Standard deviation of the Gaussian kernel initialization.
pub const INIT_STD: f64 = 1e-3;

/// Kernel initialization; biases always start at zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitScheme {
    /// Gaussian(0, std) for every kernel.
    Gaussian { std: f64 },
    /// Gaussian(0, sqrt(2 / fan_in)) per layer.
    He,
    /// Centre-tap passthrough of channel 0 plus He noise scaled by `noise`.
    IdentityHe { noise: f64 },
}

impl Default for InitScheme {
    fn default() -> Self {
        InitScheme::Gaussian { std: INIT_STD }
    }
}

/// Layer geometry: odd kernel sizes of the three layers and the two hidden widths.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub kernel_sizes: [usize; 3],
    pub widths: [usize; 2],
}

impl Architecture {
    /// The 9-5-5 network with 64 and 32 hidden channels.
    pub const CANONICAL: Architecture = Architecture {
        kernel_sizes: [9, 5, 5],
        widths: [64, 32],
    };

    pub fn new(kernel_sizes: [usize; 3], widths: [usize; 2]) -> Result<Self> {
        ensure!(
            kernel_sizes.iter().all(|k| k % 2 == 1),
            "kernel sizes must be odd, got {kernel_sizes:?}"
        );
        ensure!(widths.iter().all(|&w| w >= 1), "hidden widths must be >= 1");
        Ok(Self { kernel_sizes, widths })
    }

    /// Same kernel sizes as the canonical network with narrower hidden layers.
    pub fn reduced(n1: usize, n2: usize) -> Result<Self> {
        Self::new(Self::CANONICAL.kernel_sizes, [n1, n2])
    }

    /// `(kh, kw, in_ch, out_ch)` per layer.
    pub fn layer_dims(&self) -> [[usize; 4]; 3] {
        let [k1, k2, k3] = self.kernel_sizes;
        let [n1, n2] = self.widths;
        [[k1, k1, 1, n1], [k2, k2, n1, n2], [k3, k3, n2, 1]]
    }

    /// Pixels of context each output pixel depends on, per side.
    pub fn receptive_radius(&self) -> usize {
        self.kernel_sizes.iter().map(|k| k / 2).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvLayer {
    pub kernel: ConvKernel,
    pub bias: Vec<f64>,
}

impl ConvLayer {
    fn zeros(dims: [usize; 4]) -> Self {
        let [kh, kw, in_ch, out_ch] = dims;
        Self {
            kernel: ConvKernel {
                out_ch,
                in_ch,
                kh,
                kw,
                data: vec![0.0; out_ch * in_ch * kh * kw],
            },
            bias: vec![0.0; out_ch],
        }
    }

    pub fn dims(&self) -> [usize; 4] {
        let k = &self.kernel;
        [k.kh, k.kw, k.in_ch, k.out_ch]
    }
}

/// Parameters of the three convolution layers. Gradients use the same type.
#[derive(Clone, Debug, PartialEq)]
pub struct SrcnnWeights {
    layers: [ConvLayer; 3],
}

impl SrcnnWeights {
    pub fn zeros(arch: Architecture) -> Self {
        let dims = arch.layer_dims();
        Self {
            layers: dims.map(ConvLayer::zeros),
        }
    }

    /// Gaussian(0, `INIT_STD`) kernels and zero biases, reproducible from `seed`.
    pub fn initialize(arch: Architecture, seed: u64) -> Self {
        Self::gaussian(arch, INIT_STD, seed)
    }

    pub fn gaussian(arch: Architecture, std: f64, seed: u64) -> Self {
        Self::init(arch, InitScheme::Gaussian { std }, seed)
    }

    pub fn init(arch: Architecture, scheme: InitScheme, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w = Self::zeros(arch);
        for layer in &mut w.layers {
            let k = &layer.kernel;
            let he = (2.0 / (k.in_ch * k.kh * k.kw) as f64).sqrt();
            let std = match scheme {
                InitScheme::Gaussian { std } => std,
                InitScheme::He => he,
                InitScheme::IdentityHe { noise } => noise * he,
            };
            let normal = Normal::new(0.0, std).expect("std must be finite and non-negative");
            layer.kernel.data.iter_mut().for_each(|v| *v = normal.sample(&mut rng));
        }
        if let InitScheme::IdentityHe { .. } = scheme {
            for layer in &mut w.layers {
                let k = &mut layer.kernel;
                let centre = (k.kh / 2) * k.kw + k.kw / 2;
                k.taps_mut(0, 0)[centre] += 1.0;
            }
        }
        w
    }

    /// Every layer passes channel 0 through its centre tap; all other
    /// weights and biases are zero. On non-negative inputs the network is
    /// then the identity map.
    pub fn identity(arch: Architecture) -> Self {
        let mut w = Self::zeros(arch);
        for layer in &mut w.layers {
            let k = &mut layer.kernel;
            let centre = (k.kh / 2) * k.kw + k.kw / 2;
            k.taps_mut(0, 0)[centre] = 1.0;
        }
        w
    }

    /// Builds weights from explicit layers, checking the chain of channel counts.
    pub fn from_layers(layers: [ConvLayer; 3]) -> Result<Self> {
        for (i, layer) in layers.iter().enumerate() {
            let k = &layer.kernel;
            ensure!(
                k.kh % 2 == 1 && k.kw % 2 == 1 && k.kh == k.kw,
                "layer {}: kernel must be square and odd, got {}x{}",
                i + 1,
                k.kh,
                k.kw
            );
            ensure!(
                k.data.len() == k.out_ch * k.in_ch * k.kh * k.kw && layer.bias.len() == k.out_ch,
                "layer {}: parameter count does not match its dims",
                i + 1
            );
        }
        ensure!(layers[0].kernel.in_ch == 1, "layer 1 must take one input channel");
        ensure!(layers[2].kernel.out_ch == 1, "layer 3 must produce one output channel");
        ensure!(
            layers[1].kernel.in_ch == layers[0].kernel.out_ch
                && layers[2].kernel.in_ch == layers[1].kernel.out_ch,
            "layer channel counts do not chain"
        );
        let w = Self { layers };
        ensure!(w.is_finite(), "weights contain non-finite parameters");
        Ok(w)
    }

    pub fn architecture(&self) -> Architecture {
        Architecture {
            kernel_sizes: [0, 1, 2].map(|i| self.layers[i].kernel.kh),
            widths: [self.layers[0].kernel.out_ch, self.layers[1].kernel.out_ch],
        }
    }

    pub fn layers(&self) -> &[ConvLayer; 3] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [ConvLayer; 3] {
        &mut self.layers
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.kernel.data.len() + l.bias.len())
            .sum()
    }

    /// All parameters in serialization order (per layer: kernel, then bias).
    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.layers
            .iter()
            .flat_map(|l| l.kernel.data.iter().chain(l.bias.iter()))
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.kernel.data.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn is_finite(&self) -> bool {
        self.params().all(|v| v.is_finite())
    }

    /// `self += alpha * other`; both must share an architecture.
    pub fn add_scaled(&mut self, other: &SrcnnWeights, alpha: f64) {
        debug_assert_eq!(self.architecture(), other.architecture());
        for (a, b) in self.params_mut().zip(other.params()) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.params_mut().for_each(|v| *v *= alpha);
    }
}
