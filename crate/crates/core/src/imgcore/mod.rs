//! Deterministic image kernels on planar `f64` buffers.

mod color;
pub mod conv;
mod image;
pub mod io;
mod metrics;
mod resize;
mod sobel;

pub use self::color::{rgb_to_y, to_luma};
pub use self::conv::{conv2d, correlate, replicate_pad, ConvKernel, FeatureMap, Padding};
pub use self::image::{quantize, ImageBuffer};
pub use self::io::{read_png, write_png};
pub use self::metrics::{gaussian_window, mse, psnr, ssim};
pub use self::resize::{bicubic_resize, cubic, ResampleSpec, ScaleFactor};
pub use self::sobel::sobel_magnitude;
