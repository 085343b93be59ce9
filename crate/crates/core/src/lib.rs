//! Core-set selection for image super-resolution training corpora.
//!
//! Samples are scored by the reconstruction loss of a small pretrained SRCNN
//! (or by mean Sobel gradient magnitude) and pruned to a core-set by
//! ascending, descending, refined or random selection.

pub mod cli;
pub mod error;
pub mod imgcore;
pub mod pipeline;
pub mod scoring;
pub mod selection;
pub mod srcnn;
pub mod toytrain;
pub mod util;

pub use error::{Error, FormatError, Result};
