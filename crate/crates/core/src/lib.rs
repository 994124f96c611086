//! PPG to ABP waveform translation.
//!
//! The crate covers the whole pipeline: paired-record I/O and synthetic data
//! ([`signal_io`]), FFT filtering and windowing ([`dsp`]), a small reverse-mode
//! autodiff engine ([`autodiff`]), the 1D ResNet generator and PatchGAN
//! discriminator ([`nets`]), CycleGAN training and inference ([`cyclegan`]),
//! beat-level systolic/diastolic extraction ([`bp_extract`]) and clinical
//! agreement metrics with protocol orchestration ([`eval`]).
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below name the common instantiations.

pub mod autodiff;
pub mod bp_extract;
pub mod cyclegan;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod nets;
pub mod scalar;
pub mod signal_io;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Samples per analysis window.
pub const WINDOW_LEN: usize = 256;
/// Hop between window starts (25% overlap).
pub const HOP_LEN: usize = 192;

pub type Tensor32 = autodiff::Tensor<f32>;
pub type Tensor64 = autodiff::Tensor<f64>;
pub type Graph32 = autodiff::Graph<f32>;
pub type Graph64 = autodiff::Graph<f64>;
pub type PatModel32 = cyclegan::PatModel<f32>;
pub type PatModel64 = cyclegan::PatModel<f64>;
