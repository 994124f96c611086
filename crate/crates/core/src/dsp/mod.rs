//! Frequency-domain filtering, min-max normalization and 256-sample windowing.

mod filter;
mod norm;
mod window;

pub use filter::{fft_filter, FilterBand};
pub use norm::{denormalize, normalize, NormParams};
pub use window::{reconstruct_from_windows, segment_windows, window_count, WindowBatch};

/// PPG band-pass edges (Hz).
pub const PPG_BAND_HZ: (f64, f64) = (0.1, 8.0);
/// ABP low-pass edge (Hz).
pub const ABP_LOWPASS_HZ: f64 = 5.0;
