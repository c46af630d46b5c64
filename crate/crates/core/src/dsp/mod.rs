//! Band-pass filtering and spectral estimation.

mod butterworth;
mod filter;
mod welch;

pub use butterworth::{design_butterworth_bandpass, Biquad, FilterDesign, IirFilter};
pub use filter::{filter_epochs, filter_recording, FilterMode};
pub use welch::{welch_psd, welch_psd_matrix, PsdEstimate, PsdParams, WindowKind};
