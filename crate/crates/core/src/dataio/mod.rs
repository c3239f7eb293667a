//! Image files, synthetic data and trace serialisation.
//!
//! Image formats:
//! * portable any-map (`P2`, `P5` grayscale; `P3`, `P6` colour, averaged to gray),
//!   values rescaled from `0..=maxval` to `[0, 255]`. Saving writes binary 8-bit
//!   `P5` with rounding and clipping.
//! * raw sidecar (`.f64`): the 8-byte magic `RAWF64LE`, then rows and columns as
//!   little-endian `u64`, then `rows * cols` little-endian `f64` values row-major.
//!   Lossless.

mod image;
mod synth;
mod trace;

pub use image::{load_image, save_image, ImageBuffer, ImageFormat, SaveReport, COLOUR_CONVERSION};
pub use synth::{
    add_gaussian_noise, downsample, poisson_measurements, shepp_logan, PetData, GAUSSIAN_ALGORITHM,
    SHEPP_LOGAN_ELLIPSES,
};
pub use trace::{read_trace, write_combined_traces, write_trace, TRACE_HEADER};
