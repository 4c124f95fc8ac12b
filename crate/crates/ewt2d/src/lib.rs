//! 2D empirical wavelet transform driven by demons registration.
//!
//! The transform builds a data-adaptive filter bank in the Fourier domain:
//! harmonic modes of the spectrum are detected by scale-space persistence,
//! the frequency plane is split into symmetric regions (Voronoi or
//! watershed), and each region is registered onto the support of a
//! band-pass wavelet kernel with a demons algorithm. The resulting
//! mappings deform the analytic kernel into one filter per region, and a
//! dual-frame division reconstructs the image from its coefficients.
//!
//! The crate is organized around the pipeline stages:
//!
//! * [`grid`] — raster infrastructure: images, centered spectra, FFTs,
//!   interpolation, warping, Gaussian smoothing, pyramid resampling, I/O.
//! * [`kernels`] — analytic disk/square band-pass wavelet kernels.
//! * [`partition`] — mode detection and symmetric Fourier partitioning.
//! * [`demons`] — Thirion / additive / diffeomorphic demons registration
//!   with multiresolution pyramids.
//! * [`ewt`] — filter-bank construction, forward transform, dual-frame
//!   reconstruction.
//! * [`analysis`] — RMSE/PSNR metrics and the benchmark driver.
//! * [`segmentation`] — texture segmentation from local coefficient energy.
//! * [`cli`] — configuration and subcommand wiring for the `ewt` binary.
//!
//! See the `examples/` directory for one runnable example per stage.

pub mod analysis;
pub mod cli;
pub mod demons;
pub mod error;
pub mod ewt;
pub mod grid;
pub mod kernels;
pub mod partition;
pub mod segmentation;

pub use error::{EwtError, Result};
