//! Thermoacoustic source reconstruction and boundary sensor placement.
//!
//! The crate simulates a 2D acoustic field on a periodic box with an exact
//! Fourier-space integrator, reconstructs an initial pressure from partial
//! sensor recordings by TV-regularized least squares (FISTA with time-reversal
//! gradients), and relocates sensors on the boundary of the body to maximize
//! the observed kinetic energy.

// `!(x > 0.0)` style checks are kept on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod grid;
pub mod imaging;
pub mod io;
pub mod par;
pub mod phantom;
pub mod pipeline;
pub mod placement;
pub mod tv;
pub mod wave;

pub use error::{Error, Result};
pub use grid::{fft_forward, fft_inverse, Grid2D, RealField, SpectralField};
pub use imaging::{Recording, SensorGain, SensorMask};
pub use pipeline::{run_pipeline, PipelineResult, Report, Stage};
pub use tv::{reconstruct, ReconParams};
pub use wave::{solve_forward, Probes, Propagator, Sampling, SpectralWaveState, TimeGrid, Trajectory};
