//! Link-level OFDM laboratory for learned doubly-selective channel
//! estimation and phase-noise compensation.
//!
//! The crate is organised bottom-up:
//!
//! - [`numerics`]: DFT, circular convolution, Bessel J0, 2D spline, RNG streams.
//! - [`channel`]: VehA power-delay profile with Jakes time correlation.
//! - [`phase_noise`]: Gaussian, PSD-shaped and Wiener phase-noise trajectories.
//! - [`ofdm`]: pilot lattice, QAM, transmit/receive chains, LS estimation, equalisation.
//! - [`nn`]: a small 2D convolution stack with exact gradients, L1 loss and Adam.
//! - [`estimator`]: the four-layer channel estimator network and its training loop.
//! - [`pncomp`]: two-pass phase-noise estimation and compensation.
//! - [`harness`]: configuration, datasets, MSE/BER sweeps and output files.

pub mod channel;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod nn;
pub mod numerics;
pub mod ofdm;
pub mod phase_noise;
pub mod pncomp;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
