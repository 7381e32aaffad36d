//! Fixed-energy inverse scattering: forward synthesis, harmonic data transforms,
//! variational inversion on complex directions and Fourier-cutoff recovery.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod amplitude_data;
pub mod directions;
pub mod error;
pub mod forward;
pub mod fourier_recovery;
pub mod harness;
pub mod inversion;
pub(crate) mod linalg;
pub mod specfun;

pub use num_complex::Complex64;

pub use error::{Error, Result};

/// Number of harmonics with degree at most `l`.
#[inline]
pub fn n_harmonics(l: usize) -> usize {
    (l + 1) * (l + 1)
}
