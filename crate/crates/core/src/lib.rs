//! Hilbert and Fourier neural operators on periodic grids, together with the
//! spectral numerics, training machinery and PDE data generators they need.

pub mod analytic;
pub mod datagen;
pub mod error;
pub mod fft;
pub mod field;
mod io;
pub mod modes;
pub mod operator;
pub mod training;

pub use error::{Error, Result};
pub use field::{ComplexSpectrum, RealField};
