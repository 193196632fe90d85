//! Sparse range-Doppler spectral estimation from one-bit quantized radar
//! measurements.
//!
//! The library covers the full pipeline: scene synthesis for LFMCW and PMCW
//! radars, one-bit quantization against known time-varying thresholds, and a
//! family of gridded sparse estimators. Estimators come in two flavors:
//!
//! * high-precision weighted covariance fitting ([`spice`]): SPICE, LIKES,
//!   SLIM and IAA operating on unquantized measurements,
//! * one-bit counterparts ([`onebit`]): 1bSPICE, 1bLIKES, 1bSLIM and 1bIAA
//!   operating directly on sign data via a majorize-minimize scheme.
//!
//! Dictionaries with Fourier or Kronecker structure are applied via FFTs and
//! matrix reshapes instead of materialized matrices, and an iterative solver
//! ([`numerics::cgls_solve`]) keeps the per-iteration cost of the sparsest
//! estimators near `O(M log M)`.
//!
//! # Examples
//!
//! Each major capability has a runnable example:
//!
//! ```text
//! examples/
//!   onebit_sinusoids.rs      two closely spaced tones from one-bit data
//!   onebit_family.rs         all four one-bit estimators side by side
//!   highprecision_family.rs  SPICE/LIKES/SLIM/IAA on unquantized data
//!   pmcw_imaging.rs          PMCW range-Doppler map with 1bIAA
//!   thresholds.rs            time-varying threshold schemes
//!   fast_path.rs             FFT + CGLS fast path vs. dense reference
//!   monte_carlo.rs           small Monte Carlo benchmark run
//! ```
//!
//! Run one with `cargo run --release --example onebit_sinusoids`.
//!
//! The `bitspice` binary wraps the same machinery as a small CLI with
//! `simulate`, `quantize`, `estimate` and `bench` subcommands.

pub mod bench;
pub mod cli;
pub mod dictionary;
pub mod files;
pub mod numerics;
pub mod onebit;
pub mod quantizer;
pub mod spice;
pub mod waveforms;

use num_complex::Complex;

/// Complex sample type used throughout.
pub type C64 = Complex<f64>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("did not converge: {0}")]
    Convergence(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: usage and configuration problems exit
    /// with 2, runtime numerical failures with 3.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) | Error::DimensionMismatch(_) | Error::Io(_) => 2,
            Error::Convergence(_) | Error::Numerical(_) => 3,
        }
    }
}
