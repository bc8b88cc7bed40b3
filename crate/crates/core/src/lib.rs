//! Compressed-sensing data acquisition for large tactile sensor grids.
//!
//! Per time-step force frames are compressed through a sparse scrambled
//! block-Hadamard measurement operator and reconstructed by a warm-started
//! FISTA solve of basis pursuit denoising in a 2D Haar wavelet basis.
//! Reconstruction quality is evaluated with PSNR sweeps over measurement
//! counts and iteration budgets.
//!
//! Module map:
//!
//! * [`grid`] - taxel grid types (frames, recordings, measurement vectors)
//!   and the `TXCS` binary container plus CSV export.
//! * [`transform`] - orthonormal 2D Haar transform (analysis + synthesis)
//!   and a D4 analysis transform for sparsity comparison.
//! * [`measure`] - the seeded block-Hadamard measurement operator, its
//!   fast apply/adjoint, and the daisy-chain wiring report.
//! * [`solve`] - FISTA for basis pursuit denoising with warm starts
//!   across time-steps and the nonnegativity clamp.
//! * [`scenario`] - synthetic contact scenarios, moving-average
//!   smoothing, and the tapered sensor noise model.
//! * [`eval`] - PSNR metrics and the experiment sweep harness.
//!
//! Everything is seeded and deterministic: the same inputs produce the
//! same recordings, operators, and reconstructions on every platform.

pub mod error;
pub mod eval;
pub mod grid;
pub mod measure;
pub mod scenario;
pub mod solve;
pub mod transform;

pub use error::{Error, Result};
