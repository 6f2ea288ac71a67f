//! Numerical laboratory for conic degeneration of surfaces of revolution.
//!
//! A compact surface `Ω₀` with one flat conical point is desingularized by
//! gluing a scaled copy `εZ` of a complete surface that is exactly conic near
//! infinity. The crate computes Laplace spectra, heat traces, zeta functions
//! and zeta-regularized determinants for the whole family `Ω_ε`, the
//! renormalized quantities on `Z`, and a mode-resolved heat parametrix, so
//! that the small-`ε` behaviour of `log det Δ_{Ω_ε}` can be checked against
//! its predicted expansion.
//!
//! Module map:
//!
//! - [`geometry`]: warp profiles, gluing, cutoffs, areas and curvature.
//! - [`spectrum`]: per-Fourier-mode Sturm–Liouville eigensolver.
//! - [`conekernel`]: exact heat kernels of the plane and the flat cone.
//! - [`heattrace`]: traces with certified tails, short-time fits, `Q₀` charts.
//! - [`zetadet`]: Mellin assembly of `ζ(0)`, `ζ'(0)`; conformal determinant.
//! - [`renorm`]: renormalized heat trace and zeta function on `Z`.
//! - [`parametrix`]: gluing parametrix, error kernel, Neumann series.
//! - [`degeneration`]: ε-sweeps, the predicted expansion and its fit.
//! - [`config`], [`report`]: TOML run configuration and artifact writers.

pub mod error;
pub mod config;
pub mod conekernel;
pub mod degeneration;
pub mod geometry;
pub mod heattrace;
pub mod spectrum;
pub mod zetadet;
pub mod laurent;
pub mod lsq;
pub mod parametrix;
pub mod quad;
pub mod renorm;
pub mod report;
pub mod special;

pub use error::{Error, Result};
