//! One-dimensional wavepacket simulation with information-entropy diagnostics.
//!
//! The information entropy `I = -∫ ρ (ln ρ - 1) dx` of `ρ = |ψ|²` obeys a
//! local balance law whose integral form gives `dI/dt = -∫ v ∂x ρ dx` on an
//! unbounded domain, with `v = j/ρ` the Madelung velocity. This crate
//! propagates `ψ` with a split-step Fourier method and measures how well each
//! form of the balance holds, against closed-form Gaussian solutions where
//! they exist.

pub mod cli;
pub mod climit;
pub mod config;
pub mod entropy;
pub mod error;
pub mod grid;
pub mod madelung;
pub mod oracle;
pub mod propagator;
pub mod run;

pub use error::{Error, Result};
pub use grid::{ComplexField, DerivativeScheme, Grid1D, PhysicalParams, RealField};
pub use propagator::{Potential, WaveFunction};
