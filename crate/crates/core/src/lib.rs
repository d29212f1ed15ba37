//! Simulator and analysis toolkit for macroscopic polarization Bell states of
//! bright squeezed vacuum.
//!
//! The crate is organized bottom-up:
//!
//! * [`gaussian`]: zero-mean Gaussian states stored as normal and anomalous
//!   correlation matrices, with polarization rotations, loss and Wick moments.
//! * [`fock`]: truncated Fock-space construction of the same states, used as
//!   an independent brute-force oracle at small gain.
//! * [`stokes`]: Stokes moments, noise reduction factors and the
//!   variance-based separability witness.
//! * [`schmidt`]: closed-form Schmidt numbers and the operational measure.
//! * [`mc`]: pulse-resolved Monte Carlo of the detection chain.
//! * [`plate`]: Sellmeier dispersion of crystal quartz, the dichroic plate
//!   and the Mach-Zehnder phase scan.
//! * [`cli`]: configuration, scenario runners and CSV output.

// Negated comparisons are used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod fock;
pub mod gaussian;
pub mod mc;
pub mod plate;
pub mod schmidt;
pub mod special;
pub mod stats;
pub mod stokes;

pub use error::{Error, Result};
pub use gaussian::{Beam, GaussianState, LossMap, ModeId, Pol, PolarizationRotation, RotationTarget, Triplet};
pub use stokes::{StokesMoments, WitnessResult};
