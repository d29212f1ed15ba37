//! Pulse-resolved Monte Carlo of the experiment.
//!
//! Each pulse draws photon numbers for `M` mode pairs of the singlet source
//! (or a polarized coherent control beam), applies binomial detector loss
//! and adds Gaussian electronic noise to the two detector readouts of the
//! chosen Stokes basis. Ensembles are reduced to Stokes moments, shot-noise
//! calibrations, photon-number histograms and width ratios.

mod estimate;
mod histogram;
pub mod rng;
mod sampling;
mod sweep;

pub use estimate::{analytic_moments, calibrate_shot_noise, estimate_stokes, simulate_stokes_run, CalibrationFit, CalibrationPoint, Calibration};
pub use histogram::{conditional_distribution, measure_r, BinRule, Channel, Conditional, Histogram, WidthRatio};
pub use sampling::{apply_detection, sample_pulse, simulate_ensemble, Ensemble, PulseSample};
pub use sweep::{mode_mismatch_sweep, ApertureGeometry, SweepPoint};

use serde::Serialize;

use crate::error::{Error, Result};

/// Light entering the analyzers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Source {
    /// Two polarization pairings `(AH, BV)` and `(AV, BH)` of `M` mode pairs.
    Singlet,
    /// H-polarized coherent light with `mean_per_beam` photons in each beam.
    Coherent { mean_per_beam: f64 },
}

/// Stokes measurement basis; the detectors see the `+1` and `-1`
/// eigenpolarizations of the corresponding Pauli matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Basis {
    S1,
    S2,
    S3,
}

impl Basis {
    pub const ALL: [Basis; 3] = [Basis::S1, Basis::S2, Basis::S3];

    pub fn index(self) -> usize {
        match self {
            Basis::S1 => 0,
            Basis::S2 => 1,
            Basis::S3 => 2,
        }
    }
}

/// How pulses are distributed over threads. Output does not depend on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Rayon data parallelism; falls back to sequential when the crate is
    /// built without the `parallel` feature.
    #[default]
    Parallel,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    /// Parametric gain.
    pub gamma: f64,
    /// Mode pairs `M` seen by the beam-B aperture.
    pub n_pairs: u64,
    pub pulses: usize,
    /// Detection efficiency per channel (AH, AV, BH, BV).
    pub eta: [f64; 4],
    /// Relative standard deviation of the per-pulse gain.
    pub pump_jitter: f64,
    /// Electronic noise per detector, photon-equivalent units.
    pub electronic_noise: f64,
    /// Detector units per detected photon.
    pub gain: f64,
    pub seed: u64,
    /// `(D1 / lambda_A) / (D2 / lambda_B)`.
    pub aperture_ratio: f64,
    pub source: Source,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            gamma: 0.33,
            n_pairs: 500_000,
            pulses: 20_000,
            eta: [0.57; 4],
            pump_jitter: 0.0,
            electronic_noise: 300.0,
            gain: 1.0,
            seed: 1,
            aperture_ratio: 1.0,
            source: Source::Singlet,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::invalid(msg));
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return bad(format!("gamma must be finite and >= 0, got {}", self.gamma));
        }
        if self.n_pairs < 1 {
            return bad("n_pairs must be at least 1".into());
        }
        if self.pulses < 1 {
            return bad("pulses must be at least 1".into());
        }
        if let Some(e) = self.eta.iter().find(|e| !(0.0..=1.0).contains(*e)) {
            return bad(format!("detection efficiency {e} outside [0, 1]"));
        }
        if !(self.pump_jitter.is_finite() && self.pump_jitter >= 0.0) {
            return bad(format!("pump_jitter must be >= 0, got {}", self.pump_jitter));
        }
        if !(self.electronic_noise.is_finite() && self.electronic_noise >= 0.0) {
            return bad(format!("electronic noise must be >= 0, got {}", self.electronic_noise));
        }
        if !(self.gain.is_finite() && self.gain > 0.0) {
            return bad(format!("detector gain must be > 0, got {}", self.gain));
        }
        if !(self.aperture_ratio.is_finite() && self.aperture_ratio > 0.0) {
            return bad(format!("aperture ratio must be > 0, got {}", self.aperture_ratio));
        }
        if let Source::Coherent { mean_per_beam } = self.source {
            if !(mean_per_beam.is_finite() && mean_per_beam >= 0.0) {
                return bad(format!("coherent mean must be >= 0, got {mean_per_beam}"));
            }
        }
        Ok(())
    }

    /// Mean photons per beam before loss, `2 M sinh^2 gamma` at matched
    /// apertures.
    pub fn mean_photons_per_beam(&self) -> f64 {
        match self.source {
            Source::Singlet => crate::schmidt::mean_photons(self.gamma, self.n_pairs as f64),
            Source::Coherent { mean_per_beam } => mean_per_beam,
        }
    }

    /// Photons per mode implied by a target photon number per beam.
    pub fn implied_photons_per_mode(photons_per_beam: f64, n_pairs: u64) -> f64 {
        photons_per_beam / (2.0 * n_pairs as f64)
    }

    pub fn with_uniform_eta(mut self, eta: f64) -> Self {
        self.eta = [eta; 4];
        self
    }
}

#[cfg(feature = "parallel")]
fn map_pulses<T, F>(n: usize, exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    use rayon::prelude::*;
    match exec {
        Execution::Parallel => (0..n as u64).into_par_iter().map(f).collect(),
        Execution::Sequential => (0..n as u64).map(f).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
fn map_pulses<T, F>(n: usize, _exec: Execution, f: F) -> Vec<T>
where
    F: Fn(u64) -> T,
{
    (0..n as u64).map(f).collect()
}
