//! Birefringent dichroic plate and Mach-Zehnder phase scan.
//!
//! Crystal quartz dispersion uses the five-term Sellmeier form
//! `n^2 = 1 + sum_i B_i L^2 / (L^2 - C_i^2)` with `L` in micrometres. The
//! coefficient set (ordinary and extraordinary ray, 0.4-1.1 um) is the one
//! tabulated for alpha-quartz in the Handbook of Optics after Radhakrishnan.

use std::f64::consts::{PI, TAU};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gaussian::{GaussianState, Triplet};
use crate::stokes::{nrf, stokes_moments_gaussian, witness};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Pump coherence time setting the interferometer balance tolerance.
pub const PUMP_COHERENCE_TIME: f64 = 5e-12;

const MIN_WAVELENGTH: f64 = 0.4e-6;
const MAX_WAVELENGTH: f64 = 1.1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Ray {
    Ordinary,
    Extraordinary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SellmeierTerms {
    pub b: [f64; 5],
    /// Resonance wavelengths in micrometres.
    pub c: [f64; 5],
}

impl SellmeierTerms {
    fn index(&self, lambda_um: f64) -> f64 {
        let l2 = lambda_um * lambda_um;
        let sum: f64 = self.b.iter().zip(&self.c).map(|(b, c)| b * l2 / (l2 - c * c)).sum();
        (1.0 + sum).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SellmeierSet {
    pub name: &'static str,
    pub ordinary: SellmeierTerms,
    pub extraordinary: SellmeierTerms,
}

pub const QUARTZ: SellmeierSet = SellmeierSet {
    name: "alpha-quartz (Radhakrishnan)",
    ordinary: SellmeierTerms {
        b: [0.663044, 0.517852, 0.175912, 0.565380, 1.675299],
        c: [0.060, 0.106, 0.119, 8.844, 20.742],
    },
    extraordinary: SellmeierTerms {
        b: [0.665721, 0.503511, 0.214792, 0.539173, 1.807613],
        c: [0.060, 0.106, 0.119, 8.792, 19.70],
    },
};

impl SellmeierSet {
    pub fn index(&self, lambda: f64, ray: Ray) -> Result<f64> {
        if !(MIN_WAVELENGTH..=MAX_WAVELENGTH).contains(&lambda) {
            return Err(Error::WavelengthOutOfRange(lambda));
        }
        let terms = match ray {
            Ray::Ordinary => &self.ordinary,
            Ray::Extraordinary => &self.extraordinary,
        };
        Ok(terms.index(lambda * 1e6))
    }
}

/// Refractive index of crystal quartz; `lambda` in metres.
pub fn refractive_index(lambda: f64, ray: Ray) -> Result<f64> {
    QUARTZ.index(lambda, ray)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlateSpec {
    /// Metres.
    pub thickness: f64,
    pub lambda_a: f64,
    pub lambda_b: f64,
    #[serde(skip)]
    pub material: SellmeierSet,
}

impl Default for PlateSpec {
    fn default() -> Self {
        Self { thickness: 170e-6, lambda_a: 635e-9, lambda_b: 805e-9, material: QUARTZ }
    }
}

impl PlateSpec {
    fn check(&self) -> Result<()> {
        if !(self.thickness.is_finite() && self.thickness >= 0.0) {
            return Err(Error::invalid(format!("plate thickness must be >= 0, got {}", self.thickness)));
        }
        Ok(())
    }

    fn phase(&self, lambda: f64, ray: Ray) -> Result<f64> {
        Ok(TAU / lambda * self.material.index(lambda, ray)? * self.thickness)
    }
}

/// `|phi_o - phi_e| = (2 pi / lambda) |n_o - n_e| d` in radians.
pub fn oe_delay(spec: &PlateSpec, lambda: f64) -> Result<f64> {
    spec.check()?;
    Ok((spec.phase(lambda, Ray::Ordinary)? - spec.phase(lambda, Ray::Extraordinary)?).abs())
}

/// Phases `k d` of (AH, AV, BH, BV); H travels as the ordinary ray.
pub fn plate_mode_phases(spec: &PlateSpec) -> Result<[f64; 4]> {
    spec.check()?;
    Ok([
        spec.phase(spec.lambda_a, Ray::Ordinary)?,
        spec.phase(spec.lambda_a, Ray::Extraordinary)?,
        spec.phase(spec.lambda_b, Ray::Ordinary)?,
        spec.phase(spec.lambda_b, Ray::Extraordinary)?,
    ])
}

/// Phase of the `(AV, BH)` pairing relative to `(AH, BV)` after the plate.
pub fn pairing_phase(phases: &[f64; 4]) -> f64 {
    (phases[1] + phases[2]) - (phases[0] + phases[3])
}

/// Distance of the pairing phase from pi, folded into `[0, pi]`.
pub fn residual_phase(spec: &PlateSpec) -> Result<f64> {
    let rel = pairing_phase(&plate_mode_phases(spec)?);
    Ok((rel - PI).rem_euclid(TAU).min((PI - rel).rem_euclid(TAU)))
}

/// `Psi+` of gain `gamma` after the plate.
pub fn convert_psi_plus(spec: &PlateSpec, gamma: f64) -> Result<GaussianState> {
    let phases = plate_mode_phases(spec)?;
    GaussianState::make_triplet(Triplet::PsiPlus, gamma)?.apply_mode_phases(&phases)
}

/// Witness of a singlet whose pairing phase misses pi by `residual`:
/// `2 (1 + sinh^2 gamma) (1 - cos residual)`.
pub fn residual_witness_bound(gamma: f64, residual: f64) -> f64 {
    2.0 * (1.0 + gamma.sinh().powi(2)) * (1.0 - residual.cos())
}

/// Witness left-hand side of the converted `Psi+`.
pub fn converted_witness(spec: &PlateSpec, gamma: f64) -> Result<f64> {
    Ok(witness(&stokes_moments_gaussian(&convert_psi_plus(spec, gamma)?))?.lhs)
}

/// Interference visibility at path-length mismatch `delta_l` (metres).
pub fn coherence_visibility(delta_l: f64) -> f64 {
    (-(delta_l / (SPEED_OF_LIGHT * PUMP_COHERENCE_TIME)).powi(2)).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanPoint {
    pub phi: f64,
    pub nrf_s2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnvelopePoint {
    pub path_offset: f64,
    pub visibility: f64,
    pub nrf_min: f64,
    pub nrf_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseScan {
    pub gamma: f64,
    /// `NRF(S2) = offset + amplitude cos phi` at zero path mismatch.
    pub offset: f64,
    pub amplitude: f64,
    pub points: Vec<ScanPoint>,
    pub envelope: Vec<EnvelopePoint>,
}

/// `NRF(S2)` of the Mach-Zehnder output versus the phase `phi`, and its
/// extremes versus path-length mismatch.
pub fn mz_phase_scan(gamma: f64, phis: &[f64], path_offsets: &[f64]) -> Result<PhaseScan> {
    if phis.is_empty() && path_offsets.is_empty() {
        return Err(Error::invalid("phase scan needs a phase or path-offset grid"));
    }
    if !(gamma > 0.0) {
        return Err(Error::invalid(format!("phase scan needs gamma > 0, got {gamma}")));
    }
    let nrf_at = |phi: f64| -> Result<f64> { nrf(&stokes_moments_gaussian(&GaussianState::make_phi_state(gamma, phi)?), 2) };
    let at_zero = nrf_at(0.0)?;
    let at_pi = nrf_at(PI)?;
    let offset = 0.5 * (at_zero + at_pi);
    let amplitude = 0.5 * (at_zero - at_pi);
    let points = phis.iter().map(|&phi| Ok(ScanPoint { phi, nrf_s2: nrf_at(phi)? })).collect::<Result<_>>()?;
    let envelope = path_offsets
        .iter()
        .map(|&dl| {
            let v = coherence_visibility(dl);
            EnvelopePoint { path_offset: dl, visibility: v, nrf_min: offset - v * amplitude.abs(), nrf_max: offset + v * amplitude.abs() }
        })
        .collect();
    Ok(PhaseScan { gamma, offset, amplitude, points, envelope })
}
