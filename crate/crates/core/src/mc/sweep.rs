use serde::Serialize;

use super::{estimate_stokes, simulate_stokes_run, Calibration, Execution, ExperimentConfig};
use crate::error::{Error, Result};
use crate::stokes::witness;

/// Aperture diameters (beam B fixed) and wavelengths, SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ApertureGeometry {
    pub d2: f64,
    pub lambda_a: f64,
    pub lambda_b: f64,
}

impl Default for ApertureGeometry {
    fn default() -> Self {
        Self { d2: 8.9e-3, lambda_a: 635e-9, lambda_b: 805e-9 }
    }
}

impl ApertureGeometry {
    pub fn ratio(&self, d1: f64) -> f64 {
        (d1 / self.lambda_a) / (self.d2 / self.lambda_b)
    }

    /// `D1` at which both apertures accept the same angular modes.
    pub fn matched_d1(&self) -> f64 {
        self.d2 * self.lambda_a / self.lambda_b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub d1: f64,
    pub ratio: f64,
    /// Fraction of the larger acceptance that is pair-matched.
    pub matched_fraction: f64,
    pub lhs: f64,
    pub stderr: f64,
}

/// Witness versus aperture diameter `D1`. Every point reuses the seed, so
/// neighbouring points share their random numbers and the curve is smooth.
pub fn mode_mismatch_sweep(
    cfg: &ExperimentConfig,
    geometry: &ApertureGeometry,
    d1_values: &[f64],
    exec: Execution,
) -> Result<Vec<SweepPoint>> {
    if d1_values.is_empty() {
        return Err(Error::invalid("aperture sweep needs at least one diameter"));
    }
    d1_values
        .iter()
        .map(|&d1| {
            if !(d1.is_finite() && d1 > 0.0) {
                return Err(Error::invalid(format!("aperture diameter must be > 0, got {d1}")));
            }
            let ratio = geometry.ratio(d1);
            let point_cfg = ExperimentConfig { aperture_ratio: ratio, ..cfg.clone() };
            let run = simulate_stokes_run(&point_cfg, exec)?;
            let w = witness(&estimate_stokes(&run, &Calibration::nominal(&point_cfg))?)?;
            Ok(SweepPoint {
                d1,
                ratio,
                matched_fraction: ratio.min(1.0 / ratio),
                lhs: w.lhs,
                stderr: w.stderr.unwrap_or(f64::NAN),
            })
        })
        .collect()
}
