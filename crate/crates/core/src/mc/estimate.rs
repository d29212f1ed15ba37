use rand_distr::{Binomial, Distribution, Normal, Poisson};
use serde::Serialize;

use super::rng::{pulse_rng, streams};
use num_complex::Complex64;

use super::{map_pulses, simulate_ensemble, Basis, Ensemble, Execution, ExperimentConfig, Source};
use crate::gaussian::{CMatrix, GaussianState, LossMap};
use crate::error::{Error, Result};
use crate::stats::{weighted_line_fit, SampleMoments};
use crate::stokes::{moments_from_samples, stokes_moments_gaussian, StokesMoments};

/// Conversion from detector units to photons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Calibration {
    /// Detector units per photon.
    pub alpha: f64,
    /// Electronic-noise variance of a difference (or sum) signal.
    pub electronic_var: f64,
}

impl Calibration {
    /// The values the detector model was configured with.
    pub fn nominal(cfg: &ExperimentConfig) -> Self {
        Self { alpha: cfg.gain, electronic_var: 2.0 * cfg.electronic_noise.powi(2) }
    }
}

/// The three basis ensembles of a witness measurement.
pub fn simulate_stokes_run(cfg: &ExperimentConfig, exec: Execution) -> Result<[Ensemble; 3]> {
    let [a, b, c] = Basis::ALL.map(|basis| simulate_ensemble(cfg, basis, exec));
    Ok([a?, b?, c?])
}

/// Stokes moments in photon units with jackknife errors. `S0` is pooled
/// over the three ensembles.
pub fn estimate_stokes(run: &[Ensemble; 3], cal: &Calibration) -> Result<StokesMoments> {
    if let Some(e) = run.iter().find(|e| e.len() < 3) {
        return Err(Error::TooFewPulses { needed: 3, got: e.len() });
    }
    let s0: Vec<f64> = run.iter().flat_map(|e| e.pulses.iter().map(|p| p.s0())).collect();
    let [s1, s2, s3] = [0, 1, 2].map(|k| run.iter().find(|e| e.basis.index() == k).map(Ensemble::stokes));
    let (Some(s1), Some(s2), Some(s3)) = (s1, s2, s3) else {
        return Err(Error::invalid("a Stokes run needs one ensemble per basis"));
    };
    moments_from_samples(&s0, [&s1, &s2, &s3], cal.alpha, cal.electronic_var)
}

/// Exact Stokes moments of the simulated model at the nominal gain (pump
/// jitter leaves the singlet witness unchanged and is not included).
pub fn analytic_moments(cfg: &ExperimentConfig) -> Result<StokesMoments> {
    cfg.validate()?;
    match cfg.source {
        Source::Singlet => {
            let loss = LossMap::per_channel(cfg.eta, 1)?;
            let pair = stokes_moments_gaussian(&GaussianState::make_singlet(cfg.gamma)?.apply_loss(&loss)?);
            let n0 = cfg.gamma.sinh().powi(2);
            let thermal = |occupation: [f64; 4]| -> Result<StokesMoments> {
                let n = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(4, occupation.iter().map(|&x| Complex64::from(x))));
                let state = GaussianState::from_matrices(n, CMatrix::zeros(4, 4))?.apply_loss(&loss)?;
                Ok(stokes_moments_gaussian(&state))
            };
            let m = cfg.n_pairs as f64;
            let r = cfg.aperture_ratio;
            let parts = [
                (m * r.min(1.0), pair),
                (m * (r - 1.0).max(0.0), thermal([n0, n0, 0.0, 0.0])?),
                (m * (1.0 - r).max(0.0), thermal([0.0, 0.0, n0, n0])?),
            ];
            let mut total = StokesMoments::zero();
            for (weight, part) in parts {
                total.mean_s0 += weight * part.mean_s0;
                for k in 0..3 {
                    total.mean[k] += weight * part.mean[k];
                    total.var[k] += weight * part.var[k];
                }
            }
            Ok(total)
        }
        Source::Coherent { mean_per_beam } => {
            // detected counts are Poisson in every basis
            let e = cfg.eta;
            let s0 = mean_per_beam * (e[0] + e[2]);
            let mut total = StokesMoments { mean_s0: s0, ..StokesMoments::zero() };
            for basis in Basis::ALL {
                let first = if basis == Basis::S1 { 1.0 } else { 0.5 };
                let plus = mean_per_beam * first * (e[0] + e[2]);
                let minus = mean_per_beam * (1.0 - first) * (e[1] + e[3]);
                total.mean[basis.index()] = plus - minus;
                total.var[basis.index()] = plus + minus;
            }
            Ok(total)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CalibrationPoint {
    /// Mean photon number of the source.
    pub level: f64,
    pub mean_sum: f64,
    pub var_diff: f64,
    pub var_diff_stderr: f64,
    /// `var_diff` minus the fitted line.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationFit {
    pub alpha: f64,
    pub alpha_stderr: f64,
    pub intercept: f64,
    pub intercept_stderr: f64,
    pub points: Vec<CalibrationPoint>,
}

impl CalibrationFit {
    pub fn calibration(&self) -> Calibration {
        Calibration { alpha: self.alpha, electronic_var: self.intercept }
    }
}

/// Shot-noise calibration: a Poissonian source of mean `level` is split
/// 50/50 onto the two detectors (efficiencies of channels AH and AV), and
/// `Var(S-)` is fitted against `<S+>` by weighted least squares.
pub fn calibrate_shot_noise(cfg: &ExperimentConfig, levels: &[f64], exec: Execution) -> Result<CalibrationFit> {
    cfg.validate()?;
    if levels.len() < 3 {
        return Err(Error::Fit(format!("need at least 3 calibration levels, got {}", levels.len())));
    }
    if levels.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
        return Err(Error::Fit("calibration levels must be positive".into()));
    }
    let mut distinct = levels.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::Fit("calibration levels must take at least 3 distinct values".into()));
    }
    if cfg.pulses < 3 {
        return Err(Error::TooFewPulses { needed: 3, got: cfg.pulses });
    }
    let noise = Normal::new(0.0, cfg.electronic_noise).map_err(|e| Error::invalid(e.to_string()))?;
    let mut points = Vec::with_capacity(levels.len());
    for (li, &level) in levels.iter().enumerate() {
        let source = Poisson::new(0.5 * level).map_err(|e| Error::invalid(e.to_string()))?;
        let samples = map_pulses(cfg.pulses, exec, |i| {
            let mut rng = pulse_rng(cfg.seed, streams::CALIBRATION + li as u64, i);
            let mut r = [0.0; 2];
            for (d, out) in r.iter_mut().enumerate() {
                let n = source.sample(&mut rng) as u64;
                let det = if cfg.eta[d] >= 1.0 {
                    n
                } else {
                    Binomial::new(n, cfg.eta[d]).expect("probability in [0, 1]").sample(&mut rng)
                };
                *out = cfg.gain * det as f64 + noise.sample(&mut rng);
            }
            (r[0] + r[1], r[0] - r[1])
        });
        let (sum, diff): (Vec<f64>, Vec<f64>) = samples.into_iter().unzip();
        let s = SampleMoments::new(&sum)?;
        let d = SampleMoments::new(&diff)?;
        points.push(CalibrationPoint { level, mean_sum: s.mean, var_diff: d.var, var_diff_stderr: d.var_stderr, residual: 0.0 });
    }
    let x: Vec<f64> = points.iter().map(|p| p.mean_sum).collect();
    let y: Vec<f64> = points.iter().map(|p| p.var_diff).collect();
    // the spread of <S+> is small next to its range, so it is ignored
    let sigma: Vec<f64> = points.iter().map(|p| p.var_diff_stderr.max(f64::MIN_POSITIVE.sqrt())).collect();
    let fit = weighted_line_fit(&x, &y, &sigma)?;
    for p in &mut points {
        p.residual = p.var_diff - (fit.slope * p.mean_sum + fit.intercept);
    }
    Ok(CalibrationFit {
        alpha: fit.slope,
        alpha_stderr: fit.slope_stderr,
        intercept: fit.intercept,
        intercept_stderr: fit.intercept_stderr,
        points,
    })
}
