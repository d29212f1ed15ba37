//! Sample statistics used by the Monte Carlo estimators.

use crate::error::{Error, Result};

/// Mean and unbiased variance of a sample, with standard errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleMoments {
    pub n: usize,
    pub mean: f64,
    pub var: f64,
    /// Standard error of the mean, `sqrt(var / n)`.
    pub mean_stderr: f64,
    /// Normal-theory standard error of the variance, `sqrt(2 var^2 / (n - 1))`.
    pub var_stderr: f64,
}

impl SampleMoments {
    pub fn new(xs: &[f64]) -> Result<Self> {
        let n = xs.len();
        if n < 2 {
            return Err(Error::TooFewPulses { needed: 2, got: n });
        }
        let nf = n as f64;
        // two-pass for accuracy at large means (1e5 photons, variance ~1e5)
        let mean = xs.iter().sum::<f64>() / nf;
        let ss: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
        let var = ss / (nf - 1.0);
        Ok(Self {
            n,
            mean,
            var,
            mean_stderr: (var / nf).sqrt(),
            var_stderr: (2.0 * var * var / (nf - 1.0)).sqrt(),
        })
    }
}

/// Delete-one jackknife standard error of the unbiased sample variance,
/// computed in a single O(n) pass from the closed-form leave-one-out values.
pub fn jackknife_var_stderr(xs: &[f64]) -> Result<f64> {
    let n = xs.len();
    if n < 3 {
        return Err(Error::TooFewPulses { needed: 3, got: n });
    }
    let nf = n as f64;
    let mean = xs.iter().sum::<f64>() / nf;
    let ss: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
    let shrink = nf / (nf - 1.0);
    let loo = |x: f64| (ss - shrink * (x - mean).powi(2)) / (nf - 2.0);
    let loo_mean = xs.iter().map(|&x| loo(x)).sum::<f64>() / nf;
    let spread: f64 = xs.iter().map(|&x| (loo(x) - loo_mean).powi(2)).sum();
    Ok(((nf - 1.0) / nf * spread).sqrt())
}

/// Weighted least-squares straight line `y = slope x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub intercept_stderr: f64,
}

/// Fits a line with weights `1 / sigma^2`. Standard errors come from the
/// weight matrix (known-variance case).
pub fn weighted_line_fit(x: &[f64], y: &[f64], sigma: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() || x.len() != sigma.len() {
        return Err(Error::Fit("mismatched input lengths".into()));
    }
    if x.len() < 2 {
        return Err(Error::Fit("need at least two points".into()));
    }
    if sigma.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(Error::Fit("point uncertainties must be positive".into()));
    }
    let (mut s, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((&xi, &yi), &si) in x.iter().zip(y).zip(sigma) {
        let w = 1.0 / (si * si);
        s += w;
        sx += w * xi;
        sy += w * yi;
        sxx += w * xi * xi;
        sxy += w * xi * yi;
    }
    let det = s * sxx - sx * sx;
    if !(det.abs() > 1e-12 * s * sxx) {
        return Err(Error::Fit("degenerate abscissae".into()));
    }
    Ok(LineFit {
        slope: (s * sxy - sx * sy) / det,
        intercept: (sxx * sy - sx * sxy) / det,
        slope_stderr: (s / det).sqrt(),
        intercept_stderr: (sxx / det).sqrt(),
    })
}

/// Ordinary least-squares slope and intercept.
pub fn line_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    let fit = weighted_line_fit(x, y, &vec![1.0; x.len()])?;
    Ok((fit.slope, fit.intercept))
}
