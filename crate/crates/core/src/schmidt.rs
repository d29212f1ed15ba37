//! Closed-form photon-number entanglement measures.
//!
//! Three partitions are covered: a single two-mode squeezer (`1 + 2 N0`),
//! `M` independent mode pairs addressed separately (product of the single
//! values, reported in the log domain), and the whole multimode ensemble
//! treated jointly, where the Schmidt coefficients are Poissonian with mean
//! `N = 2 M N0`.

use std::f64::consts::{LN_2, PI};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::special::bessel_i0_scaled;

fn check_gain(gamma: f64) -> Result<()> {
    if !gamma.is_finite() || gamma < 0.0 {
        return Err(Error::invalid(format!("gain must be finite and non-negative, got {gamma}")));
    }
    Ok(())
}

/// Mean photon number per mode, `sinh^2 gamma`.
pub fn photons_per_mode(gamma: f64) -> f64 {
    gamma.sinh().powi(2)
}

/// Mean photon number in one beam of `pairs` mode pairs, `N = 2 M N0`.
pub fn mean_photons(gamma: f64, pairs: f64) -> f64 {
    2.0 * pairs * photons_per_mode(gamma)
}

/// Schmidt number of one two-mode squeezer, `1 + 2 sinh^2 gamma`.
pub fn schmidt_single(gamma: f64) -> Result<f64> {
    check_gain(gamma)?;
    Ok(1.0 + 2.0 * photons_per_mode(gamma))
}

/// Natural log of `(1 + 2 N0)^{2M}` for `M` independent mode pairs.
pub fn schmidt_product_ln(gamma: f64, pairs: u64) -> Result<f64> {
    check_gain(gamma)?;
    if pairs == 0 {
        return Err(Error::invalid("number of mode pairs must be at least 1"));
    }
    Ok(2.0 * pairs as f64 * (2.0 * photons_per_mode(gamma)).ln_1p())
}

/// Linear-domain product Schmidt number, when it is representable.
pub fn schmidt_product(gamma: f64, pairs: u64) -> Result<Option<f64>> {
    let ln_k = schmidt_product_ln(gamma, pairs)?;
    let k = ln_k.exp();
    Ok(k.is_finite().then_some(k))
}

/// Schmidt number for the jointly treated ensemble, `e^{2N} / I0(2N)`,
/// evaluated as `1 / (e^{-2N} I0(2N))` so it never overflows.
pub fn schmidt_poisson(mean: f64) -> Result<f64> {
    if !mean.is_finite() || mean < 0.0 {
        return Err(Error::invalid(format!("mean photon number must be >= 0, got {mean}")));
    }
    Ok(1.0 / bessel_i0_scaled(2.0 * mean))
}

/// Large-`N` form `2 sqrt(pi N)`.
pub fn schmidt_asymptotic(mean: f64) -> Result<f64> {
    if !mean.is_finite() || mean <= 0.0 {
        return Err(Error::invalid(format!("asymptotic Schmidt number needs N > 0, got {mean}")));
    }
    Ok(2.0 * (PI * mean).sqrt())
}

/// Width ratio for a Poissonian unconditional distribution and a
/// unit-width conditional one, `2 sqrt(2 N ln 2)`. Only meaningful at large
/// `N`; it vanishes as `N -> 0`.
pub fn operational_r(mean: f64) -> Result<f64> {
    if !mean.is_finite() || mean <= 0.0 {
        return Err(Error::invalid(format!("operational R needs N > 0, got {mean}")));
    }
    Ok(2.0 * (2.0 * mean * LN_2).sqrt())
}

/// Loss-limited width ratio `1 / sqrt(1 - eta)`.
pub fn operational_r_eta(eta: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&eta) {
        return Err(Error::invalid(format!("detection efficiency must be in [0, 1), got {eta}")));
    }
    Ok(1.0 / (1.0 - eta).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntanglementReport {
    pub gamma: f64,
    pub pairs: u64,
    pub mean_photons: f64,
    pub eta: f64,
    pub k_single: f64,
    pub ln_k_product: f64,
    pub k_product: Option<f64>,
    pub k_poisson: f64,
    pub k_asymptotic: f64,
    pub r_ideal: f64,
    pub r_eta: f64,
}

impl EntanglementReport {
    /// All closed-form measures for gain `gamma`, `pairs` mode pairs and
    /// detection efficiency `eta`. With no photons every measure is 1: a
    /// single Schmidt term and two identical delta distributions.
    pub fn compute(gamma: f64, pairs: u64, eta: f64) -> Result<Self> {
        let mean = mean_photons(gamma, pairs as f64);
        let degenerate = mean == 0.0;
        Ok(Self {
            gamma,
            pairs,
            mean_photons: mean,
            eta,
            k_single: schmidt_single(gamma)?,
            ln_k_product: schmidt_product_ln(gamma, pairs)?,
            k_product: schmidt_product(gamma, pairs)?,
            k_poisson: schmidt_poisson(mean)?,
            k_asymptotic: if degenerate { 1.0 } else { schmidt_asymptotic(mean)? },
            r_ideal: if degenerate { 1.0 } else { operational_r(mean)? },
            r_eta: if degenerate {
                1.0
            } else if eta == 1.0 {
                f64::INFINITY
            } else {
                operational_r_eta(eta)?
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_values() {
        assert_eq!(schmidt_single(0.0).unwrap(), 1.0);
        let k = schmidt_single(0.33).unwrap();
        assert!((k - 1.2258).abs() < 1e-4, "{k}");
        assert!(schmidt_single(-1.0).is_err());
    }

    #[test]
    fn product_log_domain() {
        let single = schmidt_single(0.3).unwrap();
        assert!((schmidt_product_ln(0.3, 1).unwrap() - 2.0 * single.ln()).abs() < 1e-14);
        assert_eq!(schmidt_product_ln(0.0, 10).unwrap(), 0.0);
        let big = schmidt_product_ln(0.33, 1_000_000).unwrap();
        assert!((big - 2e6 * 1.2258f64.ln()).abs() / big < 1e-4);
        assert!((big - 4.07e5).abs() < 0.01e5);
        assert_eq!(schmidt_product(0.33, 1_000_000).unwrap(), None);
        assert!(schmidt_product(0.33, 2).unwrap().is_some());
        assert!(schmidt_product_ln(0.3, 0).is_err());
    }

    #[test]
    fn poisson_limits() {
        assert_eq!(schmidt_poisson(0.0).unwrap(), 1.0);
        let k = schmidt_poisson(1e5).unwrap();
        assert!((1119.0..=1123.0).contains(&k), "{k}");
        let asym = schmidt_asymptotic(1e5).unwrap();
        assert!((asym - 1120.998).abs() < 1e-3);
        assert!((k / asym - 1.0).abs() < 1e-3);
        let k100 = schmidt_poisson(100.0).unwrap();
        assert!((k100 / 35.449 - 1.0).abs() < 1e-3, "{k100}");
        assert!((schmidt_asymptotic(1.0 / (4.0 * PI)).unwrap() - 1.0).abs() < 1e-15);
        assert!(schmidt_asymptotic(0.0).is_err());
    }

    #[test]
    fn operational_values() {
        assert!((operational_r(1e5).unwrap() - 744.7).abs() < 0.05);
        assert!((operational_r(1e4).unwrap() - 235.5).abs() < 0.05);
        assert_eq!(operational_r_eta(0.0).unwrap(), 1.0);
        assert!((operational_r_eta(0.57).unwrap() - 1.525).abs() < 5e-4);
        assert!(operational_r_eta(1.0).is_err());
        assert!(operational_r_eta(-0.1).is_err());
    }

    #[test]
    fn monotone_in_arguments() {
        let mut prev = [0.0; 4];
        for i in 1..60 {
            let x = 0.05 * i as f64;
            let now = [
                schmidt_single(x).unwrap(),
                schmidt_poisson(x * 10.0).unwrap(),
                schmidt_asymptotic(x * 10.0).unwrap(),
                operational_r_eta(x / 3.1).unwrap(),
            ];
            for (a, b) in now.iter().zip(prev) {
                assert!(*a >= b);
            }
            prev = now;
        }
    }

    #[test]
    fn partitions_differ() {
        // separately addressed pairs versus the joint ensemble
        let (g, m) = (0.33, 50);
        let joint = schmidt_poisson(mean_photons(g, m as f64)).unwrap();
        let separate = schmidt_product_ln(g, m).unwrap().exp();
        assert!((joint - separate).abs() > 1.0);
        assert!((joint - schmidt_single(g).unwrap()).abs() > 1.0);
    }

    #[test]
    fn degenerate_report() {
        let r = EntanglementReport::compute(0.0, 1000, 0.57).unwrap();
        assert_eq!(r.k_single, 1.0);
        assert_eq!(r.k_poisson, 1.0);
        assert_eq!(r.k_asymptotic, 1.0);
        assert_eq!(r.r_ideal, 1.0);
        assert_eq!(r.r_eta, 1.0);
        assert_eq!(r.ln_k_product, 0.0);
        let lossless = EntanglementReport::compute(0.1, 1000, 1.0).unwrap();
        assert_eq!(lossless.r_eta, f64::INFINITY);
    }
}
