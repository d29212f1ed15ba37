//! Stokes observables, noise reduction factors and the variance-based
//! separability witness `sum_i Var(S_i) / <S0> >= 2`.
//!
//! Per beam, with modes `(H, V)`:
//!
//! ```text
//! S0 = n_H + n_V
//! S1 = n_H - n_V                       (sigma_z)
//! S2 = a_H^dag a_V + a_V^dag a_H       (sigma_x, diagonal basis)
//! S3 = -i a_H^dag a_V + i a_V^dag a_H  (sigma_y, circular basis)
//! ```
//!
//! The total Stokes vector is the sum over beams A and B and over all mode
//! pairs. The same convention is used by the Fock oracle and by the Monte
//! Carlo, which measures `S_k` as the difference of the two outputs of a
//! polarizer in the eigenbasis of the corresponding Pauli matrix.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Binomial, Distribution, Geometric, Poisson};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gaussian::{Beam, CMatrix, GaussianState, ModeId, Pol};
use crate::stats::{jackknife_var_stderr, SampleMoments};

/// The separability bound on the witness.
pub const WITNESS_THRESHOLD: f64 = 2.0;

/// 2x2 coefficient matrix `K` of `S_k = sum K_ij a_i^dag a_j` on one beam,
/// `k = 0..=3`.
pub fn pauli(k: usize) -> [[Complex64; 2]; 2] {
    let (o, z, i) = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), Complex64::i());
    match k {
        0 => [[o, z], [z, o]],
        1 => [[o, z], [z, -o]],
        2 => [[z, o], [o, z]],
        3 => [[z, -i], [i, z]],
        _ => panic!("Stokes index {k} out of range 0..=3"),
    }
}

/// Mode-space coefficient matrix of the total `S_k` (both beams, all pairs).
pub fn stokes_operator(k: usize, n_pairs: usize) -> CMatrix {
    beam_stokes_operator(k, n_pairs, &[Beam::A, Beam::B])
}

/// Coefficient matrix of `S_k` restricted to the given beams.
pub fn beam_stokes_operator(k: usize, n_pairs: usize, beams: &[Beam]) -> CMatrix {
    let p = pauli(k);
    let mut op = CMatrix::zeros(4 * n_pairs, 4 * n_pairs);
    for pair in 0..n_pairs {
        for &beam in beams {
            let idx = [ModeId::new(pair, beam, Pol::H).index(), ModeId::new(pair, beam, Pol::V).index()];
            for r in 0..2 {
                for c in 0..2 {
                    op[(idx[r], idx[c])] = p[r][c];
                }
            }
        }
    }
    op
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StokesErrors {
    pub mean_s0: f64,
    pub var: [f64; 3],
}

/// Means of `S0..S3` and variances of `S1..S3`; index 0 of `mean` and `var`
/// is `S1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StokesMoments {
    pub mean_s0: f64,
    pub mean: [f64; 3],
    pub var: [f64; 3],
    pub errors: Option<StokesErrors>,
}

impl StokesMoments {
    pub fn zero() -> Self {
        Self { mean_s0: 0.0, mean: [0.0; 3], var: [0.0; 3], errors: None }
    }

    pub fn var_sum(&self) -> f64 {
        self.var.iter().sum()
    }
}

/// Exact Stokes moments of a Gaussian state from its correlation matrices.
pub fn stokes_moments_gaussian(state: &GaussianState) -> StokesMoments {
    let pairs = state.n_pairs();
    let s0 = stokes_operator(0, pairs);
    let mut mean = [0.0; 3];
    let mut var = [0.0; 3];
    for k in 1..=3 {
        let op = stokes_operator(k, pairs);
        mean[k - 1] = state.quadratic_mean(&op).re;
        var[k - 1] = state.quadratic_covariance(&op, &op).re;
    }
    StokesMoments { mean_s0: state.quadratic_mean(&s0).re, mean, var, errors: None }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WitnessResult {
    pub lhs: f64,
    pub threshold: f64,
    pub violated: bool,
    pub stderr: Option<f64>,
    /// Standard deviations below the threshold; only for sampled input.
    pub sigma_below: Option<f64>,
}

fn check_s0(moments: &StokesMoments) -> Result<()> {
    if !(moments.mean_s0 > 0.0) {
        return Err(Error::UndefinedWitness);
    }
    Ok(())
}

pub fn witness(moments: &StokesMoments) -> Result<WitnessResult> {
    check_s0(moments)?;
    let m0 = moments.mean_s0;
    let lhs = moments.var_sum() / m0;
    let stderr = moments.errors.map(|e| {
        let var_part: f64 = e.var.iter().map(|s| s * s).sum::<f64>() / (m0 * m0);
        (var_part + (lhs * e.mean_s0 / m0).powi(2)).sqrt()
    });
    let sigma_below = stderr.map(|se| {
        if se > 0.0 {
            (WITNESS_THRESHOLD - lhs) / se
        } else if lhs < WITNESS_THRESHOLD {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        }
    });
    Ok(WitnessResult {
        lhs,
        threshold: WITNESS_THRESHOLD,
        violated: lhs < WITNESS_THRESHOLD,
        stderr,
        sigma_below,
    })
}

/// Noise reduction factor `Var(S_i) / <S0>` for `i = 1..=3`.
pub fn nrf(moments: &StokesMoments, i: usize) -> Result<f64> {
    if !(1..=3).contains(&i) {
        return Err(Error::invalid(format!("Stokes index {i} out of range 1..=3")));
    }
    check_s0(moments)?;
    Ok(moments.var[i - 1] / moments.mean_s0)
}

/// Sums the moments of statistically independent mode pairs.
pub fn aggregate_modes(per_pair: &[StokesMoments]) -> Result<StokesMoments> {
    let (first, rest) = per_pair.split_first().ok_or_else(|| Error::invalid("no mode pairs to aggregate"))?;
    Ok(rest.iter().fold(*first, |acc, m| {
        let errors = match (acc.errors, m.errors) {
            (Some(a), Some(b)) => Some(StokesErrors {
                mean_s0: a.mean_s0.hypot(b.mean_s0),
                var: [a.var[0].hypot(b.var[0]), a.var[1].hypot(b.var[1]), a.var[2].hypot(b.var[2])],
            }),
            _ => None,
        };
        StokesMoments {
            mean_s0: acc.mean_s0 + m.mean_s0,
            mean: [acc.mean[0] + m.mean[0], acc.mean[1] + m.mean[1], acc.mean[2] + m.mean[2]],
            var: [acc.var[0] + m.var[0], acc.var[1] + m.var[1], acc.var[2] + m.var[2]],
            errors,
        }
    }))
}

/// Moments with jackknife standard errors from per-basis samples of `S_k`
/// (`s_k[0]` holds the `S1` pulses) and pooled samples of `S0`.
///
/// `noise_var` is subtracted from each Stokes variance and both the
/// variances and the means are divided by the calibration slope `alpha`
/// (squared for variances), converting detector units into photons.
pub fn moments_from_samples(s0: &[f64], s_k: [&[f64]; 3], alpha: f64, noise_var: f64) -> Result<StokesMoments> {
    let m0 = SampleMoments::new(s0)?;
    let mut mean = [0.0; 3];
    let mut var = [0.0; 3];
    let mut var_err = [0.0; 3];
    for (k, xs) in s_k.iter().enumerate() {
        let m = SampleMoments::new(xs)?;
        mean[k] = m.mean / alpha;
        var[k] = (m.var - noise_var) / (alpha * alpha);
        var_err[k] = jackknife_var_stderr(xs)? / (alpha * alpha);
    }
    Ok(StokesMoments {
        mean_s0: m0.mean / alpha,
        mean,
        var,
        errors: Some(StokesErrors { mean_s0: m0.mean_stderr / alpha, var: var_err }),
    })
}

/// State of one beam in a separable component: a polarized coherent state
/// or unpolarized thermal light.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BeamState {
    /// Coherent state with mean photon number `mean` and unit Stokes
    /// direction `direction`.
    Coherent { mean: f64, direction: [f64; 3] },
    /// Independent thermal light in two orthogonal polarizations,
    /// `mean / 2` photons each.
    Thermal { mean: f64 },
    /// `photons` photons all in the polarization `direction` (a
    /// spin-coherent state). Saturates the separable bound.
    Aligned { photons: u64, direction: [f64; 3] },
}

impl BeamState {
    fn mean(&self) -> f64 {
        match *self {
            BeamState::Coherent { mean, .. } | BeamState::Thermal { mean } => mean,
            BeamState::Aligned { photons, .. } => photons as f64,
        }
    }

    /// `<S_k>` for k = 1..=3.
    fn stokes_mean(&self, k: usize) -> f64 {
        match *self {
            BeamState::Coherent { mean, direction } => mean * direction[k - 1],
            BeamState::Thermal { .. } => 0.0,
            BeamState::Aligned { photons, direction } => photons as f64 * direction[k - 1],
        }
    }

    /// `Var(S_k)`: shot noise for coherent light, `mu + mu^2 / 2` for
    /// unpolarized thermal light, binomial partition noise
    /// `n (1 - d_k^2)` for aligned photons.
    fn stokes_var(&self, k: usize) -> f64 {
        match *self {
            BeamState::Coherent { mean, .. } => mean,
            BeamState::Thermal { mean } => mean + 0.5 * mean * mean,
            BeamState::Aligned { photons, direction } => photons as f64 * (1.0 - direction[k - 1].powi(2)),
        }
    }

    /// Counts in the `+` and `-` outputs of a basis-`k` polarizer.
    fn sample_outputs<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> (f64, f64) {
        match *self {
            BeamState::Coherent { mean, direction } => {
                let plus = 0.5 * mean * (1.0 + direction[k - 1]);
                let minus = 0.5 * mean * (1.0 - direction[k - 1]);
                (poisson(plus, rng), poisson(minus, rng))
            }
            BeamState::Thermal { mean } => (thermal(0.5 * mean, rng), thermal(0.5 * mean, rng)),
            BeamState::Aligned { photons, direction } => {
                let p = (0.5 * (1.0 + direction[k - 1])).clamp(0.0, 1.0);
                let plus = Binomial::new(photons, p).expect("valid probability").sample(rng);
                (plus as f64, (photons - plus) as f64)
            }
        }
    }
}

fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> f64 {
    if mean <= 0.0 {
        return 0.0;
    }
    Poisson::new(mean).expect("positive finite mean").sample(rng)
}

fn thermal<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> f64 {
    if mean <= 0.0 {
        return 0.0;
    }
    // Bose-Einstein: P(n) = p (1 - p)^n with p = 1 / (1 + mean)
    Geometric::new(1.0 / (1.0 + mean)).expect("valid probability").sample(rng) as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparableComponent {
    pub weight: f64,
    pub a: BeamState,
    pub b: BeamState,
}

/// Classical mixture `sum_j p_j rho_j^A (x) rho_j^B` of single-mode-pair
/// product states.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparableEnsemble {
    components: Vec<SeparableComponent>,
}

impl SeparableEnsemble {
    pub fn new(components: Vec<SeparableComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::invalid("separable ensemble needs at least one component"));
        }
        if components.iter().any(|c| !(c.weight >= 0.0)) {
            return Err(Error::invalid("mixing weights must be non-negative"));
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("mixing weights sum to {total}, not 1")));
        }
        for c in &components {
            for beam in [c.a, c.b] {
                if let BeamState::Coherent { direction, .. } | BeamState::Aligned { direction, .. } = beam {
                    let norm = direction.iter().map(|d| d * d).sum::<f64>().sqrt();
                    if (norm - 1.0).abs() > 1e-9 {
                        return Err(Error::invalid("coherent Stokes direction must be a unit vector"));
                    }
                }
                if !(beam.mean() >= 0.0 && beam.mean().is_finite()) {
                    return Err(Error::invalid("beam mean photon number must be finite and >= 0"));
                }
            }
        }
        Ok(Self { components })
    }

    /// Random mixture with `n` components, means up to `max_mean` photons.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, n: usize, max_mean: f64) -> Self {
        let mut weights: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 1e-3).collect();
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        let beam = |rng: &mut R| {
            let mean = max_mean * rng.random::<f64>();
            let z: f64 = rng.random_range(-1.0..1.0);
            let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let r = (1.0 - z * z).sqrt();
            let direction = [r * phi.cos(), r * phi.sin(), z];
            match rng.random_range(0..3) {
                0 => BeamState::Coherent { mean, direction },
                1 => BeamState::Thermal { mean },
                _ => BeamState::Aligned { photons: mean.round() as u64, direction },
            }
        };
        let components = weights
            .into_iter()
            .map(|weight| SeparableComponent { weight, a: beam(rng), b: beam(rng) })
            .collect();
        Self { components }
    }

    pub fn components(&self) -> &[SeparableComponent] {
        &self.components
    }

    /// Exact moments of the mixture.
    pub fn analytic_moments(&self) -> StokesMoments {
        let mut mean_s0 = 0.0;
        let mut mean = [0.0; 3];
        let mut second = [0.0; 3];
        for c in &self.components {
            mean_s0 += c.weight * (c.a.mean() + c.b.mean());
            for k in 1..=3 {
                let (ma, mb) = (c.a.stokes_mean(k), c.b.stokes_mean(k));
                let sq_a = c.a.stokes_var(k) + ma * ma;
                let sq_b = c.b.stokes_var(k) + mb * mb;
                mean[k - 1] += c.weight * (ma + mb);
                second[k - 1] += c.weight * (sq_a + sq_b + 2.0 * ma * mb);
            }
        }
        let var = [0, 1, 2].map(|i| second[i] - mean[i] * mean[i]);
        StokesMoments { mean_s0, mean, var, errors: None }
    }

    fn pick<R: Rng + ?Sized>(&self, rng: &mut R) -> &SeparableComponent {
        let mut u: f64 = rng.random();
        for c in &self.components {
            if u < c.weight {
                return c;
            }
            u -= c.weight;
        }
        self.components.last().expect("non-empty")
    }
}

/// Monte Carlo moments of a separable ensemble: `pulses` pulses per Stokes
/// basis, each drawing a mixture component and then photon counts.
pub fn sample_separable_ensemble<R: Rng + ?Sized>(
    ensemble: &SeparableEnsemble,
    pulses: usize,
    rng: &mut R,
) -> Result<StokesMoments> {
    if pulses < 2 {
        return Err(Error::TooFewPulses { needed: 2, got: pulses });
    }
    let mut s0 = Vec::with_capacity(3 * pulses);
    let mut s_k: [Vec<f64>; 3] = Default::default();
    for k in 1..=3 {
        for _ in 0..pulses {
            let c = ensemble.pick(rng);
            let (ap, am) = c.a.sample_outputs(k, rng);
            let (bp, bm) = c.b.sample_outputs(k, rng);
            s0.push(ap + am + bp + bm);
            s_k[k - 1].push(ap - am + bp - bm);
        }
    }
    moments_from_samples(&s0, [&s_k[0], &s_k[1], &s_k[2]], 1.0, 0.0)
}
