use rand::Rng;
use rand_distr::{Binomial, Distribution, Gamma, Geometric, Normal, Poisson};

use super::rng::{pulse_rng, streams};
use super::{map_pulses, Basis, Execution, ExperimentConfig, Source};
use crate::error::Result;

/// Below this many modes the per-mode geometric draws are summed directly.
const DIRECT_SUM_MODES: f64 = 32.0;

/// One pulse. Counts are indexed `(A first, A second, B first, B second)`,
/// where "first" is the `+1` eigenpolarization of the pulse's basis (H for
/// `S1`). Readouts are the two detectors: detector 1 collects both "first"
/// outputs, detector 2 both "second" outputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseSample {
    pub generated: [u64; 4],
    pub detected: [u64; 4],
    pub readout: [f64; 2],
}

impl PulseSample {
    pub fn s0(&self) -> f64 {
        self.readout[0] + self.readout[1]
    }

    /// Difference signal, the sampled Stokes parameter of the basis.
    pub fn stokes(&self) -> f64 {
        self.readout[0] - self.readout[1]
    }
}

/// Total photons in `modes` thermal modes with `P(n) = (1 - t^2) t^{2n}`.
/// For many (or fractional) modes the sum is negative binomial, drawn as a
/// Poisson variate with gamma-distributed mean.
fn thermal_sum<R: Rng + ?Sized>(modes: f64, t2: f64, rng: &mut R) -> u64 {
    if modes <= 0.0 || t2 <= 0.0 {
        return 0;
    }
    if modes <= DIRECT_SUM_MODES && modes.fract() == 0.0 {
        let geo = Geometric::new(1.0 - t2).expect("t^2 in (0, 1)");
        return (0..modes as u64).map(|_| geo.sample(rng)).sum();
    }
    let lambda = Gamma::new(modes, t2 / (1.0 - t2)).expect("positive shape and scale").sample(rng);
    poisson(lambda, rng)
}

fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("finite positive mean").sample(rng) as u64
}

fn generate<R: Rng + ?Sized>(cfg: &ExperimentConfig, basis: Basis, rng: &mut R) -> [u64; 4] {
    match cfg.source {
        Source::Singlet => {
            // The singlet is invariant under equal rotations of both beams,
            // so every basis sees the H/V pairing structure.
            let jitter = if cfg.pump_jitter > 0.0 {
                Normal::new(0.0, cfg.pump_jitter).expect("finite jitter").sample(rng)
            } else {
                0.0
            };
            let gamma = (cfg.gamma * (1.0 + jitter)).max(0.0);
            let t2 = gamma.tanh().powi(2);
            let m = cfg.n_pairs as f64;
            let r = cfg.aperture_ratio;
            let matched = m * r.min(1.0);
            let extra_a = m * (r - 1.0).max(0.0);
            let extra_b = m * (1.0 - r).max(0.0);
            let n1 = thermal_sum(matched, t2, rng);
            let n2 = thermal_sum(matched, t2, rng);
            [
                n1 + thermal_sum(extra_a, t2, rng),
                n2 + thermal_sum(extra_a, t2, rng),
                n2 + thermal_sum(extra_b, t2, rng),
                n1 + thermal_sum(extra_b, t2, rng),
            ]
        }
        Source::Coherent { mean_per_beam } => {
            let first = match basis {
                Basis::S1 => mean_per_beam,
                Basis::S2 | Basis::S3 => 0.5 * mean_per_beam,
            };
            let second = mean_per_beam - first;
            [poisson(first, rng), poisson(second, rng), poisson(first, rng), poisson(second, rng)]
        }
    }
}

/// Photon numbers of pulse `pulse_index` in the given basis, before loss.
/// `detected` equals `generated` and the readout is noiseless.
pub fn sample_pulse(cfg: &ExperimentConfig, basis: Basis, pulse_index: u64) -> PulseSample {
    let mut rng = pulse_rng(cfg.seed, streams::BASIS + basis.index() as u64, pulse_index);
    ideal(cfg, generate(cfg, basis, &mut rng))
}

fn ideal(cfg: &ExperimentConfig, generated: [u64; 4]) -> PulseSample {
    let readout = [
        cfg.gain * (generated[0] + generated[2]) as f64,
        cfg.gain * (generated[1] + generated[3]) as f64,
    ];
    PulseSample { generated, detected: generated, readout }
}

/// Binomial loss per channel followed by detector readout with gain and
/// Gaussian electronic noise.
pub fn apply_detection<R: Rng + ?Sized>(sample: PulseSample, cfg: &ExperimentConfig, rng: &mut R) -> PulseSample {
    let mut detected = [0u64; 4];
    for (c, d) in detected.iter_mut().enumerate() {
        let n = sample.generated[c];
        let eta = cfg.eta[c];
        *d = if eta >= 1.0 || n == 0 {
            if eta > 0.0 { n } else { 0 }
        } else {
            Binomial::new(n, eta).expect("probability in [0, 1]").sample(rng)
        };
    }
    let mut readout = [cfg.gain * (detected[0] + detected[2]) as f64, cfg.gain * (detected[1] + detected[3]) as f64];
    if cfg.electronic_noise > 0.0 {
        let noise = Normal::new(0.0, cfg.electronic_noise).expect("finite noise");
        for r in &mut readout {
            *r += noise.sample(rng);
        }
    }
    PulseSample { generated: sample.generated, detected, readout }
}

/// The pulses of one basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub basis: Basis,
    pub pulses: Vec<PulseSample>,
}

impl Ensemble {
    pub fn len(&self) -> usize {
        self.pulses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pulses.is_empty()
    }

    pub fn s0(&self) -> Vec<f64> {
        self.pulses.iter().map(PulseSample::s0).collect()
    }

    pub fn stokes(&self) -> Vec<f64> {
        self.pulses.iter().map(PulseSample::stokes).collect()
    }
}

/// Generates and detects `cfg.pulses` pulses in one basis.
pub fn simulate_ensemble(cfg: &ExperimentConfig, basis: Basis, exec: Execution) -> Result<Ensemble> {
    cfg.validate()?;
    let stream = streams::BASIS + basis.index() as u64;
    let pulses = map_pulses(cfg.pulses, exec, |i| {
        let mut rng = pulse_rng(cfg.seed, stream, i);
        let generated = generate(cfg, basis, &mut rng);
        apply_detection(ideal(cfg, generated), cfg, &mut rng)
    });
    Ok(Ensemble { basis, pulses })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::SampleMoments;

    fn small() -> ExperimentConfig {
        ExperimentConfig { n_pairs: 200, pulses: 4000, electronic_noise: 0.0, ..Default::default() }
    }

    #[test]
    fn zero_gain_gives_no_photons() {
        let cfg = ExperimentConfig { gamma: 0.0, ..small() };
        let e = simulate_ensemble(&cfg, Basis::S1, Execution::Sequential).unwrap();
        assert!(e.pulses.iter().all(|p| p.generated == [0; 4] && p.readout == [0.0; 2]));
    }

    #[test]
    fn pairing_is_exact_before_loss() {
        for jitter in [0.0, 0.2] {
            let cfg = ExperimentConfig { pump_jitter: jitter, ..small() };
            for i in 0..500 {
                let p = sample_pulse(&cfg, Basis::S2, i);
                assert_eq!(p.generated[0], p.generated[3]);
                assert_eq!(p.generated[1], p.generated[2]);
            }
        }
    }

    #[test]
    fn sample_pulse_matches_ensemble_generation() {
        let cfg = small();
        let e = simulate_ensemble(&cfg, Basis::S3, Execution::Sequential).unwrap();
        for i in [0usize, 17, 3999] {
            assert_eq!(sample_pulse(&cfg, Basis::S3, i as u64).generated, e.pulses[i].generated);
        }
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let cfg = ExperimentConfig { electronic_noise: 300.0, pump_jitter: 0.1, ..small() };
        let a = simulate_ensemble(&cfg, Basis::S1, Execution::Sequential).unwrap();
        let b = simulate_ensemble(&cfg, Basis::S1, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn detection_identity_and_bounds() {
        let cfg = ExperimentConfig { eta: [1.0; 4], ..small() };
        let mut rng = pulse_rng(3, 99, 0);
        let p = sample_pulse(&cfg, Basis::S1, 5);
        assert_eq!(apply_detection(p, &cfg, &mut rng), p);
        let lossy = ExperimentConfig { eta: [0.3, 0.5, 0.0, 0.9], ..small() };
        for i in 0..200 {
            let p = apply_detection(sample_pulse(&lossy, Basis::S1, i), &lossy, &mut rng);
            assert!(p.detected.iter().zip(p.generated).all(|(d, g)| *d <= g));
            assert_eq!(p.detected[2], 0);
        }
    }

    #[test]
    fn generated_mean_and_thermal_statistics() {
        // per channel: M geometric modes, mean M t^2/(1-t^2) = M sinh^2
        let cfg = ExperimentConfig { gamma: 0.5, n_pairs: 10, pulses: 40_000, ..small() };
        for m in [10u64, 1000] {
            let cfg = ExperimentConfig { n_pairs: m, ..cfg.clone() };
            let xs: Vec<f64> = (0..cfg.pulses as u64).map(|i| sample_pulse(&cfg, Basis::S1, i).generated[0] as f64).collect();
            let s = SampleMoments::new(&xs).unwrap();
            let n0 = 0.5f64.sinh().powi(2);
            let mean = m as f64 * n0;
            assert!((s.mean - mean).abs() < 4.0 * s.mean_stderr, "{} vs {mean}", s.mean);
            let var = mean * (1.0 + n0);
            assert!((s.var - var).abs() < 4.0 * s.var_stderr, "{} vs {var}", s.var);
        }
    }

    #[test]
    fn readout_noise_variance() {
        let cfg = ExperimentConfig { gamma: 0.0, pulses: 40_000, ..Default::default() };
        let e = simulate_ensemble(&cfg, Basis::S1, Execution::Parallel).unwrap();
        let r0: Vec<f64> = e.pulses.iter().map(|p| p.readout[0]).collect();
        let s = SampleMoments::new(&r0).unwrap();
        assert!((s.var - 300.0 * 300.0).abs() < 4.0 * s.var_stderr, "{}", s.var);
        assert!(s.mean.abs() < 4.0 * s.mean_stderr);
    }

    #[test]
    fn jitter_only_widens_the_sum() {
        let base = ExperimentConfig { n_pairs: 2000, pulses: 20_000, eta: [1.0; 4], ..small() };
        let noisy = ExperimentConfig { pump_jitter: 0.2, ..base.clone() };
        let stats = |cfg: &ExperimentConfig| {
            let e = simulate_ensemble(cfg, Basis::S1, Execution::Parallel).unwrap();
            (SampleMoments::new(&e.s0()).unwrap(), SampleMoments::new(&e.stokes()).unwrap())
        };
        let (s0_base, s_base) = stats(&base);
        let (s0_noisy, s_noisy) = stats(&noisy);
        assert!(s0_noisy.var > 2.0 * s0_base.var);
        // the lossless singlet difference is identically zero either way
        assert_eq!(s_base.var, 0.0);
        assert_eq!(s_noisy.var, 0.0);
        assert_eq!(s_noisy.mean, 0.0);
    }

    #[test]
    fn coherent_control_split() {
        let cfg = ExperimentConfig { source: Source::Coherent { mean_per_beam: 100.0 }, ..small() };
        let p = sample_pulse(&cfg, Basis::S1, 0);
        assert_eq!(p.generated[1], 0);
        assert_eq!(p.generated[3], 0);
        let p = sample_pulse(&cfg, Basis::S2, 0);
        assert!(p.generated[1] > 0 && p.generated[3] > 0);
    }

    #[test]
    fn fractional_modes_use_negative_binomial() {
        let mut rng = pulse_rng(1, 2, 3);
        let t2 = 0.2f64;
        let n = 30_000;
        let xs: Vec<f64> = (0..n).map(|_| thermal_sum(2.5, t2, &mut rng) as f64).collect();
        let s = SampleMoments::new(&xs).unwrap();
        let n0 = t2 / (1.0 - t2);
        assert!((s.mean - 2.5 * n0).abs() < 4.0 * s.mean_stderr);
        assert!((s.var - 2.5 * n0 * (1.0 + n0)).abs() < 4.0 * s.var_stderr);
    }
}
