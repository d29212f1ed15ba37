//! Truncated Fock-space oracle for the four-mode states.
//!
//! Amplitudes are indexed by `(n_AH, n_AV, n_BH, n_BV)`. The truncation keeps
//! every basis state whose per-beam photon number `n_H + n_V` is at most
//! `n_max`. Polarization rotations and Stokes operators conserve the
//! per-beam photon number, so they act exactly inside the truncated space
//! and the only approximation is the discarded tail of the state itself.
//!
//! Internally the amplitudes form a `D x D` matrix (rows: beam A, columns:
//! beam B) with `D = (n_max + 1)(n_max + 2) / 2`; a beam index enumerates
//! `(n_H, n_V)` block by block in the total `k = n_H + n_V`, with `n_V`
//! running `0..=k` inside a block.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::gaussian::PolarizationRotation;
use crate::stokes::StokesMoments;

pub const DEFAULT_TAIL_BOUND: f64 = 1e-12;

fn beam_index(n_h: usize, n_v: usize) -> usize {
    let k = n_h + n_v;
    k * (k + 1) / 2 + n_v
}

fn beam_dim(n_max: usize) -> usize {
    (n_max + 1) * (n_max + 2) / 2
}

fn check_gain(gamma: f64) -> Result<()> {
    if !gamma.is_finite() || gamma < 0.0 {
        return Err(Error::invalid(format!("gain must be finite and non-negative, got {gamma}")));
    }
    Ok(())
}

/// Norm discarded when both pairings are cut at per-beam total `n_max`:
/// `(1 - q)^2 sum_{k > n_max} (k + 1) q^k` with `q = tanh^2 gamma`.
pub fn truncation_tail(gamma: f64, n_max: usize) -> f64 {
    let q = gamma.tanh().powi(2);
    if q == 0.0 {
        return 0.0;
    }
    let start = (n_max + 1) as f64;
    let one_minus = 1.0 - q;
    // sum_{k >= K} (k + 1) q^k = q^K [ (K + 1) / (1 - q) + q / (1 - q)^2 ]
    one_minus * one_minus * q.powf(start) * ((start + 1.0) / one_minus + q / (one_minus * one_minus))
}

/// Smallest `n_max` whose truncation tail is below `bound`.
pub fn auto_n_max(gamma: f64, bound: f64) -> usize {
    (1..)
        .find(|&n| truncation_tail(gamma, n) < bound)
        .expect("tail decreases geometrically")
}

#[derive(Debug, Clone, PartialEq)]
pub struct FockState {
    n_max: usize,
    coeff: DMatrix<Complex64>,
    tail_bound: f64,
}

impl FockState {
    fn empty(n_max: usize, tail_bound: f64) -> Self {
        let d = beam_dim(n_max);
        Self { n_max, coeff: DMatrix::zeros(d, d), tail_bound }
    }

    fn checked(gamma: f64, n_max: usize, bound: f64) -> Result<f64> {
        check_gain(gamma)?;
        if n_max < 1 {
            return Err(Error::invalid("n_max must be at least 1"));
        }
        let tail = truncation_tail(gamma, n_max);
        if tail > bound {
            return Err(Error::Truncation { tail, bound, n_max });
        }
        Ok(tail)
    }

    /// Singlet with amplitude `(-1)^m tanh^{n+m} gamma / cosh^2 gamma` on
    /// `|n, m, m, n>`, the product of the two Schmidt decompositions.
    pub fn build_singlet(gamma: f64, n_max: usize) -> Result<Self> {
        Self::build_singlet_with_bound(gamma, n_max, DEFAULT_TAIL_BOUND)
    }

    pub fn build_singlet_with_bound(gamma: f64, n_max: usize, bound: f64) -> Result<Self> {
        let tail = Self::checked(gamma, n_max, bound)?;
        let mut state = Self::empty(n_max, tail);
        let t = gamma.tanh();
        let c2 = gamma.cosh().powi(2);
        for n in 0..=n_max {
            for m in 0..=(n_max - n) {
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                let amp = sign * t.powi((n + m) as i32) / c2;
                state.coeff[(beam_index(n, m), beam_index(m, n))] = amp.into();
            }
        }
        Ok(state)
    }

    /// Mach-Zehnder output: amplitude `e^{i m phi} tanh^{n+m} / cosh^2` on
    /// `|n, m, n, m>`.
    pub fn build_phi_state(gamma: f64, phi: f64, n_max: usize) -> Result<Self> {
        Self::build_phi_state_with_bound(gamma, phi, n_max, DEFAULT_TAIL_BOUND)
    }

    pub fn build_phi_state_with_bound(gamma: f64, phi: f64, n_max: usize, bound: f64) -> Result<Self> {
        let tail = Self::checked(gamma, n_max, bound)?;
        let mut state = Self::empty(n_max, tail);
        let t = gamma.tanh();
        let c2 = gamma.cosh().powi(2);
        for n in 0..=n_max {
            for m in 0..=(n_max - n) {
                let amp = Complex64::from_polar(t.powi((n + m) as i32) / c2, m as f64 * phi);
                state.coeff[(beam_index(n, m), beam_index(n, m))] = amp;
            }
        }
        Ok(state)
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Analytic norm deficit of the construction.
    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    pub fn amplitude(&self, n_ah: usize, n_av: usize, n_bh: usize, n_bv: usize) -> Complex64 {
        if n_ah + n_av > self.n_max || n_bh + n_bv > self.n_max {
            return Complex64::new(0.0, 0.0);
        }
        self.coeff[(beam_index(n_ah, n_av), beam_index(n_bh, n_bv))]
    }

    /// Visits every stored amplitude with its photon numbers.
    pub fn for_each_amplitude(&self, mut f: impl FnMut([usize; 4], Complex64)) {
        let labels = beam_labels(self.n_max);
        for (ia, &(ah, av)) in labels.iter().enumerate() {
            for (ib, &(bh, bv)) in labels.iter().enumerate() {
                f([ah, av, bh, bv], self.coeff[(ia, ib)]);
            }
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.coeff.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn inner(&self, other: &FockState) -> Result<Complex64> {
        if self.n_max != other.n_max {
            return Err(Error::invalid("states have different truncations"));
        }
        Ok(self.coeff.iter().zip(other.coeff.iter()).map(|(a, b)| a.conj() * b).sum())
    }

    fn apply_beam_blocks(&self, blocks: &[DMatrix<Complex64>], beam_a: bool) -> DMatrix<Complex64> {
        let d = self.coeff.nrows();
        let mut out = DMatrix::zeros(d, d);
        for (k, op) in blocks.iter().enumerate() {
            let start = k * (k + 1) / 2;
            let len = k + 1;
            if beam_a {
                let rows = self.coeff.rows(start, len);
                out.rows_mut(start, len).copy_from(&(op * rows));
            } else {
                let cols = self.coeff.columns(start, len);
                out.columns_mut(start, len).copy_from(&(cols * op.transpose()));
            }
        }
        out
    }

    fn apply_both(&self, blocks: &[DMatrix<Complex64>]) -> DMatrix<Complex64> {
        self.apply_beam_blocks(blocks, true) + self.apply_beam_blocks(blocks, false)
    }

    /// Exact Stokes moments by operator application, renormalized by the
    /// captured norm.
    pub fn stokes_moments_exact(&self) -> StokesMoments {
        let norm = self.norm_sqr();
        let moment = |k: usize| {
            let blocks = stokes_blocks(k, self.n_max);
            let applied = self.apply_both(&blocks);
            let first: Complex64 = self.coeff.iter().zip(applied.iter()).map(|(a, b)| a.conj() * b).sum();
            let second: f64 = applied.iter().map(|z| z.norm_sqr()).sum();
            (first.re / norm, second / norm)
        };
        let (mean_s0, _) = moment(0);
        let mut mean = [0.0; 3];
        let mut var = [0.0; 3];
        for k in 1..=3 {
            let (m, sq) = moment(k);
            mean[k - 1] = m;
            var[k - 1] = sq - m * m;
        }
        StokesMoments { mean_s0, mean, var, errors: None }
    }

    /// `(<S1^2 + S2^2 + S3^2>, <S0 (S0 + 2)>)` for one beam alone.
    pub fn beam_stokes_identity(&self, beam_a: bool) -> (f64, f64) {
        let norm = self.norm_sqr();
        let sq = |k: usize| -> f64 {
            let applied = self.apply_beam_blocks(&stokes_blocks(k, self.n_max), beam_a);
            applied.iter().map(|z| z.norm_sqr()).sum::<f64>() / norm
        };
        let lhs = sq(1) + sq(2) + sq(3);
        let mut rhs = 0.0;
        self.for_each_amplitude(|[ah, av, bh, bv], amp| {
            let s0 = if beam_a { ah + av } else { bh + bv } as f64;
            rhs += amp.norm_sqr() * s0 * (s0 + 2.0);
        });
        (lhs, rhs / norm)
    }

    /// Covariance matrix of the four photon numbers, order (AH, AV, BH, BV).
    pub fn photon_covariance_exact(&self) -> [[f64; 4]; 4] {
        let norm = self.norm_sqr();
        let mut mean = [0.0; 4];
        let mut second = [[0.0; 4]; 4];
        self.for_each_amplitude(|n, amp| {
            let p = amp.norm_sqr() / norm;
            for i in 0..4 {
                mean[i] += p * n[i] as f64;
                for j in 0..4 {
                    second[i][j] += p * (n[i] * n[j]) as f64;
                }
            }
        });
        let mut cov = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                cov[i][j] = second[i][j] - mean[i] * mean[j];
            }
        }
        cov
    }

    /// Applies the state transformation induced by a polarization
    /// rotation (same Heisenberg convention as the Gaussian engine).
    pub fn apply_rotation_fock(&self, rot: &PolarizationRotation) -> Result<FockState> {
        let rot = PolarizationRotation::new(rot.matrix(), rot.target())?;
        let blocks = rotation_blocks(&rot.matrix(), self.n_max);
        let mut coeff = self.coeff.clone();
        let mut tmp = self.clone();
        use crate::gaussian::RotationTarget::*;
        if matches!(rot.target(), A | Both) {
            coeff = tmp.apply_beam_blocks(&blocks, true);
            tmp.coeff = coeff.clone();
        }
        if matches!(rot.target(), B | Both) {
            coeff = tmp.apply_beam_blocks(&blocks, false);
        }
        Ok(FockState { n_max: self.n_max, coeff, tail_bound: self.tail_bound })
    }

    /// Phase shifts `a_i -> e^{i phi_i} a_i` on (AH, AV, BH, BV).
    pub fn apply_mode_phases_fock(&self, phases: [f64; 4]) -> FockState {
        let labels = beam_labels(self.n_max);
        let mut out = self.clone();
        for (ia, &(ah, av)) in labels.iter().enumerate() {
            for (ib, &(bh, bv)) in labels.iter().enumerate() {
                let arg = ah as f64 * phases[0] + av as f64 * phases[1] + bh as f64 * phases[2] + bv as f64 * phases[3];
                out.coeff[(ia, ib)] *= Complex64::from_polar(1.0, arg);
            }
        }
        out
    }
}

fn beam_labels(n_max: usize) -> Vec<(usize, usize)> {
    (0..=n_max).flat_map(|k| (0..=k).map(move |v| (k - v, v))).collect()
}

/// Per-block matrices of the single-beam `S_k`, indexed by `n_V`.
fn stokes_blocks(k: usize, n_max: usize) -> Vec<DMatrix<Complex64>> {
    let i = Complex64::i();
    (0..=n_max)
        .map(|total| {
            let mut op = DMatrix::zeros(total + 1, total + 1);
            for v in 0..=total {
                let h = total - v;
                match k {
                    0 => op[(v, v)] = (total as f64).into(),
                    1 => op[(v, v)] = (h as f64 - v as f64).into(),
                    _ if v >= 1 => {
                        // a_H^dag a_V |h, v> = sqrt((h + 1) v) |h + 1, v - 1>
                        let amp = ((h + 1) as f64 * v as f64).sqrt();
                        let (raise, lower) = if k == 2 { (amp.into(), amp.into()) } else { (-i * amp, i * amp) };
                        op[(v - 1, v)] = raise;
                        op[(v, v - 1)] = lower;
                    }
                    _ => {}
                }
            }
            op
        })
        .collect()
}

/// Per-block matrices of the induced unitary. With `a -> U a`, creation
/// operators map as `a_H^dag -> U_HH a_H^dag + U_VH a_V^dag` and
/// `a_V^dag -> U_HV a_H^dag + U_VV a_V^dag`.
fn rotation_blocks(u: &[[Complex64; 2]; 2], n_max: usize) -> Vec<DMatrix<Complex64>> {
    let fact: Vec<f64> = (0..=n_max).scan(1.0, |acc, n| {
        if n > 0 {
            *acc *= n as f64;
        }
        Some(*acc)
    }).collect();
    let binom = |n: usize, r: usize| fact[n] / (fact[r] * fact[n - r]);
    let powers = |z: Complex64| {
        let mut p = vec![Complex64::new(1.0, 0.0); n_max + 1];
        for e in 1..=n_max {
            p[e] = p[e - 1] * z;
        }
        p
    };
    let (hh, vh, hv, vv) = (powers(u[0][0]), powers(u[1][0]), powers(u[0][1]), powers(u[1][1]));
    (0..=n_max)
        .map(|total| {
            let mut op = DMatrix::zeros(total + 1, total + 1);
            for v in 0..=total {
                let h = total - v;
                for p in 0..=h {
                    for q in 0..=v {
                        let out_h = p + q;
                        let out_v = total - out_h;
                        let weight = binom(h, p) * binom(v, q) * (fact[out_h] * fact[out_v] / (fact[h] * fact[v])).sqrt();
                        op[(out_v, v)] += hh[p] * vh[h - p] * hv[q] * vv[v - q] * weight;
                    }
                }
            }
            op
        })
        .collect()
}

/// Schmidt coefficients `lambda_n = tanh^{2n} gamma / cosh^2 gamma` of one
/// two-mode squeezer, truncated at `n_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct SchmidtSpectrum {
    pub lambda: Vec<f64>,
}

pub fn schmidt_spectrum(gamma: f64, n_max: usize) -> Result<SchmidtSpectrum> {
    check_gain(gamma)?;
    let q = gamma.tanh().powi(2);
    let c2 = gamma.cosh().powi(2);
    Ok(SchmidtSpectrum { lambda: (0..=n_max).map(|n| q.powi(n as i32) / c2).collect() })
}

impl SchmidtSpectrum {
    /// `(sum lambda)^2 / sum lambda^2`, the inverse purity of the
    /// renormalized truncated spectrum.
    pub fn schmidt_number(&self) -> f64 {
        let s: f64 = self.lambda.iter().sum();
        let s2: f64 = self.lambda.iter().map(|l| l * l).sum();
        s * s / s2
    }

    pub fn captured(&self) -> f64 {
        self.lambda.iter().sum()
    }

    /// Mean photon number of the pair, `sum 2 n lambda_n`.
    pub fn mean_pair_photons(&self) -> f64 {
        self.lambda.iter().enumerate().map(|(n, l)| 2.0 * n as f64 * l).sum()
    }
}
