//! Zero-mean Gaussian states of the four-mode polarization system.
//!
//! A state is stored through its normal and anomalous correlation matrices,
//!
//! ```text
//! N[i][j] = <a_i^dag a_j>,    M[i][j] = <a_i a_j>,
//! ```
//!
//! with the displacement fixed to zero. Modes are laid out pair by pair in
//! the fixed order `(AH, AV, BH, BV)`, so mode `4 * k + 2 * beam + pol`
//! belongs to mode pair `k`.
//!
//! A mode transform in the Heisenberg picture `a_i -> sum_j U_ij a_j` maps
//! the matrices as `N -> conj(U) N U^T` and `M -> U M U^T`. Phase shifts are
//! the diagonal special case. Photon-number moments of quadratic forms are
//! evaluated with Wick's theorem directly on `N` and `M`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Tolerance for unitarity, hermiticity and symmetry checks.
pub const STRUCTURE_TOL: f64 = 1e-12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Beam {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pol {
    H,
    V,
}

/// Label of a single optical mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModeId {
    pub pair_index: usize,
    pub beam: Beam,
    pub pol: Pol,
}

impl ModeId {
    pub const fn new(pair_index: usize, beam: Beam, pol: Pol) -> Self {
        Self { pair_index, beam, pol }
    }

    pub const AH: ModeId = ModeId::new(0, Beam::A, Pol::H);
    pub const AV: ModeId = ModeId::new(0, Beam::A, Pol::V);
    pub const BH: ModeId = ModeId::new(0, Beam::B, Pol::H);
    pub const BV: ModeId = ModeId::new(0, Beam::B, Pol::V);

    /// Index into the correlation matrices.
    pub fn index(&self) -> usize {
        let beam = match self.beam {
            Beam::A => 0,
            Beam::B => 2,
        };
        let pol = match self.pol {
            Pol::H => 0,
            Pol::V => 1,
        };
        4 * self.pair_index + beam + pol
    }

    pub fn from_index(index: usize) -> Self {
        let beam = if index % 4 < 2 { Beam::A } else { Beam::B };
        let pol = if index.is_multiple_of(2) { Pol::H } else { Pol::V };
        Self::new(index / 4, beam, pol)
    }
}

impl fmt::Display for ModeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}{:?}[{}]", self.beam, self.pol, self.pair_index)
    }
}

/// Which beams a polarization rotation acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RotationTarget {
    A,
    B,
    Both,
}

impl RotationTarget {
    fn includes(self, beam: Beam) -> bool {
        matches!(
            (self, beam),
            (RotationTarget::Both, _) | (RotationTarget::A, Beam::A) | (RotationTarget::B, Beam::B)
        )
    }
}

/// A 2x2 unitary acting on the `(H, V)` annihilation operators of one or
/// both beams, `a_H -> u00 a_H + u01 a_V`, `a_V -> u10 a_H + u11 a_V`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarizationRotation {
    u: [[Complex64; 2]; 2],
    target: RotationTarget,
}

impl PolarizationRotation {
    pub fn new(u: [[Complex64; 2]; 2], target: RotationTarget) -> Result<Self> {
        if u.iter().flatten().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::invalid("rotation matrix has non-finite entries"));
        }
        // U U^dag = I
        for r in 0..2 {
            for c in 0..2 {
                let dot = u[r][0] * u[c][0].conj() + u[r][1] * u[c][1].conj();
                let expected = if r == c { 1.0 } else { 0.0 };
                if (dot - expected).norm() > STRUCTURE_TOL {
                    return Err(Error::invalid(format!(
                        "rotation matrix is not unitary (deviation {:e})",
                        (dot - expected).norm()
                    )));
                }
            }
        }
        Ok(Self { u, target })
    }

    pub fn identity(target: RotationTarget) -> Self {
        Self { u: [[ONE, ZERO], [ZERO, ONE]], target }
    }

    /// Real rotation of the polarization frame by `theta` radians.
    pub fn linear(theta: f64, target: RotationTarget) -> Self {
        let (s, c) = theta.sin_cos();
        Self {
            u: [[c.into(), s.into()], [(-s).into(), c.into()]],
            target,
        }
    }

    /// Half-wave plate with its fast axis at `theta` to horizontal.
    pub fn half_wave(theta: f64, target: RotationTarget) -> Self {
        let (s, c) = (2.0 * theta).sin_cos();
        Self {
            u: [[c.into(), s.into()], [s.into(), (-c).into()]],
            target,
        }
    }

    /// Quarter-wave plate with its fast axis at `theta` to horizontal.
    pub fn quarter_wave(theta: f64, target: RotationTarget) -> Self {
        let (s, c) = theta.sin_cos();
        let i = Complex64::i();
        // R(-theta) diag(1, i) R(theta)
        let u00 = c * c + i * s * s;
        let u01 = (ONE - i) * (c * s);
        let u11 = s * s + i * c * c;
        Self { u: [[u00, u01], [u01, u11]], target }
    }

    /// General SU(2)-times-phase element,
    /// `e^{i alpha} [[e^{i beta} cos t, e^{i gamma} sin t], [-e^{-i gamma} sin t, e^{-i beta} cos t]]`.
    pub fn from_angles(alpha: f64, beta: f64, gamma: f64, t: f64, target: RotationTarget) -> Self {
        let g = Complex64::from_polar(1.0, alpha);
        let (s, c) = t.sin_cos();
        Self {
            u: [
                [g * Complex64::from_polar(c, beta), g * Complex64::from_polar(s, gamma)],
                [-g * Complex64::from_polar(s, -gamma), g * Complex64::from_polar(c, -beta)],
            ],
            target,
        }
    }

    pub fn matrix(&self) -> [[Complex64; 2]; 2] {
        self.u
    }

    pub fn target(&self) -> RotationTarget {
        self.target
    }

    pub fn with_target(mut self, target: RotationTarget) -> Self {
        self.target = target;
        self
    }

    pub fn determinant(&self) -> Complex64 {
        self.u[0][0] * self.u[1][1] - self.u[0][1] * self.u[1][0]
    }

    /// Full mode-space matrix for a state with `n_pairs` mode pairs.
    pub fn mode_matrix(&self, n_pairs: usize) -> CMatrix {
        let n = 4 * n_pairs;
        let mut full = CMatrix::identity(n, n);
        for pair in 0..n_pairs {
            for beam in [Beam::A, Beam::B] {
                if !self.target.includes(beam) {
                    continue;
                }
                let h = ModeId::new(pair, beam, Pol::H).index();
                let v = ModeId::new(pair, beam, Pol::V).index();
                full[(h, h)] = self.u[0][0];
                full[(h, v)] = self.u[0][1];
                full[(v, h)] = self.u[1][0];
                full[(v, v)] = self.u[1][1];
            }
        }
        full
    }
}

/// Per-mode power transmissions of independent beamsplitter losses.
#[derive(Debug, Clone, PartialEq)]
pub struct LossMap {
    eta: Vec<f64>,
}

impl LossMap {
    pub fn new(eta: Vec<f64>) -> Result<Self> {
        if let Some(bad) = eta.iter().find(|e| !(0.0..=1.0).contains(*e)) {
            return Err(Error::invalid(format!("transmission {bad} outside [0, 1]")));
        }
        Ok(Self { eta })
    }

    pub fn uniform(n_modes: usize, eta: f64) -> Result<Self> {
        Self::new(vec![eta; n_modes])
    }

    /// Same `(AH, AV, BH, BV)` transmissions for every mode pair.
    pub fn per_channel(channels: [f64; 4], n_pairs: usize) -> Result<Self> {
        Self::new(channels.iter().copied().cycle().take(4 * n_pairs).collect())
    }

    pub fn transmissions(&self) -> &[f64] {
        &self.eta
    }
}

/// The three triplet macroscopic Bell states.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Triplet {
    PsiPlus,
    PhiMinus,
    PhiPlus,
}

impl Triplet {
    pub const ALL: [Triplet; 3] = [Triplet::PsiPlus, Triplet::PhiMinus, Triplet::PhiPlus];

    /// Local unitary on beam B that maps this triplet onto the singlet
    /// pattern (up to a global phase). Applying the separability witness
    /// after this rotation is the witness in the triplet's own frame.
    pub fn singlet_frame(self) -> PolarizationRotation {
        let (o, z) = (ONE, ZERO);
        let u = match self {
            Triplet::PsiPlus => [[-o, z], [z, o]],
            Triplet::PhiMinus => [[z, o], [o, z]],
            Triplet::PhiPlus => [[z, o], [-o, z]],
        };
        PolarizationRotation { u, target: RotationTarget::B }
    }
}

impl FromStr for Triplet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "psiplus" => Ok(Triplet::PsiPlus),
            "phiminus" => Ok(Triplet::PhiMinus),
            "phiplus" => Ok(Triplet::PhiPlus),
            _ => Err(Error::invalid(format!("unknown triplet kind `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    n: CMatrix,
    m: CMatrix,
}

fn check_gain(gamma: f64) -> Result<()> {
    if !gamma.is_finite() || gamma < 0.0 {
        return Err(Error::invalid(format!("gain must be finite and non-negative, got {gamma}")));
    }
    Ok(())
}

/// sinh^2(gamma) and cosh(gamma) sinh(gamma).
fn squeeze_moments(gamma: f64) -> (f64, f64) {
    let s = gamma.sinh();
    (s * s, s * gamma.cosh())
}

impl GaussianState {
    pub fn vacuum(n_pairs: usize) -> Self {
        let n = 4 * n_pairs;
        Self { n: CMatrix::zeros(n, n), m: CMatrix::zeros(n, n) }
    }

    /// Builds a state from explicit correlation matrices, checking structure.
    pub fn from_matrices(n: CMatrix, m: CMatrix) -> Result<Self> {
        if !n.is_square() || n.shape() != m.shape() || !n.nrows().is_multiple_of(4) {
            return Err(Error::invalid("correlation matrices must be square, equal-sized, 4k x 4k"));
        }
        let state = Self { n, m };
        state.check_structure(1e-10)?;
        Ok(state)
    }

    /// Macroscopic singlet: two-mode squeezing on (AH, BV) and, with a
    /// minus sign, on (AV, BH).
    pub fn make_singlet(gamma: f64) -> Result<Self> {
        Self::make_singlet_unbalanced(gamma, gamma)
    }

    /// Singlet-type state with separate gains for the (AH, BV) and (AV, BH)
    /// pairings.
    pub fn make_singlet_unbalanced(gamma_hv: f64, gamma_vh: f64) -> Result<Self> {
        check_gain(gamma_hv)?;
        check_gain(gamma_vh)?;
        let mut state = Self::vacuum(1);
        state.squeeze_pair(ModeId::AH, ModeId::BV, gamma_hv, ONE);
        state.squeeze_pair(ModeId::AV, ModeId::BH, gamma_vh, -ONE);
        Ok(state)
    }

    /// Output of the Mach-Zehnder source with relative phase `phi`
    /// between the two crystals: squeezing on (AH, BH) and `e^{i phi}` on
    /// (AV, BV).
    pub fn make_phi_state(gamma: f64, phi: f64) -> Result<Self> {
        check_gain(gamma)?;
        if !phi.is_finite() {
            return Err(Error::invalid("phase must be finite"));
        }
        let mut state = Self::vacuum(1);
        state.squeeze_pair(ModeId::AH, ModeId::BH, gamma, ONE);
        state.squeeze_pair(ModeId::AV, ModeId::BV, gamma, Complex64::from_polar(1.0, phi));
        Ok(state)
    }

    pub fn make_triplet(kind: Triplet, gamma: f64) -> Result<Self> {
        match kind {
            Triplet::PsiPlus => {
                check_gain(gamma)?;
                let mut state = Self::vacuum(1);
                state.squeeze_pair(ModeId::AH, ModeId::BV, gamma, ONE);
                state.squeeze_pair(ModeId::AV, ModeId::BH, gamma, ONE);
                Ok(state)
            }
            Triplet::PhiMinus => Self::make_phi_state(gamma, std::f64::consts::PI),
            Triplet::PhiPlus => Self::make_phi_state(gamma, 0.0),
        }
    }

    fn squeeze_pair(&mut self, a: ModeId, b: ModeId, gamma: f64, phase: Complex64) {
        let (occupation, anomalous) = squeeze_moments(gamma);
        let (i, j) = (a.index(), b.index());
        self.n[(i, i)] += occupation;
        self.n[(j, j)] += occupation;
        self.m[(i, j)] = phase * anomalous;
        self.m[(j, i)] = phase * anomalous;
    }

    /// Direct sum: the modes of `other` are appended as further mode pairs.
    pub fn direct_sum(&self, other: &GaussianState) -> GaussianState {
        let (p, q) = (self.n_modes(), other.n_modes());
        let mut n = CMatrix::zeros(p + q, p + q);
        let mut m = CMatrix::zeros(p + q, p + q);
        n.view_mut((0, 0), (p, p)).copy_from(&self.n);
        n.view_mut((p, p), (q, q)).copy_from(&other.n);
        m.view_mut((0, 0), (p, p)).copy_from(&self.m);
        m.view_mut((p, p), (q, q)).copy_from(&other.m);
        GaussianState { n, m }
    }

    /// `copies` independent copies of this state.
    pub fn replicate(&self, copies: usize) -> GaussianState {
        (1..copies).fold(self.clone(), |acc, _| acc.direct_sum(self))
    }

    pub fn n_modes(&self) -> usize {
        self.n.nrows()
    }

    pub fn n_pairs(&self) -> usize {
        self.n_modes() / 4
    }

    pub fn normal(&self) -> &CMatrix {
        &self.n
    }

    pub fn anomalous(&self) -> &CMatrix {
        &self.m
    }

    pub fn mean_photons(&self) -> f64 {
        self.n.diagonal().iter().map(|z| z.re).sum()
    }

    pub fn apply_rotation(&self, rot: &PolarizationRotation) -> Result<GaussianState> {
        // Re-validate: the fields are private but a rotation may have been
        // built from a matrix that only just passed.
        PolarizationRotation::new(rot.u, rot.target)?;
        Ok(self.apply_mode_transform(&rot.mode_matrix(self.n_pairs())))
    }

    /// Heisenberg-picture transform `a -> U a` with a full mode-space unitary.
    pub fn apply_mode_transform(&self, u: &CMatrix) -> GaussianState {
        let ut = u.transpose();
        GaussianState {
            n: u.conjugate() * &self.n * &ut,
            m: u * &self.m * &ut,
        }
    }

    pub fn apply_loss(&self, loss: &LossMap) -> Result<GaussianState> {
        if loss.eta.len() != self.n_modes() {
            return Err(Error::invalid(format!(
                "loss map has {} entries for {} modes",
                loss.eta.len(),
                self.n_modes()
            )));
        }
        let amp: Vec<f64> = loss.eta.iter().map(|e| e.sqrt()).collect();
        let scale = |mat: &CMatrix| CMatrix::from_fn(mat.nrows(), mat.ncols(), |i, j| mat[(i, j)] * (amp[i] * amp[j]));
        Ok(GaussianState { n: scale(&self.n), m: scale(&self.m) })
    }

    pub fn apply_mode_phases(&self, phases: &[f64]) -> Result<GaussianState> {
        if phases.len() != self.n_modes() {
            return Err(Error::invalid(format!(
                "{} phases given for {} modes",
                phases.len(),
                self.n_modes()
            )));
        }
        let rot: Vec<Complex64> = phases.iter().map(|&p| Complex64::from_polar(1.0, p)).collect();
        let n = CMatrix::from_fn(self.n_modes(), self.n_modes(), |i, j| rot[i].conj() * rot[j] * self.n[(i, j)]);
        let m = CMatrix::from_fn(self.n_modes(), self.n_modes(), |i, j| rot[i] * rot[j] * self.m[(i, j)]);
        Ok(GaussianState { n, m })
    }

    /// `Cov(n_i, n_j) = |N_ij|^2 + |M_ij|^2 + delta_ij N_ii`.
    pub fn photon_covariance(&self, i: ModeId, j: ModeId) -> f64 {
        let (a, b) = (i.index(), j.index());
        let diag = if a == b { self.n[(a, a)].re } else { 0.0 };
        self.n[(a, b)].norm_sqr() + self.m[(a, b)].norm_sqr() + diag
    }

    /// Full photon-number covariance matrix over all modes.
    pub fn photon_covariance_matrix(&self) -> DMatrix<f64> {
        let n = self.n_modes();
        DMatrix::from_fn(n, n, |a, b| self.photon_covariance(ModeId::from_index(a), ModeId::from_index(b)))
    }

    /// Mean of the quadratic form `Q = sum_ij K_ij a_i^dag a_j`.
    pub fn quadratic_mean(&self, k: &CMatrix) -> Complex64 {
        k.component_mul(&self.n).sum()
    }

    /// Wick covariance `<Q1 Q2> - <Q1><Q2>` of two quadratic forms,
    ///
    /// ```text
    /// tr(K1^T conj(M) K2 M) + tr(K1 K2 N^T) + tr(K1 N^T K2 N^T).
    /// ```
    pub fn quadratic_covariance(&self, k1: &CMatrix, k2: &CMatrix) -> Complex64 {
        let nt = self.n.transpose();
        let pairing = (k1.transpose() * self.m.conjugate() * k2 * &self.m).trace();
        let contraction = (k1 * k2 * &nt).trace();
        let normal = (k1 * &nt * k2 * &nt).trace();
        pairing + contraction + normal
    }

    /// Checks hermiticity of N, non-negative occupations and symmetry of M.
    pub fn check_structure(&self, tol: f64) -> Result<()> {
        let n = self.n_modes();
        for i in 0..n {
            if self.n[(i, i)].re < -tol {
                return Err(Error::invalid(format!("negative occupation on mode {i}")));
            }
            for j in 0..n {
                if (self.n[(i, j)] - self.n[(j, i)].conj()).norm() > tol {
                    return Err(Error::invalid(format!("N not Hermitian at ({i}, {j})")));
                }
                if (self.m[(i, j)] - self.m[(j, i)]).norm() > tol {
                    return Err(Error::invalid(format!("M not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_4, PI};

    fn max_diff(a: &CMatrix, b: &CMatrix) -> f64 {
        (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn mode_layout_is_ah_av_bh_bv() {
        assert_eq!(ModeId::AH.index(), 0);
        assert_eq!(ModeId::AV.index(), 1);
        assert_eq!(ModeId::BH.index(), 2);
        assert_eq!(ModeId::BV.index(), 3);
        assert_eq!(ModeId::new(2, Beam::B, Pol::V).index(), 11);
        for i in 0..12 {
            assert_eq!(ModeId::from_index(i).index(), i);
        }
    }

    #[test]
    fn singlet_zero_gain_is_vacuum() {
        let s = GaussianState::make_singlet(0.0).unwrap();
        assert_eq!(s, GaussianState::vacuum(1));
    }

    #[test]
    fn singlet_entries() {
        let g = 0.33;
        let s = GaussianState::make_singlet(g).unwrap();
        let occ = g.sinh().powi(2);
        assert!((occ - 0.1129).abs() < 1e-4);
        for i in 0..4 {
            assert!((s.normal()[(i, i)].re - occ).abs() < 1e-15);
        }
        let cs = g.cosh() * g.sinh();
        assert!((s.anomalous()[(0, 3)].re - cs).abs() < 1e-15);
        assert!((s.anomalous()[(1, 2)].re + cs).abs() < 1e-15);
        let nonzero = s.anomalous().iter().filter(|z| z.norm() > 0.0).count();
        assert_eq!(nonzero, 4);
    }

    #[test]
    fn bad_gain_rejected() {
        assert!(GaussianState::make_singlet(-0.1).is_err());
        assert!(GaussianState::make_singlet(f64::NAN).is_err());
        assert!(GaussianState::make_phi_state(f64::INFINITY, 0.0).is_err());
    }

    #[test]
    fn phi_state_zero_gain_is_vacuum() {
        for phi in [0.0, 1.0, PI] {
            assert_eq!(GaussianState::make_phi_state(0.0, phi).unwrap(), GaussianState::vacuum(1));
        }
    }

    #[test]
    fn triplets_match_phi_states() {
        let g = 0.2;
        let pm = GaussianState::make_triplet(Triplet::PhiMinus, g).unwrap();
        assert_eq!(pm, GaussianState::make_phi_state(g, PI).unwrap());
        let pp = GaussianState::make_triplet(Triplet::PhiPlus, g).unwrap();
        assert_eq!(pp, GaussianState::make_phi_state(g, 0.0).unwrap());
        assert!("psi_plus".parse::<Triplet>().is_ok());
        assert!("chi-minus".parse::<Triplet>().is_err());
    }

    #[test]
    fn triplet_frames_give_singlet_pattern() {
        let g = 0.15;
        let singlet = GaussianState::make_singlet(g).unwrap();
        for kind in Triplet::ALL {
            let t = GaussianState::make_triplet(kind, g).unwrap();
            let r = t.apply_rotation(&kind.singlet_frame()).unwrap();
            // equal up to a global sign on M
            let plus = max_diff(r.anomalous(), singlet.anomalous());
            let minus = max_diff(&(-r.anomalous()), singlet.anomalous());
            assert!(plus.min(minus) < 1e-14, "{kind:?}");
            assert!(max_diff(r.normal(), singlet.normal()) < 1e-14);
        }
    }

    #[test]
    fn psi_plus_with_plate_phases_becomes_singlet() {
        let g = 0.2;
        let t = GaussianState::make_triplet(Triplet::PsiPlus, g).unwrap();
        // o-e phase difference between the wavelengths equal to pi
        let phases = [0.3, 0.3 - 4.0 * PI, 1.1, 1.1 - 3.0 * PI];
        let r = t.apply_mode_phases(&phases).unwrap();
        let singlet = GaussianState::make_singlet(g).unwrap();
        let global = r.anomalous()[(0, 3)] / singlet.anomalous()[(0, 3)];
        assert!((global.norm() - 1.0).abs() < 1e-12);
        assert!(max_diff(r.anomalous(), &(singlet.anomalous() * global)) < 1e-12);
    }

    #[test]
    fn rotation_identity_and_unitarity() {
        let s = GaussianState::make_singlet(0.3).unwrap();
        let same = s.apply_rotation(&PolarizationRotation::identity(RotationTarget::Both)).unwrap();
        assert!(max_diff(same.normal(), s.normal()) < 1e-15);
        let bad = [[ONE, ONE], [ZERO, ONE]];
        assert!(PolarizationRotation::new(bad, RotationTarget::A).is_err());
        let qwp = PolarizationRotation::quarter_wave(0.4, RotationTarget::Both);
        assert!(PolarizationRotation::new(qwp.matrix(), RotationTarget::Both).is_ok());
        assert!((qwp.determinant().norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn singlet_invariant_under_equal_rotations() {
        let s = GaussianState::make_singlet(0.25).unwrap();
        let rot = PolarizationRotation::from_angles(0.3, -1.2, 0.7, 0.9, RotationTarget::Both);
        let r = s.apply_rotation(&rot).unwrap();
        let det = rot.determinant();
        assert!(max_diff(r.normal(), s.normal()) < 1e-13);
        assert!(max_diff(r.anomalous(), &(s.anomalous() * det)) < 1e-13);
    }

    #[test]
    fn phi_minus_at_45_degrees_is_psi_plus_pattern() {
        // Equal rotations preserve the symmetry of the pairing matrix, so the
        // diagonal-basis image of Phi- is Psi+, not the singlet.
        let g = 0.2;
        let pm = GaussianState::make_triplet(Triplet::PhiMinus, g).unwrap();
        let r = pm.apply_rotation(&PolarizationRotation::linear(FRAC_PI_4, RotationTarget::Both)).unwrap();
        let pp = GaussianState::make_triplet(Triplet::PsiPlus, g).unwrap();
        let plus = max_diff(r.anomalous(), pp.anomalous());
        let minus = max_diff(&(-r.anomalous()), pp.anomalous());
        assert!(plus.min(minus) < 1e-14);
        // a half-wave plate at 45 degrees on beam B alone reaches the singlet
        let hwp = PolarizationRotation::half_wave(FRAC_PI_4, RotationTarget::B);
        let s = pm.apply_rotation(&hwp).unwrap();
        let singlet = GaussianState::make_singlet(g).unwrap();
        assert!(max_diff(s.anomalous(), singlet.anomalous()) < 1e-14);
    }

    #[test]
    fn loss_scaling() {
        let s = GaussianState::make_singlet(0.4).unwrap();
        let same = s.apply_loss(&LossMap::uniform(4, 1.0).unwrap()).unwrap();
        assert_eq!(same, s);
        let lossy = s.apply_loss(&LossMap::uniform(4, 0.3).unwrap()).unwrap();
        assert!((lossy.mean_photons() - 0.3 * s.mean_photons()).abs() < 1e-14);
        assert!(LossMap::uniform(4, 1.2).is_err());
        assert!(LossMap::new(vec![0.5, -0.1]).is_err());
        assert!(s.apply_loss(&LossMap::uniform(8, 0.5).unwrap()).is_err());
    }

    #[test]
    fn phases_keep_occupations() {
        let s = GaussianState::make_triplet(Triplet::PsiPlus, 0.3).unwrap();
        let r = s.apply_mode_phases(&[0.1, 2.0, -1.3, 5.0]).unwrap();
        for i in 0..4 {
            assert!((r.normal()[(i, i)] - s.normal()[(i, i)]).norm() < 1e-15);
        }
        assert!(s.apply_mode_phases(&[0.0; 3]).is_err());
        let z = s.apply_mode_phases(&[0.0; 4]).unwrap();
        assert_eq!(z, s);
    }

    #[test]
    fn thermal_mode_variance() {
        // one arm of a two-mode squeezer is thermal; mean 2 needs sinh^2 = 2
        let g = 2f64.sqrt().asinh();
        let s = GaussianState::make_singlet(g).unwrap();
        assert!((s.photon_covariance(ModeId::AH, ModeId::AH) - 6.0).abs() < 1e-12);
    }

    #[test]
    fn twin_difference_is_noiseless() {
        for g in [0.05, 0.5, 1.5] {
            let s = GaussianState::make_singlet(g).unwrap();
            let var = s.photon_covariance(ModeId::AH, ModeId::AH) + s.photon_covariance(ModeId::BV, ModeId::BV)
                - 2.0 * s.photon_covariance(ModeId::AH, ModeId::BV);
            assert!(var.abs() < 1e-10 * (1.0 + s.mean_photons().powi(2)), "g={g} var={var}");
        }
    }

    #[test]
    fn quadratic_covariance_reduces_to_photon_covariance() {
        let s = GaussianState::make_phi_state(0.4, 1.0)
            .unwrap()
            .apply_rotation(&PolarizationRotation::from_angles(0.2, 0.5, -0.4, 0.6, RotationTarget::A))
            .unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let mut ki = CMatrix::zeros(4, 4);
                ki[(i, i)] = ONE;
                let mut kj = CMatrix::zeros(4, 4);
                kj[(j, j)] = ONE;
                let wick = s.quadratic_covariance(&ki, &kj);
                let direct = s.photon_covariance(ModeId::from_index(i), ModeId::from_index(j));
                assert!((wick.re - direct).abs() < 1e-13 && wick.im.abs() < 1e-13);
            }
        }
    }

    #[test]
    fn direct_sum_and_structure() {
        let s = GaussianState::make_singlet(0.2).unwrap();
        let many = s.replicate(3);
        assert_eq!(many.n_pairs(), 3);
        assert!((many.mean_photons() - 3.0 * s.mean_photons()).abs() < 1e-14);
        many.check_structure(STRUCTURE_TOL).unwrap();
        let rot = PolarizationRotation::linear(0.3, RotationTarget::A);
        many.apply_rotation(&rot).unwrap().check_structure(STRUCTURE_TOL).unwrap();
    }
}
