//! The ε emission map, joint two-atom emission and the four-outcome
//! beam-splitter measurement.
//!
//! After joint emission with strength ε the atoms and photons are in
//!
//! ```text
//! (1−ε)|ψ⟩|VH⟩ + iε(X⊗X)|ψ⟩|HV⟩ + √(ε(1−ε))(1⊗X)|ψ⟩|VV⟩ + i√(ε(1−ε))(X⊗1)|ψ⟩|HH⟩
//! ```
//!
//! and projecting the photons onto `(|HV⟩ ± |VH⟩)/√2` leaves the atoms in
//! `exp(±i t X⊗X)|ψ⟩` with `tan t = ε/(1−ε)`.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::statevec::{rank_one_projector, DenseOperator, StateVector};

/// Tolerance on `|1⟩` population for a mode to count as empty.
pub const VACUUM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhotonEncoding {
    /// Photon present (H) or absent (V).
    Occupation,
    /// Two polarization modes; a photon is always emitted.
    Polarization,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BeamSplitterOutcome {
    Plus,
    Minus,
    HH,
    VV,
}

impl BeamSplitterOutcome {
    pub const ALL: [BeamSplitterOutcome; 4] = [
        BeamSplitterOutcome::Plus,
        BeamSplitterOutcome::Minus,
        BeamSplitterOutcome::HH,
        BeamSplitterOutcome::VV,
    ];

    /// Photon-pair state selected by this outcome, local index
    /// `bit(p1) + 2·bit(p2)` with `V = 0`, `H = 1`.
    pub fn vector(self) -> [Complex64; 4] {
        let z = Complex64::new(0.0, 0.0);
        let one = Complex64::new(1.0, 0.0);
        let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        // index 1 = |p1=H, p2=V⟩ = |HV⟩, index 2 = |VH⟩
        match self {
            BeamSplitterOutcome::Plus => [z, h, h, z],
            BeamSplitterOutcome::Minus => [z, h, -h, z],
            BeamSplitterOutcome::HH => [z, z, z, one],
            BeamSplitterOutcome::VV => [one, z, z, z],
        }
    }

    /// Probability of this outcome right after [`joint_emission`] at `eps`.
    pub fn probability(self, eps: f64) -> f64 {
        match self {
            BeamSplitterOutcome::Plus | BeamSplitterOutcome::Minus => 0.5 * ((1.0 - eps).powi(2) + eps.powi(2)),
            BeamSplitterOutcome::HH | BeamSplitterOutcome::VV => eps * (1.0 - eps),
        }
    }
}

/// Rotation angle `t` realized by a `Plus` outcome at emission strength `eps`.
pub fn rotation_angle(eps: f64) -> f64 {
    eps.atan2(1.0 - eps)
}

/// Emission strength whose `Plus` outcome rotates by `angle ∈ [0, π/2]`.
pub fn eps_for_angle(angle: f64) -> f64 {
    let (s, c) = angle.sin_cos();
    (s / (s + c)).clamp(0.0, 1.0)
}

/// The 4×4 emission unitary on `(atom, photon)`:
/// `|a,V⟩ → √(1−ε)|a,V⟩ + √ε|ā,H⟩` and `|a,H⟩ → −√ε|ā,V⟩ + √(1−ε)|a,H⟩`.
pub fn emission_unitary(eps: f64) -> Result<DenseOperator> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::usage(format!("eps = {eps} outside [0, 1]")));
    }
    let c = Complex64::new((1.0 - eps).sqrt(), 0.0);
    let s = Complex64::new(eps.sqrt(), 0.0);
    let z = Complex64::new(0.0, 0.0);
    // local index = atom + 2·photon
    #[rustfmt::skip]
    let m = [
        c, z, z, -s,
        z, c, -s, z,
        z, s, c, z,
        s, z, z, c,
    ];
    DenseOperator::unitary(nalgebra::DMatrix::from_row_slice(4, 4, &m))
}

pub(crate) fn require_vacuum(state: &StateVector, mode: usize, what: &str) -> Result<()> {
    let pop = state.excitation(mode);
    if pop > VACUUM_TOL {
        return Err(Error::protocol(format!(
            "{what} qubit {mode} is not empty (population {pop:e})"
        )));
    }
    Ok(())
}

/// Emission by `atom` into the empty mode `photon` with strength `eps`.
pub fn u_eps(state: &mut StateVector, atom: usize, photon: usize, eps: f64) -> Result<()> {
    let u = emission_unitary(eps)?;
    require_vacuum(state, photon, "photon")?;
    state.apply_two_qubit((atom, photon), &u)
}

/// `U_ε` on the first atom, `F·U_{1−ε}` on the second, then a phase `i` on
/// the `H` component of the first photon.
pub fn joint_emission(state: &mut StateVector, pair: (usize, usize), photons: (usize, usize), eps: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::usage(format!("eps = {eps} outside [0, 1]")));
    }
    require_vacuum(state, photons.0, "photon")?;
    require_vacuum(state, photons.1, "photon")?;
    u_eps(state, pair.0, photons.0, eps)?;
    u_eps(state, pair.1, photons.1, 1.0 - eps)?;
    state.apply_local(pair.1, &DenseOperator::pauli_x())?;
    state.apply_local(photons.0, &DenseOperator::phase_s())
}

pub fn beamsplitter_projectors() -> Vec<DenseOperator> {
    BeamSplitterOutcome::ALL
        .iter()
        .map(|o| rank_one_projector(&o.vector()))
        .collect()
}

/// Projects the photons onto `{(|HV⟩−|VH⟩)/√2, (|HV⟩+|VH⟩)/√2, |HH⟩, |VV⟩}`
/// and empties both modes. Returns the outcome and its probability.
pub fn beamsplitter_measure<R: Rng + ?Sized>(
    state: &mut StateVector,
    photons: (usize, usize),
    rng: &mut R,
) -> Result<(BeamSplitterOutcome, f64)> {
    let qubits = [photons.0, photons.1];
    let (k, p) = state.measure(&qubits, &beamsplitter_projectors(), rng)?;
    state.reset_product_qubits(&qubits)?;
    Ok((BeamSplitterOutcome::ALL[k], p))
}
