//! Photon loss and the backup-qubit round.
//!
//! A lost photon is modelled as the environment measuring its mode in the
//! computational basis and keeping the result. With polarization encoding
//! two photons are always expected, so a missing click is heralded; with
//! occupation encoding it looks like an ordinary vacuum.

use rand::Rng;
use serde::{Deserialize, Serialize};

use num_complex::Complex64;

use crate::compiler::pauli_rotation;
use crate::emission::{beamsplitter_measure, require_vacuum, u_eps, PhotonEncoding};
use crate::error::{Error, Result};
use crate::feedback::{branch_effect, RoundEffect, RoundOutcome, RoundResult};
use crate::pauli::PauliString;
use crate::statevec::{fidelity, rank_one_projector, DenseOperator, StateVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LossPattern {
    pub lost: (bool, bool),
    pub detectable: bool,
}

impl LossPattern {
    pub fn none() -> Self {
        LossPattern {
            lost: (false, false),
            detectable: false,
        }
    }

    pub fn any_lost(&self) -> bool {
        self.lost.0 || self.lost.1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossConfig {
    #[serde(default)]
    pub p_loss: f64,
    #[serde(default = "default_encoding")]
    pub encoding: PhotonEncoding,
    #[serde(default)]
    pub backup_enabled: bool,
}

fn default_encoding() -> PhotonEncoding {
    PhotonEncoding::Polarization
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            p_loss: 0.0,
            encoding: PhotonEncoding::Polarization,
            backup_enabled: false,
        }
    }
}

impl LossConfig {
    pub fn new(p_loss: f64, encoding: PhotonEncoding, backup_enabled: bool) -> Result<Self> {
        let cfg = LossConfig {
            p_loss,
            encoding,
            backup_enabled,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_backup(p_loss: f64) -> Result<Self> {
        LossConfig::new(p_loss, PhotonEncoding::Polarization, true)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p_loss) {
            return Err(Error::Config(format!("p_loss = {} outside [0, 1]", self.p_loss)));
        }
        if self.backup_enabled && self.encoding != PhotonEncoding::Polarization {
            return Err(Error::Config("backup needs polarization encoding".into()));
        }
        Ok(())
    }

    pub fn is_lossless(&self) -> bool {
        self.p_loss == 0.0
    }
}

/// `U_ε` between a data atom and its empty backup qubit.
pub fn backup_entangle(state: &mut StateVector, atom: usize, backup: usize, eps: f64) -> Result<()> {
    require_vacuum(state, backup, "backup")?;
    u_eps(state, atom, backup, eps)
}

/// Copies the backup qubit's computational value onto the empty photon mode.
pub fn photon_copy(state: &mut StateVector, backup: usize, photon: usize) -> Result<()> {
    require_vacuum(state, photon, "photon")?;
    state.apply_two_qubit((backup, photon), &cnot())
}

fn cnot() -> DenseOperator {
    // control is the low qubit
    let o = Complex64::new(1.0, 0.0);
    let z = Complex64::new(0.0, 0.0);
    #[rustfmt::skip]
    let m = [
        o, z, z, z,
        z, z, z, o,
        z, z, o, z,
        z, o, z, z,
    ];
    DenseOperator::from_rows(4, &m).expect("permutation matrix")
}

/// Independently loses each photon with probability `p_loss`.
pub fn loss_channel<R: Rng + ?Sized>(
    state: &mut StateVector,
    photons: (usize, usize),
    cfg: &LossConfig,
    rng: &mut R,
) -> Result<LossPattern> {
    let mut lost = [false; 2];
    for (slot, q) in lost.iter_mut().zip([photons.0, photons.1]) {
        if cfg.p_loss > 0.0 && rng.random::<f64>() < cfg.p_loss {
            *slot = true;
            state.measure_computational(q, rng)?;
            state.reset_product_qubits(&[q])?;
        }
    }
    let any = lost[0] || lost[1];
    Ok(LossPattern {
        lost: (lost[0], lost[1]),
        detectable: any && cfg.encoding == PhotonEncoding::Polarization,
    })
}

fn plus_minus() -> [[Complex64; 2]; 2] {
    let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    [[h, h], [h, -h]]
}

fn basis_vectors() -> [[Complex64; 2]; 2] {
    let o = Complex64::new(1.0, 0.0);
    let z = Complex64::new(0.0, 0.0);
    [[o, z], [z, o]]
}

fn measure_in<R: Rng + ?Sized>(
    state: &mut StateVector,
    qubit: usize,
    basis: &[[Complex64; 2]; 2],
    rng: &mut R,
) -> Result<u8> {
    let projectors: Vec<_> = basis.iter().map(|v| rank_one_projector(v)).collect();
    let (k, _) = state.measure(&[qubit], &projectors, rng)?;
    state.reset_product_qubits(&[qubit])?;
    Ok(k as u8)
}

/// One round with backup qubits standing in for the photons.
///
/// The backups are entangled exactly like photons would be, the photons are
/// copied off them and sent. If both arrive, the beam-splitter outcome plus a
/// `±` measurement of the backups yields a rotation or a known flip; if
/// either is lost, measuring the backups in the computational basis collapses
/// the pair onto a known Pauli branch. The effect is read off the measured
/// outcomes; the caller updates the frame.
pub fn backup_round<R: Rng + ?Sized>(
    state: &mut StateVector,
    pair: (usize, usize),
    backups: (usize, usize),
    photons: (usize, usize),
    eps: f64,
    cfg: &LossConfig,
    rng: &mut R,
) -> Result<RoundResult> {
    if !cfg.backup_enabled {
        return Err(Error::protocol("backup round with backup disabled"));
    }
    cfg.validate()?;
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::usage(format!("eps = {eps} outside [0, 1]")));
    }
    for q in [photons.0, photons.1] {
        require_vacuum(state, q, "photon")?;
    }
    backup_entangle(state, pair.0, backups.0, eps)?;
    backup_entangle(state, pair.1, backups.1, 1.0 - eps)?;
    state.apply_local(pair.1, &DenseOperator::pauli_x())?;
    photon_copy(state, backups.0, photons.0)?;
    photon_copy(state, backups.1, photons.1)?;
    state.apply_local(photons.0, &DenseOperator::phase_s())?;

    let pattern = loss_channel(state, photons, cfg, rng)?;
    if !pattern.any_lost() {
        let (o, _) = beamsplitter_measure(state, photons, rng)?;
        let pm = plus_minus();
        let s0 = measure_in(state, backups.0, &pm, rng)?;
        let s1 = measure_in(state, backups.1, &pm, rng)?;
        let effect = branch_effect(eps, Some(o.vector()), Some((pm[s0 as usize], pm[s1 as usize])))?;
        return Ok(RoundResult {
            effect,
            outcome: RoundOutcome::Beam(o),
            b_measurements: Some((s0, s1)),
            loss: None,
        });
    }
    for (lost, q) in [(pattern.lost.0, photons.0), (pattern.lost.1, photons.1)] {
        if !lost {
            state.measure_computational(q, rng)?;
            state.reset_product_qubits(&[q])?;
        }
    }
    let e = basis_vectors();
    let b0 = measure_in(state, backups.0, &e, rng)?;
    let b1 = measure_in(state, backups.1, &e, rng)?;
    let effect = branch_effect(eps, None, Some((e[b0 as usize], e[b1 as usize])))?;
    debug_assert!(matches!(effect, RoundEffect::Flips { .. }));
    Ok(RoundResult {
        effect,
        outcome: RoundOutcome::Loss(pattern),
        b_measurements: Some((b0, b1)),
        loss: Some(pattern),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RoundClass {
    PlusRotation,
    MinusRotation,
    KnownPauli,
    Unresolved,
}

/// Identifies what a round did to the data register, by brute force.
///
/// `after` is compared with `frame_delta·e^{±i t X⊗X}·before` and with
/// `frame_delta·before`; a fidelity of at least `1 − 1e−9` picks the class.
pub fn classify_round_effect(
    before: &StateVector,
    after: &StateVector,
    pair: (usize, usize),
    t_round: f64,
    frame_delta: &PauliString,
) -> RoundClass {
    let (Ok(before), Ok(after)) = (before.data_state(), after.data_state()) else {
        return RoundClass::Unresolved;
    };
    let n = before.n_qubits();
    if frame_delta.len() != n {
        return RoundClass::Unresolved;
    }
    let xx = PauliString::two_site(n, pair, (crate::pauli::PauliAxis::X, crate::pauli::PauliAxis::X));
    let matches = |angle: Option<f64>| -> bool {
        let mut s = match angle {
            Some(a) => match pauli_rotation(&before, &xx, a) {
                Ok(s) => s,
                Err(_) => return false,
            },
            None => before.clone(),
        };
        if s.apply_pauli(frame_delta).is_err() {
            return false;
        }
        fidelity(&s, &after).is_ok_and(|f| f >= 1.0 - 1e-9)
    };
    if t_round != 0.0 && matches(Some(t_round)) {
        RoundClass::PlusRotation
    } else if t_round != 0.0 && matches(Some(-t_round)) {
        RoundClass::MinusRotation
    } else if matches(None) {
        RoundClass::KnownPauli
    } else {
        RoundClass::Unresolved
    }
}
