//! Repeat-until-success realization of `exp(i t σ_k⊗σ_l)`.
//!
//! Every round emits a photon pair at some strength ε and measures it on the
//! beam splitter. `Plus`/`Minus` rotate the pair by `±atan(ε/(1−ε))` about
//! `X⊗X`; `HH`/`VV` flip one atom, which commutes with the rotation and is
//! pushed into the [`ErrorFrame`]. The controller keeps aiming at whatever
//! angle is still owed until it reaches zero.
//!
//! Rotations about `σ_k⊗σ_l` are obtained by conjugating the pair with
//! `u_k† ⊗ u_l†` before the rounds and `u_k ⊗ u_l` after them; an `X`
//! byproduct picked up in between surfaces as `σ_k` or `σ_l`.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::emission::{beamsplitter_measure, eps_for_angle, joint_emission, BeamSplitterOutcome};
use crate::error::{Error, Result};
use crate::loss::{backup_round, loss_channel, LossConfig, LossPattern};
use crate::pauli::{conjugation_unitary, frame_conjugate_direction, ErrorFrame, PauliAxis, PauliString};
use crate::statevec::StateVector;

/// Largest rotation a single round can aim at.
pub const ANGLE_CAP: f64 = FRAC_PI_2;
/// Residual below which a rotation counts as complete.
pub const RESIDUAL_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ROUNDS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyMode {
    /// Aim at the exact remaining angle every round.
    ResidualExact,
    /// Aim at `2^(k−1)·t` in round `k` with `ε = sin(aim)`, stopping at the
    /// first outcome in the aimed direction.
    PaperDoubling,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonPolicy {
    pub mode: PolicyMode,
    #[serde(default = "default_max_rounds")]
    pub max_rounds: usize,
}

fn default_max_rounds() -> usize {
    DEFAULT_MAX_ROUNDS
}

impl Default for EpsilonPolicy {
    fn default() -> Self {
        EpsilonPolicy {
            mode: PolicyMode::ResidualExact,
            max_rounds: DEFAULT_MAX_ROUNDS,
        }
    }
}

impl EpsilonPolicy {
    pub fn residual_exact(max_rounds: usize) -> Self {
        EpsilonPolicy {
            mode: PolicyMode::ResidualExact,
            max_rounds,
        }
    }

    pub fn paper_doubling(max_rounds: usize) -> Self {
        EpsilonPolicy {
            mode: PolicyMode::PaperDoubling,
            max_rounds,
        }
    }
}

/// Reduces an angle modulo π into `(−π/2, π/2]`.
pub fn reduce_angle(theta: f64) -> f64 {
    let r = theta.rem_euclid(PI);
    if r > FRAC_PI_2 {
        r - PI
    } else {
        r
    }
}

/// What a round did to the data pair, as far as the protocol can tell. All
/// statements are in the undressed `X⊗X` picture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RoundEffect {
    /// `exp(i·angle·X⊗X)`.
    Rotation { angle: f64 },
    /// Known `X` flips on the first and/or second atom.
    Flips { first: bool, second: bool },
    /// A heralded loss that left an unidentified Pauli on the pair.
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RoundOutcome {
    Beam(BeamSplitterOutcome),
    Loss(LossPattern),
    /// A quarter turn `exp(±iπ/2 σ⊗σ)`, which is a Pauli and goes straight
    /// into the frame without any photons.
    Deterministic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundResult {
    pub effect: RoundEffect,
    pub outcome: RoundOutcome,
    pub b_measurements: Option<(u8, u8)>,
    /// Photons lost in this round, heralded or not.
    pub loss: Option<LossPattern>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub outcome: RoundOutcome,
    pub eps_used: f64,
    pub aimed_angle: f64,
    pub frame_after: PauliString,
    pub b_measurements: Option<(u8, u8)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss: Option<LossPattern>,
}

impl RoundRecord {
    /// Whether photons were emitted in this round.
    pub fn is_physical(&self) -> bool {
        !matches!(self.outcome, RoundOutcome::Deterministic)
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("round records serialize")
    }
}

/// Effect on the atoms of an outcome, read off the branch amplitudes.
///
/// After emission the register holds `Σ_b c_b i^{b₁} M_b|ψ⟩|b⟩` over the
/// photon (or backup) bits `b = (b₁, b₂)`, with `M_{01} = 1`,
/// `M_{10} = X⊗X`, `M_{00} = 1⊗X`, `M_{11} = X⊗1`. Projecting onto known
/// outcome vectors leaves `Σ_b α_b M_b`, which is classified here.
/// `photon` is the photon-pair outcome vector (`None` when the photons carry
/// no further information), `backups` the measured B-qubit vectors.
pub fn branch_effect(
    eps: f64,
    photon: Option<[Complex64; 4]>,
    backups: Option<([Complex64; 2], [Complex64; 2])>,
) -> Result<RoundEffect> {
    let mixed = (eps * (1.0 - eps)).sqrt();
    let mut alpha = [Complex64::new(0.0, 0.0); 4];
    for (idx, a) in alpha.iter_mut().enumerate() {
        let (b1, b2) = (idx & 1, idx >> 1);
        let c = match (b1, b2) {
            (0, 1) => 1.0 - eps,
            (1, 0) => eps,
            _ => mixed,
        };
        let mut v = Complex64::new(c, 0.0);
        if b1 == 1 {
            v *= Complex64::i();
        }
        if let Some(ph) = photon {
            v *= ph[idx].conj();
        }
        if let Some((u, w)) = backups {
            v *= u[b1].conj() * w[b2].conj();
        }
        *a = v;
    }
    let scale = alpha.iter().map(|a| a.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Err(Error::protocol("outcome has zero amplitude"));
    }
    let support: Vec<usize> = (0..4).filter(|&i| alpha[i].norm() > 1e-13 * scale).collect();
    // index = b1 + 2·b2: VH = 2, HV = 1, VV = 0, HH = 3
    match support[..] {
        [1, 2] => {
            let q = alpha[1] / alpha[2];
            if q.re.abs() > 1e-9 * (1.0 + q.norm()) {
                return Err(Error::protocol(format!("branch ratio {q} is not a rotation")));
            }
            Ok(RoundEffect::Rotation { angle: q.im.atan() })
        }
        [b] => Ok(RoundEffect::Flips {
            first: b & 1 == 1,
            second: b >> 1 == 0,
        }),
        _ => Err(Error::protocol(format!("unclassifiable outcome, support {support:?}"))),
    }
}

/// How a single round is physically carried out.
#[derive(Debug, Clone, PartialEq)]
pub enum RoundEngine {
    /// Photons straight from the atoms, optionally through a lossy channel.
    Direct { loss: Option<LossConfig> },
    /// Backup qubits hold a copy of each photon.
    Backup { loss: LossConfig },
}

impl RoundEngine {
    pub fn lossless() -> Self {
        RoundEngine::Direct { loss: None }
    }

    pub fn for_loss(cfg: &LossConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(if cfg.backup_enabled {
            RoundEngine::Backup { loss: *cfg }
        } else if cfg.p_loss > 0.0 {
            RoundEngine::Direct { loss: Some(*cfg) }
        } else {
            RoundEngine::lossless()
        })
    }

    pub fn run_round<R: Rng + ?Sized>(
        &self,
        state: &mut StateVector,
        pair: (usize, usize),
        eps: f64,
        rng: &mut R,
    ) -> Result<RoundResult> {
        let photons = state.layout().photon_pair()?;
        match self {
            RoundEngine::Direct { loss } => direct_round(state, pair, photons, eps, loss.as_ref(), rng),
            RoundEngine::Backup { loss } => {
                let layout = state.layout();
                let backups = match (layout.backup(pair.0), layout.backup(pair.1)) {
                    (Some(a), Some(b)) => (a, b),
                    _ => return Err(Error::usage("backup rounds need backup qubits in the layout")),
                };
                backup_round(state, pair, backups, photons, eps, loss, rng)
            }
        }
    }
}

fn direct_round<R: Rng + ?Sized>(
    state: &mut StateVector,
    pair: (usize, usize),
    photons: (usize, usize),
    eps: f64,
    loss: Option<&LossConfig>,
    rng: &mut R,
) -> Result<RoundResult> {
    joint_emission(state, pair, photons, eps)?;
    let pattern = match loss {
        Some(cfg) if cfg.p_loss > 0.0 => Some(loss_channel(state, photons, cfg, rng)?),
        _ => None,
    };
    if let Some(p) = pattern.filter(|p| p.detectable) {
        // The surviving photon still clicks; its polarization is read out
        // but cannot identify the branch.
        for (lost, q) in [(p.lost.0, photons.0), (p.lost.1, photons.1)] {
            if !lost {
                state.measure_computational(q, rng)?;
                state.reset_product_qubits(&[q])?;
            }
        }
        return Ok(RoundResult {
            effect: RoundEffect::Unknown,
            outcome: RoundOutcome::Loss(p),
            b_measurements: None,
            loss: Some(p),
        });
    }
    let (o, _) = beamsplitter_measure(state, photons, rng)?;
    Ok(RoundResult {
        effect: branch_effect(eps, Some(o.vector()), None)?,
        outcome: RoundOutcome::Beam(o),
        b_measurements: None,
        loss: pattern.filter(LossPattern::any_lost),
    })
}

enum Step {
    Done,
    /// The remaining angle is a quarter turn.
    Deterministic {
        aim: f64,
    },
    Round {
        aim: f64,
        eps: f64,
    },
}

/// Aiming logic, in terms of the physical rotation still owed.
struct Aimer {
    mode: PolicyMode,
    target: f64,
    achieved: f64,
    level: u32,
    finished: bool,
}

impl Aimer {
    fn new(mode: PolicyMode, target: f64) -> Self {
        Aimer {
            mode,
            target: reduce_angle(target),
            achieved: 0.0,
            level: 0,
            finished: false,
        }
    }

    fn residual(&self) -> f64 {
        reduce_angle(self.target - self.achieved)
    }

    fn residual_step(&self) -> Step {
        let r = self.residual();
        if r.abs() <= RESIDUAL_TOL {
            Step::Done
        } else if r.abs() >= ANGLE_CAP - RESIDUAL_TOL {
            Step::Deterministic { aim: r }
        } else {
            Step::Round {
                aim: r,
                eps: eps_for_angle(r.abs()),
            }
        }
    }

    fn next(&self) -> Step {
        if self.finished {
            return Step::Done;
        }
        match self.mode {
            PolicyMode::ResidualExact => self.residual_step(),
            PolicyMode::PaperDoubling => {
                if self.target.abs() <= RESIDUAL_TOL {
                    return Step::Done;
                }
                let aim = self.target * 2f64.powi(self.level as i32);
                if aim.abs() >= ANGLE_CAP - RESIDUAL_TOL {
                    // past the cap doubling cannot be aimed; finish on the residual
                    return self.residual_step();
                }
                Step::Round {
                    aim,
                    eps: aim.abs().sin(),
                }
            }
        }
    }

    fn update(&mut self, aim: f64, effect: &RoundEffect) {
        if let RoundEffect::Rotation { angle } = *effect {
            self.achieved += angle;
            if self.mode == PolicyMode::PaperDoubling {
                let doubled = self.target * 2f64.powi(self.level as i32);
                if aim == doubled {
                    if angle.signum() == aim.signum() {
                        self.finished = true;
                    } else {
                        self.level += 1;
                    }
                }
            }
        }
    }

    fn complete_deterministic(&mut self, aim: f64) {
        self.achieved += aim;
        self.finished = true;
    }

    fn remaining(&self) -> f64 {
        if self.finished && self.mode == PolicyMode::ResidualExact {
            0.0
        } else {
            self.residual()
        }
    }
}

/// Outcome of one controller call. `completed` is false when the round
/// budget ran out; `remaining` is the angle still owed in the caller's frame.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationRun {
    pub records: Vec<RoundRecord>,
    pub completed: bool,
    pub remaining: f64,
}

impl RotationRun {
    pub fn physical_rounds(&self) -> usize {
        self.records.iter().filter(|r| r.is_physical()).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Controller {
    pub policy: EpsilonPolicy,
    pub engine: RoundEngine,
}

impl Controller {
    pub fn new(policy: EpsilonPolicy, engine: RoundEngine) -> Self {
        Controller { policy, engine }
    }

    pub fn lossless(policy: EpsilonPolicy) -> Self {
        Controller::new(policy, RoundEngine::lossless())
    }

    /// Drives `exp(i t σ_k⊗σ_l)` on `pair` until done or out of rounds.
    ///
    /// On return the frame-corrected state has advanced by the requested
    /// rotation (when `completed`). Running out of rounds is not an error
    /// here; see [`Controller::realize_v_kl`].
    #[allow(clippy::too_many_arguments)]
    pub fn run_rotation<R: Rng + ?Sized>(
        &self,
        state: &mut StateVector,
        pair: (usize, usize),
        axes: (PauliAxis, PauliAxis),
        t: f64,
        frame: &mut ErrorFrame,
        rng: &mut R,
    ) -> Result<RotationRun> {
        state.layout().check_data_pair(pair)?;
        if frame.len() != state.layout().n_data() {
            return Err(Error::usage("frame length differs from the data register"));
        }
        let (k, l) = axes;
        let (uk, ul) = (conjugation_unitary(k)?, conjugation_unitary(l)?);
        let target = PauliString::two_site(frame.len(), pair, axes);
        let direction = frame_conjugate_direction(frame, &target)? as f64;
        let flip_first = PauliString::single(frame.len(), pair.0, k);
        let flip_second = PauliString::single(frame.len(), pair.1, l);

        let mut aimer = Aimer::new(self.policy.mode, direction * t);
        let mut records = Vec::new();
        let mut rounds = 0;
        let mut dressed = false;
        loop {
            match aimer.next() {
                Step::Done => break,
                Step::Deterministic { aim } => {
                    frame.record(&target)?;
                    aimer.complete_deterministic(aim);
                    records.push(RoundRecord {
                        outcome: RoundOutcome::Deterministic,
                        eps_used: 1.0,
                        aimed_angle: aim,
                        frame_after: frame.byproduct.clone(),
                        b_measurements: None,
                        loss: None,
                    });
                    break;
                }
                Step::Round { aim, eps } => {
                    if rounds >= self.policy.max_rounds {
                        break;
                    }
                    if !dressed {
                        state.apply_local(pair.0, &uk.adjoint())?;
                        state.apply_local(pair.1, &ul.adjoint())?;
                        dressed = true;
                    }
                    let res = self.engine.run_round(state, pair, eps, rng)?;
                    rounds += 1;
                    if let RoundEffect::Flips { first, second } = res.effect {
                        if first {
                            frame.record(&flip_first)?;
                        }
                        if second {
                            frame.record(&flip_second)?;
                        }
                    }
                    aimer.update(aim, &res.effect);
                    records.push(RoundRecord {
                        outcome: res.outcome,
                        eps_used: eps,
                        aimed_angle: reduce_angle(aim),
                        frame_after: frame.byproduct.clone(),
                        b_measurements: res.b_measurements,
                        loss: res.loss,
                    });
                }
            }
        }
        if dressed {
            state.apply_local(pair.0, &uk)?;
            state.apply_local(pair.1, &ul)?;
        }
        let completed = matches!(aimer.next(), Step::Done);
        Ok(RotationRun {
            records,
            completed,
            remaining: direction * aimer.remaining(),
        })
    }

    /// `exp(i t X⊗X)` on `pair`.
    pub fn realize_v<R: Rng + ?Sized>(
        &self,
        state: &mut StateVector,
        pair: (usize, usize),
        t: f64,
        frame: &mut ErrorFrame,
        rng: &mut R,
    ) -> Result<Vec<RoundRecord>> {
        self.realize_v_kl(state, pair, PauliAxis::X, PauliAxis::X, t, frame, rng)
    }

    /// `exp(i t σ_k⊗σ_l)` on `pair`; fails with
    /// [`Error::IncompleteRotation`] when the round budget runs out.
    #[allow(clippy::too_many_arguments)]
    pub fn realize_v_kl<R: Rng + ?Sized>(
        &self,
        state: &mut StateVector,
        pair: (usize, usize),
        k: PauliAxis,
        l: PauliAxis,
        t: f64,
        frame: &mut ErrorFrame,
        rng: &mut R,
    ) -> Result<Vec<RoundRecord>> {
        let run = self.run_rotation(state, pair, (k, l), t, frame, rng)?;
        if !run.completed {
            return Err(Error::IncompleteRotation {
                remaining: run.remaining,
                rounds: run.physical_rounds(),
            });
        }
        Ok(run.records)
    }
}

/// Lossless [`Controller::realize_v`] driven by the register's photon modes.
pub fn realize_v<R: Rng + ?Sized>(
    state: &mut StateVector,
    pair: (usize, usize),
    t: f64,
    policy: &EpsilonPolicy,
    frame: &mut ErrorFrame,
    rng: &mut R,
) -> Result<Vec<RoundRecord>> {
    Controller::lossless(*policy).realize_v(state, pair, t, frame, rng)
}

/// Lossless [`Controller::realize_v_kl`].
#[allow(clippy::too_many_arguments)]
pub fn realize_v_kl<R: Rng + ?Sized>(
    state: &mut StateVector,
    pair: (usize, usize),
    k: PauliAxis,
    l: PauliAxis,
    t: f64,
    policy: &EpsilonPolicy,
    frame: &mut ErrorFrame,
    rng: &mut R,
) -> Result<Vec<RoundRecord>> {
    Controller::lossless(*policy).realize_v_kl(state, pair, k, l, t, frame, rng)
}

/// Exact distribution of the number of lossless rounds one rotation takes.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundLaw {
    /// `survival[r] = P(T > r)`; zero beyond the end.
    survival: Vec<f64>,
}

const LAW_CUTOFF: f64 = 1e-16;
const LAW_MAX_ROUNDS: usize = 100_000;

struct Level {
    next: f64,
    stay: f64,
}

impl RoundLaw {
    /// Per-round success probability `p`, independent rounds.
    pub fn geometric(p: f64) -> Self {
        assert!(p > 0.0 && p <= 1.0, "success probability must lie in (0, 1]");
        let mut survival = vec![1.0];
        let mut s = 1.0;
        while s > LAW_CUTOFF && survival.len() < LAW_MAX_ROUNDS {
            s *= 1.0 - p;
            survival.push(s);
        }
        RoundLaw { survival }
    }

    /// Rounds needed for `exp(i·angle·σ⊗σ)` under `policy`, obtained by
    /// propagating probability through the chain of aim levels: a success
    /// finishes, a reversed outcome moves one level up, a flip stays.
    pub fn for_rotation(angle: f64, policy: &EpsilonPolicy) -> Self {
        let mut levels: Vec<Option<Level>> = Vec::new();
        let mut level = |k: usize| -> Option<Level> {
            while levels.len() <= k {
                let j = levels.len();
                levels.push(level_spec(angle, policy.mode, j));
            }
            levels[k].as_ref().map(|l| Level { ..*l })
        };
        let mut mass = vec![0.0; 1];
        if level(0).is_none() {
            return RoundLaw { survival: vec![0.0] };
        }
        mass[0] = 1.0;
        let mut survival = vec![1.0];
        while survival.len() < LAW_MAX_ROUNDS {
            let mut next = vec![0.0; mass.len() + 1];
            for (k, &m) in mass.iter().enumerate() {
                if m == 0.0 {
                    continue;
                }
                let spec = level(k).expect("mass only sits on live levels");
                next[k] += m * spec.stay;
                if level(k + 1).is_some() {
                    next[k + 1] += m * spec.next;
                }
            }
            while next.len() > 1 && *next.last().unwrap() == 0.0 {
                next.pop();
            }
            let s: f64 = next.iter().sum();
            survival.push(s);
            mass = next;
            if s <= LAW_CUTOFF {
                break;
            }
        }
        RoundLaw { survival }
    }

    /// `P(T ≤ r)`.
    pub fn cdf(&self, r: u32) -> f64 {
        1.0 - self.survival.get(r as usize).copied().unwrap_or(0.0)
    }

    pub fn mean(&self) -> f64 {
        self.survival.iter().sum()
    }
}

/// Transition probabilities at aim level `j`, or `None` when the level is
/// reached already complete (nothing left, or a quarter turn handled
/// without photons).
fn level_spec(angle: f64, mode: PolicyMode, j: usize) -> Option<Level> {
    let target = reduce_angle(angle);
    if target.abs() <= RESIDUAL_TOL {
        return None;
    }
    let step = |eps: f64| {
        let pm = 0.5 * ((1.0 - eps).powi(2) + eps.powi(2));
        Level {
            next: pm,
            stay: 2.0 * eps * (1.0 - eps),
        }
    };
    let residual_level = |r: f64| {
        if r.abs() <= RESIDUAL_TOL || r.abs() >= ANGLE_CAP - RESIDUAL_TOL {
            None
        } else {
            Some(step(eps_for_angle(r.abs())))
        }
    };
    match mode {
        PolicyMode::ResidualExact => {
            // after j reversals the owed angle is 2^j times the target, mod π
            let mut r = target;
            for _ in 0..j {
                r = reduce_angle(2.0 * r);
            }
            residual_level(r)
        }
        PolicyMode::PaperDoubling => {
            let mut achieved = 0.0;
            for i in 0..j {
                let aim = target * 2f64.powi(i as i32);
                if aim.abs() >= ANGLE_CAP - RESIDUAL_TOL {
                    // handed over to residual aiming; its reversals double the residual
                    let mut r = reduce_angle(target - achieved);
                    for _ in i..j {
                        r = reduce_angle(2.0 * r);
                    }
                    return residual_level(r);
                }
                achieved -= aim.signum() * crate::emission::rotation_angle(aim.abs().sin());
            }
            let aim = target * 2f64.powi(j as i32);
            if aim.abs() >= ANGLE_CAP - RESIDUAL_TOL {
                residual_level(reduce_angle(target - achieved))
            } else {
                Some(step(aim.abs().sin()))
            }
        }
    }
}
