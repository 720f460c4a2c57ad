//! Trajectories, ensembles, the CNOT demonstration and report files.
//!
//! Trajectory `i` of a run draws from ChaCha8 seeded with `master_seed`,
//! stream `i`, so results do not depend on thread scheduling. Ensembles run
//! in parallel and are reduced in index order.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compiler::{
    compile, round_budget, schedule_parallel, HamiltonianSpec, InteractionGraph, RoundBudget, TrotterPlan,
};
use crate::emission::BeamSplitterOutcome;
use crate::error::{Error, Result};
use crate::feedback::{Controller, EpsilonPolicy, RoundEngine, RoundOutcome, RoundRecord};
use crate::loss::LossConfig;
use crate::pauli::{ErrorFrame, PauliAxis, PauliString};
use crate::statevec::{exact_evolution, fidelity, DenseOperator, RegisterLayout, StateVector, DEFAULT_QUBIT_CAP};

/// Starting data state of every trajectory.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum InitialState {
    #[default]
    AllZeros,
    AllPlus,
    /// Haar-random state drawn from its own seed.
    Random(u64),
    Amplitudes(Vec<[f64; 2]>),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum InitialStateRepr {
    Named(String),
    Explicit { amplitudes: Vec<[f64; 2]> },
}

impl std::str::FromStr for InitialState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "all-zeros" => Ok(InitialState::AllZeros),
            "all-plus" => Ok(InitialState::AllPlus),
            other => other
                .strip_prefix("random(")
                .and_then(|r| r.strip_suffix(')'))
                .and_then(|seed| seed.trim().parse().ok())
                .map(InitialState::Random)
                .ok_or_else(|| Error::Config(format!("unknown initial state {other:?}"))),
        }
    }
}

impl Serialize for InitialState {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let repr = match self {
            InitialState::AllZeros => InitialStateRepr::Named("all-zeros".into()),
            InitialState::AllPlus => InitialStateRepr::Named("all-plus".into()),
            InitialState::Random(seed) => InitialStateRepr::Named(format!("random({seed})")),
            InitialState::Amplitudes(a) => InitialStateRepr::Explicit { amplitudes: a.clone() },
        };
        repr.serialize(s)
    }
}

impl<'de> Deserialize<'de> for InitialState {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match InitialStateRepr::deserialize(d)? {
            InitialStateRepr::Named(name) => name.parse().map_err(serde::de::Error::custom),
            InitialStateRepr::Explicit { amplitudes } => Ok(InitialState::Amplitudes(amplitudes)),
        }
    }
}

impl InitialState {
    /// The data-only state on `n` qubits.
    pub fn prepare(&self, n: usize) -> Result<StateVector> {
        let layout = RegisterLayout::data_only(n);
        match self {
            InitialState::AllZeros => Ok(StateVector::zero(layout)),
            InitialState::AllPlus => {
                let dim = 1usize << n;
                StateVector::from_amplitudes(layout, vec![Complex64::new(1.0, 0.0); dim])
            }
            InitialState::Random(seed) => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                Ok(StateVector::random_data(layout, &mut rng))
            }
            InitialState::Amplitudes(a) => {
                let amps = a.iter().map(|&[re, im]| Complex64::new(re, im)).collect();
                StateVector::from_amplitudes(layout, amps).map_err(|e| Error::Config(format!("initial state: {e}")))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleMode {
    #[default]
    Serial,
    /// Layers from an edge coloring of the interaction graph.
    Parallel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    pub hamiltonian: HamiltonianSpec,
    pub t: f64,
    pub n_steps: usize,
    #[serde(default)]
    pub policy: EpsilonPolicy,
    #[serde(default)]
    pub loss: LossConfig,
    #[serde(default)]
    pub initial_state: InitialState,
    pub trajectories: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub schedule: ScheduleMode,
}

impl ProtocolConfig {
    /// Noiseless-channel defaults around `hamiltonian`.
    pub fn new(hamiltonian: HamiltonianSpec, t: f64, n_steps: usize) -> Self {
        ProtocolConfig {
            hamiltonian,
            t,
            n_steps,
            policy: EpsilonPolicy::default(),
            loss: LossConfig::default(),
            initial_state: InitialState::default(),
            trajectories: 1,
            master_seed: 0,
            schedule: ScheduleMode::Serial,
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: ProtocolConfig = serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ProtocolConfig::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.hamiltonian.validate()?;
        self.loss.validate()?;
        if !self.t.is_finite() {
            return Err(Error::Config("t must be finite".into()));
        }
        if self.n_steps == 0 {
            return Err(Error::Config("n_steps must be at least 1".into()));
        }
        Ok(())
    }

    pub fn layout(&self) -> RegisterLayout {
        RegisterLayout::protocol(self.hamiltonian.n_qubits, self.loss.backup_enabled)
    }

    pub fn plan(&self) -> Result<TrotterPlan> {
        let plan = compile(&self.hamiltonian, self.t, self.n_steps)?;
        match self.schedule {
            ScheduleMode::Serial => Ok(plan),
            ScheduleMode::Parallel => schedule_parallel(&plan, &InteractionGraph::from_hamiltonian(&self.hamiltonian)),
        }
    }
}

/// ChaCha8 keyed by the master seed, on the trajectory's own stream.
pub fn trajectory_rng(master_seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index as u64);
    rng
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeHistogram {
    pub plus: u64,
    pub minus: u64,
    pub hh: u64,
    pub vv: u64,
    /// Quarter turns done without photons.
    pub deterministic: u64,
    pub heralded_losses: u64,
    /// Losses the detectors could not see.
    pub silent_losses: u64,
}

impl OutcomeHistogram {
    pub fn add(&mut self, r: &RoundRecord) {
        match r.outcome {
            RoundOutcome::Beam(o) => match o {
                BeamSplitterOutcome::Plus => self.plus += 1,
                BeamSplitterOutcome::Minus => self.minus += 1,
                BeamSplitterOutcome::HH => self.hh += 1,
                BeamSplitterOutcome::VV => self.vv += 1,
            },
            RoundOutcome::Loss(p) if p.detectable => self.heralded_losses += 1,
            RoundOutcome::Loss(_) => self.silent_losses += 1,
            RoundOutcome::Deterministic => self.deterministic += 1,
        }
        if let (RoundOutcome::Beam(_), Some(p)) = (r.outcome, r.loss) {
            if p.any_lost() {
                self.silent_losses += 1;
            }
        }
    }

    pub fn merge(&mut self, o: &OutcomeHistogram) {
        self.plus += o.plus;
        self.minus += o.minus;
        self.hh += o.hh;
        self.vv += o.vv;
        self.deterministic += o.deterministic;
        self.heralded_losses += o.heralded_losses;
        self.silent_losses += o.silent_losses;
    }

    /// Counts in `BeamSplitterOutcome::ALL` order.
    pub fn beam_counts(&self) -> [u64; 4] {
        [self.plus, self.minus, self.hh, self.vv]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStats {
    pub index: usize,
    pub rounds_total: usize,
    /// Physical rounds per plan rotation, in execution order.
    pub rounds_per_rotation: Vec<usize>,
    pub outcome_histogram: OutcomeHistogram,
    /// Rounds spent per photon pair that reached the beam splitter.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub attempts_per_arrival: Vec<usize>,
    /// Sum over beam-splitter rounds of each outcome's probability at the
    /// ε used, in `BeamSplitterOutcome::ALL` order.
    pub expected_beam_counts: [f64; 4],
    pub final_frame: PauliString,
    /// `None` when the trajectory failed.
    pub fidelity_vs_oracle: Option<f64>,
    /// Fidelity to the noiseless execution of the same plan.
    pub fidelity_vs_plan: Option<f64>,
    pub failure: Option<String>,
    pub records: Vec<RoundRecord>,
    #[serde(skip)]
    pub wall_time: Duration,
}

impl TrajectoryStats {
    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    pub sem: f64,
    pub min: f64,
    pub max: f64,
}

impl Summary {
    pub fn of<I: IntoIterator<Item = f64>>(values: I) -> Option<Summary> {
        let v: Vec<f64> = values.into_iter().collect();
        if v.is_empty() {
            return None;
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let variance = if v.len() > 1 {
            v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Some(Summary {
            count: v.len(),
            mean,
            variance,
            sem: (variance / n).sqrt(),
            min: v.iter().copied().fold(f64::INFINITY, f64::min),
            max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

/// Aggregate rounds for one Hamiltonian term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteRow {
    pub term: usize,
    pub site_a: usize,
    pub site_b: usize,
    pub axes: String,
    pub coeff: f64,
    pub rotations: usize,
    pub mean_rounds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeLaw {
    pub beam_rounds: u64,
    /// Observed frequencies in `BeamSplitterOutcome::ALL` order.
    pub observed: [f64; 4],
    /// Analytic frequencies averaged over the ε of each round.
    pub expected: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleReport {
    pub config: ProtocolConfig,
    pub trajectories: usize,
    pub failed: usize,
    pub plan_rotations: usize,
    pub plan_depth: usize,
    /// Fidelity of the noiseless plan to the exact evolution.
    pub plan_fidelity: f64,
    pub fidelity_vs_oracle: Option<Summary>,
    pub fidelity_vs_plan: Option<Summary>,
    pub rounds_total: Option<Summary>,
    pub rounds_per_rotation: Option<Summary>,
    pub attempts_per_arrival: Option<Summary>,
    pub outcomes: OutcomeHistogram,
    pub outcome_law: Option<OutcomeLaw>,
    pub sites: Vec<SiteRow>,
}

/// A configured run: plan, register and reference states are built once.
#[derive(Debug, Clone)]
pub struct Simulation {
    cfg: ProtocolConfig,
    plan: TrotterPlan,
    layout: RegisterLayout,
    engine: RoundEngine,
    initial: StateVector,
    oracle_state: StateVector,
    plan_state: StateVector,
}

impl Simulation {
    pub fn new(cfg: ProtocolConfig) -> Result<Self> {
        Simulation::with_cap(cfg, DEFAULT_QUBIT_CAP)
    }

    pub fn with_cap(cfg: ProtocolConfig, cap: usize) -> Result<Self> {
        cfg.validate()?;
        let layout = cfg.layout();
        if layout.total_qubits() > cap {
            return Err(Error::Resource {
                requested: layout.total_qubits(),
                cap,
            });
        }
        let plan = cfg.plan()?;
        let engine = RoundEngine::for_loss(&cfg.loss)?;
        let initial = cfg.initial_state.prepare(cfg.hamiltonian.n_qubits)?;
        let oracle_state = exact_evolution(&cfg.hamiltonian, cfg.t)?.apply(&initial)?;
        let plan_state = plan.apply_noiseless(&initial)?;
        Ok(Simulation {
            cfg,
            plan,
            layout,
            engine,
            initial,
            oracle_state,
            plan_state,
        })
    }

    pub fn config(&self) -> &ProtocolConfig {
        &self.cfg
    }

    pub fn plan(&self) -> &TrotterPlan {
        &self.plan
    }

    /// Fidelity of the noiseless plan to the exact evolution.
    pub fn plan_fidelity(&self) -> f64 {
        fidelity(&self.plan_state, &self.oracle_state).expect("same layout")
    }

    pub fn run_trajectory(&self, index: usize) -> Result<TrajectoryStats> {
        let start = Instant::now();
        let mut rng = trajectory_rng(self.cfg.master_seed, index);
        let controller = Controller::new(self.cfg.policy, self.engine.clone());
        let mut state = self.initial.embed(self.layout.clone())?;
        let mut frame = ErrorFrame::identity(self.cfg.hamiltonian.n_qubits);
        let mut records = Vec::new();
        let mut rounds_per_rotation = Vec::with_capacity(self.plan.rotation_count());
        let mut failure = None;
        for (i, rot) in self.plan.rotations().enumerate() {
            let run = controller.run_rotation(
                &mut state,
                rot.sites,
                (rot.axes.0, rot.axes.1),
                rot.angle,
                &mut frame,
                &mut rng,
            )?;
            rounds_per_rotation.push(run.physical_rounds());
            records.extend(run.records);
            if !run.completed {
                failure = Some(format!(
                    "rotation {i} on ({}, {}): {} rad remaining after {} rounds",
                    rot.sites.0, rot.sites.1, run.remaining, self.cfg.policy.max_rounds
                ));
                break;
            }
        }

        let mut histogram = OutcomeHistogram::default();
        let mut expected = [0.0; 4];
        let mut attempts = Vec::new();
        let mut pending = 0;
        for r in &records {
            histogram.add(r);
            if r.is_physical() {
                pending += 1;
            }
            if let RoundOutcome::Beam(_) = r.outcome {
                for (e, o) in expected.iter_mut().zip(BeamSplitterOutcome::ALL) {
                    *e += o.probability(r.eps_used);
                }
                if self.cfg.loss.p_loss > 0.0 {
                    attempts.push(pending);
                }
                pending = 0;
            }
        }

        let (fid_oracle, fid_plan) = if failure.is_none() {
            let mut corrected = state.data_state()?;
            corrected.apply_pauli(&frame.byproduct)?;
            (
                Some(fidelity(&corrected, &self.oracle_state)?),
                Some(fidelity(&corrected, &self.plan_state)?),
            )
        } else {
            (None, None)
        };
        Ok(TrajectoryStats {
            index,
            rounds_total: rounds_per_rotation.iter().sum(),
            rounds_per_rotation,
            outcome_histogram: histogram,
            attempts_per_arrival: attempts,
            expected_beam_counts: expected,
            final_frame: frame.byproduct,
            fidelity_vs_oracle: fid_oracle,
            fidelity_vs_plan: fid_plan,
            failure,
            records,
            wall_time: start.elapsed(),
        })
    }

    /// All trajectories, in index order.
    pub fn run_trajectories(&self) -> Result<Vec<TrajectoryStats>> {
        (0..self.cfg.trajectories)
            .into_par_iter()
            .map(|i| self.run_trajectory(i))
            .collect()
    }

    pub fn run_ensemble(&self) -> Result<(EnsembleReport, Vec<TrajectoryStats>)> {
        let trajs = self.run_trajectories()?;
        Ok((self.aggregate(&trajs), trajs))
    }

    pub fn aggregate(&self, trajs: &[TrajectoryStats]) -> EnsembleReport {
        let ok = || trajs.iter().filter(|t| !t.failed());
        let mut outcomes = OutcomeHistogram::default();
        let mut expected = [0.0; 4];
        for t in trajs {
            outcomes.merge(&t.outcome_histogram);
            for (e, x) in expected.iter_mut().zip(t.expected_beam_counts) {
                *e += x;
            }
        }
        let beam_rounds: u64 = outcomes.beam_counts().iter().sum();
        let outcome_law = (beam_rounds > 0).then(|| {
            let n = beam_rounds as f64;
            OutcomeLaw {
                beam_rounds,
                observed: outcomes.beam_counts().map(|c| c as f64 / n),
                expected: expected.map(|e| e / n),
            }
        });

        let rotations: Vec<_> = self.plan.rotations().collect();
        let mut per_term: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
        for t in trajs {
            for (r, &rounds) in rotations.iter().zip(&t.rounds_per_rotation) {
                let e = per_term.entry(r.term).or_default();
                e.0 += 1;
                e.1 += rounds;
            }
        }
        let sites = self
            .cfg
            .hamiltonian
            .terms
            .iter()
            .enumerate()
            .map(|(i, term)| {
                let (n, rounds) = per_term.get(&i).copied().unwrap_or_default();
                SiteRow {
                    term: i,
                    site_a: term.sites.0,
                    site_b: term.sites.1,
                    axes: term.axes.to_string(),
                    coeff: term.coeff,
                    rotations: n,
                    mean_rounds: if n == 0 { 0.0 } else { rounds as f64 / n as f64 },
                }
            })
            .collect();

        EnsembleReport {
            config: self.cfg.clone(),
            trajectories: trajs.len(),
            failed: trajs.iter().filter(|t| t.failed()).count(),
            plan_rotations: self.plan.rotation_count(),
            plan_depth: self.plan.depth(),
            plan_fidelity: self.plan_fidelity(),
            fidelity_vs_oracle: Summary::of(ok().filter_map(|t| t.fidelity_vs_oracle)),
            fidelity_vs_plan: Summary::of(ok().filter_map(|t| t.fidelity_vs_plan)),
            rounds_total: Summary::of(trajs.iter().map(|t| t.rounds_total as f64)),
            rounds_per_rotation: Summary::of(
                trajs
                    .iter()
                    .flat_map(|t| t.rounds_per_rotation.iter().map(|&r| r as f64)),
            ),
            attempts_per_arrival: Summary::of(
                trajs
                    .iter()
                    .flat_map(|t| t.attempts_per_arrival.iter().map(|&r| r as f64)),
            ),
            outcomes,
            outcome_law,
            sites,
        }
    }

    /// Noiseless plan against the exact evolution.
    pub fn oracle_baseline(&self) -> OracleReport {
        let u_exact = exact_evolution(&self.cfg.hamiltonian, self.cfg.t).expect("size checked at construction");
        OracleReport {
            n_qubits: self.cfg.hamiltonian.n_qubits,
            n_steps: self.cfg.n_steps,
            plan_fidelity: self.plan_fidelity(),
            operator_error: self.plan.noiseless_unitary().operator_norm_diff(&u_exact),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub n_qubits: usize,
    pub n_steps: usize,
    /// `|⟨ψ_exact|ψ_plan⟩|²` for the configured initial state.
    pub plan_fidelity: f64,
    /// `‖U_plan − U_exact‖` in operator norm.
    pub operator_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleReport {
    pub plan: TrotterPlan,
    pub rotations: usize,
    pub depth: usize,
    pub budget: RoundBudget,
}

pub fn schedule_report(cfg: &ProtocolConfig, confidence: f64) -> Result<ScheduleReport> {
    cfg.validate()?;
    let plan = cfg.plan()?;
    let budget = round_budget(&plan, &cfg.policy, confidence)?;
    Ok(ScheduleReport {
        rotations: plan.rotation_count(),
        depth: plan.depth(),
        plan,
        budget,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub eps: f64,
    pub samples: usize,
    pub counts: [u64; 4],
    pub observed: [f64; 4],
    pub expected: [f64; 4],
    /// Standard error of each observed frequency under the expected law.
    pub sem: [f64; 4],
    pub within_3_sigma: bool,
}

/// Repeats single rounds at a fixed ε and tallies the beam-splitter outcomes.
pub fn probe_round(eps: f64, samples: usize, seed: u64) -> Result<ProbeReport> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::Config(format!("eps = {eps} outside [0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = StateVector::random_data(RegisterLayout::protocol(2, false), &mut rng);
    let engine = RoundEngine::lossless();
    let mut counts = [0u64; 4];
    for _ in 0..samples {
        let res = engine.run_round(&mut state, (0, 1), eps, &mut rng)?;
        if let RoundOutcome::Beam(o) = res.outcome {
            let k = BeamSplitterOutcome::ALL.iter().position(|&x| x == o).expect("listed");
            counts[k] += 1;
        }
    }
    let n = samples.max(1) as f64;
    let expected = BeamSplitterOutcome::ALL.map(|o| o.probability(eps));
    let observed = counts.map(|c| c as f64 / n);
    let sem = expected.map(|p| (p * (1.0 - p) / n).sqrt());
    let within_3_sigma = (0..4).all(|k| (observed[k] - expected[k]).abs() <= 3.0 * sem[k] + 1e-12);
    Ok(ProbeReport {
        eps,
        samples,
        counts,
        observed,
        expected,
        sem,
        within_3_sigma,
    })
}

/// `CNOT` with control on qubit 0 and target on qubit 1.
pub fn cnot_operator() -> DenseOperator {
    let mut m = nalgebra::DMatrix::zeros(4, 4);
    for i in 0..4usize {
        let (c, t) = (i & 1, i >> 1);
        m[(c | ((t ^ c) << 1), i)] = Complex64::new(1.0, 0.0);
    }
    DenseOperator::unitary(m).expect("permutation")
}

/// Local unitaries `(A, B)` with `A·exp(iπ/4 X⊗X)·B = CNOT` up to phase,
/// each as `(on qubit 0, on qubit 1)`.
pub fn cnot_dressing() -> ((DenseOperator, DenseOperator), (DenseOperator, DenseOperator)) {
    let h = DenseOperator::hadamard();
    let s = DenseOperator::phase_s();
    let a = (s.mul(&h), h.mul(&s).mul(&h));
    let b = (h, DenseOperator::identity(1));
    (a, b)
}

/// `A·exp(i t X⊗X)·B` as a dense two-qubit operator.
pub fn dressed_operator(t: f64) -> DenseOperator {
    let ((a0, a1), (b0, b1)) = cnot_dressing();
    let xx: PauliString = PauliString::two_site(2, (0, 1), (PauliAxis::X, PauliAxis::X));
    let v = crate::compiler::pauli_rotation_operator(&xx, t);
    a0.tensor(&a1).mul(&v).mul(&b0.tensor(&b1))
}

/// `|⟨u, v⟩|/dim`, the overlap of two unitaries up to global phase.
pub fn unitary_overlap(u: &DenseOperator, v: &DenseOperator) -> f64 {
    let tr: Complex64 = (u.matrix().adjoint() * v.matrix()).trace();
    tr.norm() / u.dim() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnotInput {
    pub label: String,
    pub fidelity: f64,
    pub rounds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnotReport {
    pub loss: LossConfig,
    pub inputs: Vec<CnotInput>,
    /// Worst fidelity over the probe inputs.
    pub process_fidelity: f64,
    pub mean_fidelity: f64,
    pub total_rounds: usize,
}

fn cnot_inputs() -> Vec<(&'static str, [Complex64; 4])> {
    let z = Complex64::new(0.0, 0.0);
    let o = Complex64::new(1.0, 0.0);
    let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let ih = Complex64::new(0.0, std::f64::consts::FRAC_1_SQRT_2);
    // labels read qubit 0 then qubit 1
    vec![
        ("00", [o, z, z, z]),
        ("10", [z, o, z, z]),
        ("01", [z, z, o, z]),
        ("11", [z, z, z, o]),
        ("+0", [h, h, z, z]),
        // (|0⟩+i|1⟩)/√2 ⊗ (|0⟩−|1⟩)/√2
        ("(+i)(-)", [h * h, ih * h, -h * h, -ih * h]),
    ]
}

/// Runs `A·V(π/4)·B` through the feedback loop on six probe inputs.
pub fn cnot_demo(policy: &EpsilonPolicy, loss: &LossConfig, seed: u64) -> Result<CnotReport> {
    let engine = RoundEngine::for_loss(loss)?;
    let controller = Controller::new(*policy, engine);
    let layout = RegisterLayout::protocol(2, loss.backup_enabled);
    let ((a0, a1), (b0, b1)) = cnot_dressing();
    let cnot = cnot_operator();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inputs = Vec::new();
    for (label, amps) in cnot_inputs() {
        let input = StateVector::from_amplitudes(RegisterLayout::data_only(2), amps.to_vec())?;
        let mut state = input.embed(layout.clone())?;
        state.apply_local(0, &b0)?;
        state.apply_local(1, &b1)?;
        let mut frame = ErrorFrame::identity(2);
        let records = controller.realize_v(&mut state, (0, 1), std::f64::consts::FRAC_PI_4, &mut frame, &mut rng)?;
        let mut out = state.data_state()?;
        out.apply_pauli(&frame.byproduct)?;
        out.apply_local(0, &a0)?;
        out.apply_local(1, &a1)?;
        let target = cnot.apply(&input)?;
        inputs.push(CnotInput {
            label: label.to_string(),
            fidelity: fidelity(&out, &target)?,
            rounds: records.iter().filter(|r| r.is_physical()).count(),
        });
    }
    let process_fidelity = inputs.iter().map(|i| i.fidelity).fold(f64::INFINITY, f64::min);
    let mean_fidelity = inputs.iter().map(|i| i.fidelity).sum::<f64>() / inputs.len() as f64;
    Ok(CnotReport {
        loss: *loss,
        total_rounds: inputs.iter().map(|i| i.rounds).sum(),
        inputs,
        process_fidelity,
        mean_fidelity,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
}

/// Writes `report.json` or `report.csv` (one row per Hamiltonian term) and
/// the `trajectories.jsonl` audit log into `dir`.
pub fn emit_report(
    report: &EnsembleReport,
    trajectories: &[TrajectoryStats],
    format: ReportFormat,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let main = match format {
        ReportFormat::Json => {
            let path = dir.join("report.json");
            let mut text = serde_json::to_string_pretty(report)?;
            text.push('\n');
            fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
            path
        }
        ReportFormat::Csv => {
            let path = dir.join("report.csv");
            let mut w = csv::Writer::from_path(&path).map_err(|e| csv_error(&path, e))?;
            if report.sites.is_empty() {
                w.write_record(["term", "site_a", "site_b", "axes", "coeff", "rotations", "mean_rounds"])
                    .map_err(|e| csv_error(&path, e))?;
            }
            for row in &report.sites {
                w.serialize(row).map_err(|e| csv_error(&path, e))?;
            }
            w.flush().map_err(|e| Error::io(&path, e))?;
            path
        }
    };
    let log = dir.join("trajectories.jsonl");
    let mut text = String::new();
    for t in trajectories {
        text.push_str(&serde_json::to_string(t)?);
        text.push('\n');
    }
    fs::write(&log, text).map_err(|e| Error::io(&log, e))?;
    Ok(vec![main, log])
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Config(format!("{}: {other:?}", path.display())),
    }
}
