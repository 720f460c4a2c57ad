//! Stochastic simulation of quantum dynamics driven by photon emission,
//! incomplete Bell measurements and classical feedback.
//!
//! Two distant atoms never interact directly. Each emits a photon whose
//! polarization (or occupation) is entangled with the atomic qubit, the
//! photons meet on a beam splitter, and the detection pattern decides the
//! next emission strength. Repeating until success realizes
//! `exp(i t X⊗X)` exactly, up to a known Pauli byproduct that is tracked
//! classically. Local dressing turns this into any `exp(i t σ_k⊗σ_l)`, and
//! a first-order product formula stitches those into arbitrary sums of
//! two-qubit Hamiltonians.
//!
//! Module map:
//!
//! - [`pauli`]: phased Pauli strings and the byproduct frame.
//! - [`statevec`]: dense state vectors, measurement, exact evolution oracle.
//! - [`emission`]: the ε emission map, joint emission and the beam splitter.
//! - [`feedback`]: the repeat-until-success controller.
//! - [`compiler`]: Trotter plans, parallel layering and round budgets.
//! - [`loss`]: photon loss and the backup-qubit protocol.
//! - [`harness`]: trajectories, ensembles, the CNOT demo and reports.

pub mod compiler;
pub mod emission;
pub mod error;
pub mod feedback;
pub mod harness;
pub mod loss;
pub mod pauli;
pub mod statevec;

pub use error::{Error, Result};
pub use num_complex::Complex64;

pub use compiler::{HamiltonianSpec, PairTerm, TrotterPlan};
pub use emission::{BeamSplitterOutcome, PhotonEncoding};
pub use feedback::{Controller, EpsilonPolicy, PolicyMode, RoundRecord};
pub use loss::{LossConfig, LossPattern};
pub use pauli::{ErrorFrame, PauliAxis, PauliString};
pub use statevec::{DenseOperator, RegisterLayout, StateVector};
