//! Dense state vectors for small registers.
//!
//! Qubit ordering is little-endian everywhere: qubit `q` is bit `q` of the
//! amplitude index. Two-qubit operators on `(q0, q1)` use the local index
//! `bit(q0) + 2·bit(q1)`, so `u[(1, 0)]` is the `|q0=1,q1=0⟩ ← |00⟩` entry.
//!
//! Photon modes are qubits with `|0⟩ ≡ |V⟩` and `|1⟩ ≡ |H⟩`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::compiler::HamiltonianSpec;
use crate::error::{Error, Result};
use crate::pauli::PauliString;

pub const NORM_TOL: f64 = 1e-12;
pub const PROJECTOR_TOL: f64 = 1e-10;
pub const DEFAULT_QUBIT_CAP: usize = 12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QubitRole {
    DataA,
    BackupB,
    PhotonMode,
}

/// Which qubit plays which part in the protocol.
///
/// Data qubits always occupy the lowest indices, so a frame over the data
/// register addresses the same positions as the full register.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegisterLayout {
    roles: Vec<QubitRole>,
    /// `backup_of[d]` is the B qubit paired with data qubit `d`.
    backup_of: Vec<Option<usize>>,
    /// Photon modes feeding the two beam-splitter ports. They are emptied
    /// after every detection, so one pair serves all cavities.
    photons: Vec<usize>,
}

impl RegisterLayout {
    pub fn data_only(n: usize) -> Self {
        RegisterLayout {
            roles: vec![QubitRole::DataA; n],
            backup_of: vec![None; n],
            photons: Vec::new(),
        }
    }

    /// `n_data` data qubits, optionally one backup qubit per data qubit,
    /// then two photon modes.
    pub fn protocol(n_data: usize, with_backup: bool) -> Self {
        let mut roles = vec![QubitRole::DataA; n_data];
        let mut backup_of = vec![None; n_data];
        if with_backup {
            for (d, slot) in backup_of.iter_mut().enumerate() {
                *slot = Some(n_data + d);
                roles.push(QubitRole::BackupB);
            }
        }
        let first_photon = roles.len();
        roles.push(QubitRole::PhotonMode);
        roles.push(QubitRole::PhotonMode);
        RegisterLayout {
            roles,
            backup_of,
            photons: vec![first_photon, first_photon + 1],
        }
    }

    pub fn total_qubits(&self) -> usize {
        self.roles.len()
    }

    pub fn n_data(&self) -> usize {
        self.backup_of.len()
    }

    pub fn role(&self, q: usize) -> QubitRole {
        self.roles[q]
    }

    pub fn backup(&self, data: usize) -> Option<usize> {
        self.backup_of.get(data).copied().flatten()
    }

    pub fn has_backups(&self) -> bool {
        self.backup_of.iter().all(Option::is_some) && !self.backup_of.is_empty()
    }

    pub fn photon_pair(&self) -> Result<(usize, usize)> {
        match self.photons[..] {
            [a, b] => Ok((a, b)),
            _ => Err(Error::usage("layout has no photon modes")),
        }
    }

    pub fn ancillas(&self) -> impl Iterator<Item = usize> + '_ {
        (self.n_data()..self.total_qubits()).filter(|&q| self.roles[q] != QubitRole::DataA)
    }

    pub(crate) fn check_data_pair(&self, pair: (usize, usize)) -> Result<()> {
        let (a, b) = pair;
        if a == b || a >= self.n_data() || b >= self.n_data() {
            return Err(Error::usage(format!(
                "({a}, {b}) is not a pair of distinct data qubits (register has {})",
                self.n_data()
            )));
        }
        Ok(())
    }
}

/// A square complex matrix acting on `log2(dim)` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    matrix: DMatrix<Complex64>,
    unitary: bool,
}

impl DenseOperator {
    /// Wraps `matrix`, computing the unitary flag.
    pub fn new(matrix: DMatrix<Complex64>) -> Result<Self> {
        if !matrix.is_square() || !matrix.nrows().is_power_of_two() {
            return Err(Error::usage(format!(
                "operator must be square with power-of-two dimension, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let unitary = is_unitary(&matrix, NORM_TOL);
        Ok(DenseOperator { matrix, unitary })
    }

    /// Like [`DenseOperator::new`] but fails unless the matrix is unitary.
    pub fn unitary(matrix: DMatrix<Complex64>) -> Result<Self> {
        let op = Self::new(matrix)?;
        if !op.unitary {
            return Err(Error::usage("matrix is not unitary"));
        }
        Ok(op)
    }

    pub(crate) fn from_matrix_unchecked(matrix: DMatrix<Complex64>, unitary: bool) -> Self {
        DenseOperator { matrix, unitary }
    }

    pub fn from_rows(dim: usize, entries: &[Complex64]) -> Result<Self> {
        Self::new(DMatrix::from_row_slice(dim, dim, entries))
    }

    pub fn identity(n_qubits: usize) -> Self {
        let d = 1 << n_qubits;
        DenseOperator::from_matrix_unchecked(DMatrix::identity(d, d), true)
    }

    pub fn hadamard() -> Self {
        let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        DenseOperator::from_matrix_unchecked(DMatrix::from_row_slice(2, 2, &[h, h, h, -h]), true)
    }

    pub fn pauli_x() -> Self {
        DenseOperator::from_matrix_unchecked(DMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]), true)
    }

    /// `diag(1, i)`.
    pub fn phase_s() -> Self {
        DenseOperator::from_matrix_unchecked(DMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, Complex64::i()]), true)
    }

    pub fn swap() -> Self {
        let mut m = DMatrix::zeros(4, 4);
        m[(0, 0)] = ONE;
        m[(1, 2)] = ONE;
        m[(2, 1)] = ONE;
        m[(3, 3)] = ONE;
        DenseOperator::from_matrix_unchecked(m, true)
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_qubits(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }

    pub fn is_unitary(&self) -> bool {
        self.unitary
    }

    pub fn adjoint(&self) -> Self {
        DenseOperator::from_matrix_unchecked(self.matrix.adjoint(), self.unitary)
    }

    /// Operator product `self · rhs` (apply `rhs` first).
    pub fn mul(&self, rhs: &DenseOperator) -> Self {
        let m = &self.matrix * &rhs.matrix;
        let unitary = self.unitary && rhs.unitary;
        DenseOperator::from_matrix_unchecked(m, unitary)
    }

    /// Tensor product in the little-endian convention: `self` acts on the
    /// low qubits, `high` on the qubits above them.
    pub fn tensor(&self, high: &DenseOperator) -> Self {
        let m = high.matrix.kronecker(&self.matrix);
        DenseOperator::from_matrix_unchecked(m, self.unitary && high.unitary)
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let unitary = self.unitary && (c.norm() - 1.0).abs() < NORM_TOL;
        DenseOperator::from_matrix_unchecked(self.matrix.map(|x| x * c), unitary)
    }

    /// Largest entrywise deviation from `other`.
    pub fn max_abs_diff(&self, other: &DenseOperator) -> f64 {
        (&self.matrix - &other.matrix)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Spectral norm of `self - other`.
    pub fn operator_norm_diff(&self, other: &DenseOperator) -> f64 {
        let d = &self.matrix - &other.matrix;
        d.singular_values().iter().copied().fold(0.0, f64::max)
    }

    pub fn apply(&self, state: &StateVector) -> Result<StateVector> {
        if self.dim() != state.amplitudes.len() {
            return Err(Error::usage(format!(
                "operator of dimension {} applied to state of dimension {}",
                self.dim(),
                state.amplitudes.len()
            )));
        }
        let v = nalgebra::DVector::from_column_slice(&state.amplitudes);
        let out = &self.matrix * v;
        Ok(StateVector {
            amplitudes: out.iter().copied().collect(),
            layout: state.layout.clone(),
        })
    }
}

fn is_unitary(m: &DMatrix<Complex64>, tol: f64) -> bool {
    let p = m.adjoint() * m;
    let n = m.nrows();
    (0..n).all(|i| (0..n).all(|j| (p[(i, j)] - if i == j { ONE } else { ZERO }).norm() <= tol))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: Vec<Complex64>,
    layout: RegisterLayout,
}

impl StateVector {
    /// `|0…0⟩` on the given layout.
    pub fn zero(layout: RegisterLayout) -> Self {
        let mut amplitudes = vec![ZERO; 1 << layout.total_qubits()];
        amplitudes[0] = ONE;
        StateVector { amplitudes, layout }
    }

    pub fn basis(layout: RegisterLayout, index: usize) -> Result<Self> {
        let dim = 1 << layout.total_qubits();
        if index >= dim {
            return Err(Error::usage(format!("basis index {index} out of range {dim}")));
        }
        let mut amplitudes = vec![ZERO; dim];
        amplitudes[index] = ONE;
        Ok(StateVector { amplitudes, layout })
    }

    /// Takes raw amplitudes and normalizes them.
    pub fn from_amplitudes(layout: RegisterLayout, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != 1 << layout.total_qubits() {
            return Err(Error::usage(format!(
                "expected {} amplitudes, got {}",
                1usize << layout.total_qubits(),
                amplitudes.len()
            )));
        }
        let mut s = StateVector { amplitudes, layout };
        let n = s.norm_sqr();
        if !n.is_finite() || n < 1e-300 {
            return Err(Error::usage("amplitudes have zero norm"));
        }
        s.scale(1.0 / n.sqrt());
        Ok(s)
    }

    /// Haar-random data state (normalized complex Gaussians), ancillas in `|0⟩`.
    pub fn random_data<R: Rng + ?Sized>(layout: RegisterLayout, rng: &mut R) -> Self {
        let n_data = layout.n_data();
        let data: Vec<Complex64> = (0..1usize << n_data)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        let small = StateVector::from_amplitudes(RegisterLayout::data_only(n_data), data)
            .expect("gaussian vector has nonzero norm");
        small.embed(layout).expect("data register sizes agree")
    }

    /// Places a data-only state into `layout` with every ancilla in `|0⟩`.
    pub fn embed(&self, layout: RegisterLayout) -> Result<StateVector> {
        if self.layout.n_data() != layout.n_data() || self.n_qubits() != self.layout.n_data() {
            return Err(Error::usage("embed expects a data-only state of matching size"));
        }
        let mut amplitudes = vec![ZERO; 1 << layout.total_qubits()];
        amplitudes[..self.amplitudes.len()].copy_from_slice(&self.amplitudes);
        Ok(StateVector { amplitudes, layout })
    }

    /// The data-register state, assuming every ancilla is in `|0⟩`.
    pub fn data_state(&self) -> Result<StateVector> {
        let n_data = self.layout.n_data();
        let amps: Vec<Complex64> = self.amplitudes[..1 << n_data].to_vec();
        let w: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (w - 1.0).abs() > 1e-9 {
            return Err(Error::protocol(format!(
                "ancillas are not reset (data-sector weight {w})"
            )));
        }
        StateVector::from_amplitudes(RegisterLayout::data_only(n_data), amps)
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    pub fn n_qubits(&self) -> usize {
        self.layout.total_qubits()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    fn scale(&mut self, f: f64) {
        for a in &mut self.amplitudes {
            *a *= f;
        }
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.n_qubits() {
            return Err(Error::usage(format!(
                "qubit {q} out of range for {}-qubit register",
                self.n_qubits()
            )));
        }
        Ok(())
    }

    pub fn apply_local(&mut self, qubit: usize, u: &DenseOperator) -> Result<()> {
        self.check_qubit(qubit)?;
        if u.dim() != 2 {
            return Err(Error::usage("apply_local needs a 2x2 operator"));
        }
        if !u.is_unitary() {
            return Err(Error::usage("apply_local needs a unitary operator"));
        }
        let m = u.matrix();
        let (m00, m01, m10, m11) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
        let bit = 1 << qubit;
        for i in 0..self.amplitudes.len() {
            if i & bit == 0 {
                let a0 = self.amplitudes[i];
                let a1 = self.amplitudes[i | bit];
                self.amplitudes[i] = m00 * a0 + m01 * a1;
                self.amplitudes[i | bit] = m10 * a0 + m11 * a1;
            }
        }
        Ok(())
    }

    pub fn apply_two_qubit(&mut self, qubits: (usize, usize), u: &DenseOperator) -> Result<()> {
        let (q0, q1) = qubits;
        self.check_qubit(q0)?;
        self.check_qubit(q1)?;
        if q0 == q1 {
            return Err(Error::usage(format!("two-qubit gate on repeated qubit {q0}")));
        }
        if u.dim() != 4 {
            return Err(Error::usage("apply_two_qubit needs a 4x4 operator"));
        }
        if !u.is_unitary() {
            return Err(Error::usage("apply_two_qubit needs a unitary operator"));
        }
        let m = u.matrix();
        let (b0, b1) = (1 << q0, 1 << q1);
        for i in 0..self.amplitudes.len() {
            if i & (b0 | b1) == 0 {
                let idx = [i, i | b0, i | b1, i | b0 | b1];
                let v = idx.map(|j| self.amplitudes[j]);
                for (r, &j) in idx.iter().enumerate() {
                    self.amplitudes[j] = (0..4).map(|c| m[(r, c)] * v[c]).sum();
                }
            }
        }
        Ok(())
    }

    /// Applies a Pauli string to the lowest `p.len()` qubits.
    pub fn apply_pauli(&mut self, p: &PauliString) -> Result<()> {
        if p.len() > self.n_qubits() {
            return Err(Error::usage("Pauli string longer than register"));
        }
        let low_mask = (1usize << p.len()) - 1;
        let mut out = vec![ZERO; self.amplitudes.len()];
        for (i, &a) in self.amplitudes.iter().enumerate() {
            let (row, amp) = p.action_on_basis(i & low_mask);
            out[(i & !low_mask) | row] = amp * a;
        }
        self.amplitudes = out;
        Ok(())
    }

    /// Probability that `qubit` reads `|1⟩`.
    pub fn excitation(&self, qubit: usize) -> f64 {
        let bit = 1 << qubit;
        self.amplitudes
            .iter()
            .enumerate()
            .filter(|(i, _)| i & bit != 0)
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    fn subset_index(i: usize, qubits: &[usize]) -> usize {
        qubits.iter().enumerate().map(|(j, &q)| ((i >> q) & 1) << j).sum()
    }

    fn subset_offset(local: usize, qubits: &[usize]) -> usize {
        qubits.iter().enumerate().map(|(j, &q)| ((local >> j) & 1) << q).sum()
    }

    /// Projective measurement on `qubits` (local index `Σ bit(qubits[j]) << j`).
    ///
    /// Returns the outcome index and its Born probability; the state is
    /// collapsed and renormalized in place.
    pub fn measure<R: Rng + ?Sized>(
        &mut self,
        qubits: &[usize],
        projectors: &[DenseOperator],
        rng: &mut R,
    ) -> Result<(usize, f64)> {
        let probs = self.outcome_probabilities(qubits, projectors)?;
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut outcome = None;
        for (j, &p) in probs.iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            outcome = Some(j);
            acc += p;
            if u < acc {
                break;
            }
        }
        let outcome = outcome.ok_or_else(|| Error::protocol("all outcomes have zero probability"))?;
        self.collapse(qubits, &projectors[outcome], probs[outcome]);
        Ok((outcome, probs[outcome]))
    }

    /// Born probabilities of a complete orthogonal projector set, without
    /// collapsing.
    pub fn outcome_probabilities(&self, qubits: &[usize], projectors: &[DenseOperator]) -> Result<Vec<f64>> {
        for &q in qubits {
            self.check_qubit(q)?;
        }
        check_projector_set(qubits.len(), projectors)?;
        let k = qubits.len();
        let sub = 1usize << k;
        let mask: usize = qubits.iter().map(|&q| 1 << q).sum();
        let mut probs = vec![0.0; projectors.len()];
        let mut v = vec![ZERO; sub];
        for rest in (0..self.amplitudes.len()).filter(|i| i & mask == 0) {
            for (l, slot) in v.iter_mut().enumerate() {
                *slot = self.amplitudes[rest | Self::subset_offset(l, qubits)];
            }
            for (p, prob) in projectors.iter().zip(probs.iter_mut()) {
                let m = p.matrix();
                for r in 0..sub {
                    let x: Complex64 = (0..sub).map(|c| m[(r, c)] * v[c]).sum();
                    *prob += x.norm_sqr();
                }
            }
        }
        Ok(probs)
    }

    fn collapse(&mut self, qubits: &[usize], projector: &DenseOperator, prob: f64) {
        let sub = 1usize << qubits.len();
        let mask: usize = qubits.iter().map(|&q| 1 << q).sum();
        let m = projector.matrix();
        let f = 1.0 / prob.sqrt();
        let mut v = vec![ZERO; sub];
        for rest in 0..self.amplitudes.len() {
            if rest & mask != 0 {
                continue;
            }
            for (l, slot) in v.iter_mut().enumerate() {
                *slot = self.amplitudes[rest | Self::subset_offset(l, qubits)];
            }
            for r in 0..sub {
                let x: Complex64 = (0..sub).map(|c| m[(r, c)] * v[c]).sum();
                self.amplitudes[rest | Self::subset_offset(r, qubits)] = x * f;
            }
        }
    }

    /// Measures one qubit in the computational basis.
    pub fn measure_computational<R: Rng + ?Sized>(&mut self, qubit: usize, rng: &mut R) -> Result<u8> {
        let (k, _) = self.measure(&[qubit], &computational_projectors(1), rng)?;
        Ok(k as u8)
    }

    /// Returns `qubits` to `|0…0⟩`, assuming they are not entangled with the
    /// rest of the register (true right after a rank-one projective
    /// measurement on them). Only the global phase of the rest is affected.
    pub fn reset_product_qubits(&mut self, qubits: &[usize]) -> Result<()> {
        for &q in qubits {
            self.check_qubit(q)?;
        }
        let sub = 1usize << qubits.len();
        let mut weights = vec![0.0; sub];
        for (i, a) in self.amplitudes.iter().enumerate() {
            weights[Self::subset_index(i, qubits)] += a.norm_sqr();
        }
        let (best, w) = weights
            .iter()
            .copied()
            .enumerate()
            .fold((0, -1.0), |acc, (j, w)| if w > acc.1 { (j, w) } else { acc });
        let mask: usize = qubits.iter().map(|&q| 1 << q).sum();
        let offset = Self::subset_offset(best, qubits);
        let f = 1.0 / w.sqrt();
        let mut out = vec![ZERO; self.amplitudes.len()];
        for rest in (0..self.amplitudes.len()).filter(|i| i & mask == 0) {
            out[rest] = self.amplitudes[rest | offset] * f;
        }
        self.amplitudes = out;
        Ok(())
    }

    /// Non-negligible amplitudes as `(index, re, im)` triples, for debugging.
    pub fn dump(&self) -> Vec<(usize, f64, f64)> {
        self.amplitudes
            .iter()
            .enumerate()
            .filter(|(_, a)| a.norm() >= 1e-14)
            .map(|(i, a)| (i, a.re, a.im))
            .collect()
    }

    pub fn dump_json(&self) -> String {
        serde_json::to_string(&self.dump()).expect("plain tuples serialize")
    }

    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        if self.layout != other.layout {
            return Err(Error::usage("states have different layouts"));
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }
}

/// `{|j⟩⟨j|}` over `k` qubits.
pub fn computational_projectors(k: usize) -> Vec<DenseOperator> {
    let d = 1 << k;
    (0..d)
        .map(|j| {
            let mut m = DMatrix::zeros(d, d);
            m[(j, j)] = ONE;
            DenseOperator::from_matrix_unchecked(m, false)
        })
        .collect()
}

/// Rank-one projector `|v⟩⟨v|` for a normalized `v`.
pub fn rank_one_projector(v: &[Complex64]) -> DenseOperator {
    let d = v.len();
    let m = DMatrix::from_fn(d, d, |r, c| v[r] * v[c].conj());
    DenseOperator::from_matrix_unchecked(m, false)
}

fn check_projector_set(k: usize, projectors: &[DenseOperator]) -> Result<()> {
    let d = 1 << k;
    if projectors.is_empty() {
        return Err(Error::usage("empty projector set"));
    }
    let mut sum = DMatrix::<Complex64>::zeros(d, d);
    for (i, p) in projectors.iter().enumerate() {
        if p.dim() != d {
            return Err(Error::usage(format!(
                "projector {i} has dimension {}, expected {d}",
                p.dim()
            )));
        }
        let pm = p.matrix();
        if (pm * pm - pm).iter().any(|z| z.norm() > PROJECTOR_TOL) {
            return Err(Error::usage(format!("operator {i} is not a projector")));
        }
        for (j, q) in projectors.iter().enumerate().skip(i + 1) {
            if (pm * q.matrix()).iter().any(|z| z.norm() > PROJECTOR_TOL) {
                return Err(Error::usage(format!("projectors {i} and {j} overlap")));
            }
        }
        sum += pm;
    }
    let id = DMatrix::<Complex64>::identity(d, d);
    if (sum - id).iter().any(|z| z.norm() > PROJECTOR_TOL) {
        return Err(Error::usage("projectors do not sum to the identity"));
    }
    Ok(())
}

/// `|⟨a|b⟩|²`.
pub fn fidelity(a: &StateVector, b: &StateVector) -> Result<f64> {
    Ok(a.inner(b)?.norm_sqr().min(1.0))
}

/// Dense matrix of `H = Σ λ σ_k ⊗ σ_l`.
pub fn hamiltonian_matrix(h: &HamiltonianSpec) -> DMatrix<Complex64> {
    let dim = 1usize << h.n_qubits;
    let mut m = DMatrix::zeros(dim, dim);
    for term in &h.terms {
        let p = term.pauli(h.n_qubits);
        for col in 0..dim {
            let (row, amp) = p.action_on_basis(col);
            m[(row, col)] += amp * term.coeff;
        }
    }
    m
}

/// `exp(i t H)` via Hermitian eigendecomposition.
pub fn exact_evolution(h: &HamiltonianSpec, t: f64) -> Result<DenseOperator> {
    exact_evolution_capped(h, t, DEFAULT_QUBIT_CAP)
}

pub fn exact_evolution_capped(h: &HamiltonianSpec, t: f64, cap: usize) -> Result<DenseOperator> {
    if h.n_qubits > cap {
        return Err(Error::Resource {
            requested: h.n_qubits,
            cap,
        });
    }
    Ok(hermitian_exp(hamiltonian_matrix(h), t))
}

/// `exp(i t M)` for Hermitian `M`.
pub fn hermitian_exp(m: DMatrix<Complex64>, t: f64) -> DenseOperator {
    let eig = SymmetricEigen::new(m);
    let v = &eig.eigenvectors;
    let phases = eig.eigenvalues.map(|l| Complex64::from_polar(1.0, t * l));
    let mut scaled = v.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= phases[j];
    }
    let u = scaled * v.adjoint();
    let unitary = is_unitary(&u, 1e-10);
    DenseOperator::from_matrix_unchecked(u, unitary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compiler::PairTerm;
    use crate::pauli::PauliAxis;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn xx(n: usize, coeff: f64) -> HamiltonianSpec {
        HamiltonianSpec {
            n_qubits: n,
            terms: vec![PairTerm::new((0, 1), (PauliAxis::X, PauliAxis::X), coeff)],
        }
    }

    #[test]
    fn protocol_layout_roles() {
        let l = RegisterLayout::protocol(3, true);
        assert_eq!(l.total_qubits(), 8);
        assert_eq!(l.backup(1), Some(4));
        assert_eq!(l.photon_pair().unwrap(), (6, 7));
        assert_eq!(l.ancillas().collect::<Vec<_>>(), vec![3, 4, 5, 6, 7]);
        assert!(l.has_backups());
        let l = RegisterLayout::protocol(2, false);
        assert_eq!(l.photon_pair().unwrap(), (2, 3));
        assert!(RegisterLayout::data_only(2).photon_pair().is_err());
    }

    #[test]
    fn local_gates() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s0 = StateVector::random_data(RegisterLayout::data_only(3), &mut rng);
        let mut s = s0.clone();
        s.apply_local(1, &DenseOperator::identity(1)).unwrap();
        assert_eq!(s, s0);

        let mut s = StateVector::zero(RegisterLayout::data_only(1));
        s.apply_local(0, &DenseOperator::pauli_x()).unwrap();
        assert_eq!(s.amplitudes(), &[c(0.0, 0.0), c(1.0, 0.0)]);

        let mut s = s0.clone();
        s.apply_local(2, &DenseOperator::hadamard()).unwrap();
        s.apply_local(2, &DenseOperator::hadamard()).unwrap();
        assert!(fidelity(&s, &s0).unwrap() > 1.0 - 1e-12);
        for (a, b) in s.amplitudes().iter().zip(s0.amplitudes()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn local_gate_errors() {
        let mut s = StateVector::zero(RegisterLayout::data_only(2));
        let bad = DenseOperator::new(DMatrix::from_row_slice(2, 2, &[ONE, ONE, ZERO, ONE])).unwrap();
        assert!(!bad.is_unitary());
        assert!(matches!(s.apply_local(0, &bad), Err(Error::Usage(_))));
        assert!(matches!(
            s.apply_local(5, &DenseOperator::pauli_x()),
            Err(Error::Usage(_))
        ));
        assert!(DenseOperator::unitary(DMatrix::from_row_slice(2, 2, &[ONE, ONE, ZERO, ONE])).is_err());
    }

    #[test]
    fn two_qubit_gates() {
        let l = RegisterLayout::data_only(2);
        // |q0=0, q1=1⟩ is index 2
        let mut s = StateVector::basis(l.clone(), 2).unwrap();
        s.apply_two_qubit((0, 1), &DenseOperator::swap()).unwrap();
        assert_eq!(s, StateVector::basis(l.clone(), 1).unwrap());

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s0 = StateVector::random_data(l, &mut rng);
        let xx = DenseOperator::pauli_x().tensor(&DenseOperator::pauli_x());
        let mut s = s0.clone();
        s.apply_two_qubit((0, 1), &DenseOperator::identity(2)).unwrap();
        assert_eq!(s, s0);
        s.apply_two_qubit((0, 1), &xx).unwrap();
        s.apply_two_qubit((1, 0), &xx).unwrap();
        assert!(fidelity(&s, &s0).unwrap() > 1.0 - 1e-12);
        assert!(matches!(s.apply_two_qubit((1, 1), &xx), Err(Error::Usage(_))));
    }

    #[test]
    fn measurement_basics() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut s = StateVector::zero(RegisterLayout::data_only(1));
        let (k, p) = s.measure(&[0], &computational_projectors(1), &mut rng).unwrap();
        assert_eq!((k, p), (0, 1.0));

        let mut s = StateVector::zero(RegisterLayout::data_only(1));
        s.apply_local(0, &DenseOperator::hadamard()).unwrap();
        let probs = s.outcome_probabilities(&[0], &computational_projectors(1)).unwrap();
        assert!((probs[0] - 0.5).abs() < 1e-12 && (probs[1] - 0.5).abs() < 1e-12);
        s.measure(&[0], &computational_projectors(1), &mut rng).unwrap();
        assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn incomplete_projectors_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut s = StateVector::zero(RegisterLayout::data_only(1));
        let half = &computational_projectors(1)[..1];
        assert!(matches!(s.measure(&[0], half, &mut rng), Err(Error::Usage(_))));
        let dup = vec![computational_projectors(1)[0].clone(); 2];
        assert!(matches!(s.measure(&[0], &dup, &mut rng), Err(Error::Usage(_))));
    }

    #[test]
    fn reset_after_measurement() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let layout = RegisterLayout::protocol(2, false);
        let mut s = StateVector::random_data(layout.clone(), &mut rng);
        let data = s.data_state().unwrap();
        s.apply_local(3, &DenseOperator::hadamard()).unwrap();
        s.apply_local(2, &DenseOperator::pauli_x()).unwrap();
        s.reset_product_qubits(&[2, 3]).unwrap();
        assert!(fidelity(&s.data_state().unwrap(), &data).unwrap() > 1.0 - 1e-12);
        assert!(s.excitation(2) < 1e-15 && s.excitation(3) < 1e-15);
    }

    #[test]
    fn evolution_examples() {
        let h = xx(2, 1.0);
        let id = exact_evolution(&h, 0.0).unwrap();
        assert!(id.max_abs_diff(&DenseOperator::identity(2)) < 1e-12);

        let t = 0.37;
        let u = exact_evolution(&h, t).unwrap();
        assert!(u.is_unitary());
        let xxm = h.terms[0].pauli(2).to_dense();
        let closed = DenseOperator::identity(2).scale(c(t.cos(), 0.0)).matrix() + xxm.scale(c(0.0, t.sin())).matrix();
        let closed = DenseOperator::new(closed).unwrap();
        assert!(u.max_abs_diff(&closed) < 1e-12);

        let minus = HamiltonianSpec {
            n_qubits: 2,
            terms: vec![PairTerm::new((0, 1), (PauliAxis::X, PauliAxis::X), -1.0)],
        };
        let v = exact_evolution(&minus, t).unwrap();
        assert!(u.mul(&v).max_abs_diff(&DenseOperator::identity(2)) < 1e-12);
    }

    #[test]
    fn evolution_cap() {
        let h = xx(13, 1.0);
        assert!(matches!(
            exact_evolution(&h, 0.1),
            Err(Error::Resource { requested: 13, cap: 12 })
        ));
    }

    #[test]
    fn fidelity_examples() {
        let l = RegisterLayout::data_only(2);
        let a = StateVector::basis(l.clone(), 0).unwrap();
        let b = StateVector::basis(l.clone(), 3).unwrap();
        assert_eq!(fidelity(&a, &a).unwrap(), 1.0);
        assert_eq!(fidelity(&a, &b).unwrap(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let r = StateVector::random_data(l, &mut rng);
        let ri = DenseOperator::identity(2).scale(Complex64::i()).apply(&r).unwrap();
        assert!((fidelity(&r, &ri).unwrap() - 1.0).abs() < 1e-12);
        let other = StateVector::zero(RegisterLayout::data_only(3));
        assert!(matches!(fidelity(&a, &other), Err(Error::Usage(_))));
    }

    #[test]
    fn dump_skips_small_amplitudes() {
        let l = RegisterLayout::data_only(2);
        let mut s = StateVector::zero(l);
        s.apply_local(0, &DenseOperator::hadamard()).unwrap();
        let d = s.dump();
        assert_eq!(d.len(), 2);
        assert_eq!(d[1].0, 1);
        let json = s.dump_json();
        let back: Vec<(usize, f64, f64)> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, d);
    }
}
