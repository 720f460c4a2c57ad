//! Hamiltonians as weighted sums of two-qubit Pauli terms, first-order
//! Trotter plans, parallel layering and round budgets.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::feedback::{EpsilonPolicy, RoundLaw};
use crate::pauli::{PauliAxis, PauliString};
use crate::statevec::{DenseOperator, StateVector};

/// Two Pauli axes, written `"XZ"` in JSON (first character for `sites.0`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AxisPair(pub PauliAxis, pub PauliAxis);

impl fmt::Display for AxisPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.0.to_char(), self.1.to_char())
    }
}

impl std::str::FromStr for AxisPair {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let chars: Vec<char> = s.chars().collect();
        let axis = |c: char| {
            PauliAxis::from_char(c)
                .filter(|&a| a != PauliAxis::I)
                .ok_or_else(|| Error::Config(format!("axes {s:?} must be two of X, Y, Z")))
        };
        match chars[..] {
            [a, b] => Ok(AxisPair(axis(a)?, axis(b)?)),
            _ => Err(Error::Config(format!("axes {s:?} must have exactly two characters"))),
        }
    }
}

impl Serialize for AxisPair {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for AxisPair {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `coeff · σ_k ⊗ σ_l` on two distinct sites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairTerm {
    pub sites: (usize, usize),
    pub axes: AxisPair,
    pub coeff: f64,
}

impl PairTerm {
    pub fn new(sites: (usize, usize), axes: (PauliAxis, PauliAxis), coeff: f64) -> Self {
        PairTerm {
            sites,
            axes: AxisPair(axes.0, axes.1),
            coeff,
        }
    }

    pub fn pauli(&self, n_qubits: usize) -> PauliString {
        PauliString::two_site(n_qubits, self.sites, (self.axes.0, self.axes.1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianSpec {
    pub n_qubits: usize,
    pub terms: Vec<PairTerm>,
}

impl HamiltonianSpec {
    pub fn new(n_qubits: usize, terms: Vec<PairTerm>) -> Result<Self> {
        let h = HamiltonianSpec { n_qubits, terms };
        h.validate()?;
        Ok(h)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let h: HamiltonianSpec = serde_json::from_str(s).map_err(|e| Error::Config(format!("hamiltonian: {e}")))?;
        h.validate()?;
        Ok(h)
    }

    /// Open chain on `n_qubits` sites with the same `(axes, coeff)` list on
    /// every bond, bond by bond.
    pub fn chain(n_qubits: usize, per_bond: &[(PauliAxis, PauliAxis, f64)]) -> Self {
        let terms = (0..n_qubits.saturating_sub(1))
            .flat_map(|x| {
                per_bond
                    .iter()
                    .map(move |&(k, l, c)| PairTerm::new((x, x + 1), (k, l), c))
            })
            .collect();
        HamiltonianSpec { n_qubits, terms }
    }

    pub fn validate(&self) -> Result<()> {
        for (i, t) in self.terms.iter().enumerate() {
            let (x, y) = t.sites;
            if x == y {
                return Err(Error::Config(format!("term {i}: sites must be distinct")));
            }
            if x >= self.n_qubits || y >= self.n_qubits {
                return Err(Error::Config(format!(
                    "term {i}: site out of range for {} qubits",
                    self.n_qubits
                )));
            }
            if t.axes.0 == PauliAxis::I || t.axes.1 == PauliAxis::I {
                return Err(Error::Config(format!("term {i}: identity axis")));
            }
            if !t.coeff.is_finite() {
                return Err(Error::Config(format!("term {i}: non-finite coefficient")));
            }
        }
        Ok(())
    }
}

/// One elementary `exp(i·angle·σ_k⊗σ_l)` rotation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rotation {
    pub sites: (usize, usize),
    pub axes: AxisPair,
    pub angle: f64,
    /// Index of the Hamiltonian term this rotation comes from.
    pub term: usize,
}

impl Rotation {
    pub fn pauli(&self, n_qubits: usize) -> PauliString {
        PauliString::two_site(n_qubits, self.sites, (self.axes.0, self.axes.1))
    }
}

/// A sweep of site-disjoint layers, repeated `n_steps` times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrotterPlan {
    pub n_qubits: usize,
    pub n_steps: usize,
    pub layers: Vec<Vec<Rotation>>,
}

impl TrotterPlan {
    pub fn rotations_per_sweep(&self) -> usize {
        self.layers.iter().map(Vec::len).sum()
    }

    pub fn rotation_count(&self) -> usize {
        self.rotations_per_sweep() * self.n_steps
    }

    /// Layers executed over the whole plan.
    pub fn depth(&self) -> usize {
        self.layers.len() * self.n_steps
    }

    /// Every rotation in execution order.
    pub fn rotations(&self) -> impl Iterator<Item = &Rotation> + '_ {
        (0..self.n_steps).flat_map(move |_| self.layers.iter().flatten())
    }

    /// Structural checks: layers are site-disjoint and each sweep applies
    /// every term of `h` exactly once.
    pub fn validate(&self, h: &HamiltonianSpec) -> Result<()> {
        let mut seen = vec![0usize; h.terms.len()];
        for (li, layer) in self.layers.iter().enumerate() {
            let mut used = vec![false; self.n_qubits];
            for r in layer {
                for s in [r.sites.0, r.sites.1] {
                    if std::mem::replace(&mut used[s], true) {
                        return Err(Error::usage(format!("layer {li} uses qubit {s} twice")));
                    }
                }
                let term = h
                    .terms
                    .get(r.term)
                    .ok_or_else(|| Error::usage(format!("rotation refers to missing term {}", r.term)))?;
                if term.sites != r.sites || term.axes != r.axes {
                    return Err(Error::usage(format!("rotation does not match term {}", r.term)));
                }
                seen[r.term] += 1;
            }
        }
        if let Some(i) = seen.iter().position(|&c| c != 1) {
            return Err(Error::usage(format!("term {i} appears {} times per sweep", seen[i])));
        }
        Ok(())
    }

    /// Executes the plan with exact rotations on a data-only state.
    pub fn apply_noiseless(&self, state: &StateVector) -> Result<StateVector> {
        let mut s = state.clone();
        for r in self.rotations() {
            s = pauli_rotation(&s, &r.pauli(self.n_qubits), r.angle)?;
        }
        Ok(s)
    }

    /// Dense unitary of the noiseless plan.
    pub fn noiseless_unitary(&self) -> DenseOperator {
        let mut sweep = DenseOperator::identity(self.n_qubits);
        for r in self.layers.iter().flatten() {
            sweep = pauli_rotation_operator(&r.pauli(self.n_qubits), r.angle).mul(&sweep);
        }
        let mut u = DenseOperator::identity(self.n_qubits);
        for _ in 0..self.n_steps {
            u = sweep.mul(&u);
        }
        u
    }
}

/// `exp(iθP)|ψ⟩ = cos θ |ψ⟩ + i sin θ P|ψ⟩` for a Pauli `P` on the low qubits.
pub fn pauli_rotation(state: &StateVector, p: &PauliString, theta: f64) -> Result<StateVector> {
    let mut flipped = state.clone();
    flipped.apply_pauli(p)?;
    let (s, c) = theta.sin_cos();
    let amps = state
        .amplitudes()
        .iter()
        .zip(flipped.amplitudes())
        .map(|(a, b)| a * c + b * num_complex::Complex64::new(0.0, s))
        .collect();
    StateVector::from_amplitudes(state.layout().clone(), amps)
}

pub fn pauli_rotation_operator(p: &PauliString, theta: f64) -> DenseOperator {
    let (s, c) = theta.sin_cos();
    let dense = p.to_dense();
    let n = p.len();
    let m = DenseOperator::identity(n).matrix().map(|z| z * c)
        + dense.matrix().map(|z| z * num_complex::Complex64::new(0.0, s));
    DenseOperator::new(m).expect("power-of-two square matrix")
}

/// First-order product formula: one sweep applies each term once, in input
/// order, with angle `t·λ/n`; the sweep repeats `n` times.
pub fn compile(h: &HamiltonianSpec, t: f64, n: usize) -> Result<TrotterPlan> {
    if n == 0 {
        return Err(Error::usage("Trotter step count must be at least 1"));
    }
    h.validate()?;
    let layers = h
        .terms
        .iter()
        .enumerate()
        .map(|(i, term)| {
            vec![Rotation {
                sites: term.sites,
                axes: term.axes,
                angle: t * term.coeff / n as f64,
                term: i,
            }]
        })
        .collect();
    Ok(TrotterPlan {
        n_qubits: h.n_qubits,
        n_steps: n,
        layers,
    })
}

/// Undirected interaction graph; edge order drives the greedy coloring.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionGraph {
    pub n_nodes: usize,
    pub edges: Vec<(usize, usize)>,
}

fn edge_key(e: (usize, usize)) -> (usize, usize) {
    (e.0.min(e.1), e.0.max(e.1))
}

impl InteractionGraph {
    /// Bonds of `h` in order of first appearance.
    pub fn from_hamiltonian(h: &HamiltonianSpec) -> Self {
        let mut edges: Vec<(usize, usize)> = Vec::new();
        for t in &h.terms {
            let k = edge_key(t.sites);
            if !edges.contains(&k) {
                edges.push(k);
            }
        }
        InteractionGraph {
            n_nodes: h.n_qubits,
            edges,
        }
    }

    pub fn path(n: usize) -> Self {
        InteractionGraph {
            n_nodes: n,
            edges: (0..n.saturating_sub(1)).map(|x| (x, x + 1)).collect(),
        }
    }

    pub fn ring(n: usize) -> Self {
        let mut g = Self::path(n);
        if n > 2 {
            g.edges.push((0, n - 1));
        }
        g
    }

    /// First-fit edge coloring: each edge takes the lowest color not used
    /// at either endpoint.
    pub fn greedy_edge_coloring(&self) -> Vec<usize> {
        let mut at_node: Vec<Vec<usize>> = vec![Vec::new(); self.n_nodes];
        self.edges
            .iter()
            .map(|&(a, b)| {
                let color = (0..)
                    .find(|c| !at_node[a].contains(c) && !at_node[b].contains(c))
                    .expect("unbounded range");
                at_node[a].push(color);
                at_node[b].push(color);
                color
            })
            .collect()
    }
}

/// Regroups a serial plan into layers of site-disjoint rotations.
///
/// Bonds of `adjacency` are edge-colored greedily. Each color class becomes
/// one layer per term sharing a bond, keeping the per-bond term order, so a
/// chain with one term per bond gets exactly two layers per sweep.
pub fn schedule_parallel(plan: &TrotterPlan, adjacency: &InteractionGraph) -> Result<TrotterPlan> {
    if plan.layers.iter().any(|l| l.len() > 1) {
        return Err(Error::usage("schedule_parallel expects a serial plan"));
    }
    let colors = adjacency.greedy_edge_coloring();
    let color_of: BTreeMap<(usize, usize), usize> = adjacency
        .edges
        .iter()
        .map(|&e| edge_key(e))
        .zip(colors.iter().copied())
        .collect();
    let n_colors = colors.iter().max().map_or(0, |c| c + 1);
    // per color: per bond: rotations in plan order
    let mut classes: Vec<BTreeMap<(usize, usize), Vec<Rotation>>> = vec![BTreeMap::new(); n_colors];
    for r in plan.layers.iter().flatten() {
        let key = edge_key(r.sites);
        let color = *color_of.get(&key).ok_or_else(|| {
            Error::usage(format!(
                "rotation on ({}, {}) is not an edge of the graph",
                key.0, key.1
            ))
        })?;
        classes[color].entry(key).or_default().push(r.clone());
    }
    let mut layers = Vec::new();
    for class in classes {
        let depth = class.values().map(Vec::len).max().unwrap_or(0);
        for j in 0..depth {
            let mut layer: Vec<Rotation> = class.values().filter_map(|rs| rs.get(j).cloned()).collect();
            layer.sort_by_key(|r| r.term);
            layers.push(layer);
        }
    }
    Ok(TrotterPlan {
        n_qubits: plan.n_qubits,
        n_steps: plan.n_steps,
        layers,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundBudget {
    /// Expected feedback rounds executing every rotation one after another.
    pub serial_rounds: f64,
    /// Round slots when each layer runs in parallel and is given just
    /// enough rounds to finish with probability `confidence`.
    pub parallel_depth: u64,
    /// Allowance per layer of one sweep.
    pub layer_allowance: Vec<u32>,
    pub confidence: f64,
}

/// Round estimates from the exact per-rotation round laws of `policy`.
pub fn round_budget(plan: &TrotterPlan, policy: &EpsilonPolicy, confidence: f64) -> Result<RoundBudget> {
    if !(0.0..1.0).contains(&confidence) {
        return Err(Error::usage("confidence must lie in [0, 1)"));
    }
    let mut laws: BTreeMap<u64, RoundLaw> = BTreeMap::new();
    let mut law_for = |angle: f64| -> RoundLaw {
        laws.entry(angle.to_bits())
            .or_insert_with(|| RoundLaw::for_rotation(angle, policy))
            .clone()
    };
    let mut sweep_rounds = 0.0;
    let mut layer_allowance = Vec::with_capacity(plan.layers.len());
    for layer in &plan.layers {
        let layer_laws: Vec<RoundLaw> = layer.iter().map(|r| law_for(r.angle)).collect();
        sweep_rounds += layer_laws.iter().map(RoundLaw::mean).sum::<f64>();
        layer_allowance.push(joint_allowance(&layer_laws, confidence));
    }
    let per_sweep_depth: u64 = layer_allowance.iter().map(|&r| r as u64).sum();
    Ok(RoundBudget {
        serial_rounds: sweep_rounds * plan.n_steps as f64,
        parallel_depth: per_sweep_depth * plan.n_steps as u64,
        layer_allowance,
        confidence,
    })
}

/// Smallest `r` with `Π_g P(T_g ≤ r) ≥ confidence`.
pub fn joint_allowance(laws: &[RoundLaw], confidence: f64) -> u32 {
    (0..)
        .find(|&r| laws.iter().map(|l| l.cdf(r)).product::<f64>() >= confidence)
        .expect("every law converges")
}

/// Smallest `r` with `(1 − (1 − p)^r)^gates ≥ confidence` for gates that
/// each succeed per round with probability `p`.
pub fn geometric_allowance(p_success: f64, gates: usize, confidence: f64) -> u32 {
    let law = RoundLaw::geometric(p_success);
    joint_allowance(&vec![law; gates], confidence)
}

/// `P(Bin(trials, p) ≥ needed)`, summed in log space.
pub fn binomial_at_least(trials: u64, needed: u64, p: f64) -> f64 {
    if needed == 0 {
        return 1.0;
    }
    if needed > trials {
        return 0.0;
    }
    let ln_fact = |k: u64| (1..=k).map(|i| (i as f64).ln()).sum::<f64>();
    let lnf_n = ln_fact(trials);
    let (lp, lq) = (p.ln(), (1.0 - p).ln());
    let mut lnf_k = ln_fact(needed);
    let mut lnf_nk = ln_fact(trials - needed);
    let mut total = 0.0;
    for k in needed..=trials {
        if k > needed {
            lnf_k += (k as f64).ln();
            lnf_nk -= ((trials - k + 1) as f64).ln();
        }
        total += (lnf_n - lnf_k - lnf_nk + k as f64 * lp + (trials - k) as f64 * lq).exp();
    }
    total.min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use PauliAxis::{X, Y, Z};

    #[test]
    fn term_json_format() {
        let h =
            HamiltonianSpec::from_json(r#"{"n_qubits": 3, "terms": [{"sites": [0, 2], "axes": "XZ", "coeff": 0.5}]}"#)
                .unwrap();
        assert_eq!(h.terms[0], PairTerm::new((0, 2), (X, Z), 0.5));
        let back = serde_json::to_string(&h).unwrap();
        assert!(back.contains(r#""axes":"XZ""#));
        assert!(back.contains(r#""sites":[0,2]"#));
    }

    #[test]
    fn invalid_terms_rejected() {
        for bad in [
            r#"{"n_qubits": 2, "terms": [{"sites": [0, 0], "axes": "XX", "coeff": 1}]}"#,
            r#"{"n_qubits": 2, "terms": [{"sites": [0, 2], "axes": "XX", "coeff": 1}]}"#,
            r#"{"n_qubits": 2, "terms": [{"sites": [0, 1], "axes": "XI", "coeff": 1}]}"#,
            r#"{"n_qubits": 2, "terms": [{"sites": [0, 1], "axes": "XYZ", "coeff": 1}]}"#,
        ] {
            assert!(
                matches!(HamiltonianSpec::from_json(bad), Err(Error::Config(_))),
                "{bad}"
            );
        }
    }

    #[test]
    fn single_term_plan() {
        let h = HamiltonianSpec::new(2, vec![PairTerm::new((0, 1), (X, X), 0.8)]).unwrap();
        let plan = compile(&h, 0.5, 1).unwrap();
        assert_eq!(plan.rotation_count(), 1);
        assert!((plan.layers[0][0].angle - 0.4).abs() < 1e-15);
        plan.validate(&h).unwrap();
    }

    #[test]
    fn empty_hamiltonian_gives_identity_plan() {
        let h = HamiltonianSpec::new(2, vec![]).unwrap();
        let plan = compile(&h, 1.0, 4).unwrap();
        assert_eq!(plan.rotation_count(), 0);
        assert!(plan.noiseless_unitary().max_abs_diff(&DenseOperator::identity(2)) < 1e-15);
        assert!(compile(&h, 1.0, 0).is_err());
    }

    #[test]
    fn path_and_ring_layers() {
        let h = HamiltonianSpec::chain(4, &[(X, X, 1.0)]);
        let plan = schedule_parallel(&compile(&h, 1.0, 1).unwrap(), &InteractionGraph::path(4)).unwrap();
        let sites: Vec<Vec<(usize, usize)>> = plan
            .layers
            .iter()
            .map(|l| l.iter().map(|r| r.sites).collect())
            .collect();
        assert_eq!(sites, vec![vec![(0, 1), (2, 3)], vec![(1, 2)]]);
        plan.validate(&h).unwrap();

        let h = HamiltonianSpec::chain(2, &[(Z, Y, 1.0)]);
        let plan = schedule_parallel(&compile(&h, 1.0, 1).unwrap(), &InteractionGraph::path(2)).unwrap();
        assert_eq!(plan.layers.len(), 1);

        let ring = InteractionGraph::ring(6);
        let terms = ring.edges.iter().map(|&e| PairTerm::new(e, (X, X), 1.0)).collect();
        let h = HamiltonianSpec::new(6, terms).unwrap();
        let plan = schedule_parallel(&compile(&h, 1.0, 1).unwrap(), &ring).unwrap();
        assert_eq!(plan.layers.len(), 2);
        assert!(plan.layers.iter().all(|l| l.len() == 3));
        plan.validate(&h).unwrap();
    }

    #[test]
    fn parallel_requires_known_edges() {
        let h = HamiltonianSpec::chain(3, &[(X, X, 1.0)]);
        let plan = compile(&h, 1.0, 1).unwrap();
        let g = InteractionGraph {
            n_nodes: 3,
            edges: vec![(0, 1)],
        };
        assert!(schedule_parallel(&plan, &g).is_err());
        let h4 = HamiltonianSpec::chain(4, &[(X, X, 1.0)]);
        let layered = schedule_parallel(&compile(&h4, 1.0, 1).unwrap(), &InteractionGraph::path(4)).unwrap();
        assert!(schedule_parallel(&layered, &InteractionGraph::path(4)).is_err());
    }

    #[test]
    fn validate_catches_broken_plans() {
        let h = HamiltonianSpec::chain(3, &[(X, X, 1.0)]);
        let mut plan = compile(&h, 1.0, 1).unwrap();
        let merged: Vec<Rotation> = plan.layers.iter().flatten().cloned().collect();
        let overlapping = TrotterPlan {
            layers: vec![merged],
            ..plan.clone()
        };
        assert!(overlapping.validate(&h).is_err());
        plan.layers.pop();
        assert!(plan.validate(&h).is_err());
    }

    #[test]
    fn budget_of_empty_plan_is_zero() {
        let h = HamiltonianSpec::new(2, vec![]).unwrap();
        let plan = compile(&h, 1.0, 3).unwrap();
        let b = round_budget(&plan, &EpsilonPolicy::default(), 0.99).unwrap();
        assert_eq!(b.serial_rounds, 0.0);
        assert_eq!(b.parallel_depth, 0);
    }

    #[test]
    fn geometric_allowance_example() {
        // (1 - 2^-r)^4 >= 0.99: r = 8 gives 0.98444, r = 9 gives 0.99221
        assert_eq!(geometric_allowance(0.5, 4, 0.99), 9);
        assert!((1.0f64 - 2f64.powi(-9)).powi(4) >= 0.99);
        assert!((1.0f64 - 2f64.powi(-8)).powi(4) < 0.99);
        assert!((RoundLaw::geometric(0.25).mean() - 4.0).abs() < 1e-9);
    }

    #[test]
    fn binomial_tail() {
        assert!((binomial_at_least(4, 2, 0.5) - 11.0 / 16.0).abs() < 1e-12);
        assert!((binomial_at_least(10, 0, 0.3) - 1.0).abs() < 1e-12);
        assert_eq!(binomial_at_least(3, 4, 0.5), 0.0);
        // brute force over all 2^12 outcome strings
        let (n, k, p) = (12u32, 7u32, 0.4f64);
        let brute: f64 = (0u32..1 << n)
            .filter(|m| m.count_ones() >= k)
            .map(|m| p.powi(m.count_ones() as i32) * (1.0 - p).powi((n - m.count_ones()) as i32))
            .sum();
        assert!((binomial_at_least(n as u64, k as u64, p) - brute).abs() < 1e-12);
    }
}
