//! Pauli strings with exact `i^k` phase tracking, and the byproduct frame
//! built on them.
//!
//! Textual notation is one character per qubit, qubit 0 first: `"XIZ"` is
//! `σ_X` on qubit 0, identity on qubit 1 and `σ_Z` on qubit 2. A phase may
//! be given as a prefix (`"i"`, `"-"`, `"-i"`, or `"+"`), e.g. `"-iXY"`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::statevec::DenseOperator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PauliAxis {
    I,
    X,
    Y,
    Z,
}

impl PauliAxis {
    pub const NON_TRIVIAL: [PauliAxis; 3] = [PauliAxis::X, PauliAxis::Y, PauliAxis::Z];

    fn index(self) -> u8 {
        match self {
            PauliAxis::I => 0,
            PauliAxis::X => 1,
            PauliAxis::Y => 2,
            PauliAxis::Z => 3,
        }
    }

    fn from_index(i: u8) -> Self {
        match i {
            0 => PauliAxis::I,
            1 => PauliAxis::X,
            2 => PauliAxis::Y,
            _ => PauliAxis::Z,
        }
    }

    /// Single-site product `self · other = i^phase · axis`.
    pub fn product(self, other: PauliAxis) -> (PauliAxis, u8) {
        let (a, b) = (self.index(), other.index());
        if a == 0 {
            return (other, 0);
        }
        if b == 0 {
            return (self, 0);
        }
        if a == b {
            return (PauliAxis::I, 0);
        }
        let c = PauliAxis::from_index(6 - a - b);
        // X→Y→Z cyclic order picks up +i, the reverse order -i.
        let phase = if (b + 3 - a) % 3 == 1 { 1 } else { 3 };
        (c, phase)
    }

    /// Whether the axis flips the computational basis state (X or Y).
    pub fn flips(self) -> bool {
        matches!(self, PauliAxis::X | PauliAxis::Y)
    }

    pub fn matrix(self) -> [[Complex64; 2]; 2] {
        let o = Complex64::new(0.0, 0.0);
        let l = Complex64::new(1.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        match self {
            PauliAxis::I => [[l, o], [o, l]],
            PauliAxis::X => [[o, l], [l, o]],
            PauliAxis::Y => [[o, -i], [i, o]],
            PauliAxis::Z => [[l, o], [o, -l]],
        }
    }

    pub fn to_char(self) -> char {
        match self {
            PauliAxis::I => 'I',
            PauliAxis::X => 'X',
            PauliAxis::Y => 'Y',
            PauliAxis::Z => 'Z',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c {
            'I' => Some(PauliAxis::I),
            'X' => Some(PauliAxis::X),
            'Y' => Some(PauliAxis::Y),
            'Z' => Some(PauliAxis::Z),
            _ => None,
        }
    }
}

/// A tensor product of single-qubit Paulis times `i^phase_power`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PauliString {
    axes: Vec<PauliAxis>,
    phase_power: u8,
}

impl PauliString {
    pub fn identity(n: usize) -> Self {
        PauliString {
            axes: vec![PauliAxis::I; n],
            phase_power: 0,
        }
    }

    pub fn new(axes: Vec<PauliAxis>, phase_power: u8) -> Self {
        PauliString {
            axes,
            phase_power: phase_power % 4,
        }
    }

    /// `axis` on `site`, identity elsewhere.
    pub fn single(n: usize, site: usize, axis: PauliAxis) -> Self {
        let mut p = Self::identity(n);
        p.axes[site] = axis;
        p
    }

    /// `σ_k` on `sites.0` and `σ_l` on `sites.1`.
    pub fn two_site(n: usize, sites: (usize, usize), axes: (PauliAxis, PauliAxis)) -> Self {
        let mut p = Self::identity(n);
        p.axes[sites.0] = axes.0;
        p.axes[sites.1] = axes.1;
        p
    }

    pub fn len(&self) -> usize {
        self.axes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.axes.is_empty()
    }

    pub fn axes(&self) -> &[PauliAxis] {
        &self.axes
    }

    pub fn axis(&self, site: usize) -> PauliAxis {
        self.axes[site]
    }

    pub fn phase_power(&self) -> u8 {
        self.phase_power
    }

    pub fn phase(&self) -> Complex64 {
        match self.phase_power {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        }
    }

    /// Same axes, phase dropped.
    pub fn without_phase(&self) -> Self {
        PauliString {
            axes: self.axes.clone(),
            phase_power: 0,
        }
    }

    pub fn is_identity_up_to_phase(&self) -> bool {
        self.axes.iter().all(|&a| a == PauliAxis::I)
    }

    pub fn weight(&self) -> usize {
        self.axes.iter().filter(|&&a| a != PauliAxis::I).count()
    }

    fn check_len(&self, other: &PauliString) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::usage(format!(
                "Pauli strings of length {} and {} cannot be combined",
                self.len(),
                other.len()
            )));
        }
        Ok(())
    }

    /// Exact product `self · other`.
    pub fn multiply(&self, other: &PauliString) -> Result<PauliString> {
        self.check_len(other)?;
        let mut phase = self.phase_power + other.phase_power;
        let axes = self
            .axes
            .iter()
            .zip(&other.axes)
            .map(|(&a, &b)| {
                let (c, p) = a.product(b);
                phase += p;
                c
            })
            .collect();
        Ok(PauliString::new(axes, phase))
    }

    pub fn commutes(&self, other: &PauliString) -> Result<bool> {
        self.check_len(other)?;
        let clashes = self
            .axes
            .iter()
            .zip(&other.axes)
            .filter(|(&a, &b)| a != PauliAxis::I && b != PauliAxis::I && a != b)
            .count();
        Ok(clashes % 2 == 0)
    }

    /// Dense `2^n × 2^n` matrix in the little-endian index convention.
    pub fn to_dense(&self) -> DenseOperator {
        let n = self.len();
        let dim = 1usize << n;
        let mut m = nalgebra::DMatrix::zeros(dim, dim);
        for col in 0..dim {
            let (row, amp) = self.action_on_basis(col);
            m[(row, col)] = amp;
        }
        DenseOperator::from_matrix_unchecked(m, true)
    }

    /// `P|col⟩ = amp |row⟩`; the phase prefix is included.
    pub fn action_on_basis(&self, col: usize) -> (usize, Complex64) {
        let mut row = col;
        let mut amp = self.phase();
        for (q, &axis) in self.axes.iter().enumerate() {
            let bit = (col >> q) & 1;
            let [[a00, a01], [a10, a11]] = axis.matrix();
            let (out_bit, factor) = match (axis, bit) {
                (PauliAxis::I | PauliAxis::Z, 0) => (0, a00),
                (PauliAxis::I | PauliAxis::Z, _) => (1, a11),
                (_, 0) => (1, a10),
                (_, _) => (0, a01),
            };
            row = (row & !(1 << q)) | (out_bit << q);
            amp *= factor;
        }
        (row, amp)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = ["", "i", "-", "-i"][self.phase_power as usize];
        f.write_str(prefix)?;
        for a in &self.axes {
            write!(f, "{}", a.to_char())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (phase, body) = if let Some(rest) = s.strip_prefix("-i") {
            (3, rest)
        } else if let Some(rest) = s.strip_prefix('i') {
            (1, rest)
        } else if let Some(rest) = s.strip_prefix('-') {
            (2, rest)
        } else if let Some(rest) = s.strip_prefix('+') {
            (0, rest)
        } else {
            (0, s)
        };
        let axes = body
            .chars()
            .map(|c| {
                PauliAxis::from_char(c).ok_or_else(|| Error::usage(format!("invalid Pauli character {c:?} in {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PauliString::new(axes, phase))
    }
}

impl Serialize for PauliString {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PauliString {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Returns `u` with `u σ_X u† = σ_k`: identity for X, `diag(1, i)` for Y,
/// Hadamard for Z.
pub fn conjugation_unitary(k: PauliAxis) -> Result<DenseOperator> {
    let o = Complex64::new(0.0, 0.0);
    let l = Complex64::new(1.0, 0.0);
    let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let m = match k {
        PauliAxis::I => {
            return Err(Error::usage("no conjugation maps σ_X to the identity"));
        }
        PauliAxis::X => [l, o, o, l],
        PauliAxis::Y => [l, o, o, Complex64::new(0.0, 1.0)],
        PauliAxis::Z => [h, h, h, -h],
    };
    Ok(DenseOperator::from_matrix_unchecked(
        nalgebra::DMatrix::from_row_slice(2, 2, &m),
        true,
    ))
}

/// Time-direction sign a byproduct imposes on a rotation about `target`:
/// `+1` when they commute, `-1` when they anticommute, since
/// `P·exp(iθT) = exp(±iθT)·P`.
pub fn frame_conjugate_direction(frame: &ErrorFrame, target: &PauliString) -> Result<i8> {
    Ok(if frame.byproduct.commutes(target)? { 1 } else { -1 })
}

/// The known Pauli byproduct accumulated by a trajectory. The simulator
/// state equals `byproduct · ideal` up to a global phase, so applying the
/// byproduct again recovers the ideal state.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ErrorFrame {
    pub byproduct: PauliString,
}

impl ErrorFrame {
    pub fn identity(n: usize) -> Self {
        ErrorFrame {
            byproduct: PauliString::identity(n),
        }
    }

    pub fn from_pauli(p: PauliString) -> Self {
        ErrorFrame {
            byproduct: p.without_phase(),
        }
    }

    pub fn len(&self) -> usize {
        self.byproduct.len()
    }

    pub fn is_empty(&self) -> bool {
        self.byproduct.is_empty()
    }

    /// Records that `p` was applied to the physical state after everything
    /// already in the frame. Global phase is discarded.
    pub fn record(&mut self, p: &PauliString) -> Result<()> {
        self.byproduct = p.multiply(&self.byproduct)?.without_phase();
        Ok(())
    }

    pub fn is_identity(&self) -> bool {
        self.byproduct.is_identity_up_to_phase()
    }
}

impl fmt::Display for ErrorFrame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.byproduct.fmt(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    #[test]
    fn identity_is_neutral() {
        let q = p("XYZI");
        assert_eq!(PauliString::identity(4).multiply(&q).unwrap(), q);
        assert_eq!(q.multiply(&PauliString::identity(4)).unwrap(), q);
    }

    #[test]
    fn single_site_products() {
        assert_eq!(p("X").multiply(&p("Y")).unwrap(), p("iZ"));
        assert_eq!(p("Y").multiply(&p("X")).unwrap(), p("-iZ"));
        assert_eq!(p("X").multiply(&p("Z")).unwrap(), p("-iY"));
        assert_eq!(p("Z").multiply(&p("X")).unwrap(), p("iY"));
        assert_eq!(p("XX").multiply(&p("XX")).unwrap(), p("II"));
        assert_eq!(p("XX").multiply(&p("XX")).unwrap().phase_power(), 0);
    }

    #[test]
    fn length_mismatch_is_usage_error() {
        assert!(matches!(p("XX").multiply(&p("X")), Err(Error::Usage(_))));
        assert!(matches!(p("XX").commutes(&p("X")), Err(Error::Usage(_))));
    }

    #[test]
    fn commutation_examples() {
        assert!(!p("XI").commutes(&p("ZI")).unwrap());
        assert!(p("XX").commutes(&p("ZZ")).unwrap());
        assert!(p("XYZ").commutes(&p("III")).unwrap());
    }

    #[test]
    fn frame_direction_examples() {
        let zz = p("ZZ");
        assert_eq!(frame_conjugate_direction(&ErrorFrame::identity(2), &zz).unwrap(), 1);
        let f = ErrorFrame::from_pauli(p("XI"));
        assert_eq!(frame_conjugate_direction(&f, &zz).unwrap(), -1);
        let f = ErrorFrame::from_pauli(p("XX"));
        assert_eq!(frame_conjugate_direction(&f, &p("XX")).unwrap(), 1);
    }

    #[test]
    fn conjugation_rejects_identity() {
        assert!(matches!(conjugation_unitary(PauliAxis::I), Err(Error::Usage(_))));
    }

    #[test]
    fn text_round_trip() {
        for s in ["XIZ", "iXY", "-Z", "-iIII", ""] {
            assert_eq!(p(s).to_string(), s);
        }
        assert_eq!(p("+XZ"), p("XZ"));
        assert!("XQ".parse::<PauliString>().is_err());
        assert!("xz".parse::<PauliString>().is_err());
    }

    #[test]
    fn frame_record_drops_phase() {
        let mut f = ErrorFrame::identity(2);
        f.record(&p("XI")).unwrap();
        f.record(&p("ZI")).unwrap();
        assert_eq!(f.byproduct, p("YI"));
        assert_eq!(f.byproduct.phase_power(), 0);
        let json = serde_json::to_string(&f).unwrap();
        assert_eq!(json, "\"YI\"");
        assert_eq!(serde_json::from_str::<ErrorFrame>(&json).unwrap(), f);
    }
}
