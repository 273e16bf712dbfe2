//! Generator sets and exact Heisenberg-group operations.
//!
//! Finite-dimensional generators are Hermitian matrices. Phase-space generators
//! are linear forms `a·q + b·p + c·1` over the Heisenberg algebra, where the
//! canonical relation `[q_i, p_j] = iħ δ_ij` (with `ħ = 1`) makes every
//! commutator a multiple of the identity.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::classical::QuadraticHamiltonian;
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, RVector};

pub const HBAR: f64 = 1.0;

/// Hermiticity tolerance (max-norm) for matrix generators.
pub const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorKind {
    Matrix,
    PhaseSpace,
}

/// `a·q + b·p + identity·1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearForm {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub identity: f64,
}

impl LinearForm {
    pub fn degrees_of_freedom(&self) -> usize {
        self.a.len()
    }

    /// `(a, b)` stacked into one phase-space vector.
    pub fn coordinates(&self) -> RVector {
        RVector::from_iterator(2 * self.a.len(), self.a.iter().chain(&self.b).copied())
    }

    pub fn is_pure_identity(&self) -> bool {
        self.a.iter().chain(&self.b).all(|v| *v == 0.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum GeneratorRepr {
    Matrix(CMatrix),
    PhaseSpace(LinearForm),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Generator {
    label: String,
    repr: GeneratorRepr,
}

impl Generator {
    pub fn matrix(label: impl Into<String>, m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::InvalidInput(format!(
                "generator matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let dev = linalg::hermitian_deviation(&m);
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian(dev));
        }
        Ok(Self { label: label.into(), repr: GeneratorRepr::Matrix(m) })
    }

    pub fn phase_space(label: impl Into<String>, a: Vec<f64>, b: Vec<f64>, identity: f64) -> Result<Self> {
        if a.is_empty() || a.len() != b.len() {
            return Err(Error::InvalidInput(format!(
                "phase-space generator needs equal non-empty q/p blocks, got {} and {}",
                a.len(),
                b.len()
            )));
        }
        if a.iter().chain(&b).chain(std::iter::once(&identity)).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite phase-space coefficient".into()));
        }
        Ok(Self { label: label.into(), repr: GeneratorRepr::PhaseSpace(LinearForm { a, b, identity }) })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn repr(&self) -> &GeneratorRepr {
        &self.repr
    }

    pub fn kind(&self) -> GeneratorKind {
        match self.repr {
            GeneratorRepr::Matrix(_) => GeneratorKind::Matrix,
            GeneratorRepr::PhaseSpace(_) => GeneratorKind::PhaseSpace,
        }
    }

    /// Hilbert-space dimension (matrix kind) or phase-space dimension `2N`.
    pub fn dim(&self) -> usize {
        match &self.repr {
            GeneratorRepr::Matrix(m) => m.nrows(),
            GeneratorRepr::PhaseSpace(f) => 2 * f.degrees_of_freedom(),
        }
    }

    pub fn as_matrix(&self) -> Option<&CMatrix> {
        match &self.repr {
            GeneratorRepr::Matrix(m) => Some(m),
            GeneratorRepr::PhaseSpace(_) => None,
        }
    }

    pub fn as_form(&self) -> Option<&LinearForm> {
        match &self.repr {
            GeneratorRepr::PhaseSpace(f) => Some(f),
            GeneratorRepr::Matrix(_) => None,
        }
    }

    fn is_identity_like(&self) -> bool {
        match &self.repr {
            GeneratorRepr::Matrix(m) => {
                let d = m.nrows();
                let scale = linalg::trace(m).re / d as f64;
                linalg::max_abs(&(m - CMatrix::identity(d, d) * c(scale, 0.0))) <= HERMITIAN_TOL
            }
            GeneratorRepr::PhaseSpace(f) => f.is_pure_identity(),
        }
    }
}

/// Value of a commutator `[A, B]`.
#[derive(Clone, Debug, PartialEq)]
pub enum CommutatorValue {
    /// Anti-Hermitian matrix `AB − BA`.
    Matrix(CMatrix),
    /// Coefficient `c` in `[A, B] = i·c·1` (Heisenberg algebra).
    Central(f64),
}

impl CommutatorValue {
    pub fn is_zero(&self, tol: f64) -> bool {
        match self {
            CommutatorValue::Matrix(m) => linalg::max_abs(m) <= tol,
            CommutatorValue::Central(v) => v.abs() <= tol,
        }
    }
}

pub fn commutator(a: &Generator, b: &Generator) -> Result<CommutatorValue> {
    match (&a.repr, &b.repr) {
        (GeneratorRepr::Matrix(ma), GeneratorRepr::Matrix(mb)) => {
            if ma.nrows() != mb.nrows() {
                return Err(Error::DimensionMismatch { expected: ma.nrows(), found: mb.nrows() });
            }
            Ok(CommutatorValue::Matrix(linalg::commutator(ma, mb)))
        }
        (GeneratorRepr::PhaseSpace(fa), GeneratorRepr::PhaseSpace(fb)) => {
            if fa.a.len() != fb.a.len() {
                return Err(Error::DimensionMismatch { expected: fa.a.len(), found: fb.a.len() });
            }
            Ok(CommutatorValue::Central(HBAR * symplectic_pairing(&fa.a, &fa.b, &fb.a, &fb.b)))
        }
        _ => Err(Error::KindMismatch(format!("cannot commute `{}` with `{}`", a.label, b.label))),
    }
}

/// `a1·b2 − b1·a2`.
fn symplectic_pairing(a1: &[f64], b1: &[f64], a2: &[f64], b2: &[f64]) -> f64 {
    let ab: f64 = a1.iter().zip(b2).map(|(x, y)| x * y).sum();
    let ba: f64 = b1.iter().zip(a2).map(|(x, y)| x * y).sum();
    ab - ba
}

/// Ordered, labeled generator set of a single kind.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorSet {
    generators: Vec<Generator>,
    identity_index: Option<usize>,
}

impl GeneratorSet {
    pub fn new(generators: Vec<Generator>, identity_index: Option<usize>) -> Result<Self> {
        let first = generators
            .first()
            .ok_or_else(|| Error::InvalidInput("generator set is empty".into()))?;
        let (kind, dim) = (first.kind(), first.dim());
        let mut seen = HashSet::new();
        for g in &generators {
            if !seen.insert(g.label.as_str()) {
                return Err(Error::InvalidInput(format!("duplicate generator label `{}`", g.label)));
            }
            if g.kind() != kind {
                return Err(Error::KindMismatch(format!("generator `{}` has a different kind", g.label)));
            }
            if g.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: g.dim() });
            }
        }
        if let Some(idx) = identity_index {
            let g = generators
                .get(idx)
                .ok_or_else(|| Error::InvalidInput(format!("identity index {idx} out of range")))?;
            if !g.is_identity_like() {
                return Err(Error::InvalidInput(format!("generator `{}` is not a multiple of identity", g.label)));
            }
        }
        Ok(Self { generators, identity_index })
    }

    /// Single-qubit Pauli set `{X, Y, Z}`.
    pub fn pauli_qubit() -> Self {
        let gens = ['X', 'Y', 'Z']
            .into_iter()
            .map(|l| Generator::matrix(l.to_string(), linalg::pauli(l).unwrap()).unwrap())
            .collect();
        Self::new(gens, None).unwrap()
    }

    /// All non-identity Pauli strings on `n_qubits` qubits, in lexicographic
    /// `I < X < Y < Z` order (`XI`, `XX`, ...).
    pub fn pauli_strings(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > 3 {
            return Err(Error::InvalidInput(format!("pauli_strings supports 1..=3 qubits, got {n_qubits}")));
        }
        let letters = ['I', 'X', 'Y', 'Z'];
        let total = 4usize.pow(n_qubits as u32);
        let mut gens = Vec::with_capacity(total - 1);
        for code in 1..total {
            let mut label = String::new();
            let mut m = CMatrix::identity(1, 1);
            for pos in (0..n_qubits).rev() {
                let l = letters[(code / 4usize.pow(pos as u32)) % 4];
                label.push(l);
                m = linalg::kron(&m, &linalg::pauli(l).unwrap());
            }
            gens.push(Generator::matrix(label, m)?);
        }
        Self::new(gens, None)
    }

    /// Heisenberg algebra `{x_i, p_i, i·1}`; for `N = 1` the labels are
    /// `x`, `p`, `id`, otherwise `x1..xN`, `p1..pN`, `id`.
    pub fn heisenberg(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("Heisenberg algebra needs N >= 1".into()));
        }
        let name = |base: &str, i: usize| if n == 1 { base.to_string() } else { format!("{base}{}", i + 1) };
        let mut gens = Vec::with_capacity(2 * n + 1);
        for i in 0..n {
            let mut a = vec![0.0; n];
            a[i] = 1.0;
            gens.push(Generator::phase_space(name("x", i), a, vec![0.0; n], 0.0)?);
        }
        for i in 0..n {
            let mut b = vec![0.0; n];
            b[i] = 1.0;
            gens.push(Generator::phase_space(name("p", i), vec![0.0; n], b, 0.0)?);
        }
        gens.push(Generator::phase_space("id", vec![0.0; n], vec![0.0; n], 1.0)?);
        Self::new(gens, Some(2 * n))
    }

    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    pub fn kind(&self) -> GeneratorKind {
        self.generators[0].kind()
    }

    pub fn dim(&self) -> usize {
        self.generators[0].dim()
    }

    pub fn identity_index(&self) -> Option<usize> {
        self.identity_index
    }

    pub fn labels(&self) -> Vec<String> {
        self.generators.iter().map(|g| g.label.clone()).collect()
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.generators
            .iter()
            .position(|g| g.label == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    /// Indices of all generators except the identity.
    pub fn active_indices(&self) -> Vec<usize> {
        (0..self.generators.len()).filter(|&i| Some(i) != self.identity_index).collect()
    }

    pub fn active_labels(&self) -> Vec<String> {
        self.active_indices().into_iter().map(|i| self.generators[i].label.clone()).collect()
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let desc: GeneratorSetJson = serde_json::from_str(s)?;
        desc.build()
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&GeneratorSetJson::from_set(self))?)
    }
}

/// JSON description of a generator set.
///
/// Matrices are flat row-major lists of `[re, im]` pairs; phase-space
/// coefficient vectors are `[a_1..a_N, b_1..b_N, c]`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GeneratorSetJson {
    pub kind: GeneratorKind,
    pub labels: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrices: Option<Vec<Vec<[f64; 2]>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coeffs: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub identity_index: Option<usize>,
}

impl GeneratorSetJson {
    pub fn build(&self) -> Result<GeneratorSet> {
        let gens = match self.kind {
            GeneratorKind::Matrix => {
                let mats = self
                    .matrices
                    .as_ref()
                    .ok_or_else(|| Error::InvalidInput("matrix generator set needs `matrices`".into()))?;
                if mats.len() != self.labels.len() {
                    return Err(Error::DimensionMismatch { expected: self.labels.len(), found: mats.len() });
                }
                self.labels
                    .iter()
                    .zip(mats)
                    .map(|(label, flat)| {
                        let d = (flat.len() as f64).sqrt().round() as usize;
                        if d * d != flat.len() {
                            return Err(Error::InvalidInput(format!(
                                "matrix for `{label}` has {} entries, not a square",
                                flat.len()
                            )));
                        }
                        let m = CMatrix::from_row_iterator(d, d, flat.iter().map(|[re, im]| c(*re, *im)));
                        Generator::matrix(label.clone(), m)
                    })
                    .collect::<Result<Vec<_>>>()?
            }
            GeneratorKind::PhaseSpace => {
                let coeffs = self
                    .coeffs
                    .as_ref()
                    .ok_or_else(|| Error::InvalidInput("phase-space generator set needs `coeffs`".into()))?;
                if coeffs.len() != self.labels.len() {
                    return Err(Error::DimensionMismatch { expected: self.labels.len(), found: coeffs.len() });
                }
                self.labels
                    .iter()
                    .zip(coeffs)
                    .map(|(label, v)| {
                        if v.len() < 3 || v.len() % 2 == 0 {
                            return Err(Error::InvalidInput(format!(
                                "coefficient vector for `{label}` must have length 2N+1"
                            )));
                        }
                        let n = (v.len() - 1) / 2;
                        Generator::phase_space(label.clone(), v[..n].to_vec(), v[n..2 * n].to_vec(), v[2 * n])
                    })
                    .collect::<Result<Vec<_>>>()?
            }
        };
        GeneratorSet::new(gens, self.identity_index)
    }

    pub fn from_set(set: &GeneratorSet) -> Self {
        let labels = set.labels();
        match set.kind() {
            GeneratorKind::Matrix => Self {
                kind: GeneratorKind::Matrix,
                labels,
                matrices: Some(
                    set.generators
                        .iter()
                        .map(|g| {
                            let m = g.as_matrix().unwrap();
                            let d = m.nrows();
                            (0..d * d).map(|k| [m[(k / d, k % d)].re, m[(k / d, k % d)].im]).collect()
                        })
                        .collect(),
                ),
                coeffs: None,
                identity_index: set.identity_index,
            },
            GeneratorKind::PhaseSpace => Self {
                kind: GeneratorKind::PhaseSpace,
                labels,
                matrices: None,
                coeffs: Some(
                    set.generators
                        .iter()
                        .map(|g| {
                            let f = g.as_form().unwrap();
                            f.a.iter().chain(&f.b).copied().chain(std::iter::once(f.identity)).collect()
                        })
                        .collect(),
                ),
                identity_index: set.identity_index,
            },
        }
    }
}

/// Heisenberg-group element `exp(i(a·q + b·p + phase))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisplacementVector {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub phase: f64,
}

impl DisplacementVector {
    pub fn new(a: Vec<f64>, b: Vec<f64>, phase: f64) -> Result<Self> {
        if a.is_empty() || a.len() != b.len() {
            return Err(Error::InvalidInput(format!(
                "displacement needs equal non-empty a/b, got {} and {}",
                a.len(),
                b.len()
            )));
        }
        Ok(Self { a, b, phase })
    }

    pub fn zero(n: usize) -> Self {
        Self { a: vec![0.0; n], b: vec![0.0; n], phase: 0.0 }
    }

    /// Displacement generated by `ε·M` for a phase-space generator `M`.
    pub fn from_generator(g: &Generator, epsilon: f64) -> Result<Self> {
        let f = g
            .as_form()
            .ok_or_else(|| Error::KindMismatch(format!("`{}` is not a phase-space generator", g.label())))?;
        Ok(Self {
            a: f.a.iter().map(|v| epsilon * v).collect(),
            b: f.b.iter().map(|v| epsilon * v).collect(),
            phase: epsilon * f.identity,
        })
    }

    /// Phase-space vector `(a, b)`.
    pub fn from_coordinates(x: &RVector, phase: f64) -> Self {
        let n = x.len() / 2;
        Self { a: x.rows(0, n).iter().copied().collect(), b: x.rows(n, n).iter().copied().collect(), phase }
    }

    pub fn degrees_of_freedom(&self) -> usize {
        self.a.len()
    }

    pub fn coordinates(&self) -> RVector {
        RVector::from_iterator(2 * self.a.len(), self.a.iter().chain(&self.b).copied())
    }

    pub fn inverse(&self) -> Self {
        Self {
            a: self.a.iter().map(|v| -v).collect(),
            b: self.b.iter().map(|v| -v).collect(),
            phase: -self.phase,
        }
    }

    /// Coefficient distance ignoring the global phase.
    pub fn distance_mod_phase(&self, other: &Self) -> f64 {
        self.a
            .iter()
            .zip(&other.a)
            .chain(self.b.iter().zip(&other.b))
            .fold(0.0, |acc, (x, y)| acc.max((x - y).abs()))
    }
}

/// Exact group law: `exp(iD1)·exp(iD2) = exp(iD)` with
/// `D = D1 + D2 − (ħ/2)(a1·b2 − b1·a2)·1`.
pub fn compose_displacements(d1: &DisplacementVector, d2: &DisplacementVector) -> Result<DisplacementVector> {
    if d1.a.len() != d2.a.len() {
        return Err(Error::DimensionMismatch { expected: d1.a.len(), found: d2.a.len() });
    }
    let correction = -0.5 * HBAR * symplectic_pairing(&d1.a, &d1.b, &d2.a, &d2.b);
    Ok(DisplacementVector {
        a: d1.a.iter().zip(&d2.a).map(|(x, y)| x + y).collect(),
        b: d1.b.iter().zip(&d2.b).map(|(x, y)| x + y).collect(),
        phase: d1.phase + d2.phase + correction,
    })
}

/// Transports the linear form of `d` by the symplectic flow matrix of `h`:
/// `(a, b) → S(t)·(a, b)`. The central phase is untouched.
pub fn conjugate_by_quadratic_flow(
    d: &DisplacementVector,
    h: &QuadraticHamiltonian,
    t: f64,
) -> Result<DisplacementVector> {
    use crate::classical::PhaseSpaceHamiltonian;
    let n = h.degrees_of_freedom();
    if d.degrees_of_freedom() != n {
        return Err(Error::DimensionMismatch { expected: n, found: d.degrees_of_freedom() });
    }
    if d.a.iter().chain(&d.b).chain(std::iter::once(&d.phase)).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("displacement has non-finite entries".into()));
    }
    let moved = h.flow_matrix(t) * d.coordinates();
    Ok(DisplacementVector::from_coordinates(&moved, d.phase))
}
