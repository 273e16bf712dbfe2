//! Transfer matrix `T_IJ = [M_I, M_J]`, OTOC matrix `O_IJ(t) = [M_I(t), M_J]`
//! and their relation to the unitary response matrix.
//!
//! For Heisenberg generators every entry is a multiple of the identity,
//! `[A, B] = i·c·1`, and only the real coefficients `c` are stored. Indices
//! run over the non-identity generators, matching the response matrices.

use serde::{Deserialize, Serialize};

use crate::classical::{GaussianWignerState, PhaseSpaceHamiltonian, QuadraticHamiltonian};
use crate::error::{Error, Result};
use crate::generators::{commutator, conjugate_by_quadratic_flow, CommutatorValue, DisplacementVector, GeneratorKind, GeneratorSet};
use crate::geometry::CostWeights;
use crate::linalg::{self, CMatrix, CVector, RMatrix};
use crate::response::{displacement_response_exact, Hamiltonian, ResponseMatrix};

/// Commutator-valued matrix over generator-index pairs.
#[derive(Clone, Debug, PartialEq)]
pub enum OperatorEntries {
    /// Coefficients `c_IJ` of `i·c_IJ·1`.
    Central(RMatrix),
    /// Anti-Hermitian matrices, row-major over `(I, J)`.
    Matrix(Vec<Vec<CMatrix>>),
}

impl OperatorEntries {
    pub fn central(&self) -> Option<&RMatrix> {
        match self {
            Self::Central(c) => Some(c),
            Self::Matrix(_) => None,
        }
    }

    pub fn size(&self) -> usize {
        match self {
            Self::Central(c) => c.nrows(),
            Self::Matrix(m) => m.len(),
        }
    }

    /// Largest deviation from `E_IJ = −E_JI`.
    pub fn antisymmetry_defect(&self) -> f64 {
        match self {
            Self::Central(c) => linalg::max_abs_real(&(c + c.transpose())),
            Self::Matrix(m) => {
                let mut worst: f64 = 0.0;
                for (i, row) in m.iter().enumerate() {
                    for (j, entry) in row.iter().enumerate() {
                        worst = worst.max(linalg::max_abs(&(entry + &m[j][i])));
                    }
                }
                worst
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransferMatrix {
    pub labels: Vec<String>,
    pub entries: OperatorEntries,
}

impl TransferMatrix {
    /// `iT` for central entries (`iT_IJ = −c_IJ`).
    pub fn i_times(&self) -> Option<RMatrix> {
        self.entries.central().map(|c| -c)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OtocMatrix {
    pub labels: Vec<String>,
    pub entries: OperatorEntries,
    pub time: f64,
}

/// Serializable snapshot of central OTOC/transfer coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CentralCoefficients {
    pub labels: Vec<String>,
    pub coefficients: RMatrix,
    pub time: f64,
}

impl OtocMatrix {
    pub fn central_snapshot(&self) -> Option<CentralCoefficients> {
        self.entries.central().map(|c| CentralCoefficients {
            labels: self.labels.clone(),
            coefficients: c.clone(),
            time: self.time,
        })
    }
}

fn central_or_matrix(values: Vec<Vec<CommutatorValue>>) -> OperatorEntries {
    let n = values.len();
    if values.iter().flatten().all(|v| matches!(v, CommutatorValue::Central(_))) {
        let mut c = RMatrix::zeros(n, n);
        for (i, row) in values.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if let CommutatorValue::Central(x) = v {
                    c[(i, j)] = *x;
                }
            }
        }
        OperatorEntries::Central(c)
    } else {
        OperatorEntries::Matrix(
            values
                .into_iter()
                .map(|row| {
                    row.into_iter()
                        .map(|v| match v {
                            CommutatorValue::Matrix(m) => m,
                            CommutatorValue::Central(_) => unreachable!("mixed commutator kinds"),
                        })
                        .collect()
                })
                .collect(),
        )
    }
}

/// Pairwise commutators of the non-identity generators.
pub fn transfer_matrix(gens: &GeneratorSet) -> Result<TransferMatrix> {
    let active = gens.active_indices();
    let g = gens.generators();
    let values = active
        .iter()
        .map(|&i| active.iter().map(|&j| commutator(&g[i], &g[j])).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    Ok(TransferMatrix { labels: gens.active_labels(), entries: central_or_matrix(values) })
}

fn quadratic_of(h: &Hamiltonian, gens: &GeneratorSet) -> Result<QuadraticHamiltonian> {
    let Hamiltonian::PhaseSpace(ps) = h else {
        return Err(Error::KindMismatch("phase-space generators need a phase-space Hamiltonian".into()));
    };
    let quad = ps.as_quadratic().ok_or(Error::NonQuadratic)?;
    if 2 * quad.degrees_of_freedom() != gens.dim() {
        return Err(Error::DimensionMismatch { expected: gens.dim(), found: 2 * quad.degrees_of_freedom() });
    }
    Ok(quad.clone())
}

/// `O_IJ(t) = [M_I(t), M_J]`.
///
/// Heisenberg generators are transported exactly through the symplectic
/// flow matrix, `(a, b) → S(t)(a, b)`, the same transport used by the
/// displacement response pipeline. Matrix generators use `U†M_I U`,
/// `U = e^{−iHt}`.
pub fn otoc_matrix(h: &Hamiltonian, gens: &GeneratorSet, t: f64) -> Result<OtocMatrix> {
    let active = gens.active_indices();
    let g = gens.generators();
    let entries = match gens.kind() {
        GeneratorKind::PhaseSpace => {
            let quad = quadratic_of(h, gens)?;
            let n = active.len();
            let mut c = RMatrix::zeros(n, n);
            for (r, &i) in active.iter().enumerate() {
                let f = g[i].as_form().unwrap();
                let moved = conjugate_by_quadratic_flow(&DisplacementVector::new(f.a.clone(), f.b.clone(), 0.0)?, &quad, t)?;
                let evolved = crate::generators::Generator::phase_space("evolved", moved.a, moved.b, f.identity)?;
                for (col, &j) in active.iter().enumerate() {
                    if let CommutatorValue::Central(v) = commutator(&evolved, &g[j])? {
                        c[(r, col)] = v;
                    }
                }
            }
            OperatorEntries::Central(c)
        }
        GeneratorKind::Matrix => {
            let Hamiltonian::Matrix(hm) = h else {
                return Err(Error::KindMismatch("matrix generators need a matrix Hamiltonian".into()));
            };
            if hm.nrows() != gens.dim() {
                return Err(Error::DimensionMismatch { expected: gens.dim(), found: hm.nrows() });
            }
            let u = linalg::expm_hermitian(hm, t);
            let rows = active
                .iter()
                .map(|&i| {
                    let evolved = u.adjoint() * g[i].as_matrix().unwrap() * &u;
                    active.iter().map(|&j| linalg::commutator(&evolved, g[j].as_matrix().unwrap())).collect()
                })
                .collect();
            OperatorEntries::Matrix(rows)
        }
    };
    Ok(OtocMatrix { labels: gens.active_labels(), entries, time: t })
}

/// `max |(R·T − O)_IJ|` over the central coefficients.
pub fn check_correspondence(ru: &ResponseMatrix, t: &TransferMatrix, o: &OtocMatrix) -> Result<f64> {
    let (Some(ct), Some(co)) = (t.entries.central(), o.entries.central()) else {
        return Err(Error::KindMismatch("correspondence check needs central (Heisenberg) entries".into()));
    };
    let n = ru.entries.nrows();
    for m in [&ru.entries, ct, co] {
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, found: m.nrows() });
        }
    }
    if ru.labels != t.labels || t.labels != o.labels {
        return Err(Error::InvalidInput("response, transfer and OTOC labels differ".into()));
    }
    Ok(linalg::max_abs_real(&(&ru.entries * ct - co)))
}

/// Both sides of `⟨ψ|O†O|ψ⟩ = ⟨ψ|T†LT|ψ⟩` as matrices over index pairs.
///
/// With central entries `O = i·c_O`, `T = i·c_T` the left side is
/// `c_Oᵀc_O·⟨1⟩` and the right side `c_Tᵀ RᵀR c_T·⟨1⟩`, where `R` is the exact
/// displacement response and `⟨1⟩` is evaluated in the Gaussian state.
pub fn averaged_otoc_identity(
    psi: &GaussianWignerState,
    h: &QuadraticHamiltonian,
    gens: &GeneratorSet,
    t: f64,
) -> Result<(RMatrix, RMatrix)> {
    if gens.kind() != GeneratorKind::PhaseSpace {
        return Err(Error::KindMismatch("averaged identity needs Heisenberg generators".into()));
    }
    if psi.mean().len() != gens.dim() {
        return Err(Error::DimensionMismatch { expected: gens.dim(), found: psi.mean().len() });
    }
    let ham = Hamiltonian::quadratic(h.clone());
    let transfer = transfer_matrix(gens)?;
    let otoc = otoc_matrix(&ham, gens, t)?;
    let ct = transfer.entries.central().expect("Heisenberg commutators are central");
    let co = otoc.entries.central().expect("Heisenberg commutators are central");

    let r = displacement_response_exact(h, gens, t, &CostWeights::isotropic(gens))?.entries;
    let l = r.transpose() * &r;

    let dim = gens.dim();
    let norm = psi.expectation(1.0, &nalgebra::DVector::zeros(dim), &RMatrix::zeros(dim, dim));
    let lhs = co.transpose() * co * norm;
    let rhs = ct.transpose() * l * ct * norm;
    Ok((lhs, rhs))
}

/// `⟨ψ|C†C|ψ⟩` for the matrix-valued entry `C = O_IJ`.
pub fn commutator_square(o: &OtocMatrix, i: usize, j: usize, psi: &CVector) -> Result<f64> {
    let OperatorEntries::Matrix(m) = &o.entries else {
        return Err(Error::KindMismatch("commutator square needs matrix-valued entries".into()));
    };
    let entry = m
        .get(i)
        .and_then(|row| row.get(j))
        .ok_or_else(|| Error::InvalidInput(format!("index ({i}, {j}) out of range")))?;
    if psi.len() != entry.nrows() {
        return Err(Error::DimensionMismatch { expected: entry.nrows(), found: psi.len() });
    }
    let v = entry * psi;
    Ok(v.norm_squared())
}
