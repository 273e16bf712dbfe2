//! Small dense linear-algebra helpers shared by the pipelines.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;
pub type RMatrix = DMatrix<f64>;
pub type RVector = DVector<f64>;

const I: Complex64 = Complex64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn pauli_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)])
}

pub fn pauli_y() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)])
}

pub fn pauli_z() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)])
}

/// Single-qubit Pauli matrix by letter (`I`, `X`, `Y`, `Z`).
pub fn pauli(letter: char) -> Option<CMatrix> {
    match letter {
        'I' => Some(CMatrix::identity(2, 2)),
        'X' => Some(pauli_x()),
        'Y' => Some(pauli_y()),
        'Z' => Some(pauli_z()),
        _ => None,
    }
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn max_abs_real(m: &RMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.abs()))
}

pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    max_abs(&(m - m.adjoint()))
}

pub fn trace(m: &CMatrix) -> Complex64 {
    m.diagonal().iter().sum()
}

/// Eigen-decomposition of a Hermitian matrix: `h = Q·diag(d)·Q†`.
pub fn hermitian_eigen(h: &CMatrix) -> (RVector, CMatrix) {
    let herm = (h + h.adjoint()) * c(0.5, 0.0);
    let eig = SymmetricEigen::new(herm);
    (eig.eigenvalues, eig.eigenvectors)
}

/// `exp(-i·s·h)` for Hermitian `h`, computed spectrally so the result is
/// unitary to rounding.
pub fn expm_hermitian(h: &CMatrix, s: f64) -> CMatrix {
    if h.nrows() == 2 {
        return expm_hermitian_2x2(h, s);
    }
    let (d, q) = hermitian_eigen(h);
    let phases = CVector::from_iterator(d.len(), d.iter().map(|&x| (-I * s * x).exp()));
    &q * CMatrix::from_diagonal(&phases) * q.adjoint()
}

// exp(-i s (h0 + h·σ)) = e^{-i s h0} (cos(s|h|) − i sin(s|h|) ĥ·σ)
fn expm_hermitian_2x2(h: &CMatrix, s: f64) -> CMatrix {
    let h0 = 0.5 * (h[(0, 0)].re + h[(1, 1)].re);
    let hz = 0.5 * (h[(0, 0)].re - h[(1, 1)].re);
    let off = 0.5 * (h[(1, 0)] + h[(0, 1)].conj());
    let (hx, hy) = (off.re, off.im);
    let r = (hx * hx + hy * hy + hz * hz).sqrt();
    let (cos, sinc) = if r * s.abs() < 1e-8 {
        (1.0 - 0.5 * (r * s).powi(2), s)
    } else {
        ((r * s).cos(), (r * s).sin() / r)
    };
    let ph = (-I * s * h0).exp();
    let mi = -I * sinc;
    CMatrix::from_row_slice(2, 2, &[
        ph * (cos + mi * hz),
        ph * mi * c(hx, -hy),
        ph * mi * c(hx, hy),
        ph * (cos - mi * hz),
    ])
}

/// Hermitian `X` with `v = exp(-i·X)` for unitary `v`; eigenphases are taken in
/// `(-π, π]`.
pub fn unitary_log(v: &CMatrix) -> CMatrix {
    let n = v.nrows();
    let (q, t) = Schur::new(v.clone()).unpack();
    let mut diag = CMatrix::zeros(n, n);
    for k in 0..n {
        let lam = t[(k, k)];
        // exp(-i x) = lam  =>  x = -arg(lam)
        diag[(k, k)] = c(-lam.arg(), 0.0);
    }
    let x = &q * diag * q.adjoint();
    (&x + x.adjoint()) * c(0.5, 0.0)
}

/// Standard symplectic form `[[0, I], [-I, 0]]` on `(q, p)` coordinates.
pub fn symplectic_form(n: usize) -> RMatrix {
    let mut j = RMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(i, n + i)] = 1.0;
        j[(n + i, i)] = -1.0;
    }
    j
}

/// Deviation `‖SᵀJS − J‖_max` of `s` from being symplectic.
pub fn symplectic_defect(s: &RMatrix) -> f64 {
    let n = s.nrows() / 2;
    let j = symplectic_form(n);
    max_abs_real(&(s.transpose() * &j * s - j))
}

/// Symplectic defect scaled by `max(1, ‖S‖²_max)`, the magnitude of the
/// entries of `SᵀJS`, so rounding in large matrices is not mistaken for a
/// violation.
pub fn relative_symplectic_defect(s: &RMatrix) -> f64 {
    symplectic_defect(s) / s.amax().powi(2).max(1.0)
}

/// `|det S − 1|` scaled like [`relative_symplectic_defect`] (2×2 and
/// block products of that size).
pub fn relative_determinant_defect(s: &RMatrix) -> f64 {
    (s.determinant() - 1.0).abs() / s.amax().powi(s.nrows() as i32).max(1.0)
}

/// Unitary completion whose first column is the unit vector `psi`.
pub fn unitary_with_first_column(psi: &CVector) -> CMatrix {
    let n = psi.len();
    let mut cols: Vec<CVector> = vec![psi.clone()];
    for k in 0..n {
        if cols.len() == n {
            break;
        }
        let mut v = CVector::zeros(n);
        v[k] = c(1.0, 0.0);
        for u in &cols {
            let proj = u.dotc(&v);
            v -= u * proj;
        }
        let norm = v.norm();
        if norm > 1e-8 {
            cols.push(v / c(norm, 0.0));
        }
    }
    CMatrix::from_columns(&cols)
}

/// Bloch vector `(⟨X⟩, ⟨Y⟩, ⟨Z⟩)` of a normalized qubit state.
pub fn bloch_vector(psi: &CVector) -> [f64; 3] {
    let ex = psi.dotc(&(pauli_x() * psi)).re;
    let ey = psi.dotc(&(pauli_y() * psi)).re;
    let ez = psi.dotc(&(pauli_z() * psi)).re;
    [ex, ey, ez]
}

/// Least-squares slope and RMS residual of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rms = (x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    (slope, intercept, rms)
}
