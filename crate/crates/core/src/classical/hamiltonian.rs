use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{symplectic_form, RMatrix, RVector};

/// A classical Hamiltonian on phase space `x = (q_1..q_N, p_1..p_N)`.
pub trait PhaseSpaceHamiltonian: Send + Sync {
    /// Number of degrees of freedom `N`.
    fn degrees_of_freedom(&self) -> usize;

    fn energy(&self, x: &RVector) -> f64;

    fn as_quadratic(&self) -> Option<&QuadraticHamiltonian> {
        None
    }

    /// Kinetic/potential split used by the symplectic integrator.
    fn separable(&self) -> Option<&dyn SeparableHamiltonian> {
        None
    }
}

/// `H(q, p) = T(p) + V(q)`, with user-supplied gradients and Hessians.
pub trait SeparableHamiltonian: Send + Sync {
    fn kinetic_gradient(&self, p: &RVector) -> RVector;
    fn kinetic_hessian(&self, p: &RVector) -> RMatrix;
    fn potential_gradient(&self, q: &RVector) -> RVector;
    fn potential_hessian(&self, q: &RVector) -> RMatrix;
}

/// `H(x) = ½ xᵀ A x` with `A` symmetric.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadraticHamiltonian {
    form: RMatrix,
    omega: Option<f64>,
}

impl QuadraticHamiltonian {
    pub fn new(form: RMatrix) -> Result<Self> {
        let n = form.nrows();
        if n == 0 || !n.is_multiple_of(2) || form.ncols() != n {
            return Err(Error::InvalidInput(format!(
                "quadratic form must be 2N x 2N, got {}x{}",
                form.nrows(),
                form.ncols()
            )));
        }
        if form.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("quadratic form has non-finite entries".into()));
        }
        let asym = (&form - form.transpose()).amax();
        if asym > 1e-12 * (1.0 + form.amax()) {
            return Err(Error::InvalidInput(format!("quadratic form is not symmetric ({asym:e})")));
        }
        let form = (&form + form.transpose()) * 0.5;
        Ok(Self { form, omega: None })
    }

    /// Inverted oscillator `H = p²/2 − Ω²q²/2`.
    pub fn inverted_oscillator(omega: f64) -> Self {
        Self {
            form: DMatrix::from_row_slice(2, 2, &[-omega * omega, 0.0, 0.0, 1.0]),
            omega: Some(omega),
        }
    }

    /// Regular oscillator `H = p²/2 + Ω²q²/2`.
    pub fn harmonic_oscillator(omega: f64) -> Self {
        Self {
            form: DMatrix::from_row_slice(2, 2, &[omega * omega, 0.0, 0.0, 1.0]),
            omega: Some(omega),
        }
    }

    /// Free particle `H = p²/2`.
    pub fn free_particle() -> Self {
        Self {
            form: DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]),
            omega: Some(0.0),
        }
    }

    pub fn form(&self) -> &RMatrix {
        &self.form
    }

    pub fn omega(&self) -> Option<f64> {
        self.omega
    }

    /// Generator `J·A` of the linear flow `ẋ = J·A·x`.
    pub fn flow_generator(&self) -> RMatrix {
        symplectic_form(self.degrees_of_freedom()) * &self.form
    }

    /// Symplectic transport matrix `S(t) = exp(t·J·A)`.
    pub fn flow_matrix(&self, t: f64) -> RMatrix {
        if t == 0.0 {
            let n = self.form.nrows();
            return RMatrix::identity(n, n);
        }
        (self.flow_generator() * t).exp()
    }

    fn is_block_diagonal(&self) -> bool {
        let n = self.degrees_of_freedom();
        (0..n).all(|i| (0..n).all(|j| self.form[(i, n + j)] == 0.0))
    }

    fn block(&self, row: usize, col: usize) -> RMatrix {
        let n = self.degrees_of_freedom();
        self.form.view((row * n, col * n), (n, n)).into_owned()
    }
}

impl PhaseSpaceHamiltonian for QuadraticHamiltonian {
    fn degrees_of_freedom(&self) -> usize {
        self.form.nrows() / 2
    }

    fn energy(&self, x: &RVector) -> f64 {
        0.5 * x.dot(&(&self.form * x))
    }

    fn as_quadratic(&self) -> Option<&QuadraticHamiltonian> {
        Some(self)
    }

    fn separable(&self) -> Option<&dyn SeparableHamiltonian> {
        self.is_block_diagonal().then_some(self as &dyn SeparableHamiltonian)
    }
}

impl SeparableHamiltonian for QuadraticHamiltonian {
    fn kinetic_gradient(&self, p: &RVector) -> RVector {
        self.block(1, 1) * p
    }

    fn kinetic_hessian(&self, _p: &RVector) -> RMatrix {
        self.block(1, 1)
    }

    fn potential_gradient(&self, q: &RVector) -> RVector {
        self.block(0, 0) * q
    }

    fn potential_hessian(&self, _q: &RVector) -> RMatrix {
        self.block(0, 0)
    }
}

/// One-dimensional `H = p²/2 + Σ_k c_k q^k`.
///
/// `coefficients[k]` multiplies `q^k`; the quartic test oscillator is
/// `[0, 0, 0, 0, 0.25]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolynomialOscillator {
    coefficients: Vec<f64>,
}

impl PolynomialOscillator {
    pub fn new(coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("non-finite polynomial coefficient".into()));
        }
        Ok(Self { coefficients })
    }

    pub fn quartic() -> Self {
        Self { coefficients: vec![0.0, 0.0, 0.0, 0.0, 0.25] }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    fn potential(&self, q: f64) -> f64 {
        self.coefficients.iter().rev().fold(0.0, |acc, c| acc * q + c)
    }

    fn derivative(&self, q: f64, order: usize) -> f64 {
        let mut total = 0.0;
        for (k, c) in self.coefficients.iter().enumerate().skip(order) {
            let falling: f64 = (0..order).map(|j| (k - j) as f64).product();
            total += c * falling * q.powi((k - order) as i32);
        }
        total
    }
}

impl PhaseSpaceHamiltonian for PolynomialOscillator {
    fn degrees_of_freedom(&self) -> usize {
        1
    }

    fn energy(&self, x: &RVector) -> f64 {
        0.5 * x[1] * x[1] + self.potential(x[0])
    }

    fn separable(&self) -> Option<&dyn SeparableHamiltonian> {
        Some(self)
    }
}

impl SeparableHamiltonian for PolynomialOscillator {
    fn kinetic_gradient(&self, p: &RVector) -> RVector {
        p.clone()
    }

    fn kinetic_hessian(&self, _p: &RVector) -> RMatrix {
        RMatrix::identity(1, 1)
    }

    fn potential_gradient(&self, q: &RVector) -> RVector {
        DVector::from_element(1, self.derivative(q[0], 1))
    }

    fn potential_hessian(&self, q: &RVector) -> RMatrix {
        DMatrix::from_element(1, 1, self.derivative(q[0], 2))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::symplectic_defect;

    #[test]
    fn iho_flow_matrix_closed_form() {
        let h = QuadraticHamiltonian::inverted_oscillator(2.0);
        let s = h.flow_matrix(0.5);
        let (ch, sh) = (1f64.cosh(), 1f64.sinh());
        let expected = DMatrix::from_row_slice(2, 2, &[ch, sh / 2.0, 2.0 * sh, ch]);
        assert!((s - expected).amax() < 1e-13);
    }

    #[test]
    fn flow_matrices_are_symplectic() {
        let a = DMatrix::from_row_slice(4, 4, &[
            1.0, 0.2, 0.3, 0.0, //
            0.2, -0.5, 0.1, 0.4, //
            0.3, 0.1, 2.0, 0.0, //
            0.0, 0.4, 0.0, 1.0,
        ]);
        let h = QuadraticHamiltonian::new(a).unwrap();
        for t in [0.3, 1.0, 2.5] {
            assert!(symplectic_defect(&h.flow_matrix(t)) < 1e-10);
        }
    }

    #[test]
    fn rejects_asymmetric_form() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(QuadraticHamiltonian::new(a).is_err());
        assert!(QuadraticHamiltonian::new(DMatrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn polynomial_derivatives() {
        let h = PolynomialOscillator::quartic();
        let q = DVector::from_element(1, 1.5);
        assert!((h.potential_gradient(&q)[0] - 1.5f64.powi(3)).abs() < 1e-14);
        assert!((h.potential_hessian(&q)[(0, 0)] - 3.0 * 1.5f64.powi(2)).abs() < 1e-14);
    }
}
