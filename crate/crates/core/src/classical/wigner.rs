use nalgebra::Cholesky;
use serde::{Deserialize, Serialize};

use super::hamiltonian::{PhaseSpaceHamiltonian, QuadraticHamiltonian};
use crate::error::{Error, Result};
use crate::generators::HBAR;
use crate::linalg::{RMatrix, RVector};

/// Gaussian Wigner function with mean `μ` and covariance `Σ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianWignerState {
    mean: RVector,
    covariance: RMatrix,
}

impl GaussianWignerState {
    /// Validates symmetry, positive definiteness and `det Σ ≥ (ħ/2)^{2N}`.
    pub fn new(mean: RVector, covariance: RMatrix) -> Result<Self> {
        let dim = mean.len();
        if dim == 0 || !dim.is_multiple_of(2) {
            return Err(Error::InvalidInput(format!("phase-space dimension must be even, got {dim}")));
        }
        if covariance.nrows() != dim || covariance.ncols() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: covariance.nrows() });
        }
        if !mean.iter().chain(covariance.iter()).all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("non-finite Gaussian parameters".into()));
        }
        let asym = (&covariance - covariance.transpose()).amax();
        if asym > 1e-12 * (1.0 + covariance.amax()) {
            return Err(Error::InvalidInput(format!("covariance is not symmetric ({asym:e})")));
        }
        if Cholesky::new(covariance.clone()).is_none() {
            return Err(Error::InvalidInput("covariance is not positive definite".into()));
        }
        let bound = (HBAR / 2.0).powi(dim as i32);
        let det = covariance.determinant();
        if det < bound - 1e-12 {
            return Err(Error::InvalidInput(format!("covariance determinant {det} violates uncertainty bound {bound}")));
        }
        Ok(Self { mean, covariance })
    }

    /// Minimum-uncertainty state `Σ = (ħ/2)·I` centred at `mean`.
    pub fn coherent(mean: RVector) -> Result<Self> {
        let dim = mean.len();
        Self::new(mean, RMatrix::identity(dim, dim) * (HBAR / 2.0))
    }

    pub fn vacuum(n: usize) -> Self {
        Self::coherent(RVector::zeros(2 * n)).unwrap()
    }

    pub fn mean(&self) -> &RVector {
        &self.mean
    }

    pub fn covariance(&self) -> &RMatrix {
        &self.covariance
    }

    /// `W'(x) = W(x + offset)`: same covariance, mean moved by `−offset`.
    pub fn argument_shifted(&self, offset: &RVector) -> Self {
        Self { mean: &self.mean - offset, covariance: self.covariance.clone() }
    }

    pub fn density(&self, x: &RVector) -> f64 {
        let dim = self.mean.len() as i32;
        let inv = self.covariance.clone().try_inverse().unwrap();
        let d = x - &self.mean;
        let norm = (2.0 * std::f64::consts::PI).powi(dim) * self.covariance.determinant();
        (-0.5 * d.dot(&(inv * &d))).exp() / norm.sqrt()
    }

    /// Phase-space average of the Weyl symbol `c + l·x + ½ xᵀQx`.
    pub fn expectation(&self, constant: f64, linear: &RVector, quadratic: &RMatrix) -> f64 {
        constant
            + linear.dot(&self.mean)
            + 0.5 * ((quadratic * &self.covariance).trace() + self.mean.dot(&(quadratic * &self.mean)))
    }
}

/// Liouville transport of a Gaussian under a quadratic Hamiltonian:
/// `μ → S(t)μ`, `Σ → S(t)ΣS(t)ᵀ`.
pub fn evolve_wigner_gaussian(
    w: &GaussianWignerState,
    h: &QuadraticHamiltonian,
    t: f64,
) -> Result<GaussianWignerState> {
    let dim = 2 * h.degrees_of_freedom();
    if w.mean.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: w.mean.len() });
    }
    let s = h.flow_matrix(t);
    let covariance = &s * &w.covariance * s.transpose();
    let covariance = (&covariance + covariance.transpose()) * 0.5;
    Ok(GaussianWignerState { mean: &s * &w.mean, covariance })
}
