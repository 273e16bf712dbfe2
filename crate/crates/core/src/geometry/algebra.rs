use crate::error::{Error, Result};
use crate::generators::GeneratorSet;
use crate::linalg::{self, c, CMatrix, RMatrix, RVector};

use super::{require_matrix, CostWeights, SolverConfig};

const CLOSURE_TOL: f64 = 1e-9;

/// Active (non-identity) generators with their Gram matrix, weights and the
/// projection onto `span{M_I} ⊕ ℝ·1`.
pub(crate) struct Algebra {
    /// Labels of the full generator set (identity included).
    pub all_labels: Vec<String>,
    /// Positions of the active generators inside the full generator set.
    pub active: Vec<usize>,
    pub mats: Vec<CMatrix>,
    pub dim: usize,
    pub weights: RVector,
    /// `W⁻¹Γ`: maps momentum coordinates to controls.
    pub velocity_map: RMatrix,
    /// `Γ⁻¹W`: maps controls to momentum coordinates.
    pub momentum_map: RMatrix,
    ext_gram_inv: RMatrix,
    /// `structure[K][(I, J)]`: coordinate `K` of `−i[M_I, M_J]`.
    pub structure: Vec<RMatrix>,
    /// The active generators span all of `su(d)`.
    pub full: bool,
}

impl Algebra {
    pub fn new(gens: &GeneratorSet, w: &CostWeights, cfg: &SolverConfig) -> Result<Self> {
        require_matrix(gens)?;
        let dim = gens.dim();
        if dim > cfg.max_dim {
            return Err(Error::DimensionCap { dim, cap: cfg.max_dim });
        }
        let active = gens.active_indices();
        if active.is_empty() {
            return Err(Error::InvalidInput("generator set has no non-identity generators".into()));
        }
        let labels = gens.labels();
        let mats: Vec<CMatrix> = active.iter().map(|&i| gens.generators()[i].as_matrix().unwrap().clone()).collect();
        let weights = RVector::from_iterator(
            active.len(),
            active.iter().map(|&i| w.weight(&labels[i])).collect::<Result<Vec<_>>>()?,
        );
        if weights.iter().any(|&v| v <= 0.0) {
            return Err(Error::InvalidInput("active generators need positive weights".into()));
        }

        let m = mats.len();
        let mut ext: Vec<CMatrix> = mats.clone();
        ext.push(CMatrix::identity(dim, dim));
        let mut ext_gram = RMatrix::zeros(m + 1, m + 1);
        for a in 0..=m {
            for b in 0..=m {
                ext_gram[(a, b)] = linalg::trace(&(&ext[a] * &ext[b])).re;
            }
        }
        let ext_gram_inv = ext_gram
            .clone()
            .cholesky()
            .ok_or_else(|| {
                Error::InvalidInput("generators are linearly dependent or contain an unflagged identity".into())
            })?
            .inverse();
        let gram = ext_gram.view((0, 0), (m, m)).into_owned();
        let w_inv = RMatrix::from_diagonal(&weights.map(|v| 1.0 / v));
        let velocity_map = &w_inv * &gram;
        let momentum_map = gram
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidInput("singular generator Gram matrix".into()))?
            * RMatrix::from_diagonal(&weights);

        let mut algebra = Self {
            all_labels: labels.clone(),
            active,
            mats,
            dim,
            weights,
            velocity_map,
            momentum_map,
            ext_gram_inv,
            structure: Vec::new(),
            full: m + 1 == dim * dim,
        };
        algebra.check_closure()?;
        algebra.structure = algebra.structure_constants();
        Ok(algebra)
    }

    pub fn len(&self) -> usize {
        self.mats.len()
    }

    fn check_closure(&self) -> Result<()> {
        let mut worst: f64 = 0.0;
        for a in 0..self.len() {
            for b in (a + 1)..self.len() {
                let x = linalg::commutator(&self.mats[a], &self.mats[b]) * c(0.0, 1.0);
                let (_, _, residual) = self.project(&x);
                worst = worst.max(residual);
            }
        }
        if worst > CLOSURE_TOL {
            return Err(Error::NotClosed(worst));
        }
        Ok(())
    }

    fn structure_constants(&self) -> Vec<RMatrix> {
        let m = self.len();
        let mut out = vec![RMatrix::zeros(m, m); m];
        for a in 0..m {
            for b in 0..m {
                let x = linalg::commutator(&self.mats[a], &self.mats[b]) * c(0.0, -1.0);
                for (k, v) in self.coords(&x).iter().enumerate() {
                    out[k][(a, b)] = *v;
                }
            }
        }
        out
    }

    /// Coordinates of the Hermitian part of `x` on the active generators, its
    /// identity component, and the max-norm of what lies outside the span.
    pub fn project(&self, x: &CMatrix) -> (RVector, f64, f64) {
        let m = self.len();
        let mut rhs = RVector::zeros(m + 1);
        for (a, g) in self.mats.iter().enumerate() {
            rhs[a] = linalg::trace(&(g * x)).re;
        }
        rhs[m] = linalg::trace(x).re;
        let coeffs = &self.ext_gram_inv * rhs;
        let mut rebuilt = CMatrix::identity(self.dim, self.dim) * c(coeffs[m], 0.0);
        for (a, g) in self.mats.iter().enumerate() {
            rebuilt += g * c(coeffs[a], 0.0);
        }
        let herm = (x + x.adjoint()) * c(0.5, 0.0);
        let residual = linalg::max_abs(&(herm - rebuilt));
        (coeffs.rows(0, m).into_owned(), coeffs[m], residual)
    }

    /// Active coordinates of a Hermitian `x` (identity part dropped).
    pub fn coords(&self, x: &CMatrix) -> RVector {
        let m = self.len();
        let mut rhs = RVector::zeros(m + 1);
        let d = self.dim;
        for (a, g) in self.mats.iter().enumerate() {
            let mut acc = 0.0;
            for i in 0..d {
                for j in 0..d {
                    acc += (g[(i, j)] * x[(j, i)]).re;
                }
            }
            rhs[a] = acc;
        }
        rhs[m] = linalg::trace(x).re;
        (&self.ext_gram_inv * rhs).rows(0, m).into_owned()
    }

    /// `Σ_I v_I M_I`.
    pub fn combine(&self, v: &RVector) -> CMatrix {
        let mut h = CMatrix::zeros(self.dim, self.dim);
        for (g, &y) in self.mats.iter().zip(v.iter()) {
            if y != 0.0 {
                h += g * c(y, 0.0);
            }
        }
        h
    }

    /// `√(yᵀ W y)`.
    pub fn norm(&self, y: &RVector) -> f64 {
        y.iter().zip(self.weights.iter()).map(|(v, w)| w * v * v).sum::<f64>().sqrt()
    }

    /// Expands active-generator values into a vector over the full set.
    pub fn expand(&self, v: &RVector, total: usize) -> Vec<f64> {
        let mut out = vec![0.0; total];
        for (k, &i) in self.active.iter().enumerate() {
            out[i] = v[k];
        }
        out
    }
}
