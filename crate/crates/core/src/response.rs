//! Complexity linear response `R_{KL} = ∂C_L/∂ε` under an initial
//! perturbation `e^{iεM_K}`, the response matrix `L = RᵀR`, and finite-time
//! Lyapunov exponents from its spectrum.
//!
//! Rows index the perturbing generator `K`, columns the measured partial
//! complexity `L`; both run over the non-identity generators. Partial
//! complexities of matrix-kind protocols are measured in the orientation of
//! `exp(−i∫Y·M)`, so the perturbation `e^{+iεM_K}` enters with a sign flip and
//! `R(0) = 1`. Phase-space displacements are already expressed in the
//! `exp(+i(a·q + b·p))` orientation.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classical::{evolve_wigner_gaussian, GaussianWignerState, PhaseSpaceHamiltonian, QuadraticHamiltonian};
use crate::error::{Error, Result};
use crate::generators::{conjugate_by_quadratic_flow, DisplacementVector, GeneratorKind, GeneratorSet};
use crate::geometry::{self, heisenberg_complexity_in, Algebra, CostWeights, GeodesicResult, SolverConfig};
use crate::linalg::{self, CMatrix, CVector, RMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResponseFlavor {
    State,
    Unitary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResponseMatrix {
    pub flavor: ResponseFlavor,
    /// Row = perturbing generator, column = measured generator.
    pub entries: RMatrix,
    pub time: f64,
    pub labels: Vec<String>,
    /// Base finite-difference step; `0` marks an exact derivative.
    pub epsilon_used: f64,
    /// `(row, column)` entries whose Richardson or branch consistency check failed.
    pub unreliable: Vec<(usize, usize)>,
}

impl ResponseMatrix {
    pub fn new(flavor: ResponseFlavor, entries: RMatrix, time: f64, labels: Vec<String>, epsilon_used: f64) -> Self {
        Self { flavor, entries, time, labels, epsilon_used, unreliable: Vec::new() }
    }

    pub fn is_reliable(&self) -> bool {
        self.unreliable.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResponseSpectrum {
    pub l_matrix: RMatrix,
    /// Eigenvalues `s_i` of `L`, descending.
    pub eigenvalues: Vec<f64>,
    pub time: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    /// Exponents, descending.
    pub lambdas: Vec<f64>,
    pub times: Vec<f64>,
    pub fit_window: (f64, f64),
    /// Largest fit RMS over the branches.
    pub residual: f64,
}

/// Finite-difference settings for the response pipelines.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiffConfig {
    pub epsilon: f64,
    /// Combine steps `ε` and `ε/2` as `(4D(ε/2) − D(ε))/3`.
    pub richardson: bool,
    pub solver: SolverConfig,
    /// Cost weights by label; unit weights when absent.
    pub weights: Option<BTreeMap<String, f64>>,
}

impl Default for DiffConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-5,
            richardson: true,
            solver: SolverConfig { n_starts: 24, tol_endpoint: 1e-12, ..SolverConfig::default() },
            weights: None,
        }
    }
}

impl DiffConfig {
    fn cost_weights(&self, gens: &GeneratorSet) -> Result<CostWeights> {
        match &self.weights {
            Some(map) => CostWeights::new(gens, map.clone()),
            None => Ok(CostWeights::isotropic(gens)),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::InvalidInput(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        self.solver.validate()
    }

    fn steps(&self) -> Vec<f64> {
        if self.richardson {
            vec![self.epsilon, 0.5 * self.epsilon]
        } else {
            vec![self.epsilon]
        }
    }
}

/// Dynamics driving a response computation.
#[derive(Clone)]
pub enum Hamiltonian {
    Matrix(CMatrix),
    PhaseSpace(Arc<dyn PhaseSpaceHamiltonian>),
}

impl Hamiltonian {
    pub fn matrix(h: CMatrix) -> Result<Self> {
        if h.nrows() != h.ncols() {
            return Err(Error::InvalidInput("Hamiltonian matrix must be square".into()));
        }
        let dev = linalg::hermitian_deviation(&h);
        if dev > crate::generators::HERMITIAN_TOL {
            return Err(Error::NotHermitian(dev));
        }
        Ok(Self::Matrix(h))
    }

    pub fn quadratic(h: QuadraticHamiltonian) -> Self {
        Self::PhaseSpace(Arc::new(h))
    }

    pub fn kind(&self) -> GeneratorKind {
        match self {
            Self::Matrix(_) => GeneratorKind::Matrix,
            Self::PhaseSpace(_) => GeneratorKind::PhaseSpace,
        }
    }

    fn require_quadratic(&self) -> Result<&QuadraticHamiltonian> {
        match self {
            Self::PhaseSpace(h) => h.as_quadratic().ok_or(Error::NonQuadratic),
            Self::Matrix(_) => Err(Error::KindMismatch("expected a phase-space Hamiltonian".into())),
        }
    }

    fn require_matrix(&self, dim: usize) -> Result<&CMatrix> {
        match self {
            Self::Matrix(h) if h.nrows() == dim => Ok(h),
            Self::Matrix(h) => Err(Error::DimensionMismatch { expected: dim, found: h.nrows() }),
            Self::PhaseSpace(_) => Err(Error::KindMismatch("expected a matrix Hamiltonian".into())),
        }
    }
}

impl fmt::Debug for Hamiltonian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Matrix(h) => f.debug_tuple("Matrix").field(h).finish(),
            Self::PhaseSpace(h) => f
                .debug_struct("PhaseSpace")
                .field("degrees_of_freedom", &h.degrees_of_freedom())
                .field("quadratic", &h.as_quadratic())
                .finish(),
        }
    }
}

/// Initial state of a state-response computation.
#[derive(Clone, Debug, PartialEq)]
pub enum StateDescriptor {
    Gaussian(GaussianWignerState),
    Vector(CVector),
}

fn check_kinds(h: &Hamiltonian, gens: &GeneratorSet) -> Result<()> {
    if h.kind() != gens.kind() {
        return Err(Error::KindMismatch("Hamiltonian and generators have different kinds".into()));
    }
    Ok(())
}

fn quadratic_for(h: &Hamiltonian, gens: &GeneratorSet) -> Result<QuadraticHamiltonian> {
    let quad = h.require_quadratic()?;
    if 2 * quad.degrees_of_freedom() != gens.dim() {
        return Err(Error::DimensionMismatch { expected: gens.dim(), found: 2 * quad.degrees_of_freedom() });
    }
    Ok(quad.clone())
}

fn active_partials(g: &GeodesicResult, gens: &GeneratorSet) -> Vec<f64> {
    gens.active_indices().into_iter().map(|i| g.partials[i]).collect()
}

/// Unitary-flavor response `∂C_L[e^{−iHt} e^{iεM_K} e^{iHt}]/∂ε` at `ε = 0`.
///
/// Phase-space generators with a quadratic Hamiltonian use the exact
/// displacement transport `(a, b) → S(t)(a, b)` at every stencil point;
/// matrix generators solve a geodesic per stencil point.
pub fn unitary_response_matrix(
    h: &Hamiltonian,
    gens: &GeneratorSet,
    t: f64,
    cfg: &DiffConfig,
) -> Result<ResponseMatrix> {
    check_kinds(h, gens)?;
    cfg.validate()?;
    let weights = cfg.cost_weights(gens)?;
    match gens.kind() {
        GeneratorKind::PhaseSpace => {
            let quad = quadratic_for(h, gens)?;
            let partials = |k: usize, eps: f64| -> Result<(Vec<f64>, usize)> {
                let d = DisplacementVector::from_generator(&gens.generators()[k], eps)?;
                let moved = conjugate_by_quadratic_flow(&d, &quad, t)?;
                let g = heisenberg_complexity_in(&moved, gens, &weights)?;
                Ok((active_partials(&g, gens), g.multiplicity))
            };
            finite_difference(gens, t, cfg, ResponseFlavor::Unitary, 1.0, partials)
        }
        GeneratorKind::Matrix => {
            let hm = h.require_matrix(gens.dim())?;
            let alg = Algebra::new(gens, &weights, &cfg.solver)?;
            let forward = linalg::expm_hermitian(hm, t);
            let partials = |k: usize, eps: f64| -> Result<(Vec<f64>, usize)> {
                let m = gens.generators()[k].as_matrix().unwrap();
                let target = &forward * linalg::expm_hermitian(m, -eps) * forward.adjoint();
                let solved = geometry::solve_unitary(&alg, &target, &cfg.solver, &[])?;
                if !solved.result.converged {
                    return Err(Error::NonConvergence(solved.result.endpoint_residual));
                }
                Ok((active_partials(&solved.result, gens), solved.result.multiplicity))
            };
            finite_difference(gens, t, cfg, ResponseFlavor::Unitary, -1.0, partials)
        }
    }
}

/// Unitary-flavor response of Heisenberg generators under a quadratic
/// Hamiltonian, taken exactly: the transported displacement is linear in `ε`,
/// so the partials at `ε = 1` are the derivative (`epsilon_used = 0`).
pub fn displacement_response_exact(
    h: &QuadraticHamiltonian,
    gens: &GeneratorSet,
    t: f64,
    weights: &CostWeights,
) -> Result<ResponseMatrix> {
    if gens.kind() != GeneratorKind::PhaseSpace {
        return Err(Error::KindMismatch("exact displacement response needs Heisenberg generators".into()));
    }
    if 2 * h.degrees_of_freedom() != gens.dim() {
        return Err(Error::DimensionMismatch { expected: gens.dim(), found: 2 * h.degrees_of_freedom() });
    }
    let active = gens.active_indices();
    let mut entries = RMatrix::zeros(active.len(), active.len());
    for (row, &k) in active.iter().enumerate() {
        let d = DisplacementVector::from_generator(&gens.generators()[k], 1.0)?;
        let moved = conjugate_by_quadratic_flow(&d, h, t)?;
        let g = heisenberg_complexity_in(&moved, gens, weights)?;
        for (col, v) in active_partials(&g, gens).into_iter().enumerate() {
            entries[(row, col)] = v;
        }
    }
    Ok(ResponseMatrix::new(ResponseFlavor::Unitary, entries, t, gens.active_labels(), 0.0))
}

/// State-flavor response `∂C_L[ψ₁(t), ψ₂(t)]/∂ε` with
/// `ψ₁(t) = e^{−iHt}ψ` and `ψ₂(t) = e^{−iHt}e^{iεM_K}ψ`.
///
/// Gaussian states under quadratic dynamics keep a common covariance, so the
/// relative displacement of the two Wigner functions is exact and linear in
/// `ε`; its components are the partial complexities and the derivative is
/// taken exactly. State vectors go through finite differences of
/// [`geometry::state_complexity`].
pub fn state_response_matrix(
    psi0: &StateDescriptor,
    h: &Hamiltonian,
    gens: &GeneratorSet,
    t: f64,
    cfg: &DiffConfig,
) -> Result<ResponseMatrix> {
    check_kinds(h, gens)?;
    cfg.validate()?;
    let weights = cfg.cost_weights(gens)?;
    match (psi0, gens.kind()) {
        (StateDescriptor::Gaussian(w), GeneratorKind::PhaseSpace) => {
            let quad = quadratic_for(h, gens)?;
            if w.mean().len() != gens.dim() {
                return Err(Error::DimensionMismatch { expected: gens.dim(), found: w.mean().len() });
            }
            let reference = evolve_wigner_gaussian(w, &quad, t)?;
            let active = gens.active_indices();
            let mut entries = RMatrix::zeros(active.len(), active.len());
            for (row, &k) in active.iter().enumerate() {
                let shift = gens.generators()[k].as_form().unwrap().coordinates();
                let perturbed = evolve_wigner_gaussian(&w.argument_shifted(&shift), &quad, t)?;
                let cov_gap = linalg::max_abs_real(&(perturbed.covariance() - reference.covariance()));
                if cov_gap > 1e-9 * (1.0 + linalg::max_abs_real(reference.covariance())) {
                    return Err(Error::NonGaussian);
                }
                let relative = reference.mean() - perturbed.mean();
                let g = heisenberg_complexity_in(&DisplacementVector::from_coordinates(&relative, 0.0), gens, &weights)?;
                for (col, v) in active_partials(&g, gens).into_iter().enumerate() {
                    entries[(row, col)] = v;
                }
            }
            Ok(ResponseMatrix::new(ResponseFlavor::State, entries, t, gens.active_labels(), 0.0))
        }
        (StateDescriptor::Vector(psi), GeneratorKind::Matrix) => {
            let hm = h.require_matrix(gens.dim())?;
            let alg = Algebra::new(gens, &weights, &cfg.solver)?;
            geometry::check_state(psi, gens.dim())?;
            let forward = linalg::expm_hermitian(hm, t);
            let psi1 = &forward * psi;
            let partials = |k: usize, eps: f64| -> Result<(Vec<f64>, usize)> {
                let m = gens.generators()[k].as_matrix().unwrap();
                let psi2 = &forward * (linalg::expm_hermitian(m, -eps) * psi);
                let solved = geometry::solve_state_internal(&alg, &psi1, &psi2, &cfg.solver)?;
                if !solved.converged {
                    return Err(Error::NonConvergence(solved.endpoint_residual));
                }
                Ok((active_partials(&solved, gens), solved.multiplicity))
            };
            finite_difference(gens, t, cfg, ResponseFlavor::State, -1.0, partials)
        }
        (StateDescriptor::Gaussian(_), GeneratorKind::Matrix) => {
            Err(Error::KindMismatch("Gaussian Wigner states need phase-space generators".into()))
        }
        (StateDescriptor::Vector(_), GeneratorKind::PhaseSpace) => Err(Error::NonGaussian),
    }
}

/// Central differences (optionally Richardson-extrapolated) of the partial
/// complexities, one row per active perturbing generator.
fn finite_difference<F>(
    gens: &GeneratorSet,
    t: f64,
    cfg: &DiffConfig,
    flavor: ResponseFlavor,
    orientation: f64,
    partials: F,
) -> Result<ResponseMatrix>
where
    F: Fn(usize, f64) -> Result<(Vec<f64>, usize)> + Sync,
{
    let active = gens.active_indices();
    let n = active.len();
    let steps = cfg.steps();
    let mut stencil: Vec<(usize, usize, f64)> = Vec::with_capacity(4 * n);
    for row in 0..n {
        for (si, &e) in steps.iter().enumerate() {
            stencil.push((row, si, e));
            stencil.push((row, si, -e));
        }
    }
    let values: Vec<(Vec<f64>, usize)> = stencil
        .par_iter()
        .map(|&(row, _, e)| partials(active[row], e))
        .collect::<Result<Vec<_>>>()?;

    let mut entries = RMatrix::zeros(n, n);
    let mut unreliable = Vec::new();
    for row in 0..n {
        let mut derivs: Vec<Vec<f64>> = Vec::with_capacity(steps.len());
        let mut multiplicities = Vec::new();
        for (si, &e) in steps.iter().enumerate() {
            let plus = stencil.iter().position(|s| s.0 == row && s.1 == si && s.2 > 0.0).unwrap();
            let minus = stencil.iter().position(|s| s.0 == row && s.1 == si && s.2 < 0.0).unwrap();
            multiplicities.push(values[plus].1);
            multiplicities.push(values[minus].1);
            derivs.push(
                values[plus].0.iter().zip(&values[minus].0).map(|(p, m)| orientation * (p - m) / (2.0 * e)).collect(),
            );
        }
        let branch_change = multiplicities.windows(2).any(|w| w[0] != w[1]);
        for col in 0..n {
            let value = if derivs.len() == 2 {
                let (coarse, fine) = (derivs[0][col], derivs[1][col]);
                let noise = 10.0 * cfg.solver.tol_endpoint / cfg.epsilon;
                if (coarse - fine).abs() > cfg.epsilon.powi(2) * coarse.abs().max(1.0) + noise {
                    unreliable.push((row, col));
                }
                (4.0 * fine - coarse) / 3.0
            } else {
                derivs[0][col]
            };
            if branch_change && !unreliable.contains(&(row, col)) {
                unreliable.push((row, col));
            }
            entries[(row, col)] = value;
        }
    }
    let mut matrix = ResponseMatrix::new(flavor, entries, t, gens.active_labels(), cfg.epsilon);
    matrix.unreliable = unreliable;
    Ok(matrix)
}

/// `L = RᵀR` and its eigenvalues, computed as squared singular values of `R`.
pub fn response_spectrum(r: &ResponseMatrix) -> Result<ResponseSpectrum> {
    let e = &r.entries;
    if e.nrows() != e.ncols() {
        return Err(Error::DimensionMismatch { expected: e.nrows(), found: e.ncols() });
    }
    let l = e.transpose() * e;
    let l = (&l + l.transpose()) * 0.5;
    let mut eigenvalues: Vec<f64> = e.clone().svd(false, false).singular_values.iter().map(|s| s * s).collect();
    eigenvalues.sort_by(|a, b| b.total_cmp(a));
    Ok(ResponseSpectrum { l_matrix: l, eigenvalues, time: r.time })
}

pub const MIN_FIT_POINTS: usize = 5;

/// Least-squares slopes of `½ ln s_i(t)` over the spectra inside `window`.
pub fn lyapunov_spectrum(spectra: &[ResponseSpectrum], window: (f64, f64)) -> Result<LyapunovEstimate> {
    let (t_min, t_max) = window;
    if !(t_min.is_finite() && t_max.is_finite() && t_max > t_min) {
        return Err(Error::InvalidInput(format!("invalid fit window ({t_min}, {t_max})")));
    }
    let selected: Vec<&ResponseSpectrum> =
        spectra.iter().filter(|s| s.time >= t_min - 1e-12 && s.time <= t_max + 1e-12).collect();
    if selected.len() < MIN_FIT_POINTS {
        return Err(Error::TooFewPoints { needed: MIN_FIT_POINTS, found: selected.len() });
    }
    let branches = selected[0].eigenvalues.len();
    if selected.iter().any(|s| s.eigenvalues.len() != branches) {
        return Err(Error::InvalidInput("spectra have different sizes".into()));
    }
    for s in &selected {
        if let Some(&bad) = s.eigenvalues.iter().find(|&&v| v <= 0.0 || !v.is_finite()) {
            return Err(Error::DegenerateSpectrum { value: bad, time: s.time });
        }
    }
    let times: Vec<f64> = selected.iter().map(|s| s.time).collect();
    let mut lambdas = Vec::with_capacity(branches);
    let mut residual: f64 = 0.0;
    for i in 0..branches {
        let y: Vec<f64> = selected.iter().map(|s| 0.5 * s.eigenvalues[i].ln()).collect();
        let (slope, _, rms) = linalg::linear_fit(&times, &y);
        lambdas.push(slope);
        residual = residual.max(rms);
    }
    lambdas.sort_by(|a, b| b.total_cmp(a));
    Ok(LyapunovEstimate { lambdas, times, fit_window: window, residual })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spectrum(t: f64, values: Vec<f64>) -> ResponseSpectrum {
        ResponseSpectrum { l_matrix: RMatrix::zeros(values.len(), values.len()), eigenvalues: values, time: t }
    }

    #[test]
    fn exact_exponentials_give_exact_rates() {
        let spectra: Vec<_> = (0..8).map(|k| k as f64).map(|t| spectrum(t, vec![(2.0 * 0.7 * t).exp(), (-1.4 * t).exp()])).collect();
        let est = lyapunov_spectrum(&spectra, (1.0, 7.0)).unwrap();
        assert!((est.lambdas[0] - 0.7).abs() < 1e-12);
        assert!((est.lambdas[1] + 0.7).abs() < 1e-12);
        assert!(est.residual < 1e-12);
    }

    #[test]
    fn fit_errors() {
        let few: Vec<_> = (0..4).map(|k| spectrum(k as f64, vec![1.0])).collect();
        assert!(matches!(lyapunov_spectrum(&few, (0.0, 10.0)), Err(Error::TooFewPoints { .. })));
        let zero: Vec<_> = (0..6).map(|k| spectrum(k as f64, vec![0.0])).collect();
        assert!(matches!(lyapunov_spectrum(&zero, (0.0, 10.0)), Err(Error::DegenerateSpectrum { .. })));
    }

    #[test]
    fn identity_spectrum() {
        let r = ResponseMatrix::new(ResponseFlavor::Unitary, RMatrix::identity(3, 3), 0.0, vec![], 0.0);
        let s = response_spectrum(&r).unwrap();
        assert!(s.eigenvalues.iter().all(|v| (v - 1.0).abs() < 1e-15));
    }
}
