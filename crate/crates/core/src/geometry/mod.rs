//! Weighted cost functions, protocol paths and geodesic complexity.
//!
//! A protocol is a piecewise-constant control schedule `Y^I(σ)` on `σ ∈ [0, 1]`
//! generating `U = T exp(−i ∫ Σ_I Y^I(σ) M_I dσ)`. Its cost is
//! `∫ √(Σ_I w_I (Y^I)²) dσ` and the complexity of a target is the minimal cost
//! over all protocols reaching it (modulo global phase).

mod algebra;
mod direct;
mod shooting;
mod state;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::{DisplacementVector, GeneratorKind, GeneratorSet};
use crate::linalg::{self, CMatrix, CVector, RMatrix};

pub use direct::direct_path_optimization;
pub use state::state_complexity;

pub(crate) use algebra::Algebra;
pub(crate) use shooting::solve_unitary;

/// Largest Hilbert-space dimension accepted by the geodesic solvers.
pub const DEFAULT_MAX_DIM: usize = 8;

/// Positive per-generator penalty weights; the identity direction costs nothing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostWeights {
    weights: BTreeMap<String, f64>,
}

impl CostWeights {
    /// Validates `weights` against `set`: every non-identity label needs a
    /// finite positive weight, the identity label (if present) must be 0 or
    /// absent.
    pub fn new(set: &GeneratorSet, weights: BTreeMap<String, f64>) -> Result<Self> {
        for key in weights.keys() {
            set.index_of(key)?;
        }
        let mut out = BTreeMap::new();
        for (i, label) in set.labels().into_iter().enumerate() {
            let w = weights.get(&label).copied();
            if Some(i) == set.identity_index() {
                if w.is_some_and(|w| w != 0.0) {
                    return Err(Error::InvalidInput(format!("identity generator `{label}` must have weight 0")));
                }
                out.insert(label, 0.0);
                continue;
            }
            let w = w.ok_or_else(|| Error::MissingWeight(label.clone()))?;
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidInput(format!("weight for `{label}` must be positive, got {w}")));
            }
            out.insert(label, w);
        }
        Ok(Self { weights: out })
    }

    /// Unit weight on every non-identity generator.
    pub fn isotropic(set: &GeneratorSet) -> Self {
        let map = set.active_labels().into_iter().map(|l| (l, 1.0)).collect();
        Self::new(set, map).expect("unit weights are valid")
    }

    /// Weights listed in the order of `set.active_labels()`.
    pub fn from_active_values(set: &GeneratorSet, values: &[f64]) -> Result<Self> {
        let labels = set.active_labels();
        if labels.len() != values.len() {
            return Err(Error::DimensionMismatch { expected: labels.len(), found: values.len() });
        }
        Self::new(set, labels.into_iter().zip(values.iter().copied()).collect())
    }

    pub fn weight(&self, label: &str) -> Result<f64> {
        self.weights.get(label).copied().ok_or_else(|| Error::MissingWeight(label.to_string()))
    }

    pub fn as_map(&self) -> &BTreeMap<String, f64> {
        &self.weights
    }

    /// Every weight multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(Error::InvalidInput(format!("weight scale must be positive, got {factor}")));
        }
        Ok(Self { weights: self.weights.iter().map(|(k, v)| (k.clone(), v * factor)).collect() })
    }
}

/// Piecewise-constant controls on a uniform grid of `[0, 1]`.
///
/// `controls[k][i]` is the value of generator `labels[i]` on interval `k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolPath {
    labels: Vec<String>,
    grid: Vec<f64>,
    controls: Vec<Vec<f64>>,
}

impl ProtocolPath {
    pub fn new(labels: Vec<String>, controls: Vec<Vec<f64>>) -> Result<Self> {
        if controls.is_empty() {
            return Err(Error::InvalidInput("protocol path needs at least one interval".into()));
        }
        for row in &controls {
            if row.len() != labels.len() {
                return Err(Error::DimensionMismatch { expected: labels.len(), found: row.len() });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput("non-finite control value".into()));
            }
        }
        let n = controls.len();
        let grid = (0..=n).map(|k| k as f64 / n as f64).collect();
        Ok(Self { labels, grid, controls })
    }

    /// Single interval with constant controls.
    pub fn constant(labels: Vec<String>, values: Vec<f64>) -> Result<Self> {
        Self::new(labels, vec![values])
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn controls(&self) -> &[Vec<f64>] {
        &self.controls
    }

    pub fn n_intervals(&self) -> usize {
        self.controls.len()
    }

    fn widths(&self) -> impl Iterator<Item = f64> + '_ {
        self.grid.windows(2).map(|w| w[1] - w[0])
    }

    /// `∫₀¹ Y^L(σ) dσ` for the control at column `i`.
    fn integral(&self, i: usize) -> f64 {
        self.widths().zip(&self.controls).map(|(dt, row)| dt * row[i]).sum()
    }
}

/// Minimal (or best-found) protocol for a target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeodesicResult {
    pub path: ProtocolPath,
    pub length: f64,
    /// Signed partial complexities, aligned with `path.labels()`.
    pub partials: Vec<f64>,
    pub endpoint_residual: f64,
    pub converged: bool,
    /// Number of distinct minimal geodesics found within the length tolerance.
    pub multiplicity: usize,
}

impl GeodesicResult {
    pub fn labels(&self) -> &[String] {
        self.path.labels()
    }

    pub fn partial(&self, label: &str) -> Result<f64> {
        partial_complexity(self, label)
    }
}

/// Solver settings; unknown fields keep their defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Shooting starts on the weighted unit sphere (on top of log-branch guesses).
    pub n_starts: usize,
    /// Intervals of the direct piecewise-constant optimizer.
    pub n_intervals: usize,
    pub tol_endpoint: f64,
    pub tol_length: f64,
    pub max_iters: usize,
    pub seed: u64,
    /// RK4 steps for the Euler–Arnold flow.
    pub ode_steps: usize,
    pub max_dim: usize,
    pub direct_restarts: usize,
    /// Stabilizer-angle scan points for single-qubit state complexity.
    pub scan_points: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            n_starts: 200,
            n_intervals: 64,
            tol_endpoint: 1e-8,
            tol_length: 1e-8,
            max_iters: 50,
            seed: 0,
            ode_steps: 64,
            max_dim: DEFAULT_MAX_DIM,
            direct_restarts: 10,
            scan_points: 12,
        }
    }
}

impl SolverConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if self.n_intervals == 0 || self.max_iters == 0 || self.ode_steps == 0 || self.max_dim == 0 {
            return Err(Error::InvalidInput("solver counts must be positive".into()));
        }
        if !positive(self.tol_endpoint) || !positive(self.tol_length) {
            return Err(Error::InvalidInput("solver tolerances must be positive".into()));
        }
        Ok(())
    }
}

fn require_matrix(gens: &GeneratorSet) -> Result<()> {
    match gens.kind() {
        GeneratorKind::Matrix => Ok(()),
        GeneratorKind::PhaseSpace => Err(Error::KindMismatch(
            "matrix-kind generators required; use the displacement pipeline for phase space".into(),
        )),
    }
}

/// Column of each generator in `path`, `None` where the path has no control.
fn path_columns(path: &ProtocolPath, gens: &GeneratorSet) -> Result<Vec<Option<usize>>> {
    for label in path.labels() {
        gens.index_of(label)?;
    }
    Ok(gens.labels().iter().map(|l| path.labels().iter().position(|p| p == l)).collect())
}

/// `(Δσ_k, Σ_I Y_k^I M_I)` for every interval of `path`.
fn interval_hamiltonians(path: &ProtocolPath, gens: &GeneratorSet) -> Result<Vec<(f64, CMatrix)>> {
    require_matrix(gens)?;
    let columns = path_columns(path, gens)?;
    let d = gens.dim();
    Ok(path
        .widths()
        .zip(path.controls())
        .map(|(dt, row)| {
            let mut h = CMatrix::zeros(d, d);
            for (g, col) in gens.generators().iter().zip(&columns) {
                if let Some(i) = col {
                    if row[*i] != 0.0 {
                        h += g.as_matrix().unwrap() * linalg::c(row[*i], 0.0);
                    }
                }
            }
            (dt, h)
        })
        .collect())
}

/// Time-ordered product `Π_k exp(−i Δσ_k Σ_I Y_k^I M_I)`, later intervals on
/// the left. Generators missing from the path have zero control.
pub fn path_endpoint(path: &ProtocolPath, gens: &GeneratorSet) -> Result<CMatrix> {
    let d = gens.dim();
    Ok(interval_hamiltonians(path, gens)?
        .iter()
        .fold(CMatrix::identity(d, d), |u, (dt, h)| linalg::expm_hermitian(h, *dt) * u))
}

/// `Σ_k Δσ_k √(Σ_I w_I (Y_k^I)²)`.
pub fn path_cost(path: &ProtocolPath, w: &CostWeights) -> Result<f64> {
    let weights = path.labels().iter().map(|l| w.weight(l)).collect::<Result<Vec<_>>>()?;
    Ok(path
        .widths()
        .zip(path.controls())
        .map(|(dt, row)| dt * row.iter().zip(&weights).map(|(y, w)| w * y * y).sum::<f64>().sqrt())
        .sum())
}

/// Signed net content `∫₀¹ Y^L(σ) dσ` of the stored path along `label`.
///
/// Optimal protocols are stored with their natural parametrization, so a
/// constant-control geodesic `Y^L ≡ c` reports `c`.
pub fn partial_complexity(g: &GeodesicResult, label: &str) -> Result<f64> {
    let i = g
        .path
        .labels()
        .iter()
        .position(|l| l == label)
        .ok_or_else(|| Error::UnknownLabel(label.to_string()))?;
    Ok(g.path.integral(i))
}

/// Straight-line geodesic realizing a displacement in the canonical
/// Heisenberg basis `{x.., p.., id}` of matching size.
pub fn heisenberg_complexity(d: &DisplacementVector, w: &CostWeights) -> Result<GeodesicResult> {
    let gens = GeneratorSet::heisenberg(d.degrees_of_freedom())?;
    heisenberg_complexity_in(d, &gens, w)
}

/// Straight-line geodesic realizing `exp(i(a·q + b·p + φ))` in the basis
/// of an arbitrary phase-space generator set.
///
/// The non-identity generators must form a basis of the `2N` linear forms.
/// Partials are the expansion coefficients of `(a, b)` in that basis (with the
/// sign of the displacement exponent); the identity control carries the phase
/// at zero cost.
pub fn heisenberg_complexity_in(
    d: &DisplacementVector,
    gens: &GeneratorSet,
    w: &CostWeights,
) -> Result<GeodesicResult> {
    if gens.kind() != GeneratorKind::PhaseSpace {
        return Err(Error::KindMismatch("heisenberg complexity needs phase-space generators".into()));
    }
    let n = d.degrees_of_freedom();
    if gens.dim() != 2 * n {
        return Err(Error::DimensionMismatch { expected: gens.dim(), found: 2 * n });
    }
    let coords = d.coordinates();
    if coords.iter().chain(std::iter::once(&d.phase)).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("displacement has non-finite entries".into()));
    }
    let active = gens.active_indices();
    if active.len() != 2 * n {
        return Err(Error::InvalidInput(format!(
            "need exactly {} non-identity phase-space generators, got {}",
            2 * n,
            active.len()
        )));
    }
    let basis = RMatrix::from_columns(
        &active.iter().map(|&i| gens.generators()[i].as_form().unwrap().coordinates()).collect::<Vec<_>>(),
    );
    let lu = basis.clone().lu();
    let mut partials_active = lu
        .solve(&coords)
        .ok_or_else(|| Error::InvalidInput("phase-space generators are linearly dependent".into()))?;
    if basis.determinant().abs() < 1e-14 {
        return Err(Error::InvalidInput("phase-space generators are linearly dependent".into()));
    }
    // exact zeros for coordinate-aligned inputs
    for v in partials_active.iter_mut() {
        if v.abs() < 1e-300 {
            *v = 0.0;
        }
    }
    let mut controls = vec![0.0; gens.len()];
    for (k, &i) in active.iter().enumerate() {
        controls[i] = partials_active[k];
    }
    // the identity control absorbs the phase (and any identity parts of the basis)
    if let Some(id) = gens.identity_index() {
        let id_scale = gens.generators()[id].as_form().unwrap().identity;
        let carried: f64 = active
            .iter()
            .enumerate()
            .map(|(k, &i)| partials_active[k] * gens.generators()[i].as_form().unwrap().identity)
            .sum();
        controls[id] = (d.phase - carried) / id_scale;
    }
    let path = ProtocolPath::constant(gens.labels(), controls.clone())?;
    let length = path_cost(&path, w)?;
    Ok(GeodesicResult {
        path,
        length,
        partials: controls,
        endpoint_residual: 0.0,
        converged: true,
        multiplicity: 1,
    })
}

/// Minimal-cost protocol reaching `target` modulo global phase.
///
/// Runs Euler–Arnold shooting from the principal-log branches, any supplied
/// warm starts and `cfg.n_starts` sphere points, refines each by
/// Levenberg–Marquardt on the endpoint mismatch, and falls back to the direct
/// piecewise-constant optimizer if no leg converges. A non-converged best
/// effort is returned with `converged = false`.
pub fn unitary_complexity(
    target: &CMatrix,
    gens: &GeneratorSet,
    w: &CostWeights,
    cfg: &SolverConfig,
) -> Result<GeodesicResult> {
    let algebra = Algebra::new(gens, w, cfg)?;
    let solved = solve_unitary(&algebra, target, cfg, &[])?;
    Ok(solved.result)
}

pub(crate) fn solve_state_internal(
    alg: &Algebra,
    psi_r: &CVector,
    psi_t: &CVector,
    cfg: &SolverConfig,
) -> Result<GeodesicResult> {
    Ok(state::solve_state(alg, psi_r, psi_t, cfg, &[])?.result)
}

/// Pure-state Bloch vectors `U(σ)ψ` sampled at every grid point of the path.
pub fn bloch_samples(path: &ProtocolPath, gens: &GeneratorSet, psi: &CVector) -> Result<Vec<[f64; 3]>> {
    if gens.dim() != 2 || psi.len() != 2 {
        return Err(Error::InvalidInput("Bloch samples need a single qubit".into()));
    }
    let mut state = psi.clone();
    let mut out = vec![linalg::bloch_vector(&state)];
    for (dt, h) in interval_hamiltonians(path, gens)? {
        state = linalg::expm_hermitian(&h, dt) * state;
        out.push(linalg::bloch_vector(&state));
    }
    Ok(out)
}

/// Random unit vector of dimension `n` drawn from the Haar measure.
pub fn random_state(n: usize, rng: &mut impl rand::Rng) -> CVector {
    use rand_distr::{Distribution, StandardNormal};
    let v = CVector::from_iterator(
        n,
        (0..n).map(|_| linalg::c(StandardNormal.sample(rng), StandardNormal.sample(rng))),
    );
    let norm = v.norm();
    v / linalg::c(norm, 0.0)
}

pub(crate) fn check_state(psi: &CVector, dim: usize) -> Result<()> {
    if psi.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: psi.len() });
    }
    let norm = psi.norm();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized(norm));
    }
    Ok(())
}
