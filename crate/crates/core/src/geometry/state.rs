//! State complexity: minimal unitary complexity over all unitaries mapping
//! a reference state to a target state up to phase.
//!
//! Such unitaries form the coset `U₀·Stab(ψ_R)` with `U₀ψ_R = ψ_T`. For a qubit
//! the stabilizer modulo phase is the single angle `φ` in `exp(−iφP⊥)`,
//! `P⊥ = 1 − |ψ_R⟩⟨ψ_R|`; the angle is scanned and the minimum is located as
//! a root of `dℓ/dφ ∝ tr(Λ₀P⊥)`, with `Λ₀` the initial geodesic momentum.
//! Larger dimensions search the full `U(d−1)` stabilizer by Nelder–Mead.

use argmin::core::{CostFunction, Executor};
use argmin::solver::brent::{BrentOpt, BrentRoot};
use argmin::solver::neldermead::NelderMead;

use super::shooting::Solved;
use super::{check_state, solve_unitary, Algebra, CostWeights, GeodesicResult, ProtocolPath, SolverConfig};
use crate::error::{Error, Result};
use crate::generators::GeneratorSet;
use crate::linalg::{self, c, CMatrix, CVector, RVector};

const SCAN_STARTS: usize = 16;
const STABILIZER_NM_ITERS: u64 = 150;

/// Minimal protocol taking `psi_r` to `psi_t` (modulo global phase).
pub fn state_complexity(
    psi_r: &CVector,
    psi_t: &CVector,
    gens: &GeneratorSet,
    w: &CostWeights,
    cfg: &SolverConfig,
) -> Result<GeodesicResult> {
    let alg = Algebra::new(gens, w, cfg)?;
    Ok(solve_state(&alg, psi_r, psi_t, cfg, &[])?.result)
}

pub(crate) fn solve_state(
    alg: &Algebra,
    psi_r: &CVector,
    psi_t: &CVector,
    cfg: &SolverConfig,
    hints: &[RVector],
) -> Result<Solved> {
    cfg.validate()?;
    check_state(psi_r, alg.dim)?;
    check_state(psi_t, alg.dim)?;
    if psi_r.dotc(psi_t).norm() > 1.0 - 1e-15 {
        let zeros = vec![vec![0.0; alg.all_labels.len()]];
        let path = ProtocolPath::new(alg.all_labels.clone(), zeros.clone())?;
        let result = GeodesicResult {
            path,
            length: 0.0,
            partials: zeros[0].clone(),
            endpoint_residual: 0.0,
            converged: true,
            multiplicity: 1,
        };
        return Ok(Solved { result, momentum: Some(RVector::zeros(alg.len())) });
    }
    let base = linalg::unitary_with_first_column(psi_t) * linalg::unitary_with_first_column(psi_r).adjoint();
    if alg.dim == 2 {
        solve_qubit(alg, &base, psi_r, cfg, hints)
    } else {
        solve_general(alg, &base, psi_r, cfg, hints)
    }
}

fn scan_config(cfg: &SolverConfig) -> SolverConfig {
    SolverConfig { n_starts: cfg.n_starts.min(SCAN_STARTS), direct_restarts: cfg.direct_restarts.min(2), ..cfg.clone() }
}

struct Family<'a> {
    alg: &'a Algebra,
    base: &'a CMatrix,
    complement: CMatrix,
    cfg: SolverConfig,
    hints: Vec<RVector>,
}

impl Family<'_> {
    fn target(&self, phi: f64) -> CMatrix {
        self.base * linalg::expm_hermitian(&self.complement, phi)
    }

    fn solve(&self, phi: f64) -> Result<Solved> {
        solve_unitary(self.alg, &self.target(phi), &self.cfg, &self.hints)
    }

    /// `tr(Λ₀ P⊥)` of the selected geodesic.
    fn slope(&self, solved: &Solved) -> f64 {
        match &solved.momentum {
            Some(m) => linalg::trace(&(self.alg.combine(m) * &self.complement)).re,
            None => f64::NAN,
        }
    }
}

struct SlopeProblem<'a, 'b>(&'a Family<'b>);

impl CostFunction for SlopeProblem<'_, '_> {
    type Param = f64;
    type Output = f64;

    fn cost(&self, phi: &f64) -> std::result::Result<f64, argmin::core::Error> {
        let solved = self.0.solve(*phi)?;
        Ok(self.0.slope(&solved))
    }
}

struct LengthProblem<'a, 'b>(&'a Family<'b>);

impl CostFunction for LengthProblem<'_, '_> {
    type Param = f64;
    type Output = f64;

    fn cost(&self, phi: &f64) -> std::result::Result<f64, argmin::core::Error> {
        Ok(self.0.solve(*phi)?.result.length)
    }
}

fn solve_qubit(
    alg: &Algebra,
    base: &CMatrix,
    psi_r: &CVector,
    cfg: &SolverConfig,
    hints: &[RVector],
) -> Result<Solved> {
    let complement = CMatrix::identity(2, 2) - psi_r * psi_r.adjoint();
    let mut family = Family { alg, base, complement, cfg: scan_config(cfg), hints: hints.to_vec() };

    let n = cfg.scan_points.max(3);
    let step = 2.0 * std::f64::consts::PI / n as f64;
    let grid: Vec<f64> = (0..n).map(|j| -std::f64::consts::PI + step * j as f64).collect();
    let mut scan = Vec::with_capacity(n);
    for &phi in &grid {
        let solved = family.solve(phi)?;
        if let Some(m) = &solved.momentum {
            family.hints = hints.iter().cloned().chain(std::iter::once(m.clone())).collect();
        }
        scan.push(solved);
    }
    let best = (0..n)
        .min_by(|&a, &b| scan[a].result.length.total_cmp(&scan[b].result.length))
        .expect("non-empty scan");
    if let Some(m) = &scan[best].momentum {
        family.hints = hints.iter().cloned().chain(std::iter::once(m.clone())).collect();
    }

    let (lo, hi) = (grid[best] - step, grid[best] + step);
    let slope_at = |idx: isize| {
        let j = idx.rem_euclid(n as isize) as usize;
        family.slope(&scan[j])
    };
    let s_lo = slope_at(best as isize - 1);
    let s_mid = family.slope(&scan[best]);
    let s_hi = slope_at(best as isize + 1);
    let bracket = if s_lo * s_hi < 0.0 {
        Some((lo, hi))
    } else if s_lo * s_mid < 0.0 {
        Some((lo, grid[best]))
    } else if s_mid * s_hi < 0.0 {
        Some((grid[best], hi))
    } else {
        None
    };

    let phi_star = match bracket {
        Some((a, b)) => root_of_slope(&family, a, b),
        None => None,
    }
    .or_else(|| minimize_length(&family, lo, hi))
    .unwrap_or(grid[best]);

    let final_family = Family { cfg: cfg.clone(), ..family };
    let solved = final_family.solve(phi_star)?;
    if solved.result.length <= scan[best].result.length + cfg.tol_length || !scan[best].result.converged {
        Ok(solved)
    } else {
        Ok(final_family.solve(grid[best])?)
    }
}

fn root_of_slope(family: &Family, a: f64, b: f64) -> Option<f64> {
    let solver = BrentRoot::new(a, b, 1e-13);
    let res = Executor::new(SlopeProblem(family), solver).configure(|s| s.max_iters(60)).run().ok()?;
    res.state.best_param.filter(|p| p.is_finite())
}

fn minimize_length(family: &Family, a: f64, b: f64) -> Option<f64> {
    let solver = BrentOpt::new(a, b);
    let res = Executor::new(LengthProblem(family), solver).configure(|s| s.max_iters(60)).run().ok()?;
    res.state.best_param.filter(|p| p.is_finite())
}

/// Hermitian basis of operators supported on the orthogonal complement of
/// `psi_r`.
fn complement_basis(psi_r: &CVector) -> Vec<CMatrix> {
    let d = psi_r.len();
    let frame = linalg::unitary_with_first_column(psi_r);
    let cols: Vec<CVector> = (1..d).map(|k| frame.column(k).into_owned()).collect();
    let mut basis = Vec::new();
    for j in 0..cols.len() {
        for k in j..cols.len() {
            let ejk = &cols[j] * cols[k].adjoint();
            if j == k {
                basis.push(ejk);
            } else {
                basis.push(&ejk + ejk.adjoint());
                basis.push((&ejk - ejk.adjoint()) * c(0.0, 1.0));
            }
        }
    }
    basis
}

struct StabilizerProblem<'a> {
    alg: &'a Algebra,
    base: &'a CMatrix,
    basis: Vec<CMatrix>,
    cfg: SolverConfig,
    hints: Vec<RVector>,
}

impl StabilizerProblem<'_> {
    fn target(&self, theta: &[f64]) -> CMatrix {
        let d = self.alg.dim;
        let h = self.basis.iter().zip(theta).fold(CMatrix::zeros(d, d), |acc, (b, &t)| acc + b * c(t, 0.0));
        self.base * linalg::expm_hermitian(&h, 1.0)
    }
}

impl CostFunction for StabilizerProblem<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, theta: &Vec<f64>) -> std::result::Result<f64, argmin::core::Error> {
        Ok(solve_unitary(self.alg, &self.target(theta), &self.cfg, &self.hints)?.result.length)
    }
}

fn solve_general(
    alg: &Algebra,
    base: &CMatrix,
    psi_r: &CVector,
    cfg: &SolverConfig,
    hints: &[RVector],
) -> Result<Solved> {
    let basis = complement_basis(psi_r);
    let k = basis.len();
    let problem = StabilizerProblem { alg, base, basis, cfg: scan_config(cfg), hints: hints.to_vec() };
    let mut simplex = vec![vec![0.0; k]];
    for j in 0..k {
        let mut v = vec![0.0; k];
        v[j] = 0.5;
        simplex.push(v);
    }
    let solver = NelderMead::new(simplex)
        .with_sd_tolerance(1e-10)
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    let res = Executor::new(problem, solver)
        .configure(|s| s.max_iters(STABILIZER_NM_ITERS))
        .run()
        .map_err(|e| Error::InvalidInput(format!("stabilizer search failed: {e}")))?;
    let theta = res.state.best_param.clone().unwrap_or_else(|| vec![0.0; k]);
    let problem = res.problem.problem.expect("problem is returned");
    let target = problem.target(&theta);
    solve_unitary(alg, &target, cfg, hints)
}
