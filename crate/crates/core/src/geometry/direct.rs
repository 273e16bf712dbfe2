//! Direct optimization of a piecewise-constant protocol.
//!
//! Minimizes the path energy `Σ_k Δσ Y_kᵀ W Y_k` subject to
//! `e^{−iφ} U_target† U(Y) = 1` with an augmented Lagrangian whose inner
//! problems are solved by L-BFGS. Gradients of the endpoint use the
//! Daleckii–Krein form of the exponential's Fréchet derivative in the
//! eigenbasis of each interval Hamiltonian.

use std::cell::RefCell;

use argmin::core::{CostFunction, Executor, Gradient};
use argmin::solver::linesearch::MoreThuenteLineSearch;
use argmin::solver::quasinewton::LBFGS;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::shooting::{endpoint_distance, phase_fixed};
use super::{Algebra, CostWeights, GeodesicResult, ProtocolPath, SolverConfig};
use crate::error::Result;
use crate::generators::GeneratorSet;
use crate::linalg::{self, c, CMatrix, CVector, RVector};

const OUTER_ITERS: usize = 30;
const INNER_ITERS: u64 = 400;
const RESTART_NOISE: f64 = 0.3;

struct Interval {
    q: CMatrix,
    eigen: RVector,
    exp: CMatrix,
}

/// Point, value and gradient of the last evaluation.
type CachedEval = (Vec<f64>, f64, Vec<f64>);

struct Lagrangian<'a> {
    alg: &'a Algebra,
    target_adj: &'a CMatrix,
    n: usize,
    multiplier: CMatrix,
    penalty: f64,
    cache: RefCell<Option<CachedEval>>,
}

impl<'a> Lagrangian<'a> {
    fn control(&self, x: &[f64], k: usize) -> RVector {
        let m = self.alg.len();
        RVector::from_column_slice(&x[k * m..(k + 1) * m])
    }

    fn intervals(&self, x: &[f64]) -> Vec<Interval> {
        let dt = 1.0 / self.n as f64;
        (0..self.n)
            .map(|k| {
                let h = self.alg.combine(&self.control(x, k));
                let (eigen, q) = linalg::hermitian_eigen(&h);
                let phases = CVector::from_iterator(eigen.len(), eigen.iter().map(|&l| c(0.0, -dt * l).exp()));
                let exp = &q * CMatrix::from_diagonal(&phases) * q.adjoint();
                Interval { q, eigen, exp }
            })
            .collect()
    }

    /// `e^{−iφ} U_target† U − 1` together with `U`.
    fn constraint(&self, x: &[f64], u: &CMatrix) -> CMatrix {
        let phi = x[x.len() - 1];
        let d = self.alg.dim;
        self.target_adj * u * c(0.0, -phi).exp() - CMatrix::identity(d, d)
    }

    fn energy(&self, x: &[f64]) -> f64 {
        let dt = 1.0 / self.n as f64;
        (0..self.n).map(|k| dt * self.alg.norm(&self.control(x, k)).powi(2)).sum()
    }

    fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        if let Some((px, v, g)) = self.cache.borrow().as_ref() {
            if px.as_slice() == x {
                return (*v, g.clone());
            }
        }
        let m = self.alg.len();
        let d = self.alg.dim;
        let dt = 1.0 / self.n as f64;
        let phi = x[x.len() - 1];
        let ivs = self.intervals(x);

        // suffix[k] = E_k ⋯ E_1 (suffix[0] = 1)
        let mut suffix = Vec::with_capacity(self.n + 1);
        suffix.push(CMatrix::identity(d, d));
        for iv in &ivs {
            let next = &iv.exp * suffix.last().unwrap();
            suffix.push(next);
        }
        let u = suffix[self.n].clone();
        let g = self.constraint(x, &u);
        let value = self.energy(x)
            + (self.multiplier.adjoint() * &g).trace().re
            + 0.5 * self.penalty * g.norm_squared();

        let z = &self.multiplier + &g * c(self.penalty, 0.0);
        let rotation = c(0.0, -phi).exp();
        let b = z.adjoint() * self.target_adj * rotation;

        let mut grad = vec![0.0; x.len()];
        let mut prefix = CMatrix::identity(d, d);
        for k in (0..self.n).rev() {
            let iv = &ivs[k];
            let ck = &suffix[k] * &b * &prefix;
            let ct = iv.q.adjoint() * ck * &iv.q;
            let mus: Vec<Complex64> = iv.eigen.iter().map(|&l| c(0.0, -dt * l)).collect();
            let mut kmat = CMatrix::zeros(d, d);
            for a in 0..d {
                for bb in 0..d {
                    let diff = mus[a] - mus[bb];
                    let phi_ab = if diff.norm() < 1e-10 {
                        (0.5 * (mus[a] + mus[bb])).exp()
                    } else {
                        (mus[a].exp() - mus[bb].exp()) / diff
                    };
                    kmat[(a, bb)] = ct[(bb, a)] * phi_ab;
                }
            }
            let nmat = &iv.q * kmat.transpose() * iv.q.adjoint() * c(0.0, -dt);
            let y = self.control(x, k);
            for (i, gen) in self.alg.mats.iter().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for r in 0..d {
                    for s in 0..d {
                        acc += nmat[(r, s)] * gen[(s, r)];
                    }
                }
                grad[k * m + i] = acc.re + 2.0 * dt * self.alg.weights[i] * y[i];
            }
            prefix = &prefix * &iv.exp;
        }
        let dphase = self.target_adj * &u * (rotation * c(0.0, -1.0));
        grad[x.len() - 1] = (z.adjoint() * dphase).trace().re;

        *self.cache.borrow_mut() = Some((x.to_vec(), value, grad.clone()));
        (value, grad)
    }
}

impl CostFunction for Lagrangian<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, x: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        Ok(self.value_and_gradient(x).0)
    }
}

impl Gradient for Lagrangian<'_> {
    type Param = Vec<f64>;
    type Gradient = Vec<f64>;

    fn gradient(&self, x: &Self::Param) -> std::result::Result<Vec<f64>, argmin::core::Error> {
        Ok(self.value_and_gradient(x).1)
    }
}

fn endpoint(alg: &Algebra, x: &[f64], n: usize) -> CMatrix {
    let m = alg.len();
    let d = alg.dim;
    (0..n).fold(CMatrix::identity(d, d), |u, k| {
        let y = RVector::from_column_slice(&x[k * m..(k + 1) * m]);
        linalg::expm_hermitian(&alg.combine(&y), 1.0 / n as f64) * u
    })
}

/// One augmented-Lagrangian run from `x0`; returns the final parameters.
fn run(alg: &Algebra, target_adj: &CMatrix, n: usize, mut x: Vec<f64>, tol: f64) -> Vec<f64> {
    let d = alg.dim;
    let mut multiplier = CMatrix::zeros(d, d);
    let mut penalty = 10.0;
    let mut last_violation = f64::INFINITY;
    for _ in 0..OUTER_ITERS {
        let problem = Lagrangian {
            alg,
            target_adj,
            n,
            multiplier: multiplier.clone(),
            penalty,
            cache: RefCell::new(None),
        };
        let solver = LBFGS::new(MoreThuenteLineSearch::new(), 10)
            .with_tolerance_grad(1e-11)
            .expect("valid tolerance")
            .with_tolerance_cost(1e-16)
            .expect("valid tolerance");
        let start = x.clone();
        let outcome = Executor::new(problem, solver).configure(|s| s.param(start).max_iters(INNER_ITERS)).run();
        if let Ok(res) = outcome {
            if let Some(best) = res.state.best_param {
                x = best;
            }
        }
        let u = endpoint(alg, &x, n);
        let phi = x[x.len() - 1];
        let g = target_adj * &u * c(0.0, -phi).exp() - CMatrix::identity(d, d);
        let violation = g.norm() / (d as f64).sqrt();
        if violation < 0.1 * tol {
            break;
        }
        multiplier += &g * c(penalty, 0.0);
        if violation > 0.25 * last_violation {
            penalty = (penalty * 10.0).min(1e9);
        }
        last_violation = violation;
    }
    x
}

fn initial_guess(alg: &Algebra, target: &CMatrix, n: usize, branch: usize, noise: Option<&mut ChaCha8Rng>) -> Vec<f64> {
    let d = alg.dim;
    let m = alg.len();
    let alpha = target.determinant().arg() / d as f64;
    let phase = c(0.0, 2.0 * std::f64::consts::PI * (branch % d) as f64 / d as f64 - alpha).exp();
    let y = alg.coords(&linalg::unitary_log(&(target * phase)));
    let mut x = Vec::with_capacity(n * m + 1);
    for _ in 0..n {
        x.extend(y.iter());
    }
    if let Some(rng) = noise {
        let normal = Normal::new(0.0, RESTART_NOISE).unwrap();
        for v in x.iter_mut() {
            *v += normal.sample(rng);
        }
    }
    let u = endpoint(alg, &x, n);
    x.push(linalg::trace(&(target.adjoint() * u)).arg());
    x
}

fn to_result(alg: &Algebra, target: &CMatrix, x: &[f64], n: usize, tol: f64) -> Result<GeodesicResult> {
    let m = alg.len();
    let total = alg.all_labels.len();
    let u = endpoint(alg, x, n);
    let residual = endpoint_distance(&phase_fixed(target.adjoint() * u));
    let rows: Vec<Vec<f64>> =
        (0..n).map(|k| alg.expand(&RVector::from_column_slice(&x[k * m..(k + 1) * m]), total)).collect();
    let path = ProtocolPath::new(alg.all_labels.clone(), rows)?;
    let length = (0..n)
        .map(|k| alg.norm(&RVector::from_column_slice(&x[k * m..(k + 1) * m])) / n as f64)
        .sum();
    let partials = (0..total).map(|i| path.integral(i)).collect();
    Ok(GeodesicResult { path, length, partials, endpoint_residual: residual, converged: residual < tol, multiplicity: 1 })
}

/// Best direct-optimizer protocol over `cfg.direct_restarts` restarts
/// (`None` only when zero restarts are requested).
pub(crate) fn optimize(alg: &Algebra, target: &CMatrix, cfg: &SolverConfig) -> Result<Option<GeodesicResult>> {
    let n = cfg.n_intervals;
    let target_adj = target.adjoint();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_d1ec);
    let mut best: Option<GeodesicResult> = None;
    for restart in 0..cfg.direct_restarts {
        let branch = restart % alg.dim;
        let noise = (restart >= alg.dim).then_some(&mut rng);
        let x0 = initial_guess(alg, target, n, branch, noise);
        let x = run(alg, &target_adj, n, x0, cfg.tol_endpoint);
        let candidate = to_result(alg, target, &x, n, cfg.tol_endpoint)?;
        let better = match &best {
            None => true,
            Some(b) => match (candidate.converged, b.converged) {
                (true, false) => true,
                (false, true) => false,
                (true, true) => candidate.length < b.length,
                (false, false) => candidate.endpoint_residual < b.endpoint_residual,
            },
        };
        if better {
            best = Some(candidate);
        }
    }
    Ok(best)
}

/// Direct piecewise-constant path optimization (`cfg.n_intervals` intervals,
/// `cfg.direct_restarts` restarts) without the shooting stage.
pub fn direct_path_optimization(
    target: &CMatrix,
    gens: &GeneratorSet,
    w: &CostWeights,
    cfg: &SolverConfig,
) -> Result<GeodesicResult> {
    cfg.validate()?;
    let alg = Algebra::new(gens, w, cfg)?;
    let cfg = SolverConfig { direct_restarts: cfg.direct_restarts.max(1), ..cfg.clone() };
    Ok(optimize(&alg, target, &cfg)?.expect("at least one restart"))
}
