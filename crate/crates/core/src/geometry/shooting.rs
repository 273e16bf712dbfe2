//! Euler–Arnold shooting for right-invariant weighted metrics.
//!
//! With momentum `Λ = Σ_K c_K M_K` and controls `Y = W⁻¹Γc`, geodesics obey
//! `Λ̇ = −i[H, Λ]`, `U̇ = −iHU`. The momentum ODE is integrated by RK4; the
//! unitary by a fourth-order commutator-free Magnus scheme whose two
//! exponentials per step are stored as two half-width path intervals, so the
//! stored path reaches exactly the endpoint used by the Newton iteration.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::{direct, Algebra, GeodesicResult, ProtocolPath, SolverConfig};
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, RMatrix, RVector};

const SQRT3_6: f64 = 0.288_675_134_594_812_9;
const GAUSS_1: f64 = 0.5 - SQRT3_6;
const GAUSS_2: f64 = 0.5 + SQRT3_6;
const CF_A: f64 = 0.25 + SQRT3_6;
const CF_B: f64 = 0.25 - SQRT3_6;

/// Distinct partial vectors are separated by more than this (max-norm).
const DISTINCT_PARTIALS: f64 = 1e-6;
/// Legs solved concurrently between updates of the pruning bound.
const CHUNK: usize = 8;
/// Iterations before a leg may be pruned against the best converged length.
const PRUNE_AFTER: usize = 2;

pub(crate) struct Shot {
    pub endpoint: CMatrix,
    /// Controls on `2·steps` equal sub-intervals.
    pub controls: Vec<RVector>,
}

/// Outcome of a geodesic solve with the data needed for warm starts.
pub(crate) struct Solved {
    pub result: GeodesicResult,
    /// Initial momentum of the selected shooting leg.
    pub momentum: Option<RVector>,
}

impl Algebra {
    fn euler_arnold_rhs(&self, momentum: &RVector) -> RVector {
        let y = &self.velocity_map * momentum;
        RVector::from_iterator(self.len(), self.structure.iter().map(|f| y.dot(&(f * momentum))))
    }

    pub fn shoot(&self, c0: &RVector, steps: usize) -> Shot {
        let dt = 1.0 / steps as f64;
        let half = 0.5 * dt;
        let mut u = CMatrix::identity(self.dim, self.dim);
        let mut controls = Vec::with_capacity(2 * steps);
        let mut cur = c0.clone();
        let mut f_cur = self.euler_arnold_rhs(&cur);
        for _ in 0..steps {
            let k1 = f_cur.clone();
            let k2 = self.euler_arnold_rhs(&(&cur + &k1 * half));
            let k3 = self.euler_arnold_rhs(&(&cur + &k2 * half));
            let k4 = self.euler_arnold_rhs(&(&cur + &k3 * dt));
            let next = &cur + (&k1 + &k2 * 2.0 + &k3 * 2.0 + &k4) * (dt / 6.0);
            let f_next = self.euler_arnold_rhs(&next);

            let c1 = hermite(&cur, &f_cur, &next, &f_next, dt, GAUSS_1);
            let c2 = hermite(&cur, &f_cur, &next, &f_next, dt, GAUSS_2);
            let y1 = &self.velocity_map * c1;
            let y2 = &self.velocity_map * c2;
            for y in [(&y1 * CF_A + &y2 * CF_B) * 2.0, (&y1 * CF_B + &y2 * CF_A) * 2.0] {
                u = linalg::expm_hermitian(&self.combine(&y), half) * u;
                controls.push(y);
            }
            cur = next;
            f_cur = f_next;
        }
        Shot { endpoint: u, controls }
    }

    /// Newton residual and scaled endpoint distance `‖V' − 1‖_F/√d`, where
    /// `V' = e^{iθ} U_target† U` with the phase making `tr V'` real positive.
    fn mismatch(&self, target_adj: &CMatrix, u: &CMatrix) -> (RVector, f64) {
        let v = target_adj * u;
        let v = phase_fixed(v);
        let dist = endpoint_distance(&v);
        let x = linalg::unitary_log(&v);
        (self.coords(&x), dist)
    }

    fn geodesic_from(&self, shot: &Shot, residual: f64, converged: bool) -> Result<GeodesicResult> {
        let total = self.all_labels.len();
        let width = 1.0 / shot.controls.len() as f64;
        let length = shot.controls.iter().map(|y| width * self.norm(y)).sum();
        let rows: Vec<Vec<f64>> = shot.controls.iter().map(|y| self.expand(y, total)).collect();
        let path = ProtocolPath::new(self.all_labels.clone(), rows)?;
        let partials = (0..total).map(|i| path.integral(i)).collect();
        Ok(GeodesicResult { path, length, partials, endpoint_residual: residual, converged, multiplicity: 1 })
    }
}

fn hermite(c0: &RVector, f0: &RVector, c1: &RVector, f1: &RVector, h: f64, s: f64) -> RVector {
    let (s2, s3) = (s * s, s * s * s);
    c0 * (2.0 * s3 - 3.0 * s2 + 1.0) + f0 * (h * (s3 - 2.0 * s2 + s)) + c1 * (3.0 * s2 - 2.0 * s3) + f1 * (h * (s3 - s2))
}

pub(crate) fn phase_fixed(v: CMatrix) -> CMatrix {
    let tr = linalg::trace(&v);
    if tr.norm() > 1e-300 {
        v * (tr.conj() / tr.norm())
    } else {
        v
    }
}

pub(crate) fn endpoint_distance(v: &CMatrix) -> f64 {
    let d = v.nrows();
    (v - CMatrix::identity(d, d)).norm() / (d as f64).sqrt()
}

struct Leg {
    momentum: RVector,
    shot: Shot,
    residual: f64,
}

/// Levenberg–Marquardt on the endpoint mismatch starting from momentum `c0`.
///
/// The geodesic length `‖Y(0)‖_W` is conserved, so a leg whose current
/// length clearly exceeds `bound` is abandoned, as is a leg heading to one of
/// the `known` converged momenta.
fn refine(alg: &Algebra, target_adj: &CMatrix, c0: RVector, cfg: &SolverConfig, bound: f64, known: &[RVector]) -> Leg {
    let steps = cfg.ode_steps;
    let m = alg.len();
    let eval = |cm: &RVector| {
        let shot = alg.shoot(cm, steps);
        let (r, dist) = alg.mismatch(target_adj, &shot.endpoint);
        (shot, r, dist)
    };
    let mut cur = c0;
    let (mut shot, mut r, mut dist) = eval(&cur);
    let mut mu = 1e-3;
    for iter in 0..cfg.max_iters {
        if dist < cfg.tol_endpoint || !dist.is_finite() {
            break;
        }
        if iter >= 12 && dist > 1e-3 {
            break;
        }
        if iter >= PRUNE_AFTER {
            let too_long = alg.norm(&(&alg.velocity_map * &cur)) > 1.2 * bound + 0.1;
            let duplicate = dist < 1e-4 && known.iter().any(|k| (k - &cur).amax() < 1e-4 * (1.0 + k.amax()));
            if too_long || duplicate {
                break;
            }
        }
        let h = 1e-7 * (1.0 + cur.amax());
        let mut jac = RMatrix::zeros(m, m);
        for j in 0..m {
            let mut probe = cur.clone();
            probe[j] += h;
            let (_, rj, _) = eval(&probe);
            jac.set_column(j, &((rj - &r) / h));
        }
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * &r;
        let mut accepted = false;
        for _ in 0..10 {
            let mut lhs = jtj.clone();
            for k in 0..m {
                lhs[(k, k)] += mu * (jtj[(k, k)] + 1e-12);
            }
            let Some(delta) = lhs.lu().solve(&(-&jtr)) else {
                mu *= 10.0;
                continue;
            };
            let trial = &cur + delta;
            let (tshot, tr, tdist) = eval(&trial);
            if tdist.is_finite() && tr.norm() < r.norm() {
                cur = trial;
                shot = tshot;
                r = tr;
                dist = tdist;
                mu = (mu / 5.0).max(1e-15);
                accepted = true;
                break;
            }
            mu *= 8.0;
        }
        if !accepted {
            break;
        }
    }
    Leg { momentum: cur, shot, residual: dist }
}

/// Points of a spherical Fibonacci lattice.
fn fibonacci_sphere(n: usize) -> Vec<RVector> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            RVector::from_vec(vec![r * phi.cos(), r * phi.sin(), z])
        })
        .collect()
}

/// Momenta of the constant-control paths `exp(−iX_k)` through each phase
/// branch `U e^{−iα} e^{2πik/d}` of the target.
fn log_branch_starts(alg: &Algebra, target: &CMatrix) -> Vec<RVector> {
    let d = alg.dim;
    let alpha = target.determinant().arg() / d as f64;
    (0..d)
        .map(|k| {
            let phase = c(0.0, 2.0 * std::f64::consts::PI * k as f64 / d as f64 - alpha).exp();
            let x = linalg::unitary_log(&(target * phase));
            &alg.momentum_map * alg.coords(&x)
        })
        .collect()
}

fn sphere_starts(alg: &Algebra, cfg: &SolverConfig) -> Vec<RVector> {
    let m = alg.len();
    if cfg.n_starts == 0 {
        return Vec::new();
    }
    let shells = [1.0, 2.0, 3.0].map(|k| k * std::f64::consts::PI / 3.0);
    let per_shell = cfg.n_starts.div_ceil(shells.len());
    let directions: Vec<RVector> = if m == 3 {
        fibonacci_sphere(per_shell)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        (0..per_shell)
            .map(|_| RVector::from_iterator(m, (0..m).map(|_| StandardNormal.sample(&mut rng))))
            .collect()
    };
    let mut out = Vec::with_capacity(cfg.n_starts);
    'outer: for &len in &shells {
        for u in &directions {
            if out.len() == cfg.n_starts {
                break 'outer;
            }
            let y = u * (len / alg.norm(u));
            out.push(&alg.momentum_map * y);
        }
    }
    out
}

fn lexicographic(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            other => return other,
        }
    }
    std::cmp::Ordering::Equal
}

/// Multi-start shooting with deterministic tie-breaking and direct fallback.
pub(crate) fn solve_unitary(alg: &Algebra, target: &CMatrix, cfg: &SolverConfig, hints: &[RVector]) -> Result<Solved> {
    cfg.validate()?;
    let d = alg.dim;
    if target.nrows() != d || target.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, found: target.nrows() });
    }
    let unitarity = linalg::max_abs(&(target.adjoint() * target - CMatrix::identity(d, d)));
    if unitarity > 1e-8 {
        return Err(Error::InvalidInput(format!("target is not unitary (deviation {unitarity:e})")));
    }
    let target_adj = target.adjoint();

    let mut starts = log_branch_starts(alg, target);
    starts.extend(hints.iter().filter(|h| h.len() == alg.len()).cloned());
    starts.extend(sphere_starts(alg, cfg));

    let mut converged: Vec<(GeodesicResult, RVector)> = Vec::new();
    let mut best_effort: Option<Leg> = None;
    let mut bound = f64::INFINITY;
    for chunk in starts.chunks(CHUNK) {
        let known: Vec<RVector> = converged.iter().map(|(_, m)| m.clone()).collect();
        let legs: Vec<Leg> =
            chunk.par_iter().map(|c0| refine(alg, &target_adj, c0.clone(), cfg, bound, &known)).collect();
        for leg in legs {
            if leg.residual < cfg.tol_endpoint {
                let g = alg.geodesic_from(&leg.shot, leg.residual, true)?;
                bound = bound.min(g.length);
                converged.push((g, leg.momentum));
            } else if best_effort.as_ref().is_none_or(|b| leg.residual < b.residual) {
                best_effort = Some(leg);
            }
        }
    }

    if !converged.is_empty() {
        let min_len = converged.iter().map(|(g, _)| g.length).fold(f64::INFINITY, f64::min);
        let mut near: Vec<(GeodesicResult, RVector)> =
            converged.into_iter().filter(|(g, _)| g.length <= min_len + cfg.tol_length).collect();
        near.sort_by(|a, b| lexicographic(&a.0.partials, &b.0.partials));
        let mut distinct: Vec<&[f64]> = Vec::new();
        for (g, _) in &near {
            let is_new = distinct.iter().all(|p| {
                p.iter().zip(&g.partials).fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs())) > DISTINCT_PARTIALS
            });
            if is_new {
                distinct.push(&g.partials);
            }
        }
        let multiplicity = distinct.len();
        let (mut result, momentum) = near.swap_remove(0);
        result.multiplicity = multiplicity;
        return Ok(Solved { result, momentum: Some(momentum) });
    }

    if let Some(fallback) = direct::optimize(alg, target, cfg)? {
        if fallback.converged {
            return Ok(Solved { result: fallback, momentum: None });
        }
        if best_effort.as_ref().is_none_or(|b| fallback.endpoint_residual < b.residual) {
            return finish_unconverged(alg, fallback, None);
        }
    }
    let leg = best_effort.expect("at least one shooting leg");
    let result = alg.geodesic_from(&leg.shot, leg.residual, false)?;
    finish_unconverged(alg, result, Some(leg.momentum))
}

fn finish_unconverged(alg: &Algebra, result: GeodesicResult, momentum: Option<RVector>) -> Result<Solved> {
    if !alg.full && result.endpoint_residual > 1e-6 {
        return Err(Error::TargetOutsideGroup(result.endpoint_residual));
    }
    Ok(Solved { result, momentum })
}
