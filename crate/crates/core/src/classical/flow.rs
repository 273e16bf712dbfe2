use serde::{Deserialize, Serialize};

use super::hamiltonian::{PhaseSpaceHamiltonian, SeparableHamiltonian};
use crate::error::{Error, Result};
use crate::linalg::{RMatrix, RVector};

/// Fixed-step settings for the fourth-order symplectic integrator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegratorConfig {
    pub step: f64,
    /// Number of equal sub-intervals at whose ends the trajectory is sampled.
    pub samples: usize,
    /// Relative energy drift tolerated on nonlinear runs.
    pub energy_tol: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { step: 1e-3, samples: 1, energy_tol: 1e-6 }
    }
}

/// Sampled trajectory `x̃_t(x0)` with tangent maps `∂x̃_t/∂x0`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseSpaceFlow {
    pub x0: RVector,
    pub times: Vec<f64>,
    pub trajectory: Vec<RVector>,
    pub jacobians: Vec<RMatrix>,
}

impl PhaseSpaceFlow {
    pub fn final_point(&self) -> &RVector {
        self.trajectory.last().unwrap()
    }

    pub fn final_jacobian(&self) -> &RMatrix {
        self.jacobians.last().unwrap()
    }
}

// Forest–Ruth composition, position (drift) first.
const FR_THETA: f64 = 1.351_207_191_959_657_6;
const FR_DRIFT: [f64; 4] = [FR_THETA / 2.0, (1.0 - FR_THETA) / 2.0, (1.0 - FR_THETA) / 2.0, FR_THETA / 2.0];
const FR_KICK: [f64; 3] = [FR_THETA, 1.0 - 2.0 * FR_THETA, FR_THETA];

/// Phase-space point together with a block of tangent vectors.
pub(crate) struct TangentState {
    pub x: RVector,
    pub tangent: RMatrix,
}

fn drift(sep: &dyn SeparableHamiltonian, s: &mut TangentState, n: usize, h: f64) {
    let p = s.x.rows(n, n).into_owned();
    let grad = sep.kinetic_gradient(&p);
    let hess = sep.kinetic_hessian(&p);
    let dq = hess * s.tangent.rows(n, n) * h;
    let mut q = s.x.rows_mut(0, n);
    q += grad * h;
    let mut tq = s.tangent.rows_mut(0, n);
    tq += dq;
}

fn kick(sep: &dyn SeparableHamiltonian, s: &mut TangentState, n: usize, h: f64) {
    let q = s.x.rows(0, n).into_owned();
    let grad = sep.potential_gradient(&q);
    let hess = sep.potential_hessian(&q);
    let dp = hess * s.tangent.rows(0, n) * h;
    let mut p = s.x.rows_mut(n, n);
    p -= grad * h;
    let mut tp = s.tangent.rows_mut(n, n);
    tp -= dp;
}

/// One Forest–Ruth step; the tangent block is advanced by the exact
/// linearization of each drift/kick, so it stays symplectic to rounding.
fn forest_ruth_step(sep: &dyn SeparableHamiltonian, s: &mut TangentState, n: usize, h: f64) {
    for k in 0..3 {
        drift(sep, s, n, FR_DRIFT[k] * h);
        kick(sep, s, n, FR_KICK[k] * h);
    }
    drift(sep, s, n, FR_DRIFT[3] * h);
}

/// Advances `(x, tangent)` over `duration` (negative runs backwards).
pub(crate) fn advance(
    ham: &dyn PhaseSpaceHamiltonian,
    state: &mut TangentState,
    t_start: f64,
    duration: f64,
    cfg: &IntegratorConfig,
    reference_energy: Option<f64>,
) -> Result<()> {
    if duration == 0.0 {
        return Ok(());
    }
    if let Some(sep) = ham.separable() {
        if !(cfg.step.is_finite() && cfg.step > 0.0) {
            return Err(Error::StepUnderflow(t_start));
        }
        let n_steps = (duration.abs() / cfg.step).ceil().max(1.0);
        let h = duration / n_steps;
        if h.abs() < 1e-14 {
            return Err(Error::StepUnderflow(t_start));
        }
        let n = ham.degrees_of_freedom();
        for k in 0..n_steps as usize {
            forest_ruth_step(sep, state, n, h);
            if !state.x.iter().all(|v| v.is_finite()) {
                return Err(Error::StepUnderflow(t_start + h * k as f64));
            }
        }
        if let Some(e0) = reference_energy {
            let drift = (ham.energy(&state.x) - e0).abs() / e0.abs().max(1.0);
            if drift > cfg.energy_tol {
                return Err(Error::EnergyDrift(drift));
            }
        }
        Ok(())
    } else if let Some(quad) = ham.as_quadratic() {
        let s = quad.flow_matrix(duration);
        state.x = &s * &state.x;
        state.tangent = s * &state.tangent;
        Ok(())
    } else {
        Err(Error::InvalidInput(
            "nonlinear Hamiltonians must provide a kinetic/potential split".into(),
        ))
    }
}

fn check_point(ham: &dyn PhaseSpaceHamiltonian, x0: &RVector) -> Result<()> {
    let dim = 2 * ham.degrees_of_freedom();
    if x0.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: x0.len() });
    }
    if !x0.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidInput("initial point is not finite".into()));
    }
    Ok(())
}

/// Trajectory and tangent maps from `x0` over `[0, t]`.
///
/// Quadratic Hamiltonians are propagated exactly through `S(t)`; everything
/// else goes through the symplectic integrator.
pub fn evolve_flow(
    ham: &dyn PhaseSpaceHamiltonian,
    x0: &RVector,
    t: f64,
    cfg: &IntegratorConfig,
) -> Result<PhaseSpaceFlow> {
    check_point(ham, x0)?;
    let samples = cfg.samples.max(1);
    let times: Vec<f64> = (0..=samples).map(|k| t * k as f64 / samples as f64).collect();
    let dim = x0.len();
    let mut trajectory = vec![x0.clone()];
    let mut jacobians = vec![RMatrix::identity(dim, dim)];

    if let Some(quad) = ham.as_quadratic() {
        for &tk in &times[1..] {
            let s = quad.flow_matrix(tk);
            trajectory.push(&s * x0);
            jacobians.push(s);
        }
    } else {
        let e0 = ham.energy(x0);
        let mut state = TangentState { x: x0.clone(), tangent: RMatrix::identity(dim, dim) };
        for w in times.windows(2) {
            advance(ham, &mut state, w[0], w[1] - w[0], cfg, Some(e0))?;
            trajectory.push(state.x.clone());
            jacobians.push(state.tangent.clone());
        }
    }
    Ok(PhaseSpaceFlow { x0: x0.clone(), times, trajectory, jacobians })
}

/// Tangent map `∂x̃_t/∂x` at `x0`, integrated alongside the flow.
///
/// Separable Hamiltonians (including block-diagonal quadratic ones) use the
/// variational Forest–Ruth integrator; non-separable quadratic forms fall back
/// to the exact exponential. Negative `t` runs the flow backwards.
pub fn jacobian_matrix(
    ham: &dyn PhaseSpaceHamiltonian,
    x0: &RVector,
    t: f64,
    cfg: &IntegratorConfig,
) -> Result<RMatrix> {
    check_point(ham, x0)?;
    let dim = x0.len();
    let reference = ham.as_quadratic().is_none().then(|| ham.energy(x0));
    let mut state = TangentState { x: x0.clone(), tangent: RMatrix::identity(dim, dim) };
    advance(ham, &mut state, 0.0, t, cfg, reference)?;
    Ok(state.tangent)
}
