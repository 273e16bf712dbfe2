use nalgebra::QR;
use serde::{Deserialize, Serialize};

use super::flow::{advance, TangentState};
use super::hamiltonian::PhaseSpaceHamiltonian;
use crate::error::{Error, Result};
use crate::linalg::{RMatrix, RVector};
use crate::response::LyapunovEstimate;

/// Settings for Benettin tangent-space re-orthonormalization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QrConfig {
    pub step: f64,
    /// Time between QR re-orthonormalizations.
    pub qr_interval: f64,
    pub energy_tol: f64,
}

impl Default for QrConfig {
    fn default() -> Self {
        Self { step: 1e-3, qr_interval: 0.1, energy_tol: 1e-6 }
    }
}

pub const MIN_QR_STEPS: usize = 50;

/// Benettin estimate of the full classical Lyapunov spectrum.
///
/// Tangent vectors start as the canonical frame and are re-orthonormalized by
/// QR every `qr_interval`; exponents are the time-averaged `ln|R_ii|`.
/// `residual` is the largest change of any exponent between the half-way and
/// final running estimates.
pub fn classical_lyapunov(
    ham: &dyn PhaseSpaceHamiltonian,
    x0: &RVector,
    total_time: f64,
    cfg: &QrConfig,
) -> Result<LyapunovEstimate> {
    let dim = 2 * ham.degrees_of_freedom();
    if x0.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: x0.len() });
    }
    if !(cfg.qr_interval > 0.0 && total_time > 0.0) {
        return Err(Error::InvalidInput("total time and QR interval must be positive".into()));
    }
    let n_qr = (total_time / cfg.qr_interval).round() as usize;
    if n_qr < MIN_QR_STEPS {
        return Err(Error::TooFewPoints { needed: MIN_QR_STEPS, found: n_qr });
    }
    let interval = total_time / n_qr as f64;
    let integ = super::IntegratorConfig { step: cfg.step, samples: 1, energy_tol: cfg.energy_tol };
    let reference = ham.as_quadratic().is_none().then(|| ham.energy(x0));

    let mut state = TangentState { x: x0.clone(), tangent: RMatrix::identity(dim, dim) };
    let mut sums = vec![0.0; dim];
    let mut times = Vec::with_capacity(n_qr);
    let mut halfway = vec![0.0; dim];
    for k in 0..n_qr {
        advance(ham, &mut state, k as f64 * interval, interval, &integ, reference)?;
        let (q, r) = QR::new(state.tangent.clone()).unpack();
        for (i, s) in sums.iter_mut().enumerate() {
            *s += r[(i, i)].abs().ln();
        }
        state.tangent = q;
        let t = (k + 1) as f64 * interval;
        times.push(t);
        if k + 1 == n_qr / 2 {
            halfway = sums.iter().map(|s| s / t).collect();
        }
    }
    let lambdas: Vec<f64> = sums.iter().map(|s| s / total_time).collect();
    let residual = lambdas.iter().zip(&halfway).fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
    let mut sorted = lambdas;
    sorted.sort_by(|a, b| b.total_cmp(a));
    Ok(LyapunovEstimate { lambdas: sorted, times, fit_window: (0.0, total_time), residual })
}
