//! Closed forms for the inverted harmonic oscillator `H = p²/2 − Ω²x²/2`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::generators::DisplacementVector;
use crate::response::{ResponseFlavor, ResponseMatrix};

fn check_omega(omega: f64) -> Result<()> {
    if omega > 0.0 && omega.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("omega must be positive, got {omega}")))
    }
}

/// `R = [[cosh Ωt, Ω sinh Ωt], [sinh Ωt / Ω, cosh Ωt]]` over labels `x`, `p`.
pub fn iho_response_analytic(omega: f64, t: f64) -> Result<ResponseMatrix> {
    check_omega(omega)?;
    let (ch, sh) = ((omega * t).cosh(), (omega * t).sinh());
    let entries = DMatrix::from_row_slice(2, 2, &[ch, omega * sh, sh / omega, ch]);
    Ok(ResponseMatrix::new(ResponseFlavor::Unitary, entries, t, vec!["x".into(), "p".into()], 0.0))
}

/// Transported perturbation `(ε₁(t), ε₂(t))` with
/// `ε₁(t) = ε₁ cosh Ωt + ε₂ sinh Ωt / Ω` and `ε₂(t) = ε₁ Ω sinh Ωt + ε₂ cosh Ωt`.
pub fn iho_displacement_analytic(eps1: f64, eps2: f64, omega: f64, t: f64) -> Result<DisplacementVector> {
    check_omega(omega)?;
    let (ch, sh) = ((omega * t).cosh(), (omega * t).sinh());
    DisplacementVector::new(vec![eps1 * ch + eps2 * sh / omega], vec![eps1 * omega * sh + eps2 * ch], 0.0)
}
