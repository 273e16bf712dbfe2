//! Classical phase-space dynamics: trajectories, tangent maps, Benettin
//! spectra, Gaussian Wigner transport and inverted-oscillator closed forms.

mod flow;
mod hamiltonian;
mod iho;
mod lyapunov;
mod wigner;

pub use flow::{evolve_flow, jacobian_matrix, IntegratorConfig, PhaseSpaceFlow};
pub use hamiltonian::{PhaseSpaceHamiltonian, PolynomialOscillator, QuadraticHamiltonian, SeparableHamiltonian};
pub use iho::{iho_displacement_analytic, iho_response_analytic};
pub use lyapunov::{classical_lyapunov, QrConfig, MIN_QR_STEPS};
pub use wigner::{evolve_wigner_gaussian, GaussianWignerState};
