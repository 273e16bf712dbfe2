//! Complexity geometry and complexity linear response.
//!
//! The crate computes Nielsen-style circuit complexity (unitary, state and
//! partial complexities) for weighted quadratic cost functions, builds the
//! complexity response matrices `R` that measure how partial complexities react
//! to an initial perturbation, extracts Lyapunov spectra from `L = RᵀR`, and
//! relates the unitary response to out-of-time-order commutators through
//! `R·T = O`.
//!
//! Two representations are supported side by side:
//!
//! * finite-dimensional generator sets (Pauli strings, dimension ≤ 8), where
//!   complexities come from a geodesic solver on the unitary group;
//! * the Heisenberg algebra `{q_i, p_i, i·1}`, where every computation is done
//!   exactly in displacement coordinates `(a, b, phase)` and the dynamics is the
//!   linear symplectic flow of a quadratic Hamiltonian.
//!
//! `ħ = 1` throughout.

pub mod classical;
pub mod error;
pub mod generators;
pub mod geometry;
pub mod linalg;
pub mod otoc;
pub mod response;

pub use error::{Error, Result};
pub use num_complex::Complex64;
