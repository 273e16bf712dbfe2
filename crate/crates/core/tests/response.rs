use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use cxresponse::classical::{
    iho_response_analytic, jacobian_matrix, GaussianWignerState, IntegratorConfig, PolynomialOscillator,
    QuadraticHamiltonian,
};
use cxresponse::generators::GeneratorSet;
use cxresponse::geometry::CostWeights;
use cxresponse::linalg::{self, c, pauli_x, pauli_y, pauli_z, CMatrix, CVector, RMatrix};
use cxresponse::response::{
    displacement_response_exact, lyapunov_spectrum, response_spectrum, state_response_matrix,
    unitary_response_matrix, DiffConfig, Hamiltonian, ResponseFlavor, ResponseMatrix, ResponseSpectrum,
    StateDescriptor,
};
use cxresponse::Error;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

const FD_TOL: f64 = 1e-6;

fn rel_gap(a: &RMatrix, b: &RMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs() / y.abs().max(1.0)).fold(0.0, f64::max)
}

fn heisenberg() -> GeneratorSet {
    GeneratorSet::heisenberg(1).unwrap()
}

fn iho(omega: f64) -> Hamiltonian {
    Hamiltonian::quadratic(QuadraticHamiltonian::inverted_oscillator(omega))
}

/// Coordinates `tr(σ_L·X)/2` of a traceless Hermitian 2×2 matrix.
fn pauli_coords(x: &CMatrix) -> [f64; 3] {
    [pauli_x(), pauli_y(), pauli_z()].map(|p| 0.5 * linalg::trace(&(p * x)).re)
}

/// `exp(−iHt)` through nalgebra's Padé exponential.
fn propagator(h: &CMatrix, t: f64) -> CMatrix {
    (h * c(0.0, -t)).exp()
}

/// `R_KL = coords_L(e^{−iHt} σ_K e^{iHt})`.
fn adjoint_oracle(h: &CMatrix, t: f64) -> RMatrix {
    let u = propagator(h, t);
    let rows = [pauli_x(), pauli_y(), pauli_z()].map(|p| pauli_coords(&(&u * p * u.adjoint())));
    RMatrix::from_fn(3, 3, |k, l| rows[k][l])
}

/// Adjoint rows with the component along the evolved Bloch vector removed.
fn projected_oracle(h: &CMatrix, psi: &CVector, t: f64) -> RMatrix {
    let u = propagator(h, t);
    let phi = &u * psi;
    let rho = &phi * phi.adjoint();
    let n = pauli_coords(&(rho * c(2.0, 0.0)));
    let mut r = adjoint_oracle(h, t);
    for k in 0..3 {
        let along: f64 = (0..3).map(|l| r[(k, l)] * n[l]).sum();
        for l in 0..3 {
            r[(k, l)] -= along * n[l];
        }
    }
    r
}

#[test]
fn iho_numeric_matches_closed_form() {
    let gens = heisenberg();
    for omega in [0.5, 1.0, 2.0] {
        for t in [0.0, 0.5, 1.0, 2.0, 5.0] {
            let r = unitary_response_matrix(&iho(omega), &gens, t, &DiffConfig::default()).unwrap();
            let exact = iho_response_analytic(omega, t).unwrap();
            assert!(rel_gap(&r.entries, &exact.entries) < 1e-6, "Ω = {omega}, t = {t}");
            assert_eq!(r.labels, vec!["x", "p"]);
            assert!(r.is_reliable());
            assert!(linalg::relative_symplectic_defect(&r.entries) < 1e-8);
            assert!(linalg::relative_determinant_defect(&r.entries) < 1e-8);
        }
    }
}

#[test]
fn iho_closed_form_values() {
    let r = iho_response_analytic(1.0, 1.0).unwrap();
    let expected = DMatrix::from_row_slice(2, 2, &[1.543081, 1.175201, 1.175201, 1.543081]);
    assert!(linalg::max_abs_real(&(r.entries - expected)) < 1e-6);
    let r = iho_response_analytic(2.0, 0.5).unwrap();
    let expected = DMatrix::from_row_slice(2, 2, &[1.543081, 2.350402, 0.587600, 1.543081]);
    assert!(linalg::max_abs_real(&(r.entries - expected)) < 1e-6);
    assert_eq!(iho_response_analytic(1.0, 0.0).unwrap().entries, RMatrix::identity(2, 2));
    assert!(iho_response_analytic(0.0, 1.0).is_err());
}

#[test]
fn response_is_identity_at_zero_time() {
    let r = unitary_response_matrix(&iho(1.3), &heisenberg(), 0.0, &DiffConfig::default()).unwrap();
    assert!(linalg::max_abs_real(&(r.entries - RMatrix::identity(2, 2))) < 10.0 * FD_TOL);

    let h = Hamiltonian::matrix(pauli_z() * c(0.7, 0.0) + pauli_x() * c(0.2, 0.0)).unwrap();
    let r = unitary_response_matrix(&h, &GeneratorSet::pauli_qubit(), 0.0, &DiffConfig::default()).unwrap();
    assert!(linalg::max_abs_real(&(r.entries - RMatrix::identity(3, 3))) < 10.0 * FD_TOL);

    let gauss = StateDescriptor::Gaussian(GaussianWignerState::vacuum(1));
    let r = state_response_matrix(&gauss, &iho(1.0), &heisenberg(), 0.0, &DiffConfig::default()).unwrap();
    assert!(linalg::max_abs_real(&(r.entries - RMatrix::identity(2, 2))) < 10.0 * FD_TOL);
}

#[test]
fn harmonic_quarter_period() {
    let h = Hamiltonian::quadratic(QuadraticHamiltonian::harmonic_oscillator(1.0));
    let r = unitary_response_matrix(&h, &heisenberg(), FRAC_PI_2, &DiffConfig::default()).unwrap();
    let expected = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
    assert!(linalg::max_abs_real(&(r.entries - expected)) < FD_TOL);
}

#[test]
fn qubit_unitary_response_matches_adjoint_oracle() {
    let hm = pauli_z() * c(0.7, 0.0) + pauli_x() * c(0.3, 0.0);
    let h = Hamiltonian::matrix(hm.clone()).unwrap();
    let gens = GeneratorSet::pauli_qubit();
    for t in [0.4, 1.1] {
        let r = unitary_response_matrix(&h, &gens, t, &DiffConfig::default()).unwrap();
        assert_eq!(r.flavor, ResponseFlavor::Unitary);
        let gap = linalg::max_abs_real(&(&r.entries - adjoint_oracle(&hm, t)));
        assert!(gap < 10.0 * FD_TOL, "t = {t}: gap {gap:e}");
    }
}

#[test]
fn qubit_state_response_matches_projection_oracle() {
    let hm = pauli_z();
    let h = Hamiltonian::matrix(hm.clone()).unwrap();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let plus = CVector::from_vec(vec![c(s, 0.0), c(s, 0.0)]);
    let r = state_response_matrix(
        &StateDescriptor::Vector(plus.clone()),
        &h,
        &GeneratorSet::pauli_qubit(),
        0.1,
        &DiffConfig::default(),
    )
    .unwrap();
    assert_eq!(r.flavor, ResponseFlavor::State);
    let gap = linalg::max_abs_real(&(&r.entries - projected_oracle(&hm, &plus, 0.1)));
    assert!(gap < 1e-4, "gap {gap:e}");
}

#[test]
fn gaussian_state_response_equals_unitary() {
    let gauss = StateDescriptor::Gaussian(GaussianWignerState::vacuum(1));
    let r = state_response_matrix(&gauss, &iho(1.0), &heisenberg(), 1.0, &DiffConfig::default()).unwrap();
    let u = unitary_response_matrix(&iho(1.0), &heisenberg(), 1.0, &DiffConfig::default()).unwrap();
    assert!(linalg::max_abs_real(&(&r.entries - &u.entries)) < 1e-8);
    let expected = DMatrix::from_row_slice(2, 2, &[1.543081, 1.175201, 1.175201, 1.543081]);
    assert!(linalg::max_abs_real(&(r.entries - expected)) < 1e-6);
}

#[test]
fn gaussian_bridge_to_tangent_map() {
    let forms = [[-1.0, 0.0, 1.0], [0.8, 0.3, 1.2], [0.0, 0.0, 1.0], [2.0, -0.5, 0.7]];
    let mean = DVector::from_vec(vec![0.4, -0.9]);
    let cov = DMatrix::from_row_slice(2, 2, &[0.9, 0.2, 0.2, 0.5]);
    let state = StateDescriptor::Gaussian(GaussianWignerState::new(mean.clone(), cov).unwrap());
    for [a, b, d] in forms {
        let quad = QuadraticHamiltonian::new(DMatrix::from_row_slice(2, 2, &[a, b, b, d])).unwrap();
        let h = Hamiltonian::quadratic(quad.clone());
        for t in [0.0, 0.7, 2.5, 5.0] {
            let r = state_response_matrix(&state, &h, &heisenberg(), t, &DiffConfig::default()).unwrap();
            let j = jacobian_matrix(&quad, &mean, t, &IntegratorConfig::default()).unwrap();
            let gap = rel_gap(&r.entries, &j.transpose());
            assert!(gap < 1e-6, "form {:?} t = {t}: gap {gap:e}", [a, b, d]);
        }
    }
}

#[test]
fn exact_displacement_response_matches_finite_differences() {
    let quad = QuadraticHamiltonian::new(DMatrix::from_row_slice(2, 2, &[0.6, -0.4, -0.4, 1.1])).unwrap();
    let gens = heisenberg();
    let exact = displacement_response_exact(&quad, &gens, 1.7, &CostWeights::isotropic(&gens)).unwrap();
    assert_eq!(exact.epsilon_used, 0.0);
    let fd = unitary_response_matrix(&Hamiltonian::quadratic(quad), &gens, 1.7, &DiffConfig::default()).unwrap();
    assert!(rel_gap(&fd.entries, &exact.entries) < 1e-8);
}

#[test]
fn spectrum_examples() {
    let id = ResponseMatrix::new(ResponseFlavor::Unitary, RMatrix::identity(3, 3), 0.0, vec![], 0.0);
    assert!(response_spectrum(&id).unwrap().eigenvalues.iter().all(|s| (s - 1.0).abs() < 1e-15));
    let s = response_spectrum(&iho_response_analytic(1.0, 1.0).unwrap()).unwrap();
    assert!((s.eigenvalues[0] - 2f64.exp()).abs() < 1e-9);
    assert!((s.eigenvalues[1] - (-2f64).exp()).abs() < 1e-9);
    assert!(rel_gap(&s.l_matrix, &DMatrix::from_row_slice(2, 2, &[2f64.cosh(), 2f64.sinh(), 2f64.sinh(), 2f64.cosh()])) < 1e-12);
}

fn iho_spectra(omega: f64, times: &[f64]) -> Vec<ResponseSpectrum> {
    times.iter().map(|&t| response_spectrum(&iho_response_analytic(omega, t).unwrap()).unwrap()).collect()
}

#[test]
fn lyapunov_from_response_spectrum() {
    let times: Vec<f64> = (0..=20).map(|k| 5.0 + 0.25 * k as f64).collect();
    let est = lyapunov_spectrum(&iho_spectra(1.0, &times), (5.0, 10.0)).unwrap();
    assert!((est.lambdas[0] - 1.0).abs() < 0.01 && (est.lambdas[1] + 1.0).abs() < 0.01, "{:?}", est.lambdas);

    let harmonic = QuadraticHamiltonian::harmonic_oscillator(1.0);
    let gens = heisenberg();
    let w = CostWeights::isotropic(&gens);
    let times: Vec<f64> = (0..=60).map(|k| 20.0 + 0.5 * k as f64).collect();
    let spectra: Vec<ResponseSpectrum> = times
        .iter()
        .map(|&t| response_spectrum(&displacement_response_exact(&harmonic, &gens, t, &w).unwrap()).unwrap())
        .collect();
    let est = lyapunov_spectrum(&spectra, (20.0, 50.0)).unwrap();
    assert!(est.lambdas.iter().all(|l| l.abs() < 0.05), "{:?}", est.lambdas);
}

#[test]
fn lyapunov_fit_of_exact_exponentials() {
    let lambdas = [0.7, -0.2];
    let spectra: Vec<ResponseSpectrum> = (0..10)
        .map(|k| {
            let t = 1.0 + k as f64;
            ResponseSpectrum {
                l_matrix: RMatrix::identity(2, 2),
                eigenvalues: lambdas.iter().map(|l| (2.0 * l * t).exp()).collect(),
                time: t,
            }
        })
        .collect();
    let est = lyapunov_spectrum(&spectra, (0.0, 20.0)).unwrap();
    assert!((est.lambdas[0] - 0.7).abs() < 1e-12 && (est.lambdas[1] + 0.2).abs() < 1e-12);
    assert!(matches!(lyapunov_spectrum(&spectra[..3], (0.0, 20.0)), Err(Error::TooFewPoints { .. })));
}

#[test]
fn pipeline_errors() {
    let gens = heisenberg();
    let qubit = Hamiltonian::matrix(pauli_z()).unwrap();
    let cfg = DiffConfig::default();
    assert!(matches!(unitary_response_matrix(&qubit, &gens, 1.0, &cfg), Err(Error::KindMismatch(_))));
    let quartic = Hamiltonian::PhaseSpace(Arc::new(PolynomialOscillator::quartic()));
    assert!(matches!(unitary_response_matrix(&quartic, &gens, 1.0, &cfg), Err(Error::NonQuadratic)));
    let bad = DiffConfig { epsilon: 0.0, ..DiffConfig::default() };
    assert!(matches!(unitary_response_matrix(&iho(1.0), &gens, 1.0, &bad), Err(Error::InvalidInput(_))));
    let not_hermitian = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
    assert!(matches!(Hamiltonian::matrix(not_hermitian), Err(Error::NotHermitian(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn eigenvalue_product_is_squared_determinant(v in prop::collection::vec(-2.0..2.0f64, 9)) {
        let m = DMatrix::from_row_slice(3, 3, &v);
        let s = response_spectrum(&ResponseMatrix::new(ResponseFlavor::Unitary, m.clone(), 0.0, vec![], 0.0)).unwrap();
        let product: f64 = s.eigenvalues.iter().product();
        let det2 = m.determinant().powi(2);
        prop_assert!((product - det2).abs() <= 1e-8 * det2.abs().max(1.0));
        prop_assert!(s.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn exact_response_is_symplectic(a in -2.0..2.0f64, b in -1.0..1.0f64, d in 0.1..2.0f64, t in 0.0..5.0f64) {
        let quad = QuadraticHamiltonian::new(DMatrix::from_row_slice(2, 2, &[a, b, b, d])).unwrap();
        let gens = heisenberg();
        let r = displacement_response_exact(&quad, &gens, t, &CostWeights::isotropic(&gens)).unwrap();
        prop_assert!(linalg::relative_symplectic_defect(&r.entries) < 1e-8);
        prop_assert!(linalg::relative_determinant_defect(&r.entries) < 1e-8);
        let s = response_spectrum(&r).unwrap();
        let product: f64 = s.eigenvalues.iter().product();
        prop_assert!((product - 1.0).abs() < 1e-8 * s.eigenvalues[0].max(1.0));
    }
}
