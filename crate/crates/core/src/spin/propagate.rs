use std::f64::consts::PI;

use nalgebra::SymmetricEigen;

use super::hamiltonian::Hamiltonian;
use super::ops::{c, max_abs, C64, Mat4};
use super::state::QuantumState;

fn is_diagonal(h: &Mat4) -> bool {
    (0..4).all(|i| (0..4).all(|j| i == j || h[(i, j)] == C64::new(0.0, 0.0)))
}

/// U = exp(−2πi·H·dt) for Hermitian H (MHz) and dt (μs), by
/// eigendecomposition.
pub fn unitary(h: &Mat4, dt: f64) -> Mat4 {
    if is_diagonal(h) {
        let mut u = Mat4::zeros();
        for k in 0..4 {
            u[(k, k)] = C64::from_polar(1.0, -2.0 * PI * h[(k, k)].re * dt);
        }
        return u;
    }
    let herm = (h + h.adjoint()) * c(0.5);
    let eig = SymmetricEigen::new(herm);
    let v = eig.eigenvectors;
    let mut phases = Mat4::zeros();
    for k in 0..4 {
        phases[(k, k)] = C64::from_polar(1.0, -2.0 * PI * eig.eigenvalues[k] * dt);
    }
    &v * phases * v.adjoint()
}

pub fn unitary_deviation(u: &Mat4) -> f64 {
    max_abs(&(u.adjoint() * u - Mat4::identity()))
}

pub fn is_unitary_within(u: &Mat4, tol: f64) -> bool {
    unitary_deviation(u) < tol
}

/// Evolve `state` under a constant Hamiltonian for `dt` μs.
pub fn propagate(state: &QuantumState, h: &Hamiltonian, dt: f64) -> QuantumState {
    state.apply_unitary(&unitary(&h.matrix, dt))
}
