use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use super::ops::{c, Mat4, Vec4, ONE, ZERO};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElectronSpin {
    Down,
    Up,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NuclearSpin {
    Down,
    Up,
}

impl ElectronSpin {
    pub fn index(self) -> usize {
        match self {
            ElectronSpin::Down => 0,
            ElectronSpin::Up => 1,
        }
    }
    pub fn flipped(self) -> Self {
        match self {
            ElectronSpin::Down => ElectronSpin::Up,
            ElectronSpin::Up => ElectronSpin::Down,
        }
    }
}

impl NuclearSpin {
    pub fn index(self) -> usize {
        match self {
            NuclearSpin::Down => 0,
            NuclearSpin::Up => 1,
        }
    }
    pub fn flipped(self) -> Self {
        match self {
            NuclearSpin::Down => NuclearSpin::Up,
            NuclearSpin::Up => NuclearSpin::Down,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subsystem {
    Electron,
    Nuclear,
}

/// Joint electron⊗nucleus state, either a normalised state vector or a
/// density matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum QuantumState {
    Pure(Vec4),
    Mixed(Mat4),
}

pub const STATE_TOLERANCE: f64 = 1e-10;

impl QuantumState {
    pub fn product(electron: ElectronSpin, nucleus: NuclearSpin) -> Self {
        let mut v = Vec4::zeros();
        v[2 * electron.index() + nucleus.index()] = ONE;
        QuantumState::Pure(v)
    }

    pub fn ground() -> Self {
        Self::product(ElectronSpin::Down, NuclearSpin::Down)
    }

    pub fn pure(v: Vec4) -> Result<Self> {
        let s = QuantumState::Pure(v);
        s.validate()?;
        Ok(s)
    }

    pub fn mixed(rho: Mat4) -> Result<Self> {
        let s = QuantumState::Mixed(rho);
        s.validate()?;
        Ok(s)
    }

    pub fn density(&self) -> Mat4 {
        match self {
            QuantumState::Pure(v) => v * v.adjoint(),
            QuantumState::Mixed(rho) => *rho,
        }
    }

    pub fn into_mixed(self) -> Self {
        QuantumState::Mixed(self.density())
    }

    pub fn trace(&self) -> f64 {
        match self {
            QuantumState::Pure(v) => v.norm_squared(),
            QuantumState::Mixed(rho) => rho.trace().re,
        }
    }

    /// Populations of |↓⇓⟩, |↓⇑⟩, |↑⇓⟩, |↑⇑⟩.
    pub fn probabilities(&self) -> [f64; 4] {
        let mut p = [0.0; 4];
        match self {
            QuantumState::Pure(v) => {
                for (k, pk) in p.iter_mut().enumerate() {
                    *pk = v[k].norm_sqr();
                }
            }
            QuantumState::Mixed(rho) => {
                for (k, pk) in p.iter_mut().enumerate() {
                    *pk = rho[(k, k)].re;
                }
            }
        }
        p
    }

    pub fn prob_electron_up(&self) -> f64 {
        let p = self.probabilities();
        p[2] + p[3]
    }

    pub fn prob_nuclear_up(&self) -> f64 {
        let p = self.probabilities();
        p[1] + p[3]
    }

    pub fn expectation(&self, op: &Mat4) -> f64 {
        match self {
            QuantumState::Pure(v) => (v.adjoint() * op * v)[(0, 0)].re,
            QuantumState::Mixed(rho) => (rho * op).trace().re,
        }
    }

    /// ⟨ψ|ρ|ψ⟩ for a pure target.
    pub fn fidelity_with(&self, target: &Vec4) -> f64 {
        match self {
            QuantumState::Pure(v) => target.dotc(v).norm_sqr(),
            QuantumState::Mixed(rho) => (target.adjoint() * rho * target)[(0, 0)].re,
        }
    }

    pub fn apply_unitary(&self, u: &Mat4) -> Self {
        match self {
            QuantumState::Pure(v) => QuantumState::Pure(u * v),
            QuantumState::Mixed(rho) => QuantumState::Mixed(u * rho * u.adjoint()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            QuantumState::Pure(v) => {
                let n = v.norm();
                if (n - 1.0).abs() > STATE_TOLERANCE {
                    return Err(Error::Numerical(format!("state norm {n} deviates from 1")));
                }
            }
            QuantumState::Mixed(rho) => {
                let herm = (rho - rho.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
                if herm > STATE_TOLERANCE {
                    return Err(Error::Numerical(format!("density matrix not Hermitian ({herm:e})")));
                }
                let tr = rho.trace();
                if (tr.re - 1.0).abs() > STATE_TOLERANCE || tr.im.abs() > STATE_TOLERANCE {
                    return Err(Error::Numerical(format!("density matrix trace {tr}")));
                }
                let min_eig = min_eigenvalue(rho);
                if min_eig < -STATE_TOLERANCE {
                    return Err(Error::Numerical(format!(
                        "density matrix has negative eigenvalue {min_eig:e}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Resets the electron to `spin`, keeping the reduced nuclear state.
    pub fn reset_electron(&self, spin: ElectronSpin) -> Self {
        let rho = self.density();
        let mut out = Mat4::zeros();
        let e = spin.index();
        for a in 0..2 {
            for b in 0..2 {
                let reduced = rho[(a, b)] + rho[(2 + a, 2 + b)];
                out[(2 * e + a, 2 * e + b)] = reduced;
            }
        }
        QuantumState::Mixed(out)
    }

    /// Reduced 2×2 nuclear density matrix elements (ρ₀₀, ρ₀₁, ρ₁₁).
    pub fn nuclear_reduced(&self) -> [[super::ops::C64; 2]; 2] {
        let rho = self.density();
        let mut r = [[ZERO; 2]; 2];
        for (a, row) in r.iter_mut().enumerate() {
            for (b, el) in row.iter_mut().enumerate() {
                *el = rho[(a, b)] + rho[(2 + a, 2 + b)];
            }
        }
        r
    }

    /// Reduced 2×2 electron density matrix.
    pub fn electron_reduced(&self) -> [[super::ops::C64; 2]; 2] {
        let rho = self.density();
        let mut r = [[ZERO; 2]; 2];
        for (a, row) in r.iter_mut().enumerate() {
            for (b, el) in row.iter_mut().enumerate() {
                *el = rho[(2 * a, 2 * b)] + rho[(2 * a + 1, 2 * b + 1)];
            }
        }
        r
    }
}

fn min_eigenvalue(rho: &Mat4) -> f64 {
    let herm = (rho + rho.adjoint()) * c(0.5);
    SymmetricEigen::new(herm).eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Dephasing channel ρ → (1 − p)ρ + p·diag_S(ρ) on subsystem S: coherences
/// between different states of the chosen spin are scaled by (1 − p).
pub fn apply_dephasing_channel(
    state: &QuantumState,
    p_err: f64,
    subsystem: Subsystem,
) -> Result<QuantumState> {
    if !(0.0..=1.0).contains(&p_err) {
        return Err(Error::param(format!("p_err must lie in [0, 1], got {p_err}")));
    }
    let mut rho = state.density();
    let keep = c(1.0 - p_err);
    for r in 0..4 {
        for col in 0..4 {
            let differs = match subsystem {
                Subsystem::Nuclear => r % 2 != col % 2,
                Subsystem::Electron => r / 2 != col / 2,
            };
            if differs {
                rho[(r, col)] *= keep;
            }
        }
    }
    Ok(QuantumState::Mixed(rho))
}
