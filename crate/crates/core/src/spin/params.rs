use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Physical constants and couplings of the electron–nucleus pair.
///
/// Field in tesla, `gamma_e` in GHz/T, `gamma_n` in MHz/T, couplings in kHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpinSystemParams {
    pub b_ext: f64,
    pub gamma_e: f64,
    pub gamma_n: f64,
    pub a_hf: f64,
    #[serde(default)]
    pub a_spectator: Option<f64>,
    #[serde(default = "default_true")]
    pub electron_loaded: bool,
    /// Allows the low-field regime where the electron Zeeman splitting is
    /// less than 100·|A|.
    #[serde(default)]
    pub full_hamiltonian: bool,
    /// Electron Larmor offset (kHz) when the electron sits in the second dot.
    #[serde(default = "default_qd2_offset")]
    pub qd2_offset: f64,
}

fn default_true() -> bool {
    true
}

fn default_qd2_offset() -> f64 {
    5000.0
}

impl Default for SpinSystemParams {
    fn default() -> Self {
        Self {
            b_ext: 1.42,
            gamma_e: -28.0,
            gamma_n: -8.458,
            a_hf: -448.5,
            a_spectator: Some(120.0),
            electron_loaded: true,
            full_hamiltonian: false,
            qd2_offset: default_qd2_offset(),
        }
    }
}

impl SpinSystemParams {
    pub fn with_loaded(mut self, loaded: bool) -> Self {
        self.electron_loaded = loaded;
        self
    }

    pub fn with_hyperfine(mut self, a_khz: f64) -> Self {
        self.a_hf = a_khz;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.b_ext > 0.0) || !self.b_ext.is_finite() {
            return Err(Error::param(format!("b_ext must be > 0, got {}", self.b_ext)));
        }
        if !self.gamma_e.is_finite() || !self.gamma_n.is_finite() || !self.a_hf.is_finite() {
            return Err(Error::param("gyromagnetic ratios and couplings must be finite"));
        }
        if self.gamma_e == 0.0 || self.gamma_n == 0.0 {
            return Err(Error::param("gyromagnetic ratios must be non-zero"));
        }
        let zeeman_khz = (self.gamma_e * self.b_ext).abs() * 1e6;
        if !self.full_hamiltonian && zeeman_khz < 100.0 * self.a_hf.abs() {
            return Err(Error::param(format!(
                "electron Zeeman splitting {zeeman_khz:.1} kHz is below 100·|A| = {:.1} kHz; \
                 set full_hamiltonian to simulate this regime",
                100.0 * self.a_hf.abs()
            )));
        }
        Ok(())
    }

    /// Signed coefficient of S_z in the static Hamiltonian, −B·γ_e (MHz).
    pub fn electron_zeeman_mhz(&self) -> f64 {
        -self.b_ext * self.gamma_e * 1e3
    }

    /// Signed coefficient of I_z in the static Hamiltonian, −B·γ_n (MHz).
    pub fn nuclear_zeeman_mhz(&self) -> f64 {
        -self.b_ext * self.gamma_n
    }

    pub fn a_mhz(&self) -> f64 {
        self.a_hf * 1e-3
    }

    pub fn spectator_mhz(&self) -> f64 {
        self.a_spectator.unwrap_or(0.0) * 1e-3
    }

    /// Bare electron Larmor frequency |γ_e·B| (MHz).
    pub fn f_e0(&self) -> f64 {
        self.electron_zeeman_mhz().abs()
    }

    /// Bare nuclear Larmor frequency |γ_n·B| (MHz).
    pub fn f_n0(&self) -> f64 {
        self.nuclear_zeeman_mhz().abs()
    }
}

/// Transition frequencies (MHz) of the secular two-spin Hamiltonian.
///
/// `f_e_nuc_up` is the ESR line with the nucleus in ⇑ (f_e^⇑), `f_n_el_down`
/// the NMR line with the electron in ↓ (f_n^↓), and so on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionFrequencies {
    pub f_e_nuc_up: f64,
    pub f_e_nuc_down: f64,
    pub f_n_el_up: f64,
    pub f_n_el_down: f64,
    pub f_e0: f64,
    pub f_n0: f64,
}

impl TransitionFrequencies {
    pub fn labeled(&self) -> [(&'static str, f64); 6] {
        [
            ("f_e_nuc_up", self.f_e_nuc_up),
            ("f_e_nuc_down", self.f_e_nuc_down),
            ("f_n_el_up", self.f_n_el_up),
            ("f_n_el_down", self.f_n_el_down),
            ("f_e0", self.f_e0),
            ("f_n0", self.f_n0),
        ]
    }

    /// ESR line conditioned on the given nuclear state.
    pub fn esr_line(&self, nucleus_up: bool) -> f64 {
        if nucleus_up {
            self.f_e_nuc_up
        } else {
            self.f_e_nuc_down
        }
    }

    /// NMR line conditioned on the given electron state.
    pub fn nmr_line(&self, electron_up: bool) -> f64 {
        if electron_up {
            self.f_n_el_up
        } else {
            self.f_n_el_down
        }
    }
}

/// Secular level energy of |m_e, m_n⟩ in MHz.
fn secular_energy(p: &SpinSystemParams, me: f64, mn: f64, a: f64) -> f64 {
    p.electron_zeeman_mhz() * me + p.nuclear_zeeman_mhz() * mn + a * me * mn
}

pub fn transition_frequencies(params: &SpinSystemParams) -> TransitionFrequencies {
    let a = if params.electron_loaded { params.a_mhz() } else { 0.0 };
    let e = |me, mn| secular_energy(params, me, mn, a);
    TransitionFrequencies {
        f_e_nuc_up: (e(0.5, 0.5) - e(-0.5, 0.5)).abs(),
        f_e_nuc_down: (e(0.5, -0.5) - e(-0.5, -0.5)).abs(),
        f_n_el_up: (e(0.5, 0.5) - e(0.5, -0.5)).abs(),
        f_n_el_down: (e(-0.5, 0.5) - e(-0.5, -0.5)).abs(),
        f_e0: params.f_e0(),
        f_n0: params.f_n0(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sign_conventions() {
        let p = SpinSystemParams::default();
        let t = transition_frequencies(&p);
        let half_a = 0.22425;
        assert!((t.f_n_el_down - (t.f_n0 + half_a)).abs() < 1e-12);
        assert!((t.f_n_el_up - (t.f_n0 - half_a)).abs() < 1e-12);
        // f_e^⇑ = f_e⁰ − |A|/2, f_e^⇓ = f_e⁰ + |A|/2
        assert!((t.f_e_nuc_up - (t.f_e0 - half_a)).abs() < 1e-9);
        assert!((t.f_e_nuc_down - (t.f_e0 + half_a)).abs() < 1e-9);
    }

    #[test]
    fn zero_coupling_gives_bare_larmor() {
        let p = SpinSystemParams::default().with_hyperfine(0.0);
        let t = transition_frequencies(&p);
        let tol = 16.0 * f64::EPSILON * t.f_e0;
        assert!((t.f_e_nuc_up - t.f_e0).abs() < tol);
        assert!((t.f_e_nuc_down - t.f_e0).abs() < tol);
        assert!((t.f_n_el_up - t.f_n0).abs() < tol);
        assert!((t.f_n_el_down - t.f_n0).abs() < tol);
    }

    #[test]
    fn unloaded_equals_bare() {
        let loaded = transition_frequencies(&SpinSystemParams::default().with_hyperfine(0.0));
        let unloaded = transition_frequencies(&SpinSystemParams::default().with_loaded(false));
        assert_eq!(loaded, unloaded);
    }

    #[test]
    fn rejects_low_field_unless_flagged() {
        let mut p = SpinSystemParams {
            b_ext: 1e-6,
            ..SpinSystemParams::default()
        };
        assert!(p.validate().is_err());
        p.full_hamiltonian = true;
        assert!(p.validate().is_ok());
        p.b_ext = 0.0;
        assert!(p.validate().is_err());
    }
}
