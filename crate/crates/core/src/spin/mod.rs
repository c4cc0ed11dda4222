//! Joint electron⊗nucleus two-spin system.
//!
//! Basis order is electron-major: index = 2·e + n with e, n ∈ {0 = ↓/⇓, 1 = ↑/⇑},
//! i.e. |↓⇓⟩, |↓⇑⟩, |↑⇓⟩, |↑⇑⟩. Spin operators are S = σ/2 ⊗ 1 and
//! I = 1 ⊗ σ/2 written in the (↓, ↑) single-spin ordering.

pub(crate) mod hamiltonian;
mod noise;
pub mod ops;
mod params;
mod propagate;
mod state;

pub use hamiltonian::{
    build_static_hamiltonian, driven_unitary, rotating_frame_hamiltonian, static_rotating_part,
    ChargeConfig, Channel, Drive, Frame, Hamiltonian, RotatingFrame,
};
pub use noise::{dephasing_sigma_khz, sample_noise, DurationErrorShape, NoiseDraw, NoiseModel};
pub use params::{transition_frequencies, SpinSystemParams, TransitionFrequencies};
pub use propagate::{is_unitary_within, propagate, unitary, unitary_deviation};
pub use state::{apply_dephasing_channel, ElectronSpin, NuclearSpin, QuantumState, Subsystem};
