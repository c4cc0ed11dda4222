use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::noise::NoiseDraw;
use super::ops::{c, ix, iy, iz, max_abs, sx, sy, sz, C64, Mat4};
use super::params::SpinSystemParams;
use super::propagate::unitary;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Esr,
    Nmr,
}

/// Charge configuration seen by the coupled nucleus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChargeConfig {
    /// No electron near the nucleus; electron operators act trivially.
    Empty,
    /// Electron in the dot hosting the nucleus; hyperfine on.
    Qd1,
    /// Electron parked in the neighbouring dot; hyperfine off, shifted Larmor.
    Qd2,
}

impl ChargeConfig {
    pub fn has_electron(self) -> bool {
        !matches!(self, ChargeConfig::Empty)
    }
}

/// A continuous drive on one channel. Frequency in MHz, phase in degrees,
/// Rabi frequency in kHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Drive {
    pub channel: Channel,
    pub frequency: f64,
    pub phase: f64,
    pub rabi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RotatingFrame {
    pub f_ref_e: f64,
    pub f_ref_n: f64,
}

impl RotatingFrame {
    /// Frame rotating at the bare Larmor frequencies f_e⁰, f_n⁰.
    pub fn bare(params: &SpinSystemParams) -> Self {
        Self {
            f_ref_e: params.f_e0(),
            f_ref_n: params.f_n0(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Frame {
    Lab,
    Rotating(RotatingFrame),
}

/// Hermitian 4×4 Hamiltonian in MHz.
#[derive(Debug, Clone, PartialEq)]
pub struct Hamiltonian {
    pub matrix: Mat4,
    pub frame: Frame,
}

impl Hamiltonian {
    pub fn hermiticity_error(&self) -> f64 {
        max_abs(&(self.matrix - self.matrix.adjoint()))
    }

    /// Sorted real eigenvalues (MHz).
    pub fn eigenvalues(&self) -> [f64; 4] {
        let herm = (self.matrix + self.matrix.adjoint()) * c(0.5);
        let eig = nalgebra::SymmetricEigen::new(herm);
        let mut e = [0.0; 4];
        for (k, v) in eig.eigenvalues.iter().enumerate() {
            e[k] = *v;
        }
        e.sort_by(|a, b| a.partial_cmp(b).unwrap());
        e
    }
}

/// H = −B(γ_e S_z + γ_n I_z) + A(S·I) in the lab frame. With `secular` the
/// hyperfine term is reduced to A·S_z·I_z; without a loaded electron it is
/// absent.
pub fn build_static_hamiltonian(params: &SpinSystemParams, secular: bool) -> Hamiltonian {
    let mut h = sz() * c(params.electron_zeeman_mhz()) + iz() * c(params.nuclear_zeeman_mhz());
    if params.electron_loaded {
        let a = c(params.a_mhz());
        h += if secular {
            sz() * iz() * a
        } else {
            (sx() * ix() + sy() * iy() + sz() * iz()) * a
        };
    }
    Hamiltonian {
        matrix: h,
        frame: Frame::Lab,
    }
}

fn sense(coefficient: f64) -> f64 {
    if coefficient >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Operators and precession sense of a drive channel.
pub(crate) struct ChannelOps {
    pub x: Mat4,
    pub y: Mat4,
    pub z: Mat4,
    pub sign: f64,
}

pub(crate) fn channel_ops(params: &SpinSystemParams, channel: Channel) -> ChannelOps {
    match channel {
        Channel::Esr => ChannelOps {
            x: sx(),
            y: sy(),
            z: sz(),
            sign: sense(params.electron_zeeman_mhz()),
        },
        Channel::Nmr => ChannelOps {
            x: ix(),
            y: iy(),
            z: iz(),
            sign: sense(params.nuclear_zeeman_mhz()),
        },
    }
}

/// Static (drive-free) part of the secular rotating-wave Hamiltonian: Larmor
/// detunings from the frame references, quasi-static offsets, charge-state
/// dependent electron terms and A·S_z·I_z when the electron sits in QD1.
pub fn static_rotating_part(
    params: &SpinSystemParams,
    config: ChargeConfig,
    frame: &RotatingFrame,
    noise: &NoiseDraw,
) -> Mat4 {
    let ce = params.electron_zeeman_mhz();
    let cn = params.nuclear_zeeman_mhz();
    let se = sense(ce);
    let sn = sense(cn);
    let nuclear = cn + sn * noise.delta_iz * 1e-3 - sn * frame.f_ref_n;
    let mut h = iz() * c(nuclear);
    match config {
        ChargeConfig::Empty => {}
        ChargeConfig::Qd1 => {
            let spectator = if noise.spectator_detuned {
                noise.spectator_sign * params.spectator_mhz()
            } else {
                0.0
            };
            let electron = ce + se * (noise.delta_sz * 1e-3 + spectator) - se * frame.f_ref_e;
            h += sz() * c(electron) + sz() * iz() * c(params.a_mhz());
        }
        ChargeConfig::Qd2 => {
            let electron =
                ce + se * (noise.delta_sz * 1e-3 + params.qd2_offset * 1e-3) - se * frame.f_ref_e;
            h += sz() * c(electron);
        }
    }
    h
}

/// Effective Rabi frequency (MHz) including the quasi-static NMR amplitude
/// offset.
pub(crate) fn effective_rabi_mhz(drive: &Drive, noise: &NoiseDraw) -> f64 {
    match drive.channel {
        Channel::Esr => drive.rabi * 1e-3,
        Channel::Nmr => (drive.rabi + noise.delta_ix) * 1e-3,
    }
}

pub(crate) fn check_rwa(params: &SpinSystemParams, drive: &Drive) -> Result<()> {
    if !(drive.rabi >= 0.0) || !drive.rabi.is_finite() {
        return Err(Error::param(format!("Rabi frequency must be ≥ 0, got {}", drive.rabi)));
    }
    let addressed = match drive.channel {
        Channel::Esr => params.f_e0(),
        Channel::Nmr => params.f_n0(),
    };
    if drive.rabi * 1e-3 > 0.1 * addressed {
        return Err(Error::param(format!(
            "Rabi frequency {} kHz exceeds 10% of the {:?} transition ({addressed:.4} MHz); \
             rotating-wave approximation invalid",
            drive.rabi, drive.channel
        )));
    }
    Ok(())
}

fn drive_term(ops: &ChannelOps, omega: f64, phase_rad: f64) -> Mat4 {
    ops.x * c(omega * phase_rad.cos()) + ops.y * c(omega * ops.sign * phase_rad.sin())
}

/// H_RWA at absolute time `t` (μs) in the reference frame. The drive phase
/// advances as φ + 2π(f_drive − f_ref)·t, so off-frame drives are
/// time dependent in this frame.
pub fn rotating_frame_hamiltonian(
    params: &SpinSystemParams,
    config: ChargeConfig,
    frame: &RotatingFrame,
    drive: Option<&Drive>,
    noise: &NoiseDraw,
    t: f64,
) -> Result<Hamiltonian> {
    let mut h = static_rotating_part(params, config, frame, noise);
    if let Some(d) = drive {
        check_rwa(params, d)?;
        let ops = channel_ops(params, d.channel);
        let f_ref = match d.channel {
            Channel::Esr => frame.f_ref_e,
            Channel::Nmr => frame.f_ref_n,
        };
        let phase = d.phase.to_radians() + 2.0 * PI * (d.frequency - f_ref) * t;
        h += drive_term(&ops, effective_rabi_mhz(d, noise), phase);
    }
    Ok(Hamiltonian {
        matrix: h,
        frame: Frame::Rotating(*frame),
    })
}

/// Exact propagator for a constant-frequency drive segment.
///
/// `h0` is the static reference-frame part, `offset` = f_drive − f_ref (MHz),
/// `phase_start` the drive phase (rad) at the segment start. The segment is
/// solved in the frame co-rotating with the drive, where it is static, and
/// mapped back:
/// U = W(T)† · exp(−2πi·H_d·T), W(τ) = exp(2πi·s·offset·τ·Z),
/// H_d = h0 − s·offset·Z + Ω(cos φ X + s sin φ Y).
pub fn driven_unitary(
    params: &SpinSystemParams,
    h0: &Mat4,
    channel: Channel,
    omega_mhz: f64,
    offset: f64,
    phase_start: f64,
    duration: f64,
) -> Mat4 {
    let ops = channel_ops(params, channel);
    let h_d = h0 - ops.z * c(ops.sign * offset) + drive_term(&ops, omega_mhz, phase_start);
    let u = unitary(&h_d, duration);
    let mut w_dag = Mat4::zeros();
    for k in 0..4 {
        let angle = -2.0 * PI * ops.sign * offset * duration * ops.z[(k, k)].re;
        w_dag[(k, k)] = C64::from_polar(1.0, angle);
    }
    w_dag * u
}
