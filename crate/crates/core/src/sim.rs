//! Executes a [`PulseSequence`] for one frozen noise draw.

use std::f64::consts::PI;

use crate::pulse::{ChargeEventKind, Envelope, Pulse, PulseSequence, SequenceElement};
use crate::spin::hamiltonian::{channel_ops, check_rwa, effective_rabi_mhz};
use crate::spin::ops::{c, Mat4};
use crate::spin::{
    apply_dephasing_channel, driven_unitary, static_rotating_part, unitary, ChargeConfig, Channel,
    Drive, ElectronSpin, NoiseDraw, QuantumState, RotatingFrame, SpinSystemParams,
};
use crate::Result;

/// Per-step resolution of time-dependent pulses: 50 steps per Rabi period and
/// per inverse sweep span.
pub const STEPS_PER_PERIOD: f64 = 50.0;

#[derive(Debug, Clone)]
pub struct Execution {
    /// State when the first measurement is reached (or at the end).
    pub state: QuantumState,
    /// Elapsed sequence time (μs), including duration errors.
    pub time: f64,
    pub config: ChargeConfig,
    /// Trailing measurement markers, in order.
    pub measurements: Vec<SequenceElement>,
}

impl Execution {
    /// State in the interaction picture of the noise-free static Hamiltonian
    /// of the final configuration: ρ_I = U₀† ρ U₀, U₀ = exp(−2πi·H₀·t).
    pub fn interaction_frame_state(&self, params: &SpinSystemParams, frame: &RotatingFrame) -> QuantumState {
        let h0 = static_rotating_part(params, self.config, frame, &NoiseDraw::zero());
        let u0 = unitary(&h0, self.time);
        self.state.apply_unitary(&u0.adjoint())
    }
}

fn drive_of(p: &Pulse) -> Drive {
    Drive {
        channel: p.channel,
        frequency: p.frequency,
        phase: p.phase,
        rabi: p.rabi,
    }
}

fn f_ref(frame: &RotatingFrame, channel: Channel) -> f64 {
    match channel {
        Channel::Esr => frame.f_ref_e,
        Channel::Nmr => frame.f_ref_n,
    }
}

fn pulse_unitary(
    params: &SpinSystemParams,
    frame: &RotatingFrame,
    config: ChargeConfig,
    noise: &NoiseDraw,
    p: &Pulse,
    t0: f64,
) -> Result<(Mat4, f64)> {
    check_rwa(params, &drive_of(p))?;
    let duration = p.duration * noise.duration_factor(p.channel);
    let omega = effective_rabi_mhz(&drive_of(p), noise);
    let offset0 = p.frequency_at(0.0) - f_ref(frame, p.channel);
    let phase0 = p.phase.to_radians() + 2.0 * PI * offset0 * t0;
    if p.hard {
        let ops = channel_ops(params, p.channel);
        let n = ops.x * c(omega * phase0.cos()) + ops.y * c(omega * ops.sign * phase0.sin());
        return Ok((unitary(&n, duration), 0.0));
    }
    let h0 = static_rotating_part(params, config, frame, noise);
    if p.chirp.is_none() && p.envelope == Envelope::Square {
        let u = driven_unitary(params, &h0, p.channel, omega, offset0, phase0, duration);
        return Ok((u, duration));
    }
    let span = p
        .chirp
        .map(|ch| (ch.f_stop - ch.f_start).abs())
        .unwrap_or(0.0);
    let mut dt_max = f64::INFINITY;
    if omega > 0.0 {
        dt_max = dt_max.min(1.0 / (STEPS_PER_PERIOD * omega.abs()));
    }
    if span > 0.0 {
        dt_max = dt_max.min(1.0 / (STEPS_PER_PERIOD * span));
    }
    let steps = if dt_max.is_finite() {
        (duration / dt_max).ceil().max(1.0) as usize
    } else {
        1
    };
    let dt = duration / steps as f64;
    let mut u = Mat4::identity();
    let mut phase = p.phase.to_radians() + 2.0 * PI * offset0 * t0;
    for k in 0..steps {
        let frac = (k as f64 + 0.5) / steps as f64;
        let offset = p.frequency_at(frac * p.duration) - f_ref(frame, p.channel);
        let amp = match p.envelope {
            Envelope::Square => omega,
            Envelope::Sine => omega * (PI * frac).sin(),
        };
        u = driven_unitary(params, &h0, p.channel, amp, offset, phase, dt) * u;
        phase += 2.0 * PI * offset * dt;
    }
    Ok((u, duration))
}

/// Runs `seq` from its initial condition. The sequence is validated first.
pub fn execute(seq: &PulseSequence, params: &SpinSystemParams, noise: &NoiseDraw) -> Result<Execution> {
    seq.validate()?;
    params.validate()?;
    let init = QuantumState::product(seq.initial.electron, seq.initial.nucleus);
    execute_from(seq, params, noise, init)
}

/// Runs `seq` starting from an explicit state (assumed consistent with the
/// sequence's initial charge configuration).
pub fn execute_from(
    seq: &PulseSequence,
    params: &SpinSystemParams,
    noise: &NoiseDraw,
    mut state: QuantumState,
) -> Result<Execution> {
    let frame = seq.reference_frequencies;
    let mut config = seq.initial.charge_config;
    let mut t = 0.0;
    let mut measurements = Vec::new();
    for e in &seq.elements {
        match e {
            SequenceElement::Pulse(p) => {
                let (u, dt) = pulse_unitary(params, &frame, config, noise, p, t)?;
                state = state.apply_unitary(&u);
                t += dt;
            }
            SequenceElement::FreeEvolution { duration, .. } => {
                let h0 = static_rotating_part(params, config, &frame, noise);
                state = state.apply_unitary(&unitary(&h0, *duration));
                t += duration;
            }
            SequenceElement::ChargeEvent(ev) => {
                if ev.p_err > 0.0 {
                    state = apply_dephasing_channel(&state, ev.p_err, ev.dephased_subsystem())?;
                }
                config = ev.kind.apply(config)?;
                state = match ev.kind {
                    ChargeEventKind::LoadDown | ChargeEventKind::Unload => {
                        state.reset_electron(ElectronSpin::Down)
                    }
                    ChargeEventKind::LoadUp => state.reset_electron(ElectronSpin::Up),
                    ChargeEventKind::Shuttle1To2 | ChargeEventKind::Shuttle2To1 => state,
                };
            }
            SequenceElement::MeasureElectron | SequenceElement::MeasureNuclear { .. } => {
                measurements.push(*e);
            }
        }
    }
    Ok(Execution {
        state,
        time: t,
        config,
        measurements,
    })
}
