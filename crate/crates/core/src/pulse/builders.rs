use serde::{Deserialize, Serialize};

use super::{
    ChargeEvent, ChargeEventKind, Chirp, Envelope, InitialCondition, Pulse, PulseSequence,
    SequenceElement,
};
use crate::spin::{
    transition_frequencies, ChargeConfig, Channel, ElectronSpin, NuclearSpin, RotatingFrame,
    SpinSystemParams,
};
use crate::{Error, Result};

/// π-pulse duration (μs) for a Rabi frequency in kHz.
pub fn pi_duration(rabi_khz: f64) -> f64 {
    1e3 / (2.0 * rabi_khz)
}

pub fn pi_half_duration(rabi_khz: f64) -> f64 {
    1e3 / (4.0 * rabi_khz)
}

/// Square NMR pulse rotating by `angle` degrees.
pub fn nmr_pulse(frequency: f64, phase: f64, rabi_khz: f64, angle: f64) -> Pulse {
    Pulse::new(Channel::Nmr, frequency, phase, rabi_khz, angle / 360.0 * 1e3 / rabi_khz)
}

fn esr_pulse(frequency: f64, phase: f64, rabi_khz: f64, angle: f64) -> Pulse {
    Pulse::new(Channel::Esr, frequency, phase, rabi_khz, angle / 360.0 * 1e3 / rabi_khz)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InversionTarget {
    /// Conditional on nucleus ⇑ (line f_e^⇑).
    NuclearUp,
    /// Conditional on nucleus ⇓ (line f_e^⇓).
    NuclearDown,
    Broadband,
}

pub const INVERSION_DURATION: f64 = 650.0;
pub const INVERSION_RABI: f64 = 100.0;

/// Chirped electron inversion: 650 μs at 100 kHz peak Rabi frequency with a
/// half-sine amplitude envelope. Conditional sweeps run from 300 kHz on the
/// far side of the line to 50 kHz towards the other line; the broadband
/// sweep spans 2.8 MHz about f_e⁰.
pub fn adiabatic_inversion(params: &SpinSystemParams, target: InversionTarget) -> SequenceElement {
    let t = transition_frequencies(params);
    let (near, far) = (0.05, 0.3);
    let (f_start, f_stop) = match target {
        InversionTarget::NuclearUp => {
            // f_e^⇓ lies above f_e^⇑ for the default signs; keep the short
            // side of the sweep towards the other line.
            let other_above = t.f_e_nuc_down >= t.f_e_nuc_up;
            let f = t.f_e_nuc_up;
            if other_above { (f - far, f + near) } else { (f - near, f + far) }
        }
        InversionTarget::NuclearDown => {
            let other_above = t.f_e_nuc_up >= t.f_e_nuc_down;
            let f = t.f_e_nuc_down;
            if other_above { (f - far, f + near) } else { (f - near, f + far) }
        }
        InversionTarget::Broadband => (t.f_e0 - 1.4, t.f_e0 + 1.4),
    };
    SequenceElement::Pulse(Pulse {
        channel: Channel::Esr,
        frequency: 0.5 * (f_start + f_stop),
        phase: 0.0,
        rabi: INVERSION_RABI,
        duration: INVERSION_DURATION,
        chirp: Some(Chirp { f_start, f_stop }),
        envelope: Envelope::Sine,
        hard: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TomographyBasis {
    #[serde(rename = "zz", alias = "ZZ")]
    ZZ,
    #[serde(rename = "xx", alias = "XX")]
    XX,
    #[serde(rename = "yy", alias = "YY")]
    YY,
}

impl TomographyBasis {
    pub const ALL: [TomographyBasis; 3] = [TomographyBasis::ZZ, TomographyBasis::XX, TomographyBasis::YY];
}

/// Drive phase of the entangling pulses; with it the ideal circuit maps
/// |↓⇓⟩ to (|↓⇓⟩ + |↑⇑⟩)/√2 in the frame co-rotating with the lines.
pub const ENTANGLER_PHASE: f64 = -90.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BellSettings {
    /// ESR Rabi frequency (kHz) of the conditional rotations.
    pub esr_rabi: f64,
    /// NMR Rabi frequency (kHz).
    pub nmr_rabi: f64,
    pub nuclear_init: NuclearSpin,
    pub basis: TomographyBasis,
    /// Projection phases (deg).
    pub phi_n: f64,
    pub phi_e: f64,
    /// Phase corrections (deg) added to the NMR projection pulses at f_n^↓
    /// and f_n^↑, obtained from a calibration run.
    pub nmr_offset_down: f64,
    pub nmr_offset_up: f64,
    pub nuclear_shots: u32,
}

impl BellSettings {
    /// Conditional ESR rotations at Ω = |A|/√63 (≈ 56.5 kHz): the
    /// off-resonant line then completes whole generalised Rabi cycles during
    /// both π and π/2 pulses, as it also does at the faster |A|/√15.
    pub fn for_params(params: &SpinSystemParams) -> Self {
        Self {
            esr_rabi: params.a_hf.abs() / 63f64.sqrt(),
            nmr_rabi: 1.25,
            nuclear_init: NuclearSpin::Down,
            basis: TomographyBasis::ZZ,
            phi_n: 0.0,
            phi_e: 0.0,
            nmr_offset_down: 0.0,
            nmr_offset_up: 0.0,
            nuclear_shots: 20,
        }
    }

    pub fn with_basis(mut self, basis: TomographyBasis) -> Self {
        self.basis = basis;
        self
    }

    pub fn with_init(mut self, init: NuclearSpin) -> Self {
        self.nuclear_init = init;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("esr_rabi", self.esr_rabi), ("nmr_rabi", self.nmr_rabi)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::param(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.nuclear_shots == 0 {
            return Err(Error::param("nuclear_shots must be ≥ 1"));
        }
        Ok(())
    }
}

/// Entangler (conditional NMR π/2 on f_n^↓, conditional ESR π on f_e^⇑)
/// followed by the projection pulses for XX/YY and the final readout.
/// Everything runs with the electron loaded in QD1.
pub fn bell_circuit(params: &SpinSystemParams, s: &BellSettings) -> Result<PulseSequence> {
    s.validate()?;
    let t = transition_frequencies(params);
    let mut seq = PulseSequence::new(
        RotatingFrame::bare(params),
        InitialCondition {
            charge_config: ChargeConfig::Qd1,
            electron: ElectronSpin::Down,
            nucleus: s.nuclear_init,
        },
    );
    // The conditional π pulse leaves |↓⇓⟩ with a phase of π·|A|·t_π relative
    // to the driven line; pre-compensate it on the NMR π/2 phase.
    let stark = 180.0 * (t.f_e_nuc_down - t.f_e_nuc_up) * pi_duration(s.esr_rabi);
    let sense = params.electron_zeeman_mhz().signum();
    seq.pulse(nmr_pulse(t.f_n_el_down, ENTANGLER_PHASE + sense * stark, s.nmr_rabi, 90.0));
    seq.pulse(esr_pulse(t.f_e_nuc_up, ENTANGLER_PHASE, s.esr_rabi, 180.0));
    let quarter = match s.basis {
        TomographyBasis::ZZ => None,
        TomographyBasis::XX => Some(0.0),
        TomographyBasis::YY => Some(90.0),
    };
    if let Some(q) = quarter {
        let phi_e = s.phi_e + q;
        let phi_n = s.phi_n + q;
        seq.pulse(esr_pulse(t.f_e_nuc_down, phi_e, s.esr_rabi, 90.0));
        seq.pulse(esr_pulse(t.f_e_nuc_up, phi_e, s.esr_rabi, 90.0));
        seq.pulse(nmr_pulse(t.f_n_el_down, phi_n + s.nmr_offset_down, s.nmr_rabi, 90.0));
        seq.pulse(nmr_pulse(t.f_n_el_up, phi_n + s.nmr_offset_up, s.nmr_rabi, 90.0));
    }
    seq.push(SequenceElement::MeasureElectron);
    seq.push(SequenceElement::MeasureNuclear { shots: s.nuclear_shots });
    Ok(seq)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShuttleSettings {
    /// NMR Rabi frequency (kHz) of the Ramsey pulses, applied unloaded.
    pub nmr_rabi: f64,
    /// ESR Rabi frequency (kHz) for the electron-shuttle Ramsey.
    pub esr_rabi: f64,
    /// Phase (deg) of the final π/2 pulse.
    pub readout_phase: f64,
    /// Dephasing probability per load/unload cycle (applied at the unload)
    /// or per electron shuttle.
    pub p_err: f64,
    /// Loaded and empty dwell per repeated-load cycle (μs).
    pub cycle_loaded: f64,
    pub cycle_empty: f64,
    /// Gate ramp time recorded on charge events (μs).
    pub ramp_time: f64,
    /// Dwell in QD2 before the second ESR pulse (μs).
    pub qd2_wait: f64,
    pub nuclear_shots: u32,
}

impl Default for ShuttleSettings {
    fn default() -> Self {
        Self {
            nmr_rabi: 2.0,
            esr_rabi: 448.5 / 15f64.sqrt(),
            readout_phase: 0.0,
            p_err: 0.0,
            cycle_loaded: 3.0,
            cycle_empty: 3.0,
            ramp_time: 1.0,
            qd2_wait: 1.0,
            nuclear_shots: 20,
        }
    }
}

impl ShuttleSettings {
    pub fn with_phase(mut self, phase: f64) -> Self {
        self.readout_phase = phase;
        self
    }

    pub fn with_p_err(mut self, p: f64) -> Self {
        self.p_err = p;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.nmr_rabi > 0.0 && self.esr_rabi > 0.0) {
            return Err(Error::param("Rabi frequencies must be > 0"));
        }
        if !(0.0..=1.0).contains(&self.p_err) {
            return Err(Error::param(format!("p_err must lie in [0, 1], got {}", self.p_err)));
        }
        if !(self.cycle_loaded > 0.0 && self.cycle_empty >= 0.0 && self.qd2_wait >= 0.0) {
            return Err(Error::param("cycle dwell times must be positive"));
        }
        Ok(())
    }
}

fn empty_start(params: &SpinSystemParams) -> PulseSequence {
    PulseSequence::new(
        RotatingFrame::bare(params),
        InitialCondition {
            charge_config: ChargeConfig::Empty,
            electron: ElectronSpin::Down,
            nucleus: NuclearSpin::Down,
        },
    )
}

/// Nuclear Ramsey with total precession time τ₀, of which the electron is
/// loaded (spin ↓) for the central `t_load`.
pub fn shuttle_ramsey_sequence(
    params: &SpinSystemParams,
    t_load: f64,
    tau_0: f64,
    s: &ShuttleSettings,
) -> Result<PulseSequence> {
    s.validate()?;
    if !(tau_0 > 0.0) || !(0.0..=tau_0).contains(&t_load) {
        return Err(Error::param(format!(
            "need 0 ≤ t_load ≤ tau_0 with tau_0 > 0, got t_load = {t_load}, tau_0 = {tau_0}"
        )));
    }
    let f_n0 = params.f_n0();
    let mut seq = empty_start(params);
    let side = 0.5 * (tau_0 - t_load);
    seq.pulse(nmr_pulse(f_n0, 0.0, s.nmr_rabi, 90.0));
    seq.wait(side);
    if t_load > 0.0 {
        seq.charge(ChargeEvent::new(ChargeEventKind::LoadDown).with_ramp(s.ramp_time));
        seq.wait(t_load);
        seq.charge(
            ChargeEvent::new(ChargeEventKind::Unload)
                .with_ramp(s.ramp_time)
                .with_p_err(s.p_err),
        );
    }
    seq.wait(side);
    seq.pulse(nmr_pulse(f_n0, s.readout_phase, s.nmr_rabi, 90.0));
    seq.push(SequenceElement::MeasureNuclear { shots: s.nuclear_shots });
    Ok(seq)
}

/// Nuclear Ramsey with τ₀ fixed and `k_cycles` load/unload cycles centred in
/// the free-precession window.
pub fn repeated_load_sequence(
    params: &SpinSystemParams,
    k_cycles: usize,
    tau_0: f64,
    s: &ShuttleSettings,
) -> Result<PulseSequence> {
    s.validate()?;
    let cycle = s.cycle_loaded + s.cycle_empty;
    let busy = k_cycles as f64 * cycle;
    if !(tau_0 > 0.0) || busy > tau_0 {
        return Err(Error::param(format!(
            "{k_cycles} cycles of {cycle} μs do not fit in tau_0 = {tau_0} μs"
        )));
    }
    let f_n0 = params.f_n0();
    let mut seq = empty_start(params);
    let side = 0.5 * (tau_0 - busy);
    seq.pulse(nmr_pulse(f_n0, 0.0, s.nmr_rabi, 90.0));
    seq.wait(side);
    for _ in 0..k_cycles {
        seq.charge(ChargeEvent::new(ChargeEventKind::LoadDown).with_ramp(s.ramp_time));
        seq.wait(s.cycle_loaded);
        seq.charge(
            ChargeEvent::new(ChargeEventKind::Unload)
                .with_ramp(s.ramp_time)
                .with_p_err(s.p_err),
        );
        seq.wait(s.cycle_empty);
    }
    seq.wait(side);
    seq.pulse(nmr_pulse(f_n0, s.readout_phase, s.nmr_rabi, 90.0));
    seq.push(SequenceElement::MeasureNuclear { shots: s.nuclear_shots });
    Ok(seq)
}

/// Electron Ramsey across a shuttle: first π/2 on f_e^⇓ in QD1, shuttle to
/// QD2 with ramp `t_ramp`, second π/2 at the QD2 Larmor frequency.
pub fn electron_shuttle_ramsey(
    params: &SpinSystemParams,
    t_ramp: f64,
    s: &ShuttleSettings,
) -> Result<PulseSequence> {
    s.validate()?;
    if !(t_ramp >= 0.0) {
        return Err(Error::param(format!("t_ramp must be ≥ 0, got {t_ramp}")));
    }
    let t = transition_frequencies(params);
    let mut seq = PulseSequence::new(RotatingFrame::bare(params), InitialCondition::default());
    seq.pulse(esr_pulse(t.f_e_nuc_down, 0.0, s.esr_rabi, 90.0));
    seq.charge(
        ChargeEvent::new(ChargeEventKind::Shuttle1To2)
            .with_ramp(t_ramp)
            .with_p_err(s.p_err),
    );
    seq.wait(s.qd2_wait);
    let f_qd2 = t.f_e0 + params.qd2_offset * 1e-3;
    seq.pulse(esr_pulse(f_qd2, s.readout_phase, s.esr_rabi, 90.0));
    seq.push(SequenceElement::MeasureElectron);
    Ok(seq)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shuttle_rejects_long_load() {
        let p = SpinSystemParams::default();
        assert!(shuttle_ramsey_sequence(&p, 600.0, 500.0, &ShuttleSettings::default()).is_err());
    }

    #[test]
    fn builders_are_deterministic_and_valid() {
        let p = SpinSystemParams::default();
        let s = ShuttleSettings::default().with_p_err(0.0045);
        for t_load in [0.0, 10.0, 500.0] {
            let a = shuttle_ramsey_sequence(&p, t_load, 500.0, &s).unwrap();
            assert_eq!(a, shuttle_ramsey_sequence(&p, t_load, 500.0, &s).unwrap());
            a.validate().unwrap();
        }
        for k in [0, 1, 100] {
            let a = repeated_load_sequence(&p, k, 1250.0, &s).unwrap();
            assert_eq!(a, repeated_load_sequence(&p, k, 1250.0, &s).unwrap());
            a.validate().unwrap();
            let pulses = 2.0 * pi_half_duration(s.nmr_rabi);
            assert!((a.total_duration() - (1250.0 + pulses)).abs() < 1e-9);
        }
        let e = electron_shuttle_ramsey(&p, 1.0, &s).unwrap();
        e.validate().unwrap();
        for basis in TomographyBasis::ALL {
            let b = bell_circuit(&p, &BellSettings::for_params(&p).with_basis(basis)).unwrap();
            b.validate().unwrap();
            assert_eq!(b, bell_circuit(&p, &BellSettings::for_params(&p).with_basis(basis)).unwrap());
        }
    }

    #[test]
    fn too_many_cycles_rejected() {
        let p = SpinSystemParams::default();
        assert!(repeated_load_sequence(&p, 300, 1250.0, &ShuttleSettings::default()).is_err());
    }

    #[test]
    fn inversion_spans() {
        let p = SpinSystemParams::default();
        let t = transition_frequencies(&p);
        let SequenceElement::Pulse(up) = adiabatic_inversion(&p, InversionTarget::NuclearUp) else {
            panic!()
        };
        let c = up.chirp.unwrap();
        assert!((c.f_start - (t.f_e_nuc_up - 0.3)).abs() < 1e-9);
        assert!((c.f_stop - (t.f_e_nuc_up + 0.05)).abs() < 1e-9);
        let SequenceElement::Pulse(bb) = adiabatic_inversion(&p, InversionTarget::Broadband) else {
            panic!()
        };
        let c = bb.chirp.unwrap();
        assert!((c.f_stop - c.f_start - 2.8).abs() < 1e-9);
        assert_eq!(bb.duration, 650.0);
        assert_eq!(bb.rabi, 100.0);
    }
}
