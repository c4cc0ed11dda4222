//! Control timelines: pulses, free evolution, charge events and trailing
//! measurement markers.
//!
//! Durations are in μs, frequencies in MHz, Rabi frequencies in kHz and
//! phases in degrees (rotating-frame drive phase).

mod builders;

pub use builders::{
    adiabatic_inversion, bell_circuit, electron_shuttle_ramsey, nmr_pulse, pi_duration,
    pi_half_duration, repeated_load_sequence, shuttle_ramsey_sequence, BellSettings,
    InversionTarget, ShuttleSettings, TomographyBasis,
};

use serde::{Deserialize, Serialize};

use crate::spin::{ChargeConfig, Channel, ElectronSpin, NuclearSpin, RotatingFrame, Subsystem};
use crate::{Error, Result};

/// Linear frequency sweep (MHz).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Chirp {
    pub f_start: f64,
    pub f_stop: f64,
}

/// Amplitude envelope of a pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Envelope {
    #[default]
    Square,
    /// Ω(t) = Ω·sin(πt/T).
    Sine,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pulse {
    pub channel: Channel,
    pub frequency: f64,
    #[serde(default)]
    pub phase: f64,
    pub rabi: f64,
    pub duration: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chirp: Option<Chirp>,
    #[serde(default, skip_serializing_if = "is_default")]
    pub envelope: Envelope,
    /// Instantaneous unconditional rotation of the addressed spin by the
    /// angle 2π·rabi·duration. Occupies no time on the sequence clock.
    #[serde(default, skip_serializing_if = "is_false")]
    pub hard: bool,
}

fn is_false(b: &bool) -> bool {
    !*b
}

fn is_default<T: Default + PartialEq>(v: &T) -> bool {
    *v == T::default()
}

impl Pulse {
    pub fn new(channel: Channel, frequency: f64, phase: f64, rabi: f64, duration: f64) -> Self {
        Self {
            channel,
            frequency,
            phase,
            rabi,
            duration,
            chirp: None,
            envelope: Envelope::Square,
            hard: false,
        }
    }

    pub fn hard(mut self) -> Self {
        self.hard = true;
        self
    }

    /// Instantaneous drive frequency at time `t` into the pulse.
    pub fn frequency_at(&self, t: f64) -> f64 {
        match self.chirp {
            None => self.frequency,
            Some(c) => c.f_start + (c.f_stop - c.f_start) * (t / self.duration),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChargeEventKind {
    LoadDown,
    LoadUp,
    Unload,
    #[serde(rename = "shuttle_1_to_2")]
    Shuttle1To2,
    #[serde(rename = "shuttle_2_to_1")]
    Shuttle2To1,
}

impl ChargeEventKind {
    /// Subsystem dephased by a faulty event unless overridden: loading and
    /// unloading act on the nucleus, shuttles on the electron.
    pub fn default_dephased(self) -> Subsystem {
        match self {
            ChargeEventKind::LoadDown | ChargeEventKind::LoadUp | ChargeEventKind::Unload => {
                Subsystem::Nuclear
            }
            ChargeEventKind::Shuttle1To2 | ChargeEventKind::Shuttle2To1 => Subsystem::Electron,
        }
    }

    /// Configuration after the event, or an error if it is not allowed from
    /// `from`.
    pub fn apply(self, from: ChargeConfig) -> Result<ChargeConfig> {
        use ChargeConfig::*;
        use ChargeEventKind::*;
        match (self, from) {
            (LoadDown | LoadUp, Empty) => Ok(Qd1),
            (LoadDown | LoadUp, _) => Err(Error::InvalidSequence(format!(
                "{self:?} into an already loaded configuration ({from:?})"
            ))),
            (Unload, Qd1 | Qd2) => Ok(Empty),
            (Shuttle1To2, Qd1) => Ok(Qd2),
            (Shuttle2To1, Qd2) => Ok(Qd1),
            _ => Err(Error::InvalidSequence(format!("{self:?} not possible from {from:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChargeEvent {
    pub kind: ChargeEventKind,
    /// Gate ramp time (μs). Carried for bookkeeping; events are applied as
    /// instantaneous frame changes.
    #[serde(default)]
    pub ramp_time: f64,
    /// Dephasing probability applied at the event.
    #[serde(default)]
    pub p_err: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dephased: Option<Subsystem>,
}

impl ChargeEvent {
    pub fn new(kind: ChargeEventKind) -> Self {
        Self {
            kind,
            ramp_time: 0.0,
            p_err: 0.0,
            dephased: None,
        }
    }

    pub fn with_p_err(mut self, p: f64) -> Self {
        self.p_err = p;
        self
    }

    pub fn with_ramp(mut self, ramp: f64) -> Self {
        self.ramp_time = ramp;
        self
    }

    pub fn dephased_subsystem(&self) -> Subsystem {
        self.dephased.unwrap_or(self.kind.default_dephased())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SequenceElement {
    Pulse(Pulse),
    FreeEvolution {
        duration: f64,
        charge_config: ChargeConfig,
    },
    ChargeEvent(ChargeEvent),
    MeasureElectron,
    MeasureNuclear {
        shots: u32,
    },
}

impl SequenceElement {
    /// Time the element occupies on the sequence clock (μs).
    pub fn duration(&self) -> f64 {
        match self {
            SequenceElement::Pulse(p) if !p.hard => p.duration,
            SequenceElement::FreeEvolution { duration, .. } => *duration,
            _ => 0.0,
        }
    }

    fn is_measurement(&self) -> bool {
        matches!(
            self,
            SequenceElement::MeasureElectron | SequenceElement::MeasureNuclear { .. }
        )
    }
}

/// Charge and spin configuration at the start of a sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialCondition {
    pub charge_config: ChargeConfig,
    pub electron: ElectronSpin,
    pub nucleus: NuclearSpin,
}

impl Default for InitialCondition {
    fn default() -> Self {
        Self {
            charge_config: ChargeConfig::Qd1,
            electron: ElectronSpin::Down,
            nucleus: NuclearSpin::Down,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSequence {
    pub reference_frequencies: RotatingFrame,
    #[serde(default)]
    pub initial: InitialCondition,
    #[serde(default)]
    pub elements: Vec<SequenceElement>,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidSequence(format!("{name} must be finite and > 0, got {v}")))
    }
}

impl PulseSequence {
    pub fn new(reference_frequencies: RotatingFrame, initial: InitialCondition) -> Self {
        Self {
            reference_frequencies,
            initial,
            elements: Vec::new(),
        }
    }

    pub fn push(&mut self, e: SequenceElement) -> &mut Self {
        self.elements.push(e);
        self
    }

    pub fn pulse(&mut self, p: Pulse) -> &mut Self {
        self.push(SequenceElement::Pulse(p))
    }

    pub fn charge(&mut self, e: ChargeEvent) -> &mut Self {
        self.push(SequenceElement::ChargeEvent(e))
    }

    /// Free evolution in the configuration reached so far. Zero durations
    /// are skipped.
    pub fn wait(&mut self, duration: f64) -> &mut Self {
        if duration > 0.0 {
            let charge_config = self.final_config().unwrap_or(self.initial.charge_config);
            self.push(SequenceElement::FreeEvolution {
                duration,
                charge_config,
            });
        }
        self
    }

    /// Sum of element durations (μs).
    pub fn total_duration(&self) -> f64 {
        self.elements.iter().map(SequenceElement::duration).sum()
    }

    /// Charge configuration after all charge events, without validation of
    /// the rest of the timeline.
    pub fn final_config(&self) -> Result<ChargeConfig> {
        let mut c = self.initial.charge_config;
        for e in &self.elements {
            if let SequenceElement::ChargeEvent(ev) = e {
                c = ev.kind.apply(c)?;
            }
        }
        Ok(c)
    }

    /// Checks durations, drive parameters, charge-configuration consistency
    /// and that measurements only trail the timeline.
    pub fn validate(&self) -> Result<()> {
        positive("reference f_e", self.reference_frequencies.f_ref_e)?;
        positive("reference f_n", self.reference_frequencies.f_ref_n)?;
        let mut config = self.initial.charge_config;
        let mut measured = false;
        for (i, e) in self.elements.iter().enumerate() {
            let at = |msg: String| Error::InvalidSequence(format!("element {i}: {msg}"));
            if measured && !e.is_measurement() {
                return Err(at("only measurements may follow a measurement".into()));
            }
            match e {
                SequenceElement::Pulse(p) => {
                    positive("pulse duration", p.duration).map_err(|e| at(e.to_string()))?;
                    positive("pulse frequency", p.frequency).map_err(|e| at(e.to_string()))?;
                    if !(p.rabi >= 0.0) || !p.rabi.is_finite() || !p.phase.is_finite() {
                        return Err(at(format!("invalid rabi {} / phase {}", p.rabi, p.phase)));
                    }
                    if let Some(c) = p.chirp {
                        positive("chirp f_start", c.f_start).map_err(|e| at(e.to_string()))?;
                        positive("chirp f_stop", c.f_stop).map_err(|e| at(e.to_string()))?;
                        if p.hard {
                            return Err(at("hard pulses cannot be chirped".into()));
                        }
                    }
                    if p.channel == Channel::Esr && !config.has_electron() {
                        return Err(at("ESR pulse with no electron loaded".into()));
                    }
                }
                SequenceElement::FreeEvolution {
                    duration,
                    charge_config,
                } => {
                    positive("free evolution duration", *duration).map_err(|e| at(e.to_string()))?;
                    if *charge_config != config {
                        return Err(at(format!(
                            "free evolution declared in {charge_config:?} but configuration is {config:?}"
                        )));
                    }
                }
                SequenceElement::ChargeEvent(ev) => {
                    if !(ev.ramp_time >= 0.0) || !ev.ramp_time.is_finite() {
                        return Err(at(format!("ramp time must be ≥ 0, got {}", ev.ramp_time)));
                    }
                    if !(0.0..=1.0).contains(&ev.p_err) {
                        return Err(at(format!("p_err must lie in [0, 1], got {}", ev.p_err)));
                    }
                    config = ev.kind.apply(config).map_err(|e| at(e.to_string()))?;
                }
                SequenceElement::MeasureElectron => {
                    if !config.has_electron() {
                        return Err(at("electron measurement with no electron loaded".into()));
                    }
                    measured = true;
                }
                SequenceElement::MeasureNuclear { shots } => {
                    if *shots == 0 {
                        return Err(at("nuclear readout needs at least one shot".into()));
                    }
                    measured = true;
                }
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        let seq: Self = toml::from_str(s)?;
        seq.validate()?;
        Ok(seq)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::SpinSystemParams;

    fn frame() -> RotatingFrame {
        RotatingFrame::bare(&SpinSystemParams::default())
    }

    fn empty_start() -> InitialCondition {
        InitialCondition {
            charge_config: ChargeConfig::Empty,
            ..InitialCondition::default()
        }
    }

    #[test]
    fn esr_requires_electron() {
        let f = frame();
        let mut s = PulseSequence::new(f, empty_start());
        s.pulse(Pulse::new(Channel::Esr, f.f_ref_e, 0.0, 100.0, 5.0));
        assert!(matches!(s.validate(), Err(Error::InvalidSequence(_))));

        let mut s = PulseSequence::new(f, empty_start());
        s.pulse(Pulse::new(Channel::Nmr, f.f_ref_n, 0.0, 1.0, 5.0));
        s.charge(ChargeEvent::new(ChargeEventKind::LoadDown));
        s.pulse(Pulse::new(Channel::Esr, f.f_ref_e, 0.0, 100.0, 5.0));
        s.charge(ChargeEvent::new(ChargeEventKind::Shuttle1To2));
        s.pulse(Pulse::new(Channel::Esr, f.f_ref_e, 0.0, 100.0, 5.0));
        s.charge(ChargeEvent::new(ChargeEventKind::Unload));
        s.pulse(Pulse::new(Channel::Esr, f.f_ref_e, 0.0, 100.0, 5.0));
        assert!(s.validate().is_err());
        s.elements.pop();
        s.validate().unwrap();
    }

    #[test]
    fn double_load_rejected() {
        let mut s = PulseSequence::new(frame(), InitialCondition::default());
        s.charge(ChargeEvent::new(ChargeEventKind::LoadUp));
        assert!(s.validate().is_err());
    }

    #[test]
    fn measurement_must_trail() {
        let f = frame();
        let mut s = PulseSequence::new(f, InitialCondition::default());
        s.push(SequenceElement::MeasureElectron);
        s.push(SequenceElement::MeasureNuclear { shots: 20 });
        s.validate().unwrap();
        s.wait(1.0);
        assert!(s.validate().is_err());
    }

    #[test]
    fn free_evolution_config_checked() {
        let mut s = PulseSequence::new(frame(), InitialCondition::default());
        s.push(SequenceElement::FreeEvolution {
            duration: 1.0,
            charge_config: ChargeConfig::Empty,
        });
        assert!(s.validate().is_err());
    }

    #[test]
    fn nonpositive_durations_rejected() {
        let f = frame();
        for d in [0.0, -1.0, f64::NAN] {
            let mut s = PulseSequence::new(f, InitialCondition::default());
            s.pulse(Pulse::new(Channel::Nmr, f.f_ref_n, 0.0, 1.0, d));
            assert!(s.validate().is_err());
        }
    }

    #[test]
    fn total_duration_is_sum() {
        let f = frame();
        let mut s = PulseSequence::new(f, empty_start());
        s.pulse(Pulse::new(Channel::Nmr, f.f_ref_n, 0.0, 1.0, 250.0));
        s.wait(100.5);
        s.charge(ChargeEvent::new(ChargeEventKind::LoadDown).with_ramp(1.0));
        s.wait(20.25);
        s.pulse(Pulse::new(Channel::Nmr, f.f_ref_n, 0.0, 1.0, 250.0).hard());
        assert_eq!(s.total_duration(), 250.0 + 100.5 + 20.25);
    }

    #[test]
    fn toml_round_trip() {
        let f = frame();
        let mut s = PulseSequence::new(f, empty_start());
        let mut p = Pulse::new(Channel::Nmr, f.f_ref_n, 90.0, 1.0, 250.0);
        p.chirp = Some(Chirp { f_start: 11.9, f_stop: 11.92 });
        p.envelope = Envelope::Sine;
        s.pulse(p);
        s.charge(ChargeEvent::new(ChargeEventKind::LoadDown).with_p_err(0.0045));
        s.wait(3.0);
        s.push(SequenceElement::MeasureNuclear { shots: 26 });
        let text = s.to_toml().unwrap();
        assert_eq!(PulseSequence::from_toml(&text).unwrap(), s);
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = "[reference_frequencies]\nf_ref_e = 1.0\nf_ref_n = 1.0\nbogus = 3\n";
        assert!(PulseSequence::from_toml(text).is_err());
    }
}
