use serde::{Deserialize, Serialize};

use super::{average_over_noise, ExperimentResult};
use crate::pulse::{nmr_pulse, InitialCondition, Pulse, PulseSequence, SequenceElement};
use crate::sim::execute;
use crate::spin::{
    transition_frequencies, ChargeConfig, Channel, ElectronSpin, NoiseDraw, NoiseModel,
    NuclearSpin, RotatingFrame, SpinSystemParams,
};
use crate::{Error, Result};

/// Shared settings of the single-nucleus NMR protocols.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NmrSettings {
    /// NMR Rabi frequency (kHz).
    pub rabi: f64,
    pub charge_config: ChargeConfig,
    /// Electron spin while loaded.
    pub electron: ElectronSpin,
    /// Use instantaneous pulses.
    #[serde(default)]
    pub hard_pulses: bool,
}

impl Default for NmrSettings {
    fn default() -> Self {
        Self {
            rabi: 1.0,
            charge_config: ChargeConfig::Empty,
            electron: ElectronSpin::Down,
            hard_pulses: false,
        }
    }
}

impl NmrSettings {
    /// NMR line for the configured charge state and electron spin.
    pub fn line(&self, params: &SpinSystemParams) -> f64 {
        let t = transition_frequencies(params);
        match self.charge_config {
            ChargeConfig::Qd1 => t.nmr_line(self.electron == ElectronSpin::Up),
            _ => t.f_n0,
        }
    }

    fn start(&self, params: &SpinSystemParams) -> PulseSequence {
        PulseSequence::new(
            RotatingFrame::bare(params),
            InitialCondition {
                charge_config: self.charge_config,
                electron: self.electron,
                nucleus: NuclearSpin::Down,
            },
        )
    }

    fn pulse(&self, frequency: f64, phase: f64, angle: f64) -> Pulse {
        let p = nmr_pulse(frequency, phase, self.rabi, angle);
        if self.hard_pulses {
            p.hard()
        } else {
            p
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.rabi > 0.0) {
            return Err(Error::param(format!("rabi must be > 0, got {}", self.rabi)));
        }
        Ok(())
    }
}

fn p_up(seq: &PulseSequence, params: &SpinSystemParams, noise: &NoiseDraw) -> Result<f64> {
    Ok(execute(seq, params, noise)?.state.prob_nuclear_up())
}

fn non_empty(name: &str, v: &[f64]) -> Result<()> {
    if v.is_empty() {
        return Err(Error::param(format!("{name} must be non-empty")));
    }
    Ok(())
}

/// Nuclear flip probability from |⇓⟩ over a (frequency, duration) grid.
pub fn run_nmr_chevron(
    frequencies: &[f64],
    durations: &[f64],
    params: &SpinSystemParams,
    noise: &NoiseModel,
    trials: usize,
    settings: &NmrSettings,
) -> Result<ExperimentResult> {
    non_empty("frequency range", frequencies)?;
    non_empty("duration range", durations)?;
    settings.validate()?;
    let mut seqs = Vec::with_capacity(frequencies.len() * durations.len());
    for &f in frequencies {
        for &d in durations {
            let mut s = settings.start(params);
            let mut p = Pulse::new(Channel::Nmr, f, 0.0, settings.rabi, d);
            p.hard = settings.hard_pulses;
            s.pulse(p);
            s.push(SequenceElement::MeasureNuclear { shots: 1 });
            s.validate()?;
            seqs.push(((f, d), s));
        }
    }
    let probs = average_over_noise(noise, trials, |draw| {
        seqs.iter().map(|(_, s)| p_up(s, params, draw)).collect()
    })?;
    let mut r = ExperimentResult::new("nmr_chevron", &["frequency_mhz", "duration_us"], &["nuclear_up"], trials, noise.seed);
    for (((f, d), _), p) in seqs.iter().zip(probs) {
        r.push(vec![*f, *d], vec![p]);
    }
    Ok(r)
}

/// Rabi oscillation at a fixed frequency (default: the resonant line).
pub fn run_rabi(
    durations: &[f64],
    frequency: Option<f64>,
    params: &SpinSystemParams,
    noise: &NoiseModel,
    trials: usize,
    settings: &NmrSettings,
) -> Result<ExperimentResult> {
    let f = frequency.unwrap_or_else(|| settings.line(params));
    let mut r = run_nmr_chevron(&[f], durations, params, noise, trials, settings)?;
    r.experiment = "nmr_rabi".into();
    Ok(r)
}

/// π/2 – τ – π/2 with the drive detuned from the line by `detuning` kHz.
pub fn run_ramsey(
    taus: &[f64],
    detuning: f64,
    params: &SpinSystemParams,
    noise: &NoiseModel,
    trials: usize,
    settings: &NmrSettings,
) -> Result<ExperimentResult> {
    non_empty("tau range", taus)?;
    settings.validate()?;
    let f = settings.line(params) + detuning * 1e-3;
    let mut seqs = Vec::new();
    for &tau in taus {
        if !(tau >= 0.0) {
            return Err(Error::param(format!("tau must be ≥ 0, got {tau}")));
        }
        let mut s = settings.start(params);
        s.pulse(settings.pulse(f, 0.0, 90.0));
        s.wait(tau);
        s.pulse(settings.pulse(f, 0.0, 90.0));
        s.push(SequenceElement::MeasureNuclear { shots: 1 });
        seqs.push(s);
    }
    let probs = average_over_noise(noise, trials, |draw| {
        seqs.iter().map(|s| p_up(s, params, draw)).collect()
    })?;
    let mut r = ExperimentResult::new("nmr_ramsey", &["tau_us"], &["nuclear_up"], trials, noise.seed);
    for (tau, p) in taus.iter().zip(probs) {
        r.push(vec![*tau], vec![p]);
    }
    Ok(r)
}

/// π/2 – τ – π – τ – π/2 on resonance; the last pulse has phase 180° so a
/// perfect echo ends in |⇑⟩ (echo amplitude 2·p_up − 1).
pub fn run_hahn(
    taus: &[f64],
    params: &SpinSystemParams,
    noise: &NoiseModel,
    trials: usize,
    settings: &NmrSettings,
) -> Result<ExperimentResult> {
    non_empty("tau range", taus)?;
    settings.validate()?;
    let f = settings.line(params);
    let mut seqs = Vec::new();
    for &tau in taus {
        if !(tau >= 0.0) {
            return Err(Error::param(format!("tau must be ≥ 0, got {tau}")));
        }
        let mut s = settings.start(params);
        s.pulse(settings.pulse(f, 0.0, 90.0));
        s.wait(tau);
        s.pulse(settings.pulse(f, 0.0, 180.0));
        s.wait(tau);
        s.pulse(settings.pulse(f, 180.0, 90.0));
        s.push(SequenceElement::MeasureNuclear { shots: 1 });
        seqs.push(s);
    }
    let probs = average_over_noise(noise, trials, |draw| {
        seqs.iter().map(|s| p_up(s, params, draw)).collect()
    })?;
    let mut r = ExperimentResult::new("nmr_hahn", &["tau_us"], &["nuclear_up"], trials, noise.seed);
    for (tau, p) in taus.iter().zip(probs) {
        r.push(vec![*tau], vec![p]);
    }
    Ok(r)
}
