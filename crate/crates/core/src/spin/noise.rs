use std::f64::consts::{PI, SQRT_2};

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Gaussian offset width (kHz) producing a Gaussian decay with time
/// constant `t2` (μs): σ = 1/(√2·π·T₂). Infinite T₂ gives zero width.
pub fn dephasing_sigma_khz(t2: f64) -> f64 {
    if t2.is_infinite() {
        return 0.0;
    }
    1e3 / (SQRT_2 * PI * t2)
}

/// Shape of the per-trial multiplicative pulse-duration error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DurationErrorShape {
    /// Factor drawn uniformly from [1 − ε, 1 + ε].
    #[default]
    Uniform,
    /// Factor 1 + N(0, ε²).
    Gaussian,
}

/// Quasi-static noise parameters. Widths in kHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    #[serde(default)]
    pub sigma_ix: f64,
    #[serde(default)]
    pub sigma_iz: f64,
    #[serde(default)]
    pub sigma_sz: f64,
    #[serde(default)]
    pub spectator_flip_prob: f64,
    /// Relative pulse-length calibration error ε (0.05 for 5%).
    #[serde(default)]
    pub pulse_length_error: f64,
    #[serde(default)]
    pub pulse_length_shape: DurationErrorShape,
    #[serde(default)]
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self::noiseless()
    }
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        Self {
            sigma_ix: 0.0,
            sigma_iz: 0.0,
            sigma_sz: 0.0,
            spectator_flip_prob: 0.0,
            pulse_length_error: 0.0,
            pulse_length_shape: DurationErrorShape::Uniform,
            seed: 0,
        }
    }

    /// Widths from coherence times, all in μs: NMR Rabi decay, nuclear T₂*,
    /// electron T₂*.
    pub fn from_coherence_times(t2_rabi_n: f64, t2_star_n: f64, t2_star_e: f64) -> Self {
        Self {
            sigma_ix: dephasing_sigma_khz(t2_rabi_n),
            sigma_iz: dephasing_sigma_khz(t2_star_n),
            sigma_sz: dephasing_sigma_khz(t2_star_e),
            ..Self::noiseless()
        }
    }

    /// Noise used for the entanglement error analysis: T₂^Rabi,n = 1.1 ms,
    /// T₂*,n = 2.9 ms, T₂*,e = 15 μs, 7% spectator flips, 5% pulse lengths.
    pub fn entanglement_defaults() -> Self {
        Self {
            spectator_flip_prob: 0.07,
            pulse_length_error: 0.05,
            pulse_length_shape: DurationErrorShape::Gaussian,
            ..Self::from_coherence_times(1100.0, 2900.0, 15.0)
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("sigma_ix", self.sigma_ix),
            ("sigma_iz", self.sigma_iz),
            ("sigma_sz", self.sigma_sz),
            ("pulse_length_error", self.pulse_length_error),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::param(format!("{name} must be finite and ≥ 0, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.spectator_flip_prob) {
            return Err(Error::param(format!(
                "spectator_flip_prob must lie in [0, 1], got {}",
                self.spectator_flip_prob
            )));
        }
        if self.pulse_length_error >= 1.0 {
            return Err(Error::param("pulse_length_error must be < 1"));
        }
        Ok(())
    }
}

/// One frozen noise realisation, held fixed for a whole sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseDraw {
    /// NMR drive amplitude offset (kHz).
    pub delta_ix: f64,
    /// Nuclear detuning (kHz).
    pub delta_iz: f64,
    /// Electron detuning (kHz).
    pub delta_sz: f64,
    pub spectator_detuned: bool,
    /// Sign of the spectator shift, ±1.
    pub spectator_sign: f64,
    /// Duration multipliers for ESR and NMR pulses.
    pub esr_duration_factor: f64,
    pub nmr_duration_factor: f64,
}

impl NoiseDraw {
    pub fn zero() -> Self {
        Self {
            delta_ix: 0.0,
            delta_iz: 0.0,
            delta_sz: 0.0,
            spectator_detuned: false,
            spectator_sign: 1.0,
            esr_duration_factor: 1.0,
            nmr_duration_factor: 1.0,
        }
    }

    pub fn duration_factor(&self, channel: super::Channel) -> f64 {
        match channel {
            super::Channel::Esr => self.esr_duration_factor,
            super::Channel::Nmr => self.nmr_duration_factor,
        }
    }
}

impl Default for NoiseDraw {
    fn default() -> Self {
        Self::zero()
    }
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    sigma * z
}

fn duration_factor<R: Rng + ?Sized>(rng: &mut R, model: &NoiseModel) -> f64 {
    let eps = model.pulse_length_error;
    match model.pulse_length_shape {
        DurationErrorShape::Uniform => 1.0 + eps * rng.random_range(-1.0..=1.0),
        DurationErrorShape::Gaussian => {
            let f = 1.0 + Normal::new(0.0, eps).map(|n| n.sample(rng)).unwrap_or(0.0);
            f.max(0.0)
        }
    }
}

/// Draws every channel in a fixed order so a given rng stream always maps to
/// the same draw regardless of which widths are zero.
pub fn sample_noise<R: Rng + ?Sized>(model: &NoiseModel, rng: &mut R) -> NoiseDraw {
    let delta_ix = gaussian(rng, model.sigma_ix);
    let delta_iz = gaussian(rng, model.sigma_iz);
    let delta_sz = gaussian(rng, model.sigma_sz);
    let u: f64 = rng.random();
    let spectator_detuned = u < model.spectator_flip_prob;
    let spectator_sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
    let esr_duration_factor = duration_factor(rng, model);
    let nmr_duration_factor = duration_factor(rng, model);
    NoiseDraw {
        delta_ix,
        delta_iz,
        delta_sz,
        spectator_detuned,
        spectator_sign,
        esr_duration_factor,
        nmr_duration_factor,
    }
}
