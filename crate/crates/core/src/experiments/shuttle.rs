use serde::{Deserialize, Serialize};

use super::{average_over_noise, ExperimentResult};
use crate::pulse::{
    electron_shuttle_ramsey, repeated_load_sequence, shuttle_ramsey_sequence, PulseSequence,
    ShuttleSettings,
};
use crate::sim::execute;
use crate::spin::{NoiseModel, SpinSystemParams};
use crate::{Error, Result};

/// Final-pulse phases (deg) giving p_X, p_−X, p_Y, p_−Y.
pub const READOUT_PHASES: [f64; 4] = [0.0, 180.0, 90.0, 270.0];

/// C = √((p_X − p_−X)² + (p_Y − p_−Y)²).
pub fn coherence_from_phases(p_x: f64, p_mx: f64, p_y: f64, p_my: f64) -> f64 {
    (p_x - p_mx).hypot(p_y - p_my)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShuttleVariant {
    /// Nuclear phase versus loaded time at fixed τ₀.
    Phase,
    /// Nuclear coherence versus number of load/unload cycles at fixed τ₀.
    Repeated,
    /// Electron Ramsey fringe across a QD1 → QD2 shuttle versus readout
    /// phase.
    Electron,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShuttleSweep {
    /// t_load (μs), cycle counts, or readout phases (deg) depending on the
    /// variant.
    pub values: Vec<f64>,
    /// Fixed precession time τ₀ (μs); unused by the electron variant.
    #[serde(default)]
    pub tau_0: f64,
    /// Ramp time of the electron shuttle (μs).
    #[serde(default)]
    pub t_ramp: f64,
    pub settings: ShuttleSettings,
}

fn four_phase(
    build: impl Fn(f64) -> Result<Vec<PulseSequence>>,
    values: &[f64],
) -> Result<Vec<PulseSequence>> {
    let mut seqs = Vec::with_capacity(4 * values.len());
    for &v in values {
        seqs.extend(build(v)?);
    }
    Ok(seqs)
}

pub fn run_shuttle_experiments(
    variant: ShuttleVariant,
    sweep: &ShuttleSweep,
    params: &SpinSystemParams,
    noise: &NoiseModel,
    trials: usize,
) -> Result<ExperimentResult> {
    if sweep.values.is_empty() {
        return Err(Error::param("sweep values must be non-empty"));
    }
    let s = sweep.settings;
    match variant {
        ShuttleVariant::Phase | ShuttleVariant::Repeated => {
            let seqs = four_phase(
                |v| {
                    READOUT_PHASES
                        .iter()
                        .map(|&ph| {
                            let st = s.with_phase(ph);
                            match variant {
                                ShuttleVariant::Phase => shuttle_ramsey_sequence(params, v, sweep.tau_0, &st),
                                _ => {
                                    if v < 0.0 || v.fract() != 0.0 {
                                        return Err(Error::param(format!("cycle count must be a non-negative integer, got {v}")));
                                    }
                                    repeated_load_sequence(params, v as usize, sweep.tau_0, &st)
                                }
                            }
                        })
                        .collect()
                },
                &sweep.values,
            )?;
            let probs = average_over_noise(noise, trials, |draw| {
                seqs.iter()
                    .map(|q| Ok(execute(q, params, draw)?.state.prob_nuclear_up()))
                    .collect()
            })?;
            let (name, axis) = match variant {
                ShuttleVariant::Phase => ("shuttle_phase", "t_load_us"),
                _ => ("shuttle_repeated", "k_cycles"),
            };
            let mut r = ExperimentResult::new(name, &[axis], &["p_x", "p_mx", "p_y", "p_my", "coherence"], trials, noise.seed);
            for (v, p) in sweep.values.iter().zip(probs.chunks(4)) {
                let c = coherence_from_phases(p[0], p[1], p[2], p[3]);
                r.push(vec![*v], vec![p[0], p[1], p[2], p[3], c]);
            }
            Ok(r)
        }
        ShuttleVariant::Electron => {
            let seqs = sweep
                .values
                .iter()
                .map(|&ph| electron_shuttle_ramsey(params, sweep.t_ramp, &s.with_phase(ph)))
                .collect::<Result<Vec<_>>>()?;
            let probs = average_over_noise(noise, trials, |draw| {
                seqs.iter()
                    .map(|q| Ok(execute(q, params, draw)?.state.prob_electron_up()))
                    .collect()
            })?;
            let mut r = ExperimentResult::new("electron_shuttle", &["phase_deg"], &["electron_up"], trials, noise.seed);
            for (v, p) in sweep.values.iter().zip(probs) {
                r.push(vec![*v], vec![p]);
            }
            Ok(r)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coherence_definition() {
        assert_eq!(coherence_from_phases(1.0, 0.0, 0.5, 0.5), 1.0);
        assert_eq!(coherence_from_phases(0.5, 0.5, 0.5, 0.5), 0.0);
    }

    #[test]
    fn zero_cycles_equals_bare_ramsey() {
        let p = SpinSystemParams::default();
        let sweep = ShuttleSweep {
            values: vec![0.0],
            tau_0: 1250.0,
            t_ramp: 1.0,
            settings: ShuttleSettings::default(),
        };
        let rep = run_shuttle_experiments(ShuttleVariant::Repeated, &sweep, &p, &NoiseModel::noiseless(), 1).unwrap();
        let ph = run_shuttle_experiments(ShuttleVariant::Phase, &ShuttleSweep { values: vec![0.0], ..sweep }, &p, &NoiseModel::noiseless(), 1).unwrap();
        assert_eq!(rep.points[0].probabilities, ph.points[0].probabilities);
        assert!((rep.points[0].probabilities[4] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn dephasing_per_cycle_scales_coherence() {
        let p = SpinSystemParams::default();
        let sweep = ShuttleSweep {
            values: vec![0.0, 10.0, 50.0],
            tau_0: 1250.0,
            t_ramp: 1.0,
            settings: ShuttleSettings::default().with_p_err(0.01),
        };
        let r = run_shuttle_experiments(ShuttleVariant::Repeated, &sweep, &p, &NoiseModel::noiseless(), 1).unwrap();
        for (k, pt) in sweep.values.iter().zip(&r.points) {
            assert!((pt.probabilities[4] - 0.99f64.powi(*k as i32)).abs() < 1e-9);
        }
    }

    #[test]
    fn electron_fringe_period_and_visibility() {
        let p = SpinSystemParams::default();
        let phases: Vec<f64> = (0..=24).map(|k| 30.0 * k as f64).collect();
        let sweep = ShuttleSweep {
            values: phases.clone(),
            tau_0: 0.0,
            t_ramp: 1.0,
            settings: ShuttleSettings::default().with_p_err(0.3),
        };
        let r = run_shuttle_experiments(ShuttleVariant::Electron, &sweep, &p, &NoiseModel::noiseless(), 1).unwrap();
        let col = r.column("electron_up").unwrap();
        for k in 0..12 {
            assert!((col[k] - col[k + 12]).abs() < 1e-9);
        }
        // P = ½(1 + V·cos(φ − θ)); project onto cos/sin over two periods.
        let (mut b, mut c) = (0.0, 0.0);
        for (ph, y) in phases.iter().zip(&col).take(24) {
            b += y * ph.to_radians().cos() / 12.0;
            c += y * ph.to_radians().sin() / 12.0;
        }
        let visibility = 2.0 * b.hypot(c);
        assert!((visibility - 0.7).abs() < 1e-3, "{visibility}");
    }
}
