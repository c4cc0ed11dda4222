//! Monte Carlo protocol drivers.
//!
//! Every driver draws one quasi-static [`NoiseDraw`] per trial, executes the
//! protocol's sequences for that draw and averages the exact outcome
//! probabilities over trials in trial-index order.

mod bell;
mod nmr;
mod shuttle;

pub use bell::{
    basis_fidelity, calibrate_stark_offsets, compute_error_budget, run_bell_tomography,
    BellTomography, BellTomographySettings, ErrorBudget, StarkCalibration,
};
pub use nmr::{run_hahn, run_nmr_chevron, run_rabi, run_ramsey, NmrSettings};
pub use shuttle::{
    coherence_from_phases, run_shuttle_experiments, ShuttleSweep, ShuttleVariant, READOUT_PHASES,
};

use serde::{Deserialize, Serialize};

use crate::rng::map_trials;
use crate::spin::{sample_noise, NoiseDraw, NoiseModel, SpinSystemParams};
use crate::{Error, Result};

/// One sweep point: coordinates along each axis and per-outcome
/// probabilities with binomial standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub coords: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub stderr: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub experiment: String,
    pub axes: Vec<String>,
    pub outcomes: Vec<String>,
    pub points: Vec<SweepPoint>,
    pub trials: usize,
    pub seed: u64,
}

/// √(p(1−p)/n).
pub fn binomial_stderr(p: f64, trials: usize) -> f64 {
    (p * (1.0 - p) / trials as f64).max(0.0).sqrt()
}

impl ExperimentResult {
    pub fn new(experiment: &str, axes: &[&str], outcomes: &[&str], trials: usize, seed: u64) -> Self {
        Self {
            experiment: experiment.to_string(),
            axes: axes.iter().map(|s| s.to_string()).collect(),
            outcomes: outcomes.iter().map(|s| s.to_string()).collect(),
            points: Vec::new(),
            trials,
            seed,
        }
    }

    pub fn push(&mut self, coords: Vec<f64>, probabilities: Vec<f64>) {
        let stderr = probabilities
            .iter()
            .map(|p| binomial_stderr(*p, self.trials))
            .collect();
        self.points.push(SweepPoint {
            coords,
            probabilities,
            stderr,
        });
    }

    /// Values of one outcome along the sweep.
    pub fn column(&self, outcome: &str) -> Option<Vec<f64>> {
        let k = self.outcomes.iter().position(|o| o == outcome)?;
        Some(self.points.iter().map(|p| p.probabilities[k]).collect())
    }

    pub fn axis(&self, axis: usize) -> Vec<f64> {
        self.points.iter().map(|p| p.coords[axis]).collect()
    }

    /// Header: axes, then `p_<outcome>` and `se_<outcome>` pairs.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header: Vec<String> = self.axes.clone();
        for o in &self.outcomes {
            header.push(format!("p_{o}"));
            header.push(format!("se_{o}"));
        }
        out.write_record(&header)?;
        for p in &self.points {
            let mut row: Vec<String> = p.coords.iter().map(|c| format!("{c}")).collect();
            for (v, e) in p.probabilities.iter().zip(&p.stderr) {
                row.push(format!("{v:e}"));
                row.push(format!("{e:e}"));
            }
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Inputs recorded alongside exported results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub params: SpinSystemParams,
    pub noise: NoiseModel,
    pub seed: u64,
    pub trials: usize,
    pub version: String,
}

impl Provenance {
    pub fn new(params: &SpinSystemParams, noise: &NoiseModel, trials: usize) -> Self {
        Self {
            params: *params,
            noise: *noise,
            seed: noise.seed,
            trials,
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct JsonEnvelope<'a, T: Serialize> {
    pub provenance: &'a Provenance,
    pub result: &'a T,
}

pub fn to_json<T: Serialize>(provenance: &Provenance, result: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(&JsonEnvelope { provenance, result })?)
}

pub(crate) fn check_trials(trials: usize) -> Result<()> {
    if trials < 1 {
        return Err(Error::param("trials must be ≥ 1"));
    }
    Ok(())
}

fn is_noiseless(noise: &NoiseModel) -> bool {
    noise.sigma_ix == 0.0
        && noise.sigma_iz == 0.0
        && noise.sigma_sz == 0.0
        && noise.spectator_flip_prob == 0.0
        && noise.pulse_length_error == 0.0
}

/// Mean over trials of the vector returned by `f` for each noise draw. A
/// noiseless model is evaluated once.
pub(crate) fn average_over_noise<F>(noise: &NoiseModel, trials: usize, f: F) -> Result<Vec<f64>>
where
    F: Fn(&NoiseDraw) -> Result<Vec<f64>> + Sync,
{
    check_trials(trials)?;
    noise.validate()?;
    if is_noiseless(noise) {
        return f(&NoiseDraw::zero());
    }
    let per_trial = map_trials(noise.seed, trials, |_, rng| f(&sample_noise(noise, rng)));
    let mut acc: Option<Vec<f64>> = None;
    for r in per_trial {
        let v = r?;
        match &mut acc {
            None => acc = Some(v),
            Some(a) => {
                for (x, y) in a.iter_mut().zip(v) {
                    *x += y;
                }
            }
        }
    }
    let mut mean = acc.unwrap_or_default();
    for x in mean.iter_mut() {
        *x /= trials as f64;
    }
    Ok(mean)
}
