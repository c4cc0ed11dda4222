use serde::{Deserialize, Serialize};

use rand_distr::{Binomial, Distribution};

use super::{average_over_noise, ExperimentResult};
use crate::pulse::{bell_circuit, BellSettings, PulseSequence, TomographyBasis};
use crate::readout::{confuse, correct_readout, JointProbs, ReadoutFidelities};
use crate::rng::trial_rng;
use crate::sim::execute;
use crate::spin::{NoiseDraw, NoiseModel, NuclearSpin, SpinSystemParams};
use crate::{Error, Result};

/// Fidelity contribution of one basis from joint probabilities ordered
/// |↓⇓⟩, |↓⇑⟩, |↑⇓⟩, |↑⇑⟩. ZZ always counts equal parity; XX counts equal
/// parity and YY opposite parity for ⇓-initialised data, and the other way
/// round for ⇑-initialised data.
pub fn basis_fidelity(basis: TomographyBasis, init: NuclearSpin, p: &JointProbs) -> f64 {
    let even = p[0] + p[3];
    let odd = p[1] + p[2];
    match (basis, init) {
        (TomographyBasis::ZZ, _) => even,
        (TomographyBasis::XX, NuclearSpin::Down) | (TomographyBasis::YY, NuclearSpin::Up) => even,
        (TomographyBasis::YY, NuclearSpin::Down) | (TomographyBasis::XX, NuclearSpin::Up) => odd,
    }
}

/// Phase corrections of the two conditional NMR projection pulses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StarkCalibration {
    /// Added to the f_n^↓ (electron ↓ branch) pulse phase, degrees.
    pub offset_down: f64,
    /// Added to the f_n^↑ (electron ↑ branch) pulse phase, degrees.
    pub offset_up: f64,
    /// Fitted parity-oscillation amplitudes of the two branches.
    pub amplitude_down: f64,
    pub amplitude_up: f64,
}

/// Amplitude and phase (deg) of y(φ) = a + R·cos(φ − θ) on a uniform
/// full-period grid.
fn sinusoid_phase(phis: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = phis.len() as f64;
    let (mut b, mut c) = (0.0, 0.0);
    for (phi, y) in phis.iter().zip(ys) {
        let r = phi.to_radians();
        b += y * r.cos();
        c += y * r.sin();
    }
    b *= 2.0 / n;
    c *= 2.0 / n;
    (b.hypot(c), c.atan2(b).to_degrees())
}

fn joint(seq: &PulseSequence, params: &SpinSystemParams, draw: &NoiseDraw) -> Result<JointProbs> {
    Ok(execute(seq, params, draw)?.state.probabilities())
}

/// Sweeps φ_n over `points` equally spaced phases in the XX setting from
/// ⇓ initialisation, without noise, and fits one sinusoid per electron
/// outcome to the branch parity p(e, equal) − p(e, opposite).
pub fn calibrate_stark_offsets(
    params: &SpinSystemParams,
    settings: &BellSettings,
    points: usize,
) -> Result<StarkCalibration> {
    if points < 3 {
        return Err(Error::param("calibration needs at least 3 phase points"));
    }
    let base = BellSettings {
        basis: TomographyBasis::XX,
        nuclear_init: NuclearSpin::Down,
        nmr_offset_down: 0.0,
        nmr_offset_up: 0.0,
        ..*settings
    };
    let phis: Vec<f64> = (0..points).map(|k| 360.0 * k as f64 / points as f64).collect();
    let mut y_down = Vec::with_capacity(points);
    let mut y_up = Vec::with_capacity(points);
    for &phi in &phis {
        let seq = bell_circuit(params, &BellSettings { phi_n: phi, ..base })?;
        let p = joint(&seq, params, &NoiseDraw::zero())?;
        y_down.push(p[0] - p[1]);
        y_up.push(p[3] - p[2]);
    }
    let (amplitude_down, offset_down) = sinusoid_phase(&phis, &y_down);
    let (amplitude_up, offset_up) = sinusoid_phase(&phis, &y_up);
    Ok(StarkCalibration {
        offset_down,
        offset_up,
        amplitude_down,
        amplitude_up,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BellTomographySettings {
    pub bell: BellSettings,
    /// Phase points of the calibration sweep.
    pub calibration_points: usize,
    /// Phase points of the parity curves versus φ_n and φ_e (0 skips them).
    pub curve_points: usize,
    /// Simulated preparations per basis for finite-statistics readout; exact
    /// probabilities when absent.
    #[serde(default)]
    pub preparations: Option<u64>,
}

impl BellTomographySettings {
    pub fn for_params(params: &SpinSystemParams) -> Self {
        Self {
            bell: BellSettings::for_params(params),
            calibration_points: 12,
            curve_points: 13,
            preparations: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisOutcome {
    pub basis: TomographyBasis,
    pub init: NuclearSpin,
    /// Trial-averaged joint probabilities before readout.
    pub exact: JointProbs,
    /// After electron readout confusion (and sampling, if enabled).
    pub raw: JointProbs,
    /// After direct-inversion correction.
    pub corrected: JointProbs,
    pub clamped: bool,
    pub fidelity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BellTomography {
    pub calibration: StarkCalibration,
    pub outcomes: Vec<BasisOutcome>,
    pub fidelity_down: f64,
    pub fidelity_up: f64,
    /// Mean over the two nuclear initialisations.
    pub fidelity: f64,
    /// Corrected fidelity above 1 or probabilities clamped during
    /// correction.
    pub correction_inconsistent: bool,
    pub parity_curves: Option<ExperimentResult>,
}

fn sample_counts(p: &JointProbs, n: u64, seed: u64) -> Result<JointProbs> {
    let mut rng = trial_rng(seed, u64::MAX);
    let mut left = n;
    let mut rest = 1.0;
    let mut out = [0.0; 4];
    for k in 0..4 {
        let count = if k == 3 || rest <= 0.0 {
            left
        } else {
            let q = (p[k] / rest).clamp(0.0, 1.0);
            Binomial::new(left, q)
                .map_err(|e| Error::Numerical(e.to_string()))?
                .sample(&mut rng)
        };
        out[k] = count as f64 / n as f64;
        left -= count;
        rest -= p[k];
    }
    Ok(out)
}

const INITS: [NuclearSpin; 2] = [NuclearSpin::Down, NuclearSpin::Up];

/// Bell preparation and XX/YY/ZZ tomography for both nuclear
/// initialisations. Projection-pulse phases come from a noiseless
/// calibration sweep. With `readout` = (ZZ fidelities, XX/YY fidelities) the
/// averaged probabilities pass through the electron confusion and are then
/// corrected by direct inversion.
pub fn run_bell_tomography(
    params: &SpinSystemParams,
    noise: &NoiseModel,
    readout: Option<(ReadoutFidelities, ReadoutFidelities)>,
    trials: usize,
    settings: &BellTomographySettings,
) -> Result<BellTomography> {
    let cal = calibrate_stark_offsets(params, &settings.bell, settings.calibration_points)?;
    let calibrated = BellSettings {
        nmr_offset_down: cal.offset_down,
        nmr_offset_up: cal.offset_up,
        phi_n: 0.0,
        phi_e: 0.0,
        ..settings.bell
    };
    let mut keys = Vec::new();
    let mut seqs = Vec::new();
    for init in INITS {
        for basis in TomographyBasis::ALL {
            keys.push((basis, init));
            seqs.push(bell_circuit(params, &calibrated.with_init(init).with_basis(basis))?);
        }
    }
    let n_curve = settings.curve_points;
    let curve_phis: Vec<f64> = (0..n_curve)
        .map(|k| 360.0 * k as f64 / (n_curve.max(2) - 1) as f64)
        .collect();
    let mut curve_keys = Vec::new();
    for init in INITS {
        for &phi in &curve_phis {
            for (phi_n, phi_e) in [(phi, 0.0), (0.0, phi)] {
                let s = BellSettings {
                    phi_n,
                    phi_e,
                    ..calibrated.with_init(init).with_basis(TomographyBasis::XX)
                };
                curve_keys.push((init, phi_n, phi_e));
                seqs.push(bell_circuit(params, &s)?);
            }
        }
    }
    for s in &seqs {
        s.validate()?;
    }
    let flat = average_over_noise(noise, trials, |draw| {
        let mut v = Vec::with_capacity(4 * seqs.len());
        for s in &seqs {
            v.extend_from_slice(&joint(s, params, draw)?);
        }
        Ok(v)
    })?;
    let probs = |k: usize| -> JointProbs { [flat[4 * k], flat[4 * k + 1], flat[4 * k + 2], flat[4 * k + 3]] };

    let mut outcomes = Vec::new();
    let mut inconsistent = false;
    for (k, (basis, init)) in keys.iter().enumerate() {
        let exact = probs(k);
        let (raw, corrected, clamped) = match readout {
            None => (exact, exact, false),
            Some((zz, xy)) => {
                let fid = if *basis == TomographyBasis::ZZ { zz } else { xy };
                let mut raw = confuse(&exact, &fid);
                if let Some(n) = settings.preparations {
                    raw = sample_counts(&raw, n, noise.seed ^ (k as u64 + 1))?;
                }
                let c = correct_readout(&raw, &fid)?;
                (raw, c.probs, c.clamped)
            }
        };
        inconsistent |= clamped;
        outcomes.push(BasisOutcome {
            basis: *basis,
            init: *init,
            exact,
            raw,
            corrected,
            clamped,
            fidelity: basis_fidelity(*basis, *init, &corrected),
        });
    }
    let total = |init: NuclearSpin| {
        outcomes
            .iter()
            .filter(|o| o.init == init)
            .map(|o| o.fidelity / 2.0)
            .sum::<f64>()
            - 0.5
    };
    let fidelity_down = total(NuclearSpin::Down);
    let fidelity_up = total(NuclearSpin::Up);
    inconsistent |= fidelity_down > 1.0 || fidelity_up > 1.0;

    let parity_curves = (n_curve > 0).then(|| {
        let mut r = ExperimentResult::new(
            "bell_parity",
            &["nuclear_init_up", "phi_n_deg", "phi_e_deg"],
            &["down_down", "down_up", "up_down", "up_up", "even_parity"],
            trials,
            noise.seed,
        );
        for (j, (init, phi_n, phi_e)) in curve_keys.iter().enumerate() {
            let p = probs(keys.len() + j);
            let init_up = if *init == NuclearSpin::Up { 1.0 } else { 0.0 };
            r.push(vec![init_up, *phi_n, *phi_e], vec![p[0], p[1], p[2], p[3], p[0] + p[3]]);
        }
        r
    });

    Ok(BellTomography {
        calibration: cal,
        outcomes,
        fidelity_down,
        fidelity_up,
        fidelity: 0.5 * (fidelity_down + fidelity_up),
        correction_inconsistent: inconsistent,
        parity_curves,
    })
}

/// Bell-fidelity reduction (percentage points) of each mechanism enabled on
/// its own, relative to the noiseless baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorBudget {
    pub baseline_fidelity: f64,
    pub electron_t2star: f64,
    pub spectator_nucleus: f64,
    pub pulse_calibration: f64,
    pub nmr_control: f64,
    /// Fidelity with every mechanism of the supplied model enabled.
    pub total_fidelity: f64,
    pub trials: usize,
}

/// Runs the tomography once noiseless and once per isolated mechanism
/// (electron S_z noise, spectator detuning, pulse-length error, NMR drive
/// amplitude noise), then with the full model. Readout is ideal.
pub fn compute_error_budget(
    params: &SpinSystemParams,
    noise: &NoiseModel,
    trials: usize,
    settings: &BellTomographySettings,
) -> Result<ErrorBudget> {
    noise.validate()?;
    let settings = BellTomographySettings {
        curve_points: 0,
        preparations: None,
        ..*settings
    };
    let fid = |model: &NoiseModel| -> Result<f64> {
        Ok(run_bell_tomography(params, model, None, trials, &settings)?.fidelity)
    };
    let off = NoiseModel {
        seed: noise.seed,
        ..NoiseModel::noiseless()
    };
    let baseline = fid(&off)?;
    let reduction = |model: NoiseModel| -> Result<f64> { Ok(100.0 * (baseline - fid(&model)?)) };
    Ok(ErrorBudget {
        baseline_fidelity: baseline,
        electron_t2star: reduction(NoiseModel { sigma_sz: noise.sigma_sz, ..off })?,
        spectator_nucleus: reduction(NoiseModel {
            spectator_flip_prob: noise.spectator_flip_prob,
            ..off
        })?,
        pulse_calibration: reduction(NoiseModel {
            pulse_length_error: noise.pulse_length_error,
            pulse_length_shape: noise.pulse_length_shape,
            ..off
        })?,
        nmr_control: reduction(NoiseModel { sigma_ix: noise.sigma_ix, ..off })?,
        total_fidelity: fid(noise)?,
        trials,
    })
}
