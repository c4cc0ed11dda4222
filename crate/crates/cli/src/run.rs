use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedIndex;
use rand_distr::{Distribution, Exp, Normal};
use serde::Serialize;

use nucspin::experiments::{
    compute_error_budget, run_bell_tomography, run_hahn, run_nmr_chevron, run_rabi, run_ramsey,
    run_shuttle_experiments, BellTomographySettings, ExperimentResult, ShuttleSweep,
};
use nucspin::fit::{
    fit_coherence_decay, fit_esr_histogram, fit_flip_intervals, fit_hahn, fit_ramsey, fit_sinusoid,
    FitResult,
};
use nucspin::hyperfine::{
    max_coupling_surface, probability_curves, resolvable_count, write_max_coupling_csv,
    write_probability_csv, CurveSettings, HyperfineModel, WavefunctionParams,
};
use nucspin::readout::{fidelity_curve, nuclear_fidelity_model, optimize_shots, write_fidelity_csv, ReadoutFidelities};
use nucspin::spin::transition_frequencies;
use nucspin::vanvleck::{standoff_sweep, write_sweep_csv};

use crate::config::*;
use crate::CliError;

/// Checks everything that can be checked without computing.
pub fn validate(run: &ResolvedRun) -> Result<(), CliError> {
    let s = &run.spec;
    match s.experiment {
        Experiment::Spectrum => {}
        Experiment::Chevron => {
            let j = s.chevron.as_ref().unwrap();
            j.detuning_khz.expand("detuning_khz")?;
            positive("duration_us", &j.duration_us.expand("duration_us")?)?;
        }
        Experiment::Rabi => {
            positive("duration_us", &s.rabi.as_ref().unwrap().duration_us.expand("duration_us")?)?;
        }
        Experiment::Ramsey => non_negative("tau_us", &s.ramsey.as_ref().unwrap().tau_us.expand("tau_us")?)?,
        Experiment::Hahn => non_negative("tau_us", &s.hahn.as_ref().unwrap().tau_us.expand("tau_us")?)?,
        Experiment::Bell | Experiment::ErrorBudget => {
            let j = s.bell.as_ref().unwrap();
            if j.calibration_points < 3 {
                return Err(CliError::invalid("calibration_points must be ≥ 3"));
            }
            if j.preparations == Some(0) {
                return Err(CliError::invalid("preparations must be ≥ 1"));
            }
        }
        Experiment::Shuttle => {
            s.shuttle.as_ref().unwrap().values.expand("values")?;
        }
        Experiment::ReadoutFidelity => {
            let j = s.readout.as_ref().unwrap();
            j.model.validate()?;
            if let Some(r) = &j.scan_m {
                parse_m_range(r)?;
            }
        }
        Experiment::HyperfineMc => {
            let j = s.hyperfine.as_ref().unwrap();
            positive("diameter_nm", &j.diameter_nm.expand("diameter_nm")?)?;
            let fields = j.field_mv_per_m.expand("field_mv_per_m")?;
            positive("field_mv_per_m", &fields)?;
            if j.thresholds_khz.is_empty() {
                return Err(CliError::invalid("thresholds_khz must be non-empty"));
            }
            if j.mode != HyperfineMode::MaxCoupling && fields.len() != 1 {
                return Err(CliError::invalid("field_mv_per_m takes a single value outside max_coupling mode"));
            }
            if j.mode == HyperfineMode::Count && (j.diameter_nm.expand("")?.len() != 1 || j.thresholds_khz.len() != 1) {
                return Err(CliError::invalid("count mode takes one diameter and one threshold"));
            }
            if j.draws == Some(0) {
                return Err(CliError::invalid("draws must be ≥ 1"));
            }
        }
        Experiment::Vanvleck => {
            let j = s.vanvleck.as_ref().unwrap();
            j.geometry.validate()?;
            positive("standoff_nm", &j.standoff_nm.expand("standoff_nm")?)?;
        }
        Experiment::Fit => {
            let j = s.fit.as_ref().unwrap();
            let sources = j.input.is_some() as u8 + j.synthetic_esr.is_some() as u8 + j.synthetic_intervals.is_some() as u8;
            if sources != 1 {
                return Err(CliError::invalid("fit needs exactly one of input, synthetic_esr, synthetic_intervals"));
            }
            let model = fit_model(j)?;
            match (model, j.synthetic_esr.is_some(), j.synthetic_intervals.is_some()) {
                (_, false, false) => {}
                (FitModel::Esr, true, _) | (FitModel::FlipIntervals, _, true) => {}
                _ => return Err(CliError::invalid("synthetic data does not match the fit model")),
            }
            if let Some(e) = &j.synthetic_esr {
                WeightedIndex::new(e.weights).map_err(|e| CliError::invalid(format!("weights: {e}")))?;
                if !(e.sigma > 0.0) || e.samples == 0 {
                    return Err(CliError::invalid("synthetic_esr needs sigma > 0 and samples ≥ 1"));
                }
            }
            if let Some(i) = &j.synthetic_intervals {
                if !(i.mean > 0.0) || i.samples == 0 {
                    return Err(CliError::invalid("synthetic_intervals needs mean > 0 and samples ≥ 1"));
                }
            }
        }
    }
    Ok(())
}

fn positive(what: &str, v: &[f64]) -> Result<(), CliError> {
    if v.iter().any(|x| !(*x > 0.0)) {
        return Err(CliError::invalid(format!("{what} values must be > 0")));
    }
    Ok(())
}

fn non_negative(what: &str, v: &[f64]) -> Result<(), CliError> {
    if v.iter().any(|x| !(*x >= 0.0)) {
        return Err(CliError::invalid(format!("{what} values must be ≥ 0")));
    }
    Ok(())
}

fn fit_model(j: &FitJob) -> Result<FitModel, CliError> {
    j.model
        .or(j.synthetic_esr.map(|_| FitModel::Esr))
        .or(j.synthetic_intervals.map(|_| FitModel::FlipIntervals))
        .ok_or_else(|| CliError::invalid("fit needs a model"))
}

/// Result of one run, before serialisation.
pub enum Payload {
    Sweep(ExperimentResult),
    /// Pre-rendered CSV plus a JSON-serialisable value.
    Table { csv: Vec<u8>, json: serde_json::Value },
}

fn table<T: Serialize>(value: &T, write: impl FnOnce(&mut Vec<u8>) -> Result<(), CliError>) -> Result<Payload, CliError> {
    let mut csv = Vec::new();
    write(&mut csv)?;
    Ok(Payload::Table { csv, json: serde_json::to_value(value).map_err(nucspin::Error::from)? })
}

fn key_value_csv(out: &mut Vec<u8>, rows: &[(&str, f64)]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["quantity", "value"]).map_err(nucspin::Error::from)?;
    for (k, v) in rows {
        w.write_record([k.to_string(), format!("{v:e}")]).map_err(nucspin::Error::from)?;
    }
    w.flush()?;
    Ok(())
}

pub fn execute(run: &ResolvedRun, base_dir: &Path) -> Result<Payload, CliError> {
    let s = &run.spec;
    let p = &run.params;
    let noise = run.noise;
    let n = || noise.expect("noise resolved for noisy experiments");
    Ok(match s.experiment {
        Experiment::Spectrum => {
            let t = transition_frequencies(p);
            table(&t, |out| key_value_csv(out, &t.labeled()))?
        }
        Experiment::Chevron => {
            let j = s.chevron.as_ref().unwrap();
            let f0 = transition_frequencies(p).f_n0;
            let freqs: Vec<f64> = j.detuning_khz.expand("")?.iter().map(|d| f0 + d * 1e-3).collect();
            Payload::Sweep(run_nmr_chevron(&freqs, &j.duration_us.expand("")?, p, &n(), run.trials, &j.nmr)?)
        }
        Experiment::Rabi => {
            let j = s.rabi.as_ref().unwrap();
            let f = j.nmr.line(p) + j.detuning_khz * 1e-3;
            Payload::Sweep(run_rabi(&j.duration_us.expand("")?, Some(f), p, &n(), run.trials, &j.nmr)?)
        }
        Experiment::Ramsey => {
            let j = s.ramsey.as_ref().unwrap();
            Payload::Sweep(run_ramsey(&j.tau_us.expand("")?, j.detuning_khz, p, &n(), run.trials, &j.nmr)?)
        }
        Experiment::Hahn => {
            let j = s.hahn.as_ref().unwrap();
            Payload::Sweep(run_hahn(&j.tau_us.expand("")?, p, &n(), run.trials, &j.nmr)?)
        }
        Experiment::Bell => {
            let j = s.bell.as_ref().unwrap();
            let settings = bell_settings(j, run);
            let readout = j.readout_correction.then(|| (ReadoutFidelities::zz(), ReadoutFidelities::xy()));
            let r = run_bell_tomography(p, &n(), readout, run.trials, &settings)?;
            match &r.parity_curves {
                Some(curves) if run.format == Format::Csv => Payload::Sweep(curves.clone()),
                _ => table(&r, |out| {
                    let mut rows = vec![("fidelity", r.fidelity), ("fidelity_down", r.fidelity_down), ("fidelity_up", r.fidelity_up)];
                    let labels: Vec<String> = r.outcomes.iter().map(|o| format!("fidelity_{:?}_{:?}", o.basis, o.init).to_lowercase()).collect();
                    rows.extend(labels.iter().map(String::as_str).zip(r.outcomes.iter().map(|o| o.fidelity)));
                    key_value_csv(out, &rows)
                })?,
            }
        }
        Experiment::ErrorBudget => {
            let j = s.bell.as_ref().unwrap();
            let b = compute_error_budget(p, &n(), run.trials, &bell_settings(j, run))?;
            table(&b, |out| {
                key_value_csv(
                    out,
                    &[
                        ("baseline_fidelity", b.baseline_fidelity),
                        ("electron_t2star_pts", b.electron_t2star),
                        ("spectator_nucleus_pts", b.spectator_nucleus),
                        ("pulse_calibration_pts", b.pulse_calibration),
                        ("nmr_control_pts", b.nmr_control),
                        ("total_fidelity", b.total_fidelity),
                    ],
                )
            })?
        }
        Experiment::Shuttle => {
            let j = s.shuttle.as_ref().unwrap();
            let sweep = ShuttleSweep { values: j.values.expand("")?, tau_0: j.tau_0, t_ramp: j.t_ramp, settings: j.settings };
            Payload::Sweep(run_shuttle_experiments(j.variant, &sweep, p, &n(), run.trials)?)
        }
        Experiment::ReadoutFidelity => {
            let j = s.readout.as_ref().unwrap();
            match &j.scan_m {
                Some(range) => {
                    let (a, b) = parse_m_range(range)?;
                    let curve: Vec<_> = fidelity_curve(&j.model, b)?.into_iter().filter(|f| f.m_shots >= a).collect();
                    let best = curve
                        .iter()
                        .copied()
                        .reduce(|x, y| if y.f_n > x.f_n { y } else { x })
                        .expect("non-empty scan");
                    table(&serde_json::json!({ "curve": curve, "optimum": best }), |out| Ok(write_fidelity_csv(out, &curve)?))?
                }
                None => {
                    let at = nuclear_fidelity_model(&j.model)?;
                    let best = optimize_shots(&j.model, 200)?;
                    table(&serde_json::json!({ "model": at, "optimum": best }), |out| {
                        key_value_csv(
                            out,
                            &[
                                ("m_shots", at.m_shots as f64),
                                ("f_n", at.f_n),
                                ("infidelity", at.infidelity()),
                                ("m_opt", best.m_shots as f64),
                                ("infidelity_opt", best.infidelity()),
                            ],
                        )
                    })?
                }
            }
        }
        Experiment::HyperfineMc => hyperfine(s.hyperfine.as_ref().unwrap(), run)?,
        Experiment::Vanvleck => {
            let j = s.vanvleck.as_ref().unwrap();
            let rows = standoff_sweep(&j.geometry, &j.standoff_nm.expand("")?, &j.species, j.orientation)?;
            table(&rows, |out| Ok(write_sweep_csv(&rows, out)?))?
        }
        Experiment::Fit => {
            let r = fit(s.fit.as_ref().unwrap(), run.seed, base_dir)?;
            table(&r, |out| {
                let mut w = csv::Writer::from_writer(out);
                w.write_record(["parameter", "value", "stderr"]).map_err(nucspin::Error::from)?;
                for q in &r.parameters {
                    w.write_record([q.name.clone(), format!("{:e}", q.value), format!("{:e}", q.stderr)])
                        .map_err(nucspin::Error::from)?;
                }
                w.flush()?;
                Ok(())
            })?
        }
    })
}

fn bell_settings(j: &BellJob, run: &ResolvedRun) -> BellTomographySettings {
    let mut s = BellTomographySettings::for_params(&run.params);
    s.calibration_points = j.calibration_points;
    s.curve_points = j.curve_points;
    s.preparations = j.preparations;
    if let Some(v) = j.esr_rabi {
        s.bell.esr_rabi = v;
    }
    if let Some(v) = j.nmr_rabi {
        s.bell.nmr_rabi = v;
    }
    s
}

fn hyperfine(j: &HyperfineJob, run: &ResolvedRun) -> Result<Payload, CliError> {
    let diameters = j.diameter_nm.expand("")?;
    let fields = j.field_mv_per_m.expand("")?;
    let draws = j.draws.unwrap_or(run.trials);
    match j.mode {
        HyperfineMode::Count => {
            let model = HyperfineModel::new(&WavefunctionParams::new(diameters[0], fields[0]), j.k_hf)?;
            let c = resolvable_count(&model, j.ppm, j.thresholds_khz[0], draws, run.seed)?;
            let max = model.max_coupling();
            table(&serde_json::json!({ "count": c, "max_coupling_khz": max }), |out| {
                key_value_csv(out, &[("mean_count", c.mean), ("stderr", c.stderr), ("max_coupling_khz", max)])
            })
        }
        HyperfineMode::Curves => {
            let settings = CurveSettings { f_z: fields[0], ppm: j.ppm, draws, k_hf: j.k_hf, seed: run.seed };
            let rows = probability_curves(&diameters, &j.thresholds_khz, &settings)?;
            table(&rows, |out| Ok(write_probability_csv(&rows, out)?))
        }
        HyperfineMode::MaxCoupling => {
            let rows = max_coupling_surface(&diameters, &fields, j.k_hf)?;
            table(&rows, |out| Ok(write_max_coupling_csv(&rows, out)?))
        }
    }
}

/// Reads CSV columns by header name.
fn read_columns(path: &Path, x: Option<&str>, y: Option<&str>, one_column: bool) -> Result<(Vec<f64>, Vec<f64>, Option<Vec<f64>>), CliError> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?;
    let header: Vec<String> = rdr.headers().map_err(nucspin::Error::from)?.iter().map(str::to_string).collect();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::invalid(format!("{}: no column {name:?}", path.display())))
    };
    let ix = match x {
        Some(n) => find(n)?,
        None => 0,
    };
    let iy = match (y, one_column) {
        (Some(n), _) => Some(find(n)?),
        (None, true) => None,
        (None, false) => Some(
            header
                .iter()
                .position(|h| h.starts_with("p_"))
                .unwrap_or(1.min(header.len().saturating_sub(1))),
        ),
    };
    let ise = iy.and_then(|i| header[i].strip_prefix("p_").and_then(|o| header.iter().position(|h| *h == format!("se_{o}"))));
    let (mut xs, mut ys, mut se) = (Vec::new(), Vec::new(), Vec::new());
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(nucspin::Error::from)?;
        let num = |i: usize| -> Result<f64, CliError> {
            rec.get(i)
                .and_then(|v| v.trim().parse::<f64>().ok())
                .ok_or_else(|| CliError::invalid(format!("{}: line {}: column {} is not a number", path.display(), line + 2, header[i])))
        };
        xs.push(num(ix)?);
        if let Some(i) = iy {
            ys.push(num(i)?);
        }
        if let Some(i) = ise {
            se.push(num(i)?);
        }
    }
    let se = (ise.is_some() && se.iter().all(|v| *v > 0.0)).then_some(se);
    Ok((xs, ys, se))
}

fn fit(j: &FitJob, seed: u64, base_dir: &Path) -> Result<FitResult, CliError> {
    let model = fit_model(j)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if let Some(e) = &j.synthetic_esr {
        let pick = WeightedIndex::new(e.weights).map_err(|err| CliError::invalid(err.to_string()))?;
        let noise = Normal::new(0.0, e.sigma).map_err(|err| CliError::invalid(err.to_string()))?;
        let centres = [e.f0 + e.a1 + e.a2, e.f0 + e.a1 - e.a2, e.f0 - e.a1 + e.a2, e.f0 - e.a1 - e.a2];
        let samples: Vec<f64> = (0..e.samples).map(|_| centres[pick.sample(&mut rng)] + noise.sample(&mut rng)).collect();
        return Ok(fit_esr_histogram(&samples)?);
    }
    if let Some(i) = &j.synthetic_intervals {
        let exp = Exp::new(1.0 / i.mean).map_err(|err| CliError::invalid(err.to_string()))?;
        let xs: Vec<f64> = (0..i.samples).map(|_| exp.sample(&mut rng)).collect();
        return Ok(fit_flip_intervals(&xs)?);
    }
    let input = j.input.as_ref().expect("validated");
    let path = if input.is_absolute() { input.clone() } else { base_dir.join(input) };
    let one = matches!(model, FitModel::Esr | FitModel::FlipIntervals);
    let (x, y, se) = read_columns(&path, j.x_column.as_deref(), j.y_column.as_deref(), one)?;
    Ok(match model {
        FitModel::Sinusoid => fit_sinusoid(&x, &y)?,
        FitModel::Ramsey => fit_ramsey(&x, &y)?,
        FitModel::Hahn => fit_hahn(&x, &y)?,
        FitModel::CoherenceDecay => fit_coherence_decay(&x, &y, se.as_deref())?,
        FitModel::Esr => fit_esr_histogram(&x)?,
        FitModel::FlipIntervals => fit_flip_intervals(&x)?,
    })
}
