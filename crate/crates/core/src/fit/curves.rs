use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::lsq::{least_squares, LsqOutcome};
use super::{check_xy, FitResult};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RamseyOptions {
    /// Hold the stretch exponent fixed instead of fitting it.
    pub fixed_alpha: Option<f64>,
    /// Number of periodogram peaks used as frequency starts.
    pub frequency_starts: usize,
}

impl Default for RamseyOptions {
    fn default() -> Self {
        Self {
            fixed_alpha: None,
            frequency_starts: 3,
        }
    }
}

#[derive(Clone, Copy)]
struct Harmonic {
    frequency: f64,
    amplitude: f64,
    phase: f64,
    offset: f64,
    ssr: f64,
}

/// Linear fit of a·cos + b·sin + c at fixed frequency.
fn harmonic_at(x: &[f64], y: &[f64], f: f64) -> Option<Harmonic> {
    let mut m = Matrix3::zeros();
    let mut v = Vector3::zeros();
    for (&xi, &yi) in x.iter().zip(y) {
        let (s, c) = (2.0 * PI * f * xi).sin_cos();
        let row = Vector3::new(c, s, 1.0);
        m += row * row.transpose();
        v += row * yi;
    }
    let sol = m.try_inverse()? * v;
    let ssr = x
        .iter()
        .zip(y)
        .map(|(&xi, &yi)| {
            let (s, c) = (2.0 * PI * f * xi).sin_cos();
            (sol[0] * c + sol[1] * s + sol[2] - yi).powi(2)
        })
        .sum();
    Some(Harmonic {
        frequency: f,
        amplitude: sol[0].hypot(sol[1]),
        phase: (-sol[1]).atan2(sol[0]),
        offset: sol[2],
        ssr,
    })
}

fn span(x: &[f64]) -> f64 {
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    hi - lo
}

/// Local minima of the single-harmonic residual over a frequency grid,
/// best first.
fn frequency_starts(x: &[f64], y: &[f64], count: usize) -> Vec<Harmonic> {
    let t = span(x);
    let df = 1.0 / (4.0 * t);
    let f_max = 0.5 * (x.len() - 1) as f64 / t;
    let grid: Vec<Harmonic> = (1..)
        .map(|j| j as f64 * df)
        .take_while(|&f| f <= f_max)
        .filter_map(|f| harmonic_at(x, y, f))
        .collect();
    let mut minima: Vec<Harmonic> = Vec::new();
    for i in 0..grid.len() {
        let left = i == 0 || grid[i].ssr <= grid[i - 1].ssr;
        let right = i + 1 == grid.len() || grid[i].ssr <= grid[i + 1].ssr;
        if left && right {
            minima.push(grid[i]);
        }
    }
    minima.sort_by(|a, b| a.ssr.total_cmp(&b.ssr));
    minima.truncate(count.max(1));
    minima
}

/// Folds (A, f, φ) into A ≥ 0, f ≥ 0, φ ∈ (−π, π].
fn canonical(mut a: f64, mut f: f64, mut phi: f64) -> (f64, f64, f64) {
    if f < 0.0 {
        f = -f;
        phi = -phi;
    }
    if a < 0.0 {
        a = -a;
        phi += PI;
    }
    phi = (phi + PI).rem_euclid(2.0 * PI) - PI;
    if phi == -PI {
        phi = PI;
    }
    (a, f, phi)
}

fn best(outcomes: impl Iterator<Item = Result<LsqOutcome>>) -> Result<LsqOutcome> {
    let mut best: Option<LsqOutcome> = None;
    let mut last_err = None;
    for o in outcomes {
        match o {
            Ok(o) if o.chi2.is_finite() => {
                if best.as_ref().is_none_or(|b| o.chi2 < b.chi2) {
                    best = Some(o);
                }
            }
            Ok(_) => {}
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.unwrap_or_else(|| Error::NonConvergence("no start converged".into())))
}

/// Undamped sinusoid A·cos(2πf·x + φ) + c.
pub fn fit_sinusoid(x: &[f64], y: &[f64]) -> Result<FitResult> {
    check_xy(x, y, 5)?;
    let model = |t: f64, p: &[f64]| p[0] * (2.0 * PI * p[1] * t + p[2]).cos() + p[3];
    let starts = frequency_starts(x, y, 3);
    let fit = best(starts.iter().map(|h| {
        least_squares(x, y, None, &model, &[h.amplitude, h.frequency, h.phase, h.offset])
    }))?;
    let p = &fit.params;
    let (a, f, phi) = canonical(p[0], p[1], p[2]);
    let mut r = FitResult::new("sinusoid")
        .with("amplitude", a, fit.stderr(0))
        .with("frequency", f, fit.stderr(1))
        .with("phase", phi, fit.stderr(2))
        .with("offset", p[3], fit.stderr(3));
    r.residual_norm = fit.residual_norm;
    r.converged = fit.converged;
    r.evaluations = fit.evaluations;
    Ok(r)
}

/// Ramsey fringe A·cos(2πf·τ + φ)·exp[−(τ/T₂*)^α] + c.
pub fn fit_ramsey(tau: &[f64], y: &[f64]) -> Result<FitResult> {
    fit_ramsey_with(tau, y, &RamseyOptions::default())
}

pub fn fit_ramsey_with(tau: &[f64], y: &[f64], opts: &RamseyOptions) -> Result<FitResult> {
    check_xy(tau, y, 8)?;
    if let Some(a) = opts.fixed_alpha {
        if !(a > 0.0) {
            return Err(Error::param("fixed alpha must be positive"));
        }
    }
    let t = span(tau);
    // Decay parameters are fitted as logarithms to keep them positive.
    let envelope = |tau: f64, ln_t: f64, alpha: f64| (-(tau.abs() / ln_t.exp()).powf(alpha)).exp();
    let free = |x: f64, p: &[f64]| {
        p[0] * (2.0 * PI * p[1] * x + p[2]).cos() * envelope(x, p[3], p[4].exp()) + p[5]
    };
    let fixed_alpha = opts.fixed_alpha.unwrap_or(2.0);
    let fixed = |x: f64, p: &[f64]| {
        p[0] * (2.0 * PI * p[1] * x + p[2]).cos() * envelope(x, p[3], fixed_alpha) + p[4]
    };
    let starts = frequency_starts(tau, y, opts.frequency_starts);
    let mut runs = Vec::new();
    for h in &starts {
        for t0 in [t / 3.0, t] {
            // Undo the envelope's average damping of the harmonic amplitude.
            let a0 = h.amplitude * 2.0;
            runs.push(match opts.fixed_alpha {
                None => least_squares(
                    tau,
                    y,
                    None,
                    &free,
                    &[a0, h.frequency, h.phase, t0.ln(), 2f64.ln(), h.offset],
                ),
                Some(_) => least_squares(tau, y, None, &fixed, &[a0, h.frequency, h.phase, t0.ln(), h.offset]),
            });
        }
    }
    let fit = best(runs.into_iter())?;
    let p = &fit.params;
    let (a, f, phi) = canonical(p[0], p[1], p[2]);
    let t2 = p[3].exp();
    let mut r = FitResult::new("ramsey")
        .with("amplitude", a, fit.stderr(0))
        .with("frequency", f, fit.stderr(1))
        .with("phase", phi, fit.stderr(2))
        .with("t2star", t2, t2 * fit.stderr(3));
    r = match opts.fixed_alpha {
        None => {
            let alpha = p[4].exp();
            r.with("alpha", alpha, alpha * fit.stderr(4))
                .with("offset", p[5], fit.stderr(5))
        }
        Some(alpha) => r.with("alpha", alpha, 0.0).with("offset", p[4], fit.stderr(4)),
    };
    if t2 > t {
        r.flags.push("decay_not_spanned".into());
    }
    r.residual_norm = fit.residual_norm;
    r.converged = fit.converged;
    r.evaluations = fit.evaluations;
    Ok(r)
}

/// Echo decay A·exp(−2τ/T₂) + c with τ the half-interval.
///
/// Data without variation return T₂ = ∞ and the `infinite_t2` flag.
pub fn fit_hahn(tau: &[f64], y: &[f64]) -> Result<FitResult> {
    check_xy(tau, y, 4)?;
    let t = span(tau);
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let (lo, hi) = y
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if hi - lo <= 1e-12 * mean.abs().max(1.0) {
        let mut r = FitResult::new("hahn")
            .with("amplitude", 0.0, 0.0)
            .with("t2_hahn", f64::INFINITY, 0.0)
            .with("offset", mean, 0.0);
        r.flags.push("infinite_t2".into());
        r.converged = true;
        return Ok(r);
    }
    let model = |x: f64, p: &[f64]| p[0] * (-2.0 * x / p[1].exp()).exp() + p[2];
    let (first, last) = order_ends(tau, y);
    let fit = best([0.5, 2.0, 8.0].iter().map(|&s| {
        least_squares(tau, y, None, &model, &[first - last, (s * t).ln(), last])
    }))?;
    let p = &fit.params;
    let t2 = p[1].exp();
    let mut r = FitResult::new("hahn")
        .with("amplitude", p[0], fit.stderr(0))
        .with("t2_hahn", t2, t2 * fit.stderr(1))
        .with("offset", p[2], fit.stderr(2));
    if t2 > 1e3 * t {
        r.flags.push("infinite_t2".into());
    }
    r.residual_norm = fit.residual_norm;
    r.converged = fit.converged;
    r.evaluations = fit.evaluations;
    Ok(r)
}

/// y at the smallest and largest x.
fn order_ends(x: &[f64], y: &[f64]) -> (f64, f64) {
    let imin = (0..x.len()).min_by(|&a, &b| x[a].total_cmp(&x[b])).unwrap_or(0);
    let imax = (0..x.len()).max_by(|&a, &b| x[a].total_cmp(&x[b])).unwrap_or(0);
    (y[imin], y[imax])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coherence {
    pub value: f64,
    /// Set when C exceeds 1, which no physical state produces.
    pub unphysical: bool,
}

/// C = √((p_X − p_−X)² + (p_Y − p_−Y)²).
pub fn coherence_metric(p_x: f64, p_mx: f64, p_y: f64, p_my: f64) -> Result<Coherence> {
    for p in [p_x, p_mx, p_y, p_my] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::param(format!("probability {p} outside [0, 1]")));
        }
    }
    let value = (p_x - p_mx).hypot(p_y - p_my);
    debug_assert!(value <= 2f64.sqrt() + 1e-12);
    Ok(Coherence {
        value,
        unphysical: value > 1.0 + 1e-12,
    })
}

/// Fits C(k) = C₀·exp(−k·p_err) to coherence versus cycle count.
///
/// `stderr`, when given, weights each point by its inverse uncertainty.
pub fn fit_coherence_decay(k: &[f64], c: &[f64], stderr: Option<&[f64]>) -> Result<FitResult> {
    check_xy(k, c, 3)?;
    let weights: Option<Vec<f64>> = stderr
        .map(|s| {
            if s.len() != k.len() || s.iter().any(|v| !(*v > 0.0)) {
                return Err(Error::param("stderr must be positive, one per point"));
            }
            Ok(s.iter().map(|v| 1.0 / v).collect())
        })
        .transpose()?;
    // Log-linear start from the positive points.
    let pts: Vec<(f64, f64)> = k
        .iter()
        .zip(c)
        .filter(|(_, &c)| c > 0.0)
        .map(|(&k, &c)| (k, c.ln()))
        .collect();
    let (c0, p0) = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1));
        let sxx = pts.iter().map(|p| p.0 * p.0).sum::<f64>();
        let sxy = pts.iter().map(|p| p.0 * p.1).sum::<f64>();
        let den = n * sxx - sx * sx;
        let slope = if den.abs() > 0.0 { (n * sxy - sx * sy) / den } else { 0.0 };
        (((sy - slope * sx) / n).exp(), -slope)
    } else {
        (c.iter().cloned().fold(0.0, f64::max).max(1e-3), 0.0)
    };
    let model = |x: f64, p: &[f64]| p[0] * (-x * p[1]).exp();
    let fit = least_squares(k, c, weights.as_deref(), &model, &[c0, p0])?;
    let mut r = FitResult::new("coherence_decay")
        .with("c0", fit.params[0], fit.stderr(0))
        .with("p_err", fit.params[1], fit.stderr(1));
    r.residual_norm = fit.residual_norm;
    r.converged = fit.converged;
    r.evaluations = fit.evaluations;
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn ramsey_data(t2: f64, alpha: f64, noise: f64, seed: u64) -> (Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = Normal::new(0.0, noise.max(1e-300)).unwrap();
        let tau: Vec<f64> = (0..60).map(|i| 0.25 * i as f64).collect();
        let y = tau
            .iter()
            .map(|&t| {
                let clean = 0.45 * (2.0 * PI * 0.6 * t + 0.3).cos() * (-(t / t2).powf(alpha)).exp() + 0.5;
                if noise > 0.0 { clean + n.sample(&mut rng) } else { clean }
            })
            .collect();
        (tau, y)
    }

    #[test]
    fn noiseless_ramsey_is_exact() {
        let (tau, y) = ramsey_data(6.5, 2.11, 0.0, 0);
        let r = fit_ramsey(&tau, &y).unwrap();
        assert!(r.residual_norm < 1e-10, "{}", r.residual_norm);
        assert!((r.value("t2star") - 6.5).abs() < 1e-8);
        assert!((r.value("alpha") - 2.11).abs() < 1e-8);
        assert!((r.value("frequency") - 0.6).abs() < 1e-10);
        assert!((r.value("phase") - 0.3).abs() < 1e-8);
        assert!(r.converged);
    }

    #[test]
    fn fixed_alpha_agrees_on_gaussian_decay() {
        let (tau, y) = ramsey_data(6.5, 2.0, 0.02, 11);
        let free = fit_ramsey(&tau, &y).unwrap();
        let fixed = fit_ramsey_with(
            &tau,
            &y,
            &RamseyOptions {
                fixed_alpha: Some(2.0),
                ..Default::default()
            },
        )
        .unwrap();
        let d = (free.value("t2star") - fixed.value("t2star")).abs();
        assert!(d <= free.stderr("t2star") + fixed.stderr("t2star"), "{d}");
        assert!(free.covers("alpha", 2.0, 2.0));
    }

    #[test]
    fn sinusoid_recovers_frequency() {
        let x: Vec<f64> = (0..40).map(|i| i as f64 * 0.25).collect();
        let y: Vec<f64> = x.iter().map(|&t| 0.3 * (2.0 * PI * 0.224 * t - 1.0).cos() + 0.5).collect();
        let r = fit_sinusoid(&x, &y).unwrap();
        assert!((r.value("frequency") - 0.224).abs() < 1e-9);
        assert!((r.value("phase") + 1.0).abs() < 1e-8);
    }

    #[test]
    fn hahn_constant_data_flags_infinite() {
        let tau = [1.0, 2.0, 3.0, 4.0, 5.0];
        let r = fit_hahn(&tau, &[0.8; 5]).unwrap();
        assert!(r.has_flag("infinite_t2"));
        assert!(r.value("t2_hahn").is_infinite());
    }

    #[test]
    fn hahn_convention_doubles_with_full_interval_axis() {
        let tau: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let y: Vec<f64> = tau.iter().map(|&t| 0.9 * (-2.0 * t / 16.0).exp()).collect();
        let r = fit_hahn(&tau, &y).unwrap();
        assert!((r.value("t2_hahn") - 16.0).abs() < 1e-6);
        // Feeding 2τ as the axis is the same decay written as exp(−τ_total/T).
        let doubled: Vec<f64> = tau.iter().map(|t| 2.0 * t).collect();
        let r2 = fit_hahn(&doubled, &y).unwrap();
        assert!((r2.value("t2_hahn") / r.value("t2_hahn") - 2.0).abs() < 1e-6);
    }

    #[test]
    fn coherence_limits() {
        assert!((coherence_metric(1.0, 0.0, 0.5, 0.5).unwrap().value - 1.0).abs() < 1e-15);
        assert_eq!(coherence_metric(0.5, 0.5, 0.5, 0.5).unwrap().value, 0.0);
        assert!(coherence_metric(1.0, 0.0, 1.0, 0.0).unwrap().unphysical);
        assert!(coherence_metric(1.2, 0.0, 0.5, 0.5).is_err());
    }

    #[test]
    fn coherence_decay_exact() {
        let k: Vec<f64> = (0..=80).step_by(10).map(|v| v as f64).collect();
        let c: Vec<f64> = k.iter().map(|&k| 0.95 * (-0.0045 * k).exp()).collect();
        let r = fit_coherence_decay(&k, &c, None).unwrap();
        assert!((r.value("p_err") - 0.0045).abs() < 1e-10);
        assert!((r.value("c0") - 0.95).abs() < 1e-10);
    }
}
