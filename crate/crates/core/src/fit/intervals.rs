use serde::{Deserialize, Serialize};

use super::FitResult;
use crate::error::{Error, Result};

/// Freedman–Diaconis bin width 2·IQR·n^(−1/3).
pub fn freedman_diaconis_width(samples: &[f64]) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let h = p * (s.len() - 1) as f64;
        let (i, f) = (h.floor() as usize, h.fract());
        if i + 1 < s.len() { s[i] * (1.0 - f) + s[i + 1] * f } else { s[i] }
    };
    2.0 * (q(0.75) - q(0.25)) * (s.len() as f64).powf(-1.0 / 3.0)
}

/// Exponential lifetime from a histogram of flip intervals.
pub fn fit_flip_intervals(intervals: &[f64]) -> Result<FitResult> {
    fit_flip_intervals_with(intervals, None)
}

/// Binned maximum-likelihood exponential fit. Bins start at zero with the
/// given width (Freedman–Diaconis by default); the last bin is open so no
/// probability mass is truncated. The maximum-likelihood mean of the
/// unbinned intervals is reported alongside as `t1_mle`.
pub fn fit_flip_intervals_with(intervals: &[f64], bin_width: Option<f64>) -> Result<FitResult> {
    if intervals.len() < 10 {
        return Err(Error::InsufficientData(format!(
            "need at least 10 intervals, got {}",
            intervals.len()
        )));
    }
    if intervals.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::param("intervals must be positive and finite"));
    }
    let n = intervals.len() as f64;
    let mean = intervals.iter().sum::<f64>() / n;
    let max = intervals.iter().cloned().fold(0.0, f64::max);
    let mut w = bin_width.unwrap_or_else(|| freedman_diaconis_width(intervals));
    if !(w > 0.0) {
        w = max / n.sqrt();
    }
    let bins = ((max / w).floor() as usize + 1).max(2);
    let mut counts = vec![0.0; bins];
    for &v in intervals {
        counts[((v / w) as usize).min(bins - 1)] += 1.0;
    }
    let log_lik = |t: f64| {
        counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0.0)
            .map(|(k, &c)| {
                let lo = (-(k as f64) * w / t).exp();
                let hi = if k + 1 == bins { 0.0 } else { (-((k + 1) as f64) * w / t).exp() };
                c * (lo - hi).max(1e-300).ln()
            })
            .sum::<f64>()
    };
    let t1 = golden_max(|u| log_lik(u.exp()), mean.ln() - 6.0, mean.ln() + 6.0).exp();
    let h = 1e-3 * t1;
    let curv = (log_lik(t1 + h) - 2.0 * log_lik(t1) + log_lik(t1 - h)) / (h * h);
    let se = if curv < 0.0 { (-1.0 / curv).sqrt() } else { f64::INFINITY };
    let mut r = FitResult::new("flip_intervals")
        .with("t1", t1, se)
        .with("t1_mle", mean, mean / n.sqrt())
        .with("bin_width", w, 0.0);
    r.converged = se.is_finite();
    r.evaluations = bins;
    Ok(r)
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > 1e-12 * (1.0 + a.abs()) {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShiftLabel {
    A1,
    A2,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftClassification {
    /// Label of the step from sample i to sample i+1.
    pub labels: Vec<ShiftLabel>,
    /// Times between successive events of each label.
    pub a1_intervals: Vec<f64>,
    pub a2_intervals: Vec<f64>,
}

/// Labels frequency jumps between consecutive samples.
///
/// A jump is A₁-related when |A₁| − 2σ ≤ |Δf| ≤ |A₁| + 2σ and A₂-related
/// when |A₂| − σ ≤ |Δf| ≤ |A₂| + σ; the A₁ window wins if both match.
pub fn classify_shifts(
    times: &[f64],
    freqs: &[f64],
    a1: f64,
    a2: f64,
    sigma: f64,
) -> Result<ShiftClassification> {
    if times.len() != freqs.len() {
        return Err(Error::param("times and frequencies differ in length"));
    }
    if !(sigma >= 0.0) {
        return Err(Error::param("sigma must be non-negative"));
    }
    let (a1, a2) = (a1.abs(), a2.abs());
    let mut labels = Vec::with_capacity(freqs.len().saturating_sub(1));
    let (mut last1, mut last2) = (None, None);
    let (mut a1_intervals, mut a2_intervals) = (Vec::new(), Vec::new());
    for i in 1..freqs.len() {
        let d = (freqs[i] - freqs[i - 1]).abs();
        let label = if (a1 - 2.0 * sigma..=a1 + 2.0 * sigma).contains(&d) {
            ShiftLabel::A1
        } else if (a2 - sigma..=a2 + sigma).contains(&d) {
            ShiftLabel::A2
        } else {
            ShiftLabel::None
        };
        let (last, out) = match label {
            ShiftLabel::A1 => (&mut last1, &mut a1_intervals),
            ShiftLabel::A2 => (&mut last2, &mut a2_intervals),
            ShiftLabel::None => {
                labels.push(label);
                continue;
            }
        };
        if let Some(t) = *last {
            out.push(times[i] - t);
        }
        *last = Some(times[i]);
        labels.push(label);
    }
    Ok(ShiftClassification {
        labels,
        a1_intervals,
        a2_intervals,
    })
}
