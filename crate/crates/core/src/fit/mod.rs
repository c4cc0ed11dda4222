//! Least-squares and likelihood fitters for the quantities extracted from
//! simulated or imported time series.
//!
//! Curve fits go through a damped least-squares solver with a central
//! finite-difference Jacobian. Quoted uncertainties are linearised 1σ values
//! from the Jacobian covariance at the optimum, scaled by the reduced χ².

mod curves;
mod esr;
mod intervals;
mod lsq;

pub use curves::{
    coherence_metric, fit_coherence_decay, fit_hahn, fit_ramsey, fit_ramsey_with, fit_sinusoid,
    Coherence, RamseyOptions,
};
pub use esr::{esr_log_likelihood, fit_esr_histogram, EsrMixture};
pub use intervals::{
    classify_shifts, fit_flip_intervals, fit_flip_intervals_with, freedman_diaconis_width,
    ShiftClassification, ShiftLabel,
};
pub use lsq::{least_squares, LsqOutcome};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitParameter {
    pub name: String,
    pub value: f64,
    /// Linearised 1σ uncertainty.
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: String,
    pub parameters: Vec<FitParameter>,
    /// Euclidean norm of the unweighted residuals.
    pub residual_norm: f64,
    pub converged: bool,
    pub evaluations: usize,
    /// Diagnostic markers such as `infinite_t2` or `a2_at_boundary`.
    pub flags: Vec<String>,
}

impl FitResult {
    pub(crate) fn new(model: &str) -> Self {
        Self {
            model: model.to_string(),
            parameters: Vec::new(),
            residual_norm: 0.0,
            converged: false,
            evaluations: 0,
            flags: Vec::new(),
        }
    }

    pub(crate) fn with(mut self, name: &str, value: f64, stderr: f64) -> Self {
        self.parameters.push(FitParameter {
            name: name.to_string(),
            value,
            stderr: stderr.abs(),
        });
        self
    }

    pub fn get(&self, name: &str) -> Option<&FitParameter> {
        self.parameters.iter().find(|p| p.name == name)
    }

    /// Value of a named parameter; NaN when absent.
    pub fn value(&self, name: &str) -> f64 {
        self.get(name).map_or(f64::NAN, |p| p.value)
    }

    pub fn stderr(&self, name: &str) -> f64 {
        self.get(name).map_or(f64::NAN, |p| p.stderr)
    }

    /// True when `truth` lies within `k` standard errors of the fitted value.
    pub fn covers(&self, name: &str, truth: f64, k: f64) -> bool {
        self.get(name)
            .is_some_and(|p| (p.value - truth).abs() <= k * p.stderr)
    }

    pub fn has_flag(&self, flag: &str) -> bool {
        self.flags.iter().any(|f| f == flag)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub(crate) fn check_xy(x: &[f64], y: &[f64], min_points: usize) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::param(format!(
            "x and y lengths differ ({} vs {})",
            x.len(),
            y.len()
        )));
    }
    if x.len() < min_points {
        return Err(Error::InsufficientData(format!(
            "need at least {min_points} points, got {}",
            x.len()
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::param("data contain non-finite values"));
    }
    Ok(())
}
