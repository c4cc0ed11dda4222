use levenberg_marquardt::{LeastSquaresProblem, LevenbergMarquardt};
use nalgebra::storage::Owned;
use nalgebra::{DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Relative parameter-change tolerance.
const XTOL: f64 = 1e-8;
/// Evaluation budget factor: at most `PATIENCE·(n+1)` residual evaluations.
const PATIENCE: usize = 200;

#[derive(Debug, Clone)]
pub struct LsqOutcome {
    pub params: Vec<f64>,
    /// Covariance scaled by the reduced χ² (equal to the raw covariance
    /// when there are no spare degrees of freedom).
    pub covariance: DMatrix<f64>,
    /// Weighted sum of squared residuals.
    pub chi2: f64,
    /// Unweighted residual norm.
    pub residual_norm: f64,
    pub converged: bool,
    pub evaluations: usize,
}

impl LsqOutcome {
    pub fn stderr(&self, i: usize) -> f64 {
        self.covariance[(i, i)].max(0.0).sqrt()
    }
}

struct Curve<'a, F> {
    x: &'a [f64],
    y: &'a [f64],
    w: Option<&'a [f64]>,
    model: &'a F,
    p: DVector<f64>,
}

impl<F: Fn(f64, &[f64]) -> f64> Curve<'_, F> {
    fn eval(&self, p: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.x.len(),
            self.x.iter().zip(self.y).enumerate().map(|(i, (&x, &y))| {
                let r = (self.model)(x, p) - y;
                self.w.map_or(r, |w| r * w[i])
            }),
        )
    }

    fn jac(&self, p: &[f64]) -> DMatrix<f64> {
        let mut j = DMatrix::zeros(self.x.len(), p.len());
        let mut q = p.to_vec();
        for k in 0..p.len() {
            let h = 1e-6 * p[k].abs().max(1e-3);
            q[k] = p[k] + h;
            let up = self.eval(&q);
            q[k] = p[k] - h;
            let dn = self.eval(&q);
            q[k] = p[k];
            j.set_column(k, &((up - dn) / (2.0 * h)));
        }
        j
    }
}

impl<F: Fn(f64, &[f64]) -> f64> LeastSquaresProblem<f64, Dyn, Dyn> for Curve<'_, F> {
    type ResidualStorage = Owned<f64, Dyn>;
    type JacobianStorage = Owned<f64, Dyn, Dyn>;
    type ParameterStorage = Owned<f64, Dyn>;

    fn set_params(&mut self, x: &DVector<f64>) {
        self.p.copy_from(x);
    }

    fn params(&self) -> DVector<f64> {
        self.p.clone()
    }

    fn residuals(&self) -> Option<DVector<f64>> {
        let r = self.eval(self.p.as_slice());
        r.iter().all(|v| v.is_finite()).then_some(r)
    }

    fn jacobian(&self) -> Option<DMatrix<f64>> {
        let j = self.jac(self.p.as_slice());
        j.iter().all(|v| v.is_finite()).then_some(j)
    }
}

/// Minimises Σ wᵢ²·(model(xᵢ, p) − yᵢ)² starting from `p0`.
///
/// `weights` are inverse standard deviations; `None` means unit weights.
pub fn least_squares<F>(
    x: &[f64],
    y: &[f64],
    weights: Option<&[f64]>,
    model: &F,
    p0: &[f64],
) -> Result<LsqOutcome>
where
    F: Fn(f64, &[f64]) -> f64,
{
    if let Some(w) = weights {
        if w.len() != x.len() || w.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::param("weights must be finite, non-negative, one per point"));
        }
    }
    let problem = Curve {
        x,
        y,
        w: weights,
        model,
        p: DVector::from_column_slice(p0),
    };
    let (problem, report) = LevenbergMarquardt::new()
        .with_xtol(XTOL)
        .with_ftol(1e-14)
        .with_patience(PATIENCE)
        .minimize(problem);
    let p = problem.p.clone();
    let r = problem.eval(p.as_slice());
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonConvergence(format!(
            "residuals not finite ({:?})",
            report.termination
        )));
    }
    let chi2 = r.norm_squared();
    let residual_norm = x
        .iter()
        .zip(y)
        .map(|(&xi, &yi)| (model(xi, p.as_slice()) - yi).powi(2))
        .sum::<f64>()
        .sqrt();
    let j = problem.jac(p.as_slice());
    let jtj = j.transpose() * &j;
    let n = p0.len();
    let dof = x.len().saturating_sub(n);
    let scale = if dof > 0 { chi2 / dof as f64 } else { 1.0 };
    let covariance = jtj
        .clone()
        .try_inverse()
        .or_else(|| jtj.pseudo_inverse(1e-14).ok())
        .map(|c| c * scale)
        .unwrap_or_else(|| DMatrix::from_element(n, n, f64::INFINITY));
    Ok(LsqOutcome {
        params: p.as_slice().to_vec(),
        covariance,
        chi2,
        residual_norm,
        converged: report.termination.was_successful(),
        evaluations: report.number_of_evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn straight_line_matches_normal_equations() {
        let x: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|&x| 1.5 * x - 2.0 + if (x as i32) % 2 == 0 { 0.1 } else { -0.1 })
            .collect();
        let fit = least_squares(&x, &y, None, &|x, p: &[f64]| p[0] * x + p[1], &[0.0, 0.0]).unwrap();
        // Closed-form ordinary least squares.
        let n = x.len() as f64;
        let (sx, sy) = (x.iter().sum::<f64>(), y.iter().sum::<f64>());
        let sxx = x.iter().map(|v| v * v).sum::<f64>();
        let sxy = x.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        let icpt = (sy - slope * sx) / n;
        assert!((fit.params[0] - slope).abs() < 1e-9);
        assert!((fit.params[1] - icpt).abs() < 1e-8);
        let s2 = fit.chi2 / (n - 2.0);
        let se_slope = (s2 * n / (n * sxx - sx * sx)).sqrt();
        assert!((fit.stderr(0) - se_slope).abs() / se_slope < 1e-5);
        assert!(fit.converged);
    }

    #[test]
    fn weights_length_checked() {
        let x = [0.0, 1.0];
        let r = least_squares(&x, &x, Some(&[1.0]), &|x, p: &[f64]| p[0] * x, &[1.0]);
        assert!(r.is_err());
    }
}
