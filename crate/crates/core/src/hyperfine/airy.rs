//! Airy function Ai on the real line.
//!
//! Maclaurin series for x < 5, leading asymptotic expansion above. Only the
//! range x ≥ −a₁ (first zero) is used by the wavefunction, but the series
//! is valid for moderate negative arguments too.

use std::f64::consts::PI;

/// Magnitude of the first zero of Ai.
pub const AIRY_FIRST_ZERO: f64 = 2.338_107_410_459_767;

const C1: f64 = 0.355_028_053_887_817_2;
const C2: f64 = 0.258_819_403_792_806_8;

pub fn airy_ai(x: f64) -> f64 {
    if x < 5.0 {
        series(x)
    } else {
        asymptotic(x)
    }
}

fn series(x: f64) -> f64 {
    let x3 = x * x * x;
    let (mut f, mut g) = (1.0, x);
    let (mut tf, mut tg) = (1.0, x);
    for k in 1..200 {
        let k3 = 3.0 * k as f64;
        tf *= x3 / ((k3 - 1.0) * k3);
        tg *= x3 / (k3 * (k3 + 1.0));
        f += tf;
        g += tg;
        if tf.abs() < 1e-18 * f.abs() && tg.abs() < 1e-18 * g.abs().max(1e-300) {
            break;
        }
    }
    C1 * f - C2 * g
}

fn asymptotic(x: f64) -> f64 {
    let zeta = 2.0 / 3.0 * x.powf(1.5);
    let mut u = 1.0;
    let mut sum = 1.0;
    for k in 1..8 {
        let kf = k as f64;
        u *= (6.0 * kf - 5.0) * (6.0 * kf - 3.0) * (6.0 * kf - 1.0) / ((2.0 * kf - 1.0) * 216.0 * kf);
        sum += if k % 2 == 1 { -u } else { u } / zeta.powi(k);
    }
    (-zeta).exp() / (2.0 * PI.sqrt() * x.powf(0.25)) * sum
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        // Tabulated Ai values.
        for (x, v) in [
            (0.0, 0.355_028_053_887_817_2),
            (1.0, 0.135_292_416_312_881_4),
            (-1.0, 0.535_560_883_292_352_1),
            (2.0, 0.034_924_130_423_274_38),
        ] {
            assert!((airy_ai(x) - v).abs() < 1e-13, "{x}");
        }
        assert!(airy_ai(-AIRY_FIRST_ZERO).abs() < 1e-13);
    }

    #[test]
    fn branches_meet() {
        let a = series(5.0);
        let b = asymptotic(5.0);
        assert!((a - b).abs() / a < 1e-6, "{a} {b}");
        assert!((airy_ai(5.0) - 1.083_444_281_360_744e-4).abs() < 1e-10);
    }

    #[test]
    fn airy_equation_holds() {
        // Ai'' = x·Ai, checked by finite differences.
        for x in [-2.0, -0.5, 0.7, 3.0, 6.0] {
            let h = 1e-3;
            let d2 = (airy_ai(x + h) - 2.0 * airy_ai(x) + airy_ai(x - h)) / (h * h);
            assert!((d2 - x * airy_ai(x)).abs() < 1e-6 * (1.0 + airy_ai(x).abs()), "{x}");
        }
    }
}
