//! Second-moment (Van Vleck) estimate of the dephasing of a ²⁹Si nucleus
//! by the ²⁷Al spins of a metal gate above it.
//!
//! The nucleus sits at the origin; the electrode is a rectangular slab
//! occupying z ∈ [standoff, standoff + thickness], centred laterally. The
//! slab is cut into (001) slices of thickness a/2 with one FCC atomic plane
//! at the centre of each, so lattice and continuum fill the same volume. The
//! static field points along z, so θ is the polar angle of each Al site.
//!
//! For unlike spins in a single crystal,
//! M₂ = ⅓·(μ₀/4π)²·γ_I²γ_S²ħ²·S(S+1)·Σⱼ (1 − 3cos²θⱼ)²/rⱼ⁶.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const HBAR: f64 = 1.054_571_817e-34;
const MU0_OVER_4PI: f64 = 1e-7;

/// |γ| of ²⁹Si in rad s⁻¹ T⁻¹.
pub const GAMMA_SI29: f64 = 2.0 * PI * 8.458e6;
/// γ of ²⁷Al in rad s⁻¹ T⁻¹.
pub const GAMMA_AL27: f64 = 2.0 * PI * 11.103e6;
pub const SPIN_AL27: f64 = 2.5;
/// Aluminium FCC lattice constant (nm).
pub const AL_LATTICE_CONSTANT: f64 = 0.405;

/// Angular treatment of the lattice sum.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// Keep (1 − 3cos²θ)² per site, prefactor ⅓.
    #[default]
    SingleCrystal,
    /// Replace the angular factor by its isotropic mean 4/5 (prefactor 4/15).
    Powder,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElectrodeGeometry {
    /// nm
    pub thickness: f64,
    /// Lateral extent along x and y (nm).
    pub lateral: [f64; 2],
    /// Nucleus to electrode underside (nm).
    pub standoff: f64,
    pub al_lattice_constant: f64,
}

impl Default for ElectrodeGeometry {
    fn default() -> Self {
        Self {
            thickness: 50.0,
            lateral: [300.0, 100.0],
            standoff: 10.0,
            al_lattice_constant: AL_LATTICE_CONSTANT,
        }
    }
}

impl ElectrodeGeometry {
    pub fn with_standoff(self, standoff: f64) -> Self {
        Self { standoff, ..self }
    }

    pub fn volume(&self) -> f64 {
        self.thickness * self.lateral[0] * self.lateral[1]
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.standoff > 0.0 && self.standoff.is_finite()) {
            return Err(Error::param("standoff must be positive"));
        }
        if !(self.thickness >= 0.0 && self.lateral.iter().all(|&l| l >= 0.0)) {
            return Err(Error::param("electrode dimensions must be non-negative"));
        }
        if !(self.al_lattice_constant > 0.0) {
            return Err(Error::param("lattice constant must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpinSpecies {
    /// Gyromagnetic ratio of the probed nucleus (rad s⁻¹ T⁻¹).
    pub gamma_n: f64,
    /// Gyromagnetic ratio of the bath spins.
    pub gamma_bath: f64,
    pub spin_bath: f64,
}

impl Default for SpinSpecies {
    fn default() -> Self {
        Self {
            gamma_n: GAMMA_SI29,
            gamma_bath: GAMMA_AL27,
            spin_bath: SPIN_AL27,
        }
    }
}

impl SpinSpecies {
    /// Everything multiplying the geometric sum, with r in nm (rad² s⁻² nm⁶).
    fn prefactor(&self, orientation: Orientation) -> f64 {
        let k = match orientation {
            Orientation::SingleCrystal => 1.0 / 3.0,
            Orientation::Powder => 4.0 / 15.0,
        };
        k * MU0_OVER_4PI.powi(2)
            * (self.gamma_n * self.gamma_bath * HBAR).powi(2)
            * self.spin_bath
            * (self.spin_bath + 1.0)
            * 1e54
    }
}

fn angular(orientation: Orientation, z2: f64, r2: f64) -> f64 {
    match orientation {
        Orientation::SingleCrystal => (1.0 - 3.0 * z2 / r2).powi(2),
        Orientation::Powder => 1.0,
    }
}

/// Discrete lattice sum over all FCC sites of the electrode (rad² s⁻²).
///
/// Atomic planes are summed in parallel and reduced in plane order, so the
/// result does not depend on the thread count.
pub fn second_moment_sum(geometry: &ElectrodeGeometry, species: &SpinSpecies, orientation: Orientation) -> Result<f64> {
    geometry.validate()?;
    let a = geometry.al_lattice_constant;
    let h = a / 2.0;
    let planes = (geometry.thickness / h + 1e-9).floor().max(0.0) as usize;
    let (hx, hy) = (geometry.lateral[0] / 2.0, geometry.lateral[1] / 2.0);
    let per_plane: Vec<f64> = (0..planes)
        .into_par_iter()
        .map(|m| {
            let z = geometry.standoff + (m as f64 + 0.5) * h;
            let z2 = z * z;
            // In each (001) plane the sites form a square lattice of side a/√2;
            // index it by (i, j) on the a/2 grid with i + j + m even.
            let (i0, i1) = ((-hx / h).ceil() as i64, ((hx / h) - 1e-9).ceil() as i64 - 1);
            let (j0, j1) = ((-hy / h).ceil() as i64, ((hy / h) - 1e-9).ceil() as i64 - 1);
            let mut s = 0.0;
            for i in i0..=i1 {
                let x = i as f64 * h;
                let start = if (i + j0 + m as i64).rem_euclid(2) == 0 { j0 } else { j0 + 1 };
                let mut j = start;
                while j <= j1 {
                    let y = j as f64 * h;
                    let r2 = x * x + y * y + z2;
                    s += angular(orientation, z2, r2) / (r2 * r2 * r2);
                    j += 2;
                }
            }
            s
        })
        .collect();
    Ok(species.prefactor(orientation) * per_plane.iter().sum::<f64>())
}

/// Continuum form: the electrode replaced by a coaxial cylinder of equal
/// volume and thickness with uniform Al density 4/a³.
pub fn second_moment_cylinder_integral(
    geometry: &ElectrodeGeometry,
    species: &SpinSpecies,
    orientation: Orientation,
) -> Result<f64> {
    geometry.validate()?;
    if geometry.volume() == 0.0 {
        return Ok(0.0);
    }
    let n = 4.0 / geometry.al_lattice_constant.powi(3);
    let r_cyl2 = geometry.lateral[0] * geometry.lateral[1] / PI;
    // ∫₀ᴿ 2πρ dρ f(ρ, z) in closed form, with s = ρ² + z².
    let radial = |z: f64| {
        let z2 = z * z;
        let prim = |s: f64| match orientation {
            Orientation::SingleCrystal => {
                -0.5 / (s * s) + 2.0 * z2 / (s * s * s) - 2.25 * z2 * z2 / (s * s * s * s)
            }
            Orientation::Powder => -0.5 / (s * s),
        };
        PI * (prim(z2 + r_cyl2) - prim(z2))
    };
    let (z0, z1) = (geometry.standoff, geometry.standoff + geometry.thickness);
    // Simpson on a log-z grid.
    let steps = 4000;
    let (l0, l1) = (z0.ln(), z1.ln());
    let du = (l1 - l0) / steps as f64;
    let f = |u: f64| {
        let z = u.exp();
        radial(z) * z
    };
    let mut s = f(l0) + f(l1);
    for k in 1..steps {
        s += f(l0 + k as f64 * du) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    Ok(species.prefactor(orientation) * n * s * du / 3.0)
}

/// Gaussian free-induction decay exp(−M₂t²/2): T₂* = √(2/M₂), in ms.
pub fn t2star_from_moment(m2: f64) -> Result<f64> {
    if !(m2 > 0.0) {
        return Err(Error::param("second moment must be positive"));
    }
    Ok((2.0 / m2).sqrt() * 1e3)
}

pub fn moment_from_t2star(t2_ms: f64) -> f64 {
    2.0 / (t2_ms * 1e-3).powi(2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StandoffRow {
    pub standoff: f64,
    pub m2_sum: f64,
    pub m2_integral: f64,
    pub t2_sum_ms: f64,
    pub t2_integral_ms: f64,
}

pub fn standoff_sweep(
    base: &ElectrodeGeometry,
    standoffs: &[f64],
    species: &SpinSpecies,
    orientation: Orientation,
) -> Result<Vec<StandoffRow>> {
    standoffs
        .iter()
        .map(|&d| {
            let g = base.with_standoff(d);
            let m2_sum = second_moment_sum(&g, species, orientation)?;
            let m2_integral = second_moment_cylinder_integral(&g, species, orientation)?;
            Ok(StandoffRow {
                standoff: d,
                m2_sum,
                m2_integral,
                t2_sum_ms: t2star_from_moment(m2_sum)?,
                t2_integral_ms: t2star_from_moment(m2_integral)?,
            })
        })
        .collect()
}

pub fn write_sweep_csv<W: Write>(rows: &[StandoffRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["standoff_nm", "m2_sum", "m2_integral", "t2_sum_ms", "t2_integral_ms"])?;
    for r in rows {
        out.serialize((r.standoff, r.m2_sum, r.m2_integral, r.t2_sum_ms, r.t2_integral_ms))?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sc() -> (SpinSpecies, Orientation) {
        (SpinSpecies::default(), Orientation::SingleCrystal)
    }

    #[test]
    fn single_site_closed_form() {
        // A single a/2 slice narrower than the in-plane spacing holds exactly
        // the site above the nucleus, at the slice centre.
        let (sp, o) = sc();
        let g = ElectrodeGeometry {
            thickness: AL_LATTICE_CONSTANT / 2.0,
            lateral: [0.1, 0.1],
            standoff: 3.0,
            al_lattice_constant: AL_LATTICE_CONSTANT,
        };
        let m2 = second_moment_sum(&g, &sp, o).unwrap();
        let r: f64 = (3.0 + AL_LATTICE_CONSTANT / 4.0) * 1e-9;
        let expect = (1.0 / 3.0)
            * 1e-14
            * (GAMMA_SI29 * GAMMA_AL27 * HBAR).powi(2)
            * 2.5
            * 3.5
            * 4.0
            / r.powi(6);
        assert!((m2 / expect - 1.0).abs() < 1e-12, "{m2} {expect}");
        let t2 = t2star_from_moment(m2).unwrap();
        assert!((moment_from_t2star(t2) / m2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn convention() {
        assert!((t2star_from_moment(2e6).unwrap() - 1.0).abs() < 1e-12);
        assert!(t2star_from_moment(0.0).is_err());
    }

    #[test]
    fn rejects_nonpositive_standoff() {
        let (sp, o) = sc();
        assert!(second_moment_sum(&ElectrodeGeometry::default().with_standoff(0.0), &sp, o).is_err());
    }

    #[test]
    fn zero_thickness_is_zero() {
        let (sp, o) = sc();
        let g = ElectrodeGeometry {
            thickness: 0.0,
            ..Default::default()
        };
        assert_eq!(second_moment_sum(&g, &sp, o).unwrap(), 0.0);
        assert_eq!(second_moment_cylinder_integral(&g, &sp, o).unwrap(), 0.0);
    }

    #[test]
    fn half_space_limit() {
        // Large slab: ∫ over z > d of (1 − 3cos²θ)²/r⁶ dV = π/(4d³).
        let (sp, o) = sc();
        let g = ElectrodeGeometry {
            thickness: 2000.0,
            lateral: [4000.0, 4000.0],
            standoff: 5.0,
            al_lattice_constant: AL_LATTICE_CONSTANT,
        };
        let m2 = second_moment_cylinder_integral(&g, &sp, o).unwrap();
        let n = 4.0 / AL_LATTICE_CONSTANT.powi(3);
        let expect = sp.prefactor(o) * n * PI / (4.0 * 125.0);
        assert!((m2 / expect - 1.0).abs() < 1e-4, "{}", m2 / expect);
    }

    #[test]
    fn doubling_standoff_divides_by_eight() {
        let (sp, o) = sc();
        let g = ElectrodeGeometry::default();
        let a = second_moment_sum(&g.with_standoff(4.0), &sp, o).unwrap();
        let b = second_moment_sum(&g.with_standoff(8.0), &sp, o).unwrap();
        assert!((a / b / 8.0 - 1.0).abs() < 0.1, "{}", a / b);
    }
}
