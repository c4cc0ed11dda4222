//! Contact hyperfine couplings of randomly placed ²⁹Si nuclei inside a
//! quantum-dot electron wavefunction.
//!
//! The envelope is an Airy function along the confinement axis (interface
//! at z = 0, silicon at z > 0) times a transverse Gaussian, modulated by the
//! valley factor 2cos²(k_v z + φ_v). A nucleus at r couples with
//! A = K_hf·|ψ(r)|².

mod airy;
mod lattice;

pub use airy::{airy_ai, AIRY_FIRST_ZERO};
pub use lattice::{generate_lattice, lattice_sites, Region, DIAMOND_BASIS, FCC_BASIS};

use std::f64::consts::PI;
use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::binomial_stderr;
use crate::rng::map_trials;

const HBAR: f64 = 1.054_571_817e-34;
const M_E: f64 = 9.109_383_701_5e-31;
const E_CHARGE: f64 = 1.602_176_634e-19;

/// Longitudinal silicon effective mass in units of mₑ.
pub const M_Z_RATIO: f64 = 0.916;
/// Unstrained silicon cubic lattice constant (nm).
pub const SI_LATTICE_CONSTANT: f64 = 0.543;
/// Contact prefactor (kHz·nm³) linking |ψ|² to the coupling. Chosen so a
/// 7 nm dot at 10 MV/m supports a 450 kHz maximum coupling.
pub const K_HF_DEFAULT: f64 = 25_112.0;

/// Transverse half-width of the automatic box in units of the diameter.
const LATERAL_EXTENT: f64 = 1.35;
/// Depth of the automatic box in Airy lengths.
const DEPTH_EXTENT: f64 = 8.0;

fn default_valley_wavevector() -> f64 {
    0.85 * 2.0 * PI / SI_LATTICE_CONSTANT
}

fn default_lattice_constant() -> f64 {
    SI_LATTICE_CONSTANT
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WavefunctionParams {
    /// 1/e diameter of the transverse charge distribution (nm).
    pub dot_diameter: f64,
    /// Vertical confining field (MV/m).
    pub f_z: f64,
    /// Valley oscillation wavevector (nm⁻¹).
    #[serde(default = "default_valley_wavevector")]
    pub valley_wavevector: f64,
    #[serde(default)]
    pub valley_phase: f64,
    #[serde(default = "default_lattice_constant")]
    pub lattice_constant: f64,
    /// Simulation box; `None` picks one enclosing ≥ 0.999 of the density.
    #[serde(default)]
    pub region: Option<Region>,
}

impl WavefunctionParams {
    pub fn new(dot_diameter: f64, f_z: f64) -> Self {
        Self {
            dot_diameter,
            f_z,
            valley_wavevector: default_valley_wavevector(),
            valley_phase: 0.0,
            lattice_constant: SI_LATTICE_CONSTANT,
            region: None,
        }
    }

    /// ℓ = (ħ²/(2·m_z·e·F_z))^(1/3) in nm.
    pub fn airy_length(&self) -> f64 {
        let f = self.f_z * 1e6;
        (HBAR * HBAR / (2.0 * M_Z_RATIO * M_E * E_CHARGE * f)).cbrt() * 1e9
    }

    pub fn region(&self) -> Region {
        self.region.unwrap_or_else(|| {
            let h = LATERAL_EXTENT * self.dot_diameter;
            Region::new([-h, -h, 0.0], [h, h, DEPTH_EXTENT * self.airy_length()])
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dot_diameter > 0.0 && self.dot_diameter.is_finite()) {
            return Err(Error::param("dot diameter must be positive"));
        }
        if !(self.f_z > 0.0 && self.f_z.is_finite()) {
            return Err(Error::param("vertical field must be positive"));
        }
        if !(self.lattice_constant > 0.0) {
            return Err(Error::param("lattice constant must be positive"));
        }
        if !self.valley_wavevector.is_finite() || !self.valley_phase.is_finite() {
            return Err(Error::param("valley parameters must be finite"));
        }
        self.region().validate()
    }
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, max_step: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let mut n = ((b - a) / max_step).ceil() as usize;
    n += n % 2;
    let n = n.max(2);
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// Normalised |ψ|² over a fixed region.
#[derive(Debug, Clone)]
pub struct Wavefunction {
    params: WavefunctionParams,
    region: Region,
    airy_length: f64,
    norm: f64,
    /// Fraction of the unbounded density inside the region.
    enclosed: f64,
}

impl Wavefunction {
    pub fn new(params: &WavefunctionParams) -> Result<Self> {
        params.validate()?;
        let region = params.region();
        let l = params.airy_length();
        let d = params.dot_diameter;
        let lateral = |x: f64| (-4.0 * x * x / (d * d)).exp();
        let step_xy = d / 400.0;
        let ix = simpson(lateral, region.min[0], region.max[0], step_xy);
        let iy = simpson(lateral, region.min[1], region.max[1], step_xy);
        let period = PI / params.valley_wavevector.abs().max(1e-9);
        let step_z = (period / 40.0).min(l / 200.0);
        let vertical = |z: f64| vertical_profile(params, l, z);
        let iz = simpson(vertical, region.min[2].max(0.0), region.max[2], step_z);
        let iz_inf = simpson(vertical, 0.0, 30.0 * l, step_z);
        let ixy_inf = PI * d * d / 4.0;
        let total = ix * iy * iz;
        if !(total > 0.0) {
            return Err(Error::param("region encloses none of the wavefunction"));
        }
        Ok(Self {
            params: params.clone(),
            region,
            airy_length: l,
            norm: 1.0 / total,
            enclosed: total / (ixy_inf * iz_inf),
        })
    }

    pub fn params(&self) -> &WavefunctionParams {
        &self.params
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn airy_length(&self) -> f64 {
        self.airy_length
    }

    pub fn enclosed_probability(&self) -> f64 {
        self.enclosed
    }

    /// |ψ(r)|² in nm⁻³; zero outside the region and below the interface.
    pub fn density(&self, p: &[f64; 3]) -> f64 {
        if !self.region.contains(p) || p[2] <= 0.0 {
            return 0.0;
        }
        let d = self.params.dot_diameter;
        let r2 = p[0] * p[0] + p[1] * p[1];
        self.norm * (-4.0 * r2 / (d * d)).exp() * vertical_profile(&self.params, self.airy_length, p[2])
    }

    /// Mean depth of the Airy envelope alone (valley factor averaged out).
    pub fn mean_envelope_depth(&self) -> f64 {
        let l = self.airy_length;
        let env = |z: f64| airy_ai(z / l - AIRY_FIRST_ZERO).powi(2);
        let step = l / 400.0;
        simpson(|z| z * env(z), 0.0, 30.0 * l, step) / simpson(env, 0.0, 30.0 * l, step)
    }
}

fn vertical_profile(p: &WavefunctionParams, l: f64, z: f64) -> f64 {
    if z <= 0.0 {
        return 0.0;
    }
    let ai = airy_ai(z / l - AIRY_FIRST_ZERO);
    ai * ai * 2.0 * (p.valley_wavevector * z + p.valley_phase).cos().powi(2)
}

/// |ψ|² at one point. Builds the normalisation each call; use
/// [`Wavefunction`] for repeated evaluation.
pub fn wavefunction_density(position: &[f64; 3], params: &WavefunctionParams) -> Result<f64> {
    Ok(Wavefunction::new(params)?.density(position))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperfineSite {
    /// nm
    pub position: [f64; 3],
    /// Coupling magnitude (kHz).
    pub a_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperfineSample {
    pub sites: Vec<HyperfineSite>,
    pub ppm: f64,
    pub seed: Option<u64>,
}

impl HyperfineSample {
    pub fn count_at_least(&self, threshold_khz: f64) -> usize {
        self.sites.iter().filter(|s| s.a_value >= threshold_khz).count()
    }

    pub fn max_coupling(&self) -> Option<f64> {
        self.sites.iter().map(|s| s.a_value).reduce(f64::max)
    }
}

/// Lattice with precomputed couplings, shared read-only across draws.
#[derive(Debug, Clone)]
pub struct HyperfineModel {
    wavefunction: Wavefunction,
    k_hf: f64,
    sites: Vec<[f64; 3]>,
    couplings: Vec<f64>,
}

impl HyperfineModel {
    pub fn new(params: &WavefunctionParams, k_hf: f64) -> Result<Self> {
        if !(k_hf >= 0.0 && k_hf.is_finite()) {
            return Err(Error::param("contact prefactor must be finite and non-negative"));
        }
        let wavefunction = Wavefunction::new(params)?;
        if wavefunction.enclosed_probability() < 0.999 {
            return Err(Error::param(format!(
                "region encloses only {:.5} of the density (need ≥ 0.999)",
                wavefunction.enclosed_probability()
            )));
        }
        let sites = generate_lattice(wavefunction.region(), params.lattice_constant)?;
        let couplings = sites.iter().map(|p| k_hf * wavefunction.density(p)).collect();
        Ok(Self {
            wavefunction,
            k_hf,
            sites,
            couplings,
        })
    }

    pub fn wavefunction(&self) -> &Wavefunction {
        &self.wavefunction
    }

    pub fn k_hf(&self) -> f64 {
        self.k_hf
    }

    pub fn site_count(&self) -> usize {
        self.sites.len()
    }

    pub fn sites(&self) -> &[[f64; 3]] {
        &self.sites
    }

    pub fn couplings(&self) -> &[f64] {
        &self.couplings
    }

    /// Σ |ψ(rᵢ)|²·a³/8 over the lattice.
    pub fn lattice_normalisation(&self) -> f64 {
        let v = self.wavefunction.params().lattice_constant.powi(3) / 8.0;
        self.couplings.iter().sum::<f64>() / self.k_hf * v
    }

    /// Largest coupling any lattice site supports.
    pub fn max_coupling(&self) -> f64 {
        self.couplings.iter().cloned().fold(0.0, f64::max)
    }

    /// Number of lattice sites whose coupling reaches the threshold.
    pub fn sites_at_least(&self, threshold_khz: f64) -> usize {
        self.couplings.iter().filter(|&&a| a >= threshold_khz).count()
    }

    /// Indices of sites occupied by ²⁹Si, each independently with
    /// probability ppm·10⁻⁶.
    fn occupied<R: Rng + ?Sized>(&self, ppm: f64, rng: &mut R) -> Vec<usize> {
        let p = ppm * 1e-6;
        let n = self.sites.len();
        if p <= 0.0 || n == 0 {
            return Vec::new();
        }
        if p >= 1.0 {
            return (0..n).collect();
        }
        let skip = Geometric::new(p).expect("p in (0, 1)");
        let mut out = Vec::with_capacity((p * n as f64 * 1.5) as usize + 4);
        let mut i = 0usize;
        loop {
            let s = skip.sample(rng);
            i = match usize::try_from(s).ok().and_then(|s| i.checked_add(s)) {
                Some(i) if i < n => i,
                _ => break,
            };
            out.push(i);
            i += 1;
        }
        out
    }

    pub fn sample<R: Rng + ?Sized>(&self, ppm: f64, rng: &mut R) -> Result<HyperfineSample> {
        check_ppm(ppm)?;
        let sites = self
            .occupied(ppm, rng)
            .into_iter()
            .map(|i| HyperfineSite {
                position: self.sites[i],
                a_value: self.couplings[i],
            })
            .collect();
        Ok(HyperfineSample { sites, ppm, seed: None })
    }

    /// Per-draw maximum coupling (None if no site is occupied) and count of
    /// occupied sites reaching `threshold_khz`.
    pub fn draws(&self, ppm: f64, threshold_khz: f64, draws: usize, seed: u64) -> Result<Vec<(Option<f64>, usize)>> {
        check_ppm(ppm)?;
        Ok(map_trials(seed, draws, |_, rng| {
            let occ = self.occupied(ppm, rng);
            let max = occ.iter().map(|&i| self.couplings[i]).reduce(f64::max);
            let count = occ.iter().filter(|&&i| self.couplings[i] >= threshold_khz).count();
            (max, count)
        }))
    }
}

fn check_ppm(ppm: f64) -> Result<()> {
    if !(0.0..=1e6).contains(&ppm) {
        return Err(Error::param(format!("isotope fraction {ppm} ppm outside [0, 10⁶]")));
    }
    Ok(())
}

/// One random isotope placement with the default contact prefactor.
pub fn sample_hyperfine<R: Rng + ?Sized>(
    params: &WavefunctionParams,
    ppm: f64,
    rng: &mut R,
) -> Result<HyperfineSample> {
    HyperfineModel::new(params, K_HF_DEFAULT)?.sample(ppm, rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountStatistics {
    pub mean: f64,
    pub stderr: f64,
    pub draws: usize,
}

/// Mean number of occupied sites with coupling ≥ threshold.
pub fn resolvable_count(model: &HyperfineModel, ppm: f64, threshold_khz: f64, draws: usize, seed: u64) -> Result<CountStatistics> {
    if draws < 2 {
        return Err(Error::param("need at least 2 draws"));
    }
    let counts: Vec<f64> = model
        .draws(ppm, threshold_khz, draws, seed)?
        .into_iter()
        .map(|(_, c)| c as f64)
        .collect();
    let n = draws as f64;
    let mean = counts.iter().sum::<f64>() / n;
    let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(CountStatistics {
        mean,
        stderr: (var / n).sqrt(),
        draws,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityRow {
    pub diameter: f64,
    pub threshold: f64,
    pub probability: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaxCouplingRow {
    pub diameter: f64,
    pub f_z: f64,
    pub max_a: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveSettings {
    pub f_z: f64,
    pub ppm: f64,
    pub draws: usize,
    pub k_hf: f64,
    pub seed: u64,
}

impl Default for CurveSettings {
    fn default() -> Self {
        Self {
            f_z: 10.0,
            ppm: 800.0,
            draws: 1000,
            k_hf: K_HF_DEFAULT,
            seed: 0,
        }
    }
}

/// P(at least one occupied site with coupling ≥ threshold) per diameter.
/// Every diameter reuses the same seed, so curves are paired draws.
pub fn probability_curves(diameters: &[f64], thresholds: &[f64], s: &CurveSettings) -> Result<Vec<ProbabilityRow>> {
    if s.draws < 100 {
        return Err(Error::param("probability curves need at least 100 draws"));
    }
    let mut rows = Vec::new();
    for &d in diameters {
        let model = HyperfineModel::new(&WavefunctionParams::new(d, s.f_z), s.k_hf)?;
        let maxima = model.draws(s.ppm, 0.0, s.draws, s.seed)?;
        for &t in thresholds {
            let hits = maxima.iter().filter(|(m, _)| m.is_some_and(|m| m >= t)).count();
            let p = hits as f64 / s.draws as f64;
            rows.push(ProbabilityRow {
                diameter: d,
                threshold: t,
                probability: p,
                stderr: binomial_stderr(p, s.draws),
            });
        }
    }
    Ok(rows)
}

/// Largest lattice-supported coupling over a (diameter, F_z) grid.
pub fn max_coupling_surface(diameters: &[f64], fields: &[f64], k_hf: f64) -> Result<Vec<MaxCouplingRow>> {
    let mut rows = Vec::new();
    for &d in diameters {
        for &f in fields {
            let model = HyperfineModel::new(&WavefunctionParams::new(d, f), k_hf)?;
            rows.push(MaxCouplingRow {
                diameter: d,
                f_z: f,
                max_a: model.max_coupling(),
            });
        }
    }
    Ok(rows)
}

pub fn write_probability_csv<W: Write>(rows: &[ProbabilityRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["diameter_nm", "threshold_khz", "probability", "stderr"])?;
    for r in rows {
        out.serialize((r.diameter, r.threshold, r.probability, r.stderr))?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_max_coupling_csv<W: Write>(rows: &[MaxCouplingRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["diameter_nm", "f_z_mv_per_m", "max_a_khz"])?;
    for r in rows {
        out.serialize((r.diameter, r.f_z, r.max_a))?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn airy_length_at_ten_mv_per_m() {
        let l = WavefunctionParams::new(8.0, 10.0).airy_length();
        assert!((l - 1.608).abs() < 1e-3, "{l}");
    }

    #[test]
    fn continuous_and_lattice_normalisation() {
        let m = HyperfineModel::new(&WavefunctionParams::new(8.0, 10.0), K_HF_DEFAULT).unwrap();
        assert!(m.wavefunction().enclosed_probability() >= 0.999);
        assert!((m.lattice_normalisation() - 1.0).abs() < 0.01, "{}", m.lattice_normalisation());
    }

    #[test]
    fn transverse_diameter_is_one_over_e_point() {
        let p = WavefunctionParams::new(8.0, 10.0);
        let w = Wavefunction::new(&p).unwrap();
        // Pick a depth on a valley maximum so the slice is nonzero.
        let z = 2.0;
        let centre = w.density(&[0.0, 0.0, z]);
        let (mut lo, mut hi) = (0.0, 10.0);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if w.density(&[mid, 0.0, z]) > centre / std::f64::consts::E {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((2.0 * lo / 8.0 - 1.0).abs() < 0.02);
    }

    #[test]
    fn doubling_field_compresses_by_cube_root_two() {
        let a = Wavefunction::new(&WavefunctionParams::new(8.0, 10.0)).unwrap();
        let b = Wavefunction::new(&WavefunctionParams::new(8.0, 20.0)).unwrap();
        let r = a.mean_envelope_depth() / b.mean_envelope_depth();
        assert!((r - 2f64.cbrt()).abs() < 1e-6, "{r}");
    }

    #[test]
    fn zero_ppm_is_empty() {
        let s = sample_hyperfine(&WavefunctionParams::new(8.0, 10.0), 0.0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert!(s.sites.is_empty());
    }

    #[test]
    fn calibration_point() {
        let m = HyperfineModel::new(&WavefunctionParams::new(7.0, 10.0), K_HF_DEFAULT).unwrap();
        assert!((m.max_coupling() / 450.0 - 1.0).abs() < 0.01, "{}", m.max_coupling());
    }

    #[test]
    fn isotope_fraction_statistics() {
        let m = HyperfineModel::new(&WavefunctionParams::new(20.0, 10.0), K_HF_DEFAULT).unwrap();
        assert!(m.site_count() > 1_000_000);
        let n = m.site_count() as f64;
        let s = m.sample(800.0, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let p = 800e-6;
        let sigma = (n * p * (1.0 - p)).sqrt();
        assert!((s.sites.len() as f64 - n * p).abs() < 3.0 * sigma);
    }

    #[test]
    fn couplings_scale_with_prefactor_and_inverse_area() {
        let p = WavefunctionParams::new(8.0, 10.0);
        let a = HyperfineModel::new(&p, 1000.0).unwrap();
        let b = HyperfineModel::new(&p, 2000.0).unwrap();
        assert!((b.max_coupling() / a.max_coupling() - 2.0).abs() < 1e-12);
        let small = HyperfineModel::new(&WavefunctionParams::new(6.0, 10.0), 1000.0).unwrap();
        let big = HyperfineModel::new(&WavefunctionParams::new(12.0, 10.0), 1000.0).unwrap();
        // Peak density ∝ 1/d² at fixed vertical profile.
        let ratio = small.max_coupling() / big.max_coupling();
        assert!((ratio / 4.0 - 1.0).abs() < 0.05, "{ratio}");
    }

    #[test]
    fn small_box_rejected() {
        let mut p = WavefunctionParams::new(8.0, 10.0);
        p.region = Some(Region::new([-4.0, -4.0, 0.0], [4.0, 4.0, 10.0]));
        assert!(HyperfineModel::new(&p, K_HF_DEFAULT).is_err());
    }
}
