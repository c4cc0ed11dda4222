use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box, half-open on the upper faces. Coordinates in nm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Region {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Self {
        Self { min, max }
    }

    pub fn cube(side: f64) -> Self {
        Self::new([0.0; 3], [side; 3])
    }

    pub fn volume(&self) -> f64 {
        (0..3).map(|i| (self.max[i] - self.min[i]).max(0.0)).product()
    }

    pub fn contains(&self, p: &[f64; 3]) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] < self.max[i])
    }

    pub fn validate(&self) -> Result<()> {
        if (0..3).any(|i| !(self.min[i].is_finite() && self.max[i].is_finite()) || self.max[i] < self.min[i]) {
            return Err(Error::param("region bounds must be finite with max ≥ min"));
        }
        Ok(())
    }
}

/// Diamond-cubic basis in units of the cubic lattice constant.
pub const DIAMOND_BASIS: [[f64; 3]; 8] = [
    [0.0, 0.0, 0.0],
    [0.0, 0.5, 0.5],
    [0.5, 0.0, 0.5],
    [0.5, 0.5, 0.0],
    [0.25, 0.25, 0.25],
    [0.25, 0.75, 0.75],
    [0.75, 0.25, 0.75],
    [0.75, 0.75, 0.25],
];

/// Face-centred cubic basis in units of the cubic lattice constant.
pub const FCC_BASIS: [[f64; 3]; 4] = [
    [0.0, 0.0, 0.0],
    [0.0, 0.5, 0.5],
    [0.5, 0.0, 0.5],
    [0.5, 0.5, 0.0],
];

/// Every site of the lattice `basis + a·ℤ³` (anchored at the origin) that
/// falls inside `region`, in cell-major order.
pub fn lattice_sites(region: &Region, a: f64, basis: &[[f64; 3]]) -> Vec<[f64; 3]> {
    if region.volume() == 0.0 {
        return Vec::new();
    }
    let lo: Vec<i64> = (0..3).map(|i| (region.min[i] / a).floor() as i64 - 1).collect();
    let hi: Vec<i64> = (0..3).map(|i| (region.max[i] / a).ceil() as i64).collect();
    let mut out = Vec::new();
    for i in lo[0]..=hi[0] {
        for j in lo[1]..=hi[1] {
            for k in lo[2]..=hi[2] {
                for b in basis {
                    let p = [
                        (i as f64 + b[0]) * a,
                        (j as f64 + b[1]) * a,
                        (k as f64 + b[2]) * a,
                    ];
                    if region.contains(&p) {
                        out.push(p);
                    }
                }
            }
        }
    }
    out
}

/// Diamond-cubic sites (8 per conventional cell) inside `region`.
pub fn generate_lattice(region: &Region, lattice_constant: f64) -> Result<Vec<[f64; 3]>> {
    region.validate()?;
    if !(lattice_constant > 0.0) {
        return Err(Error::param("lattice constant must be positive"));
    }
    Ok(lattice_sites(region, lattice_constant, &DIAMOND_BASIS))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const A: f64 = 0.543;

    #[test]
    fn empty_region() {
        assert!(generate_lattice(&Region::cube(0.0), A).unwrap().is_empty());
    }

    #[test]
    fn commensurate_box_has_eight_per_cell() {
        let s = generate_lattice(&Region::cube(5.0 * A), A).unwrap();
        assert_eq!(s.len(), 8 * 125);
    }

    /// Independent count: each of the eight sublattices is a simple cubic
    /// lattice, so its count factorises over axes.
    fn sublattice_count(region: &Region) -> usize {
        DIAMOND_BASIS
            .iter()
            .map(|b| {
                (0..3)
                    .map(|i| {
                        let lo = (region.min[i] / A - b[i]).ceil() as i64;
                        let mut hi = (region.max[i] / A - b[i]).ceil() as i64 - 1;
                        if (hi as f64 + b[i]) * A >= region.max[i] {
                            hi -= 1;
                        }
                        (hi - lo + 1).max(0) as usize
                    })
                    .product::<usize>()
            })
            .sum()
    }

    #[test]
    fn twenty_nm_box_matches_counting_oracle() {
        let r = Region::cube(20.0);
        let n = generate_lattice(&r, A).unwrap().len();
        assert_eq!(n, sublattice_count(&r));
        // Surface terms bound the deviation from the bulk density.
        let bulk = 8.0 * r.volume() / A.powi(3);
        assert!((n as f64 - bulk).abs() < 8.0 * 3.0 * (20.0 / A).powi(2));
    }

    #[test]
    fn unit_volume_density_on_average() {
        // Averaged over box placement the count equals 8V/a³.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let trials = 4000;
        let mut total = 0usize;
        for _ in 0..trials {
            let o: [f64; 3] = [rng.random::<f64>() * A, rng.random::<f64>() * A, rng.random::<f64>() * A];
            let r = Region::new(o, [o[0] + 1.0, o[1] + 1.0, o[2] + 1.0]);
            let n = generate_lattice(&r, A).unwrap().len();
            assert_eq!(n, sublattice_count(&r));
            total += n;
        }
        let mean = total as f64 / trials as f64;
        let exact = 8.0 / A.powi(3);
        assert!((exact - 49.96).abs() < 0.01);
        assert!((mean - exact).abs() < 1.0, "{mean}");
    }
}
