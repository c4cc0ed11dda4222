use nucspin::hyperfine::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn lattice_sum_is_normalised(d in 3.0f64..12.0, f_z in 5.0f64..30.0, phase in 0.0f64..3.1) {
        let mut p = WavefunctionParams::new(d, f_z);
        p.valley_phase = phase;
        let m = HyperfineModel::new(&p, K_HF_DEFAULT).unwrap();
        prop_assert!((m.lattice_normalisation() - 1.0).abs() < 0.01);
    }

    #[test]
    fn density_is_non_negative_and_vanishes_outside_silicon(x in -10.0f64..10.0, y in -10.0f64..10.0, z in -5.0f64..15.0) {
        let p = WavefunctionParams::new(8.0, 10.0);
        let rho = wavefunction_density(&[x, y, z], &p).unwrap();
        prop_assert!(rho >= 0.0);
        if z <= 0.0 {
            prop_assert_eq!(rho, 0.0);
        }
    }
}

#[test]
fn draws_are_reproducible() {
    let m = HyperfineModel::new(&WavefunctionParams::new(8.0, 10.0), K_HF_DEFAULT).unwrap();
    assert_eq!(m.draws(800.0, 100.0, 200, 9).unwrap(), m.draws(800.0, 100.0, 200, 9).unwrap());
    let a = m.sample(800.0, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    let b = m.sample(800.0, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    assert_eq!(a.sites, b.sites);
}

#[test]
fn smaller_dots_raise_the_peak_coupling() {
    let a = HyperfineModel::new(&WavefunctionParams::new(5.0, 10.0), K_HF_DEFAULT).unwrap();
    let b = HyperfineModel::new(&WavefunctionParams::new(10.0, 10.0), K_HF_DEFAULT).unwrap();
    assert!(a.max_coupling() > 3.5 * b.max_coupling());
}

#[test]
fn count_scales_with_isotope_fraction() {
    let m = HyperfineModel::new(&WavefunctionParams::new(8.0, 10.0), K_HF_DEFAULT).unwrap();
    let lo = resolvable_count(&m, 400.0, 100.0, 2000, 1).unwrap();
    let hi = resolvable_count(&m, 800.0, 100.0, 2000, 1).unwrap();
    // The expectation is exactly ppm·10⁻⁶ times the number of qualifying sites.
    for (c, ppm) in [(lo, 400.0), (hi, 800.0)] {
        let want = ppm * 1e-6 * m.sites_at_least(100.0) as f64;
        assert!((c.mean - want).abs() < 4.0 * c.stderr, "{} vs {want}", c.mean);
    }
}

#[test]
fn probability_curves_are_nested() {
    let rows = probability_curves(&[4.0, 8.0], &[50.0, 150.0, 300.0], &CurveSettings { draws: 300, ..Default::default() }).unwrap();
    for d in [4.0, 8.0] {
        let p: Vec<f64> = rows.iter().filter(|r| r.diameter == d).map(|r| r.probability).collect();
        assert!(p.windows(2).all(|w| w[0] >= w[1]), "{p:?}");
    }
    let mut csv = Vec::new();
    write_probability_csv(&rows, &mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), rows.len() + 1);
}
