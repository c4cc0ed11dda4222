use nucspin::fit::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn ramsey_data(seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.02).unwrap();
    let tau: Vec<f64> = (0..120).map(|i| i as f64 * 0.125).collect();
    let y = tau
        .iter()
        .map(|&t| 0.5 + 0.45 * (-(t / 6.6f64).powf(2.0)).exp() * (2.0 * std::f64::consts::PI * 0.6 * t).cos() + noise.sample(&mut rng))
        .collect();
    (tau, y)
}

#[test]
fn fits_are_deterministic() {
    let (tau, y) = ramsey_data(5);
    let a = fit_ramsey(&tau, &y).unwrap();
    let b = fit_ramsey(&tau, &y).unwrap();
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    assert!(a.covers("t2star", 6.6, 3.0), "{a:?}");
}

proptest! {
    #[test]
    fn coherence_is_symmetric_and_bounded(
        px in 0.0f64..=1.0, pmx in 0.0f64..=1.0, py in 0.0f64..=1.0, pmy in 0.0f64..=1.0
    ) {
        let c = coherence_metric(px, pmx, py, pmy).unwrap();
        let swapped = coherence_metric(py, pmy, px, pmx).unwrap();
        let reversed = coherence_metric(pmx, px, pmy, py).unwrap();
        prop_assert_eq!(c.value, swapped.value);
        prop_assert!((c.value - reversed.value).abs() < 1e-15);
        prop_assert!(c.value >= 0.0 && c.value <= 2f64.sqrt() + 1e-12);
        prop_assert_eq!(c.unphysical, c.value > 1.0 + 1e-12);
    }

    #[test]
    fn coherence_rejects_non_probabilities(p in prop_oneof![-1.0f64..-1e-9, 1.0f64 + 1e-9..2.0]) {
        prop_assert!(coherence_metric(p, 0.5, 0.5, 0.5).is_err());
        prop_assert!(coherence_metric(0.5, 0.5, 0.5, p).is_err());
    }
}

#[test]
fn pure_states_give_unit_coherence() {
    let c = coherence_metric(1.0, 0.0, 0.5, 0.5).unwrap();
    assert!((c.value - 1.0).abs() < 1e-15 && !c.unphysical);
    assert!(coherence_metric(1.0, 0.0, 1.0, 0.0).unwrap().unphysical);
}

#[test]
fn coherence_decay_recovers_rate() {
    let k: Vec<f64> = (0..=10).map(|i| 20.0 * i as f64).collect();
    let c: Vec<f64> = k.iter().map(|&k| 0.93 * (-0.0045 * k).exp()).collect();
    let r = fit_coherence_decay(&k, &c, None).unwrap();
    assert!((r.value("p_err") - 0.0045).abs() < 1e-9);
    assert!((r.value("c0") - 0.93).abs() < 1e-9);
    assert!(fit_coherence_decay(&k, &c, Some(&vec![0.0; k.len()])).is_err());
}

#[test]
fn esr_mixture_with_uneven_weights() {
    let truth = EsrMixture { f0: 1000.0, a1: 95.0, a2: 12.0, sigma: 4.0, weights: [0.55, 0.05, 0.3, 0.1] };
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let centres = truth.centres();
    let noise = Normal::new(0.0, truth.sigma).unwrap();
    let mut samples = Vec::new();
    for (c, w) in centres.iter().zip(truth.weights) {
        let n = (w * 4000.0) as usize;
        samples.extend((0..n).map(|_| c + noise.sample(&mut rng)));
    }
    let r = fit_esr_histogram(&samples).unwrap();
    let m = EsrMixture::from_result(&r);
    assert!(r.covers("f0", 1000.0, 4.0), "{r:?}");
    assert!(r.covers("a1", 95.0, 4.0), "{r:?}");
    assert!(r.covers("a2", 12.0, 4.0), "{r:?}");
    assert!(r.covers("sigma", 4.0, 4.0), "{r:?}");
    for (got, want) in m.weights.iter().zip(truth.weights) {
        assert!((got - want).abs() < 0.03, "{:?}", m.weights);
    }
    let (s1, s2) = m.flip_shifts();
    assert!((s1 - 190.0).abs() < 2.0 && (s2 - 24.0).abs() < 2.0);
}

#[test]
fn flip_interval_mean_is_recovered() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let exp = rand_distr::Exp::new(1.0 / 600.0).unwrap();
    let xs: Vec<f64> = (0..400).map(|_| exp.sample(&mut rng)).collect();
    let r = fit_flip_intervals(&xs).unwrap();
    let name = &r.parameters[0].name;
    assert!(r.covers(name, 600.0, 4.0), "{r:?}");
}

#[test]
fn hahn_without_decay_reports_infinite_t2() {
    let tau: Vec<f64> = (0..30).map(|i| i as f64).collect();
    let y = vec![0.9; 30];
    let r = fit_hahn(&tau, &y).unwrap();
    assert!(r.has_flag("infinite_t2"));
}
