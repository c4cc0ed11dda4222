use nucspin::pulse::*;
use nucspin::spin::{ChargeConfig, Channel, ElectronSpin, NuclearSpin, RotatingFrame, SpinSystemParams};
use proptest::prelude::*;

fn unloaded_start(p: &SpinSystemParams) -> PulseSequence {
    PulseSequence::new(
        RotatingFrame::bare(p),
        InitialCondition { charge_config: ChargeConfig::Empty, electron: ElectronSpin::Down, nucleus: NuclearSpin::Down },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn esr_without_electron_is_rejected(
        offset in -1.0f64..1.0,
        rabi in 1.0f64..500.0,
        duration in 0.01f64..100.0,
        wait in 0.0f64..1000.0,
    ) {
        let p = SpinSystemParams::default();
        let mut s = unloaded_start(&p);
        s.wait(wait);
        s.pulse(Pulse::new(Channel::Esr, p.f_e0() + offset, 0.0, rabi, duration));
        prop_assert!(s.validate().is_err());
    }

    #[test]
    fn esr_after_unload_is_rejected(t in 0.0f64..500.0) {
        let p = SpinSystemParams::default();
        let mut s = PulseSequence::new(RotatingFrame::bare(&p), InitialCondition::default());
        s.wait(t);
        s.charge(ChargeEvent::new(ChargeEventKind::Unload));
        s.pulse(Pulse::new(Channel::Esr, p.f_e0(), 0.0, 100.0, 1.0));
        prop_assert!(s.validate().is_err());
    }

    #[test]
    fn duration_is_sum_of_elements(t_load in 0.0f64..400.0, tau_extra in 1.0f64..1000.0, k in 0usize..40) {
        let p = SpinSystemParams::default();
        let st = ShuttleSettings::default();
        let tau_0 = t_load + tau_extra;
        let a = shuttle_ramsey_sequence(&p, t_load, tau_0, &st).unwrap();
        let sum: f64 = a.elements.iter().map(|e| e.duration()).sum();
        prop_assert_eq!(a.total_duration(), sum);
        let pulses = 2.0 * pi_half_duration(st.nmr_rabi);
        prop_assert!((a.total_duration() - (tau_0 + pulses)).abs() < 1e-9 * tau_0);
        let b = repeated_load_sequence(&p, k, 1250.0, &st).unwrap();
        let sum: f64 = b.elements.iter().map(|e| e.duration()).sum();
        prop_assert_eq!(b.total_duration(), sum);
    }

    #[test]
    fn builders_are_deterministic(phase in 0.0f64..360.0, nuc_up: bool) {
        let p = SpinSystemParams::default();
        let init = if nuc_up { NuclearSpin::Up } else { NuclearSpin::Down };
        let s = BellSettings { phi_n: phase, ..BellSettings::for_params(&p).with_init(init).with_basis(TomographyBasis::YY) };
        prop_assert_eq!(bell_circuit(&p, &s).unwrap(), bell_circuit(&p, &s).unwrap());
        let st = ShuttleSettings::default().with_phase(phase);
        prop_assert_eq!(
            repeated_load_sequence(&p, 3, 1250.0, &st).unwrap(),
            repeated_load_sequence(&p, 3, 1250.0, &st).unwrap()
        );
    }
}

#[test]
fn sequences_round_trip_through_toml() {
    let p = SpinSystemParams::default();
    let s = bell_circuit(&p, &BellSettings::for_params(&p).with_basis(TomographyBasis::XX)).unwrap();
    let text = s.to_toml().unwrap();
    assert_eq!(PulseSequence::from_toml(&text).unwrap(), s);
}

#[test]
fn builder_sequences_validate() {
    let p = SpinSystemParams::default();
    for basis in TomographyBasis::ALL {
        bell_circuit(&p, &BellSettings::for_params(&p).with_basis(basis)).unwrap().validate().unwrap();
    }
    let st = ShuttleSettings::default();
    shuttle_ramsey_sequence(&p, 10.0, 500.0, &st).unwrap().validate().unwrap();
    repeated_load_sequence(&p, 50, 1250.0, &st).unwrap().validate().unwrap();
    electron_shuttle_ramsey(&p, 1.0, &st).unwrap().validate().unwrap();
}
