use qrl_core::cavity_bloch::{
    integrate, ClosedForm, CavityBlochState, DrivePulse, ReadoutParams,
};
use qrl_core::readout::{photon_scaling, snr, voltage_difference};

#[test]
fn integrator_matches_closed_form_over_five_microseconds() {
    for t1 in [None, Some(900e-9)] {
        let p = ReadoutParams::default().with_t1(t1).unwrap();
        for sz in [1.0, -1.0] {
            let tr = integrate(&p, CavityBlochState::empty(sz), &DrivePulse::step(p.eps_m), p.default_dt(), 5e-6).unwrap();
            let cf = ClosedForm::new(&p, sz).unwrap();
            assert!(!cf.is_numeric());
            let scale_a = tr.values.iter().map(|s| s.a.norm()).fold(0.0, f64::max);
            let scale_n = tr.values.iter().map(|s| s.n).fold(0.0, f64::max);
            for (k, s) in tr.values.iter().enumerate().step_by(97) {
                let c = cf.at(tr.time(k)).unwrap().state;
                assert!((s.a - c.a).norm() <= 1e-6 * scale_a);
                assert!((s.asz - c.asz).norm() <= 1e-6 * scale_a);
                assert!((s.n - c.n).abs() <= 1e-6 * scale_n);
                assert!((s.sz - c.sz).abs() <= 1e-6);
            }
        }
    }
}

#[test]
fn difference_starts_at_zero_and_is_non_negative() {
    let p = ReadoutParams::default().with_t1(Some(900e-9)).unwrap();
    let d = voltage_difference(&p, 31.0, 0.5e-9, 2e-6).unwrap();
    assert_eq!(d.values[0], 0.0);
    assert!(d.values.iter().all(|&v| v >= 0.0));
}

#[test]
fn snr_and_photon_scaling_compose() {
    let s1 = snr(120e-9, 1e-13, 1.0).unwrap();
    let s2 = snr(240e-9, 1e-13, 1.0).unwrap();
    assert_eq!(s2, 2.0 * s1);
    let k = photon_scaling(s1, 1.0).unwrap();
    assert_eq!(k.n, k.k * k.k);
    assert!((snr(k.k * 120e-9, 1e-13, 1.0).unwrap() - 1.0).abs() < 1e-12);
}
