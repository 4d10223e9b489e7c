use std::f64::consts::PI;

use qrl_core::phase_qubit::{
    coupling_g, coupling_g_harmonic, critical_bias, harmonic_matrix_element, matrix_element, shallow_count,
    solve_spectrum, solve_spectrum_auto, tune_bias_flux, CountingRule, CouplingParams, PhaseQubitParams,
};
use qrl_core::Error;

#[test]
fn shallow_count_never_grows_towards_critical_tilt() {
    let p = PhaseQubitParams::default();
    let phi_c = critical_bias(p.lambda()).unwrap();
    let biases: Vec<f64> = (0..24).map(|k| 4.95 + k as f64 * (phi_c - 1e-3 - 4.95) / 23.0).collect();
    let counts: Vec<usize> = biases
        .iter()
        .map(|&b| shallow_count(&p.with_reduced_bias(b), CountingRule::Localized).unwrap())
        .collect();
    assert!(counts.windows(2).all(|w| w[1] <= w[0]), "{counts:?}");
    assert!(counts[0] > 5 && *counts.last().unwrap() <= 1);
}

#[test]
fn tuned_bias_is_reproducible_and_has_target_count() {
    let p = PhaseQubitParams::default();
    let t = tune_bias_flux(&p, 5, CountingRule::Localized).unwrap();
    assert_eq!(t.spectrum.shallow_count, 5);
    let (lo, hi) = t.interval;
    assert!(lo < hi);
    let again = solve_spectrum_auto(&PhaseQubitParams { phi_p: t.phi_p, ..p }, 0.0).unwrap();
    assert_eq!(again.shallow_count, 5);
    assert_eq!(again.energies, t.spectrum.energies);
    for b in [lo + 1e-4, hi - 1e-4] {
        assert_eq!(shallow_count(&p.with_reduced_bias(b), CountingRule::Localized).unwrap(), 5);
    }
}

#[test]
fn harmonic_ladder_rule_tunes_inside_its_interval() {
    let p = PhaseQubitParams::default();
    let t = tune_bias_flux(&p, 5, CountingRule::HarmonicLadder).unwrap();
    let mid = 0.5 * (t.interval.0 + t.interval.1);
    assert_eq!(shallow_count(&p.with_reduced_bias(mid), CountingRule::HarmonicLadder).unwrap(), 5);
    assert!(t.qubit_frequency > 8e9 && t.qubit_frequency < 9.5e9);
}

#[test]
fn unreachable_count_is_infeasible_with_table() {
    let p = PhaseQubitParams::default();
    match tune_bias_flux(&p, 400, CountingRule::HarmonicLadder) {
        Err(Error::Infeasible(msg)) => assert!(msg.contains(':')),
        other => panic!("expected infeasibility, got {other:?}"),
    }
}

#[test]
fn qubit_frequency_converges_with_grid() {
    let p = PhaseQubitParams::default().with_reduced_bias(5.125);
    let coarse = solve_spectrum_auto(&p, 0.0).unwrap();
    let fine = solve_spectrum(&p, 0.0, &coarse.grid.refined()).unwrap();
    let finer = solve_spectrum(&p, 0.0, &coarse.grid.refined().refined()).unwrap();
    let f = [&coarse, &fine, &finer].map(|s| s.qubit_frequency().unwrap());
    let (d1, d2) = ((f[1] - f[0]).abs(), (f[2] - f[1]).abs());
    assert!(d2 < d1, "{f:?}");
    // second-order decay: each halving cuts the change by about four
    assert!(d1 / d2 > 3.0 && d1 / d2 < 5.0, "{}", d1 / d2);
    let s0 = coarse.shallow_levels();
    let s1 = fine.shallow_levels();
    for k in 0..2 {
        let (a, b) = (coarse.energies[s0[k]], fine.energies[s1[k]]);
        assert!(((a - b) / a).abs() < 1e-4);
    }
}

#[test]
fn exact_coupling_matches_harmonic_form_within_anharmonic_allowance() {
    let p = PhaseQubitParams::default().with_reduced_bias(5.125);
    let s = solve_spectrum_auto(&p, 0.0).unwrap();
    let f_q = s.qubit_frequency().unwrap();
    let cp = CouplingParams {
        m_qr: 8.3e-12,
        l_r: 1e-9,
        f_r: 6.19e9,
        f_q,
        matrix_element: matrix_element(&s).unwrap(),
        d_r: 8.6e-3,
    };
    cp.validate().unwrap();
    let exact = coupling_g(&cp, &p);
    let harmonic = coupling_g_harmonic(&cp, &p);
    assert!(((exact - harmonic) / harmonic).abs() < 0.15);
    assert!(cp.matrix_element > 0.0 && cp.matrix_element < PI);
    assert!(((cp.matrix_element - harmonic_matrix_element(&p, f_q)) / cp.matrix_element).abs() < 0.15);
}
