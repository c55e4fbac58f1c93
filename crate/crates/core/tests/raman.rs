use chipgate::raman::*;
use chipgate::roots::maximize;
use chipgate::Error;
use num_complex::Complex64;
use std::f64::consts::PI;

const TWO_PI: f64 = 2.0 * PI;
const GAUSS: f64 = 1e-4;

fn base() -> LevelScheme {
    LevelScheme::rb87(3.23 * GAUSS, TWO_PI * 10e6, TWO_PI * 10e6, -TWO_PI * 1e9).unwrap()
}

/// Equal Rabi frequencies at `|Δ_A1| = k Ω`, compensated to resonance.
fn at_ratio(k: f64) -> LevelScheme {
    let omega = TWO_PI * 1e9 / k;
    LevelScheme::rb87(3.23 * GAUSS, omega, omega, -TWO_PI * 1e9).unwrap().compensated().unwrap()
}

fn populations(v: &[Complex64; 6]) -> (f64, f64, f64) {
    (v[0].norm_sqr(), v[1].norm_sqr(), v[2..].iter().map(|c| c.norm_sqr()).sum())
}

#[test]
fn detuning_identities() {
    let s = base();
    let d = detunings(&s);
    assert_eq!(d.a1, s.omega_a - s.omega_1 - s.laser_plus);
    assert_eq!(d.b1, s.omega_b - s.omega_1 - s.laser_minus);
    assert_eq!(d.d0, s.omega_d - s.omega_0 - s.laser_plus);
    let gap = s.omega_c - s.omega_a;
    assert!(((d.c1 - d.a1) - gap).abs() <= 1e-6 * gap);
    assert!(((d.c0 - d.a0) - gap).abs() <= 1e-6 * gap);
    // the excited hyperfine gap is about 800 MHz
    assert!(((d.c1 - d.a1) / (TWO_PI * 800e6) - 1.0).abs() < 0.03);
    assert!((d.a1 + TWO_PI * 1e9).abs() < 1.0);
    let on = LevelScheme { laser_plus: s.omega_a - s.omega_1, ..s };
    assert_eq!(detunings(&on).a1, 0.0);
    assert!(s.two_photon_detuning().abs() < 1e-6 * (s.omega_0 - s.omega_1));
}

#[test]
fn equal_detunings_cancel_the_coupling() {
    let s = base();
    // put C on top of A: both paths then carry the same detuning
    let degenerate = LevelScheme { omega_c: s.omega_a, ..s };
    let d = detunings(&degenerate);
    assert_eq!(d.a1, d.c1);
    assert_eq!(d.a0, d.c0);
    assert_eq!(effective_coupling(&degenerate).unwrap(), Complex64::new(0.0, 0.0));
    assert!(matches!(transfer_pulse_duration(&degenerate), Err(Error::Degenerate(_))));
}

#[test]
fn swapping_paths_flips_the_sign() {
    let s = base();
    // exchanging the A and C frequencies swaps the detunings of both pairs
    let swapped = LevelScheme { omega_a: s.omega_c, omega_c: s.omega_a, ..s };
    let (d, e) = (detunings(&s), detunings(&swapped));
    assert_eq!((e.a1, e.c1, e.a0, e.c0), (d.c1, d.a1, d.c0, d.a0));
    let w0 = effective_coupling(&s).unwrap();
    let w1 = effective_coupling(&swapped).unwrap();
    assert!(w0.re * w1.re < 0.0);
    assert!((w0 + w1).norm() <= 1e-12 * w0.norm());
}

#[test]
fn coupling_carries_the_relative_phase() {
    let s = LevelScheme { eta: 0.7, ..base() };
    let w = effective_coupling(&s).unwrap();
    let w0 = effective_coupling(&base()).unwrap();
    assert!((w.norm() - w0.norm()).abs() <= 1e-12 * w0.norm());
    let d = (w / w0).arg() - 0.7;
    assert!(d.abs() < 1e-12);
}

#[test]
fn light_shifts_are_quadratic() {
    let s = base();
    let (a0, a1) = light_shifts(&s).unwrap();
    let (b0, b1) = light_shifts(&s.with_rabi_scale(3.0)).unwrap();
    assert!((b0 / a0 - 9.0).abs() < 1e-12 && (b1 / a1 - 9.0).abs() < 1e-12);
    assert_eq!(light_shifts(&s.with_rabi_scale(0.0)).unwrap(), (0.0, 0.0));
    let w = effective_coupling(&s).unwrap();
    let w2 = effective_coupling(&s.with_rabi_scale(2.0)).unwrap();
    assert!((w2 / w - 4.0).norm() < 1e-12);
}

#[test]
fn compensation_zeroes_the_corrected_detuning() {
    let s = base().compensated().unwrap();
    let (d0, d1) = light_shifts(&s).unwrap();
    assert!(effective_detuning(&s).unwrap().abs() < 1e-6 * (d0 - d1).abs());
    assert!((s.two_photon_detuning() + d0 - d1).abs() < 1e-6 * (d0 - d1).abs());
}

#[test]
fn hamiltonian_is_hermitian() {
    for s in [base(), LevelScheme { eta: 1.3, ..base() }, at_ratio(20.0)] {
        let h = s.hamiltonian();
        assert_eq!(h, h.adjoint());
    }
}

#[test]
fn zero_driving_leaves_populations() {
    let s = base().with_rabi_scale(0.0);
    let init = [
        Complex64::new(0.6, 0.0),
        Complex64::new(0.0, 0.8),
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
    ];
    let v = full_six_level_propagate(&s, 2e-6, &init).unwrap();
    assert!((v[0].norm_sqr() - 0.36).abs() < 1e-10);
    assert!((v[1].norm_sqr() - 0.64).abs() < 1e-10);
}

#[test]
fn oracle_conserves_norm_and_keeps_excited_levels_empty() {
    let s = at_ratio(100.0);
    let t = transfer_pulse_duration(&s).unwrap();
    let series = oracle_time_series(&s, t, 40, 1).unwrap();
    let d = detunings(&s);
    let nearest = [d.a1, d.c1, d.a0, d.c0, d.b1, d.d0].iter().map(|x| x.abs()).fold(f64::INFINITY, f64::min);
    let ratio = s.rabi_plus.max(s.rabi_minus) / nearest;
    for x in &series {
        assert!((x.p0 + x.p1 + x.p_exc - 1.0).abs() < 1e-10);
        assert!(x.p_exc <= ratio * ratio, "{}", x.p_exc);
    }
}

#[test]
fn pi_pulse_swaps_the_clock_states() {
    let s = at_ratio(100.0);
    let t = transfer_pulse_duration(&s).unwrap();
    let v = full_six_level_propagate(&s, t, &unit_state(1)).unwrap();
    let (p0, _, _) = populations(&v);
    assert!(p0 >= 0.99, "{p0}");
    let back = full_six_level_propagate(&s, t, &unit_state(0)).unwrap();
    assert!(populations(&back).1 >= 0.99);
}

#[test]
fn doubling_the_drive_product_halves_the_pulse() {
    let s = base();
    let t = transfer_pulse_duration(&s).unwrap();
    let t2 = transfer_pulse_duration(&LevelScheme { rabi_plus: 2.0 * s.rabi_plus, ..s }).unwrap();
    assert!((t / t2 - 2.0).abs() < 1e-12);
}

fn relative_error(k: f64) -> f64 {
    let s = at_ratio(k);
    let oracle = oracle_rabi_frequency(&s).unwrap();
    let effective = effective_rabi_frequency(&s).unwrap();
    (oracle / effective - 1.0).abs()
}

#[test]
fn elimination_improves_with_detuning() {
    let errors: Vec<f64> = [20.0, 50.0, 100.0, 200.0].iter().map(|&k| relative_error(k)).collect();
    assert!(errors[2] <= 0.05, "{errors:?}");
    for w in errors.windows(2) {
        assert!(w[1] < w[0], "{errors:?}");
    }
}

#[test]
fn oracle_frequency_matches_the_dressed_splitting() {
    let s = at_ratio(100.0);
    let f = oracle_rabi_frequency(&s).unwrap();
    assert!((f / dressed_splitting(&s) - 1.0).abs() < 1e-3);
}

#[test]
fn shifted_resonance_maximizes_transfer() {
    let bare = base();
    let tuned = bare.compensated().unwrap();
    let shift = bare.laser_minus - tuned.laser_minus;
    let t = transfer_pulse_duration(&tuned).unwrap();
    let transfer = |x: f64| {
        let s = LevelScheme { laser_minus: bare.laser_minus - x, ..bare };
        full_six_level_propagate(&s, t, &unit_state(1)).unwrap()[0].norm_sqr()
    };
    let (best, p) = maximize(transfer, 0.0, 2.0 * shift, 1e-3 * shift.abs());
    assert!(p > 0.99);
    assert!((best - shift).abs() <= 0.05 * shift.abs(), "{best} vs {shift}");
}

#[test]
fn invalid_schemes() {
    let s = base();
    assert!(LevelScheme { rabi_plus: -1.0, ..s }.validate().is_err());
    assert!(LevelScheme { omega_c: s.omega_a - 1.0, ..s }.validate().is_err());
    assert!(LevelScheme { eta: f64::NAN, ..s }.validate().is_err());
    let on = LevelScheme { laser_plus: s.omega_a - s.omega_1, ..s };
    assert!(matches!(effective_coupling(&on), Err(Error::Domain(_))));
    assert!(full_six_level_propagate(&s, 0.0, &unit_state(0)).is_err());
    assert!(sideband_coupling(&s, 1.5).is_err());
    let sb = sideband_coupling(&s, 0.3).unwrap();
    assert!((sb / effective_coupling(&s).unwrap() - 0.3).norm() < 1e-15);
}
