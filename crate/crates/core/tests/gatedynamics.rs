use chipgate::constants::{khz_to_joule, HBAR};
use chipgate::gatedynamics::*;
use chipgate::twoatom::{Slot, TrackSector};
use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use std::f64::consts::PI;

const XI_LOW_KHZ: f64 = 14.4;
const XI_HIGH_KHZ: f64 = 35.4;

fn lo() -> f64 {
    khz_to_joule(XI_LOW_KHZ)
}

fn hi() -> f64 {
    khz_to_joule(XI_HIGH_KHZ)
}

/// One atom with three levels whose spacing shrinks as the barrier drops,
/// coupled by `strength / ξ`.
fn single_levels(xi: f64) -> [f64; 3] {
    let s = xi / hi();
    [0.0, khz_to_joule(4.0 + 2.0 * s), khz_to_joule(7.0 + 5.0 * s)]
}

fn single_coupling(xi: f64, strength: f64) -> [[f64; 3]; 3] {
    let c = strength / xi;
    [[0.0, c, 0.3 * c], [-c, 0.0, 0.8 * c], [-0.3 * c, -0.8 * c, 0.0]]
}

/// Two distinguishable atoms on independent copies of the single-atom
/// track, plus an interaction shift `u(ξ)` on every state with both atoms
/// excited above the ground level. State `|ab⟩` has rank `3a + b`.
fn product_track(strength: f64, interaction_khz: f64, knots: usize) -> TabulatedTrack {
    let xs: Vec<f64> = (0..knots).map(|k| lo() + (hi() - lo()) * k as f64 / (knots - 1) as f64).collect();
    let mut energies = vec![Vec::new(); 9];
    let mut couplings = vec![Vec::new(); 81];
    for &x in &xs {
        let e = single_levels(x);
        let c = single_coupling(x, strength);
        let u = khz_to_joule(interaction_khz) * (hi() / x).powi(2) * 0.2;
        for a in 0..3 {
            for b in 0..3 {
                let both = a > 0 && b > 0;
                energies[3 * a + b].push(e[a] + e[b] + if both { u } else { 0.0 });
                for a2 in 0..3 {
                    for b2 in 0..3 {
                        let mut v = 0.0;
                        if b == b2 {
                            v += c[a][a2];
                        }
                        if a == a2 {
                            v += c[b][b2];
                        }
                        couplings[(3 * a + b) * 9 + 3 * a2 + b2].push(v);
                    }
                }
            }
        }
    }
    let sector = TrackSector::from_samples(None, &xs, &energies, &couplings).unwrap();
    let slot = |rank| Slot { sector: 0, rank };
    TabulatedTrack::new(vec![sector], [slot(0), slot(1), slot(3), slot(4)]).unwrap()
}

fn track() -> TabulatedTrack {
    product_track(0.2, 1.0, 60)
}

fn opts() -> PropagationOptions {
    PropagationOptions::default()
}

#[test]
fn linear_schedule_shape() {
    let s = linear_schedule(hi(), lo(), 2e-3, 3e-3).unwrap();
    assert_eq!(s.duration(), 7e-3);
    assert!((s.xi(1e-3) - 0.5 * (hi() + lo())).abs() < 1e-12 * hi());
    for t in [2e-3, 3e-3, 4.5e-3, 5e-3] {
        assert_eq!(s.xi(t), lo());
        assert_eq!(s.xi_rate(t.min(4.9e-3).max(2.1e-3)), 0.0);
    }
    for dt in [0.1e-3, 0.7e-3, 1.9e-3] {
        assert!((s.xi(dt) - s.xi(7e-3 - dt)).abs() < 1e-12 * hi());
    }
    assert_eq!(s.xi(0.0), hi());
    assert_eq!(s.xi(7e-3), hi());
    assert!(s.xi_rate(0.5e-3) < 0.0 && s.xi_rate(6.5e-3) > 0.0);
}

#[test]
fn schedule_arguments_are_checked() {
    assert!(linear_schedule(lo(), hi(), 1e-3, 0.0).is_err());
    assert!(linear_schedule(hi(), lo(), 0.0, 0.0).is_err());
    assert!(linear_schedule(hi(), lo(), 1e-3, -1.0).is_err());
    assert!(optimized_schedule(0.0, &track(), 0.0).is_err());
    assert!(Schedule::hold(lo(), -1.0).is_err());
}

#[test]
fn halving_gamma_doubles_ramp_time() {
    let tr = track();
    let a = optimized_schedule(1.0, &tr, 0.0).unwrap();
    let b = optimized_schedule(0.5, &tr, 0.0).unwrap();
    assert!((b.t0 / a.t0 - 2.0).abs() < 1e-12);
    let c = a.with_ramp_time(2.0 * a.t0).unwrap();
    assert!(matches!(c.kind, ScheduleKind::Optimized { gamma } if (gamma - 0.5).abs() < 1e-12));
    // the optimized ramp is monotone and slowest where the gaps are smallest
    let mut prev = a.xi(0.0);
    for k in 1..=20 {
        let x = a.xi(a.t0 * k as f64 / 20.0);
        assert!(x <= prev);
        prev = x;
    }
    assert!((prev - lo()).abs() < 1e-9 * hi());
}

#[test]
fn frozen_barrier_accumulates_plain_phases() {
    let tr = track();
    let xi = 0.5 * (lo() + hi());
    let t = 3.7e-3;
    let s = Schedule::hold(xi, t).unwrap();
    let e = tr.sectors[0].energies(xi);
    for q in 0..4 {
        let r = propagate(&s, q, &tr, &opts()).unwrap();
        let rank = tr.qubits[q].rank;
        assert!((r.phases[rank] - e[rank] * t / HBAR).abs() < 1e-9 * (e[rank] * t / HBAR).abs().max(1.0));
        let want = Complex64::from_polar(1.0, -e[rank] * t / HBAR);
        assert!((r.survival() - want).norm() < 1e-9);
        assert!(r.leakage().abs() < 1e-12);
    }
}

#[test]
fn slow_ramps_are_adiabatic() {
    let tr = track();
    let s = linear_schedule(hi(), lo(), 50e-3, 1e-3).unwrap();
    let r = propagate_all(&s, &tr, &opts()).unwrap();
    assert!(infidelity(&r) < 1e-4, "{}", infidelity(&r));
}

#[test]
fn fast_ramps_leak() {
    let tr = track();
    let s = linear_schedule(hi(), lo(), 0.05e-3, 0.0).unwrap();
    let r = propagate_all(&s, &tr, &opts()).unwrap();
    assert!(infidelity(&r) > 1e-3, "{}", infidelity(&r));
}

#[test]
fn no_interaction_gives_no_conditional_phase() {
    let tr = product_track(0.2, 0.0, 60);
    for t0 in [0.1e-3, 0.4e-3, 2e-3] {
        let s = linear_schedule(hi(), lo(), t0, 1.3e-3).unwrap();
        let r = propagate_all(&s, &tr, &opts()).unwrap();
        assert!(infidelity(&r) > 0.0);
        let phi = conditional_phase(&r).unwrap();
        let d = phi.min(2.0 * PI - phi);
        assert!(d < 1e-8, "t0 = {t0}: phi = {phi}");
    }
}

#[test]
fn fast_path_matches_direct_propagation() {
    let tr = track();
    let s = linear_schedule(hi(), lo(), 0.3e-3, 0.0).unwrap();
    let run = GateRun::new(&s, &tr, &opts()).unwrap();
    for t1 in [0.0, 0.21e-3, 1.7e-3] {
        let direct = propagate_all(&s.with_hold(t1).unwrap(), &tr, &opts()).unwrap();
        for q in 0..4 {
            assert!((run.amplitude(q, t1) - direct[q].survival()).norm() < 1e-8);
        }
        let a = run.phase(t1).unwrap();
        let b = conditional_phase(&direct).unwrap();
        let d = (a - b).abs();
        assert!(d.min(2.0 * PI - d) < 1e-8);
        assert!((run.infidelity(t1) - infidelity(&direct)).abs() < 1e-8);
    }
}

#[test]
fn tuning_reaches_pi_quickly() {
    let tr = track();
    let s = linear_schedule(hi(), lo(), 1e-3, 0.0).unwrap();
    let run = GateRun::new(&s, &tr, &opts()).unwrap();
    for tol in [1e-4, 1e-8] {
        let h = tune_t1(&run, tol).unwrap();
        assert!((h.phase - PI).abs() <= tol);
        assert!(h.t1 >= 0.0);
        assert!(h.evaluations <= 40, "{} evaluations", h.evaluations);
    }
    let g = tune_gate(&s, &tr, 1e-8, &opts()).unwrap();
    assert!(g.phase_error <= 1e-8);
    assert!((g.duration - (2.0 * g.t0 + g.t1)).abs() < 1e-15);
    assert!((g.branch / PI).round() as i64 % 2 != 0);
}

#[test]
fn results_are_robust_to_tolerances() {
    let tr = track();
    let s = linear_schedule(hi(), lo(), 0.3e-3, 0.0).unwrap();
    let loose = tune_gate(&s, &tr, 1e-8, &opts()).unwrap();
    let tight = tune_gate(&s, &tr, 1e-8, &PropagationOptions { rtol: 1e-12, atol: 1e-14, ..opts() }).unwrap();
    assert!((loose.infidelity / tight.infidelity - 1.0).abs() < 0.01);
    assert!((loose.t1 / tight.t1 - 1.0).abs() < 1e-6);
}

#[test]
fn norm_is_conserved() {
    let tr = track();
    for t0 in [0.05e-3, 0.5e-3, 5e-3] {
        let s = linear_schedule(hi(), lo(), t0, 0.5e-3).unwrap();
        for r in propagate_all(&s, &tr, &opts()).unwrap() {
            assert!(r.norm_drift <= 1e-8);
            let n: f64 = r.amplitudes.iter().map(|c| c.norm_sqr()).sum();
            assert!((n - 1.0).abs() <= 1e-8);
        }
    }
}

#[test]
fn gauge_changes_leave_observables() {
    let tr = track();
    let mut rng = StdRng::seed_from_u64(7);
    let signs: Vec<f64> = (0..9).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
    let flipped = TabulatedTrack::new(vec![tr.sectors[0].regauged(&signs)], tr.qubits).unwrap();
    let s = linear_schedule(hi(), lo(), 0.2e-3, 0.9e-3).unwrap();
    let a = propagate_all(&s, &tr, &opts()).unwrap();
    let b = propagate_all(&s, &flipped, &opts()).unwrap();
    for q in 0..4 {
        for (x, y) in a[q].amplitudes.iter().zip(&b[q].amplitudes) {
            assert!((x.norm() - y.norm()).abs() < 1e-8);
        }
    }
    let d = (conditional_phase(&a).unwrap() - conditional_phase(&b).unwrap()).abs();
    assert!(d.min(2.0 * PI - d) < 1e-8);
}

#[test]
fn scan_keeps_order_and_reports_infeasible_points() {
    let tr = track();
    let s = linear_schedule(hi(), lo(), 1e-3, 0.0).unwrap();
    let run = GateRun::new(&s, &tr, &opts()).unwrap();
    let bare = PI / run.hold_rate().abs();
    let durations = [0.5 * bare, 6.0 * bare, 9.0 * bare, 4.0 * bare];
    let rows = infidelity_scan(&s, &durations, &tr, 1e-8, &opts());
    assert_eq!(rows.iter().map(|r| r.target).collect::<Vec<_>>(), durations);
    assert!(rows[0].result.is_err());
    for r in &rows[1..] {
        let p = r.result.as_ref().unwrap();
        assert!((p.duration - r.target).abs() <= 1e-6 * r.target);
        assert!(p.phase_error <= 1e-8);
    }
}

#[test]
fn propagation_errors() {
    let tr = track();
    let s = linear_schedule(hi(), lo(), 1e-3, 0.0).unwrap();
    assert!(propagate(&s, 4, &tr, &opts()).is_err());
    let outside = linear_schedule(2.0 * hi(), lo(), 1e-3, 0.0).unwrap();
    assert!(matches!(propagate(&outside, 0, &tr, &opts()), Err(chipgate::Error::Domain(_))));
    assert!(GateRun::new(&Schedule::hold(lo(), 1e-3).unwrap(), &tr, &opts()).is_err());
}

#[test]
fn heavy_leakage_makes_the_phase_unreliable() {
    let tr = product_track(2.0, 1.0, 60);
    let s = linear_schedule(hi(), lo(), 0.01e-3, 0.13e-3).unwrap();
    let r = propagate_all(&s, &tr, &opts()).unwrap();
    assert!(r.iter().any(|x| x.survival().norm() < 0.5));
    assert!(matches!(conditional_phase(&r), Err(chipgate::Error::UnreliablePhase(_))));
}

#[test]
fn loss_model() {
    assert_eq!(loss_adjusted_fidelity(0.99, 1e-3, f64::INFINITY, 2).unwrap(), 0.99);
    assert_eq!(loss_adjusted_fidelity(0.99, 0.0, 1.0, 2).unwrap(), 0.99);
    assert_eq!(loss_adjusted_fidelity(0.99, 1e-3, 1.0, 0).unwrap(), 0.99);
    let one = loss_adjusted_fidelity(1.0, 0.1, 1.0, 1).unwrap();
    let two = loss_adjusted_fidelity(1.0, 0.1, 1.0, 2).unwrap();
    assert!((two - one * one).abs() < 1e-15);
    assert!(loss_adjusted_fidelity(1.1, 0.1, 1.0, 1).is_err());
    assert!(loss_adjusted_fidelity(0.9, 0.1, 0.0, 1).is_err());
}
