use chipgate::constants::AtomConstants;
use chipgate::gatedynamics::{linear_schedule, loss_adjusted_fidelity};
use chipgate::magnetostatics::{
    field_rect_local, field_rect_wire, field_rect_wire_jacobian, field_thin_wire, Vec3, WireSegment,
};
use chipgate::raman::{effective_coupling, light_shifts, LevelScheme};
use chipgate::twoatom::pair_list;
use chipgate::zeeman::{breit_rabi, breit_rabi_derivative, HyperfineState};
use proptest::prelude::*;
use std::f64::consts::PI;

const UM: f64 = 1e-6;

/// Eigenvalues of `A I·J + μ_B B (g_J J_z + g_I I_z)` in the block of
/// total projection `m` (J = 1/2), ascending.
fn hyperfine_block(c: &AtomConstants, m: f64, b: f64) -> Vec<f64> {
    let i = c.nuclear_spin;
    let a = c.hyperfine_energy() / (i + 0.5);
    let mu = c.bohr_magneton * b;
    let diag = |mj: f64| {
        let mi = m - mj;
        a * mi * mj + mu * (c.g_j * mj + c.g_i * mi)
    };
    let up_ok = (m - 0.5).abs() <= i;
    let down_ok = (m + 0.5).abs() <= i;
    match (up_ok, down_ok) {
        (true, true) => {
            // ⟨mJ=½, mI=m−½| A/2 (I₊J₋ + I₋J₊) |mJ=−½, mI=m+½⟩
            let mi = m - 0.5;
            let off = 0.5 * a * (i * (i + 1.0) - mi * (mi + 1.0)).sqrt();
            let (p, q) = (diag(0.5), diag(-0.5));
            let mean = 0.5 * (p + q);
            let r = (0.25 * (p - q).powi(2) + off * off).sqrt();
            vec![mean - r, mean + r]
        }
        (true, false) => vec![diag(0.5)],
        _ => vec![diag(-0.5)],
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn breit_rabi_matches_diagonalization(b in 0.0f64..2e-2, k in 0usize..8) {
        let c = AtomConstants::rb87();
        let s = HyperfineState::all()[k];
        let block = hyperfine_block(&c, f64::from(s.m_f()), b);
        let want = if s.f() == 2 { *block.last().unwrap() } else { block[0] };
        let got = breit_rabi(&c, s, b);
        prop_assert!((got - want).abs() <= 1e-9 * c.hyperfine_energy(), "{got} vs {want}");
        let h = 1e-7;
        let fd = (breit_rabi(&c, s, b + h) - breit_rabi(&c, s, (b - h).max(0.0))) / (b + h - (b - h).max(0.0));
        prop_assert!((breit_rabi_derivative(&c, s, b) - fd).abs() <= 1e-5 * c.bohr_magneton);
    }

    #[test]
    fn rect_field_symmetry_and_linearity(
        w in 0.2f64..2.0, h in 0.05f64..1.0, y in -3.0f64..3.0, z in 0.3f64..3.0, i in -0.1f64..0.1,
    ) {
        let (w, h, y, z) = (w * UM, h * UM, y * UM, z * UM + 0.5 * h * UM);
        let (bw, bh) = field_rect_local(w, h, i, y, z);
        let (mw, mh) = field_rect_local(w, h, i, -y, z);
        let (dw, dh) = field_rect_local(w, h, i, y, -z);
        let scale = bw.hypot(bh).max(1e-300);
        prop_assert!((bw - mw).abs() <= 1e-12 * scale);
        prop_assert!((bh + mh).abs() <= 1e-12 * scale);
        prop_assert!((bw + dw).abs() <= 1e-12 * scale);
        prop_assert!((bh - dh).abs() <= 1e-12 * scale);
        let (tw, th) = field_rect_local(w, h, 3.0 * i, y, z);
        prop_assert!((tw - 3.0 * bw).abs() <= 1e-12 * scale && (th - 3.0 * bh).abs() <= 1e-12 * scale);
    }

    #[test]
    fn rect_field_far_away_is_a_thin_wire(angle in 0.0f64..PI, r in 100.0f64..1000.0) {
        let (w, h) = (0.7 * UM, 0.2 * UM);
        let wire = WireSegment::new(Vec3::x(), Vec3::zeros(), w, h, 0.04).unwrap();
        let p = Vec3::new(0.0, r * w * angle.cos(), r * w * angle.sin());
        let b = field_rect_wire(&wire, &p).norm();
        let thin = field_thin_wire(0.04, p.norm()).unwrap();
        prop_assert!((b / thin - 1.0).abs() <= 1e-4);
    }

    #[test]
    fn field_jacobian_matches_differences(x in -2.0f64..2.0, y in -2.0f64..2.0, z in 0.3f64..2.0, turn in 0.0f64..PI) {
        let axis = Vec3::new(turn.cos(), turn.sin(), 0.0);
        let wire = WireSegment::new(axis, Vec3::new(0.1 * UM, -0.2 * UM, 0.0), 0.7 * UM, 0.2 * UM, 0.04).unwrap();
        let p = Vec3::new(x, y, z) * UM;
        let j = field_rect_wire_jacobian(&wire, &p);
        let d = 1e-4 * UM;
        let scale = j.norm();
        for k in 0..3 {
            let mut e = Vec3::zeros();
            e[k] = d;
            let fd = (field_rect_wire(&wire, &(p + e)) - field_rect_wire(&wire, &(p - e))) / (2.0 * d);
            prop_assert!((j.column(k) - fd).norm() <= 1e-6 * scale);
        }
        // curl-free and divergence-free outside the conductor
        prop_assert!(j.trace().abs() <= 1e-9 * scale);
        prop_assert!((j - j.transpose()).norm() <= 1e-9 * scale);
    }

    #[test]
    fn linear_schedules_stay_in_range(t0 in 1e-5f64..1e-2, t1 in 0.0f64..1e-2, u in 0.0f64..1.0) {
        let (hi, lo) = (2.3e-29, 9.5e-30);
        let s = linear_schedule(hi, lo, t0, t1).unwrap();
        let t = u * s.duration();
        let x = s.xi(t);
        prop_assert!((lo..=hi).contains(&x));
        prop_assert!((x - s.xi(s.duration() - t)).abs() <= 1e-9 * hi);
    }

    #[test]
    fn raman_scaling_laws(
        plus in 1.0f64..50.0, minus in 1.0f64..50.0, scale in 0.1f64..10.0, detuning in 0.5f64..5.0,
    ) {
        let two_pi = 2.0 * PI;
        let s = LevelScheme::rb87(3.23e-4, two_pi * plus * 1e6, two_pi * minus * 1e6, -two_pi * detuning * 1e9).unwrap();
        let t = LevelScheme { rabi_plus: s.rabi_plus * scale, ..s };
        let (a0, a1) = light_shifts(&s).unwrap();
        let (b0, b1) = light_shifts(&s.with_rabi_scale(scale)).unwrap();
        prop_assert!((b0 - scale * scale * a0).abs() <= 1e-12 * b0.abs());
        prop_assert!((b1 - scale * scale * a1).abs() <= 1e-12 * b1.abs());
        let w = effective_coupling(&s).unwrap();
        prop_assert!((effective_coupling(&t).unwrap() - w * scale).norm() <= 1e-12 * w.norm() * scale);
    }

    #[test]
    fn loss_never_helps(f in 0.5f64..1.0, t in 0.0f64..1.0, dt in 0.0f64..1.0, tau in 0.01f64..10.0) {
        let a = loss_adjusted_fidelity(f, t, tau, 2).unwrap();
        let b = loss_adjusted_fidelity(f, t + dt, tau, 2).unwrap();
        prop_assert!(b <= a && a <= f);
        prop_assert!(loss_adjusted_fidelity(f, t, tau, 1).unwrap() >= a);
    }

    #[test]
    fn pair_list_is_complete(n in 1usize..30) {
        let p = pair_list(n);
        prop_assert_eq!(p.len(), n * (n + 1) / 2);
        prop_assert!(p.iter().all(|&(a, b)| a <= b && b < n));
        let mut q = p.clone();
        q.dedup();
        prop_assert_eq!(q.len(), p.len());
    }
}
