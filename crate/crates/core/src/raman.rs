//! Two-photon Raman coupling of the clock states |0⟩ = |F=2, m=1⟩ and
//! |1⟩ = |F=1, m=−1⟩ through the 5P₁/₂ sublevels A, B, C, D.
//!
//! All frequencies are angular (rad/s). Level order in state vectors is
//! `[0, 1, A, B, C, D]`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::constants::{AtomConstants, HBAR};
use crate::error::{Error, Result};
use crate::ode::{Integrator, Options};
use crate::roots::maximize;

pub const LEVELS: [&str; 6] = ["0", "1", "A", "B", "C", "D"];

/// 5P₁/₂ hyperfine splitting of ⁸⁷Rb (F′=2 above F′=1), Hz.
pub const RB87_P12_SPLITTING: f64 = 814.5e6;
/// 5S₁/₂ → 5P₁/₂ (D1) centroid frequency of ⁸⁷Rb, Hz.
pub const RB87_D1_FREQUENCY: f64 = 377.107_463_380e12;
/// 5P₁/₂ natural linewidth, Hz.
pub const RB87_P12_LINEWIDTH: f64 = 5.75e6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelScheme {
    pub omega_0: f64,
    pub omega_1: f64,
    pub omega_a: f64,
    pub omega_b: f64,
    pub omega_c: f64,
    pub omega_d: f64,
    pub rabi_plus: f64,
    pub rabi_minus: f64,
    pub laser_plus: f64,
    pub laser_minus: f64,
    /// η = η₊ − η₋.
    pub eta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetuningSet {
    pub a0: f64,
    pub a1: f64,
    pub c0: f64,
    pub c1: f64,
    pub d0: f64,
    pub b1: f64,
}

impl LevelScheme {
    /// ⁸⁷Rb levels at field `b` (tesla), with the σ₊ laser at detuning
    /// `delta_a1` from A and the σ₋ laser at bare two-photon resonance.
    /// Ground levels use the Breit–Rabi energies; the excited sublevels get
    /// their linear Zeeman shifts (g_F = ∓1/6 for F′ = 1, 2).
    pub fn rb87(b: f64, rabi_plus: f64, rabi_minus: f64, delta_a1: f64) -> Result<Self> {
        use crate::zeeman::{breit_rabi, HyperfineState};
        let atom = AtomConstants::rb87();
        let w = |e: f64| e / HBAR;
        let omega_0 = w(breit_rabi(&atom, HyperfineState::new(2, 1)?, b));
        let omega_1 = w(breit_rabi(&atom, HyperfineState::new(1, -1)?, b));
        let mu = atom.bohr_magneton * b / HBAR;
        let p1 = 2.0 * PI * (RB87_D1_FREQUENCY - 5.0 / 8.0 * RB87_P12_SPLITTING);
        let p2 = p1 + 2.0 * PI * RB87_P12_SPLITTING;
        let omega_a = p1;
        let omega_c = p2;
        let omega_b = p2 + mu * (1.0 / 6.0) * -2.0;
        let omega_d = p2 + mu * (1.0 / 6.0) * 2.0;
        let laser_plus = omega_a - omega_1 - delta_a1;
        let laser_minus = laser_plus - (omega_0 - omega_1);
        let s = Self {
            omega_0,
            omega_1,
            omega_a,
            omega_b,
            omega_c,
            omega_d,
            rabi_plus,
            rabi_minus,
            laser_plus,
            laser_minus,
            eta: 0.0,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.omega_0,
            self.omega_1,
            self.omega_a,
            self.omega_b,
            self.omega_c,
            self.omega_d,
            self.rabi_plus,
            self.rabi_minus,
            self.laser_plus,
            self.laser_minus,
            self.eta,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("level_scheme", "all frequencies must be finite"));
        }
        if !(self.omega_c > self.omega_a) {
            return Err(Error::invalid("omega_c", "must lie above omega_a"));
        }
        if self.rabi_plus < 0.0 || self.rabi_minus < 0.0 {
            return Err(Error::invalid("rabi", "Rabi frequencies must be non-negative"));
        }
        Ok(())
    }

    /// Both Rabi frequencies multiplied by `factor`.
    pub fn with_rabi_scale(&self, factor: f64) -> Self {
        Self { rabi_plus: self.rabi_plus * factor, rabi_minus: self.rabi_minus * factor, ..*self }
    }

    /// Bare two-photon detuning `(ω₀ − ω₁) − (ω₊ − ω₋)`.
    pub fn two_photon_detuning(&self) -> f64 {
        (self.omega_0 - self.omega_1) - (self.laser_plus - self.laser_minus)
    }

    /// Rotating-frame Hamiltonian over ħ. Level 1 rotates at ω₁, level 0 at
    /// ω₁ + ω₊ − ω₋; each excited level at the frame of the ground level it
    /// couples to plus the driving laser.
    pub fn hamiltonian(&self) -> DMatrix<Complex64> {
        let d = detunings(self);
        let dr = self.two_photon_detuning();
        let mut h = DMatrix::from_element(6, 6, Complex64::new(0.0, 0.0));
        let diag = [dr, 0.0, d.a1, d.b1, d.c1, d.d0 + dr];
        for (i, v) in diag.iter().enumerate() {
            h[(i, i)] = Complex64::new(*v, 0.0);
        }
        let plus = Complex64::from_polar(self.rabi_plus / (2.0 * 3f64.sqrt()), self.eta);
        let minus = Complex64::new(self.rabi_minus / 2.0, 0.0);
        // (row, column, element) of ⟨row|H|column⟩ for the absorption terms
        let terms = [
            (2, 1, plus),
            (4, 1, plus),
            (5, 0, -(2f64.sqrt()) * plus),
            (3, 1, 2f64.sqrt() * minus),
            (4, 0, minus),
            (2, 0, -minus),
        ];
        for (r, c, v) in terms {
            h[(r, c)] = v;
            h[(c, r)] = v.conj();
        }
        h
    }

    /// Copy with the σ₋ laser retuned so that the light-shift-corrected
    /// two-photon detuning vanishes.
    pub fn compensated(&self) -> Result<Self> {
        let mut s = *self;
        // resolution of detunings formed from optical frequencies
        let floor = 16.0 * f64::EPSILON * s.laser_plus.abs().max(s.omega_c.abs());
        for _ in 0..50 {
            let d = effective_detuning(&s)?;
            if d.abs() <= floor {
                return Ok(s);
            }
            // δ falls one-for-one as ω₋ is lowered
            s.laser_minus -= d;
        }
        let d = effective_detuning(&s)?;
        if d.abs() > floor {
            return Err(Error::NoConvergence { what: "two-photon resonance", detail: format!("residual {d:e} rad/s") });
        }
        Ok(s)
    }
}

pub fn detunings(s: &LevelScheme) -> DetuningSet {
    DetuningSet {
        a0: s.omega_a - s.omega_0 - s.laser_minus,
        a1: s.omega_a - s.omega_1 - s.laser_plus,
        c0: s.omega_c - s.omega_0 - s.laser_minus,
        c1: s.omega_c - s.omega_1 - s.laser_plus,
        d0: s.omega_d - s.omega_0 - s.laser_plus,
        b1: s.omega_b - s.omega_1 - s.laser_minus,
    }
}

fn nonzero(d: &[(f64, &str)]) -> Result<()> {
    for (v, name) in d {
        if *v == 0.0 {
            return Err(Error::Domain(format!("detuning {name} vanishes; adiabatic elimination is invalid")));
        }
    }
    Ok(())
}

/// Two-photon Rabi frequency of the |0⟩ ↔ |1⟩ transition,
/// `Ω₊Ω₋/(2√3) · [(1/Δ_A1 − 1/Δ_C1) + (1/Δ_A0 − 1/Δ_C0)]/2`, with phase η.
/// The effective Hamiltonian element ⟨0|H|1⟩ is ħ times half this value.
pub fn effective_coupling(s: &LevelScheme) -> Result<Complex64> {
    let d = detunings(s);
    nonzero(&[(d.a1, "A1"), (d.c1, "C1"), (d.a0, "A0"), (d.c0, "C0")])?;
    let bracket = ((1.0 / d.a1 - 1.0 / d.c1) + (1.0 / d.a0 - 1.0 / d.c0)) / 2.0;
    Ok(Complex64::from_polar(s.rabi_plus * s.rabi_minus / (2.0 * 3f64.sqrt()) * bracket, s.eta))
}

/// Second-order shifts (δ₀, δ₁) of |0⟩ and |1⟩.
pub fn light_shifts(s: &LevelScheme) -> Result<(f64, f64)> {
    let d = detunings(s);
    nonzero(&[(d.a1, "A1"), (d.c1, "C1"), (d.a0, "A0"), (d.c0, "C0"), (d.b1, "B1"), (d.d0, "D0")])?;
    let (p2, m2) = (s.rabi_plus * s.rabi_plus, s.rabi_minus * s.rabi_minus);
    let d1 = -(p2 / 12.0 * (1.0 / d.a1 + 1.0 / d.c1) + m2 / 2.0 / d.b1);
    let d0 = -(m2 / 4.0 * (1.0 / d.a0 + 1.0 / d.c0) + p2 / 6.0 / d.d0);
    Ok((d0, d1))
}

/// Light-shift-corrected two-photon detuning `δ_R + δ₀ − δ₁`.
pub fn effective_detuning(s: &LevelScheme) -> Result<f64> {
    let (d0, d1) = light_shifts(s)?;
    Ok(s.two_photon_detuning() + d0 - d1)
}

/// Generalized Rabi frequency `√(|Ω_eff|² + δ²)` of the effective model.
pub fn effective_rabi_frequency(s: &LevelScheme) -> Result<f64> {
    Ok(effective_coupling(s)?.norm().hypot(effective_detuning(s)?))
}

/// π-pulse length `π/|Ω_eff|` for the |0⟩ ↔ |1⟩ swap at compensated resonance.
pub fn transfer_pulse_duration(s: &LevelScheme) -> Result<f64> {
    let w = effective_coupling(s)?.norm();
    if w == 0.0 {
        return Err(Error::Degenerate("the A and C paths cancel; no Raman coupling".into()));
    }
    Ok(PI / w)
}

/// Coupling of the motional sideband |g1⟩ ↔ |e0⟩: the internal two-photon
/// Rabi frequency times a Franck–Condon factor.
pub fn sideband_coupling(s: &LevelScheme, franck_condon: f64) -> Result<Complex64> {
    if !(0.0..=1.0).contains(&franck_condon.abs()) {
        return Err(Error::invalid("franck_condon", "magnitude must not exceed 1"));
    }
    Ok(effective_coupling(s)? * franck_condon)
}

/// Populations at one instant of an oracle run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleSample {
    pub t: f64,
    pub p0: f64,
    pub p1: f64,
    pub p_exc: f64,
}

pub fn unit_state(level: usize) -> [Complex64; 6] {
    let mut v = [Complex64::new(0.0, 0.0); 6];
    v[level.min(5)] = Complex64::new(1.0, 0.0);
    v
}

/// Integrates the six-level rotating-frame Schrödinger equation and
/// reports the state at each of `times` (ascending, from 0).
pub fn six_level_trajectory(
    s: &LevelScheme,
    initial: &[Complex64; 6],
    times: &[f64],
    rtol: f64,
) -> Result<Vec<[Complex64; 6]>> {
    s.validate()?;
    let h = s.hamiltonian();
    let mut y = [0.0; 12];
    for i in 0..6 {
        y[i] = initial[i].re;
        y[6 + i] = initial[i].im;
    }
    // y' = −i H y
    let mut rhs = |_: f64, y: &[f64], d: &mut [f64]| {
        for i in 0..6 {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..6 {
                let hij = h[(i, j)];
                if hij.re != 0.0 || hij.im != 0.0 {
                    acc += hij * Complex64::new(y[j], y[6 + j]);
                }
            }
            d[i] = acc.im;
            d[6 + i] = -acc.re;
        }
    };
    let scale = h.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let mut it = Integrator::new(Options { rtol, atol: rtol * 1e-3, h_init: 1.0 / scale.max(1.0), max_steps: 50_000_000 });
    let mut out = Vec::with_capacity(times.len());
    let mut t = 0.0;
    for &tk in times {
        if tk < t {
            return Err(Error::invalid("times", "must be ascending from 0"));
        }
        it.advance(&mut rhs, t, tk, &mut y)?;
        t = tk;
        let mut v = [Complex64::new(0.0, 0.0); 6];
        for i in 0..6 {
            v[i] = Complex64::new(y[i], y[6 + i]);
        }
        out.push(v);
    }
    Ok(out)
}

/// Amplitudes over `[0, 1, A, B, C, D]` after `duration`.
pub fn full_six_level_propagate(s: &LevelScheme, duration: f64, initial: &[Complex64; 6]) -> Result<[Complex64; 6]> {
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::invalid("duration", "must be positive"));
    }
    Ok(six_level_trajectory(s, initial, &[duration], 1e-10)?[0])
}

/// Population time series of an oracle run from `initial`, `n + 1` samples.
pub fn oracle_time_series(s: &LevelScheme, duration: f64, n: usize, initial: usize) -> Result<Vec<OracleSample>> {
    let n = n.max(1);
    let times: Vec<f64> = (0..=n).map(|k| duration * k as f64 / n as f64).collect();
    let states = six_level_trajectory(s, &unit_state(initial), &times, 1e-10)?;
    Ok(times
        .iter()
        .zip(states)
        .map(|(&t, v)| OracleSample {
            t,
            p0: v[0].norm_sqr(),
            p1: v[1].norm_sqr(),
            p_exc: v[2..].iter().map(|c| c.norm_sqr()).sum(),
        })
        .collect())
}

/// Rabi frequency of the |1⟩ → |0⟩ population oscillation in the oracle,
/// from a least-squares fit of `P₀(t) = A sin²(Ω t / 2)` over about one
/// period sampled at 96 points.
pub fn oracle_rabi_frequency(s: &LevelScheme) -> Result<f64> {
    let guess = effective_rabi_frequency(s)?;
    if guess == 0.0 {
        return Err(Error::Degenerate("no Raman coupling to measure".into()));
    }
    let span = 1.2 * 2.0 * PI / guess;
    let samples = oracle_time_series(s, span, 96, 1)?;
    let fit = |w: f64| {
        let (mut sp, mut ss) = (0.0, 0.0);
        for x in &samples {
            let b = (0.5 * w * x.t).sin().powi(2);
            sp += x.p0 * b;
            ss += b * b;
        }
        let a = if ss > 0.0 { sp / ss } else { 0.0 };
        -samples.iter().map(|x| (x.p0 - a * (0.5 * w * x.t).sin().powi(2)).powi(2)).sum::<f64>()
    };
    let (w, _) = maximize(fit, 0.7 * guess, 1.3 * guess, 1e-12 * guess);
    Ok(w)
}

/// Exact eigenvalue splitting of the two dressed ground states; the
/// oscillation frequency the oracle should show.
pub fn dressed_splitting(s: &LevelScheme) -> f64 {
    let h = s.hamiltonian();
    let eig = h.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..6)
        .map(|k| {
            let v = eig.eigenvectors.column(k);
            (v[0].norm_sqr() + v[1].norm_sqr(), eig.eigenvalues[k])
        })
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    (pairs[0].1 - pairs[1].1).abs()
}

/// Natural linewidth over detuning, the figure of merit for spontaneous
/// emission during a Raman pulse.
pub fn linewidth_ratio(s: &LevelScheme) -> f64 {
    let d = detunings(s);
    2.0 * PI * RB87_P12_LINEWIDTH / d.a1.abs().min(d.c1.abs())
}
