//! Gate dynamics: barrier schedules, propagation of the two-atom state in the
//! instantaneous eigenbasis, conditional phase, hold-time tuning and
//! infidelity.
//!
//! Amplitudes are propagated in the interaction picture with the barrier
//! height as integration variable: writing `c_i = a_i e^{-iΦ_i}` with
//! `Φ_i = ∫ε_i dt/ħ`, the coupled equations become
//! `da_i/dξ = -Σ_j C_ij e^{i(Φ_i-Φ_j)} a_j` and `dΦ_i/dξ = (ε_i/ħ) dt/dξ`.
//! Couplings between parity sectors vanish, so each sector runs on its own.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::constants::HBAR;
use crate::error::{Error, Result};
use crate::ode::{Integrator, Options};
use crate::quadrature::integrate_vec;
use crate::roots::brent_with;
use crate::spline::CubicSpline;
use crate::twoatom::{QubitMap, Slot, TrackSector, XiTrack};

/// Energies and ∂/∂ξ couplings along a barrier track, with the positions of
/// the four qubit states.
pub trait AdiabaticTrack: Sync {
    fn sectors(&self) -> &[TrackSector];
    /// Slots of gg, ge, eg, ee.
    fn qubits(&self) -> [Slot; 4];

    fn domain(&self) -> (f64, f64) {
        self.sectors().iter().fold((f64::NEG_INFINITY, f64::INFINITY), |(lo, hi), s| {
            let (a, b) = s.domain();
            (lo.max(a), hi.min(b))
        })
    }
}

impl AdiabaticTrack for XiTrack {
    fn sectors(&self) -> &[TrackSector] {
        &self.sectors
    }

    fn qubits(&self) -> [Slot; 4] {
        self.qubits
    }
}

/// A track assembled from tabulated sectors.
#[derive(Debug, Clone)]
pub struct TabulatedTrack {
    pub sectors: Vec<TrackSector>,
    pub qubits: [Slot; 4],
}

impl TabulatedTrack {
    pub fn new(sectors: Vec<TrackSector>, qubits: [Slot; 4]) -> Result<Self> {
        for q in &qubits {
            match sectors.get(q.sector) {
                Some(s) if q.rank < s.dim => {}
                _ => return Err(Error::invalid("qubits", "slot outside the sectors")),
            }
        }
        Ok(Self { sectors, qubits })
    }
}

impl AdiabaticTrack for TabulatedTrack {
    fn sectors(&self) -> &[TrackSector] {
        &self.sectors
    }

    fn qubits(&self) -> [Slot; 4] {
        self.qubits
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScheduleKind {
    Linear,
    Optimized { gamma: f64 },
}

impl ScheduleKind {
    pub fn name(&self) -> &'static str {
        match self {
            ScheduleKind::Linear => "linear",
            ScheduleKind::Optimized { .. } => "optimized",
        }
    }
}

#[derive(Debug, Clone)]
enum Ramp {
    Linear,
    /// `t(ξ)` for γ = 1 and `ln M(ξ)` with M the Min expression (J²).
    Optimized { unit_time: CubicSpline, log_min: CubicSpline },
}

/// Barrier height against time: ramp down over `[0, T₀]`, hold at `ξ_low`
/// for `T₁`, then the time mirror of the ramp.
#[derive(Debug, Clone)]
pub struct Schedule {
    pub kind: ScheduleKind,
    pub xi_high: f64,
    pub xi_low: f64,
    pub t0: f64,
    pub t1: f64,
    ramp: Ramp,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurrentSample {
    pub t: f64,
    pub xi: f64,
    pub i0: f64,
    pub alpha: f64,
}

/// Barrier decreasing linearly from `xi_high` to `xi_low` in `t0`.
pub fn linear_schedule(xi_high: f64, xi_low: f64, t0: f64, t1: f64) -> Result<Schedule> {
    if !(xi_low > 0.0 && xi_high > xi_low) {
        return Err(Error::invalid("xi", "need xi_high > xi_low > 0"));
    }
    if !(t0 > 0.0 && t0.is_finite()) {
        return Err(Error::invalid("t0", "must be positive"));
    }
    if !(t1 >= 0.0 && t1.is_finite()) {
        return Err(Error::invalid("t1", "must be non-negative"));
    }
    Ok(Schedule { kind: ScheduleKind::Linear, xi_high, xi_low, t0, t1, ramp: Ramp::Linear })
}

/// Ramp with `ħ dξ/dt = -γ Min_i |(ε_i - ε_ee)/C_i,ee|`, the minimum running
/// over the states of the ee sector whose coupling to ee is not identically
/// zero on the track. The minimum is tabulated on the track knots.
pub fn optimized_schedule(gamma: f64, track: &dyn AdiabaticTrack, t1: f64) -> Result<Schedule> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::invalid("gamma", "must be positive"));
    }
    if !(t1 >= 0.0 && t1.is_finite()) {
        return Err(Error::invalid("t1", "must be non-negative"));
    }
    let ee = track.qubits()[3];
    let sector = &track.sectors()[ee.sector];
    let (xi_low, xi_high) = track.domain();
    let knots: Vec<f64> = sector.knots().iter().copied().filter(|&x| x >= xi_low && x <= xi_high).collect();
    if knots.len() < 4 {
        return Err(Error::invalid("track", "too few knots for an optimized schedule"));
    }
    let n = sector.dim;
    let (mut e, mut c) = (vec![0.0; n], vec![0.0; n * n]);
    let mut active = vec![false; n];
    let mut table = Vec::with_capacity(knots.len());
    for &x in &knots {
        sector.energies_into(x, &mut e);
        sector.couplings_into(x, &mut c);
        for i in 0..n {
            active[i] |= i != ee.rank && c[i * n + ee.rank] != 0.0;
        }
        table.push((e.clone(), c.clone()));
    }
    if !active.iter().any(|&a| a) {
        return Err(Error::Degenerate("no state couples to ee along the track".into()));
    }
    let mut log_min = Vec::with_capacity(knots.len());
    for (x, (e, c)) in knots.iter().zip(&table) {
        let m = (0..n)
            .filter(|&i| active[i] && c[i * n + ee.rank] != 0.0)
            .map(|i| ((e[i] - e[ee.rank]) / c[i * n + ee.rank]).abs())
            .fold(f64::INFINITY, f64::min);
        if !(m.is_finite() && m > 0.0) {
            return Err(Error::Degenerate(format!("empty or zero coupling minimum at xi = {x:e} J")));
        }
        log_min.push(m.ln());
    }
    let log_min = CubicSpline::new(&knots, &log_min)?;
    // t(ξ) for γ = 1, integrated from the top of the ramp down through the knots
    let mut rate = |x: f64, _: &[f64], d: &mut [f64]| d[0] = -HBAR / log_min.eval(x).exp();
    let mut it = Integrator::new(Options { rtol: 1e-12, atol: 0.0, ..Options::default() });
    let mut t = [0.0];
    let mut times = vec![0.0; knots.len()];
    for k in (0..knots.len() - 1).rev() {
        it.advance(&mut rate, knots[k + 1], knots[k], &mut t)?;
        times[k] = t[0];
    }
    let unit_time = CubicSpline::new(&knots, &times)?;
    let t0 = times[0] / gamma;
    Ok(Schedule {
        kind: ScheduleKind::Optimized { gamma },
        xi_high,
        xi_low,
        t0,
        t1,
        ramp: Ramp::Optimized { unit_time, log_min },
    })
}

impl Schedule {
    /// Frozen barrier: no ramps, `t1` at `xi`.
    pub fn hold(xi: f64, t1: f64) -> Result<Self> {
        if !(xi > 0.0 && t1 >= 0.0 && t1.is_finite()) {
            return Err(Error::invalid("t1", "need xi > 0 and t1 >= 0"));
        }
        Ok(Self { kind: ScheduleKind::Linear, xi_high: xi, xi_low: xi, t0: 0.0, t1, ramp: Ramp::Linear })
    }

    /// `2T₀ + T₁`.
    pub fn duration(&self) -> f64 {
        2.0 * self.t0 + self.t1
    }

    pub fn with_hold(&self, t1: f64) -> Result<Self> {
        if !(t1 >= 0.0 && t1.is_finite()) {
            return Err(Error::invalid("t1", "must be non-negative"));
        }
        Ok(Self { t1, ..self.clone() })
    }

    /// Same ramp shape stretched to ramp time `t0`; for optimized ramps this
    /// rescales γ.
    pub fn with_ramp_time(&self, t0: f64) -> Result<Self> {
        if !(t0 > 0.0 && t0.is_finite()) || self.t0 == 0.0 {
            return Err(Error::invalid("t0", "must be positive on a ramped schedule"));
        }
        let kind = match self.kind {
            ScheduleKind::Linear => ScheduleKind::Linear,
            ScheduleKind::Optimized { gamma } => ScheduleKind::Optimized { gamma: gamma * self.t0 / t0 },
        };
        Ok(Self { kind, t0, ..self.clone() })
    }

    /// `dt/dξ` on the ramp-down (negative).
    pub fn dt_dxi(&self, xi: f64) -> f64 {
        match (&self.ramp, self.kind) {
            (Ramp::Optimized { log_min, .. }, ScheduleKind::Optimized { gamma }) => {
                -HBAR / (gamma * log_min.eval(xi).exp())
            }
            _ => -self.t0 / (self.xi_high - self.xi_low),
        }
    }

    /// Time on the ramp-down at which the barrier equals `xi`.
    fn ramp_time(&self, xi: f64) -> f64 {
        match (&self.ramp, self.kind) {
            (Ramp::Optimized { unit_time, .. }, ScheduleKind::Optimized { gamma }) => unit_time.eval(xi) / gamma,
            _ => self.t0 * (self.xi_high - xi) / (self.xi_high - self.xi_low),
        }
    }

    fn ramp_xi(&self, t: f64) -> f64 {
        if self.t0 == 0.0 {
            return self.xi_low;
        }
        let t = t.clamp(0.0, self.t0);
        match self.ramp {
            Ramp::Linear => self.xi_high - (self.xi_high - self.xi_low) * t / self.t0,
            Ramp::Optimized { .. } => {
                if t == 0.0 {
                    return self.xi_high;
                }
                if t == self.t0 {
                    return self.xi_low;
                }
                let span = self.xi_high - self.xi_low;
                brent_with(|x| Ok(self.ramp_time(x) - t), self.xi_low, self.xi_high, 1e-15 * span, 200)
                    .unwrap_or(self.xi_low)
            }
        }
    }

    /// ξ(t) over the whole gate; constant outside `[0, 2T₀+T₁]`.
    pub fn xi(&self, t: f64) -> f64 {
        if t <= self.t0 {
            self.ramp_xi(t)
        } else if t <= self.t0 + self.t1 {
            self.xi_low
        } else {
            self.ramp_xi(self.duration() - t)
        }
    }

    /// dξ/dt over the whole gate.
    pub fn xi_rate(&self, t: f64) -> f64 {
        if self.t0 == 0.0 || t < 0.0 || t > self.duration() || (t > self.t0 && t < self.t0 + self.t1) {
            return 0.0;
        }
        let down = 1.0 / self.dt_dxi(self.xi(t));
        if t <= self.t0 {
            down
        } else {
            -down
        }
    }

    /// `n + 1` evenly spaced `(t, ξ)` samples over the gate.
    pub fn samples(&self, n: usize) -> Vec<(f64, f64)> {
        let n = n.max(1);
        let d = self.duration();
        (0..=n).map(|k| d * k as f64 / n as f64).map(|t| (t, self.xi(t))).collect()
    }

    /// Currents realizing the schedule, interpolated from the track.
    pub fn current_track(&self, track: &XiTrack, n: usize) -> Result<Vec<CurrentSample>> {
        let (lo, hi) = track.domain();
        if self.xi_low < lo * (1.0 - 1e-9) || self.xi_high > hi * (1.0 + 1e-9) {
            return Err(Error::Domain("schedule leaves the precomputed track".into()));
        }
        Ok(self
            .samples(n)
            .into_iter()
            .map(|(t, xi)| {
                let (i0, alpha) = track.currents(xi);
                CurrentSample { t, xi, i0, alpha }
            })
            .collect())
    }

    fn check_track(&self, track: &dyn AdiabaticTrack) -> Result<()> {
        let (lo, hi) = track.domain();
        let slack = 1e-9 * hi.abs();
        if self.xi_low < lo - slack || self.xi_high > hi + slack {
            return Err(Error::Domain(format!(
                "schedule range [{:e}, {:e}] J outside the track [{lo:e}, {hi:e}] J",
                self.xi_low, self.xi_high
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Largest accepted |Σ|c_i|² − 1|.
    pub norm_tolerance: f64,
    pub max_steps: usize,
}

impl Default for PropagationOptions {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-12, norm_tolerance: 1e-8, max_steps: 2_000_000 }
    }
}

impl PropagationOptions {
    fn ode(&self) -> Options {
        Options { rtol: self.rtol, atol: self.atol, h_init: 0.0, max_steps: self.max_steps }
    }
}

/// Final state of one propagation, over the parity sector of the initial
/// state, in the eigenbasis at `ξ_high`.
#[derive(Debug, Clone)]
pub struct PropagationResult {
    pub label: &'static str,
    pub slot: Slot,
    pub amplitudes: Vec<Complex64>,
    /// Accumulated dynamical phases `∫ε_i dt/ħ`.
    pub phases: Vec<f64>,
    pub norm_drift: f64,
    pub duration: f64,
}

impl PropagationResult {
    /// Amplitude left on the initial state.
    pub fn survival(&self) -> Complex64 {
        self.amplitudes[self.slot.rank]
    }

    pub fn leakage(&self) -> f64 {
        1.0 - self.survival().norm_sqr()
    }
}

/// Interaction-picture state of several columns in one sector: phases
/// `Φ_i − E_ref t/ħ`, then the real and imaginary parts of each column.
struct SectorState<'a> {
    sector: &'a TrackSector,
    n: usize,
    cols: usize,
    e_ref: f64,
    y: Vec<f64>,
}

impl<'a> SectorState<'a> {
    fn new(sector: &'a TrackSector, columns: &[usize], e_ref: f64) -> Self {
        let n = sector.dim;
        let mut y = vec![0.0; n * (1 + 2 * columns.len())];
        for (c, &k) in columns.iter().enumerate() {
            y[n + 2 * n * c + k] = 1.0;
        }
        Self { sector, n, cols: columns.len(), e_ref, y }
    }

    /// Integrates from `from` to `to` in ξ with `dt/dξ = rate(ξ)`.
    fn ramp(&mut self, from: f64, to: f64, rate: &dyn Fn(f64) -> f64, opts: &PropagationOptions) -> Result<()> {
        let (n, cols, e_ref, sector) = (self.n, self.cols, self.e_ref, self.sector);
        let mut e = vec![0.0; n];
        let mut c = vec![0.0; n * n];
        let mut p = vec![Complex64::new(0.0, 0.0); n];
        let mut rhs = |x: f64, y: &[f64], d: &mut [f64]| {
            sector.energies_into(x, &mut e);
            sector.couplings_into(x, &mut c);
            let r = rate(x);
            for i in 0..n {
                d[i] = (e[i] - e_ref) / HBAR * r;
                p[i] = Complex64::from_polar(1.0, y[i]);
            }
            for col in 0..cols {
                let base = n + 2 * n * col;
                let (re, im) = (&y[base..base + n], &y[base + n..base + 2 * n]);
                for i in 0..n {
                    let mut s = Complex64::new(0.0, 0.0);
                    for j in 0..n {
                        let cij = c[i * n + j];
                        if cij != 0.0 {
                            s += cij * p[j].conj() * Complex64::new(re[j], im[j]);
                        }
                    }
                    let v = -p[i] * s;
                    d[base + i] = v.re;
                    d[base + n + i] = v.im;
                }
            }
        };
        let start = self.y[..n].to_vec();
        let mut it = Integrator::new(opts.ode());
        it.advance(&mut rhs, from, to, &mut self.y)?;
        // The phases are plain quadratures; redo them panel by panel between
        // the track knots, where the integrand is smooth.
        let (lo, hi) = (from.min(to), from.max(to));
        let mut cuts = vec![lo];
        cuts.extend(sector.knots().iter().copied().filter(|&x| x > lo && x < hi));
        cuts.push(hi);
        let sign = if to < from { -1.0 } else { 1.0 };
        let mut e = vec![0.0; n];
        let mut phase = start;
        for w in cuts.windows(2) {
            let mut g = |x: f64, out: &mut [f64]| {
                sector.energies_into(x, &mut e);
                let r = rate(x) / HBAR;
                for i in 0..n {
                    out[i] = (e[i] - e_ref) * r;
                }
            };
            let scale = {
                let mut v = vec![0.0; n];
                g(w[0], &mut v);
                v.iter().fold(0.0f64, |m, x| m.max(x.abs())) * (w[1] - w[0])
            };
            let part = integrate_vec(g, w[0], w[1], n, 1e-13 * scale.max(f64::MIN_POSITIVE))?;
            phase.iter_mut().zip(&part).for_each(|(p, v)| *p += sign * v);
        }
        self.y[..n].copy_from_slice(&phase);
        Ok(())
    }

    fn hold(&mut self, xi: f64, t: f64) {
        let e = self.sector.energies(xi);
        for i in 0..self.n {
            self.y[i] += (e[i] - self.e_ref) / HBAR * t;
        }
    }

    /// Schrödinger-picture amplitudes of column `col` after total time `t`.
    fn amplitudes(&self, col: usize, t: f64) -> Vec<Complex64> {
        let n = self.n;
        let base = n + 2 * n * col;
        let global = self.e_ref / HBAR * t;
        (0..n)
            .map(|i| Complex64::new(self.y[base + i], self.y[base + n + i]) * Complex64::from_polar(1.0, -(self.y[i] + global)))
            .collect()
    }

    fn phases(&self, t: f64) -> Vec<f64> {
        let global = self.e_ref / HBAR * t;
        self.y[..self.n].iter().map(|v| v + global).collect()
    }

    fn norm_drift(&self, col: usize) -> f64 {
        let n = self.n;
        let base = n + 2 * n * col;
        (self.y[base..base + 2 * n].iter().map(|v| v * v).sum::<f64>() - 1.0).abs()
    }
}

fn check_norm(drift: f64, opts: &PropagationOptions) -> Result<()> {
    if drift > opts.norm_tolerance || !drift.is_finite() {
        return Err(Error::Integration(format!("norm drift {drift:.3e} exceeds {:.1e}", opts.norm_tolerance)));
    }
    Ok(())
}

/// Propagates qubit state `label` (0..4 for gg, ge, eg, ee) through the whole
/// schedule: ramp down, hold and ramp up are integrated in turn.
pub fn propagate(
    schedule: &Schedule,
    label: usize,
    track: &dyn AdiabaticTrack,
    opts: &PropagationOptions,
) -> Result<PropagationResult> {
    if label >= 4 {
        return Err(Error::invalid("label", "qubit label index must be below 4"));
    }
    schedule.check_track(track)?;
    let slot = track.qubits()[label];
    let sector = &track.sectors()[slot.sector];
    let e_ref = sector.energies(schedule.xi_high)[slot.rank];
    let mut st = SectorState::new(sector, &[slot.rank], e_ref);
    if schedule.t0 > 0.0 {
        let down = |x: f64| schedule.dt_dxi(x);
        let up = |x: f64| -schedule.dt_dxi(x);
        st.ramp(schedule.xi_high, schedule.xi_low, &down, opts)?;
        st.hold(schedule.xi_low, schedule.t1);
        st.ramp(schedule.xi_low, schedule.xi_high, &up, opts)?;
    } else {
        st.hold(schedule.xi_low, schedule.t1);
    }
    let norm_drift = st.norm_drift(0);
    check_norm(norm_drift, opts)?;
    let t = schedule.duration();
    Ok(PropagationResult {
        label: QubitMap::LABELS[label],
        slot,
        amplitudes: st.amplitudes(0, t),
        phases: st.phases(t),
        norm_drift,
        duration: t,
    })
}

/// All four qubit states through the same schedule.
pub fn propagate_all(
    schedule: &Schedule,
    track: &dyn AdiabaticTrack,
    opts: &PropagationOptions,
) -> Result<[PropagationResult; 4]> {
    let v: Vec<PropagationResult> =
        (0..4).into_par_iter().map(|q| propagate(schedule, q, track, opts)).collect::<Result<_>>()?;
    Ok(v.try_into().expect("four results"))
}

/// Wraps into `(-π, π]`.
fn wrap(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

/// `arg[c_gg c_ee / (c_ge c_eg)]` in `[0, 2π)`, from the surviving amplitudes.
pub fn conditional_phase(results: &[PropagationResult; 4]) -> Result<f64> {
    phase_of([results[0].survival(), results[1].survival(), results[2].survival(), results[3].survival()])
}

fn phase_of(c: [Complex64; 4]) -> Result<f64> {
    if let Some(m) = c.iter().map(|z| z.norm()).find(|&m| !(m >= 0.5)) {
        return Err(Error::UnreliablePhase(m));
    }
    let z = c[0] * c[3] / (c[1] * c[2]);
    Ok(z.arg().rem_euclid(2.0 * PI))
}

/// `Σ (1 − |c_i|²)` over the four initial qubit states.
pub fn infidelity(results: &[PropagationResult; 4]) -> f64 {
    results.iter().map(|r| r.leakage()).sum()
}

/// Gate outcome as a function of the hold time for fixed ramps.
///
/// Because the ramp-up is the time mirror of the ramp-down, its propagator
/// in the real eigenbasis is the transpose of the ramp-down one, so
/// `c_x(t_f) = Σ_k U_kx² e^{-iε_k(ξ_low) T₁/ħ}`; only the ramp-down column
/// of each qubit state needs integrating.
#[derive(Debug, Clone)]
pub struct GateRun {
    pub schedule: Schedule,
    pub slots: [Slot; 4],
    /// Column of the ramp-down propagator per qubit state, in its sector.
    columns: [Vec<Complex64>; 4],
    /// Sector energies at ξ_low per qubit state.
    low_energies: [Vec<f64>; 4],
    /// Adiabatic (diagonal) phase combination accumulated on one ramp.
    ramp_phase: f64,
    pub norm_drift: f64,
}

impl GateRun {
    pub fn new(schedule: &Schedule, track: &dyn AdiabaticTrack, opts: &PropagationOptions) -> Result<Self> {
        if schedule.t0 <= 0.0 {
            return Err(Error::invalid("t0", "a gate run needs ramps"));
        }
        schedule.check_track(track)?;
        let slots = track.qubits();
        let sectors = track.sectors();
        let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
        for (q, s) in slots.iter().enumerate() {
            match groups.iter_mut().find(|g| g.0 == s.sector) {
                Some(g) => g.1.push(q),
                None => groups.push((s.sector, vec![q])),
            }
        }
        let down = |x: f64| schedule.dt_dxi(x);
        let runs: Vec<(Vec<usize>, Vec<Vec<Complex64>>, Vec<f64>, f64)> = groups
            .par_iter()
            .map(|(s, qs)| {
                let sector = &sectors[*s];
                let ranks: Vec<usize> = qs.iter().map(|&q| slots[q].rank).collect();
                let e_ref = sector.energies(schedule.xi_high)[ranks[0]];
                let mut st = SectorState::new(sector, &ranks, e_ref);
                st.ramp(schedule.xi_high, schedule.xi_low, &down, opts)?;
                let drift = (0..ranks.len()).map(|c| st.norm_drift(c)).fold(0.0, f64::max);
                let cols = (0..ranks.len()).map(|c| st.amplitudes(c, schedule.t0)).collect();
                Ok((qs.clone(), cols, st.phases(schedule.t0), drift))
            })
            .collect::<Result<_>>()?;
        let mut columns: [Vec<Complex64>; 4] = Default::default();
        let mut low_energies: [Vec<f64>; 4] = Default::default();
        let mut diag = [0.0; 4];
        let mut norm_drift: f64 = 0.0;
        for (qs, cols, phases, drift) in runs {
            norm_drift = norm_drift.max(drift);
            for (q, col) in qs.into_iter().zip(cols) {
                columns[q] = col;
                low_energies[q] = sectors[slots[q].sector].energies(schedule.xi_low);
                diag[q] = phases[slots[q].rank];
            }
        }
        check_norm(norm_drift, opts)?;
        let ramp_phase = -(diag[0] + diag[3] - diag[1] - diag[2]);
        Ok(Self { schedule: schedule.clone(), slots, columns, low_energies, ramp_phase, norm_drift })
    }

    /// Surviving amplitude of qubit state `q` after hold `t1`.
    pub fn amplitude(&self, q: usize, t1: f64) -> Complex64 {
        self.columns[q]
            .iter()
            .zip(&self.low_energies[q])
            .map(|(u, e)| u * u * Complex64::from_polar(1.0, -e * t1 / HBAR))
            .sum()
    }

    fn amplitudes(&self, t1: f64) -> [Complex64; 4] {
        [self.amplitude(0, t1), self.amplitude(1, t1), self.amplitude(2, t1), self.amplitude(3, t1)]
    }

    /// Conditional phase in `[0, 2π)` after hold `t1`.
    pub fn phase(&self, t1: f64) -> Result<f64> {
        phase_of(self.amplitudes(t1))
    }

    /// Rate of the conditional phase during the hold, `-(ε_gg+ε_ee-ε_ge-ε_eg)/ħ` at ξ_low.
    pub fn hold_rate(&self) -> f64 {
        let e = |q: usize| self.low_energies[q][self.slots[q].rank];
        -(e(0) + e(3) - e(1) - e(2)) / HBAR
    }

    /// Conditional phase continued through multiples of 2π, using the
    /// adiabatic phase as the reference branch.
    pub fn unwrapped_phase(&self, t1: f64) -> Result<f64> {
        let reference = 2.0 * self.ramp_phase + self.hold_rate() * t1;
        Ok(reference + wrap(self.phase(t1)? - reference))
    }

    pub fn infidelity(&self, t1: f64) -> f64 {
        self.amplitudes(t1).iter().map(|c| 1.0 - c.norm_sqr()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TunedHold {
    pub t1: f64,
    pub phase: f64,
    /// Phase evaluations used.
    pub evaluations: usize,
}

/// Shortest hold `T₁ ≥ 0` giving a conditional phase of π (mod 2π) within
/// `tolerance`, by Brent's method on the unwrapped phase.
pub fn tune_t1(run: &GateRun, tolerance: f64) -> Result<TunedHold> {
    let w = hold_rate_checked(run)?;
    let start = run.unwrapped_phase(0.0)?;
    // first odd multiple of π reached going forward in T₁
    let k = if w > 0.0 { ((start / PI - 1.0) / 2.0).ceil() } else { ((start / PI - 1.0) / 2.0).floor() };
    tune_t1_to(run, (2.0 * k + 1.0) * PI, tolerance)
}

fn hold_rate_checked(run: &GateRun) -> Result<f64> {
    let w = run.hold_rate();
    if w == 0.0 || !w.is_finite() {
        return Err(Error::Degenerate("no interaction phase accumulates during the hold".into()));
    }
    Ok(w)
}

/// Hold `T₁ ≥ 0` at which the unwrapped conditional phase reaches `target`,
/// an odd multiple of π.
pub fn tune_t1_to(run: &GateRun, target: f64, tolerance: f64) -> Result<TunedHold> {
    if !(tolerance > 0.0) {
        return Err(Error::invalid("tolerance", "must be positive"));
    }
    let w = hold_rate_checked(run)?;
    let mut evaluations = 1;
    let start = run.unwrapped_phase(0.0)?;
    if (target - start) * w < 0.0 {
        return Err(Error::Domain(format!("phase {target:.6} already passed during the ramps ({start:.6})")));
    }
    let mut f = |t1: f64| {
        evaluations += 1;
        Ok(run.unwrapped_phase(t1)? - target)
    };
    let half = 0.5 * PI / w.abs();
    let guess = (target - start) / w;
    let (lo, hi) = ((guess - half).max(0.0), guess + half);
    let root = brent_with(&mut f, lo, hi, 0.25 * tolerance / w.abs(), 200).map_err(|e| Error::NoConvergence {
        what: "hold-time tuning",
        detail: format!("{e}; phase {start:.6} at T1 = 0, target {target:.6}"),
    })?;
    let phase = run.phase(root)?;
    evaluations += 1;
    if (phase - PI).abs() > tolerance {
        return Err(Error::NoConvergence {
            what: "hold-time tuning",
            detail: format!("|phi - pi| = {:.3e} in [{lo:e}, {hi:e}] s", (phase - PI).abs()),
        });
    }
    Ok(TunedHold { t1: root, phase, evaluations })
}

/// A tuned gate of a given ramp shape.
#[derive(Debug, Clone, PartialEq)]
pub struct GatePoint {
    pub duration: f64,
    pub t0: f64,
    pub t1: f64,
    pub gamma: Option<f64>,
    /// Unwrapped conditional phase reached, an odd multiple of π.
    pub branch: f64,
    /// Conditional phase in [0, 2π).
    pub phase: f64,
    pub infidelity: f64,
    pub phase_error: f64,
    pub norm_drift: f64,
}

fn point_from(run: &GateRun, h: TunedHold, branch: f64) -> GatePoint {
    let s = &run.schedule;
    GatePoint {
        duration: 2.0 * s.t0 + h.t1,
        t0: s.t0,
        t1: h.t1,
        gamma: match s.kind {
            ScheduleKind::Optimized { gamma } => Some(gamma),
            ScheduleKind::Linear => None,
        },
        branch,
        phase: h.phase,
        infidelity: run.infidelity(h.t1),
        phase_error: (h.phase - PI).abs(),
        norm_drift: run.norm_drift,
    }
}

/// Tunes the hold of `template` (ramp as given) for a π phase.
pub fn tune_gate(
    template: &Schedule,
    track: &dyn AdiabaticTrack,
    tolerance: f64,
    opts: &PropagationOptions,
) -> Result<GatePoint> {
    let run = GateRun::new(template, track, opts)?;
    let h = tune_t1(&run, tolerance)?;
    let branch = run.unwrapped_phase(h.t1)?;
    Ok(point_from(&run, h, (branch / PI).round() * PI))
}

/// Stretches the ramps of `template` so that the tuned gate, `2T₀ + T₁`,
/// lasts `duration`. Among the phase branches π, 3π, … the lowest one that
/// fits is used, which gives the longest ramps.
pub fn gate_for_duration(
    template: &Schedule,
    duration: f64,
    track: &dyn AdiabaticTrack,
    tolerance: f64,
    opts: &PropagationOptions,
) -> Result<GatePoint> {
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::invalid("duration", "must be positive"));
    }
    let run = |t0: f64| GateRun::new(&template.with_ramp_time(t0)?, track, opts);
    let top = 0.5 * duration;
    let dir = hold_rate_checked(&run(top)?)?.signum();
    for m in 0..16 {
        let target = dir * (2 * m + 1) as f64 * PI;
        let point = |t0: f64| -> Result<GatePoint> {
            let r = run(t0)?;
            let h = tune_t1_to(&r, target, tolerance)?;
            Ok(point_from(&r, h, target))
        };
        let excess = |t0: f64| -> Result<f64> { Ok(point(t0)?.duration - duration) };
        // longest ramp on this branch: T₁ = 0 once the ramps alone reach the target
        let mut hi = top;
        if point(top).is_err() {
            let reached = |t0: f64| -> Result<f64> { Ok((run(t0)?.unwrapped_phase(0.0)? - target) * dir) };
            let mut lo = top;
            let mut found = false;
            for _ in 0..12 {
                lo *= 0.5;
                match reached(lo) {
                    Ok(v) if v < 0.0 => {
                        found = true;
                        break;
                    }
                    Ok(_) => {}
                    Err(_) => break,
                }
            }
            if !found {
                break;
            }
            let edge = brent_with(reached, lo, top, 1e-12 * duration, 200)?;
            if 2.0 * edge < duration * (1.0 - 1e-9) {
                continue;
            }
            // step just inside so that the tuned hold is non-negative
            hi = edge * (1.0 - 1e-9);
            if point(hi).is_err() {
                continue;
            }
        }
        let mut lo = None;
        let mut t = hi;
        for _ in 0..8 {
            t *= 0.5;
            match excess(t) {
                Ok(v) if v < 0.0 => {
                    lo = Some(t);
                    break;
                }
                Ok(_) => hi = t,
                Err(_) => break,
            }
        }
        let Some(lo) = lo else {
            break;
        };
        let t0 = brent_with(excess, lo, hi, 1e-10 * duration, 200)?;
        let p = point(t0)?;
        if (p.duration - duration).abs() <= 1e-6 * duration {
            return Ok(p);
        }
    }
    Err(Error::Domain(format!("no ramp gives a tuned gate of {duration:e} s")))
}

/// One scan row; failures are kept with their message.
#[derive(Debug, Clone)]
pub struct ScanRow {
    pub target: f64,
    pub result: std::result::Result<GatePoint, String>,
}

/// Infidelity against total gate duration, each point with its own ramp
/// time and tuned hold. Points run in parallel; order follows `durations`.
pub fn infidelity_scan(
    template: &Schedule,
    durations: &[f64],
    track: &dyn AdiabaticTrack,
    tolerance: f64,
    opts: &PropagationOptions,
) -> Vec<ScanRow> {
    durations
        .par_iter()
        .map(|&d| ScanRow {
            target: d,
            result: gate_for_duration(template, d, track, tolerance, opts).map_err(|e| e.to_string()),
        })
        .collect()
}

/// Gate fidelity times the survival probability of the atoms,
/// `F · exp(−channels · t_gate / τ)`.
pub fn loss_adjusted_fidelity(fidelity: f64, t_gate: f64, lifetime: f64, channels: u32) -> Result<f64> {
    if !(0.0..=1.0).contains(&fidelity) {
        return Err(Error::invalid("fidelity", "must lie in [0, 1]"));
    }
    if !(lifetime > 0.0) || !(t_gate >= 0.0) {
        return Err(Error::invalid("lifetime", "need lifetime > 0 and t_gate >= 0"));
    }
    if lifetime.is_infinite() {
        return Ok(fidelity);
    }
    Ok(fidelity * (-(channels as f64) * t_gate / lifetime).exp())
}
