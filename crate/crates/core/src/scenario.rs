//! Scenario files: nested TOML documents describing one simulation setup.

#![allow(non_snake_case)]

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::constants::{khz_to_joule, AtomConstants, GAUSS, MICRON, MILLIAMP};
use crate::error::{Error, Result};
use crate::gatedynamics::PropagationOptions;
use crate::magnetostatics::{LayoutParams, Vec3};
use crate::raman::LevelScheme;
use crate::twoatom::TrackConfig;

/// Deserializes a TOML document, mapping failures to a line/column parse error.
pub fn parse_toml<T: DeserializeOwned>(text: &str) -> Result<T> {
    if text.trim().is_empty() {
        return Err(Error::Parse { line: 1, column: 1, message: "empty document".into() });
    }
    toml::from_str(text).map_err(|e| {
        let (line, column) = match e.span() {
            Some(span) => line_column(text, span.start),
            None => (1, 1),
        };
        Error::Parse { line, column, message: e.message().trim().to_string() }
    })
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(before.chars().count(), |i| before[i + 1..].chars().count()) + 1;
    (line, column)
}

/// One simulation setup. Keys carry their unit as a suffix; everything is
/// converted to SI by the accessor methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    pub layout: LayoutSection,
    /// Atom constants file, relative to the scenario file. When absent the
    /// `CHIPGATE_CONSTANTS` override or the shipped table is used.
    #[serde(default)]
    pub constants: Option<PathBuf>,
    #[serde(default)]
    pub numerics: NumericsSection,
    #[serde(default)]
    pub field: FieldSection,
    #[serde(default)]
    pub track: TrackSection,
    #[serde(default)]
    pub schedule: ScheduleSection,
    #[serde(default)]
    pub raman: RamanSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutSection {
    pub i0_mA: f64,
    pub alpha: f64,
    pub bias_x_G: f64,
    pub bias_y_G: f64,
    pub width_um: f64,
    pub height_um: f64,
    pub quadrupole_depth_um: f64,
    pub side_separation_um: f64,
    pub side_center_z_um: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumericsSection {
    /// Points of the 1D grid along x′.
    pub grid_points: usize,
    pub window_um: f64,
    pub n_modes: usize,
    pub sector_states: usize,
    /// Nodes of the ξ track.
    pub track_points: usize,
    pub rtol: f64,
    pub atol: f64,
    /// Tolerance on the conditional phase when tuning T₁ (rad).
    pub phase_tolerance: f64,
    /// Points of the exported potential curve.
    pub curve_points: usize,
    /// Rows of the spectrum table.
    pub spectrum_points: usize,
    /// Two-atom states listed per row of the spectrum table.
    pub spectrum_states: usize,
}

impl Default for NumericsSection {
    fn default() -> Self {
        Self {
            grid_points: 2048,
            window_um: 6.0,
            n_modes: 12,
            sector_states: 11,
            track_points: 200,
            rtol: 1e-10,
            atol: 1e-12,
            phase_tolerance: 1e-6,
            curve_points: 401,
            spectrum_points: 41,
            spectrum_states: 6,
        }
    }
}

/// Rectangular grid of the field map: `[start, stop, count]` per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FieldSection {
    pub x_um: (f64, f64, usize),
    pub y_um: (f64, f64, usize),
    pub z_um: (f64, f64, usize),
}

impl Default for FieldSection {
    fn default() -> Self {
        Self { x_um: (-1.5, 1.5, 31), y_um: (0.0, 0.0, 1), z_um: (0.5, 2.0, 16) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrackSection {
    pub xi_high_kHz: f64,
    pub xi_low_kHz: f64,
    /// |B| kept at the minima while the barrier changes.
    pub b_min_G: f64,
}

impl Default for TrackSection {
    fn default() -> Self {
        Self { xi_high_kHz: 35.4, xi_low_kHz: 14.4, b_min_G: 3.23 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RampKind {
    Linear,
    Optimized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleSection {
    pub kind: RampKind,
    /// Speed factor of the optimized ramp.
    pub gamma: f64,
    /// Ramp time of the linear schedule. For the optimized schedule it
    /// overrides `gamma` when set.
    pub t0_ms: Option<f64>,
    pub t1_seed_ms: f64,
    pub durations_ms: Vec<f64>,
}

impl Default for ScheduleSection {
    fn default() -> Self {
        Self { kind: RampKind::Linear, gamma: 1.0, t0_ms: Some(1.0), t1_seed_ms: 0.0, durations_ms: Vec::new() }
    }
}

/// Rabi frequencies and detunings are given as ordinary frequencies (Ω/2π).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RamanSection {
    pub b_G: f64,
    pub rabi_plus_MHz: f64,
    pub rabi_minus_MHz: f64,
    pub delta_a1_GHz: f64,
    pub eta_rad: f64,
    /// Shift the σ₋ laser to cancel the light shifts.
    pub compensate: bool,
    pub franck_condon: f64,
    /// Rows of the oracle time series; 0 skips the full integration.
    pub oracle_samples: usize,
    /// Length of the oracle run in units of the π-pulse time.
    pub oracle_pulses: f64,
}

impl Default for RamanSection {
    fn default() -> Self {
        Self {
            b_G: 3.23,
            rabi_plus_MHz: 10.0,
            rabi_minus_MHz: 10.0,
            delta_a1_GHz: -1.0,
            eta_rad: 0.0,
            compensate: true,
            franck_condon: 1.0,
            oracle_samples: 0,
            oracle_pulses: 2.0,
        }
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be positive, got {v}")))
    }
}

fn finite(field: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(field, "must be finite"))
    }
}

fn in_range(field: &str, v: f64, lo: f64, hi: f64) -> Result<()> {
    if v >= lo && v <= hi {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must lie in [{lo:e}, {hi:e}], got {v:e}")))
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let l = &self.layout;
        positive("layout.i0_mA", l.i0_mA)?;
        positive("layout.alpha", l.alpha)?;
        finite("layout.bias_x_G", l.bias_x_G)?;
        finite("layout.bias_y_G", l.bias_y_G)?;
        positive("layout.width_um", l.width_um)?;
        positive("layout.height_um", l.height_um)?;
        positive("layout.quadrupole_depth_um", l.quadrupole_depth_um)?;
        positive("layout.side_separation_um", l.side_separation_um)?;
        finite("layout.side_center_z_um", l.side_center_z_um)?;

        let n = &self.numerics;
        if n.grid_points < 64 || n.grid_points % 2 != 0 {
            return Err(Error::invalid("numerics.grid_points", "must be even and at least 64"));
        }
        positive("numerics.window_um", n.window_um)?;
        if n.n_modes < 4 {
            return Err(Error::invalid("numerics.n_modes", "need at least 4"));
        }
        if n.sector_states == 0 {
            return Err(Error::invalid("numerics.sector_states", "must be positive"));
        }
        if n.track_points < 3 {
            return Err(Error::invalid("numerics.track_points", "need at least 3"));
        }
        in_range("numerics.rtol", n.rtol, 1e-14, 1e-4)?;
        in_range("numerics.atol", n.atol, 1e-16, 1e-4)?;
        in_range("numerics.phase_tolerance", n.phase_tolerance, 1e-12, 1e-2)?;
        if n.curve_points < 3 {
            return Err(Error::invalid("numerics.curve_points", "need at least 3"));
        }
        if n.spectrum_points < 2 {
            return Err(Error::invalid("numerics.spectrum_points", "need at least 2"));
        }
        if n.spectrum_states == 0 {
            return Err(Error::invalid("numerics.spectrum_states", "must be positive"));
        }

        for (name, (a, b, k)) in [("field.x_um", self.field.x_um), ("field.y_um", self.field.y_um), ("field.z_um", self.field.z_um)] {
            finite(name, a)?;
            finite(name, b)?;
            if k == 0 || (k == 1 && a != b) {
                return Err(Error::invalid(name, "need a positive count (1 only when start = stop)"));
            }
        }

        let t = &self.track;
        positive("track.xi_low_kHz", t.xi_low_kHz)?;
        positive("track.b_min_G", t.b_min_G)?;
        if !(t.xi_high_kHz > t.xi_low_kHz) || !t.xi_high_kHz.is_finite() {
            return Err(Error::invalid("track.xi_high_kHz", "must exceed xi_low_kHz"));
        }

        let s = &self.schedule;
        positive("schedule.gamma", s.gamma)?;
        if let Some(t0) = s.t0_ms {
            positive("schedule.t0_ms", t0)?;
        }
        if s.kind == RampKind::Linear && s.t0_ms.is_none() {
            return Err(Error::invalid("schedule.t0_ms", "required for the linear schedule"));
        }
        if !(s.t1_seed_ms >= 0.0 && s.t1_seed_ms.is_finite()) {
            return Err(Error::invalid("schedule.t1_seed_ms", "must be non-negative"));
        }
        for &d in &s.durations_ms {
            positive("schedule.durations_ms", d)?;
        }

        let r = &self.raman;
        positive("raman.b_G", r.b_G)?;
        if !(r.rabi_plus_MHz >= 0.0 && r.rabi_minus_MHz >= 0.0) {
            return Err(Error::invalid("raman.rabi_plus_MHz", "Rabi frequencies must be non-negative"));
        }
        finite("raman.delta_a1_GHz", r.delta_a1_GHz)?;
        if r.delta_a1_GHz == 0.0 {
            return Err(Error::invalid("raman.delta_a1_GHz", "must be nonzero"));
        }
        finite("raman.eta_rad", r.eta_rad)?;
        in_range("raman.franck_condon", r.franck_condon, 0.0, 1.0)?;
        positive("raman.oracle_pulses", r.oracle_pulses)?;
        if r.oracle_samples == 1 {
            return Err(Error::invalid("raman.oracle_samples", "use 0 or at least 2"));
        }
        Ok(())
    }

    pub fn layout_params(&self) -> LayoutParams {
        let l = &self.layout;
        LayoutParams {
            i0: l.i0_mA * MILLIAMP,
            alpha: l.alpha,
            bias_x: l.bias_x_G * GAUSS,
            bias_y: l.bias_y_G * GAUSS,
            wire_width: l.width_um * MICRON,
            wire_height: l.height_um * MICRON,
            quadrupole_depth: l.quadrupole_depth_um * MICRON,
            side_separation: l.side_separation_um * MICRON,
            side_center_z: l.side_center_z_um * MICRON,
        }
    }

    /// Field-map points, x fastest.
    pub fn field_points(&self) -> Vec<Vec3> {
        let axis = |(a, b, k): (f64, f64, usize)| -> Vec<f64> {
            if k == 1 {
                return vec![a * MICRON];
            }
            (0..k).map(|i| (a + (b - a) * i as f64 / (k - 1) as f64) * MICRON).collect()
        };
        let (xs, ys, zs) = (axis(self.field.x_um), axis(self.field.y_um), axis(self.field.z_um));
        let mut out = Vec::with_capacity(xs.len() * ys.len() * zs.len());
        for &z in &zs {
            for &y in &ys {
                for &x in &xs {
                    out.push(Vec3::new(x, y, z));
                }
            }
        }
        out
    }

    pub fn track_config(&self, constants: &AtomConstants) -> TrackConfig {
        let n = &self.numerics;
        let t = &self.track;
        TrackConfig {
            n_points: n.track_points,
            grid_points: n.grid_points,
            window: n.window_um * MICRON,
            n_modes: n.n_modes,
            sector_states: n.sector_states,
            ..TrackConfig::new(
                khz_to_joule(t.xi_high_kHz),
                khz_to_joule(t.xi_low_kHz),
                t.b_min_G * GAUSS,
                constants.scattering_length,
            )
        }
    }

    pub fn propagation_options(&self) -> PropagationOptions {
        PropagationOptions { rtol: self.numerics.rtol, atol: self.numerics.atol, ..PropagationOptions::default() }
    }

    pub fn durations(&self) -> Vec<f64> {
        self.schedule.durations_ms.iter().map(|d| d * 1e-3).collect()
    }

    /// The six-level scheme, light-shift compensated when requested.
    pub fn level_scheme(&self) -> Result<LevelScheme> {
        let r = &self.raman;
        let two_pi = 2.0 * std::f64::consts::PI;
        let mut s = LevelScheme::rb87(
            r.b_G * GAUSS,
            two_pi * r.rabi_plus_MHz * 1e6,
            two_pi * r.rabi_minus_MHz * 1e6,
            two_pi * r.delta_a1_GHz * 1e9,
        )?;
        s.eta = r.eta_rad;
        if r.compensate && s.rabi_plus > 0.0 && s.rabi_minus > 0.0 {
            s = s.compensated()?;
        }
        Ok(s)
    }
}

/// Parses and validates a scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let s: Scenario = parse_toml(text)?;
    s.validate()?;
    Ok(s)
}

/// Reads, parses and validates a scenario file. A relative `constants`
/// path is resolved against the file's directory.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    let mut s = parse_scenario(&text)?;
    if let Some(c) = &s.constants {
        if c.is_relative() {
            s.constants = Some(path.parent().unwrap_or(Path::new(".")).join(c));
        }
    }
    Ok(s)
}

/// Constants named by the scenario, else the environment override, else the shipped table.
pub fn scenario_constants(s: &Scenario) -> Result<AtomConstants> {
    match &s.constants {
        Some(p) => AtomConstants::load(p),
        None => AtomConstants::from_env_or_default(),
    }
}
