//! Physical constants and the per-atom constants file.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Vacuum permeability (classical exact value).
pub const MU_0: f64 = 4.0e-7 * std::f64::consts::PI;
/// μ₀/2π, the prefactor of the thin-wire field.
pub const K_0: f64 = 2.0e-7;
pub const PLANCK: f64 = 6.626_070_15e-34;
pub const HBAR: f64 = PLANCK / (2.0 * std::f64::consts::PI);

pub const GAUSS: f64 = 1.0e-4;
pub const MICRON: f64 = 1.0e-6;
pub const MILLIAMP: f64 = 1.0e-3;

/// Environment variable naming an alternative constants file.
pub const CONSTANTS_ENV: &str = "CHIPGATE_CONSTANTS";

const DEFAULT_RB87: &str = include_str!("../data/rb87.toml");

/// Energy in joules to frequency in hertz (E/h).
pub fn joule_to_hz(e: f64) -> f64 {
    e / PLANCK
}

pub fn hz_to_joule(f: f64) -> f64 {
    f * PLANCK
}

pub fn joule_to_khz(e: f64) -> f64 {
    e / PLANCK * 1e-3
}

pub fn khz_to_joule(f: f64) -> f64 {
    f * 1e3 * PLANCK
}

/// Constants of one alkali species in its ground manifold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomConstants {
    pub version: String,
    /// kg
    pub mass: f64,
    /// Zero-field hyperfine splitting divided by h, in Hz.
    pub hyperfine_frequency: f64,
    pub nuclear_spin: f64,
    pub g_j: f64,
    /// Nuclear g-factor in units of the Bohr magneton (signed).
    pub g_i: f64,
    /// s-wave scattering length, m.
    pub scattering_length: f64,
    /// J/T
    pub bohr_magneton: f64,
}

impl AtomConstants {
    /// The shipped ⁸⁷Rb table.
    pub fn rb87() -> Self {
        Self::from_toml_str(DEFAULT_RB87).expect("shipped constants file parses")
    }

    /// Loads the file named by `CHIPGATE_CONSTANTS` if set, the shipped table otherwise.
    pub fn from_env_or_default() -> Result<Self> {
        match std::env::var_os(CONSTANTS_ENV) {
            Some(path) => Self::load(Path::new(&path)),
            None => Ok(Self::rb87()),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let c: AtomConstants = crate::scenario::parse_toml(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("mass", self.mass),
            ("hyperfine_frequency", self.hyperfine_frequency),
            ("nuclear_spin", self.nuclear_spin),
            ("g_j", self.g_j),
            ("bohr_magneton", self.bohr_magneton),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(name, format!("must be positive, got {v}")));
            }
        }
        if !(self.scattering_length.is_finite() && self.scattering_length >= 0.0) {
            return Err(Error::invalid("scattering_length", "must be non-negative"));
        }
        if !self.g_i.is_finite() {
            return Err(Error::invalid("g_i", "must be finite"));
        }
        Ok(())
    }

    /// Zero-field hyperfine splitting in joules.
    pub fn hyperfine_energy(&self) -> f64 {
        self.hyperfine_frequency * PLANCK
    }

    /// Copy with every energy scale (splitting and magneton) multiplied by `factor`.
    pub fn with_energy_scale(&self, factor: f64) -> Self {
        Self {
            hyperfine_frequency: self.hyperfine_frequency * factor,
            bohr_magneton: self.bohr_magneton * factor,
            ..self.clone()
        }
    }
}

impl Default for AtomConstants {
    fn default() -> Self {
        Self::rb87()
    }
}
