//! Hyperfine Zeeman energies of the alkali ground manifold.

use crate::constants::{AtomConstants, GAUSS};
use crate::error::{Error, Result};
use crate::roots;

/// A ground-state hyperfine sublevel `|F, m_F⟩` with `F = I ± 1/2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HyperfineState {
    f: u8,
    m_f: i8,
}

impl HyperfineState {
    /// `|F=2, m_F=1⟩`, the qubit state |0⟩ and the trapped state of the gate.
    pub const F2_M1: Self = Self { f: 2, m_f: 1 };
    /// `|F=1, m_F=−1⟩`, the qubit state |1⟩.
    pub const F1_MM1: Self = Self { f: 1, m_f: -1 };
    pub const F2_M2: Self = Self { f: 2, m_f: 2 };

    pub fn new(f: u8, m_f: i8) -> Result<Self> {
        if f != 1 && f != 2 {
            return Err(Error::invalid("f", format!("ground manifold has F = 1 or 2, got {f}")));
        }
        if m_f.unsigned_abs() > f {
            return Err(Error::invalid("m_f", format!("|m_F| must not exceed F = {f}, got {m_f}")));
        }
        Ok(Self { f, m_f })
    }

    pub fn f(&self) -> u8 {
        self.f
    }

    pub fn m_f(&self) -> i8 {
        self.m_f
    }

    /// Landé factor ±1/(2I+1) for nuclear spin 3/2.
    pub fn g_f(&self) -> f64 {
        if self.f == 2 {
            0.5
        } else {
            -0.5
        }
    }

    /// All eight sublevels, F = 1 first.
    pub fn all() -> Vec<Self> {
        let mut v = Vec::with_capacity(8);
        for f in 1u8..=2 {
            for m in -(f as i8)..=(f as i8) {
                v.push(Self { f, m_f: m });
            }
        }
        v
    }

    /// True when the linear Zeeman energy rises with field.
    pub fn is_low_field_seeker(&self) -> bool {
        self.g_f() * f64::from(self.m_f) > 0.0
    }

    fn upper(&self) -> bool {
        self.f == 2
    }
}

/// Linear Zeeman energy `μ_B g_F m_F B` (joules).
pub fn zeeman_linear(c: &AtomConstants, state: HyperfineState, b: f64) -> f64 {
    c.bohr_magneton * state.g_f() * f64::from(state.m_f) * b
}

struct Br {
    e_hfs: f64,
    a: f64,
    sign: f64,
    nuclear: f64,
    dx_db: f64,
    stretched: bool,
}

impl Br {
    fn new(c: &AtomConstants, s: HyperfineState) -> Self {
        let two_i1 = 2.0 * c.nuclear_spin + 1.0;
        let m = f64::from(s.m_f);
        let e_hfs = c.hyperfine_energy();
        Self {
            e_hfs,
            a: 4.0 * m / two_i1,
            sign: if s.upper() { 1.0 } else { -1.0 },
            nuclear: c.g_i * c.bohr_magneton * m,
            dx_db: (c.g_j - c.g_i) * c.bohr_magneton / e_hfs,
            stretched: (m.abs() - (c.nuclear_spin + 0.5)).abs() < 1e-12,
        }
    }

    /// E(B) − E(0).
    fn shift(&self, b: f64) -> f64 {
        let x = self.dx_db * b;
        let root_minus_one = if self.stretched {
            // √((1 ± x)²) continued on its linear branch
            0.5 * self.a * x
        } else {
            let s = self.a * x + x * x;
            s / ((1.0 + s).sqrt() + 1.0)
        };
        self.nuclear * b + self.sign * 0.5 * self.e_hfs * root_minus_one
    }

    fn derivative(&self, b: f64) -> f64 {
        let x = self.dx_db * b;
        let d_root = if self.stretched {
            0.5 * self.a
        } else {
            (self.a + 2.0 * x) / (2.0 * (1.0 + self.a * x + x * x).sqrt())
        };
        self.nuclear + self.sign * 0.5 * self.e_hfs * d_root * self.dx_db
    }
}

/// Breit–Rabi energy (joules). The zero of energy sits at the hyperfine
/// centroid, so at zero field the F = 2 and F = 1 levels are split by `E_hfs`.
pub fn breit_rabi(c: &AtomConstants, state: HyperfineState, b: f64) -> f64 {
    let two_i1 = 2.0 * c.nuclear_spin + 1.0;
    let e = c.hyperfine_energy();
    let sign = if state.upper() { 1.0 } else { -1.0 };
    -e / (2.0 * two_i1) + sign * 0.5 * e + Br::new(c, state).shift(b)
}

/// `breit_rabi(B) − breit_rabi(0)`, evaluated without cancellation.
pub fn breit_rabi_shift(c: &AtomConstants, state: HyperfineState, b: f64) -> f64 {
    Br::new(c, state).shift(b)
}

/// `d/dB` of the Breit–Rabi energy (J/T).
pub fn breit_rabi_derivative(c: &AtomConstants, state: HyperfineState, b: f64) -> f64 {
    Br::new(c, state).derivative(b)
}

/// Which field-to-energy map a trap potential uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ZeemanModel {
    Linear,
    #[default]
    BreitRabi,
}

/// Field-magnitude-to-potential map for one trapped state, referenced to
/// its zero-field energy.
#[derive(Debug, Clone, PartialEq)]
pub struct ZeemanPotential {
    pub constants: AtomConstants,
    pub state: HyperfineState,
    pub model: ZeemanModel,
}

impl ZeemanPotential {
    pub fn new(constants: AtomConstants, state: HyperfineState, model: ZeemanModel) -> Self {
        Self { constants, state, model }
    }

    /// |2,1⟩ of ⁸⁷Rb with the Breit–Rabi map.
    pub fn rb87_clock() -> Self {
        Self::new(AtomConstants::rb87(), HyperfineState::F2_M1, ZeemanModel::BreitRabi)
    }

    pub fn energy(&self, b: f64) -> f64 {
        match self.model {
            ZeemanModel::Linear => zeeman_linear(&self.constants, self.state, b),
            ZeemanModel::BreitRabi => breit_rabi_shift(&self.constants, self.state, b),
        }
    }

    pub fn slope(&self, b: f64) -> f64 {
        match self.model {
            ZeemanModel::Linear => self.constants.bohr_magneton * self.state.g_f() * f64::from(self.state.m_f),
            ZeemanModel::BreitRabi => breit_rabi_derivative(&self.constants, self.state, b),
        }
    }

    pub fn mass(&self) -> f64 {
        self.constants.mass
    }
}

/// `d/dB [E(|2,1⟩) − E(|1,−1⟩)]`.
pub fn differential_slope(c: &AtomConstants, b: f64) -> f64 {
    breit_rabi_derivative(c, HyperfineState::F2_M1, b) - breit_rabi_derivative(c, HyperfineState::F1_MM1, b)
}

/// Field at which the |2,1⟩–|1,−1⟩ differential shift is stationary.
pub fn magic_field(c: &AtomConstants) -> Result<f64> {
    let (lo, hi) = (0.0, 100.0 * GAUSS);
    let scale = c.bohr_magneton;
    roots::brent(|b| differential_slope(c, b) / scale, lo, hi, 1e-16, 200).map_err(|e| match e {
        Error::NoConvergence { detail, .. } => {
            Error::NoConvergence { what: "magic field search", detail: format!("bracket [0, 100 G]: {detail}") }
        }
        other => other,
    })
}
