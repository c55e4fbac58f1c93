//! Helpers shared by integration tests.

#![allow(dead_code)]

use chipgate::constants::{AtomConstants, HBAR, PLANCK};
use chipgate::trapscape::PotentialCurve;
use chipgate::twoatom::TwoAtomEigenbasis;
use nalgebra::DMatrix;
use num_complex::Complex64;

pub fn rb87_mass() -> f64 {
    AtomConstants::rb87().mass
}

/// `ξ ((x/x₀)² − 1)²`: barrier `xi_khz` at the center, minima at ±x₀, on
/// `n` cell-centred points over `[−half, half]`.
pub fn quartic(xi_khz: f64, x0: f64, half: f64, n: usize) -> PotentialCurve {
    let xi = xi_khz * 1e3 * PLANCK;
    let h = 2.0 * half / n as f64;
    let start = -half + 0.5 * h;
    let v = (0..n).map(|i| {
        let u = (start + h * i as f64) / x0;
        xi * (u * u - 1.0).powi(2)
    });
    PotentialCurve::new(start, h, v.collect()).unwrap()
}

/// Two bosons on the grid of a 1D curve, evolved by fourth-order split
/// steps: kinetic factors in the eigenbasis of the 5-point hard-wall
/// kinetic matrix, potential and contact factors on the grid.
pub struct GridPair {
    n: usize,
    q: DMatrix<Complex64>,
    qt: DMatrix<Complex64>,
    kinetic: Vec<f64>,
    diagonal: DMatrix<f64>,
}

impl GridPair {
    pub fn new(curve: &PotentialCurve, mass: f64, g1d: f64) -> Self {
        let v = curve.values();
        let n = v.len();
        let h = curve.step();
        let unit = HBAR * HBAR / (2.0 * mass * h * h);
        let k = DMatrix::from_fn(n, n, |i, j| match i.abs_diff(j) {
            0 => 30.0 / 12.0 * unit,
            1 => -16.0 / 12.0 * unit,
            2 => 1.0 / 12.0 * unit,
            _ => 0.0,
        });
        let eig = k.symmetric_eigen();
        let q = eig.eigenvectors.map(|x| Complex64::new(x, 0.0));
        let diagonal = DMatrix::from_fn(n, n, |i, j| v[i] + v[j] + if i == j { g1d / h } else { 0.0 });
        Self { n, qt: q.transpose(), q, kinetic: eig.eigenvalues.as_slice().to_vec(), diagonal }
    }

    fn potential(&self, psi: &mut DMatrix<Complex64>, tau: f64) {
        for (p, d) in psi.iter_mut().zip(self.diagonal.iter()) {
            *p *= Complex64::from_polar(1.0, -d * tau / HBAR);
        }
    }

    fn kinetic(&self, psi: &mut DMatrix<Complex64>, tau: f64) {
        let mut m = &self.qt * &*psi * &self.q;
        for a in 0..self.n {
            for b in 0..self.n {
                m[(a, b)] *= Complex64::from_polar(1.0, -(self.kinetic[a] + self.kinetic[b]) * tau / HBAR);
            }
        }
        *psi = &self.q * m * &self.qt;
    }

    fn strang(&self, psi: &mut DMatrix<Complex64>, dt: f64) {
        self.potential(psi, 0.5 * dt);
        self.kinetic(psi, dt);
        self.potential(psi, 0.5 * dt);
    }

    pub fn evolve(&self, psi: &mut DMatrix<Complex64>, t: f64, steps: usize) {
        let c = 2f64.cbrt();
        let w1 = 1.0 / (2.0 - c);
        let w0 = -c * w1;
        let dt = t / steps as f64;
        for _ in 0..steps {
            self.strang(psi, w1 * dt);
            self.strang(psi, w0 * dt);
            self.strang(psi, w1 * dt);
        }
    }
}

/// `Σ b_i e^{−iε_i t/ħ} φ_i(x₁, x₂)` on the grid.
pub fn eigen_superposition(basis: &TwoAtomEigenbasis, b: &[(usize, Complex64)], t: f64) -> DMatrix<Complex64> {
    let n = basis.single.potential.len();
    DMatrix::from_fn(n, n, |i, j| {
        b.iter()
            .map(|&(k, c)| c * Complex64::from_polar(1.0, -basis.energies[k] * t / HBAR) * basis.amplitude(k, i, j))
            .sum()
    })
}

/// `|⟨a|b⟩|²` with the grid measure `h²`.
pub fn overlap(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>, h: f64) -> f64 {
    let s: Complex64 = a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum();
    (s * h * h).norm_sqr()
}
