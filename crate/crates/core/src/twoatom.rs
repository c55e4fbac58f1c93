//! Eigenstates of one and two bosons in the 1D double well, and their
//! non-adiabatic couplings with respect to the barrier height.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::constants::HBAR;
use crate::error::{Error, Result};
use crate::magnetostatics::{LayoutParams, Vec3};
use crate::spline::{CubicSpline, MultiSpline};
use crate::trapscape::{
    barrier_height, potential_slice_1d, trap_frequencies, BarrierSolver, Frequencies, PotentialCurve, TrapModel,
    HESSIAN_STEP,
};
use crate::zeeman::ZeemanPotential;

/// Reflection parity about the window center.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }

    pub fn times(self, other: Parity) -> Parity {
        if self == other {
            Parity::Even
        } else {
            Parity::Odd
        }
    }
}

/// Largest tolerated relative energy change between the grid and its
/// double-spaced coarsening.
pub const GRID_CONVERGENCE_TOL: f64 = 1e-4;

/// Curves whose mirror pairs agree to this fraction of the value range are
/// solved in separate parity sectors.
pub const SYMMETRY_TOL: f64 = 1e-12;

// ---------------------------------------------------------------------------
// banded symmetric eigensolver

/// Symmetric pentadiagonal matrix: `d[i] = A[i][i]`, `e[i] = A[i][i+1]`, `f[i] = A[i][i+2]`.
#[derive(Debug, Clone)]
struct Banded {
    d: Vec<f64>,
    e: Vec<f64>,
    f: Vec<f64>,
}

struct BandCholesky {
    l0: Vec<f64>,
    l1: Vec<f64>,
    l2: Vec<f64>,
}

impl Banded {
    fn n(&self) -> usize {
        self.d.len()
    }

    fn mul(&self, x: &[f64], y: &mut [f64]) {
        let n = self.n();
        for i in 0..n {
            let mut s = self.d[i] * x[i];
            if i + 1 < n {
                s += self.e[i] * x[i + 1];
            }
            if i + 2 < n {
                s += self.f[i] * x[i + 2];
            }
            if i >= 1 {
                s += self.e[i - 1] * x[i - 1];
            }
            if i >= 2 {
                s += self.f[i - 2] * x[i - 2];
            }
            y[i] = s;
        }
    }

    fn norm_inf(&self) -> f64 {
        let n = self.n();
        (0..n)
            .map(|i| {
                let mut s = self.d[i].abs();
                if i + 1 < n {
                    s += self.e[i].abs();
                }
                if i + 2 < n {
                    s += self.f[i].abs();
                }
                if i >= 1 {
                    s += self.e[i - 1].abs();
                }
                if i >= 2 {
                    s += self.f[i - 2].abs();
                }
                s
            })
            .fold(0.0, f64::max)
    }

    /// Cholesky factor of `A − σI`, or `None` if it is not positive definite.
    fn cholesky_shifted(&self, sigma: f64) -> Option<BandCholesky> {
        let n = self.n();
        let (mut l0, mut l1, mut l2) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for i in 0..n {
            if i >= 2 {
                l2[i] = self.f[i - 2] / l0[i - 2];
            }
            if i >= 1 {
                let prev = if i >= 2 { l2[i] * l1[i - 1] } else { 0.0 };
                l1[i] = (self.e[i - 1] - prev) / l0[i - 1];
            }
            let p = self.d[i] - sigma - l1[i] * l1[i] - l2[i] * l2[i];
            if !(p > 0.0) {
                return None;
            }
            l0[i] = p.sqrt();
        }
        Some(BandCholesky { l0, l1, l2 })
    }
}

impl BandCholesky {
    fn solve(&self, b: &mut [f64]) {
        let n = b.len();
        for i in 0..n {
            let mut s = b[i];
            if i >= 1 {
                s -= self.l1[i] * b[i - 1];
            }
            if i >= 2 {
                s -= self.l2[i] * b[i - 2];
            }
            b[i] = s / self.l0[i];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            if i + 1 < n {
                s -= self.l1[i + 1] * b[i + 1];
            }
            if i + 2 < n {
                s -= self.l2[i + 2] * b[i + 2];
            }
            b[i] = s / self.l0[i];
        }
    }
}

fn min_of(v: &[f64]) -> f64 {
    v.iter().cloned().fold(f64::INFINITY, f64::min)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn orthonormalize(cols: &mut [Vec<f64>]) -> Result<()> {
    for pass in 0..2 {
        for j in 0..cols.len() {
            let (done, rest) = cols.split_at_mut(j);
            let v = &mut rest[0];
            for u in done.iter() {
                let c = dot(u, v);
                v.iter_mut().zip(u).for_each(|(x, y)| *x -= c * y);
            }
            let n = dot(v, v).sqrt();
            if !(n > 1e-300) {
                return Err(Error::NoConvergence {
                    what: "eigensolver",
                    detail: format!("block collapsed on pass {pass}"),
                });
            }
            v.iter_mut().for_each(|x| *x /= n);
        }
    }
    Ok(())
}

/// Lowest `k` eigenpairs of `a` by block inverse iteration with
/// Rayleigh–Ritz projection. `floor` is a lower bound of the spectrum.
/// Eigenvectors have unit Euclidean norm.
fn lowest_eigenpairs(a: &Banded, k: usize, floor: f64) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = a.n();
    if k == 0 {
        return Ok((vec![], vec![]));
    }
    if k > n {
        return Err(Error::invalid("n_states", format!("{k} requested from a {n}-point grid")));
    }
    let block = (k + 5).min(n);
    let scale = a.norm_inf();
    let mut sigma = floor - 1e-10 * scale;
    let chol = loop {
        match a.cholesky_shifted(sigma) {
            Some(c) => break c,
            None => sigma -= 1e-3 * scale.max(1.0),
        }
    };
    let mut x: Vec<Vec<f64>> = (0..block)
        .map(|j| {
            (0..n)
                .map(|i| {
                    let t = (i as f64 + 0.5) / n as f64;
                    ((j + 1) as f64 * std::f64::consts::PI * t).sin() + 0.01 * ((j * 7 + i * 3) % 11) as f64
                })
                .collect()
        })
        .collect();
    let tol = 1e-12 * scale;
    let mut best = f64::INFINITY;
    let mut since_best = 0;
    let mut ay = vec![vec![0.0; n]; block];
    for _ in 0..2000 {
        for v in x.iter_mut() {
            chol.solve(v);
        }
        orthonormalize(&mut x)?;
        for (v, av) in x.iter().zip(ay.iter_mut()) {
            a.mul(v, av);
        }
        let h = DMatrix::from_fn(block, block, |i, j| dot(&x[i], &ay[j]));
        let h = (&h + h.transpose()) * 0.5;
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..block).collect();
        order.sort_by(|&p, &q| eig.eigenvalues[p].partial_cmp(&eig.eigenvalues[q]).unwrap());
        let rotate = |src: &[Vec<f64>]| -> Vec<Vec<f64>> {
            order
                .iter()
                .map(|&c| {
                    let mut out = vec![0.0; n];
                    for (r, s) in src.iter().enumerate() {
                        let w = eig.eigenvectors[(r, c)];
                        out.iter_mut().zip(s).for_each(|(o, v)| *o += w * v);
                    }
                    out
                })
                .collect()
        };
        let nx = rotate(&x);
        let nay = rotate(&ay);
        let theta: Vec<f64> = order.iter().map(|&c| eig.eigenvalues[c]).collect();
        let resid = (0..k)
            .map(|j| {
                nay[j].iter().zip(&nx[j]).map(|(av, v)| (av - theta[j] * v).powi(2)).sum::<f64>().sqrt()
            })
            .fold(0.0, f64::max);
        x = nx;
        if resid <= tol {
            return Ok((theta[..k].to_vec(), x.into_iter().take(k).collect()));
        }
        if resid < 0.5 * best {
            best = resid;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= 20 && best <= 1e3 * tol {
                return Ok((theta[..k].to_vec(), x.into_iter().take(k).collect()));
            }
        }
    }
    Err(Error::NoConvergence { what: "eigensolver", detail: format!("residual {best:e} above {tol:e}") })
}

/// 5-point kinetic stencil plus `v` (both in units of ħ²/2mh²), hard walls
/// beyond the grid. With `parity`, `v` is the right half of a mirror-symmetric
/// grid whose first point sits half a step from the center. The kinetic
/// part is positive semidefinite, so `min v` bounds the spectrum from below.
fn hamiltonian(v: &[f64], parity: Option<Parity>) -> Banded {
    let n = v.len();
    let mut d: Vec<f64> = v.iter().map(|x| x + 30.0 / 12.0).collect();
    let mut e = vec![-16.0 / 12.0; n.saturating_sub(1)];
    let f = vec![1.0 / 12.0; n.saturating_sub(2)];
    if let Some(p) = parity {
        let s = p.sign();
        d[0] += s * (-16.0 / 12.0);
        if n > 1 {
            e[0] += s / 12.0;
        }
    }
    Banded { d, e, f }
}

// ---------------------------------------------------------------------------
// single particle

/// Lowest eigenstates of `−ħ²/2m ∂² + V(x)` on a potential curve.
#[derive(Debug, Clone)]
pub struct SingleParticleBasis {
    pub start: f64,
    pub step: f64,
    /// Potential on the grid (joules).
    pub potential: Vec<f64>,
    pub mass: f64,
    /// Ascending (joules).
    pub energies: Vec<f64>,
    /// Real amplitudes on the grid with `Σ ψ² Δx = 1`.
    pub states: Vec<Vec<f64>>,
    pub parity: Vec<Option<Parity>>,
    /// `k_S` / `k_A` for the k-th even / odd state, or the plain index.
    pub labels: Vec<String>,
    /// Largest relative energy change against the double-spaced grid.
    pub convergence: f64,
    /// Barrier height of the potential, when it is a double well.
    pub xi: Option<f64>,
}

impl SingleParticleBasis {
    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn grid(&self) -> Vec<f64> {
        (0..self.potential.len()).map(|i| self.start + self.step * i as f64).collect()
    }

    pub fn is_parity_adapted(&self) -> bool {
        self.parity.iter().all(|p| p.is_some())
    }

    /// `S_ab = ⟨ψ_a | ψ'_b⟩` against another basis on the same grid.
    pub fn overlap(&self, other: &SingleParticleBasis) -> DMatrix<f64> {
        DMatrix::from_fn(self.len(), other.len(), |a, b| dot(&self.states[a], &other.states[b]) * self.step)
    }

    /// Matrix of a multiplicative one-body operator `w(x)`.
    pub fn one_body(&self, w: &[f64]) -> DMatrix<f64> {
        let n = self.len();
        DMatrix::from_fn(n, n, |a, b| {
            self.states[a].iter().zip(&self.states[b]).zip(w).map(|((x, y), z)| x * y * z).sum::<f64>() * self.step
        })
    }

    /// Max-norm deviation of the Gram matrix from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        let g = self.overlap(self);
        let n = self.len();
        (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).fold(0.0, |m, (i, j)| {
            let want = if i == j { 1.0 } else { 0.0 };
            f64::max(m, (g[(i, j)] - want).abs())
        })
    }

    /// Flips signs so that each state overlaps positively with the same
    /// state of `reference`.
    pub fn align_to(&mut self, reference: &SingleParticleBasis) {
        for k in 0..self.len().min(reference.len()) {
            if dot(&self.states[k], &reference.states[k]) < 0.0 {
                self.states[k].iter_mut().for_each(|x| *x = -*x);
            }
        }
    }
}

/// Solves with [`GRID_CONVERGENCE_TOL`].
pub fn single_particle_eigen(curve: &PotentialCurve, n_states: usize, mass: f64) -> Result<SingleParticleBasis> {
    single_particle_eigen_with(curve, n_states, mass, GRID_CONVERGENCE_TOL)
}

struct RawSpectrum {
    energies: Vec<f64>,
    states: Vec<Vec<f64>>,
    parity: Vec<Option<Parity>>,
    labels: Vec<String>,
}

fn solve_grid(v: &[f64], step: f64, mass: f64, n_states: usize, symmetric: bool) -> Result<RawSpectrum> {
    let unit = HBAR * HBAR / (2.0 * mass * step * step);
    let n = v.len();
    let mut found: Vec<(f64, Vec<f64>, Option<Parity>, String)> = Vec::new();
    if symmetric {
        let half: Vec<f64> = v[n / 2..].iter().map(|x| x / unit).collect();
        let n_even = (n_states + 1) / 2;
        let n_odd = n_states / 2;
        for (p, count) in [(Parity::Even, n_even), (Parity::Odd, n_odd)] {
            let (vals, vecs) = lowest_eigenpairs(&hamiltonian(&half, Some(p)), count, min_of(&half))?;
            let tag = if p == Parity::Even { "S" } else { "A" };
            for (k, (lam, x)) in vals.into_iter().zip(vecs).enumerate() {
                let norm = (2.0 * step).sqrt();
                let mut full = vec![0.0; n];
                for (j, &xj) in x.iter().enumerate() {
                    full[n / 2 + j] = xj / norm;
                    full[n / 2 - 1 - j] = p.sign() * xj / norm;
                }
                found.push((lam * unit, full, Some(p), format!("{k}_{tag}")));
            }
        }
    } else {
        let scaled: Vec<f64> = v.iter().map(|x| x / unit).collect();
        let (vals, vecs) = lowest_eigenpairs(&hamiltonian(&scaled, None), n_states, min_of(&scaled))?;
        for (k, (lam, x)) in vals.into_iter().zip(vecs).enumerate() {
            let norm = step.sqrt();
            found.push((lam * unit, x.iter().map(|v| v / norm).collect(), None, k.to_string()));
        }
    }
    found.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut out = RawSpectrum { energies: vec![], states: vec![], parity: vec![], labels: vec![] };
    for (e, mut psi, p, l) in found {
        // gauge: the leftmost significant lobe is positive
        let peak = psi.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if let Some(first) = psi.iter().find(|x| x.abs() > 1e-3 * peak) {
            if *first < 0.0 {
                psi.iter_mut().for_each(|x| *x = -*x);
            }
        }
        out.energies.push(e);
        out.states.push(psi);
        out.parity.push(p);
        out.labels.push(l);
    }
    Ok(out)
}

/// Lowest `n_states` eigenpairs of the curve's 1D Hamiltonian on its own grid
/// (5-point kinetic stencil, hard walls beyond the window). Mirror-symmetric
/// curves with an even point count are solved per parity sector. Fails when
/// the double-spaced grid changes any energy, measured from the potential
/// floor, by more than `tol` relative, or when the highest state has fewer
/// than ten points per local de Broglie wavelength. An infinite `tol` skips
/// the coarse-grid solve and leaves `convergence` at NaN.
pub fn single_particle_eigen_with(
    curve: &PotentialCurve,
    n_states: usize,
    mass: f64,
    tol: f64,
) -> Result<SingleParticleBasis> {
    if !(mass > 0.0) {
        return Err(Error::invalid("mass", "must be positive"));
    }
    if n_states == 0 {
        return Err(Error::invalid("n_states", "must be at least one"));
    }
    let v = curve.values();
    let n = v.len();
    let h = curve.step();
    let symmetric = n % 2 == 0 && curve.asymmetry() <= SYMMETRY_TOL;
    let fine = solve_grid(v, h, mass, n_states, symmetric)?;

    let vmin = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let top = fine.energies[n_states - 1];
    let k_max = (2.0 * mass * (top - vmin).max(0.0)).sqrt() / HBAR;
    if k_max > 0.0 {
        let points_per_wavelength = 2.0 * std::f64::consts::PI / (k_max * h);
        if points_per_wavelength < 10.0 {
            return Err(Error::NoConvergence {
                what: "single-particle eigenstates",
                detail: format!("{points_per_wavelength:.1} points per de Broglie wavelength"),
            });
        }
    }

    let convergence = if tol.is_finite() { grid_change(curve, &fine, mass, n_states, symmetric, vmin)? } else { f64::NAN };
    if convergence > tol {
        return Err(Error::NoConvergence {
            what: "single-particle eigenstates",
            detail: format!("grid-halving energy change {convergence:.3e} exceeds {tol:.1e}"),
        });
    }
    Ok(SingleParticleBasis {
        start: curve.start(),
        step: h,
        potential: v.to_vec(),
        mass,
        energies: fine.energies,
        states: fine.states,
        parity: fine.parity,
        labels: fine.labels,
        convergence,
        xi: barrier_height(curve).ok(),
    })
}

// Largest relative energy change on a grid of twice the spacing, with the
// potential interpolated at the same centering.
fn grid_change(
    curve: &PotentialCurve,
    fine: &RawSpectrum,
    mass: f64,
    n_states: usize,
    symmetric: bool,
    vmin: f64,
) -> Result<f64> {
    let (v, n, h) = (curve.values(), curve.len(), curve.step());
    let x: Vec<f64> = (0..n).map(|i| curve.coordinate(i)).collect();
    let spline = CubicSpline::new(&x, v)?;
    let nc = if symmetric { 2 * (n / 4) } else { n / 2 };
    let hc = 2.0 * h;
    let center = 0.5 * (x[0] + x[n - 1]);
    let c0 = center - hc * (nc as f64 - 1.0) / 2.0;
    let vc: Vec<f64> = (0..nc).map(|i| spline.eval(c0 + hc * i as f64)).collect();
    let coarse = solve_grid(&vc, hc, mass, n_states, symmetric)?;
    Ok(fine
        .energies
        .iter()
        .zip(&coarse.energies)
        .map(|(f, c)| (f - c).abs() / (f - vmin).abs().max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max))
}

// ---------------------------------------------------------------------------
// two bosons

/// `g₁D = 2ħ a₀ √(ω_y ω_z)`, the transversely averaged contact coupling (J·m).
pub fn interaction_strength(a0: f64, omega_y: f64, omega_z: f64) -> f64 {
    2.0 * HBAR * a0 * (omega_y * omega_z).sqrt()
}

/// Symmetrized product states `|ab⟩_S`, `a ≤ b < n_modes`.
pub fn pair_list(n_modes: usize) -> Vec<(usize, usize)> {
    (0..n_modes).flat_map(|a| (a..n_modes).map(move |b| (a, b))).collect()
}

// `|ab⟩_S = c_ab (|ab⟩ + |ba⟩)`
fn pair_norm((a, b): (usize, usize)) -> f64 {
    if a == b {
        0.5
    } else {
        std::f64::consts::FRAC_1_SQRT_2
    }
}

/// `⟨ab_S | cd'_S⟩` from single-particle overlaps `S`.
fn pair_overlap(s: &DMatrix<f64>, pa: &[(usize, usize)], pb: &[(usize, usize)]) -> DMatrix<f64> {
    DMatrix::from_fn(pa.len(), pb.len(), |i, j| {
        let ((a, b), (c, d)) = (pa[i], pb[j]);
        2.0 * pair_norm(pa[i]) * pair_norm(pb[j]) * (s[(a, c)] * s[(b, d)] + s[(a, d)] * s[(b, c)])
    })
}

/// Symmetrized matrix of a one-body operator with single-particle matrix `w`.
fn pair_one_body(w: &DMatrix<f64>, pairs: &[(usize, usize)]) -> DMatrix<f64> {
    let delta = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
    DMatrix::from_fn(pairs.len(), pairs.len(), |i, j| {
        let ((a, b), (c, d)) = (pairs[i], pairs[j]);
        let t = w[(a, c)] * delta(b, d) + w[(b, d)] * delta(a, c) + w[(a, d)] * delta(b, c) + w[(b, c)] * delta(a, d);
        2.0 * pair_norm(pairs[i]) * pair_norm(pairs[j]) * t
    })
}

/// `∫ψ_a ψ_b ψ_c ψ_d dx` as the contact matrix between symmetrized pairs.
fn pair_contact(basis: &SingleParticleBasis, pairs: &[(usize, usize)]) -> DMatrix<f64> {
    let m = pairs.len();
    let products: Vec<Vec<f64>> = pairs
        .iter()
        .map(|&(a, b)| basis.states[a].iter().zip(&basis.states[b]).map(|(x, y)| x * y).collect())
        .collect();
    let mut q = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            // ⟨ab_S|δ|cd_S⟩ = 4 c_ab c_cd ∫ψaψbψcψd
            let w = 4.0 * pair_norm(pairs[i]) * pair_norm(pairs[j]);
            let v = w * dot(&products[i], &products[j]) * basis.step;
            q[(i, j)] = v;
            q[(j, i)] = v;
        }
    }
    q
}

fn pair_parity(basis: &SingleParticleBasis, (a, b): (usize, usize)) -> Option<Parity> {
    match (basis.parity[a], basis.parity[b]) {
        (Some(p), Some(q)) => Some(p.times(q)),
        _ => None,
    }
}

/// Instantaneous two-boson eigenstates in the symmetrized product basis.
#[derive(Debug, Clone)]
pub struct TwoAtomEigenbasis {
    /// Barrier height the basis belongs to (joules); NaN when unknown.
    pub xi: f64,
    pub g1d: f64,
    pub pairs: Vec<(usize, usize)>,
    /// Ascending (joules).
    pub energies: Vec<f64>,
    /// Column `i` holds φ_i in the `pairs` basis.
    pub vectors: DMatrix<f64>,
    pub parity: Vec<Option<Parity>>,
    pub single: SingleParticleBasis,
    /// Largest shift of the lowest energies when two more modes are added.
    pub truncation_shift: Option<f64>,
}

/// Relative shift of the low two-atom energies tolerated when `n_modes`
/// grows by two, in units of their distance from the two-atom floor.
pub const TRUNCATION_TOL: f64 = 1e-2;

fn diagonalize(
    basis: &SingleParticleBasis,
    g1d: f64,
    n_modes: usize,
) -> (Vec<(usize, usize)>, Vec<f64>, DMatrix<f64>, Vec<Option<Parity>>) {
    let pairs = pair_list(n_modes);
    let m = pairs.len();
    let q = pair_contact(basis, &pairs);
    let mut h = q * g1d;
    for (i, &(a, b)) in pairs.iter().enumerate() {
        h[(i, i)] += basis.energies[a] + basis.energies[b];
    }
    let sector_of: Vec<Option<Parity>> = pairs.iter().map(|&p| pair_parity(basis, p)).collect();
    let mut sectors: Vec<Option<Parity>> = Vec::new();
    for s in &sector_of {
        if !sectors.contains(s) {
            sectors.push(*s);
        }
    }
    let mut states: Vec<(f64, Vec<f64>, Option<Parity>)> = Vec::with_capacity(m);
    for sec in sectors {
        let idx: Vec<usize> = (0..m).filter(|&i| sector_of[i] == sec).collect();
        let sub = DMatrix::from_fn(idx.len(), idx.len(), |i, j| h[(idx[i], idx[j])]);
        let eig = SymmetricEigen::new(sub);
        for c in 0..idx.len() {
            let mut v = vec![0.0; m];
            for (r, &i) in idx.iter().enumerate() {
                v[i] = eig.eigenvectors[(r, c)];
            }
            states.push((eig.eigenvalues[c], v, sec));
        }
    }
    states.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let energies = states.iter().map(|s| s.0).collect();
    let mut vectors = DMatrix::zeros(m, m);
    for (c, s) in states.iter().enumerate() {
        let (imax, _) = s.1.iter().enumerate().fold((0, 0.0), |b, (i, v)| if v.abs() > b.1 { (i, v.abs()) } else { b });
        let sign = if s.1[imax] < 0.0 { -1.0 } else { 1.0 };
        for r in 0..m {
            vectors[(r, c)] = sign * s.1[r];
        }
    }
    let parity = states.iter().map(|s| s.2).collect();
    (pairs, energies, vectors, parity)
}

/// Diagonalizes two bosons with contact coupling `g1d` in the
/// `n_modes(n_modes+1)/2` symmetrized products of the lowest `n_modes`
/// single-particle states. When the basis holds two more states, the lowest
/// energies are compared against the enlarged problem and a shift above
/// [`TRUNCATION_TOL`] is an error.
pub fn two_atom_eigen(basis: &SingleParticleBasis, g1d: f64, n_modes: usize) -> Result<TwoAtomEigenbasis> {
    if n_modes == 0 || n_modes > basis.len() {
        return Err(Error::invalid("n_modes", format!("{n_modes} with {} single-particle states", basis.len())));
    }
    if !(g1d >= 0.0) {
        return Err(Error::invalid("g1d", "must be non-negative"));
    }
    let (pairs, energies, vectors, parity) = diagonalize(basis, g1d, n_modes);
    let truncation_shift = if basis.len() >= n_modes + 2 {
        let (_, bigger, _, _) = diagonalize(basis, g1d, n_modes + 2);
        let floor = 2.0 * basis.potential.iter().cloned().fold(f64::INFINITY, f64::min);
        let k = energies.len().min(6);
        let shift = (0..k).map(|i| (energies[i] - bigger[i]).abs() / (energies[i] - floor).abs()).fold(0.0, f64::max);
        if shift > TRUNCATION_TOL {
            return Err(Error::NoConvergence {
                what: "two-atom basis",
                detail: format!("energies shift by {shift:.3e} when adding two modes"),
            });
        }
        Some(shift)
    } else {
        None
    };
    Ok(TwoAtomEigenbasis {
        xi: basis.xi.unwrap_or(f64::NAN),
        g1d,
        pairs,
        energies,
        vectors,
        parity,
        single: basis.clone(),
        truncation_shift,
    })
}

impl TwoAtomEigenbasis {
    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    /// `⟨φ_i | φ'_j⟩` against another basis built on the same grid.
    pub fn overlap(&self, other: &TwoAtomEigenbasis) -> DMatrix<f64> {
        let s = self.single.overlap(&other.single);
        let p = pair_overlap(&s, &self.pairs, &other.pairs);
        self.vectors.transpose() * p * &other.vectors
    }

    /// Coefficients of the symmetrized product `|uv⟩_S` of two orthogonal
    /// single-particle combinations, in the pair basis.
    pub fn product_state(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        self.pairs
            .iter()
            .map(|&(a, b)| if a == b { std::f64::consts::SQRT_2 * u[a] * v[a] } else { u[a] * v[b] + u[b] * v[a] })
            .collect()
    }

    /// `φ_i(x₁, x₂)` at grid indices.
    pub fn amplitude(&self, i: usize, x1: usize, x2: usize) -> f64 {
        let psi = &self.single.states;
        self.pairs
            .iter()
            .enumerate()
            .map(|(r, &(a, b))| {
                let c = pair_norm((a, b));
                self.vectors[(r, i)] * c * (psi[a][x1] * psi[b][x2] + psi[b][x1] * psi[a][x2])
            })
            .sum()
    }

    /// Matrix of `∂H/∂ξ` between eigenstates given the potential derivative
    /// on the grid and the derivative of `g₁D`.
    pub fn perturbation(&self, dv: &[f64], dg: f64) -> DMatrix<f64> {
        let n_modes = self.pairs.iter().map(|p| p.1 + 1).max().unwrap_or(0);
        let w = self.single.one_body(dv).view((0, 0), (n_modes, n_modes)).into_owned();
        let mut op = pair_one_body(&w, &self.pairs);
        if dg != 0.0 {
            op += pair_contact(&self.single, &self.pairs) * dg;
        }
        self.vectors.transpose() * op * &self.vectors
    }

    /// Sign flips making each state overlap positively with the state of
    /// equal parity and rank in `reference`. Fails when a diagonal overlap
    /// falls below 1/√2 in magnitude.
    pub fn align_to(&mut self, reference: &TwoAtomEigenbasis) -> Result<()> {
        self.align_lowest(reference, usize::MAX)
    }

    /// As [`Self::align_to`], but only the lowest `strict` states of each
    /// parity sector must be unambiguous; the rest take the sign of their
    /// diagonal overlap.
    pub fn align_lowest(&mut self, reference: &TwoAtomEigenbasis, strict: usize) -> Result<()> {
        let o = reference.overlap(self);
        let partner = partners(reference, self)?;
        for (i, &j) in partner.iter().enumerate() {
            let v = o[(i, j)];
            if v * v < 0.5 && reference.rank(i) < strict {
                return Err(Error::Ambiguous(format!("state {i} overlaps its continuation by {v:.3}")));
            }
            if v < 0.0 {
                let mut col = self.vectors.column_mut(j);
                col *= -1.0;
            }
        }
        Ok(())
    }

    /// Position of state `i` within its parity sector.
    pub fn rank(&self, i: usize) -> usize {
        (0..i).filter(|&k| self.parity[k] == self.parity[i]).count()
    }

    /// Indices of the states in each parity sector, ascending in energy.
    pub fn sector_states(&self, parity: Option<Parity>) -> Vec<usize> {
        (0..self.dim()).filter(|&i| self.parity[i] == parity).collect()
    }

    pub fn sectors(&self) -> Vec<Option<Parity>> {
        let mut out = Vec::new();
        for p in &self.parity {
            if !out.contains(p) {
                out.push(*p);
            }
        }
        out
    }
}

/// For each state of `a`, the state of `b` with the same parity and rank.
fn partners(a: &TwoAtomEigenbasis, b: &TwoAtomEigenbasis) -> Result<Vec<usize>> {
    if a.dim() != b.dim() {
        return Err(Error::invalid("basis", format!("dimensions {} and {} differ", a.dim(), b.dim())));
    }
    let mut out = vec![0; a.dim()];
    for sec in a.sectors() {
        let ia = a.sector_states(sec);
        let ib = b.sector_states(sec);
        if ia.len() != ib.len() {
            return Err(Error::Ambiguous("parity sectors differ in size".into()));
        }
        for (x, y) in ia.into_iter().zip(ib) {
            out[x] = y;
        }
    }
    Ok(out)
}

/// Basis indices of the qubit states.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QubitMap {
    pub gg: usize,
    pub ge: usize,
    pub eg: usize,
    pub ee: usize,
}

impl QubitMap {
    pub const LABELS: [&'static str; 4] = ["gg", "ge", "eg", "ee"];

    pub fn indices(&self) -> [usize; 4] {
        [self.gg, self.ge, self.eg, self.ee]
    }
}

/// Reference states for the four qubit labels, built from the localized
/// orbitals `g = (0_S ± 0_A)/√2`, `e = (1_S ± 1_A)/√2`. The two mixed
/// references are the mirror-even and mirror-odd combinations
/// `(|g_L e_R⟩ ± |e_L g_R⟩)/√2`, which are the stationary states of a
/// symmetric double well.
pub fn qubit_references(basis: &TwoAtomEigenbasis) -> Result<[Vec<f64>; 4]> {
    let sp = &basis.single;
    let n = basis.pairs.iter().map(|p| p.1 + 1).max().unwrap_or(0);
    if n < 4 || !sp.is_parity_adapted() {
        return Err(Error::Degenerate("qubit states need four parity-adapted single-particle modes".into()));
    }
    let want = [Parity::Even, Parity::Odd, Parity::Even, Parity::Odd];
    if (0..4).any(|k| sp.parity[k] != Some(want[k])) {
        return Err(Error::Degenerate("lowest modes are not two symmetric/antisymmetric doublets".into()));
    }
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let orbital = |a: usize, b: usize, sign: f64| {
        let mut v = vec![0.0; n];
        v[a] = r;
        v[b] = sign * r;
        v
    };
    let (gl, gr, el, er) = (orbital(0, 1, 1.0), orbital(0, 1, -1.0), orbital(2, 3, 1.0), orbital(2, 3, -1.0));
    let gg = basis.product_state(&gl, &gr);
    let ee = basis.product_state(&el, &er);
    let a = basis.product_state(&gl, &er);
    let b = basis.product_state(&el, &gr);
    let ge = a.iter().zip(&b).map(|(x, y)| r * (x + y)).collect();
    let eg = a.iter().zip(&b).map(|(x, y)| r * (x - y)).collect();
    Ok([gg, ge, eg, ee])
}

/// Assigns the qubit labels to eigenstates by maximal overlap with
/// [`qubit_references`]. Each winner must hold more than half of its
/// reference's weight and no state may be claimed twice.
pub fn identify_qubit_states(basis: &TwoAtomEigenbasis) -> Result<QubitMap> {
    let refs = qubit_references(basis)?;
    let mut picked = [0usize; 4];
    for (k, r) in refs.iter().enumerate() {
        let (best, w) = (0..basis.dim())
            .map(|i| {
                let o: f64 = basis.vectors.column(i).iter().zip(r).map(|(x, y)| x * y).sum();
                (i, o * o)
            })
            .fold((0, -1.0), |b, c| if c.1 > b.1 { c } else { b });
        if w <= 0.5 {
            return Err(Error::Ambiguous(format!(
                "{} reference has at most {w:.3} weight on any eigenstate",
                QubitMap::LABELS[k]
            )));
        }
        picked[k] = best;
    }
    for i in 0..4 {
        for j in i + 1..4 {
            if picked[i] == picked[j] {
                return Err(Error::Ambiguous(format!(
                    "{} and {} both map to state {}",
                    QubitMap::LABELS[i],
                    QubitMap::LABELS[j],
                    picked[i]
                )));
            }
        }
    }
    Ok(QubitMap { gg: picked[0], ge: picked[1], eg: picked[2], ee: picked[3] })
}

/// `C_ij = ⟨φ_i|∂/∂ξ|φ_j⟩` by the antisymmetrized difference
/// `(⟨φ_i(ξ_a)|φ_j(ξ_b)⟩ − δ_ij)/(ξ_b − ξ_a)`, central about the midpoint.
/// States are matched by parity and rank and `after` is sign-aligned to
/// `before` internally. Rows and columns follow `before`'s ordering.
pub fn dxi_couplings(before: &TwoAtomEigenbasis, after: &TwoAtomEigenbasis) -> Result<DMatrix<f64>> {
    dxi_couplings_lowest(before, after, usize::MAX)
}

/// As [`dxi_couplings`], requiring unambiguous continuation only for the
/// lowest `strict` states of each parity sector.
pub fn dxi_couplings_lowest(
    before: &TwoAtomEigenbasis,
    after: &TwoAtomEigenbasis,
    strict: usize,
) -> Result<DMatrix<f64>> {
    let d = after.xi - before.xi;
    let partner = partners(before, after)?;
    let o = before.overlap(after);
    let n = before.dim();
    let mut m = DMatrix::from_fn(n, n, |i, j| o[(i, partner[j])]);
    for j in 0..n {
        let v = m[(j, j)];
        if v * v < 0.5 && before.rank(j) < strict {
            return Err(Error::Ambiguous(format!(
                "state {j} keeps only {:.3} of its weight across δξ; reduce the step",
                v * v
            )));
        }
        if v < 0.0 {
            let mut col = m.column_mut(j);
            col *= -1.0;
        }
    }
    let mut c = DMatrix::zeros(n, n);
    if d == 0.0 || !d.is_finite() {
        let identical = (0..n).all(|i| (0..n).all(|j| (m[(i, j)] - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12));
        if identical {
            return Ok(c);
        }
        return Err(Error::invalid("xi", "bases need distinct, known barrier heights"));
    }
    for i in 0..n {
        for j in 0..n {
            if i != j {
                c[(i, j)] = 0.5 * (m[(i, j)] - m[(j, i)]) / d;
            }
        }
    }
    Ok(c)
}

/// Second estimator `⟨φ_i|∂H/∂ξ|φ_j⟩ / (ε_j − ε_i)` for comparison with
/// [`dxi_couplings`]. Degenerate pairs are left at zero.
pub fn hellmann_feynman_couplings(basis: &TwoAtomEigenbasis, dv: &[f64], dg: f64) -> DMatrix<f64> {
    let w = basis.perturbation(dv, dg);
    let n = basis.dim();
    DMatrix::from_fn(n, n, |i, j| {
        let gap = basis.energies[j] - basis.energies[i];
        if i == j || gap == 0.0 {
            0.0
        } else {
            w[(i, j)] / gap
        }
    })
}

// ---------------------------------------------------------------------------
// barrier track

/// Settings for [`XiTrack::build`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrackConfig {
    /// Barrier heights at the ends of the track (joules).
    pub xi_high: f64,
    pub xi_low: f64,
    /// |B| held at the minima along the track (tesla).
    pub b_target: f64,
    pub n_points: usize,
    pub grid_points: usize,
    /// Length of the 1D window along x′ (m).
    pub window: f64,
    pub n_modes: usize,
    /// States kept per parity sector for propagation.
    pub sector_states: usize,
    /// `δξ/ξ` of the central differences for the couplings.
    pub relative_step: f64,
    pub scattering_length: f64,
    /// Diagnostic: pseudo-randomly flips eigenvector signs before gauge
    /// fixing. Results must not depend on it.
    pub gauge_scramble: Option<u64>,
}

impl TrackConfig {
    /// 200 points, 2048-point grid over 6 μm, 12 modes, 11 propagated states per sector.
    pub fn new(xi_high: f64, xi_low: f64, b_target: f64, scattering_length: f64) -> Self {
        Self {
            xi_high,
            xi_low,
            b_target,
            n_points: 200,
            grid_points: 2048,
            window: 6.0e-6,
            n_modes: 12,
            sector_states: 11,
            relative_step: 1e-3,
            scattering_length,
            gauge_scramble: None,
        }
    }

    /// Track nodes, ascending, geometrically clustered toward `xi_low`.
    pub fn nodes(&self) -> Vec<f64> {
        let n = self.n_points;
        let r = self.xi_high / self.xi_low;
        (0..n)
            .map(|k| if k + 1 == n { self.xi_high } else { self.xi_low * r.powf(k as f64 / (n - 1) as f64) })
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if !(self.xi_high > self.xi_low && self.xi_low > 0.0) {
            return Err(Error::invalid("xi", "need xi_high > xi_low > 0"));
        }
        if self.n_points < 3 {
            return Err(Error::invalid("n_points", "need at least three track points"));
        }
        if self.n_modes < 4 {
            return Err(Error::invalid("n_modes", "need at least four modes for the qubit states"));
        }
        if self.sector_states == 0 {
            return Err(Error::invalid("sector_states", "must be positive"));
        }
        if !(self.relative_step > 0.0 && self.relative_step < 0.1) {
            return Err(Error::invalid("relative_step", "must lie in (0, 0.1)"));
        }
        if self.grid_points % 2 != 0 || self.grid_points < 64 {
            return Err(Error::invalid("grid_points", "must be even and at least 64"));
        }
        Ok(())
    }
}

/// Per-node record of the trap along the track.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackSample {
    pub xi: f64,
    pub i0: f64,
    pub alpha: f64,
    pub tilt: f64,
    pub b_min: f64,
    pub g1d: f64,
    pub frequencies: Frequencies,
}

/// Energies and couplings of one parity sector, splined in ξ.
#[derive(Debug, Clone)]
pub struct TrackSector {
    pub parity: Option<Parity>,
    pub dim: usize,
    energies: MultiSpline,
    couplings: MultiSpline,
}

impl TrackSector {
    /// Sector from tabulated data: `energies[i][k]` is ε_i at `xi[k]` and
    /// `couplings[i * dim + j][k]` is `C_ij` there. `xi` must be ascending.
    pub fn from_samples(
        parity: Option<Parity>,
        xi: &[f64],
        energies: &[Vec<f64>],
        couplings: &[Vec<f64>],
    ) -> Result<Self> {
        let dim = energies.len();
        if dim == 0 || couplings.len() != dim * dim {
            return Err(Error::invalid("couplings", "expected dim² series for dim energies"));
        }
        Ok(Self {
            parity,
            dim,
            energies: MultiSpline::new(xi, energies)?,
            couplings: MultiSpline::new(xi, couplings)?,
        })
    }

    /// Interpolation range in ξ.
    pub fn domain(&self) -> (f64, f64) {
        self.energies.domain()
    }

    /// Tabulation points in ξ.
    pub fn knots(&self) -> &[f64] {
        self.energies.knots()
    }

    /// ε_i(ξ), ascending within the sector (joules).
    pub fn energies_into(&self, xi: f64, out: &mut [f64]) {
        self.energies.eval_into(xi, out);
    }

    /// `C_ij(ξ) = ⟨φ_i|∂/∂ξ|φ_j⟩`, row-major `dim × dim` (1/J).
    pub fn couplings_into(&self, xi: f64, out: &mut [f64]) {
        self.couplings.eval_into(xi, out);
    }

    pub fn energies(&self, xi: f64) -> Vec<f64> {
        self.energies.eval(xi)
    }

    pub fn couplings(&self, xi: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.couplings.eval(xi))
    }

    /// Copy with the couplings multiplied by `s_i s_j` (a constant gauge change).
    pub fn regauged(&self, signs: &[f64]) -> Self {
        let knots = self.couplings.knots().to_vec();
        let d = self.dim;
        let series: Vec<Vec<f64>> = (0..d * d)
            .map(|k| knots.iter().map(|&x| self.couplings.eval(x)[k] * signs[k / d] * signs[k % d]).collect())
            .collect();
        Self { couplings: MultiSpline::new(&knots, &series).expect("same knots"), ..self.clone() }
    }
}

/// Position of a state inside the track's sector layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Slot {
    pub sector: usize,
    pub rank: usize,
}

/// Precomputed two-atom spectrum and couplings between two barrier heights.
#[derive(Debug, Clone)]
pub struct XiTrack {
    pub config: TrackConfig,
    /// Ascending.
    pub samples: Vec<TrackSample>,
    pub sectors: Vec<TrackSector>,
    /// Slots of gg, ge, eg, ee.
    pub qubits: [Slot; 4],
    /// Eigenbasis at `xi_high` in the track gauge.
    pub high: TwoAtomEigenbasis,
    currents: MultiSpline,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn scramble(basis: &mut TwoAtomEigenbasis, seed: u64) {
    let mut sign = vec![1.0; basis.single.len()];
    for (k, psi) in basis.single.states.iter_mut().enumerate() {
        if splitmix(seed ^ (k as u64).wrapping_mul(31)) & 1 == 1 {
            psi.iter_mut().for_each(|x| *x = -*x);
            sign[k] = -1.0;
        }
    }
    // pair coefficients follow the single-particle signs so each state is unchanged
    for (r, &(a, b)) in basis.pairs.iter().enumerate() {
        if sign[a] * sign[b] < 0.0 {
            let mut row = basis.vectors.row_mut(r);
            row *= -1.0;
        }
    }
    for c in 0..basis.dim() {
        if splitmix(seed.rotate_left(17) ^ (c as u64).wrapping_mul(131)) & 1 == 1 {
            let mut col = basis.vectors.column_mut(c);
            col *= -1.0;
        }
    }
}

struct Node {
    basis: TwoAtomEigenbasis,
    sample: TrackSample,
    minima: [Vec3; 2],
}

struct TrackBuilder<'a> {
    config: &'a TrackConfig,
    solver: BarrierSolver,
    zeeman: &'a ZeemanPotential,
}

impl TrackBuilder<'_> {
    fn node(&self, xi: f64, start: (f64, f64), seeds: &[Vec3; 2], n_states: usize, tol: f64) -> Result<Node> {
        let sol = self.solver.solve_from(xi, start, seeds)?;
        let model = TrapModel::from_params(&sol.params, self.zeeman)?;
        let half = 0.5 * self.config.window;
        let curve = potential_slice_1d(&model, &sol.axis, (-half, half), self.config.grid_points)?.symmetrized();
        let sp = single_particle_eigen_with(&curve, n_states, self.zeeman.mass(), tol)?;
        let freq = trap_frequencies(&model, &sol.axis.minima[0], &sol.axis, HESSIAN_STEP)?;
        let g1d = interaction_strength(self.config.scattering_length, freq.omega_y(), freq.omega_z());
        let mut basis = two_atom_eigen(&sp, g1d, self.config.n_modes)?;
        basis.xi = xi;
        let sample = TrackSample {
            xi,
            i0: sol.params.i0,
            alpha: sol.params.alpha,
            tilt: sol.axis.tilt,
            b_min: sol.b_min,
            g1d,
            frequencies: freq,
        };
        Ok(Node { basis, sample, minima: sol.axis.minima })
    }
}

impl XiTrack {
    /// Walks from `xi_high` down to `xi_low`, re-solving the currents at every
    /// node from the previous one, and records energies and ∂/∂ξ couplings in
    /// a gauge that is continuous along the track. The gauge at `xi_high` puts
    /// the largest product-basis coefficient of each state positive.
    pub fn build(template: &LayoutParams, zeeman: &ZeemanPotential, config: &TrackConfig) -> Result<Self> {
        config.validate()?;
        let solver = BarrierSolver::new(template.clone(), zeeman.clone(), config.b_target);
        let builder = TrackBuilder { config, solver, zeeman };
        let nodes = config.nodes();
        let first = builder.solver.solve(config.xi_high)?;
        let mut start = (first.params.i0, first.params.alpha);
        let mut seeds = first.axis.minima;
        let h = config.relative_step;
        let n = nodes.len();
        let mut samples = Vec::with_capacity(n);
        let mut energies: Vec<Vec<Vec<f64>>> = Vec::new();
        let mut couplings: Vec<Vec<Vec<f64>>> = Vec::new();
        let mut prev: Option<TwoAtomEigenbasis> = None;
        let mut layout: Vec<(Option<Parity>, Vec<usize>)> = Vec::new();
        let mut high = None;
        for (step, &xi) in nodes.iter().rev().enumerate() {
            let mut center = builder.node(xi, start, &seeds, config.n_modes + 2, GRID_CONVERGENCE_TOL)?;
            let salt = config.gauge_scramble.map(|s| splitmix(s ^ step as u64));
            if let Some(s) = salt {
                scramble(&mut center.basis, s);
            }
            match &prev {
                Some(p) => center.basis.align_lowest(p, config.sector_states)?,
                None if salt.is_some() => {
                    // the first node carries the conventional gauge
                    let fresh = builder.node(xi, start, &seeds, config.n_modes, f64::INFINITY)?;
                    center.basis.align_to(&fresh.basis)?;
                }
                None => {}
            }
            let here = (center.sample.i0, center.sample.alpha);
            let mut lo = builder.node(xi * (1.0 - h), here, &center.minima, config.n_modes, f64::INFINITY)?;
            let hi = builder.node(xi * (1.0 + h), here, &center.minima, config.n_modes, f64::INFINITY)?;
            if let Some(s) = salt {
                scramble(&mut lo.basis, s.rotate_left(5));
            }
            lo.basis.align_lowest(&center.basis, config.sector_states)?;
            let c = dxi_couplings_lowest(&lo.basis, &hi.basis, config.sector_states)?;
            if layout.is_empty() {
                layout = center
                    .basis
                    .sectors()
                    .into_iter()
                    .map(|p| {
                        let mut idx = center.basis.sector_states(p);
                        idx.truncate(config.sector_states);
                        (p, idx)
                    })
                    .collect();
                energies = layout.iter().map(|(_, idx)| vec![Vec::with_capacity(n); idx.len()]).collect();
                couplings = layout.iter().map(|(_, idx)| vec![Vec::with_capacity(n); idx.len() * idx.len()]).collect();
            }
            for (s, (p, _)) in layout.iter().enumerate() {
                let mut idx = center.basis.sector_states(*p);
                idx.truncate(config.sector_states);
                if idx.len() != energies[s].len() {
                    return Err(Error::Ambiguous("parity sector size changed along the track".into()));
                }
                for (r, &i) in idx.iter().enumerate() {
                    energies[s][r].push(center.basis.energies[i]);
                    for (q, &j) in idx.iter().enumerate() {
                        couplings[s][r * idx.len() + q].push(c[(i, j)]);
                    }
                }
            }
            start = here;
            seeds = center.minima;
            samples.push(center.sample.clone());
            if high.is_none() {
                high = Some(center.basis.clone());
            }
            prev = Some(center.basis);
        }
        // nodes were visited high → low
        samples.reverse();
        let xs: Vec<f64> = samples.iter().map(|s| s.xi).collect();
        let mut sectors = Vec::new();
        for (s, (p, idx)) in layout.iter().enumerate() {
            let rev = |v: &Vec<Vec<f64>>| v.iter().map(|x| x.iter().rev().cloned().collect()).collect::<Vec<Vec<f64>>>();
            sectors.push(TrackSector {
                parity: *p,
                dim: idx.len(),
                energies: MultiSpline::new(&xs, &rev(&energies[s]))?,
                couplings: MultiSpline::new(&xs, &rev(&couplings[s]))?,
            });
        }
        let high = high.expect("at least one node");
        let map = identify_qubit_states(&high)?;
        let slot = |i: usize| -> Slot {
            let (s, (_, idx)) = layout.iter().enumerate().find(|(_, (p, _))| *p == high.parity[i]).expect("sector exists");
            let rank = idx.iter().position(|&k| k == i);
            Slot { sector: s, rank: rank.unwrap_or(usize::MAX) }
        };
        let qubits = [slot(map.gg), slot(map.ge), slot(map.eg), slot(map.ee)];
        if qubits.iter().any(|q| q.rank == usize::MAX) {
            return Err(Error::invalid("sector_states", "too few states kept to contain the qubit states"));
        }
        let currents = MultiSpline::new(
            &xs,
            &[samples.iter().map(|s| s.i0).collect(), samples.iter().map(|s| s.alpha).collect()],
        )?;
        Ok(Self { config: config.clone(), samples, sectors, qubits, high, currents })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.config.xi_low, self.config.xi_high)
    }

    /// Interpolated (I₀, α) realizing barrier `xi`.
    pub fn currents(&self, xi: f64) -> (f64, f64) {
        let v = self.currents.eval(xi);
        (v[0], v[1])
    }
}
