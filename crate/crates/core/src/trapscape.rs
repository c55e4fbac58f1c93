//! The double-well landscape: minima, well axis, barrier, trap frequencies,
//! 1D slices and the inverse map from a target barrier to wire currents.

use nalgebra::{Matrix3, SymmetricEigen};
use rayon::prelude::*;

use crate::constants::{MICRON, PLANCK};
use crate::error::{Error, Result};
use crate::magnetostatics::{total_field, total_field_jacobian, ChipLayout, LayoutParams, Vec3};
use crate::roots;
use crate::zeeman::ZeemanPotential;

/// A smooth scalar potential in three dimensions with an analytic gradient.
pub trait Potential3 {
    fn value(&self, p: &Vec3) -> f64;
    fn gradient(&self, p: &Vec3) -> Vec3;
    fn mass(&self) -> f64;
}

/// Magnetic trapping potential `V(r) = E_Zeeman(|B(r)|)` of one layout and state.
#[derive(Debug, Clone)]
pub struct TrapModel {
    pub layout: ChipLayout,
    pub zeeman: ZeemanPotential,
}

impl TrapModel {
    pub fn new(layout: ChipLayout, zeeman: ZeemanPotential) -> Self {
        Self { layout, zeeman }
    }

    pub fn from_params(params: &LayoutParams, zeeman: &ZeemanPotential) -> Result<Self> {
        Ok(Self::new(ChipLayout::new(params)?, zeeman.clone()))
    }

    pub fn field_magnitude(&self, p: &Vec3) -> f64 {
        total_field(&self.layout, p).norm()
    }

    /// Gradient scale used for convergence tests: dE/dB × |bias| / 1 μm.
    pub fn characteristic_gradient(&self) -> f64 {
        let b = self.layout.bias.norm().max(1e-8);
        (self.zeeman.slope(b) * b / MICRON).abs()
    }
}

impl Potential3 for TrapModel {
    fn value(&self, p: &Vec3) -> f64 {
        self.zeeman.energy(self.field_magnitude(p))
    }

    fn gradient(&self, p: &Vec3) -> Vec3 {
        let (b, j) = total_field_jacobian(&self.layout, p);
        let bn = b.norm();
        if bn == 0.0 {
            return Vec3::zeros();
        }
        j.transpose() * (b / bn) * self.zeeman.slope(bn)
    }

    fn mass(&self) -> f64 {
        self.zeeman.mass()
    }
}

/// Hessian by central differences of the analytic gradient, symmetrized.
pub fn hessian<P: Potential3 + ?Sized>(pot: &P, p: &Vec3, h: f64) -> Matrix3<f64> {
    let mut m = Matrix3::zeros();
    for k in 0..3 {
        let mut d = Vec3::zeros();
        d[k] = h;
        let col = (pot.gradient(&(p + d)) - pot.gradient(&(p - d))) / (2.0 * h);
        m.set_column(k, &col);
    }
    (m + m.transpose()) * 0.5
}

/// Box scanned for minima seeds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchWindow {
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub z: (f64, f64),
    pub spacing: f64,
}

impl Default for SearchWindow {
    fn default() -> Self {
        Self {
            x: (-3.0 * MICRON, 3.0 * MICRON),
            y: (-1.5 * MICRON, 1.5 * MICRON),
            z: (0.5 * MICRON, 3.0 * MICRON),
            spacing: 0.05 * MICRON,
        }
    }
}

impl SearchWindow {
    fn contains(&self, p: &Vec3) -> bool {
        let inside = |v: f64, (a, b): (f64, f64)| v >= a && v <= b;
        inside(p.x, self.x) && inside(p.y, self.y) && inside(p.z, self.z)
    }
}

fn axis_points((a, b): (f64, f64), h: f64) -> Vec<f64> {
    let n = ((b - a) / h).round() as usize;
    (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect()
}

/// Relative gradient tolerance for minima, in units of
/// [`TrapModel::characteristic_gradient`]. The straight-line barrier depends
/// to first order on the minima positions, so they are converged close to
/// the roundoff floor.
pub const MINIMA_GTOL: f64 = 1e-10;

/// Local minimization by Newton steps on an eigenvalue-modified Hessian with
/// an Armijo backtracking line search. Returns `None` when the descent leaves
/// `window`, or stalls with a gradient above `1e4 * gtol`.
pub fn descend<P: Potential3 + ?Sized>(pot: &P, start: Vec3, gtol: f64, window: &SearchWindow) -> Option<Vec3> {
    let max_step = 0.05 * MICRON;
    let mut p = start;
    let mut v = pot.value(&p);
    for _ in 0..200 {
        let g = pot.gradient(&p);
        let eig = SymmetricEigen::new(hessian(pot, &p, 1e-9));
        if g.norm() <= gtol {
            // a stationary point with negative curvature is a saddle: step off it downhill
            let (k, lmin) = eig.eigenvalues.iter().enumerate().fold((0, f64::INFINITY), |b, (i, &l)| if l < b.1 { (i, l) } else { b });
            if lmin > 0.0 {
                return Some(p);
            }
            let u: Vec3 = eig.eigenvectors.column(k).into_owned();
            let off = u * (0.2 * max_step);
            let (a, b) = (p + off, p - off);
            let (va, vb) = (pot.value(&a), pot.value(&b));
            p = if va <= vb { a } else { b };
            v = va.min(vb);
            if !window.contains(&p) {
                return None;
            }
            continue;
        }
        let lmax = eig.eigenvalues.iter().fold(0.0f64, |a, l| a.max(l.abs()));
        let floor = (1e-8 * lmax).max(f64::MIN_POSITIVE);
        let mut step = Vec3::zeros();
        for i in 0..3 {
            let u = eig.eigenvectors.column(i);
            let lam = eig.eigenvalues[i].abs().max(floor);
            step -= u * (u.dot(&g) / lam);
        }
        let len = step.norm();
        if len > max_step {
            step *= max_step / len;
        }
        let slope = g.dot(&step);
        let positive = eig.eigenvalues.iter().all(|&l| l > 0.0);
        if positive && -slope <= 64.0 * f64::EPSILON * v.abs() {
            // predicted decrease is below the roundoff of V: trust the Newton step
            p += step;
            v = pot.value(&p);
            continue;
        }
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..40 {
            let q = p + step * t;
            let vq = pot.value(&q);
            if vq <= v + 1e-4 * t * slope + 4.0 * f64::EPSILON * v.abs() {
                p = q;
                v = vq;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !window.contains(&p) {
            return None;
        }
        if !moved {
            return (g.norm() <= 1e4 * gtol && positive).then_some(p);
        }
    }
    let positive = SymmetricEigen::new(hessian(pot, &p, 1e-9)).eigenvalues.iter().all(|&l| l > 0.0);
    (positive && pot.gradient(&p).norm() <= gtol).then_some(p)
}

fn strict_grid_minima(values: &[f64], nx: usize, ny: usize, nz: usize) -> Vec<(usize, usize, usize)> {
    let idx = |i: usize, j: usize, k: usize| (k * ny + j) * nx + i;
    let mut out = Vec::new();
    for k in 1..nz - 1 {
        for j in 1..ny - 1 {
            for i in 1..nx - 1 {
                let v = values[idx(i, j, k)];
                let mut is_min = true;
                'nb: for dk in 0..3 {
                    for dj in 0..3 {
                        for di in 0..3 {
                            if (di, dj, dk) == (1, 1, 1) {
                                continue;
                            }
                            if values[idx(i + di - 1, j + dj - 1, k + dk - 1)] <= v {
                                is_min = false;
                                break 'nb;
                            }
                        }
                    }
                }
                if is_min {
                    out.push((i, j, k));
                }
            }
        }
    }
    out
}

fn dedup_minima(found: Vec<Vec3>, radius: f64) -> Vec<Vec3> {
    let mut uniq: Vec<Vec3> = Vec::new();
    for p in found {
        if uniq.iter().all(|q| (q - p).norm() > radius) {
            uniq.push(p);
        }
    }
    uniq.sort_by(|a, b| a.x.partial_cmp(&b.x).unwrap().then(a.y.partial_cmp(&b.y).unwrap()));
    uniq
}

fn exactly_two(found: Vec<Vec3>) -> Result<[Vec3; 2]> {
    match found.len() {
        2 => Ok([found[0], found[1]]),
        n => Err(Error::MinimaCount(n)),
    }
}

/// All distinct local minima of `pot` in `window`, seeded from strict minima
/// of a coarse grid scan and refined by [`descend`]. Sorted by x.
pub fn local_minima<P: Potential3 + Sync + ?Sized>(pot: &P, window: &SearchWindow, gtol: f64) -> Vec<Vec3> {
    let (xs, ys, zs) = (
        axis_points(window.x, window.spacing),
        axis_points(window.y, window.spacing),
        axis_points(window.z, window.spacing),
    );
    let (nx, ny, nz) = (xs.len(), ys.len(), zs.len());
    let values: Vec<f64> = (0..nz)
        .into_par_iter()
        .flat_map_iter(|k| {
            let (xs, ys, z) = (&xs, &ys, zs[k]);
            ys.iter().flat_map(move |&y| xs.iter().map(move |&x| pot.value(&Vec3::new(x, y, z))))
        })
        .collect();
    let seeds = strict_grid_minima(&values, nx, ny, nz);
    let found: Vec<Vec3> = seeds
        .par_iter()
        .filter_map(|&(i, j, k)| descend(pot, Vec3::new(xs[i], ys[j], zs[k]), gtol, window))
        .collect();
    dedup_minima(found, 1e-3 * MICRON)
}

/// The two trap minima, ordered by increasing x.
pub fn find_minima(model: &TrapModel) -> Result<[Vec3; 2]> {
    find_minima_in(model, &SearchWindow::default())
}

pub fn find_minima_in(model: &TrapModel, window: &SearchWindow) -> Result<[Vec3; 2]> {
    let gtol = MINIMA_GTOL * model.characteristic_gradient();
    exactly_two(local_minima(model, window, gtol))
}

/// Re-locates two minima by local descent from nearby `seeds` (used when
/// currents change slightly along a track).
pub fn follow_minima(model: &TrapModel, seeds: &[Vec3; 2]) -> Result<[Vec3; 2]> {
    let gtol = MINIMA_GTOL * model.characteristic_gradient();
    let window = SearchWindow { x: (-1e-3, 1e-3), y: (-1e-3, 1e-3), z: (1e-9, 1e-3), spacing: 0.0 };
    let found: Vec<Vec3> = seeds.iter().filter_map(|s| descend(model, *s, gtol, &window)).collect();
    let uniq = dedup_minima(found, 1e-3 * MICRON);
    exactly_two(uniq)
}

/// Direction and tilt of the line through the two minima.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WellAxis {
    /// Minima ordered along `direction`.
    pub minima: [Vec3; 2],
    pub center: Vec3,
    /// Unit vector x′, oriented toward positive x.
    pub direction: Vec3,
    /// Angle between x′ and the chip x axis, radians in [0, π/2].
    pub tilt: f64,
}

impl WellAxis {
    /// In-plane transverse axis y′ = ẑ × x′ (normalized).
    pub fn transverse(&self) -> Vec3 {
        let t = Vec3::z().cross(&self.direction);
        let n = t.norm();
        if n == 0.0 {
            Vec3::y()
        } else {
            t / n
        }
    }

    /// Distance between the minima.
    pub fn separation(&self) -> f64 {
        (self.minima[1] - self.minima[0]).norm()
    }

    pub fn point(&self, s: f64) -> Vec3 {
        self.center + self.direction * s
    }
}

pub fn well_axis(minima: &[Vec3; 2]) -> Result<WellAxis> {
    let d = minima[1] - minima[0];
    let len = d.norm();
    if !(len > 1e-6 * MICRON) {
        return Err(Error::Degenerate("coincident minima".into()));
    }
    let mut dir = d / len;
    let mut ordered = *minima;
    if dir.x < 0.0 || (dir.x == 0.0 && dir.y < 0.0) {
        dir = -dir;
        ordered.swap(0, 1);
    }
    let tilt = dir.x.clamp(-1.0, 1.0).acos();
    Ok(WellAxis { minima: ordered, center: (minima[0] + minima[1]) * 0.5, direction: dir, tilt })
}

/// Potential sampled on a uniform grid along a line, with the floor shifted to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialCurve {
    start: f64,
    step: f64,
    values: Vec<f64>,
    /// Anchor point of coordinate 0.
    pub origin: Vec3,
    pub direction: Vec3,
    /// Energy subtracted to put the floor at zero (joules).
    pub floor: f64,
}

impl PotentialCurve {
    pub fn new(start: f64, step: f64, values: Vec<f64>) -> Result<Self> {
        if !(step > 0.0) || values.len() < 3 {
            return Err(Error::invalid("grid", "needs a positive step and at least three points"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("values", "must be finite"));
        }
        Ok(Self { start, step, values, origin: Vec3::zeros(), direction: Vec3::x(), floor: 0.0 })
    }

    /// Samples `f` at `n` points spanning `[a, b]`.
    pub fn from_fn<F: FnMut(f64) -> f64>(a: f64, b: f64, n: usize, mut f: F) -> Result<Self> {
        if n < 3 || !(b > a) {
            return Err(Error::invalid("grid", "needs b > a and at least three points"));
        }
        let step = (b - a) / (n - 1) as f64;
        Self::new(a, step, (0..n).map(|i| f(a + step * i as f64)).collect())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn coordinate(&self, i: usize) -> f64 {
        self.start + self.step * i as f64
    }

    pub fn grid(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.coordinate(i)).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Copy with `c` added to every value.
    pub fn shifted(&self, c: f64) -> Self {
        Self { values: self.values.iter().map(|v| v + c).collect(), floor: self.floor - c, ..self.clone() }
    }

    /// Copy with each value replaced by the mean of itself and its mirror
    /// image about the window center.
    pub fn symmetrized(&self) -> Self {
        let n = self.len();
        let values = (0..n).map(|i| 0.5 * (self.values[i] + self.values[n - 1 - i])).collect();
        Self { values, ..self.clone() }
    }

    /// Largest mirror-pair difference relative to the value range.
    pub fn asymmetry(&self) -> f64 {
        let n = self.len();
        let (lo, hi) = self.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let range = (hi - lo).max(f64::MIN_POSITIVE);
        (0..n / 2).map(|i| (self.values[i] - self.values[n - 1 - i]).abs()).fold(0.0, f64::max) / range
    }

    /// Writes `x_prime_m,V_over_h_kHz` rows.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x_prime_m", "V_over_h_kHz"])?;
        for (i, v) in self.values.iter().enumerate() {
            w.write_record([format!("{:.9e}", self.coordinate(i)), format!("{:.9e}", v / PLANCK * 1e-3)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Samples the trap along the line through the minima, `n_points` over
/// `window = (s_min, s_max)` measured from their midpoint.
pub fn potential_slice_1d(model: &TrapModel, axis: &WellAxis, window: (f64, f64), n_points: usize) -> Result<PotentialCurve> {
    let half = 0.5 * axis.separation();
    if !(window.0 < -half && window.1 > half) {
        return Err(Error::invalid(
            "window",
            format!("[{:e}, {:e}] does not contain both minima at ±{half:e}", window.0, window.1),
        ));
    }
    let raw = PotentialCurve::from_fn(window.0, window.1, n_points, |s| model.value(&axis.point(s)))?;
    let floor = raw.values.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut curve = raw.shifted(-floor);
    curve.floor = floor;
    curve.origin = axis.center;
    curve.direction = axis.direction;
    Ok(curve)
}

// Vertex of the parabola through (−h, a), (0, b), (h, c): offset in units of h and value.
fn parabola_vertex(a: f64, b: f64, c: f64) -> (f64, f64) {
    let den = a - 2.0 * b + c;
    if den == 0.0 {
        return (0.0, b);
    }
    let t = 0.5 * (a - c) / den;
    (t, b - 0.25 * (a - c) * t)
}

/// Interior maximum minus the lower of the two well minima, each refined by
/// quadratic interpolation through the extremal grid point and its neighbours.
pub fn barrier_height(curve: &PotentialCurve) -> Result<f64> {
    let v = curve.values();
    let n = v.len();
    let mut minima: Vec<usize> = (1..n - 1).filter(|&i| v[i] < v[i - 1] && v[i] <= v[i + 1]).collect();
    if minima.len() < 2 {
        return Err(Error::Shape(format!("expected two wells, found {} local minima", minima.len())));
    }
    // the two deepest wells
    minima.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap());
    let (mut l, mut r) = (minima[0], minima[1]);
    if l > r {
        std::mem::swap(&mut l, &mut r);
    }
    let top = (l + 1..r).max_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap()).ok_or_else(|| {
        Error::Shape("wells are adjacent grid points".into())
    })?;
    if !(v[top] > v[l] && v[top] > v[r]) {
        return Err(Error::Shape("no interior maximum between the wells".into()));
    }
    let refine = |i: usize| parabola_vertex(v[i - 1], v[i], v[i + 1]).1;
    let xi = refine(top) - refine(l).min(refine(r));
    Ok(xi.max(0.0))
}

/// Barrier along the straight line through the minima, maximized continuously.
pub fn line_barrier(model: &TrapModel, axis: &WellAxis) -> f64 {
    let half = 0.5 * axis.separation();
    let (_, vmax) = roots::maximize(|s| model.value(&axis.point(s)), -half, half, 1e-13);
    let vmin = model.value(&axis.minima[0]).min(model.value(&axis.minima[1]));
    vmax - vmin
}

/// Trap frequencies (Hz) at a minimum along x′, y′ and z.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frequencies {
    pub x_prime: f64,
    pub y_prime: f64,
    pub z: f64,
}

impl Frequencies {
    pub fn omega_y(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.y_prime
    }

    pub fn omega_z(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.z
    }
}

/// Default finite-difference step for Hessians at a minimum.
pub const HESSIAN_STEP: f64 = 1e-9;

/// Eigenfrequencies of the Hessian at `minimum`, assigned to (x′, y′, z) by
/// eigenvector alignment.
pub fn trap_frequencies<P: Potential3 + ?Sized>(pot: &P, minimum: &Vec3, axis: &WellAxis, h: f64) -> Result<Frequencies> {
    let eig = SymmetricEigen::new(hessian(pot, minimum, h));
    if eig.eigenvalues.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::Shape(format!("Hessian not positive definite: {:?}", eig.eigenvalues.as_slice())));
    }
    let refs = [axis.direction, axis.transverse(), Vec3::z()];
    let mut nu = [0.0; 3];
    let mut taken = [false; 3];
    // greedy assignment by largest |overlap|
    for _ in 0..3 {
        let mut best = (0.0, 0, 0);
        for (r, refv) in refs.iter().enumerate() {
            if nu[r] != 0.0 {
                continue;
            }
            for e in 0..3 {
                if taken[e] {
                    continue;
                }
                let o = eig.eigenvectors.column(e).dot(refv).abs();
                if o >= best.0 {
                    best = (o, r, e);
                }
            }
        }
        let (_, r, e) = best;
        taken[e] = true;
        nu[r] = (eig.eigenvalues[e] / pot.mass()).sqrt() / (2.0 * std::f64::consts::PI);
    }
    Ok(Frequencies { x_prime: nu[0], y_prime: nu[1], z: nu[2] })
}

/// Full description of the double well.
#[derive(Debug, Clone, PartialEq)]
pub struct TrapCharacterization {
    pub axis: WellAxis,
    /// |B| at the minima (tesla).
    pub b_min: f64,
    /// Barrier height along x′ (joules).
    pub barrier: f64,
    /// Frequencies at each minimum, in the order of `axis.minima`.
    pub frequencies: [Frequencies; 2],
    /// Largest singular value of the field Jacobian at the first minimum (T/m).
    pub field_gradient: f64,
}

impl TrapCharacterization {
    pub fn tilt_deg(&self) -> f64 {
        self.axis.tilt.to_degrees()
    }
}

pub fn characterize(model: &TrapModel) -> Result<TrapCharacterization> {
    let minima = find_minima(model)?;
    characterize_at(model, &minima)
}

pub fn characterize_at(model: &TrapModel, minima: &[Vec3; 2]) -> Result<TrapCharacterization> {
    let axis = well_axis(minima)?;
    let b_min = model.field_magnitude(&axis.minima[0]);
    let barrier = line_barrier(model, &axis);
    let f0 = trap_frequencies(model, &axis.minima[0], &axis, HESSIAN_STEP)?;
    let f1 = trap_frequencies(model, &axis.minima[1], &axis, HESSIAN_STEP)?;
    let (_, j) = total_field_jacobian(&model.layout, &axis.minima[0]);
    let field_gradient = j.singular_values().max();
    Ok(TrapCharacterization { axis, b_min, barrier, frequencies: [f0, f1], field_gradient })
}

/// Solution of the barrier/field inversion.
#[derive(Debug, Clone, PartialEq)]
pub struct CurrentSolution {
    pub params: LayoutParams,
    pub axis: WellAxis,
    pub barrier: f64,
    pub b_min: f64,
    pub iterations: usize,
    /// max |relative residual| after each iteration
    pub residuals: Vec<f64>,
}

/// Finds (I₀, α) such that the barrier equals `target_xi` and |B| at the minima equals `b_target`.
#[derive(Debug, Clone)]
pub struct BarrierSolver {
    pub template: LayoutParams,
    pub zeeman: ZeemanPotential,
    pub b_target: f64,
    /// Convergence threshold on the max relative residual.
    pub tolerance: f64,
    /// Residual accepted when the line search can no longer improve (noise floor of the barrier).
    pub stall_tolerance: f64,
    pub max_iterations: usize,
}

/// Barrier, field and axis at one current pair.
pub struct Eval {
    pub xi: f64,
    pub b: f64,
    pub axis: WellAxis,
}

impl BarrierSolver {
    pub fn new(template: LayoutParams, zeeman: ZeemanPotential, b_target: f64) -> Self {
        Self { template, zeeman, b_target, tolerance: 1e-10, stall_tolerance: 1e-8, max_iterations: 40 }
    }

    pub fn eval(&self, i0: f64, alpha: f64, seeds: &[Vec3; 2]) -> Result<Eval> {
        let model = TrapModel::from_params(&self.template.with_currents(i0, alpha), &self.zeeman)?;
        let minima = follow_minima(&model, seeds)?;
        let axis = well_axis(&minima)?;
        Ok(Eval { xi: line_barrier(&model, &axis), b: model.field_magnitude(&axis.minima[0]), axis })
    }

    /// Solves from the template currents, locating the minima by a full scan.
    pub fn solve(&self, target_xi: f64) -> Result<CurrentSolution> {
        let model = TrapModel::from_params(&self.template, &self.zeeman)?;
        let minima = find_minima(&model)?;
        self.solve_from(target_xi, (self.template.i0, self.template.alpha), &minima)
    }

    /// Damped Newton iteration from `start = (I₀, α)` with minima seeds near the start.
    pub fn solve_from(&self, target_xi: f64, start: (f64, f64), seeds: &[Vec3; 2]) -> Result<CurrentSolution> {
        if !(target_xi > 0.0) {
            return Err(Error::invalid("target barrier", "must be positive"));
        }
        let (mut i0, mut alpha) = start;
        let resid = |e: &Eval| [(e.xi - target_xi) / target_xi, (e.b - self.b_target) / self.b_target];
        let norm = |r: [f64; 2]| r[0].abs().max(r[1].abs());
        let mut cur = self.eval(i0, alpha, seeds)?;
        let mut r = resid(&cur);
        let mut history = vec![norm(r)];
        for it in 0..self.max_iterations {
            if norm(r) <= self.tolerance {
                return Ok(CurrentSolution {
                    params: self.template.with_currents(i0, alpha),
                    axis: cur.axis,
                    barrier: cur.xi,
                    b_min: cur.b,
                    iterations: it,
                    residuals: history,
                });
            }
            let seeds = cur.axis.minima;
            let (di, da) = (1e-5 * i0, 1e-5 * alpha);
            let ei = self.eval(i0 + di, alpha, &seeds)?;
            let ea = self.eval(i0, alpha + da, &seeds)?;
            let (ri, ra) = (resid(&ei), resid(&ea));
            let j = [[(ri[0] - r[0]) / di, (ra[0] - r[0]) / da], [(ri[1] - r[1]) / di, (ra[1] - r[1]) / da]];
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            if det == 0.0 || !det.is_finite() {
                return Err(Error::NoConvergence { what: "current inversion", detail: "singular Jacobian".into() });
            }
            let step_i = -(j[1][1] * r[0] - j[0][1] * r[1]) / det;
            let step_a = -(-j[1][0] * r[0] + j[0][0] * r[1]) / det;
            let mut lambda = 1.0;
            let mut improved = false;
            for _ in 0..12 {
                let (ni, na) = (i0 + lambda * step_i, alpha + lambda * step_a);
                if ni > 0.0 && na > 0.0 {
                    if let Ok(e) = self.eval(ni, na, &seeds) {
                        let nr = resid(&e);
                        if norm(nr) < norm(r) {
                            i0 = ni;
                            alpha = na;
                            cur = e;
                            r = nr;
                            improved = true;
                            break;
                        }
                    }
                }
                lambda *= 0.5;
            }
            history.push(norm(r));
            if !improved {
                break;
            }
        }
        if norm(r) <= self.stall_tolerance {
            return Ok(CurrentSolution {
                params: self.template.with_currents(i0, alpha),
                axis: cur.axis,
                barrier: cur.xi,
                b_min: cur.b,
                iterations: history.len() - 1,
                residuals: history,
            });
        }
        Err(Error::NoConvergence {
            what: "current inversion",
            detail: format!("residual history {history:?}"),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::GAUSS;

    struct Harmonic {
        k: [f64; 3],
        mass: f64,
    }

    impl Potential3 for Harmonic {
        fn value(&self, p: &Vec3) -> f64 {
            0.5 * (self.k[0] * p.x * p.x + self.k[1] * p.y * p.y + self.k[2] * p.z * p.z)
        }
        fn gradient(&self, p: &Vec3) -> Vec3 {
            Vec3::new(self.k[0] * p.x, self.k[1] * p.y, self.k[2] * p.z)
        }
        fn mass(&self) -> f64 {
            self.mass
        }
    }

    fn x_axis() -> WellAxis {
        well_axis(&[Vec3::new(-1e-6, 0.0, 0.0), Vec3::new(1e-6, 0.0, 0.0)]).unwrap()
    }

    fn paper_model() -> TrapModel {
        TrapModel::from_params(&LayoutParams::paper_high_barrier(), &ZeemanPotential::rb87_clock()).unwrap()
    }

    // (x² − a²)² + y² + z² in μm units, saddle at the origin
    struct Quartic;

    impl Potential3 for Quartic {
        fn value(&self, p: &Vec3) -> f64 {
            let (x, y, z) = (p.x / MICRON, p.y / MICRON, (p.z - 1.0 * MICRON) / MICRON);
            (x * x - 0.25).powi(2) + y * y + z * z
        }
        fn gradient(&self, p: &Vec3) -> Vec3 {
            let (x, y, z) = (p.x / MICRON, p.y / MICRON, (p.z - 1.0 * MICRON) / MICRON);
            Vec3::new(4.0 * x * (x * x - 0.25), 2.0 * y, 2.0 * z) / MICRON
        }
        fn mass(&self) -> f64 {
            1.0
        }
    }

    #[test]
    fn descent_leaves_saddles() {
        let w = SearchWindow::default();
        let m = descend(&Quartic, Vec3::new(0.0, 0.0, 1.0 * MICRON), 1e-6 / MICRON, &w).unwrap();
        assert!((m.x.abs() - 0.5 * MICRON).abs() < 1e-12);
        let all = local_minima(&Quartic, &w, 1e-6 / MICRON);
        assert_eq!(all.len(), 2);
    }

    #[test]
    fn harmonic_frequencies_exact() {
        let m = 1.44e-25;
        let w = [2e4, 9e5, 1e6];
        let pot = Harmonic { k: [m * w[0] * w[0], m * w[1] * w[1], m * w[2] * w[2]], mass: m };
        let f = trap_frequencies(&pot, &Vec3::zeros(), &x_axis(), 1e-8).unwrap();
        let two_pi = 2.0 * std::f64::consts::PI;
        for (got, want) in [f.x_prime, f.y_prime, f.z].iter().zip(w) {
            assert!((got * two_pi / want - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn hessian_richardson_ratio() {
        // quartic term gives an O(h²) error in the central difference
        struct Quartic;
        impl Potential3 for Quartic {
            fn value(&self, p: &Vec3) -> f64 {
                p.x.powi(4) + p.x * p.x
            }
            fn gradient(&self, p: &Vec3) -> Vec3 {
                Vec3::new(4.0 * p.x.powi(3) + 2.0 * p.x, 0.0, 0.0)
            }
            fn mass(&self) -> f64 {
                1.0
            }
        }
        let p = Vec3::new(0.3, 0.0, 0.0);
        let exact = 12.0 * 0.09 + 2.0;
        let e1 = hessian(&Quartic, &p, 1e-2)[(0, 0)] - exact;
        let e2 = hessian(&Quartic, &p, 5e-3)[(0, 0)] - exact;
        assert!((e1 / e2 - 4.0).abs() < 1e-3, "{}", e1 / e2);
    }

    #[test]
    fn trap_hessian_converges_under_halving() {
        let model = paper_model();
        let minima = find_minima(&model).unwrap();
        let axis = well_axis(&minima).unwrap();
        let f = |h: f64| trap_frequencies(&model, &axis.minima[0], &axis, h).unwrap().x_prime;
        let (a, b, c) = (f(1e-8), f(5e-9), f(2.5e-9));
        let ratio = (a - b) / (b - c);
        assert!((ratio - 4.0).abs() < 0.3, "ratio {ratio}");
    }

    #[test]
    fn barrier_invariant_under_shift() {
        let curve = PotentialCurve::from_fn(-2.0, 2.0, 401, |x| (x * x - 1.0).powi(2)).unwrap();
        let xi = barrier_height(&curve).unwrap();
        assert!((xi - 1.0).abs() < 1e-3);
        for c in [-5.0, 0.0, 1e3] {
            assert!((barrier_height(&curve.shifted(c)).unwrap() - xi).abs() < 1e-9);
        }
    }

    #[test]
    fn barrier_quadratic_refinement_is_exact_for_parabolas() {
        // piecewise parabolic wells and bump, off-grid extrema
        let f = |x: f64| {
            if x < -0.3 {
                (x + 1.013).powi(2)
            } else if x > 0.3 {
                (x - 0.987).powi(2) + 0.01
            } else {
                0.6 - (x - 0.0123).powi(2)
            }
        };
        let curve = PotentialCurve::from_fn(-2.0, 2.0, 201, f).unwrap();
        assert!((barrier_height(&curve).unwrap() - 0.6).abs() < 1e-12);
    }

    #[test]
    fn single_well_is_an_error() {
        let curve = PotentialCurve::from_fn(-1.0, 1.0, 101, |x| x * x).unwrap();
        assert!(matches!(barrier_height(&curve), Err(Error::Shape(_))));
    }

    #[test]
    fn well_axis_conventions() {
        let a = Vec3::new(-1e-6, 0.0, 1e-6);
        let b = Vec3::new(1e-6, 0.0, 1e-6);
        assert_eq!(well_axis(&[a, b]).unwrap().tilt, 0.0);
        let c = Vec3::new(0.9e-6, 0.3e-6, 1.1e-6);
        let ab = well_axis(&[a, c]).unwrap();
        let ba = well_axis(&[c, a]).unwrap();
        assert_eq!(ab.tilt, ba.tilt);
        assert_eq!(ab.direction, ba.direction);
        assert!(ab.direction.x > 0.0);
        assert!(matches!(well_axis(&[a, a]), Err(Error::Degenerate(_))));
    }

    #[test]
    fn paper_layout_minima_are_c2_partners() {
        let model = paper_model();
        let m = find_minima(&model).unwrap();
        let g = model.characteristic_gradient();
        for p in &m {
            assert!(model.gradient(p).norm() <= 1e-6 * g);
        }
        let image = Vec3::new(-m[0].x, -m[0].y, m[0].z);
        assert!((image - m[1]).norm() < 1e-12, "{:?}", image - m[1]);
    }

    #[test]
    fn no_modulation_gives_no_double_well() {
        let params = LayoutParams::paper_high_barrier().with_currents(40.89e-3, 0.0);
        let model = TrapModel::from_params(&params, &ZeemanPotential::rb87_clock()).unwrap();
        match find_minima(&model) {
            Err(Error::MinimaCount(n)) => assert_ne!(n, 2),
            other => panic!("expected a count error, got {other:?}"),
        }
    }

    #[test]
    fn slice_floor_and_window() {
        let model = paper_model();
        let axis = well_axis(&find_minima(&model).unwrap()).unwrap();
        let curve = potential_slice_1d(&model, &axis, (-1e-6, 1e-6), 801).unwrap();
        let floor = curve.values().iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(floor, 0.0);
        assert!(potential_slice_1d(&model, &axis, (-0.1e-6, 1e-6), 11).is_err());
    }

    #[test]
    fn slice_barrier_matches_line_barrier() {
        let model = paper_model();
        let axis = well_axis(&find_minima(&model).unwrap()).unwrap();
        let curve = potential_slice_1d(&model, &axis, (-1e-6, 1e-6), 4001).unwrap();
        let a = barrier_height(&curve).unwrap();
        let b = line_barrier(&model, &axis);
        assert!((a / b - 1.0).abs() < 1e-6, "{a} {b}");
    }

    #[test]
    fn characterization_is_quasi_one_dimensional() {
        let c = characterize(&paper_model()).unwrap();
        for f in &c.frequencies {
            assert!(f.x_prime < f.y_prime && f.x_prime < f.z);
        }
        assert!(c.b_min > 0.0 && c.barrier > 0.0);
        assert!(c.field_gradient > 0.0);
    }

    #[test]
    fn inversion_round_trip() {
        let z = ZeemanPotential::rb87_clock();
        let solver = BarrierSolver::new(LayoutParams::paper_high_barrier(), z.clone(), 3.23 * GAUSS);
        let target = 30.0e3 * PLANCK;
        let sol = solver.solve(target).unwrap();
        assert!((sol.barrier / target - 1.0).abs() < 1e-8);
        assert!((sol.b_min / (3.23 * GAUSS) - 1.0).abs() < 1e-8);
        let model = TrapModel::from_params(&sol.params, &z).unwrap();
        let curve = potential_slice_1d(&model, &sol.axis, (-1e-6, 1e-6), 4001).unwrap();
        assert!((barrier_height(&curve).unwrap() / target - 1.0).abs() < 1e-6);
    }

    #[test]
    fn inversion_rejects_nonpositive_target() {
        let solver =
            BarrierSolver::new(LayoutParams::paper_high_barrier(), ZeemanPotential::rb87_clock(), 3.23 * GAUSS);
        assert!(solver.solve(0.0).is_err());
    }
}
