//! Static fields of straight wires with rectangular cross-section.
//!
//! Chip frame: `x` runs along the quadrupole wire, `y` along the two side
//! wires, `z` is the surface normal with the chip surface at `z = 0`.
//! Every wire is infinitely long and lies parallel to the surface, so its
//! cross-section spans a width `W` in the surface plane and a height `H`
//! along `z`.

use std::io::Write;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::constants::{GAUSS, K_0, MICRON, MILLIAMP};
use crate::error::{Error, Result};
use crate::quadrature;

pub type Vec3 = Vector3<f64>;

/// Absolute tolerance (tesla) used by the quadrature oracle unless overridden.
pub const QUADRATURE_TOL: f64 = 1e-12;

/// A straight, infinitely long conductor of rectangular section.
#[derive(Debug, Clone, PartialEq)]
pub struct WireSegment {
    axis: Vec3,
    center: Vec3,
    width: f64,
    height: f64,
    current: f64,
}

impl WireSegment {
    /// `axis` must be a unit vector in the chip plane; the current flows along it.
    pub fn new(axis: Vec3, center: Vec3, width: f64, height: f64, current: f64) -> Result<Self> {
        if !(width > 0.0 && width.is_finite()) {
            return Err(Error::invalid("width", format!("must be positive, got {width}")));
        }
        if !(height > 0.0 && height.is_finite()) {
            return Err(Error::invalid("height", format!("must be positive, got {height}")));
        }
        if (axis.norm() - 1.0).abs() > 1e-12 || axis.z.abs() > 1e-12 {
            return Err(Error::invalid("axis", "must be a unit vector parallel to the chip surface"));
        }
        if !current.is_finite() || center.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("current", "must be finite"));
        }
        Ok(Self { axis, center, width, height, current })
    }

    pub fn axis(&self) -> Vec3 {
        self.axis
    }

    pub fn center(&self) -> Vec3 {
        self.center
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn current(&self) -> f64 {
        self.current
    }

    pub fn with_current(&self, current: f64) -> Self {
        Self { current, ..self.clone() }
    }

    pub fn translated(&self, shift: Vec3) -> Self {
        Self { center: self.center + shift, ..self.clone() }
    }

    /// In-plane direction across the width; (width_dir, z, axis) is right-handed.
    pub fn width_dir(&self) -> Vec3 {
        Vec3::z().cross(&self.axis)
    }

    /// Transverse coordinates of `p` relative to the section center.
    pub fn local(&self, p: &Vec3) -> (f64, f64) {
        let d = p - self.center;
        (d.dot(&self.width_dir()), d.z)
    }

    fn to_chip(&self, bw: f64, bh: f64) -> Vec3 {
        self.width_dir() * bw + Vec3::z() * bh
    }
}

/// Field magnitude of an infinitely thin, infinitely long wire at distance `r`.
pub fn field_thin_wire(current: f64, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!("distance must be positive, got {r}")));
    }
    Ok(K_0 * current / r)
}

/// `u/2 · ln(u² + v²) + v · atan(u/v)`, the corner antiderivative of `v/(u²+v²)`.
/// Both terms are continued by their limits where an argument vanishes.
#[inline]
fn corner(u: f64, v: f64) -> f64 {
    let r2 = u * u + v * v;
    let log_term = if u == 0.0 { 0.0 } else { 0.5 * u * r2.ln() };
    let atan_term = if v == 0.0 { 0.0 } else { v * (u / v).atan() };
    log_term + atan_term
}

#[inline]
fn atan_ratio(u: f64, v: f64) -> f64 {
    if u == 0.0 {
        0.0
    } else {
        (u / v).atan()
    }
}

/// Closed-form transverse field `(B_w, B_h)` of a rectangular conductor centered
/// at the origin, evaluated at local coordinates `(y, z)`.
///
/// The arctangents take the ratio with the transverse coordinate of the
/// same corner in the denominator for `B_w` and the roles swapped for
/// `B_h`, which keeps the expressions valid above, below and beside the
/// section as well as inside it.
pub fn field_rect_local(width: f64, height: f64, current: f64, y: f64, z: f64) -> (f64, f64) {
    let c = K_0 * current / (width * height);
    let (yp, ym) = (y + 0.5 * width, y - 0.5 * width);
    let (zp, zm) = (z + 0.5 * height, z - 0.5 * height);
    let by = corner(yp, zm) + corner(ym, zp) - corner(ym, zm) - corner(yp, zp);
    let bz = corner(zm, ym) + corner(zp, yp) - corner(zm, yp) - corner(zp, ym);
    (c * by, c * bz)
}

/// Jacobian `[[∂B_w/∂y, ∂B_w/∂z], [∂B_h/∂y, ∂B_h/∂z]]` of [`field_rect_local`].
pub fn field_rect_local_jacobian(width: f64, height: f64, current: f64, y: f64, z: f64) -> [[f64; 2]; 2] {
    let c = K_0 * current / (width * height);
    let (yp, ym) = (y + 0.5 * width, y - 0.5 * width);
    let (zp, zm) = (z + 0.5 * height, z - 0.5 * height);
    let lr = |u: f64, v: f64| (u * u + v * v).ln();
    let dyy = 0.5 * (lr(yp, zm) + lr(ym, zp) - lr(ym, zm) - lr(yp, zp));
    let dyz = atan_ratio(yp, zm) + atan_ratio(ym, zp) - atan_ratio(ym, zm) - atan_ratio(yp, zp);
    let dzy = atan_ratio(zm, ym) + atan_ratio(zp, yp) - atan_ratio(zm, yp) - atan_ratio(zp, ym);
    [[c * dyy, c * dyz], [c * dzy, -c * dyy]]
}

/// Field of a rectangular wire at `p` (chip frame). The component along the
/// wire axis is zero.
pub fn field_rect_wire(wire: &WireSegment, p: &Vec3) -> Vec3 {
    let (y, z) = wire.local(p);
    let (bw, bh) = field_rect_local(wire.width, wire.height, wire.current, y, z);
    wire.to_chip(bw, bh)
}

/// `∂B_i/∂x_j` of a rectangular wire at `p` (chip frame).
pub fn field_rect_wire_jacobian(wire: &WireSegment, p: &Vec3) -> Matrix3<f64> {
    let (y, z) = wire.local(p);
    let j = field_rect_local_jacobian(wire.width, wire.height, wire.current, y, z);
    let ew = wire.width_dir();
    let ez = Vec3::z();
    let bw_grad = ew * j[0][0] + ez * j[0][1];
    let bh_grad = ew * j[1][0] + ez * j[1][1];
    ew * bw_grad.transpose() + ez * bh_grad.transpose()
}

/// Field of a rectangular wire obtained by integrating the thin-wire field
/// over the cross-section numerically, to absolute tolerance `tol` (tesla).
pub fn field_rect_wire_quadrature(wire: &WireSegment, p: &Vec3, tol: f64) -> Result<Vec3> {
    if wire.current == 0.0 {
        return Ok(Vec3::zeros());
    }
    let (y, z) = wire.local(p);
    let (w, h) = (wire.width, wire.height);
    let scale = w.max(h);
    let (ys, zs) = (y / scale, z / scale);
    let (hw, hh) = (0.5 * w / scale, 0.5 * h / scale);
    // Field = k0 I L / (W H) × dimensionless integral
    let pref = K_0 * wire.current * scale / (w * h);
    let dimless_tol = tol / pref.abs();
    let by = quadrature::integrate_2d(
        |yp, zp| {
            let (dy, dz) = (ys - yp, zs - zp);
            let r2 = dy * dy + dz * dz;
            if r2 == 0.0 {
                0.0
            } else {
                -dz / r2
            }
        },
        (-hw, hw),
        (-hh, hh),
        dimless_tol,
    )?;
    let bz = quadrature::integrate_2d(
        |yp, zp| {
            let (dy, dz) = (ys - yp, zs - zp);
            let r2 = dy * dy + dz * dz;
            if r2 == 0.0 {
                0.0
            } else {
                dy / r2
            }
        },
        (-hw, hw),
        (-hh, hh),
        dimless_tol,
    )?;
    Ok(wire.to_chip(pref * by.value, pref * bz.value))
}

/// Geometry, currents and bias fields of the three-wire double-well chip.
#[derive(Debug, Clone, PartialEq)]
pub struct ChipLayout {
    pub quadrupole_wire: WireSegment,
    pub left_wire: WireSegment,
    pub right_wire: WireSegment,
    /// Uniform bias field (tesla), zero along z.
    pub bias: Vec3,
}

/// Parameters describing a [`ChipLayout`], SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayoutParams {
    /// Quadrupole-wire current I₀ (A).
    pub i0: f64,
    /// Side-wire current ratio α, I₁ = I₂ = α I₀.
    pub alpha: f64,
    pub bias_x: f64,
    pub bias_y: f64,
    pub wire_width: f64,
    pub wire_height: f64,
    /// Depth of the quadrupole-wire center below the surface.
    pub quadrupole_depth: f64,
    /// Center-to-center distance of the side wires.
    pub side_separation: f64,
    /// Height of the side-wire centers above the surface.
    pub side_center_z: f64,
}

impl LayoutParams {
    /// The high-barrier configuration: I₀ = 40.89 mA, α = 70.25e-3,
    /// B₀x = −9.90 G, B₀y = 50.0 G, 700 nm × 200 nm wires.
    pub fn paper_high_barrier() -> Self {
        Self {
            i0: 40.89 * MILLIAMP,
            alpha: 70.25e-3,
            bias_x: -9.90 * GAUSS,
            bias_y: 50.0 * GAUSS,
            wire_width: 0.7 * MICRON,
            wire_height: 0.2 * MICRON,
            quadrupole_depth: 0.4 * MICRON,
            side_separation: 1.6 * MICRON,
            side_center_z: 0.1 * MICRON,
        }
    }

    /// The low-barrier configuration: I₀ = 42.01 mA, α = 69.70e-3.
    pub fn paper_low_barrier() -> Self {
        Self { i0: 42.01 * MILLIAMP, alpha: 69.70e-3, ..Self::paper_high_barrier() }
    }

    pub fn with_currents(&self, i0: f64, alpha: f64) -> Self {
        Self { i0, alpha, ..*self }
    }
}

impl ChipLayout {
    pub fn new(params: &LayoutParams) -> Result<Self> {
        let p = params;
        if p.quadrupole_depth <= 0.0 {
            return Err(Error::invalid("quadrupole_depth", "must be positive"));
        }
        if p.side_separation <= 0.0 {
            return Err(Error::invalid("side_separation", "must be positive"));
        }
        let quadrupole_wire =
            WireSegment::new(Vec3::x(), Vec3::new(0.0, 0.0, -p.quadrupole_depth), p.wire_width, p.wire_height, p.i0)?;
        let side = p.alpha * p.i0;
        let half = 0.5 * p.side_separation;
        let left_wire =
            WireSegment::new(Vec3::y(), Vec3::new(-half, 0.0, p.side_center_z), p.wire_width, p.wire_height, side)?;
        let right_wire =
            WireSegment::new(Vec3::y(), Vec3::new(half, 0.0, p.side_center_z), p.wire_width, p.wire_height, side)?;
        Ok(Self { quadrupole_wire, left_wire, right_wire, bias: Vec3::new(p.bias_x, p.bias_y, 0.0) })
    }

    /// A layout whose wires carry no current: only the bias remains.
    pub fn bias_only(bias: Vec3) -> Self {
        let mut l = Self::new(&LayoutParams { i0: 0.0, ..LayoutParams::paper_high_barrier() })
            .expect("default geometry is valid");
        l.bias = bias;
        l
    }

    pub fn wires(&self) -> [&WireSegment; 3] {
        [&self.quadrupole_wire, &self.left_wire, &self.right_wire]
    }
}

/// Superposition of the fields of `wires` and a uniform `bias`.
pub fn superpose(wires: &[&WireSegment], bias: &Vec3, p: &Vec3) -> Vec3 {
    wires.iter().fold(*bias, |acc, w| acc + field_rect_wire(w, p))
}

/// Total field of the layout at `p`.
pub fn total_field(layout: &ChipLayout, p: &Vec3) -> Vec3 {
    superpose(&layout.wires(), &layout.bias, p)
}

/// Total field and its Jacobian `∂B_i/∂x_j` at `p`.
pub fn total_field_jacobian(layout: &ChipLayout, p: &Vec3) -> (Vec3, Matrix3<f64>) {
    layout.wires().iter().fold((layout.bias, Matrix3::zeros()), |(b, j), w| {
        (b + field_rect_wire(w, p), j + field_rect_wire_jacobian(w, p))
    })
}

/// Writes `x,y,z,Bx,By,Bz` rows (SI units) for each point.
pub fn write_field_map<W: Write>(layout: &ChipLayout, points: &[Vec3], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x_m", "y_m", "z_m", "Bx_T", "By_T", "Bz_T"])?;
    for p in points {
        let b = total_field(layout, p);
        w.write_record([p.x, p.y, p.z, b.x, b.y, b.z].iter().map(|v| format!("{v:.12e}")))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper_wire(axis: Vec3) -> WireSegment {
        WireSegment::new(axis, Vec3::zeros(), 0.7e-6, 0.2e-6, 40.89e-3).unwrap()
    }

    #[test]
    fn thin_wire_values() {
        assert_eq!(field_thin_wire(1.0, 1.0).unwrap(), 2e-7);
        assert_eq!(field_thin_wire(0.0, 1e-6).unwrap(), 0.0);
        let b = field_thin_wire(40.89e-3, 1.19e-6).unwrap();
        assert!((b - 6.872_268_907_563_025e-3).abs() < 1e-15, "{b}");
        assert!(field_thin_wire(1.0, 0.0).is_err());
        assert!(field_thin_wire(1.0, -1.0).is_err());
    }

    #[test]
    fn center_of_section_is_field_free() {
        let w = paper_wire(Vec3::x());
        assert_eq!(field_rect_wire(&w, &Vec3::zeros()), Vec3::zeros());
        let q = field_rect_wire_quadrature(&w, &Vec3::zeros(), QUADRATURE_TOL).unwrap();
        assert!(q.norm() < 1e-15, "{q}");
    }

    #[test]
    fn corners_and_edges_are_finite() {
        let w = paper_wire(Vec3::y());
        for (y, z) in [(0.35e-6, 0.1e-6), (-0.35e-6, 0.1e-6), (0.35e-6, -0.1e-6), (0.0, 0.1e-6), (0.35e-6, 0.0)] {
            let b = field_rect_wire(&w, &Vec3::new(-y, 0.0, z));
            assert!(b.iter().all(|c| c.is_finite()), "({y}, {z}) -> {b}");
        }
    }

    #[test]
    fn matches_thin_wire_far_away() {
        let w = paper_wire(Vec3::x());
        let r = 100.0 * 0.7e-6;
        let b = field_rect_wire(&w, &Vec3::new(0.0, 0.0, r));
        let thin = field_thin_wire(40.89e-3, r).unwrap();
        assert!((b.norm() - thin).abs() / thin <= 1e-4);
        // current along +x, point above: field points along -y
        assert!(b.y < 0.0 && b.x == 0.0);
    }

    #[test]
    fn right_hand_rule_for_side_wire() {
        let w = paper_wire(Vec3::y());
        let b = field_rect_wire(&w, &Vec3::new(0.0, 0.0, 5e-6));
        // ŷ × ẑ = x̂
        assert!(b.x > 0.0 && b.y == 0.0 && b.z.abs() < 1e-12 * b.x);
    }

    #[test]
    fn closed_form_agrees_with_quadrature_directly_above_and_beside() {
        let w = paper_wire(Vec3::x());
        for p in [Vec3::new(0.0, 0.1e-6, 1.6e-6), Vec3::new(0.0, 0.9e-6, 0.05e-6), Vec3::new(3.0, -0.2e-6, -0.3e-6)] {
            let a = field_rect_wire(&w, &p);
            let q = field_rect_wire_quadrature(&w, &p, 1e-13).unwrap();
            assert!((a - q).norm() / a.norm() < 1e-9, "{p}: {a} vs {q}");
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let layout = ChipLayout::new(&LayoutParams::paper_high_barrier()).unwrap();
        let p = Vec3::new(0.3e-6, 0.1e-6, 1.2e-6);
        let (_, j) = total_field_jacobian(&layout, &p);
        let h = 1e-10;
        for k in 0..3 {
            let mut dp = Vec3::zeros();
            dp[k] = h;
            let fd = (total_field(&layout, &(p + dp)) - total_field(&layout, &(p - dp))) / (2.0 * h);
            for i in 0..3 {
                assert!((fd[i] - j[(i, k)]).abs() < 1e-6 * j.norm(), "({i},{k}) {} vs {}", fd[i], j[(i, k)]);
            }
        }
    }

    #[test]
    fn bias_only_layout_is_uniform() {
        let bias = Vec3::new(-9.90e-4, 50.0e-4, 0.0);
        let l = ChipLayout::bias_only(bias);
        for p in [Vec3::new(0.0, 0.0, 1e-6), Vec3::new(2e-6, -1e-6, 3e-6)] {
            assert_eq!(total_field(&l, &p), bias);
        }
    }

    #[test]
    fn superposition_is_componentwise() {
        let a = WireSegment::new(Vec3::x(), Vec3::new(0.0, 0.0, -0.4e-6), 0.7e-6, 0.2e-6, 0.04).unwrap();
        let b = WireSegment::new(Vec3::y(), Vec3::new(0.8e-6, 0.0, 0.1e-6), 0.7e-6, 0.2e-6, 0.003).unwrap();
        let bias = Vec3::new(1e-4, 2e-4, 0.0);
        let p = Vec3::new(0.2e-6, 0.3e-6, 1.1e-6);
        let total = superpose(&[&a, &b], &bias, &p);
        assert_eq!(total, field_rect_wire(&a, &p) + field_rect_wire(&b, &p) + bias);
    }

    #[test]
    fn invalid_geometry_rejected() {
        assert!(WireSegment::new(Vec3::x(), Vec3::zeros(), -1.0, 1.0, 1.0).is_err());
        assert!(WireSegment::new(Vec3::x(), Vec3::zeros(), 1.0, 0.0, 1.0).is_err());
        assert!(WireSegment::new(Vec3::new(1.0, 1.0, 0.0), Vec3::zeros(), 1.0, 1.0, 1.0).is_err());
        assert!(WireSegment::new(Vec3::z(), Vec3::zeros(), 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn field_map_csv_has_header() {
        let layout = ChipLayout::new(&LayoutParams::paper_high_barrier()).unwrap();
        let mut buf = Vec::new();
        write_field_map(&layout, &[Vec3::new(0.0, 0.0, 1e-6)], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("x_m,y_m,z_m,Bx_T,By_T,Bz_T\n"));
        assert_eq!(text.lines().count(), 2);
    }
}
