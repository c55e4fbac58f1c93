//! Adaptive Gauss–Kronrod (7/15) quadrature.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_DEPTH: u32 = 48;
/// Upper bound on panel evaluations for one adaptive integral.
const MAX_PANELS: usize = 100_000;

/// Integral estimate together with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

fn gk15<F: FnMut(f64) -> Result<f64>>(f: &mut F, a: f64, b: f64) -> Result<Estimate> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c)?;
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for i in 0..7 {
        let dx = h * XGK[i];
        let pair = f(c - dx)? + f(c + dx)?;
        kronrod += WGK[i] * pair;
        if i % 2 == 1 {
            gauss += WG[i / 2] * pair;
        }
    }
    Ok(Estimate { value: kronrod * h, error: ((kronrod - gauss) * h).abs() })
}

fn refine<F: FnMut(f64) -> Result<f64>>(
    f: &mut F,
    a: f64,
    b: f64,
    whole: Estimate,
    tol: f64,
    depth: u32,
    budget: &mut usize,
) -> Result<Estimate> {
    if whole.error <= tol {
        return Ok(whole);
    }
    if depth >= MAX_DEPTH || *budget < 2 {
        return Err(Error::Quadrature { estimate: whole.error, tolerance: tol });
    }
    let m = 0.5 * (a + b);
    let left = gk15(f, a, m)?;
    let right = gk15(f, m, b)?;
    *budget -= 2;
    // Accept the split when it already beats the tolerance; the Kronrod
    // difference on the halves is a much tighter bound than on the whole.
    if left.error + right.error <= tol {
        return Ok(Estimate { value: left.value + right.value, error: left.error + right.error });
    }
    let l = refine(f, a, m, left, 0.5 * tol, depth + 1, budget)?;
    let r = refine(f, m, b, right, 0.5 * tol, depth + 1, budget)?;
    Ok(Estimate { value: l.value + r.value, error: l.error + r.error })
}

/// Integrates a fallible integrand over `[a, b]` to absolute tolerance `tol`.
pub fn integrate_with<F: FnMut(f64) -> Result<f64>>(mut f: F, a: f64, b: f64, tol: f64) -> Result<Estimate> {
    let whole = gk15(&mut f, a, b)?;
    let mut budget = MAX_PANELS;
    refine(&mut f, a, b, whole, tol, 0, &mut budget)
}

/// Integrates `f` over `[a, b]` to absolute tolerance `tol`.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> Result<Estimate> {
    integrate_with(|x| Ok(f(x)), a, b, tol)
}

fn gk15_vec<F: FnMut(f64, &mut [f64])>(f: &mut F, a: f64, b: f64, n: usize) -> (Vec<f64>, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut v = vec![0.0; n];
    let (mut kronrod, mut gauss) = (vec![0.0; n], vec![0.0; n]);
    let mut add = |x: f64, wk: f64, wg: f64, v: &mut [f64]| {
        f(x, v);
        for i in 0..n {
            kronrod[i] += wk * v[i];
            gauss[i] += wg * v[i];
        }
    };
    add(c, WGK[7], WG[3], &mut v);
    for i in 0..7 {
        let wg = if i % 2 == 1 { WG[i / 2] } else { 0.0 };
        add(c - h * XGK[i], WGK[i], wg, &mut v);
        add(c + h * XGK[i], WGK[i], wg, &mut v);
    }
    let err = (0..n).map(|i| ((kronrod[i] - gauss[i]) * h).abs()).fold(0.0, f64::max);
    (kronrod.into_iter().map(|k| k * h).collect(), err)
}

/// Integrates the vector-valued `f` (writing `n` components) over `[a, b]`,
/// bisecting until every component meets the absolute tolerance `tol`.
pub fn integrate_vec<F: FnMut(f64, &mut [f64])>(mut f: F, a: f64, b: f64, n: usize, tol: f64) -> Result<Vec<f64>> {
    let mut total = vec![0.0; n];
    let mut stack = vec![(a, b, tol, 0u32)];
    let mut budget = MAX_PANELS;
    while let Some((lo, hi, t, depth)) = stack.pop() {
        let (v, err) = gk15_vec(&mut f, lo, hi, n);
        if err <= t || lo == hi {
            total.iter_mut().zip(&v).for_each(|(s, x)| *s += x);
            continue;
        }
        if depth >= MAX_DEPTH || budget < 2 {
            return Err(Error::Quadrature { estimate: err, tolerance: t });
        }
        budget -= 2;
        let m = 0.5 * (lo + hi);
        stack.push((m, hi, 0.5 * t, depth + 1));
        stack.push((lo, m, 0.5 * t, depth + 1));
    }
    Ok(total)
}

/// Iterated 2D integral over the rectangle `[ax, bx] × [ay, by]`.
pub fn integrate_2d<F: FnMut(f64, f64) -> f64>(
    mut f: F,
    (ax, bx): (f64, f64),
    (ay, by): (f64, f64),
    tol: f64,
) -> Result<Estimate> {
    let inner_tol = 0.1 * tol / (bx - ax).abs().max(f64::MIN_POSITIVE);
    let mut inner_err = 0.0;
    let outer = integrate_with(
        |x| {
            let e = integrate(|y| f(x, y), ay, by, inner_tol)?;
            inner_err = f64::max(inner_err, e.error);
            Ok(e.value)
        },
        ax,
        bx,
        0.9 * tol,
    )?;
    Ok(Estimate { value: outer.value, error: outer.error + inner_err * (bx - ax).abs() })
}
