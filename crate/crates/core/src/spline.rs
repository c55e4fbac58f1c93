//! Natural cubic splines sharing one knot vector.

use crate::error::{Error, Result};

/// Several natural cubic splines on a common, strictly increasing knot grid.
#[derive(Debug, Clone)]
pub struct MultiSpline {
    x: Vec<f64>,
    // values and second derivatives, knot-major: [knot][series]
    y: Vec<f64>,
    m: Vec<f64>,
    n_series: usize,
}

impl MultiSpline {
    /// `series[s][k]` is the value of series `s` at knot `x[k]`.
    pub fn new(x: &[f64], series: &[Vec<f64>]) -> Result<Self> {
        let n = x.len();
        if n < 3 {
            return Err(Error::invalid("knots", "a cubic spline needs at least three knots"));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("knots", "must be strictly increasing"));
        }
        if series.iter().any(|s| s.len() != n) {
            return Err(Error::invalid("series", "every series needs one value per knot"));
        }
        let ns = series.len();
        let mut y = vec![0.0; n * ns];
        for (s, vals) in series.iter().enumerate() {
            for k in 0..n {
                y[k * ns + s] = vals[k];
            }
        }
        // Tridiagonal system for interior second derivatives, shared factorization.
        let mut diag = vec![0.0; n];
        let mut upper = vec![0.0; n];
        let mut rhs = vec![0.0; n * ns];
        for k in 1..n - 1 {
            let (h0, h1) = (x[k] - x[k - 1], x[k + 1] - x[k]);
            diag[k] = (h0 + h1) / 3.0;
            upper[k] = h1 / 6.0;
            for s in 0..ns {
                rhs[k * ns + s] =
                    (y[(k + 1) * ns + s] - y[k * ns + s]) / h1 - (y[k * ns + s] - y[(k - 1) * ns + s]) / h0;
            }
        }
        // forward elimination (sub-diagonal of row k is h0/6)
        for k in 2..n - 1 {
            let w = (x[k] - x[k - 1]) / 6.0 / diag[k - 1];
            diag[k] -= w * upper[k - 1];
            for s in 0..ns {
                rhs[k * ns + s] -= w * rhs[(k - 1) * ns + s];
            }
        }
        let mut m = vec![0.0; n * ns];
        for k in (1..n - 1).rev() {
            for s in 0..ns {
                let next = if k + 1 < n - 1 { m[(k + 1) * ns + s] } else { 0.0 };
                m[k * ns + s] = (rhs[k * ns + s] - upper[k] * next) / diag[k];
            }
        }
        Ok(Self { x: x.to_vec(), y, m, n_series: ns })
    }

    pub fn n_series(&self) -> usize {
        self.n_series
    }

    pub fn knots(&self) -> &[f64] {
        &self.x
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x[0], self.x[self.x.len() - 1])
    }

    fn interval(&self, t: f64) -> usize {
        let n = self.x.len();
        match self.x.partition_point(|&v| v <= t) {
            0 => 0,
            i if i >= n => n - 2,
            i => i - 1,
        }
    }

    /// Values of every series at `t` (cubic extrapolation outside the knots).
    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        let k = self.interval(t);
        let ns = self.n_series;
        let h = self.x[k + 1] - self.x[k];
        let a = (self.x[k + 1] - t) / h;
        let b = 1.0 - a;
        let ca = (a * a * a - a) * h * h / 6.0;
        let cb = (b * b * b - b) * h * h / 6.0;
        for s in 0..ns {
            out[s] = a * self.y[k * ns + s]
                + b * self.y[(k + 1) * ns + s]
                + ca * self.m[k * ns + s]
                + cb * self.m[(k + 1) * ns + s];
        }
    }

    /// First derivatives of every series at `t`.
    pub fn derivative_into(&self, t: f64, out: &mut [f64]) {
        let k = self.interval(t);
        let ns = self.n_series;
        let h = self.x[k + 1] - self.x[k];
        let a = (self.x[k + 1] - t) / h;
        let b = 1.0 - a;
        let ca = -(3.0 * a * a - 1.0) * h / 6.0;
        let cb = (3.0 * b * b - 1.0) * h / 6.0;
        for s in 0..ns {
            out[s] = (self.y[(k + 1) * ns + s] - self.y[k * ns + s]) / h
                + ca * self.m[k * ns + s]
                + cb * self.m[(k + 1) * ns + s];
        }
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.n_series];
        self.eval_into(t, &mut out);
        out
    }
}

/// A single natural cubic spline.
#[derive(Debug, Clone)]
pub struct CubicSpline(MultiSpline);

impl CubicSpline {
    pub fn new(x: &[f64], y: &[f64]) -> Result<Self> {
        Ok(Self(MultiSpline::new(x, &[y.to_vec()])?))
    }

    pub fn eval(&self, t: f64) -> f64 {
        let mut out = [0.0];
        self.0.eval_into(t, &mut out);
        out[0]
    }

    pub fn derivative(&self, t: f64) -> f64 {
        let mut out = [0.0];
        self.0.derivative_into(t, &mut out);
        out[0]
    }

    pub fn domain(&self) -> (f64, f64) {
        self.0.domain()
    }
}
