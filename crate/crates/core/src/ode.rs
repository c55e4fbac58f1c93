//! Gragg–Bulirsch–Stoer extrapolation integrator with adaptive step size
//! and order, for real state vectors.

use crate::error::{Error, Result};

const MAX_ROWS: usize = 10;
const SAFETY: f64 = 0.94;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Options {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step magnitude; zero picks |t1 − t0| / 100.
    pub h_init: f64,
    pub max_steps: usize,
}

impl Default for Options {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-12, h_init: 0.0, max_steps: 200_000 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

/// Stateful integrator; the step size and order carry over between
/// successive calls to [`Integrator::advance`].
#[derive(Debug, Clone)]
pub struct Integrator {
    opts: Options,
    h: f64,
    k: usize,
    pub stats: Stats,
    seq: [usize; MAX_ROWS],
    work: [f64; MAX_ROWS],
}

impl Integrator {
    pub fn new(opts: Options) -> Self {
        let mut seq = [0; MAX_ROWS];
        let mut work = [0.0; MAX_ROWS];
        let mut acc = 1.0;
        for j in 0..MAX_ROWS {
            seq[j] = 2 * (j + 1);
            acc += seq[j] as f64;
            work[j] = acc;
        }
        Self { opts, h: opts.h_init, k: 5, stats: Stats::default(), seq, work }
    }

    fn error_norm(&self, y0: &[f64], y1: &[f64], diff: &[f64]) -> f64 {
        let n = y0.len().max(1) as f64;
        let s: f64 = (0..y0.len())
            .map(|i| {
                let sc = self.opts.atol + self.opts.rtol * y0[i].abs().max(y1[i].abs());
                (diff[i] / sc).powi(2)
            })
            .sum();
        (s / n).sqrt()
    }

    /// Integrates `y' = f(t, y)` from `t0` to `t1` in place. `t1 < t0` runs backwards.
    pub fn advance<F>(&mut self, f: &mut F, t0: f64, t1: f64, y: &mut [f64]) -> Result<()>
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        let n = y.len();
        let span = t1 - t0;
        if span == 0.0 {
            return Ok(());
        }
        let dir = span.signum();
        if self.h == 0.0 || !self.h.is_finite() {
            self.h = span.abs() / 100.0;
        }
        let mut h = self.h.min(span.abs());
        let mut t = t0;
        let mut f0 = vec![0.0; n];
        let mut table: Vec<Vec<f64>> = vec![vec![0.0; n]; MAX_ROWS];
        let (mut zm, mut zc, mut tmp, mut fz) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        let mut diff = vec![0.0; n];
        let mut steps = 0usize;
        while (t1 - t) * dir > 0.0 {
            steps += 1;
            if steps > self.opts.max_steps {
                return Err(Error::Integration(format!("step limit {} reached at t = {t:e}", self.opts.max_steps)));
            }
            let remaining = (t1 - t).abs();
            let last = h >= remaining * (1.0 - 1e-12);
            if last {
                h = remaining;
            }
            if h <= 1e-14 * t.abs().max(remaining) {
                return Err(Error::Integration(format!("step size underflow at t = {t:e}")));
            }
            let hs = h * dir;
            f(t, y, &mut f0);
            self.stats.evaluations += 1;
            let kmax = (self.k + 1).min(MAX_ROWS - 1);
            let mut accepted = None;
            let mut h_opt = [0.0; MAX_ROWS];
            let mut errs = [f64::INFINITY; MAX_ROWS];
            for j in 0..=kmax {
                // modified midpoint with seq[j] substeps
                let m = self.seq[j];
                let sub = hs / m as f64;
                for i in 0..n {
                    zm[i] = y[i];
                    zc[i] = y[i] + sub * f0[i];
                }
                for s in 1..m {
                    f(t + s as f64 * sub, &zc, &mut fz);
                    for i in 0..n {
                        tmp[i] = zm[i] + 2.0 * sub * fz[i];
                        zm[i] = zc[i];
                        zc[i] = tmp[i];
                    }
                }
                f(t + hs, &zc, &mut fz);
                self.stats.evaluations += m;
                for i in 0..n {
                    table[j][i] = 0.5 * (zm[i] + zc[i] + sub * fz[i]);
                }
                // Aitken–Neville in h²
                for l in (0..j).rev() {
                    let ratio = (self.seq[j] as f64 / self.seq[l] as f64).powi(2) - 1.0;
                    let (lo, hi) = table.split_at_mut(l + 1);
                    let (tl, tl1) = (&mut lo[l], &hi[0]);
                    for i in 0..n {
                        tl[i] = tl1[i] + (tl1[i] - tl[i]) / ratio;
                    }
                }
                if j == 0 {
                    continue;
                }
                // table[0] holds the highest-order estimate, table[1] the next lower
                for i in 0..n {
                    diff[i] = table[0][i] - table[1][i];
                }
                let err = self.error_norm(y, &table[0], &diff);
                errs[j] = err;
                let expo = 1.0 / (2 * j + 1) as f64;
                let fac = if err == 0.0 { 4.0 } else { (SAFETY * (0.65 / err).powf(expo)).clamp(0.02, 4.0) };
                h_opt[j] = h * fac;
                if err <= 1.0 && j + 1 >= self.k {
                    accepted = Some(j);
                    break;
                }
                if j + 1 >= self.k && j >= kmax {
                    break;
                }
            }
            match accepted {
                Some(j) => {
                    self.stats.accepted += 1;
                    t = if last { t1 } else { t + hs };
                    y.copy_from_slice(&table[0]);
                    // choose next order by work per unit step
                    let w_here = self.work[j] / h_opt[j];
                    let (target, h_new) = if j >= 2 && self.work[j - 1] / h_opt[j - 1] < 0.9 * w_here {
                        (j - 1, h_opt[j - 1])
                    } else if j >= 2 && self.work[j - 1] / h_opt[j - 1] > w_here && j + 1 < MAX_ROWS - 1 {
                        (j + 1, h_opt[j] * self.work[j + 1] / self.work[j])
                    } else {
                        (j, h_opt[j])
                    };
                    self.k = (target + 1).clamp(2, MAX_ROWS - 2);
                    if !last {
                        h = h_new;
                    } else {
                        h = h_new.max(h);
                    }
                    self.h = h;
                }
                None => {
                    self.stats.rejected += 1;
                    let j = (1..=kmax).filter(|&j| errs[j].is_finite()).min_by(|&a, &b| {
                        (self.work[a] / h_opt[a]).partial_cmp(&(self.work[b] / h_opt[b])).unwrap()
                    });
                    h = match j {
                        Some(j) => h_opt[j].min(0.5 * h),
                        None => 0.25 * h,
                    };
                    if y.iter().any(|v| !v.is_finite()) {
                        return Err(Error::Integration("non-finite state".into()));
                    }
                }
            }
        }
        Ok(())
    }
}

/// One-shot integration from `t0` to `t1`.
pub fn integrate<F>(mut f: F, t0: f64, t1: f64, y: &mut [f64], opts: Options) -> Result<Stats>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let mut it = Integrator::new(opts);
    it.advance(&mut f, t0, t1, y)?;
    Ok(it.stats)
}
