//! Numeric helpers: compensated summation, summary statistics, and
//! least-squares line fits used by the scaling experiments.

use crate::error::{Error, Result};

/// Kahan–Babuška compensated accumulator.
///
/// Sums are reproducible to ~1e-16 relative regardless of the order in which
/// partial results were *produced*, provided `add` is called in a fixed
/// order; ensemble reductions therefore store per-item results first and
/// reduce sequentially.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    carry: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Compensated sum of a slice in index order.
pub fn kahan_sum(xs: &[f64]) -> f64 {
    let mut acc = KahanSum::new();
    for &x in xs {
        acc.add(x);
    }
    acc.value()
}

/// Sample mean and standard error of the mean (ddof = 1).
///
/// Returns (mean, 0.0) for a single sample.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    assert!(n > 0, "mean_stderr on empty slice");
    let mean = kahan_sum(xs) / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let mut dev = KahanSum::new();
    for &x in xs {
        dev.add((x - mean) * (x - mean));
    }
    let var = dev.value() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Ordinary least-squares line fit y ≈ slope·x + intercept.
#[derive(Debug, Clone, Copy)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Coefficient of determination of the fit.
    pub r2: f64,
    /// Standard error of the slope estimate.
    pub slope_stderr: f64,
}

/// Least-squares straight line through (xs, ys). Requires ≥ 3 points with
/// nonzero x-spread.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return Err(Error::Fit(format!(
            "need ≥ 3 paired points, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    let n = xs.len() as f64;
    let xm = kahan_sum(xs) / n;
    let ym = kahan_sum(ys) / n;
    let mut sxx = KahanSum::new();
    let mut sxy = KahanSum::new();
    let mut syy = KahanSum::new();
    for (&x, &y) in xs.iter().zip(ys) {
        sxx.add((x - xm) * (x - xm));
        sxy.add((x - xm) * (y - ym));
        syy.add((y - ym) * (y - ym));
    }
    let sxx = sxx.value();
    let syy = syy.value();
    if sxx <= 0.0 {
        return Err(Error::Fit("zero spread in x".into()));
    }
    let slope = sxy.value() / sxx;
    let intercept = ym - slope * xm;
    let mut ss_res = KahanSum::new();
    for (&x, &y) in xs.iter().zip(ys) {
        let r = y - (slope * x + intercept);
        ss_res.add(r * r);
    }
    let ss_res = ss_res.value();
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    let dof = n - 2.0;
    let slope_stderr = if dof > 0.0 {
        (ss_res / dof / sxx).sqrt()
    } else {
        0.0
    };
    Ok(LineFit {
        slope,
        intercept,
        r2,
        slope_stderr,
    })
}

/// Power-law fit y ≈ C·x^p via least squares in log-log space.
///
/// All xs and ys must be strictly positive; returns the fit with
/// `slope` = p and `intercept` = ln C.
pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    if xs.iter().any(|&x| x <= 0.0) || ys.iter().any(|&y| y <= 0.0) {
        return Err(Error::Fit("power-law fit needs positive data".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    fit_line(&lx, &ly)
}

/// Geometrically spaced grid from `a` to `b` inclusive.
pub fn geomspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(a > 0.0 && b > a && n >= 2);
    let la = a.ln();
    let lb = b.ln();
    (0..n)
        .map(|i| (la + (lb - la) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Uniformly spaced grid from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2);
    (0..n)
        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
        .collect()
}
