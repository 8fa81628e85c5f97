//! Uniform one-dimensional grids and complex grid functions.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    lo: f64,
    hi: f64,
    n: usize,
}

impl RadialGrid {
    pub const MIN_POINTS: usize = 16;

    /// `n` nodes from `lo` to `hi` inclusive.
    pub fn new(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::InvalidInput(format!("bad grid interval [{lo}, {hi}]")));
        }
        if n < Self::MIN_POINTS {
            return Err(Error::InvalidInput(format!("grid needs at least {} points, got {n}", Self::MIN_POINTS)));
        }
        Ok(Self { lo, hi, n })
    }

    /// Grid on `[lo, hi]` with spacing as close to `h` as possible.
    pub fn with_spacing(lo: f64, hi: f64, h: f64) -> Result<Self> {
        let n = ((hi - lo) / h).round() as usize + 1;
        Self::new(lo, hi, n)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / (self.n - 1) as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            self.hi
        } else {
            self.lo + i as f64 * self.spacing()
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.point(i)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: RadialGrid,
    values: Vec<Complex64>,
}

impl GridFunction {
    pub fn new(grid: RadialGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidInput(format!(
                "{} samples for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: RadialGrid) -> Self {
        Self { grid, values: vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    pub fn from_fn<F: Fn(f64) -> Complex64>(grid: RadialGrid, f: F) -> Self {
        Self { grid, values: grid.points().into_iter().map(f).collect() }
    }

    pub fn from_real_fn<F: Fn(f64) -> f64>(grid: RadialGrid, f: F) -> Self {
        Self::from_fn(grid, |x| Complex64::new(f(x), 0.0))
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    /// Trapezoidal `L^2` norm.
    pub fn l2_norm(&self) -> f64 {
        let h = self.grid.spacing();
        let n = self.values.len();
        let s: f64 = self
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| if i == 0 || i + 1 == n { 0.5 * v.norm_sqr() } else { v.norm_sqr() })
            .sum();
        (s * h).sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Fourth-order centered first derivative, one-sided at the two ends.
    pub fn derivative(&self) -> GridFunction {
        let h = self.grid.spacing();
        let v = &self.values;
        let n = v.len();
        let mut d = vec![Complex64::new(0.0, 0.0); n];
        for i in 0..n {
            d[i] = if i >= 2 && i + 2 < n {
                (v[i - 2] - v[i - 1] * 8.0 + v[i + 1] * 8.0 - v[i + 2]) / (12.0 * h)
            } else if i == 0 {
                (v[0] * -25.0 + v[1] * 48.0 - v[2] * 36.0 + v[3] * 16.0 - v[4] * 3.0) / (12.0 * h)
            } else if i == 1 {
                (v[0] * -3.0 - v[1] * 10.0 + v[2] * 18.0 - v[3] * 6.0 + v[4]) / (12.0 * h)
            } else if i + 2 == n {
                (v[n - 1] * 3.0 + v[n - 2] * 10.0 - v[n - 3] * 18.0 + v[n - 4] * 6.0 - v[n - 5]) / (12.0 * h)
            } else {
                (v[n - 1] * 25.0 - v[n - 2] * 48.0 + v[n - 3] * 36.0 - v[n - 4] * 16.0 + v[n - 5] * 3.0) / (12.0 * h)
            };
        }
        GridFunction { grid: self.grid, values: d }
    }

    pub fn map<F: Fn(f64, Complex64) -> Complex64>(&self, f: F) -> GridFunction {
        let values = self.values.iter().enumerate().map(|(i, v)| f(self.grid.point(i), *v)).collect();
        GridFunction { grid: self.grid, values }
    }

    /// Four-point Lagrange interpolation; zero outside the grid.
    pub fn interpolate(&self, x: f64) -> Complex64 {
        lagrange4(&self.grid, &self.values, x)
    }

    /// `sum conj(self) * other * h` with trapezoid end weights.
    pub fn inner(&self, other: &GridFunction) -> Complex64 {
        let h = self.grid.spacing();
        let n = self.values.len();
        self.values
            .iter()
            .zip(&other.values)
            .enumerate()
            .map(|(i, (a, b))| {
                let w = if i == 0 || i + 1 == n { 0.5 } else { 1.0 };
                a.conj() * b * w
            })
            .sum::<Complex64>()
            * h
    }
}

pub(crate) fn lagrange4(grid: &RadialGrid, v: &[Complex64], x: f64) -> Complex64 {
    if x < grid.lo() || x > grid.hi() {
        return Complex64::new(0.0, 0.0);
    }
    let s = (x - grid.lo()) / grid.spacing();
    let n = v.len();
    let i = (s.floor() as isize - 1).clamp(0, n as isize - 4) as usize;
    let mut out = Complex64::new(0.0, 0.0);
    for a in 0..4 {
        let mut w = 1.0;
        for b in 0..4 {
            if a != b {
                w *= (s - (i + b) as f64) / (a as f64 - b as f64);
            }
        }
        out += v[i + a] * w;
    }
    out
}
