//! The separated radial equation `(Delta d_r^2 + V_{lambda,tau,Phi}) w = g`, its
//! potentials, the four frequency regimes and their solvers.
//!
//! Fourier convention: `u = e^{i (tau t + Phi phi)} S(theta) Delta^{-1/2} w(r)`.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesics::trapped_radius;
use crate::geometry::{delta, horizon_radii, BlackHoleParams};
use crate::grid::{GridFunction, RadialGrid};

/// `V(r) = sqrt(Delta) d_r (Delta d_r Delta^{-1/2})`, which simplifies to `(M^2 - a^2) / Delta`.
pub fn conjugation_potential(r: f64, params: &BlackHoleParams) -> Result<f64> {
    let d = delta(r, params);
    if d == 0.0 {
        return Err(Error::Domain(format!("Delta vanishes at r = {r}")));
    }
    let (m, a) = (params.mass(), params.spin());
    Ok((m * m - a * a) / d)
}

/// `(tau, Phi, lambda)` after separation; `lambda = sqrt(lambda_a^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyTriple {
    pub tau: f64,
    #[serde(rename = "Phi")]
    pub azimuthal: f64,
    pub lambda: f64,
}

impl FrequencyTriple {
    pub fn new(tau: f64, azimuthal: f64, lambda: f64) -> Result<Self> {
        if !(tau.is_finite() && azimuthal.is_finite() && lambda.is_finite()) {
            return Err(Error::InvalidInput("non-finite frequency".into()));
        }
        if lambda < 0.0 {
            return Err(Error::InvalidInput(format!("lambda must be non-negative, got {lambda}")));
        }
        if lambda < azimuthal.abs() {
            return Err(Error::InvalidInput(format!("lambda = {lambda} below |Phi| = {}", azimuthal.abs())));
        }
        Ok(Self { tau, azimuthal, lambda })
    }
}

/// `P(r, tau, Phi) = (r^2+a^2)^2 tau^2 + 4 a M r tau Phi + a^2 Phi^2`, the `xi = 0`
/// frequency symbol of the radial-plus-time part, so that the radial potential is `P / Delta`.
pub fn frequency_symbol(r: f64, tau: f64, azimuthal: f64, params: &BlackHoleParams) -> f64 {
    let (m, a) = (params.mass(), params.spin());
    let s = r * r + a * a;
    s * s * tau * tau + 4.0 * a * m * r * tau * azimuthal + a * a * azimuthal * azimuthal
}

/// `d_r (P / Delta)`.
pub fn frequency_ratio_derivative(r: f64, tau: f64, azimuthal: f64, params: &BlackHoleParams) -> f64 {
    let (m, a) = (params.mass(), params.spin());
    let d = delta(r, params);
    let p = frequency_symbol(r, tau, azimuthal, params);
    let dp = 4.0 * r * (r * r + a * a) * tau * tau + 4.0 * a * m * tau * azimuthal;
    (dp * d - p * 2.0 * (r - m)) / (d * d)
}

/// `V_{lambda,tau,Phi}(r) = P / Delta - lambda^2 + V(r)`.
pub fn effective_potential(r: f64, triple: &FrequencyTriple, params: &BlackHoleParams) -> Result<f64> {
    let v = conjugation_potential(r, params)?;
    let d = delta(r, params);
    Ok(frequency_symbol(r, triple.tau, triple.azimuthal, params) / d - triple.lambda * triple.lambda + v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Case {
    Case1,
    Case2,
    Case3,
    Case4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaseThresholds {
    /// Case 1 when `max(lambda, |tau|) <= small`.
    pub small: f64,
    /// Case 2 when `lambda <= |tau| / ratio`, Case 3 when `lambda >= ratio |tau|`.
    pub ratio: f64,
}

impl Default for CaseThresholds {
    fn default() -> Self {
        Self { small: 10.0, ratio: 8.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CaseTag {
    pub case: Case,
    pub thresholds: CaseThresholds,
}

pub fn classify_case(triple: &FrequencyTriple, thresholds: CaseThresholds) -> CaseTag {
    let tau = triple.tau.abs();
    let lam = triple.lambda;
    let case = if lam.max(tau) <= thresholds.small {
        Case::Case1
    } else if lam * thresholds.ratio <= tau {
        Case::Case2
    } else if lam >= thresholds.ratio * tau {
        Case::Case3
    } else {
        Case::Case4
    };
    CaseTag { case, thresholds }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    /// Zero data at the inner end, marching outward.
    Outward,
    /// Zero data at the outer end, marching inward.
    Inward,
}

/// Largest admissible `h^2 |V / Delta|` for the Numerov marches.
pub const MAX_NUMEROV_LOAD: f64 = 0.2;

fn check_exterior(grid: &RadialGrid, params: &BlackHoleParams) -> Result<()> {
    let (_, rp) = horizon_radii(params)?;
    if grid.lo() <= rp {
        return Err(Error::InvalidInput(format!("grid starts at {} inside r+ = {rp}", grid.lo())));
    }
    Ok(())
}

// w'' = f w + s with f = -V/Delta and s = g/Delta.
fn numerov_coefficients(
    g: &GridFunction,
    triple: &FrequencyTriple,
    params: &BlackHoleParams,
) -> Result<(Vec<f64>, Vec<Complex64>)> {
    let grid = g.grid();
    let mut f = Vec::with_capacity(grid.len());
    let mut s = Vec::with_capacity(grid.len());
    for (i, gv) in g.values().iter().enumerate() {
        let r = grid.point(i);
        let d = delta(r, params);
        f.push(-effective_potential(r, triple, params)? / d);
        s.push(gv / d);
    }
    Ok((f, s))
}

fn numerov_residual_norm(w: &[Complex64], f: &[f64], s: &[Complex64], grid: &RadialGrid, params: &BlackHoleParams) -> f64 {
    let h = grid.spacing();
    let c = h * h / 12.0;
    let mut acc = 0.0;
    for n in 1..w.len() - 1 {
        let res = w[n + 1] * (1.0 - c * f[n + 1]) - w[n] * (2.0 + 10.0 * c * f[n]) + w[n - 1] * (1.0 - c * f[n - 1])
            - (s[n + 1] + s[n] * 10.0 + s[n - 1]) * c;
        let d = delta(grid.point(n), params);
        acc += (res * d / (h * h)).norm_sqr();
    }
    (acc * h).sqrt()
}

/// Solution of the Cauchy problem with zero data on the side given by `direction`,
/// by Numerov's fourth-order method. Returns the solution and the relative
/// residual of the discrete equation.
pub fn solve_radial_cauchy(
    g: &GridFunction,
    triple: &FrequencyTriple,
    params: &BlackHoleParams,
    direction: Direction,
) -> Result<(GridFunction, f64)> {
    let grid = *g.grid();
    check_exterior(&grid, params)?;
    let n = grid.len();
    let vals = g.values();
    let start = match direction {
        Direction::Outward => [0, 1],
        Direction::Inward => [n - 1, n - 2],
    };
    if start.iter().any(|&i| vals[i] != Complex64::new(0.0, 0.0)) {
        return Err(Error::InvalidInput("source must vanish at the starting end".into()));
    }
    let (f, s) = numerov_coefficients(g, triple, params)?;
    let h = grid.spacing();
    let load = f.iter().map(|x| x.abs()).fold(0.0, f64::max) * h * h;
    if load > MAX_NUMEROV_LOAD {
        return Err(Error::Resolution(format!(
            "grid too coarse: h^2 max|V/Delta| = {load:.3} exceeds {MAX_NUMEROV_LOAD}"
        )));
    }
    let c = h * h / 12.0;
    let mut w = vec![Complex64::new(0.0, 0.0); n];
    let order: Vec<usize> = match direction {
        Direction::Outward => (0..n).collect(),
        Direction::Inward => (0..n).rev().collect(),
    };
    for k in 1..n - 1 {
        let (im, i0, ip) = (order[k - 1], order[k], order[k + 1]);
        let rhs = w[i0] * (2.0 + 10.0 * c * f[i0]) - w[im] * (1.0 - c * f[im]) + (s[ip] + s[i0] * 10.0 + s[im]) * c;
        w[ip] = rhs / (1.0 - c * f[ip]);
    }
    let gnorm = g.l2_norm();
    let residual = if gnorm > 0.0 { numerov_residual_norm(&w, &f, &s, &grid, params) / gnorm } else { 0.0 };
    Ok((GridFunction::new(grid, w)?, residual))
}

/// Tridiagonal solve with constant off-diagonals `off` and diagonal `diag`;
/// returns the solution and `max|pivot| / min|pivot|`.
fn thomas_constant_off(diag: &[Complex64], off: f64, rhs: &[Complex64]) -> Result<(Vec<Complex64>, f64)> {
    let n = diag.len();
    let mut cp = vec![Complex64::new(0.0, 0.0); n];
    let mut dp = vec![Complex64::new(0.0, 0.0); n];
    let (mut pmax, mut pmin) = (0.0f64, f64::INFINITY);
    let mut piv = diag[0];
    for i in 0..n {
        if i > 0 {
            piv = diag[i] - cp[i - 1] * off;
        }
        let pa = piv.norm();
        pmax = pmax.max(pa);
        pmin = pmin.min(pa);
        if pa == 0.0 {
            return Err(Error::Singular("zero pivot in tridiagonal solve".into()));
        }
        cp[i] = Complex64::new(off, 0.0) / piv;
        dp[i] = if i == 0 { rhs[0] / piv } else { (rhs[i] - dp[i - 1] * off) / piv };
    }
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    x[n - 1] = dp[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = dp[i] - cp[i] * x[i + 1];
    }
    Ok((x, pmax / pmin))
}

/// General complex tridiagonal solve; returns the pivot-ratio condition estimate.
fn thomas(lower: &[Complex64], diag: &[Complex64], upper: &[Complex64], rhs: &[Complex64]) -> Result<(Vec<Complex64>, f64)> {
    let n = diag.len();
    let mut cp = vec![Complex64::new(0.0, 0.0); n];
    let mut dp = vec![Complex64::new(0.0, 0.0); n];
    let (mut pmax, mut pmin) = (0.0f64, f64::INFINITY);
    for i in 0..n {
        let piv = if i == 0 { diag[0] } else { diag[i] - lower[i] * cp[i - 1] };
        let pa = piv.norm();
        pmax = pmax.max(pa);
        pmin = pmin.min(pa);
        if pa == 0.0 {
            return Err(Error::Singular("zero pivot in tridiagonal solve".into()));
        }
        cp[i] = if i + 1 < n { upper[i] / piv } else { Complex64::new(0.0, 0.0) };
        dp[i] = if i == 0 { rhs[0] / piv } else { (rhs[i] - lower[i] * dp[i - 1]) / piv };
    }
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    x[n - 1] = dp[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = dp[i] - cp[i] * x[i + 1];
    }
    Ok((x, pmax / pmin))
}

/// Condition estimate above which a solve is reported as resonant.
pub const RESONANCE_CONDITION: f64 = 1e12;

/// Dirichlet problem `w(r_lo) = w(r_hi) = 0` with the symmetric second-order
/// scheme `(w_{i+1} - 2 w_i + w_{i-1}) / h^2 + (V/Delta)_i w_i = (g/Delta)_i`.
pub fn solve_radial_dirichlet(g: &GridFunction, triple: &FrequencyTriple, params: &BlackHoleParams) -> Result<GridFunction> {
    let grid = *g.grid();
    check_exterior(&grid, params)?;
    let n = grid.len();
    let h = grid.spacing();
    let m = n - 2;
    let mut diag = Vec::with_capacity(m);
    let mut rhs = Vec::with_capacity(m);
    for i in 1..n - 1 {
        let r = grid.point(i);
        let d = delta(r, params);
        diag.push(Complex64::new(-2.0 / (h * h) + effective_potential(r, triple, params)? / d, 0.0));
        rhs.push(g.values()[i] / d);
    }
    let (x, cond) = thomas_constant_off(&diag, 1.0 / (h * h), &rhs)?;
    if cond > RESONANCE_CONDITION {
        return Err(Error::Singular(format!("discrete Dirichlet operator nearly singular (estimate {cond:e})")));
    }
    let mut w = vec![Complex64::new(0.0, 0.0); n];
    w[1..n - 1].copy_from_slice(&x);
    GridFunction::new(grid, w)
}

/// A profile `W` with `W(0) = W'(0) = 0 < W''(0)`.
pub trait WProfile: Sync {
    fn value(&self, x: f64) -> f64;
    fn derivative(&self, x: f64) -> f64;
}

/// `W(x) = x^2`.
#[derive(Debug, Clone, Copy, Default)]
pub struct QuadraticWell;

impl WProfile for QuadraticWell {
    fn value(&self, x: f64) -> f64 {
        x * x
    }
    fn derivative(&self, x: f64) -> f64 {
        2.0 * x
    }
}

/// The Kerr profile `W(x) = [P/Delta (r_a + x) - P/Delta (r_a)] / tau^2`.
#[derive(Debug, Clone, Copy)]
pub struct KerrWell {
    pub params: BlackHoleParams,
    pub tau: f64,
    pub azimuthal: f64,
    pub r_a: f64,
    base: f64,
}

impl KerrWell {
    pub fn new(tau: f64, azimuthal: f64, params: &BlackHoleParams) -> Result<Self> {
        let r_a = trapped_radius(tau, azimuthal, params)?;
        let base = frequency_symbol(r_a, tau, azimuthal, params) / delta(r_a, params);
        Ok(Self { params: *params, tau, azimuthal, r_a, base })
    }
}

impl WProfile for KerrWell {
    fn value(&self, x: f64) -> f64 {
        let r = self.r_a + x;
        (frequency_symbol(r, self.tau, self.azimuthal, &self.params) / delta(r, &self.params) - self.base)
            / (self.tau * self.tau)
    }
    fn derivative(&self, x: f64) -> f64 {
        frequency_ratio_derivative(self.r_a + x, self.tau, self.azimuthal, &self.params) / (self.tau * self.tau)
    }
}

/// Result of [`solve_model_ode`].
#[derive(Debug, Clone)]
pub struct ModeSolution {
    pub w: GridFunction,
    pub residual: f64,
    pub condition: f64,
}

/// `(d_x^2 + lambda^2 (W(x) + eps)) w = g` on the grid, with WKB radiation
/// conditions at both ends: `w'/w = +-i sqrt(q) - q'/(4q)` where `q = lambda^2 (W + eps) > 0`
/// (outgoing), and the decaying branch where `q < 0`.
///
/// Interior rows use Numerov's scheme; the end rows impose the condition at the
/// half-cell midpoint.
pub fn solve_model_ode(g: &GridFunction, lambda: f64, eps: f64, profile: &dyn WProfile) -> Result<ModeSolution> {
    let grid = *g.grid();
    let n = grid.len();
    let h = grid.spacing();
    let c = h * h / 12.0;
    let q: Vec<f64> = grid.points().iter().map(|&x| lambda * lambda * (profile.value(x) + eps)).collect();
    let load = q.iter().map(|v| v.abs()).fold(0.0, f64::max) * h * h;
    if load > MAX_NUMEROV_LOAD {
        return Err(Error::Resolution(format!("grid too coarse: h^2 max|q| = {load:.3}")));
    }
    // w'' = f w + s with f = -q.
    let f: Vec<f64> = q.iter().map(|v| -v).collect();
    let s = g.values();
    let mut lower = vec![Complex64::new(0.0, 0.0); n];
    let mut diag = vec![Complex64::new(0.0, 0.0); n];
    let mut upper = vec![Complex64::new(0.0, 0.0); n];
    let mut rhs = vec![Complex64::new(0.0, 0.0); n];
    for i in 1..n - 1 {
        lower[i] = Complex64::new(1.0 - c * f[i - 1], 0.0);
        diag[i] = Complex64::new(-(2.0 + 10.0 * c * f[i]), 0.0);
        upper[i] = Complex64::new(1.0 - c * f[i + 1], 0.0);
        rhs[i] = (s[i + 1] + s[i] * 10.0 + s[i - 1]) * c;
    }
    let log_derivative = |x: f64, outward_sign: f64| -> Complex64 {
        let qv = lambda * lambda * (profile.value(x) + eps);
        let dq = lambda * lambda * profile.derivative(x);
        let wkb = -dq / (4.0 * qv);
        if qv > 0.0 {
            Complex64::new(wkb, outward_sign * qv.sqrt())
        } else {
            Complex64::new(wkb - outward_sign * (-qv).sqrt(), 0.0)
        }
    };
    // (w_1 - w_0)/h = beta (w_0 + w_1)/2 at the midpoint, and likewise at the right end.
    let beta_l = log_derivative(grid.point(0) + 0.5 * h, -1.0);
    diag[0] = Complex64::new(-1.0 / h, 0.0) - beta_l * 0.5;
    upper[0] = Complex64::new(1.0 / h, 0.0) - beta_l * 0.5;
    let beta_r = log_derivative(grid.point(n - 1) - 0.5 * h, 1.0);
    lower[n - 1] = Complex64::new(-1.0 / h, 0.0) - beta_r * 0.5;
    diag[n - 1] = Complex64::new(1.0 / h, 0.0) - beta_r * 0.5;
    let (w, condition) = thomas(&lower, &diag, &upper, &rhs)?;
    if condition > RESONANCE_CONDITION {
        return Err(Error::Singular(format!("resonant model problem: condition estimate {condition:e}")));
    }
    let mut acc = 0.0;
    for i in 1..n - 1 {
        let r = lower[i] * w[i - 1] + diag[i] * w[i] + upper[i] * w[i + 1] - rhs[i];
        acc += (r / (h * h)).norm_sqr();
    }
    let gnorm = g.l2_norm();
    let residual = if gnorm > 0.0 { (acc * h).sqrt() / gnorm } else { 0.0 };
    Ok(ModeSolution { w: GridFunction::new(grid, w)?, residual, condition })
}

/// Pointwise radial energy: `Delta |w'|^2 + |w|^2` in Case 1 and
/// `Delta |w'|^2 + V_{lambda,tau,Phi} |w|^2` otherwise.
pub fn radial_energy(w: &GridFunction, triple: &FrequencyTriple, params: &BlackHoleParams, case: Case) -> Result<Vec<f64>> {
    let dw = w.derivative();
    let grid = w.grid();
    let mut out = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let r = grid.point(i);
        let weight = match case {
            Case::Case1 => 1.0,
            _ => effective_potential(r, triple, params)?,
        };
        out.push(delta(r, params) * dw.values()[i].norm_sqr() + weight * w.values()[i].norm_sqr());
    }
    Ok(out)
}

/// `max_r |E'| / (E + ||g||^2)`, the empirical Gronwall constant of an energy profile.
pub fn gronwall_constant(energy: &[f64], grid: &RadialGrid, g_norm: f64) -> f64 {
    let h = grid.spacing();
    let g2 = g_norm * g_norm;
    let mut worst: f64 = 0.0;
    for i in 1..energy.len() - 1 {
        let de = (energy[i + 1] - energy[i - 1]) / (2.0 * h);
        let denom = energy[i] + g2;
        if denom > 0.0 {
            worst = worst.max(de.abs() / denom);
        }
    }
    worst
}

/// `(|tau| ||w||_inf + ||w'||_inf) / ||g||_{L^2}`.
pub fn cauchy_ratio(w: &GridFunction, g: &GridFunction, tau: f64) -> f64 {
    (tau.abs() * w.sup_norm() + w.derivative().sup_norm()) / g.l2_norm()
}

/// `(lambda^{3/2} ||w|| / ||g||, lambda^{1/2} ||w'|| / ||g||)`.
pub fn elliptic_ratios(w: &GridFunction, g: &GridFunction, lambda: f64) -> (f64, f64) {
    let gn = g.l2_norm();
    (lambda.powf(1.5) * w.l2_norm() / gn, lambda.sqrt() * w.derivative().l2_norm() / gn)
}

/// Piecewise-constant standard normal noise on cells of width close to
/// `cell_width`, nonzero only on `[lo, hi]`.
pub fn white_noise_source(grid: RadialGrid, lo: f64, hi: f64, cell_width: f64, seed: u64) -> Result<GridFunction> {
    if !(cell_width > 0.0 && hi > lo) {
        return Err(Error::InvalidInput("white noise needs a positive cell width and lo < hi".into()));
    }
    let cells = ((hi - lo) / cell_width).ceil().max(1.0) as usize;
    let width = (hi - lo) / cells as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amps: Vec<f64> = (0..cells).map(|_| StandardNormal.sample(&mut rng)).collect();
    Ok(GridFunction::from_real_fn(grid, |x| {
        if x <= lo || x >= hi {
            0.0
        } else {
            amps[(((x - lo) / width) as usize).min(cells - 1)]
        }
    }))
}

/// Per-solve report emitted by batch runs.
#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub triple: FrequencyTriple,
    pub case: CaseTag,
    pub solver: &'static str,
    pub residual: f64,
    pub diagnostics: Vec<(String, f64)>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(a: f64) -> BlackHoleParams {
        BlackHoleParams::new(1.0, a).unwrap()
    }

    fn defining_potential(r: f64, params: &BlackHoleParams) -> f64 {
        let h = 2e-3;
        let d5 = |f: &dyn Fn(f64) -> f64, x: f64| {
            (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h)
        };
        let inv_sqrt = |x: f64| delta(x, params).powf(-0.5);
        let inner = |x: f64| delta(x, params) * d5(&inv_sqrt, x);
        delta(r, params).sqrt() * d5(&inner, r)
    }

    #[test]
    fn potential_closed_form() {
        for a in [0.0, 0.3] {
            let pp = p(a);
            let mut r = 2.2;
            while r <= 10.0 {
                let diff = (conjugation_potential(r, &pp).unwrap() - defining_potential(r, &pp)).abs();
                assert!(diff < 1e-6, "a={a} r={r} diff={diff}");
                r += 0.1;
            }
        }
        assert!(conjugation_potential(1e4, &p(0.0)).unwrap() < 1e-7);
        assert!(conjugation_potential(2.0, &p(0.0)).is_err());
    }

    #[test]
    fn schwarzschild_identity() {
        let pp = p(0.0);
        for r in [2.5, 3.0, 4.0, 7.0] {
            let d = delta(r, &pp);
            let lhs = d * d * frequency_ratio_derivative(r, 1.0, 0.0, &pp);
            let rhs = 2.0 * r.powi(4) * (r - 3.0);
            assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs().max(1.0));
        }
    }

    #[test]
    fn critical_point_at_trapped_radius() {
        let pp = p(0.2);
        for (tau, phi) in [(1.0, 0.0), (1.0, 3.0), (2.0, -7.5)] {
            let ra = trapped_radius(tau, phi, &pp).unwrap();
            let scale = frequency_symbol(ra, tau, phi, &pp) / delta(ra, &pp) / ra;
            assert!(frequency_ratio_derivative(ra, tau, phi, &pp).abs() < 1e-6 * scale);
            let well = KerrWell::new(tau, phi, &pp).unwrap();
            let h = 1e-3;
            let second = (well.value(h) - 2.0 * well.value(0.0) + well.value(-h)) / (h * h);
            assert!(second > 0.0);
        }
    }

    #[test]
    fn case_examples() {
        let th = CaseThresholds::default();
        let c = |t, f, l| classify_case(&FrequencyTriple::new(t, f, l).unwrap(), th).case;
        assert_eq!(c(1.0, 0.0, 1.0), Case::Case1);
        assert_eq!(c(1000.0, 2.0, 20.0), Case::Case2);
        assert_eq!(c(500.0, 100.0, 520.0), Case::Case4);
        assert_eq!(c(1.0, 0.0, 100.0), Case::Case3);
    }

    #[test]
    fn elliptic_regime_potential_negative() {
        let pp = p(0.1);
        let t = FrequencyTriple::new(0.0, 0.0, 50.0).unwrap();
        for r in [2.5, 3.0, 5.0] {
            assert!(effective_potential(r, &t, &pp).unwrap() < 0.0);
        }
    }

    fn bump(x: f64, c: f64, w: f64) -> f64 {
        let t = (x - c) / w;
        if t.abs() >= 1.0 {
            0.0
        } else {
            (-1.0 / (1.0 - t * t)).exp()
        }
    }

    fn bump_dd(x: f64, c: f64, w: f64) -> f64 {
        let t = (x - c) / w;
        if t.abs() >= 1.0 {
            return 0.0;
        }
        let s = 1.0 - t * t;
        let e = (-1.0 / s).exp();
        // d/dt e^{-1/s} = -2t/s^2 e, second derivative below.
        let d1 = -2.0 * t / (s * s);
        let d1p = (-2.0 * s * s - 2.0 * t * 2.0 * s * 2.0 * t) / s.powi(4);
        e * (d1 * d1 + d1p) / (w * w)
    }

    #[test]
    fn zero_source_gives_zero() {
        let pp = p(0.1);
        let grid = RadialGrid::new(2.4, 5.2, 400).unwrap();
        let g = GridFunction::zeros(grid);
        let t = FrequencyTriple::new(3.0, 1.0, 2.0).unwrap();
        let (w, _) = solve_radial_cauchy(&g, &t, &pp, Direction::Outward).unwrap();
        assert_eq!(w.sup_norm(), 0.0);
        let t3 = FrequencyTriple::new(1.0, 0.0, 80.0).unwrap();
        assert_eq!(solve_radial_dirichlet(&g, &t3, &pp).unwrap().sup_norm(), 0.0);
        let mgrid = RadialGrid::new(-2.0, 2.0, 2001).unwrap();
        let sol = solve_model_ode(&GridFunction::zeros(mgrid), 50.0, 0.0, &QuadraticWell).unwrap();
        assert_eq!(sol.w.sup_norm(), 0.0);
    }

    #[test]
    fn cauchy_rejects_source_at_start_and_coarse_grid() {
        let pp = p(0.0);
        let grid = RadialGrid::new(2.4, 5.2, 200).unwrap();
        let g = GridFunction::from_real_fn(grid, |_| 1.0);
        let t = FrequencyTriple::new(3.0, 0.0, 2.0).unwrap();
        assert!(solve_radial_cauchy(&g, &t, &pp, Direction::Outward).is_err());
        let g2 = GridFunction::from_real_fn(grid, |r| bump(r, 3.5, 0.5));
        let fast = FrequencyTriple::new(500.0, 0.0, 2.0).unwrap();
        assert!(matches!(solve_radial_cauchy(&g2, &fast, &pp, Direction::Outward), Err(Error::Resolution(_))));
    }

    fn manufactured(n: usize) -> (f64, f64) {
        let pp = p(0.1);
        let grid = RadialGrid::new(2.4, 5.2, n).unwrap();
        let t = FrequencyTriple::new(6.0, 1.0, 3.0).unwrap();
        let exact = |r: f64| bump(r, 3.6, 0.8);
        let g = GridFunction::from_real_fn(grid, |r| {
            delta(r, &pp) * bump_dd(r, 3.6, 0.8) + effective_potential(r, &t, &pp).unwrap() * exact(r)
        });
        let (w, res) = solve_radial_cauchy(&g, &t, &pp, Direction::Inward).unwrap();
        let err = w.values().iter().enumerate().map(|(i, v)| (v.re - exact(grid.point(i))).abs()).fold(0.0, f64::max);
        (err, res)
    }

    #[test]
    fn cauchy_manufactured_fourth_order() {
        let (e1, r1) = manufactured(801);
        let (e2, r2) = manufactured(1601);
        let order = (e1 / e2).log2();
        assert!((order - 4.0).abs() < 0.3, "order {order}");
        assert!(e2 < 1e-7);
        assert!(r1 < 1e-8 && r2 < 1e-8);
    }

    #[test]
    fn dirichlet_manufactured_second_order() {
        let pp = p(0.1);
        let t = FrequencyTriple::new(1.0, 0.0, 40.0).unwrap();
        let exact = |r: f64| bump(r, 3.6, 0.8);
        let err = |n| {
            let grid = RadialGrid::new(2.5, 5.0, n).unwrap();
            let g = GridFunction::from_real_fn(grid, |r| {
                delta(r, &pp) * bump_dd(r, 3.6, 0.8) + effective_potential(r, &t, &pp).unwrap() * exact(r)
            });
            let w = solve_radial_dirichlet(&g, &t, &pp).unwrap();
            w.values().iter().enumerate().map(|(i, v)| (v.re - exact(grid.point(i))).abs()).fold(0.0, f64::max)
        };
        let order = (err(401) / err(801)).log2();
        assert!((order - 2.0).abs() < 0.3, "order {order}");
    }

    #[test]
    fn model_manufactured_fourth_order() {
        let lam = 100.0;
        let err = |n| {
            let grid = RadialGrid::new(-2.0, 2.0, n).unwrap();
            let g = GridFunction::from_real_fn(grid, |x| bump_dd(x, 0.0, 1.0) + lam * lam * (x * x + 1.0) * bump(x, 0.0, 1.0));
            let sol = solve_model_ode(&g, lam, 1.0, &QuadraticWell).unwrap();
            assert!(sol.residual < 1e-8);
            sol.w.values().iter().enumerate().map(|(i, v)| (*v - bump(grid.point(i), 0.0, 1.0)).norm()).fold(0.0, f64::max)
        };
        let order = (err(4001) / err(8001)).log2();
        assert!((order - 4.0).abs() < 0.3, "order {order}");
    }

    #[test]
    fn energy_vanishes_before_support() {
        let pp = p(0.0);
        let grid = RadialGrid::new(2.4, 5.2, 1200).unwrap();
        let g = GridFunction::from_real_fn(grid, |r| bump(r, 3.8, 0.3));
        let t = FrequencyTriple::new(2.0, 0.0, 1.5).unwrap();
        let (w, _) = solve_radial_cauchy(&g, &t, &pp, Direction::Outward).unwrap();
        let e = radial_energy(&w, &t, &pp, Case::Case1).unwrap();
        for (i, v) in e.iter().enumerate() {
            if grid.point(i) < 3.45 {
                assert_eq!(*v, 0.0);
            }
        }
        assert!(e.last().unwrap() > &0.0);
        let k1 = gronwall_constant(&e, &grid, g.l2_norm());
        assert!(k1.is_finite() && k1 > 0.0);
    }
}
