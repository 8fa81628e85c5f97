//! Discrete Weyl quantization on a periodic box, the weight operators built
//! from `b_ps` and `a_ps`, their almost-inverse defect, and the weighted mode norms.
//!
//! On a box of length `L` with `n` nodes the quantization of `s(x, xi)` is
//! `A_{jl} = (1/n) sum_k s((x_j + x_l)/2, xi_k) e^{i xi_k (x_j - x_l)}`, `xi_k = 2 pi k / L`,
//! with the Nyquist frequency carrying `(s(x, +N) + s(x, -N)) / 2`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesics::trapped_radius;
use crate::geometry::BlackHoleParams;
use crate::radial::FrequencyTriple;
use crate::symbols::{gamma, psi_ratio, WeightParams};

/// `n` equispaced nodes `x_j = center - L/2 + j L / n` of a periodic box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodicGrid {
    center: f64,
    length: f64,
    n: usize,
}

impl PeriodicGrid {
    pub const DEFAULT_POINTS: usize = 2048;
    pub const DEFAULT_HALF_WIDTH: f64 = 0.75;

    pub fn new(center: f64, length: f64, n: usize) -> Result<Self> {
        if !(length > 0.0 && length.is_finite() && center.is_finite()) {
            return Err(Error::InvalidInput(format!("bad periodic box: center {center}, length {length}")));
        }
        if n < 16 || n % 2 != 0 {
            return Err(Error::InvalidInput(format!("periodic grid needs an even n >= 16, got {n}")));
        }
        Ok(Self { center, length, n })
    }

    pub fn centered(center: f64) -> Self {
        Self { center, length: 2.0 * Self::DEFAULT_HALF_WIDTH, n: Self::DEFAULT_POINTS }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn start(&self) -> f64 {
        self.center - 0.5 * self.length
    }

    pub fn point(&self, j: usize) -> f64 {
        self.start() + j as f64 * self.spacing()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.point(j)).collect()
    }

    /// Largest resolved frequency `pi n / L`.
    pub fn nyquist(&self) -> f64 {
        std::f64::consts::PI * self.n as f64 / self.length
    }

    /// Frequency of FFT bin `k` (Nyquist bin reported as `+N`).
    pub fn frequency(&self, k: usize) -> f64 {
        let kk = if k <= self.n / 2 { k as f64 } else { k as f64 - self.n as f64 };
        2.0 * std::f64::consts::PI * kk / self.length
    }

    pub fn l2_norm(&self, v: &[Complex64]) -> f64 {
        (v.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.spacing()).sqrt()
    }

    /// The same norm computed from the discrete Fourier coefficients.
    pub fn fourier_l2_norm(&self, v: &[Complex64]) -> f64 {
        let mut buf = v.to_vec();
        FftPlanner::new().plan_fft_forward(self.n).process(&mut buf);
        (buf.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.spacing() / self.n as f64).sqrt()
    }

    /// Spectral derivative; the Nyquist coefficient is dropped.
    pub fn derivative(&self, v: &[Complex64]) -> Vec<Complex64> {
        let mut planner = FftPlanner::new();
        let mut buf = v.to_vec();
        planner.plan_fft_forward(self.n).process(&mut buf);
        for (k, c) in buf.iter_mut().enumerate() {
            *c = if k == self.n / 2 { Complex64::new(0.0, 0.0) } else { *c * Complex64::new(0.0, self.frequency(k)) };
        }
        planner.plan_fft_inverse(self.n).process(&mut buf);
        let scale = 1.0 / self.n as f64;
        buf.iter().map(|c| c * scale).collect()
    }
}

/// Dense quantized operator on a [`PeriodicGrid`].
#[derive(Debug, Clone)]
pub struct WeylOperator {
    pub matrix: DMatrix<Complex64>,
    pub grid: PeriodicGrid,
}

impl WeylOperator {
    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        let x = DVector::from_column_slice(v);
        (&self.matrix * x).as_slice().to_vec()
    }

    /// `||A - A^*||_F / ||A||_F`.
    pub fn hermitian_defect(&self) -> f64 {
        let m = &self.matrix;
        let diff = m - m.adjoint();
        diff.norm() / m.norm().max(f64::MIN_POSITIVE)
    }
}

const MIDPOINT_CHUNK: usize = 64;

/// Weyl quantization of a real symbol by one inverse FFT of length `n` per
/// half-grid midpoint.
pub fn weyl_matrix<S>(symbol: S, grid: &PeriodicGrid) -> Result<WeylOperator>
where
    S: Fn(f64, f64) -> f64 + Sync,
{
    let n = grid.n;
    let h = grid.spacing();
    let x0 = grid.start();
    let nyq = grid.nyquist();
    let freqs: Vec<f64> = (0..n).map(|k| grid.frequency(k)).collect();
    let fft = FftPlanner::<f64>::new().plan_fft_inverse(n);
    let mut matrix = DMatrix::<Complex64>::zeros(n, n);
    // Midpoints x0 + mu h / 2, mu in [0, 2n). A pair (j, l) takes the midpoint of
    // its shortest periodic representative: mu = j + l when |j - l| < n/2 and
    // (j + l + n) mod 2n when |j - l| > n/2; ties split evenly.
    let n_mu = 2 * n;
    let half = (n / 2) as isize;
    let mut start = 0;
    while start < n_mu {
        let stop = (start + MIDPOINT_CHUNK).min(n_mu);
        let rows: Vec<Result<Vec<Complex64>>> = (start..stop)
            .into_par_iter()
            .map(|mu| {
                let mid = x0 + 0.5 * mu as f64 * h;
                let mut buf: Vec<Complex64> = freqs
                    .iter()
                    .enumerate()
                    .map(|(k, &xi)| {
                        let v = if k == n / 2 { 0.5 * (symbol(mid, nyq) + symbol(mid, -nyq)) } else { symbol(mid, xi) };
                        Complex64::new(v, 0.0)
                    })
                    .collect();
                if buf.iter().any(|v| !v.re.is_finite()) {
                    return Err(Error::InvalidInput(format!("symbol not finite at x = {mid}")));
                }
                let first = buf[0];
                if buf.iter().all(|v| *v == first) {
                    // Constant in xi: exactly first * delta.
                    return Ok(vec![first]);
                }
                fft.process(&mut buf);
                let scale = 1.0 / n as f64;
                buf.iter_mut().for_each(|v| *v *= scale);
                Ok(buf)
            })
            .collect();
        for (offset, row) in rows.into_iter().enumerate() {
            let mu = start + offset;
            let f = row?;
            let mut sums = vec![(mu, false)];
            if mu >= n {
                sums.push((mu - n, true));
            } else if mu + n <= 2 * n - 2 {
                sums.push((mu + n, true));
            }
            for (sigma, wrapped) in sums {
                let jlo = sigma.saturating_sub(n - 1);
                let jhi = sigma.min(n - 1);
                for j in jlo..=jhi {
                    let l = sigma - j;
                    let dist = (j as isize - l as isize).abs();
                    let weight = if dist == half {
                        0.5
                    } else if (dist > half) == wrapped {
                        1.0
                    } else {
                        continue;
                    };
                    let d = (j as isize - l as isize).rem_euclid(n as isize) as usize;
                    let v = if f.len() == 1 {
                        if d == 0 {
                            f[0]
                        } else {
                            continue;
                        }
                    } else {
                        f[d]
                    };
                    matrix[(j, l)] += v * weight;
                }
            }
        }
        start = stop;
    }
    Ok(WeylOperator { matrix, grid: *grid })
}

/// `b_ps(r, tau, xi, Phi, lambda)` with `(tau, Phi, lambda)` frozen and `r_a` precomputed.
#[derive(Debug, Clone, Copy)]
pub struct FrozenKerrSymbol {
    z: f64,
    cut: f64,
    r_a: f64,
    lambda: f64,
    wp: WeightParams,
}

impl FrozenKerrSymbol {
    pub fn new(triple: &FrequencyTriple, params: &BlackHoleParams, wp: &WeightParams) -> Result<Self> {
        if !(triple.lambda > 0.0) {
            return Err(Error::InvalidInput("lambda must be positive".into()));
        }
        let cut = psi_ratio(triple.lambda, triple.tau);
        let r_a = if cut > 0.0 { trapped_radius(triple.tau, triple.azimuthal, params)? } else { 0.0 };
        Ok(Self { z: triple.lambda.ln(), cut, r_a, lambda: triple.lambda, wp: *wp })
    }

    pub fn r_a(&self) -> f64 {
        self.r_a
    }

    pub fn is_identity(&self) -> bool {
        self.z < self.wp.c
    }

    pub fn eval(&self, r: f64, xi: f64) -> f64 {
        if self.is_identity() {
            return 1.0;
        }
        if self.cut == 0.0 {
            return gamma(0.0, self.z, &self.wp);
        }
        let d = (r - self.r_a).powi(2) + (xi / self.lambda).powi(2);
        gamma(-self.cut * d.ln(), self.z, &self.wp)
    }
}

/// The pair `(s^w, (1/s)^w)` of a positive weight symbol together with the
/// frequency weight multiplying the lower-order term of the mode norm.
#[derive(Debug, Clone)]
pub struct WeightOperators {
    pub forward: WeylOperator,
    pub inverse: WeylOperator,
    pub frequency_weight: f64,
    pub identity: bool,
}

fn identity_operator(grid: &PeriodicGrid) -> WeylOperator {
    WeylOperator { matrix: DMatrix::identity(grid.len(), grid.len()), grid: *grid }
}

fn check_resolution(grid: &PeriodicGrid, lambda: f64) -> Result<()> {
    if grid.nyquist() < lambda {
        return Err(Error::Resolution(format!(
            "Nyquist frequency {:.1} below lambda = {lambda}",
            grid.nyquist()
        )));
    }
    Ok(())
}

impl WeightOperators {
    /// `b_ps^w(tau, Phi, lambda)` and its companion, weight `|tau| + lambda`.
    pub fn kerr(triple: &FrequencyTriple, params: &BlackHoleParams, wp: &WeightParams, grid: &PeriodicGrid) -> Result<Self> {
        let sym = FrozenKerrSymbol::new(triple, params, wp)?;
        let frequency_weight = triple.tau.abs() + triple.lambda;
        if sym.is_identity() {
            return Ok(Self { forward: identity_operator(grid), inverse: identity_operator(grid), frequency_weight, identity: true });
        }
        check_resolution(grid, triple.lambda)?;
        Ok(Self {
            forward: weyl_matrix(|r, xi| sym.eval(r, xi), grid)?,
            inverse: weyl_matrix(|r, xi| 1.0 / sym.eval(r, xi), grid)?,
            frequency_weight,
            identity: false,
        })
    }

    /// `a_ps^w(lambda)` and its companion on a box in `r*`, weight `lambda`.
    pub fn model(lambda: f64, wp: &WeightParams, grid: &PeriodicGrid) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::InvalidInput("lambda must be positive".into()));
        }
        if lambda.ln() < wp.c {
            return Ok(Self { forward: identity_operator(grid), inverse: identity_operator(grid), frequency_weight: lambda, identity: true });
        }
        check_resolution(grid, lambda)?;
        let sym = move |x: f64, xi: f64| crate::symbols::a_ps(x, xi, lambda, wp);
        Ok(Self {
            forward: weyl_matrix(sym, grid)?,
            inverse: weyl_matrix(move |x, xi| 1.0 / sym(x, xi), grid)?,
            frequency_weight: lambda,
            identity: false,
        })
    }

    /// `||d w|| + weight ||(1/s)^w w||`.
    pub fn lek_mode_norm(&self, w: &[Complex64]) -> f64 {
        let grid = &self.forward.grid;
        let dw = grid.derivative(w);
        grid.l2_norm(&dw) + self.frequency_weight * grid.l2_norm(&self.inverse.apply(w))
    }

    /// `||s^w g||`.
    pub fn lek_dual_mode_norm(&self, g: &[Complex64]) -> f64 {
        self.forward.grid.l2_norm(&self.forward.apply(g))
    }

    /// Operator-norm estimate of `s^w (1/s)^w - I` by power iteration on `D^* D`.
    pub fn defect(&self, seed: u64) -> DefectEstimate {
        if self.identity {
            return DefectEstimate { defect: 0.0, iterations: 0, converged: true };
        }
        let n = self.forward.grid.len();
        let b = &self.forward.matrix;
        let bi = &self.inverse.matrix;
        let apply_d = |v: &DVector<Complex64>| -> DVector<Complex64> { b * (bi * v) - v };
        let apply_dstar = |v: &DVector<Complex64>| -> DVector<Complex64> { bi.adjoint() * (b.adjoint() * v) - v };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v = DVector::from_fn(n, |_, _| {
            Complex64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng))
        });
        v /= Complex64::new(v.norm(), 0.0);
        let mut est = 0.0;
        let mut converged = false;
        let mut iterations = 0;
        for it in 1..=POWER_ITERATIONS {
            iterations = it;
            let u = apply_dstar(&apply_d(&v));
            let nu = u.norm();
            if nu == 0.0 {
                est = 0.0;
                converged = true;
                break;
            }
            let next = nu.sqrt();
            let change = (next - est).abs() / next;
            est = next;
            v = u / Complex64::new(nu, 0.0);
            if change < POWER_TOLERANCE {
                converged = true;
                break;
            }
        }
        DefectEstimate { defect: est, iterations, converged }
    }
}

pub const POWER_ITERATIONS: usize = 30;
pub const POWER_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DefectEstimate {
    pub defect: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// `||b_ps^w (b_ps^{-1})^w - I||` on the box of half-width 0.75 M around `r_a(tau, Phi)`.
pub fn almost_inverse_defect(
    lambda: f64,
    tau: f64,
    azimuthal: f64,
    params: &BlackHoleParams,
    wp: &WeightParams,
    n: usize,
    seed: u64,
) -> Result<DefectEstimate> {
    let triple = FrequencyTriple::new(tau, azimuthal, lambda)?;
    let sym = FrozenKerrSymbol::new(&triple, params, wp)?;
    let center = if sym.cut > 0.0 { sym.r_a } else { 3.0 * params.mass() };
    let grid = PeriodicGrid::new(center, 2.0 * PeriodicGrid::DEFAULT_HALF_WIDTH * params.mass(), n)?;
    Ok(WeightOperators::kerr(&triple, params, wp, &grid)?.defect(seed))
}

/// Setup of the model-problem comparison between weighted and unweighted bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogLossConfig {
    /// Box nodes; the box is `[-L/2, L/2)` with `L = 2 * half_width`.
    pub box_points: usize,
    pub half_width: f64,
    /// ODE nodes per box node.
    pub refinement: usize,
    /// The ODE is solved on `[-ode_half_width, ode_half_width]`.
    pub ode_half_width: f64,
    /// Cutoff `chi`: 1 on `|x| <= cutoff_inner`, 0 for `|x| >= cutoff_outer`.
    pub cutoff_inner: f64,
    pub cutoff_outer: f64,
    pub eps: f64,
    pub seed: u64,
}

impl Default for LogLossConfig {
    fn default() -> Self {
        Self {
            box_points: PeriodicGrid::DEFAULT_POINTS,
            half_width: PeriodicGrid::DEFAULT_HALF_WIDTH,
            refinement: 16,
            ode_half_width: 2.25,
            cutoff_inner: 0.45,
            cutoff_outer: 0.7,
            eps: 0.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogLossRow {
    pub lambda: f64,
    pub weighted_ratio: f64,
    pub unweighted_ratio: f64,
    pub lek: f64,
    pub lek_dual: f64,
    pub w_norm: f64,
    pub g_norm: f64,
    pub residual: f64,
    pub defect: f64,
}

/// Solves `(d^2 + lambda^2 (x^2 + eps)) w = e^{-lambda x^2}` and compares
/// `lek(chi w) / lek*(g)` with `lambda ||chi w|| / ||g||` on the box.
pub fn log_loss_row(lambda: f64, wp: &WeightParams, cfg: &LogLossConfig) -> Result<LogLossRow> {
    use crate::grid::{GridFunction, RadialGrid};
    use crate::radial::{solve_model_ode, QuadraticWell};
    use crate::smooth::smooth_step;

    let grid = PeriodicGrid::new(0.0, 2.0 * cfg.half_width, cfg.box_points)?;
    let h_ode = grid.spacing() / cfg.refinement as f64;
    let half_nodes = (cfg.ode_half_width / h_ode).round() as usize;
    let ode_grid = RadialGrid::new(-(half_nodes as f64) * h_ode, half_nodes as f64 * h_ode, 2 * half_nodes + 1)?;
    let source = |x: f64| (-lambda * x * x).exp();
    let g = GridFunction::from_real_fn(ode_grid, source);
    let sol = solve_model_ode(&g, lambda, cfg.eps, &QuadraticWell)?;
    let chi = |x: f64| 1.0 - smooth_step((x.abs() - cfg.cutoff_inner) / (cfg.cutoff_outer - cfg.cutoff_inner));
    // Box node j sits at ODE node half_nodes + (j - n/2) * refinement.
    let n = grid.len();
    let w_box: Vec<Complex64> = (0..n)
        .map(|j| {
            let idx = half_nodes as isize + (j as isize - (n / 2) as isize) * cfg.refinement as isize;
            sol.w.values()[idx as usize] * chi(grid.point(j))
        })
        .collect();
    let g_box: Vec<Complex64> = grid.points().iter().map(|&x| Complex64::new(source(x), 0.0)).collect();
    let ops = WeightOperators::model(lambda, wp, &grid)?;
    let lek = ops.lek_mode_norm(&w_box);
    let lek_dual = ops.lek_dual_mode_norm(&g_box);
    let w_norm = grid.l2_norm(&w_box);
    let g_norm = grid.l2_norm(&g_box);
    Ok(LogLossRow {
        lambda,
        weighted_ratio: lek / lek_dual,
        unweighted_ratio: lambda * w_norm / g_norm,
        lek,
        lek_dual,
        w_norm,
        g_norm,
        residual: sol.residual,
        defect: ops.defect(cfg.seed).defect,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn small_grid() -> PeriodicGrid {
        PeriodicGrid::new(0.3, 2.0, 64).unwrap()
    }

    #[test]
    fn constant_symbol_is_scalar() {
        let g = small_grid();
        let a = weyl_matrix(|_, _| 2.5, &g).unwrap();
        for j in 0..g.len() {
            for l in 0..g.len() {
                let want = if j == l { 2.5 } else { 0.0 };
                assert_eq!(a.matrix[(j, l)], Complex64::new(want, 0.0));
            }
        }
    }

    #[test]
    fn xi_symbol_is_spectral_derivative() {
        let g = small_grid();
        let n = g.len();
        let a = weyl_matrix(|_, xi| xi, &g).unwrap();
        for j in 0..n {
            for l in 0..n {
                let d = j as f64 - l as f64;
                // -i times the trigonometric differentiation matrix on an even grid.
                let dmat = if j == l { 0.0 } else { PI / g.length() * (-1f64).powf(d) / (PI * d / n as f64).tan() };
                let want = Complex64::new(0.0, -dmat);
                assert!((a.matrix[(j, l)] - want).norm() < 1e-12, "({j},{l})");
            }
        }
    }

    #[test]
    fn real_symbols_are_hermitian() {
        let g = small_grid();
        let a = weyl_matrix(|x, xi| (x * 3.0).sin() + 1.0 / (1.0 + xi * xi * 0.01) + x * x * xi.cos(), &g).unwrap();
        assert!(a.hermitian_defect() < 1e-12);
    }

    #[test]
    fn plancherel() {
        let g = PeriodicGrid::new(0.0, 1.5, 256).unwrap();
        let v: Vec<Complex64> = g.points().iter().map(|&x| Complex64::new((-(x * x) * 40.0).exp(), x.sin())).collect();
        assert!((g.l2_norm(&v) - g.fourier_l2_norm(&v)).abs() < 1e-12 * g.l2_norm(&v));
    }

    #[test]
    fn spectral_derivative_of_trigonometric() {
        let g = PeriodicGrid::new(0.0, 2.0 * PI, 64).unwrap();
        let v: Vec<Complex64> = g.points().iter().map(|&x| Complex64::new((3.0 * x).sin(), 0.0)).collect();
        let d = g.derivative(&v);
        for (x, dv) in g.points().iter().zip(&d) {
            assert!((dv.re - 3.0 * (3.0 * x).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn small_lambda_identity() {
        let p = BlackHoleParams::new(1.0, 0.1).unwrap();
        let wp = WeightParams::default();
        let est = almost_inverse_defect(200.0, 60.0, 0.0, &p, &wp, 256, 0).unwrap();
        assert_eq!(est.defect, 0.0);
        let t = FrequencyTriple::new(60.0, 0.0, 200.0).unwrap();
        let grid = PeriodicGrid::new(3.0, 1.5, 256).unwrap();
        let ops = WeightOperators::kerr(&t, &p, &wp, &grid).unwrap();
        let w: Vec<Complex64> = grid.points().iter().map(|&x| Complex64::new((-(x - 3.0).powi(2) * 30.0).exp(), 0.0)).collect();
        let plain = grid.l2_norm(&grid.derivative(&w)) + 260.0 * grid.l2_norm(&w);
        assert!((ops.lek_mode_norm(&w) - plain).abs() < 1e-12 * plain);
        assert_eq!(ops.lek_mode_norm(&vec![Complex64::new(0.0, 0.0); 256]), 0.0);
    }

    #[test]
    fn under_resolved_box_rejected() {
        let wp = WeightParams::desk_scale();
        let grid = PeriodicGrid::new(0.0, 1.5, 64).unwrap();
        assert!(matches!(WeightOperators::model(1000.0, &wp, &grid), Err(Error::Resolution(_))));
    }

    #[test]
    fn model_defect_small() {
        let wp = WeightParams::desk_scale();
        let grid = PeriodicGrid::new(0.0, 1.5, 512).unwrap();
        let ops = WeightOperators::model(256.0, &wp, &grid).unwrap();
        assert!(ops.forward.hermitian_defect() < 1e-12);
        let d = ops.defect(1);
        assert!(d.defect > 0.0 && d.defect < 0.5, "{d:?}");
    }
}
