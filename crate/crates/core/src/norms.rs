//! Energies on the incoming, outgoing and constant-time surfaces, the dyadic
//! local-energy norms, Strichartz exponent arithmetic and mixed space-time norms
//! of mode-synthesized fields.
//!
//! A field is `u(t, r, theta, phi) = sum_a u_a(t, r) S_a(theta) e^{i m_a phi}` with
//! angular profiles from [`crate::angular`]. Profiles in the same azimuthal sector
//! but with different `c2` need not be orthogonal, so every quadratic quantity
//! goes through the exact Gram matrices of the Legendre expansions.

use std::f64::consts::PI;
use std::io::{self, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::angular::{eigenfunction_samples, AngularMode};
use crate::error::{Error, Result};
use crate::geometry::BlackHoleParams;
use crate::grid::{lagrange4, GridFunction, RadialGrid};

const CLASSIFY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StrichartzClass {
    Invalid,
    Sharp,
    Nonsharp,
}

/// Exponents `(rho, p, q)`; `p` and `q` may be `f64::INFINITY`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StrichartzPair {
    pub rho: f64,
    pub p: f64,
    pub q: f64,
    pub classification: StrichartzClass,
}

impl StrichartzPair {
    pub fn new(rho: f64, p: f64, q: f64) -> Self {
        Self { rho, p, q, classification: classify_strichartz_pair(rho, p, q) }
    }

    pub fn is_valid(&self) -> bool {
        self.classification != StrichartzClass::Invalid
    }

    pub fn label(&self) -> String {
        let f = |x: f64| if x.is_infinite() { "inf".to_string() } else { format!("{x}") };
        format!("({},{},{})", f(self.rho), f(self.p), f(self.q))
    }
}

fn recip(x: f64) -> f64 {
    if x.is_infinite() {
        0.0
    } else {
        1.0 / x
    }
}

/// Scaling `1/p + 3/q = 3/2 - rho`, dispersion `1/p + 1/q <= 1/2` with `2 < p <= inf`, `1 <= q <= inf`.
/// Equalities are tested to `1e-12`.
pub fn classify_strichartz_pair(rho: f64, p: f64, q: f64) -> StrichartzClass {
    if rho.is_nan() || p.is_nan() || q.is_nan() || !rho.is_finite() {
        return StrichartzClass::Invalid;
    }
    if !(p > 2.0) || !(q >= 1.0) {
        return StrichartzClass::Invalid;
    }
    let (ip, iq) = (recip(p), recip(q));
    if (ip + 3.0 * iq - (1.5 - rho)).abs() > CLASSIFY_TOL {
        return StrichartzClass::Invalid;
    }
    let d = ip + iq - 0.5;
    if d > CLASSIFY_TOL {
        StrichartzClass::Invalid
    } else if d.abs() <= CLASSIFY_TOL {
        StrichartzClass::Sharp
    } else {
        StrichartzClass::Nonsharp
    }
}

/// The triples used by the `strichartz` table and its tests.
pub fn builtin_pairs() -> Vec<(f64, f64, f64)> {
    vec![(0.0, f64::INFINITY, 2.0), (0.5, 4.0, 4.0), (5.0 / 6.0, 6.0, 6.0), (0.0, 4.0, 4.0)]
}

/// One angular profile with its radial samples `u_a(t_i, .)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldMode {
    pub angular: AngularMode,
    pub samples: Vec<GridFunction>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpacetimeField {
    times: RadialGrid,
    grid: RadialGrid,
    modes: Vec<FieldMode>,
}

/// Quadratic-form data of one mode: `u`, `d_t u`, `d_r u` on the full time-radius lattice.
struct ModeData {
    u: Vec<Vec<Complex64>>,
    ut: Vec<Vec<Complex64>>,
    ur: Vec<Vec<Complex64>>,
}

impl SpacetimeField {
    pub fn new(times: RadialGrid, grid: RadialGrid, modes: Vec<FieldMode>) -> Result<Self> {
        for (i, md) in modes.iter().enumerate() {
            if md.samples.len() != times.len() {
                return Err(Error::InvalidInput(format!(
                    "mode {i} has {} time samples, expected {}",
                    md.samples.len(),
                    times.len()
                )));
            }
            if md.samples.iter().any(|s| *s.grid() != grid) {
                return Err(Error::InvalidInput(format!("mode {i} is not sampled on the shared radial grid")));
            }
        }
        Ok(Self { times, grid, modes })
    }

    pub fn zero(times: RadialGrid, grid: RadialGrid) -> Self {
        Self { times, grid, modes: Vec::new() }
    }

    /// Single-mode field from a closed form `f(t, r)`.
    pub fn from_fn<F: Fn(f64, f64) -> Complex64>(times: RadialGrid, grid: RadialGrid, angular: AngularMode, f: F) -> Self {
        let samples = times.points().into_iter().map(|t| GridFunction::from_fn(grid, |r| f(t, r))).collect();
        Self { times, grid, modes: vec![FieldMode { angular, samples }] }
    }

    pub fn push_mode(&mut self, mode: FieldMode) -> Result<()> {
        let mut modes = std::mem::take(&mut self.modes);
        modes.push(mode);
        *self = Self::new(self.times, self.grid, modes)?;
        Ok(())
    }

    pub fn times(&self) -> &RadialGrid {
        &self.times
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn modes(&self) -> &[FieldMode] {
        &self.modes
    }

    /// `u(t / s, x / s)`: both grids stretched by `s`, samples unchanged.
    pub fn dilate(&self, s: f64) -> Result<Self> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::InvalidInput(format!("dilation factor must be positive, got {s}")));
        }
        let times = RadialGrid::new(self.times.lo() * s, self.times.hi() * s, self.times.len())?;
        let grid = RadialGrid::new(self.grid.lo() * s, self.grid.hi() * s, self.grid.len())?;
        let modes = self
            .modes
            .iter()
            .map(|md| {
                let samples = md
                    .samples
                    .iter()
                    .map(|g| GridFunction::new(grid, g.values().to_vec()))
                    .collect::<Result<Vec<_>>>()?;
                Ok(FieldMode { angular: md.angular.clone(), samples })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(times, grid, modes)
    }

    /// `<Y_a, Y_b>` and `<grad Y_a, grad Y_b>` on the unit sphere.
    fn gram(&self) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let n = self.modes.len();
        let mut g = vec![vec![0.0; n]; n];
        let mut k = vec![vec![0.0; n]; n];
        for a in 0..n {
            for b in 0..n {
                let (ma, mb) = (&self.modes[a].angular, &self.modes[b].angular);
                if ma.m != mb.m {
                    continue;
                }
                let am = ma.m.unsigned_abs() as f64;
                for (i, (x, y)) in ma.coefficients.iter().zip(&mb.coefficients).enumerate() {
                    let l = am + i as f64;
                    g[a][b] += x * y;
                    k[a][b] += x * y * l * (l + 1.0);
                }
            }
        }
        (g, k)
    }

    fn mode_data(&self) -> Vec<ModeData> {
        let nt = self.times.len();
        let nr = self.grid.len();
        self.modes
            .iter()
            .map(|md| {
                let u: Vec<Vec<Complex64>> = md.samples.iter().map(|s| s.values().to_vec()).collect();
                let ur = md.samples.iter().map(|s| s.derivative().into_values()).collect();
                let mut ut = vec![vec![Complex64::new(0.0, 0.0); nr]; nt];
                for j in 0..nr {
                    let series = GridFunction::new(self.times, (0..nt).map(|i| u[i][j]).collect())
                        .expect("time series matches the time grid")
                        .derivative();
                    for (i, v) in series.values().iter().enumerate() {
                        ut[i][j] = *v;
                    }
                }
                ModeData { u, ut, ur }
            })
            .collect()
    }

    fn time_index(&self, t: f64) -> Result<usize> {
        node_index(&self.times, t, "time")
    }
}

fn node_index(grid: &RadialGrid, x: f64, what: &str) -> Result<usize> {
    let h = grid.spacing();
    let s = (x - grid.lo()) / h;
    let i = s.round();
    if !(i >= 0.0 && (i as usize) < grid.len()) || (s - i).abs() > 1e-9 {
        return Err(Error::Domain(format!(
            "{what} {x} is not a sample of [{}, {}] with spacing {h}",
            grid.lo(),
            grid.hi()
        )));
    }
    Ok(i as usize)
}

/// Trapezoid weights on the grid.
fn trapezoid_weights(grid: &RadialGrid) -> Vec<f64> {
    let h = grid.spacing();
    let n = grid.len();
    (0..n).map(|i| if i == 0 || i + 1 == n { 0.5 * h } else { h }).collect()
}

/// Weights for `\int_a^b f` using the piecewise-linear interpolant of `f` on the grid.
/// Weights of adjacent intervals sum to the full trapezoid weights.
fn segment_weights(grid: &RadialGrid, a: f64, b: f64) -> Vec<f64> {
    let n = grid.len();
    let mut w = vec![0.0; n];
    let a = a.max(grid.lo());
    let b = b.min(grid.hi());
    if b <= a {
        return w;
    }
    for i in 0..n - 1 {
        let (x0, x1) = (grid.point(i), grid.point(i + 1));
        let lo = a.max(x0);
        let hi = b.min(x1);
        if hi <= lo {
            continue;
        }
        let h = x1 - x0;
        // Integrals of the two hat functions over [lo, hi].
        let s0 = (x1 - lo) / h;
        let s1 = (x1 - hi) / h;
        w[i] += 0.5 * h * (s0 * s0 - s1 * s1);
        let t0 = (lo - x0) / h;
        let t1 = (hi - x0) / h;
        w[i + 1] += 0.5 * h * (t1 * t1 - t0 * t0);
    }
    w
}

fn hermitian_form(gram: &[Vec<f64>], x: &[Complex64]) -> f64 {
    let mut s = 0.0;
    for (a, row) in gram.iter().enumerate() {
        for (b, g) in row.iter().enumerate() {
            if *g != 0.0 {
                s += g * (x[a].conj() * x[b]).re;
            }
        }
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Surface {
    /// The initial slice, at the first time sample.
    Incoming,
    /// The lateral surface `r = radius`, integrated over the whole time window.
    Outgoing { radius: f64 },
    /// The constant-time slice at `time`.
    Slice { time: f64 },
}

/// Space-time density `|d_r u|^2 + |d_t u|^2 + |grad_S u|^2 / r^2` integrated over the sphere.
fn density(data: &[ModeData], g: &[Vec<f64>], k: &[Vec<f64>], i: usize, j: usize, r: f64) -> f64 {
    let u: Vec<Complex64> = data.iter().map(|d| d.u[i][j]).collect();
    let ut: Vec<Complex64> = data.iter().map(|d| d.ut[i][j]).collect();
    let ur: Vec<Complex64> = data.iter().map(|d| d.ur[i][j]).collect();
    hermitian_form(g, &ur) + hermitian_form(g, &ut) + hermitian_form(k, &u) / (r * r)
}

fn mass_density(data: &[ModeData], g: &[Vec<f64>], i: usize, j: usize) -> f64 {
    let u: Vec<Complex64> = data.iter().map(|d| d.u[i][j]).collect();
    hermitian_form(g, &u)
}

/// Energies with the flat measures `r^2 dr dω` (slices) and `r_e^2 dt dω` (the lateral surface).
pub fn energy(field: &SpacetimeField, surface: Surface) -> Result<f64> {
    if field.modes.is_empty() {
        if let Surface::Outgoing { radius } = surface {
            node_index(&field.grid, radius, "radius")?;
        }
        return Ok(0.0);
    }
    let (g, k) = field.gram();
    let data = field.mode_data();
    match surface {
        Surface::Incoming => Ok(slice_energy_at(field, &data, &g, &k, 0)),
        Surface::Slice { time } => {
            let i = field.time_index(time)?;
            Ok(slice_energy_at(field, &data, &g, &k, i))
        }
        Surface::Outgoing { radius } => {
            let j = node_index(&field.grid, radius, "radius")?;
            let r = field.grid.point(j);
            let wt = trapezoid_weights(&field.times);
            Ok((0..field.times.len()).map(|i| wt[i] * r * r * density(&data, &g, &k, i, j, r)).sum())
        }
    }
}

fn slice_energy_at(field: &SpacetimeField, data: &[ModeData], g: &[Vec<f64>], k: &[Vec<f64>], i: usize) -> f64 {
    let wr = trapezoid_weights(&field.grid);
    (0..field.grid.len())
        .map(|j| {
            let r = field.grid.point(j);
            wr[j] * r * r * density(data, g, k, i, j, r)
        })
        .sum()
}

/// Slice energy at every time sample.
pub fn slice_energies(field: &SpacetimeField) -> Vec<f64> {
    if field.modes.is_empty() {
        return vec![0.0; field.times.len()];
    }
    let (g, k) = field.gram();
    let data = field.mode_data();
    (0..field.times.len()).map(|i| slice_energy_at(field, &data, &g, &k, i)).collect()
}

/// One dyadic shell `r in [2^{j-1}, 2^j]` clipped to the sampled range.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShellTerm {
    pub j: i32,
    pub lo: f64,
    pub hi: f64,
    /// The shell extends past the sampled range.
    pub partial: bool,
    pub grad_l2: f64,
    pub l2: f64,
}

/// A dyadic norm with its per-shell terms; `compact` is the plain `H^1` (or `L^2`) piece on `r < 4M`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DyadicNorm {
    pub value: f64,
    pub compact: Option<f64>,
    pub shells: Vec<ShellTerm>,
    pub warning: Option<String>,
}

impl DyadicNorm {
    pub fn resolved_shells(&self) -> usize {
        self.shells.iter().filter(|s| !s.partial).count()
    }
}

/// Space-time `L^2` norms of `grad_{t,x} u` and `u` over `R x {lo <= |x| <= hi}`.
fn region_norms(field: &SpacetimeField, data: &[ModeData], g: &[Vec<f64>], k: &[Vec<f64>], lo: f64, hi: f64) -> (f64, f64) {
    let wr = segment_weights(&field.grid, lo, hi);
    let wt = trapezoid_weights(&field.times);
    let mut grad = 0.0;
    let mut mass = 0.0;
    for (i, wti) in wt.iter().enumerate() {
        for (j, wrj) in wr.iter().enumerate() {
            if *wrj == 0.0 {
                continue;
            }
            let r = field.grid.point(j);
            let w = wti * wrj * r * r;
            grad += w * density(data, g, k, i, j, r);
            mass += w * mass_density(data, g, i, j);
        }
    }
    (grad.max(0.0).sqrt(), mass.max(0.0).sqrt())
}

fn shells(lo: f64, hi: f64) -> Vec<(i32, f64, f64, bool)> {
    let mut out = Vec::new();
    if hi <= lo {
        return out;
    }
    let mut j = lo.log2().floor() as i32 + 1;
    loop {
        let a = 2f64.powi(j - 1);
        let b = 2f64.powi(j);
        if a >= hi {
            break;
        }
        let (ca, cb) = (a.max(lo), b.min(hi));
        if cb > ca {
            out.push((j, ca, cb, ca > a || cb < b));
        }
        j += 1;
    }
    out
}

fn dyadic_terms(
    field: &SpacetimeField,
    params: &BlackHoleParams,
) -> (Option<(f64, f64)>, Vec<ShellTerm>, Option<String>) {
    let far = 4.0 * params.mass();
    let (lo, hi) = (field.grid.lo(), field.grid.hi());
    if field.modes.is_empty() {
        let sh = shells(lo.max(far), hi)
            .into_iter()
            .map(|(j, a, b, partial)| ShellTerm { j, lo: a, hi: b, partial, grad_l2: 0.0, l2: 0.0 })
            .collect::<Vec<_>>();
        let compact = (lo < far).then_some((0.0, 0.0));
        return (compact, sh, shell_warning(0));
    }
    let (g, k) = field.gram();
    let data = field.mode_data();
    let compact = (lo < far).then(|| region_norms(field, &data, &g, &k, lo, far.min(hi)));
    let terms: Vec<ShellTerm> = shells(lo.max(far), hi)
        .into_par_iter()
        .map(|(j, a, b, partial)| {
            let (grad_l2, l2) = region_norms(field, &data, &g, &k, a, b);
            ShellTerm { j, lo: a, hi: b, partial, grad_l2, l2 }
        })
        .collect();
    let full = terms.iter().filter(|s| !s.partial).count();
    (compact, terms, shell_warning(full))
}

fn shell_warning(full: usize) -> Option<String> {
    (full < 2).then(|| format!("only {full} dyadic shell(s) fully resolved"))
}

/// `sup_j 2^{-j/2} ||grad u||_j + 2^{-3j/2} ||u||_j` on `r >= 4M`, combined by `max` with the
/// `H^1` norm of the part in `r < 4M`.
pub fn lew_norm(field: &SpacetimeField, params: &BlackHoleParams) -> DyadicNorm {
    let (compact, shells, warning) = dyadic_terms(field, params);
    let compact = compact.map(|(g, m)| g + m);
    let dyadic = shells
        .iter()
        .map(|s| 2f64.powf(-0.5 * s.j as f64) * s.grad_l2 + 2f64.powf(-1.5 * s.j as f64) * s.l2)
        .fold(0.0, f64::max);
    DyadicNorm { value: dyadic.max(compact.unwrap_or(0.0)), compact, shells, warning }
}

/// `sum_j 2^{j/2} ||f||_j` on `r >= 4M` plus the `L^2` norm of the part in `r < 4M`.
pub fn lew_dual_norm(field: &SpacetimeField, params: &BlackHoleParams) -> DyadicNorm {
    let (compact, shells, warning) = dyadic_terms(field, params);
    let compact = compact.map(|(_, m)| m);
    let dyadic: f64 = shells.iter().map(|s| 2f64.powf(0.5 * s.j as f64) * s.l2).sum();
    DyadicNorm { value: dyadic + compact.unwrap_or(0.0), compact, shells, warning }
}

/// `sup_j 2^{-j/2} ||u||_j`, the zeroth-order local energy norm dual to [`lew_dual_norm`]:
/// `|<f, u>| <= lew_dual_norm(f) * le_norm(u)` shell by shell.
pub fn le_norm(field: &SpacetimeField, params: &BlackHoleParams) -> DyadicNorm {
    let (compact, shells, warning) = dyadic_terms(field, params);
    let compact = compact.map(|(_, m)| m);
    let dyadic = shells.iter().map(|s| 2f64.powf(-0.5 * s.j as f64) * s.l2).fold(0.0, f64::max);
    DyadicNorm { value: dyadic.max(compact.unwrap_or(0.0)), compact, shells, warning }
}

/// `\int dt \int r^2 dr dω conj(f) u` over the common sampled region.
pub fn spacetime_pairing(f: &SpacetimeField, u: &SpacetimeField) -> Result<Complex64> {
    if f.times != u.times || f.grid != u.grid {
        return Err(Error::InvalidInput("pairing needs fields on identical grids".into()));
    }
    let wt = trapezoid_weights(&f.times);
    let wr = trapezoid_weights(&f.grid);
    let mut s = Complex64::new(0.0, 0.0);
    for fa in &f.modes {
        for ub in &u.modes {
            if fa.angular.m != ub.angular.m {
                continue;
            }
            let overlap: f64 = fa.angular.coefficients.iter().zip(&ub.angular.coefficients).map(|(x, y)| x * y).sum();
            if overlap == 0.0 {
                continue;
            }
            for (i, wti) in wt.iter().enumerate() {
                for (j, wrj) in wr.iter().enumerate() {
                    let r = f.grid.point(j);
                    s += fa.samples[i].values()[j].conj() * ub.samples[i].values()[j] * (overlap * wti * wrj * r * r);
                }
            }
        }
    }
    Ok(s)
}

/// Spherical Bessel function `j_l(x)`.
pub fn spherical_bessel(l: usize, x: f64) -> f64 {
    let x = x.abs();
    if x < 1.0 {
        // Power series.
        let mut pref = 1.0;
        for i in 1..=l {
            pref *= x / (2 * i + 1) as f64;
        }
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..40 {
            term *= -0.5 * x * x / (k as f64 * (2 * l + 2 * k + 1) as f64);
            sum += term;
            if term.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        return pref * sum;
    }
    let (s, c) = x.sin_cos();
    let j0 = s / x;
    if l == 0 {
        return j0;
    }
    let j1 = s / (x * x) - c / x;
    if x > l as f64 {
        let (mut a, mut b) = (j0, j1);
        for n in 1..l {
            let next = (2 * n + 1) as f64 / x * b - a;
            a = b;
            b = next;
        }
        return b;
    }
    // Downward recurrence, normalized against whichever of j0, j1 is larger.
    let start = l + 20 + (40.0 * l as f64).sqrt() as usize;
    let (mut hi, mut mid) = (0.0f64, 1e-300f64);
    let mut at_l = 0.0;
    let mut v0 = 0.0;
    let mut v1 = 0.0;
    for n in (1..=start).rev() {
        let lower = (2 * n + 1) as f64 / x * mid - hi;
        hi = mid;
        mid = lower;
        if n - 1 == l {
            at_l = mid;
        }
        if n - 1 == 1 {
            v1 = mid;
        }
        if n - 1 == 0 {
            v0 = mid;
        }
        if mid.abs() > 1e250 {
            hi *= 1e-250;
            mid *= 1e-250;
            at_l *= 1e-250;
            v1 *= 1e-250;
        }
    }
    if j0.abs() >= j1.abs() {
        at_l * j0 / v0
    } else {
        at_l * j1 / v1
    }
}

/// Quadrature parameters for the Hankel route of [`mixed_norm`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HankelConfig {
    /// Defaults to the radial Nyquist frequency `pi / h`.
    pub k_max: Option<f64>,
    pub k_points: Option<usize>,
}

impl Default for HankelConfig {
    fn default() -> Self {
        Self { k_max: None, k_points: None }
    }
}

/// Size and memory cap of the Cartesian synthesis used for `q != 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CartesianConfig {
    pub n: usize,
    pub memory_budget: usize,
}

impl Default for CartesianConfig {
    fn default() -> Self {
        Self { n: 48, memory_budget: 512 << 20 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NormRoute {
    Hankel,
    Cartesian,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixedNorm {
    pub value: f64,
    pub route: NormRoute,
    /// `|| |D|^{-rho} grad_{t,x} u(t) ||_{L^q}` at each time sample.
    pub slices: Vec<f64>,
}

fn lp_time(times: &RadialGrid, slices: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        return slices.iter().cloned().fold(0.0, f64::max);
    }
    let w = trapezoid_weights(times);
    slices.iter().zip(&w).map(|(s, w)| w * s.powf(p)).sum::<f64>().powf(1.0 / p)
}

/// `|| |D_x|^{-rho} grad_{t,x} u ||_{L^p_t L^q_x}` with flat `|D_x|` in polar coordinates.
///
/// `q = 2` uses spherical Hankel transforms of the `(m, l)` components; any `q` can go
/// through the Cartesian FFT synthesis with `route = Some(NormRoute::Cartesian)`.
pub fn mixed_norm(
    field: &SpacetimeField,
    pair: &StrichartzPair,
    route: Option<NormRoute>,
    hankel: HankelConfig,
    cartesian: CartesianConfig,
) -> Result<MixedNorm> {
    if !pair.is_valid() {
        return Err(Error::InvalidInput(format!("{} is not a Strichartz pair", pair.label())));
    }
    let route = route.unwrap_or(if pair.q == 2.0 { NormRoute::Hankel } else { NormRoute::Cartesian });
    let slices = match route {
        NormRoute::Hankel => {
            if pair.q != 2.0 {
                return Err(Error::InvalidInput("the Hankel route needs q = 2".into()));
            }
            hankel_slices(field, pair.rho, hankel)?
        }
        NormRoute::Cartesian => cartesian_slices(field, pair.rho, pair.q, cartesian)?,
    };
    Ok(MixedNorm { value: lp_time(&field.times, &slices, pair.p), route, slices })
}

/// `(m, l)` radial components `F_{m,l}(t, r) = sum_a c_{a,l} u_a(t, r)`.
fn harmonic_components(field: &SpacetimeField) -> Vec<(usize, Vec<Vec<Complex64>>)> {
    let mut out: Vec<(i64, usize, Vec<Vec<Complex64>>)> = Vec::new();
    let nt = field.times.len();
    let nr = field.grid.len();
    for md in &field.modes {
        let am = md.angular.m.unsigned_abs() as usize;
        for (i, c) in md.angular.coefficients.iter().enumerate() {
            if *c == 0.0 {
                continue;
            }
            let l = am + i;
            let pos = match out.iter().position(|(m, ll, _)| *m == md.angular.m && *ll == l) {
                Some(p) => p,
                None => {
                    out.push((md.angular.m, l, vec![vec![Complex64::new(0.0, 0.0); nr]; nt]));
                    out.len() - 1
                }
            };
            for t in 0..nt {
                for (acc, v) in out[pos].2[t].iter_mut().zip(md.samples[t].values()) {
                    *acc += v * c;
                }
            }
        }
    }
    out.into_iter().map(|(_, l, f)| (l, f)).collect()
}

fn hankel_slices(field: &SpacetimeField, rho: f64, cfg: HankelConfig) -> Result<Vec<f64>> {
    let nt = field.times.len();
    if field.modes.is_empty() {
        return Ok(vec![0.0; nt]);
    }
    let h = field.grid.spacing();
    let k_max = cfg.k_max.unwrap_or(PI / h);
    let k_points = cfg.k_points.unwrap_or_else(|| ((4.0 * k_max * field.grid.hi() / PI).ceil() as usize + 1).clamp(257, 8193));
    let ks: Vec<f64> = (0..k_points).map(|i| k_max * i as f64 / (k_points - 1) as f64).collect();
    let dk = k_max / (k_points - 1) as f64;
    let wr = trapezoid_weights(&field.grid);
    let rs = field.grid.points();
    let mut totals = vec![0.0; nt];
    for (l, comp) in harmonic_components(field) {
        let time_deriv: Vec<Vec<Complex64>> = {
            let nr = rs.len();
            let mut d = vec![vec![Complex64::new(0.0, 0.0); nr]; nt];
            for j in 0..nr {
                let series = GridFunction::new(field.times, (0..nt).map(|i| comp[i][j]).collect())?.derivative();
                for (i, v) in series.values().iter().enumerate() {
                    d[i][j] = *v;
                }
            }
            d
        };
        let norm = (2.0 / PI).sqrt();
        let per_k: Vec<Vec<f64>> = ks
            .par_iter()
            .enumerate()
            .map(|(ik, &k)| {
                let kern: Vec<f64> = rs.iter().zip(&wr).map(|(r, w)| norm * w * r * r * spherical_bessel(l, k * r)).collect();
                let weight = if ik == 0 || ik + 1 == ks.len() { 0.5 * dk } else { dk };
                let mult = if k == 0.0 { 0.0 } else { k.powf(-2.0 * rho) * k * k * weight };
                (0..nt)
                    .map(|t| {
                        if mult == 0.0 {
                            return 0.0;
                        }
                        let fh: Complex64 = comp[t].iter().zip(&kern).map(|(f, w)| f * w).sum();
                        let fth: Complex64 = time_deriv[t].iter().zip(&kern).map(|(f, w)| f * w).sum();
                        mult * (k * k * fh.norm_sqr() + fth.norm_sqr())
                    })
                    .collect()
            })
            .collect();
        for row in per_k {
            for (acc, v) in totals.iter_mut().zip(row) {
                *acc += v;
            }
        }
    }
    Ok(totals.into_iter().map(|s| s.max(0.0).sqrt()).collect())
}

fn fft3(data: &mut [Complex64], n: usize, fft: &dyn Fft<f64>) {
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    for axis in 0..3 {
        let stride = n.pow(axis as u32);
        for outer in 0..n * n {
            // Index of the line start: all coordinates except `axis` taken from `outer`.
            let lo = outer % stride;
            let hi = outer / stride;
            let base = lo + hi * stride * n;
            for (q, x) in line.iter_mut().enumerate() {
                *x = data[base + q * stride];
            }
            fft.process(&mut line);
            for (q, x) in line.iter().enumerate() {
                data[base + q * stride] = *x;
            }
        }
    }
}

fn cartesian_slices(field: &SpacetimeField, rho: f64, q: f64, cfg: CartesianConfig) -> Result<Vec<f64>> {
    let n = cfg.n;
    if n < 8 || n % 2 != 0 {
        return Err(Error::InvalidInput(format!("Cartesian synthesis needs an even n >= 8, got {n}")));
    }
    let n3 = n * n * n;
    let bytes = n3 * std::mem::size_of::<Complex64>() * 6 + n3 * field.modes.len() * std::mem::size_of::<Complex64>();
    if bytes > cfg.memory_budget {
        return Err(Error::Resolution(format!(
            "Cartesian synthesis needs {bytes} bytes, above the budget of {}",
            cfg.memory_budget
        )));
    }
    let nt = field.times.len();
    if field.modes.is_empty() {
        return Ok(vec![0.0; nt]);
    }
    let half = field.grid.hi();
    let dx = 2.0 * half / n as f64;
    let coord = |i: usize| -half + i as f64 * dx;
    // Angular factors and radii at every lattice point.
    let mut radius = vec![0.0; n3];
    let mut ylm: Vec<Vec<Complex64>> = vec![vec![Complex64::new(0.0, 0.0); n3]; field.modes.len()];
    for iz in 0..n {
        for iy in 0..n {
            for ix in 0..n {
                let idx = ix + n * (iy + n * iz);
                let (x, y, z) = (coord(ix), coord(iy), coord(iz));
                let r = (x * x + y * y + z * z).sqrt();
                radius[idx] = r;
                let theta = if r > 0.0 { (z / r).clamp(-1.0, 1.0).acos() } else { 0.0 };
                let phi = y.atan2(x);
                for (a, md) in field.modes.iter().enumerate() {
                    let s = eigenfunction_samples(&md.angular, &[theta])[0];
                    ylm[a][idx] = Complex64::from_polar(s, md.angular.m as f64 * phi);
                }
            }
        }
    }
    let freq = |i: usize| {
        let k = if i <= n / 2 { i as f64 } else { i as f64 - n as f64 };
        2.0 * PI * k / (2.0 * half)
    };
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let time_series: Vec<Vec<Vec<Complex64>>> = field
        .modes
        .iter()
        .map(|md| {
            let nr = field.grid.len();
            let mut d = vec![vec![Complex64::new(0.0, 0.0); nr]; nt];
            for j in 0..nr {
                let series = GridFunction::new(field.times, (0..nt).map(|i| md.samples[i].values()[j]).collect())
                    .expect("time series matches the time grid")
                    .derivative();
                for (i, v) in series.values().iter().enumerate() {
                    d[i][j] = *v;
                }
            }
            d
        })
        .collect();
    let scale = 1.0 / n3 as f64;
    let cell = dx * dx * dx;
    let mut out = Vec::with_capacity(nt);
    for t in 0..nt {
        let synth = |vals: Vec<&[Complex64]>| -> Vec<Complex64> {
            (0..n3)
                .into_par_iter()
                .map(|idx| vals.iter().zip(&ylm).map(|(v, y)| lagrange4(&field.grid, v, radius[idx]) * y[idx]).sum())
                .collect()
        };
        let mut u = synth(field.modes.iter().map(|md| md.samples[t].values()).collect());
        let mut ut = synth(time_series.iter().map(|d| d[t].as_slice()).collect());
        fft3(&mut u, n, fwd.as_ref());
        fft3(&mut ut, n, fwd.as_ref());
        let mut comps: Vec<Vec<Complex64>> = vec![ut; 1];
        for axis in 0..3 {
            let mut c = u.clone();
            for iz in 0..n {
                for iy in 0..n {
                    for ix in 0..n {
                        let idx = ix + n * (iy + n * iz);
                        let k = [freq(ix), freq(iy), freq(iz)];
                        let kk = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt();
                        let nyq = [ix, iy, iz][axis] == n / 2;
                        c[idx] = if kk == 0.0 || nyq { Complex64::new(0.0, 0.0) } else { c[idx] * Complex64::new(0.0, k[axis]) * kk.powf(-rho) };
                    }
                }
            }
            comps.push(c);
        }
        for iz in 0..n {
            for iy in 0..n {
                for ix in 0..n {
                    let idx = ix + n * (iy + n * iz);
                    let k = [freq(ix), freq(iy), freq(iz)];
                    let kk = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt();
                    comps[0][idx] = if kk == 0.0 { Complex64::new(0.0, 0.0) } else { comps[0][idx] * kk.powf(-rho) };
                }
            }
        }
        let mut mag = vec![0.0; n3];
        for c in comps.iter_mut() {
            fft3(c, n, inv.as_ref());
            for (m, v) in mag.iter_mut().zip(c.iter()) {
                *m += (v * scale).norm_sqr();
            }
        }
        let value = if q.is_infinite() {
            mag.iter().map(|m| m.sqrt()).fold(0.0, f64::max)
        } else {
            (mag.iter().map(|m| m.powf(0.5 * q)).sum::<f64>() * cell).powf(1.0 / q)
        };
        out.push(value);
    }
    Ok(out)
}

/// `lew_norm / (sup_t E^{1/2} T^{1/2})`, the constant in the crude local-energy bound.
pub fn lew_energy_constant(field: &SpacetimeField, params: &BlackHoleParams) -> f64 {
    let lew = lew_norm(field, params).value;
    let e = slice_energies(field).into_iter().fold(0.0, f64::max);
    let window = field.times.hi() - field.times.lo();
    if e == 0.0 {
        0.0
    } else {
        lew / (e.sqrt() * window.sqrt())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormRecord {
    pub norm_name: String,
    pub pair: String,
    pub value: f64,
    pub resolution_flags: String,
}

/// CSV with columns `norm_name,pair,value,resolution_flags`.
pub fn write_norm_csv<W: Write>(rows: &[NormRecord], out: &mut W) -> io::Result<()> {
    writeln!(out, "norm_name,pair,value,resolution_flags")?;
    for r in rows {
        writeln!(out, "{},{},{:.12e},{}", r.norm_name, r.pair, r.value, r.resolution_flags)?;
    }
    Ok(())
}
