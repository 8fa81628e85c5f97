//! Time-domain evolution of single Schwarzschild modes and frequency-domain
//! sweeps of the separated Kerr problem.
//!
//! With `u = v(t, r*) Y_lm / r` the wave equation at `a = 0` becomes
//! `v_tt = v_{r*r*} - V_l v`, `V_l = (1 - 2M/r)(l(l+1)/r^2 + 2M/r^3)`.
//! The leapfrog scheme below conserves the discrete energy
//! `sum_i h [ ((v^{n+1}_i - v^n_i)/dt)^2 + (D+ v^{n+1})_i (D+ v^n)_i + V_i v^{n+1}_i v^n_i ]`.

use std::io::{self, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::angular::spheroidal_mode;
use crate::error::{Error, Result};
use crate::geometry::{delta, BlackHoleParams};
use crate::grid::{GridFunction, RadialGrid};
use crate::quantization::{PeriodicGrid, WeightOperators};
use crate::radial::{
    cauchy_ratio, classify_case, conjugation_potential, elliptic_ratios, gronwall_constant, radial_energy, solve_radial_cauchy,
    solve_radial_dirichlet, Case, CaseTag, CaseThresholds, Direction, FrequencyTriple,
};
use crate::symbols::WeightParams;

pub const MAX_CFL: f64 = 0.9;

/// Areal radius at tortoise coordinate `rs` for Schwarzschild mass `m`, with `r*(3M) = 0`.
pub fn schwarzschild_radius(rs: f64, m: f64) -> f64 {
    // r = 2M (1 + e^y), r* = 2M (1 + e^y) + 2M y - c, monotone in y.
    let c = 3.0 * m + 2.0 * m * 0.5f64.ln();
    let target = (rs + c) / (2.0 * m) - 1.0;
    // Solve e^y + y = target.
    let mut y = if target > 1.0 { target.ln().min(target) } else { target - 1.0 };
    if target < -30.0 {
        y = target;
    }
    for _ in 0..100 {
        let f = y.exp() + y - target;
        let step = f / (y.exp() + 1.0);
        y -= step;
        if step.abs() < 1e-15 * y.abs().max(1.0) {
            break;
        }
    }
    2.0 * m * (1.0 + y.exp())
}

pub fn regge_wheeler_potential(l: u32, r: f64, m: f64) -> f64 {
    let l = l as f64;
    (1.0 - 2.0 * m / r) * (l * (l + 1.0) / (r * r) + 2.0 * m / (r * r * r))
}

/// Cauchy data `(u, d_t u)` sampled on a uniform `r*` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    pub u0: GridFunction,
    pub u1: GridFunction,
}

impl InitialData {
    /// `u = exp(-(r* - center)^2 / width^2) / r` at rest.
    pub fn gaussian(grid: RadialGrid, center: f64, width: f64, mass: f64) -> Self {
        let u0 = GridFunction::from_real_fn(grid, |rs| (-((rs - center) / width).powi(2)).exp() / schwarzschild_radius(rs, mass));
        Self { u0, u1: GridFunction::zeros(grid) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvolutionOptions {
    /// Snapshot cadence in units of time; zero keeps only the final state.
    pub snapshot_every: f64,
    /// Local-energy window in areal radius.
    pub window: (f64, f64),
    /// Data below `support_tol * max|v|` counts as outside the support.
    pub support_tol: f64,
    /// Required distance from the support to each grid end, in multiples of the duration.
    pub clearance: f64,
}

impl Default for EvolutionOptions {
    fn default() -> Self {
        Self { snapshot_every: 10.0, window: (2.5, 3.5), support_tol: 1e-12, clearance: 2.0 }
    }
}

/// `v` at time `t` together with the discrete `v_tt` of the scheme at that step.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub v: GridFunction,
    pub v_tt: GridFunction,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvolutionSample {
    pub t: f64,
    pub slice_energy: f64,
    pub local_energy: f64,
    pub linf: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionRun {
    pub l: u32,
    pub m: i32,
    pub mass: f64,
    pub grid: RadialGrid,
    pub step: f64,
    pub duration: f64,
    pub snapshots: Vec<Snapshot>,
    /// One row per step; energies at half steps are reported at `t_{n+1/2}`.
    pub series: Vec<EvolutionSample>,
}

impl EvolutionRun {
    pub fn initial_energy(&self) -> f64 {
        self.series.first().map_or(0.0, |s| s.slice_energy)
    }

    pub fn max_energy_drift(&self) -> f64 {
        let e0 = self.initial_energy();
        if e0 == 0.0 {
            return 0.0;
        }
        self.series.iter().map(|s| (s.slice_energy - e0).abs() / e0).fold(0.0, f64::max)
    }

    pub fn peak_local_energy(&self) -> (f64, f64) {
        self.series.iter().fold((0.0, 0.0), |acc, s| if s.local_energy > acc.1 { (s.t, s.local_energy) } else { acc })
    }

    /// Local energy at the last recorded step.
    pub fn final_local_energy(&self) -> f64 {
        self.series.last().map_or(0.0, |s| s.local_energy)
    }

    /// CSV with columns `t,slice_energy,local_energy_window,linf`.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "t,slice_energy,local_energy_window,linf")?;
        for s in &self.series {
            writeln!(out, "{:.10e},{:.16e},{:.16e},{:.16e}", s.t, s.slice_energy, s.local_energy, s.linf)?;
        }
        Ok(())
    }
}

fn support(v: &[f64], tol: f64) -> Option<(usize, usize)> {
    let peak = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if peak == 0.0 {
        return None;
    }
    let first = v.iter().position(|x| x.abs() > tol * peak)?;
    let last = v.iter().rposition(|x| x.abs() > tol * peak)?;
    Some((first, last))
}

/// Leapfrog evolution of `v = r u` for the mode `(l, m)` with `dt = step`.
pub fn evolve_schwarzschild_mode(
    l: u32,
    m: i32,
    data: &InitialData,
    duration: f64,
    step: f64,
    mass: f64,
    opts: &EvolutionOptions,
) -> Result<EvolutionRun> {
    if m.unsigned_abs() > l {
        return Err(Error::InvalidInput(format!("|m| = {} exceeds l = {l}", m.unsigned_abs())));
    }
    if !(duration > 0.0 && step > 0.0 && mass > 0.0) {
        return Err(Error::InvalidInput("duration, step and mass must be positive".into()));
    }
    let grid = *data.u0.grid();
    if *data.u1.grid() != grid {
        return Err(Error::InvalidInput("u0 and u1 live on different grids".into()));
    }
    let h = grid.spacing();
    let cfl = step / h;
    if cfl > MAX_CFL {
        return Err(Error::InvalidInput(format!("CFL ratio {cfl:.3} exceeds {MAX_CFL}")));
    }
    let n = grid.len();
    let r: Vec<f64> = grid.points().iter().map(|&rs| schwarzschild_radius(rs, mass)).collect();
    let pot: Vec<f64> = r.iter().map(|&ri| regge_wheeler_potential(l, ri, mass)).collect();
    let v0: Vec<f64> = data.u0.values().iter().zip(&r).map(|(u, ri)| u.re * ri).collect();
    let v1: Vec<f64> = data.u1.values().iter().zip(&r).map(|(u, ri)| u.re * ri).collect();
    if data.u0.values().iter().chain(data.u1.values()).any(|u| u.im != 0.0) {
        return Err(Error::InvalidInput("the evolution takes real data".into()));
    }
    let clear = opts.clearance * duration;
    for w in [&v0, &v1] {
        if let Some((a, b)) = support(w, opts.support_tol) {
            let (lo, hi) = (grid.point(a) - grid.lo(), grid.hi() - grid.point(b));
            if lo < clear || hi < clear {
                return Err(Error::Domain(format!(
                    "data support [{:.3}, {:.3}] within {clear} of the grid ends [{}, {}]",
                    grid.point(a),
                    grid.point(b),
                    grid.lo(),
                    grid.hi()
                )));
            }
        }
    }
    let window: Vec<bool> = r.iter().map(|&ri| ri >= opts.window.0 && ri <= opts.window.1).collect();
    let lap = |v: &[f64], i: usize| (v[i + 1] - 2.0 * v[i] + v[i - 1]) / (h * h);
    let accel = |v: &[f64]| -> Vec<f64> {
        let mut a = vec![0.0; n];
        for i in 1..n - 1 {
            a[i] = lap(v, i) - pot[i] * v[i];
        }
        a
    };
    let steps = (duration / step).round() as usize;
    let dt = step;
    // Taylor start keeps the scheme second order.
    let a0 = accel(&v0);
    let mut prev = v0.clone();
    let mut cur: Vec<f64> = (0..n).map(|i| if i == 0 || i + 1 == n { 0.0 } else { v0[i] + dt * v1[i] + 0.5 * dt * dt * a0[i] }).collect();
    let energy = |a: &[f64], b: &[f64], mask: Option<&[bool]>| -> f64 {
        let mut e = 0.0;
        for i in 0..n - 1 {
            if let Some(mk) = mask {
                if !mk[i] {
                    continue;
                }
            }
            let vt = (b[i] - a[i]) / dt;
            let dp = (a[i + 1] - a[i]) * (b[i + 1] - b[i]) / (h * h);
            e += h * (vt * vt + dp + pot[i] * a[i] * b[i]);
        }
        e
    };
    let linf = |v: &[f64]| v.iter().zip(&r).fold(0.0f64, |acc, (x, ri)| acc.max((x / ri).abs()));
    let as_fn = |v: &[f64]| GridFunction::new(grid, v.iter().map(|x| Complex64::new(*x, 0.0)).collect()).expect("grid length");
    let mut series = Vec::with_capacity(steps);
    let mut snapshots = Vec::new();
    let every = if opts.snapshot_every > 0.0 { (opts.snapshot_every / dt).round().max(1.0) as usize } else { usize::MAX };
    series.push(EvolutionSample {
        t: 0.5 * dt,
        slice_energy: energy(&prev, &cur, None),
        local_energy: energy(&prev, &cur, Some(&window)),
        linf: linf(&prev),
    });
    for k in 1..steps {
        let a = accel(&cur);
        let next: Vec<f64> = (0..n).map(|i| if i == 0 || i + 1 == n { 0.0 } else { 2.0 * cur[i] - prev[i] + dt * dt * a[i] }).collect();
        if k % every == 0 {
            snapshots.push(Snapshot { t: k as f64 * dt, v: as_fn(&cur), v_tt: as_fn(&a) });
        }
        series.push(EvolutionSample {
            t: (k as f64 + 0.5) * dt,
            slice_energy: energy(&cur, &next, None),
            local_energy: energy(&cur, &next, Some(&window)),
            linf: linf(&cur),
        });
        prev = cur;
        cur = next;
    }
    let a = accel(&cur);
    snapshots.push(Snapshot { t: steps as f64 * dt, v: as_fn(&cur), v_tt: as_fn(&a) });
    Ok(EvolutionRun { l, m, mass, grid, step: dt, duration: steps as f64 * dt, snapshots, series })
}

/// Relative residual of `w = sqrt(Delta) v / r` under
/// `Delta w_rr - (r^4 / Delta) w_tt - l(l+1) w + V w` at interior nodes with `r` in `[r_lo, r_hi]`.
///
/// `r`-derivatives go through `d_r = (r^2 / Delta) d_{r*}` with fourth-order stencils.
pub fn kerr_rw_residual(run: &EvolutionRun, snapshot: &Snapshot, r_lo: f64, r_hi: f64) -> Result<f64> {
    let params = BlackHoleParams::schwarzschild(run.mass)?;
    let grid = run.grid;
    let h = grid.spacing();
    let n = grid.len();
    let r: Vec<f64> = grid.points().iter().map(|&rs| schwarzschild_radius(rs, run.mass)).collect();
    let w: Vec<f64> = (0..n).map(|i| delta(r[i], &params).max(0.0).sqrt() * snapshot.v.values()[i].re / r[i]).collect();
    let w_tt: Vec<f64> = (0..n).map(|i| delta(r[i], &params).max(0.0).sqrt() * snapshot.v_tt.values()[i].re / r[i]).collect();
    let d1 = |f: &[f64], i: usize| (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) / (12.0 * h);
    let jac: Vec<f64> = r.iter().map(|&ri| ri * ri / delta(ri, &params)).collect();
    let mut wr = vec![0.0; n];
    for i in 2..n - 2 {
        wr[i] = jac[i] * d1(&w, i);
    }
    let l = run.l as f64;
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for i in 4..n - 4 {
        if r[i] < r_lo || r[i] > r_hi {
            continue;
        }
        let d = delta(r[i], &params);
        let wrr = jac[i] * d1(&wr, i);
        let v = conjugation_potential(r[i], &params)?;
        let terms = [d * wrr, -(r[i].powi(4) / d) * w_tt[i], -l * (l + 1.0) * w[i], v * w[i]];
        worst = worst.max(terms.iter().sum::<f64>().abs());
        scale = scale.max(terms.iter().map(|x| x.abs()).fold(0.0, f64::max));
    }
    if scale == 0.0 {
        return Ok(0.0);
    }
    Ok(worst / scale)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepConfig {
    pub thresholds: CaseThresholds,
    pub weights: WeightParams,
    /// Nodes of the periodic box used for the weighted norms; zero skips them.
    pub box_points: usize,
    pub box_length: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { thresholds: CaseThresholds::default(), weights: WeightParams::default(), box_points: 256, box_length: 1.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub tau: f64,
    pub m: i64,
    pub k: u64,
    pub lambda: f64,
    pub case: Option<CaseTag>,
    pub solver: &'static str,
    pub diagnostics: Vec<(String, f64)>,
    pub lek: Option<f64>,
    pub lek_dual: Option<f64>,
    pub weighted_ratio: Option<f64>,
    pub unweighted_ratio: Option<f64>,
    pub error: Option<String>,
}

fn sweep_row(m: i64, k: u64, tau: f64, params: &BlackHoleParams, g: &GridFunction, cfg: &SweepConfig) -> Result<SweepRow> {
    let a = params.spin();
    let mode = spheroidal_mode(m, k, a * a * tau * tau)?;
    let lambda = mode.lambda();
    let triple = FrequencyTriple::new(tau, m as f64, lambda)?;
    let tag = classify_case(&triple, cfg.thresholds);
    let mut diagnostics = Vec::new();
    let (w, solver) = match tag.case {
        Case::Case2 | Case::Case4 => {
            let (w, residual) = solve_radial_cauchy(g, &triple, params, Direction::Outward)?;
            diagnostics.push(("residual".to_string(), residual));
            (w, "cauchy")
        }
        Case::Case1 | Case::Case3 => (solve_radial_dirichlet(g, &triple, params)?, "dirichlet"),
    };
    let energy = radial_energy(&w, &triple, params, tag.case)?;
    let g_norm = g.l2_norm();
    match tag.case {
        Case::Case2 => {
            diagnostics.push(("gronwall".to_string(), gronwall_constant(&energy, w.grid(), g_norm)));
            diagnostics.push(("cauchy_ratio".to_string(), cauchy_ratio(&w, g, tau)));
        }
        Case::Case3 => {
            let (e0, e1) = elliptic_ratios(&w, g, lambda);
            diagnostics.push(("elliptic_l2".to_string(), e0));
            diagnostics.push(("elliptic_h1".to_string(), e1));
        }
        _ => {
            diagnostics.push(("energy_max".to_string(), energy.iter().cloned().fold(0.0, f64::max)));
        }
    }
    let mut row = SweepRow {
        tau,
        m,
        k,
        lambda,
        case: Some(tag),
        solver,
        diagnostics,
        lek: None,
        lek_dual: None,
        weighted_ratio: None,
        unweighted_ratio: None,
        error: None,
    };
    if cfg.box_points > 0 && tau != 0.0 {
        let center = if lambda > 0.0 {
            crate::geodesics::trapped_radius(tau, m as f64, params)?
        } else {
            3.0 * params.mass()
        };
        let pg = PeriodicGrid::new(center, cfg.box_length * params.mass(), cfg.box_points)?;
        let ops = WeightOperators::kerr(&triple, params, &cfg.weights, &pg)?;
        let wb: Vec<Complex64> = pg.points().iter().map(|&x| w.interpolate(x)).collect();
        let gb: Vec<Complex64> = pg.points().iter().map(|&x| g.interpolate(x)).collect();
        let lek = ops.lek_mode_norm(&wb);
        let lek_dual = ops.lek_dual_mode_norm(&gb);
        let gn = pg.l2_norm(&gb);
        row.lek = Some(lek);
        row.lek_dual = Some(lek_dual);
        if lek_dual > 0.0 {
            row.weighted_ratio = Some(lek / lek_dual);
        }
        if gn > 0.0 {
            row.unweighted_ratio = Some((tau.abs() + lambda) * pg.l2_norm(&wb) / gn);
        }
    }
    Ok(row)
}

/// One row per `tau`; solver errors are recorded in the row and the sweep continues.
pub fn frequency_sweep(
    m: i64,
    k: u64,
    taus: &[f64],
    params: &BlackHoleParams,
    g: &GridFunction,
    cfg: &SweepConfig,
) -> Vec<SweepRow> {
    taus.par_iter()
        .map(|&tau| {
            sweep_row(m, k, tau, params, g, cfg).unwrap_or_else(|e| SweepRow {
                tau,
                m,
                k,
                lambda: f64::NAN,
                case: None,
                solver: "none",
                diagnostics: Vec::new(),
                lek: None,
                lek_dual: None,
                weighted_ratio: None,
                unweighted_ratio: None,
                error: Some(e.to_string()),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::tortoise_coordinate;

    #[test]
    fn tortoise_inverse() {
        let p = BlackHoleParams::schwarzschild(1.0).unwrap();
        for r in [2.000001, 2.1, 2.5, 3.0, 7.0, 40.0, 500.0] {
            let rs = tortoise_coordinate(r, &p).unwrap();
            assert!((schwarzschild_radius(rs, 1.0) - r).abs() < 1e-10 * r, "r = {r}");
        }
        assert_eq!(schwarzschild_radius(0.0, 1.0), 3.0);
        assert!(schwarzschild_radius(-300.0, 1.0) >= 2.0);
    }

    #[test]
    fn zero_data_stays_zero() {
        let grid = RadialGrid::with_spacing(-50.0, 50.0, 0.05).unwrap();
        let data = InitialData { u0: GridFunction::zeros(grid), u1: GridFunction::zeros(grid) };
        let run = evolve_schwarzschild_mode(2, 0, &data, 5.0, 0.025, 1.0, &EvolutionOptions::default()).unwrap();
        assert!(run.series.iter().all(|s| s.slice_energy == 0.0 && s.linf == 0.0));
        assert!(run.snapshots.iter().all(|s| s.v.sup_norm() == 0.0));
    }

    #[test]
    fn rejects_bad_runs() {
        let grid = RadialGrid::with_spacing(-50.0, 50.0, 0.05).unwrap();
        let data = InitialData::gaussian(grid, 0.0, 2.0, 1.0);
        let opts = EvolutionOptions::default();
        assert!(evolve_schwarzschild_mode(2, 0, &data, 5.0, 0.05, 1.0, &opts).is_err());
        assert!(matches!(evolve_schwarzschild_mode(2, 0, &data, 30.0, 0.02, 1.0, &opts), Err(Error::Domain(_))));
        assert!(evolve_schwarzschild_mode(1, 2, &data, 5.0, 0.02, 1.0, &opts).is_err());
    }

    #[test]
    fn discrete_energy_is_conserved() {
        let grid = RadialGrid::with_spacing(-60.0, 60.0, 0.04).unwrap();
        let data = InitialData::gaussian(grid, 4.0, 1.5, 1.0);
        let run = evolve_schwarzschild_mode(1, 0, &data, 20.0, 0.02, 1.0, &EvolutionOptions::default()).unwrap();
        assert!(run.max_energy_drift() < 1e-10, "{}", run.max_energy_drift());
    }

    #[test]
    fn residual_of_reconstructed_field() {
        let grid = RadialGrid::with_spacing(-40.0, 40.0, 0.02).unwrap();
        let data = InitialData::gaussian(grid, 2.0, 2.0, 1.0);
        let opts = EvolutionOptions { snapshot_every: 5.0, ..Default::default() };
        let run = evolve_schwarzschild_mode(2, 0, &data, 10.0, 0.01, 1.0, &opts).unwrap();
        for s in &run.snapshots {
            let res = kerr_rw_residual(&run, s, 2.2, 20.0).unwrap();
            assert!(res < 1e-4, "t = {}: {res}", s.t);
        }
    }

    #[test]
    fn sweep_reality_symmetry() {
        let p = BlackHoleParams::new(1.0, 0.1).unwrap();
        let grid = RadialGrid::new(2.3, 12.0, 4001).unwrap();
        let g = GridFunction::from_real_fn(grid, |r| (-(r - 5.0).powi(2)).exp() * if r > 2.4 { 1.0 } else { 0.0 });
        let cfg = SweepConfig { box_points: 0, ..Default::default() };
        let a = frequency_sweep(1, 2, &[0.5, 3.0, 20.0], &p, &g, &cfg);
        let b = frequency_sweep(-1, 2, &[-0.5, -3.0, -20.0], &p, &g, &cfg);
        for (x, y) in a.iter().zip(&b) {
            assert!(x.error.is_none(), "{:?}", x.error);
            assert_eq!(x.case.map(|c| c.case), y.case.map(|c| c.case));
            for ((nx, vx), (ny, vy)) in x.diagnostics.iter().zip(&y.diagnostics) {
                assert_eq!(nx, ny);
                assert!((vx - vy).abs() <= 1e-12 * vx.abs().max(1.0), "{nx}: {vx} vs {vy}");
            }
        }
    }

    #[test]
    fn sweep_rows_match_direct_solves() {
        let p = BlackHoleParams::schwarzschild(1.0).unwrap();
        let grid = RadialGrid::new(2.3, 12.0, 4001).unwrap();
        let g = GridFunction::from_real_fn(grid, |r| (-(r - 5.0).powi(2)).exp() * if r > 2.4 { 1.0 } else { 0.0 });
        let cfg = SweepConfig { box_points: 0, ..Default::default() };
        let rows = frequency_sweep(0, 1, &[0.4, 12.0], &p, &g, &cfg);
        let lam = 2f64.sqrt();
        let t = FrequencyTriple::new(0.4, 0.0, lam).unwrap();
        let w = solve_radial_dirichlet(&g, &t, &p).unwrap();
        let e = radial_energy(&w, &t, &p, Case::Case1).unwrap();
        assert_eq!(rows[0].diagnostics[0].1, e.iter().cloned().fold(0.0, f64::max));
        let t = FrequencyTriple::new(12.0, 0.0, lam).unwrap();
        let (_, res) = solve_radial_cauchy(&g, &t, &p, Direction::Outward).unwrap();
        assert_eq!(rows[1].diagnostics[0].1, res);
    }
}
