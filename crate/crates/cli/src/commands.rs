//! One function per subcommand; each fills an [`Artifacts`] without touching the disk.

use std::f64::consts::PI;

use kerrlab::angular::spheroidal_eigenvalues;
use kerrlab::evolution::{
    evolve_schwarzschild_mode, frequency_sweep, kerr_rw_residual, EvolutionOptions, InitialData, SweepConfig,
};
use kerrlab::geodesics::{default_step, equatorial_launch, geodesic_flow, trapped_radius, trapping_residuals, FlowWindow};
use kerrlab::geometry::{bl_inverse_metric, bl_metric, identity_defect, BoyerLindquistPoint, MuProfile};
use kerrlab::grid::{GridFunction, RadialGrid};
use kerrlab::norms::{builtin_pairs, StrichartzPair};
use kerrlab::quantization::{almost_inverse_defect, log_loss_row, LogLossConfig};
use kerrlab::radial::{
    cauchy_ratio, classify_case, elliptic_ratios, gronwall_constant, radial_energy, solve_radial_cauchy, solve_radial_dirichlet,
    Case, CaseThresholds, Direction, FrequencyTriple, SolveReport,
};
use kerrlab::symbols::{b_ps, b_ps_inv, derivative_bound_probe, SymbolPoint, Weight, WeightParams, PROBE_CALIBRATION};
use kerrlab::{BlackHoleParams, Error};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::{num, Artifacts};

/// Failure classes mapped to exit codes 1 and 2.
#[derive(Debug)]
pub enum Failure {
    Validation(String),
    Numerical(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Numerical(_) => 2,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Validation(m) | Failure::Numerical(m) => m,
        }
    }
}

/// Tags a library error with the record that produced it.
fn at(record: impl std::fmt::Display) -> impl Fn(Error) -> Failure {
    move |e: Error| {
        let msg = format!("{record}: {e}");
        if e.is_numerical() {
            Failure::Numerical(msg)
        } else {
            Failure::Validation(msg)
        }
    }
}

fn params(cfg: &RunConfig) -> Result<BlackHoleParams, Failure> {
    BlackHoleParams::new(cfg.black_hole.mass, cfg.black_hole.spin).map_err(at("black_hole"))
}

fn weight_params(cfg: &RunConfig) -> Result<WeightParams, Failure> {
    WeightParams::new(cfg.symbols.c, cfg.symbols.gamma0_width).map_err(at("symbols"))
}

pub fn geometry_check(cfg: &RunConfig) -> Result<Artifacts, Failure> {
    let p = params(cfg)?;
    let s = &cfg.geometry;
    let mut art = Artifacts::new(
        "geometry-check",
        cfg,
        &[("r", "M"), ("theta", "rad"), ("identity_defect", "1"), ("negative_eigenvalues", "count")],
    );
    let grid = RadialGrid::new(s.r_lo, s.r_hi, s.points).map_err(at("geometry grid"))?;
    let mut worst: f64 = 0.0;
    for r in grid.points() {
        for k in 0..s.thetas {
            let theta = PI * (k as f64 + 0.5) / s.thetas as f64;
            let pt = BoyerLindquistPoint::at(r, theta);
            let rec = format!("point r={r}, theta={theta}");
            let g = bl_metric(&pt, &p).map_err(at(&rec))?;
            let h = bl_inverse_metric(&pt, &p).map_err(at(&rec))?;
            let d = identity_defect(&g, &h);
            worst = worst.max(d);
            art.row(&[num(r), num(theta), num(d), g.negative_eigenvalues().to_string()]);
        }
    }
    let profile = MuProfile::new(&p).map_err(at("mu profile"))?;
    let (_, r_plus) = kerrlab::geometry::horizon_radii(&p).map_err(at("horizon"))?;
    let mu_grid: Vec<f64> = (0..400).map(|i| r_plus + 0.01 + (s.r_hi - r_plus - 0.01) * i as f64 / 399.0).collect();
    let report = profile.check(&mu_grid).map_err(at("mu conditions"))?;
    #[derive(Serialize)]
    struct Summary {
        max_identity_defect: f64,
        mu: kerrlab::geometry::MuReport,
        r_plus: f64,
    }
    art.record(&Summary { max_identity_defect: worst, mu: report, r_plus });
    Ok(art)
}

pub fn trace(cfg: &RunConfig) -> Result<Artifacts, Failure> {
    let p = params(cfg)?;
    let s = &cfg.trace;
    let r0 = match s.r {
        Some(r) => r,
        None => trapped_radius(s.tau, s.ratio * s.tau, &p).map_err(at("trapped radius"))?,
    } + s.perturbation;
    let start = equatorial_launch(r0, s.tau, s.ratio, &p).map_err(at("launch"))?;
    let step = s.step.unwrap_or_else(|| default_step(&p));
    let window = FlowWindow { r_max: s.r_max, ..FlowWindow::default() };
    let trace = geodesic_flow(&start, &p, s.duration, step, window).map_err(at("geodesic flow"))?;
    let mut buf = Vec::new();
    trace.write_csv(&p, &mut buf).map_err(|e| Failure::Validation(e.to_string()))?;
    let mut art = Artifacts::new(
        "trace",
        cfg,
        &[
            ("s", "M"),
            ("t", "M"),
            ("r", "M"),
            ("phi", "rad"),
            ("theta", "rad"),
            ("tau", "1/M"),
            ("xi", "1/M"),
            ("Phi", "1"),
            ("Theta", "1"),
            ("p_residual", "1/M^2"),
        ],
    );
    for line in String::from_utf8(buf).expect("ascii csv").lines().skip(1) {
        art.row(&line.split(',').map(str::to_string).collect::<Vec<_>>());
    }
    art.record(&trapping_residuals(&trace, &p));
    art.record(&trace.diagnostics);
    Ok(art)
}

pub fn trapped_radius_table(cfg: &RunConfig) -> Result<Artifacts, Failure> {
    let s = &cfg.trapped_radius;
    let mut art = Artifacts::new("trapped-radius", cfg, &[("a", "M"), ("ratio", "1"), ("tau", "1/M"), ("r_a", "M")]);
    for &a in &s.spins {
        let p = BlackHoleParams::new(cfg.black_hole.mass, a).map_err(at(format!("spin {a}")))?;
        for &q in &s.ratios {
            let rec = format!("row a={a}, ratio={q}");
            let ra = trapped_radius(s.tau, q * s.tau, &p).map_err(at(&rec))?;
            art.row(&[num(a), num(q), num(s.tau), num(ra)]);
            #[derive(Serialize)]
            struct Row {
                a: f64,
                ratio: f64,
                r_a: f64,
            }
            art.record(&Row { a, ratio: q, r_a: ra });
        }
    }
    Ok(art)
}

pub fn spheroidal(cfg: &RunConfig) -> Result<Artifacts, Failure> {
    let s = &cfg.spheroidal;
    let mut art = Artifacts::new("spheroidal", cfg, &[("m", "1"), ("k", "1"), ("c2", "1"), ("lambda2", "1")]);
    for &m in &s.m {
        for &c2 in &s.c2 {
            let modes = spheroidal_eigenvalues(m, c2, s.count, s.count + s.extra_basis)
                .map_err(at(format!("sector m={m}, c2={c2}")))?;
            for md in modes {
                art.row(&[md.m.to_string(), md.k.to_string(), num(md.c2), format!("{:.16e}", md.lambda2)]);
                #[derive(Serialize)]
                struct Row {
                    m: i64,
                    k: u64,
                    c2: f64,
                    lambda2: f64,
                }
                art.record(&Row { m: md.m, k: md.k, c2: md.c2, lambda2: md.lambda2 });
            }
        }
    }
    Ok(art)
}

fn gaussian_source(grid: RadialGrid, center: f64, width: f64, cut: f64) -> GridFunction {
    let lo = grid.lo() + cut;
    GridFunction::from_real_fn(grid, |r| if r <= lo { 0.0 } else { (-((r - center) / width).powi(2)).exp() })
}

pub fn radial_solve(cfg: &RunConfig) -> Result<Artifacts, Failure> {
    let p = params(cfg)?;
    let s = &cfg.radial;
    let grid = RadialGrid::new(s.r_lo, s.r_hi, s.points).map_err(at("radial grid"))?;
    let g = gaussian_source(grid, s.source_center, s.source_width, s.source_cut);
    let mut art = Artifacts::new(
        "radial-solve",
        cfg,
        &[
            ("tau", "1/M"),
            ("Phi", "1/M"),
            ("lambda", "1/M"),
            ("case", "label"),
            ("solver", "label"),
            ("residual", "1"),
            ("diag1", "varies"),
            ("diag2", "varies"),
        ],
    );
    let rows: Vec<Result<SolveReport, Failure>> = s
        .frequencies
        .par_iter()
        .enumerate()
        .map(|(i, &[tau, phi, lambda])| {
            let rec = format!("row {i} (tau={tau}, Phi={phi}, lambda={lambda})");
            let triple = FrequencyTriple::new(tau, phi, lambda).map_err(at(&rec))?;
            let tag = classify_case(&triple, CaseThresholds::default());
            let (w, solver, residual) = match tag.case {
                Case::Case2 | Case::Case4 => {
                    let (w, res) = solve_radial_cauchy(&g, &triple, &p, Direction::Outward).map_err(at(&rec))?;
                    (w, "cauchy", res)
                }
                _ => (solve_radial_dirichlet(&g, &triple, &p).map_err(at(&rec))?, "dirichlet", f64::NAN),
            };
            let energy = radial_energy(&w, &triple, &p, tag.case).map_err(at(&rec))?;
            let diagnostics = match tag.case {
                Case::Case2 => vec![
                    ("gronwall".to_string(), gronwall_constant(&energy, &grid, g.l2_norm())),
                    ("cauchy_ratio".to_string(), cauchy_ratio(&w, &g, tau)),
                ],
                Case::Case3 => {
                    let (a, b) = elliptic_ratios(&w, &g, lambda);
                    vec![("elliptic_l2".to_string(), a), ("elliptic_h1".to_string(), b)]
                }
                _ => vec![
                    ("energy_max".to_string(), energy.iter().cloned().fold(0.0, f64::max)),
                    ("w_sup".to_string(), w.sup_norm()),
                ],
            };
            Ok(SolveReport { triple, case: tag, solver, residual, diagnostics })
        })
        .collect();
    for row in rows {
        let r = row?;
        art.row(&[
            num(r.triple.tau),
            num(r.triple.azimuthal),
            num(r.triple.lambda),
            format!("{:?}", r.case.case),
            r.solver.to_string(),
            num(r.residual),
            format!("{}={}", r.diagnostics[0].0, num(r.diagnostics[0].1)),
            format!("{}={}", r.diagnostics[1].0, num(r.diagnostics[1].1)),
        ]);
        art.record(&r);
    }
    Ok(art)
}

const PROBE_ORDERS: [[u32; 4]; 6] = [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0], [2, 0, 0, 0], [1, 1, 0, 0], [0, 2, 0, 0]];

pub fn weights(cfg: &RunConfig) -> Result<Artifacts, Failure> {
    let p = params(cfg)?;
    let wp = weight_params(cfg)?;
    let s = &cfg.weights;
    let grid = RadialGrid::new(s.r_lo, s.r_hi, s.points).map_err(at("weights grid"))?;
    let mut art = Artifacts::new(
        "weights",
        cfg,
        &[("r", "M"), ("tau", "1/M"), ("xi", "1/M"), ("Phi", "1/M"), ("lambda", "1/M"), ("b", "1"), ("b_inv", "1"), ("probe_fail", "count")],
    );
    for (i, r) in grid.points().into_iter().enumerate() {
        let pt = SymbolPoint { r, tau: s.tau, xi: s.xi, azimuthal: s.azimuthal, lambda: s.lambda };
        let rec = format!("sample {i} (r={r})");
        let b = b_ps(&pt, &p, &wp).map_err(at(&rec))?;
        let bi = b_ps_inv(&pt, &p, &wp).map_err(at(&rec))?;
        let mut fails = 0;
        if s.probes {
            for order in PROBE_ORDERS {
                for weight in [Weight::Forward, Weight::Inverse] {
                    let pr = derivative_bound_probe(&pt, order, weight, &p, &wp).map_err(at(&rec))?;
                    if !pr.passes(PROBE_CALIBRATION) {
                        fails += 1;
                    }
                    #[derive(Serialize)]
                    struct Probe {
                        r: f64,
                        order: [u32; 4],
                        weight: Weight,
                        lhs: f64,
                        rhs: f64,
                        skipped: bool,
                        passes: bool,
                    }
                    art.record(&Probe {
                        r,
                        order,
                        weight,
                        lhs: pr.lhs,
                        rhs: pr.rhs,
                        skipped: pr.skipped,
                        passes: pr.passes(PROBE_CALIBRATION),
                    });
                }
            }
        }
        art.row(&[num(r), num(s.tau), num(s.xi), num(s.azimuthal), num(s.lambda), format!("{b:.16e}"), format!("{bi:.16e}"), fails.to_string()]);
    }
    Ok(art)
}

pub fn quantize_check(cfg: &RunConfig) -> Result<Artifacts, Failure> {
    let p = params(cfg)?;
    let wp = weight_params(cfg)?;
    let s = &cfg.quantize;
    let mut art = Artifacts::new(
        "quantize-check",
        cfg,
        &[("lambda", "1/M"), ("tau", "1/M"), ("defect", "1"), ("iterations", "count"), ("converged", "bool")],
    );
    for &lam in &s.lambdas {
        let tau = s.tau_ratio * lam;
        let est = almost_inverse_defect(lam, tau, s.azimuthal, &p, &wp, s.points, cfg.seed)
            .map_err(at(format!("lambda={lam}")))?;
        art.row(&[num(lam), num(tau), num(est.defect), est.iterations.to_string(), est.converged.to_string()]);
        #[derive(Serialize)]
        struct Row {
            lambda: f64,
            tau: f64,
            defect: f64,
            iterations: usize,
            converged: bool,
        }
        art.record(&Row { lambda: lam, tau, defect: est.defect, iterations: est.iterations, converged: est.converged });
    }
    Ok(art)
}

pub fn log_loss(cfg: &RunConfig) -> Result<Artifacts, Failure> {
    let wp = weight_params(cfg)?;
    let s = &cfg.log_loss;
    let ll = LogLossConfig {
        box_points: s.box_points,
        half_width: s.half_width,
        refinement: s.refinement,
        ode_half_width: s.ode_half_width,
        cutoff_inner: s.cutoff_inner,
        cutoff_outer: s.cutoff_outer,
        eps: s.eps,
        seed: cfg.seed,
    };
    let mut art = Artifacts::new(
        "log-loss",
        cfg,
        &[("lambda", "1"), ("weighted_ratio", "1"), ("unweighted_ratio", "1"), ("residual", "1"), ("defect", "1")],
    );
    for &lam in &s.lambdas {
        let row = log_loss_row(lam, &wp, &ll).map_err(at(format!("lambda={lam}")))?;
        art.row(&[num(lam), num(row.weighted_ratio), num(row.unweighted_ratio), num(row.residual), num(row.defect)]);
        art.record(&row);
    }
    Ok(art)
}

pub fn evolve(cfg: &RunConfig) -> Result<Artifacts, Failure> {
    let s = &cfg.evolve;
    if cfg.black_hole.spin != 0.0 {
        return Err(Failure::Validation("evolve runs Schwarzschild modes only; set a = 0".into()));
    }
    let mass = cfg.black_hole.mass;
    let reach = 2.0 * s.duration + 12.0 * s.pulse_width;
    let grid = RadialGrid::with_spacing(s.pulse_center - reach, s.pulse_center + reach, s.spacing).map_err(at("evolve grid"))?;
    let data = InitialData::gaussian(grid, s.pulse_center, s.pulse_width, mass);
    let opts = EvolutionOptions { snapshot_every: s.snapshot_every, window: (s.window[0], s.window[1]), ..Default::default() };
    let run = evolve_schwarzschild_mode(s.l, s.m, &data, s.duration, s.cfl * grid.spacing(), mass, &opts)
        .map_err(at("evolution"))?;
    let mut art = Artifacts::new(
        "evolve",
        cfg,
        &[("t", "M"), ("slice_energy", "1"), ("local_energy_window", "1"), ("linf", "1")],
    );
    for smp in &run.series {
        art.row(&[num(smp.t), format!("{:.16e}", smp.slice_energy), format!("{:.16e}", smp.local_energy), num(smp.linf)]);
    }
    let residuals: Vec<(f64, f64)> = run
        .snapshots
        .iter()
        .map(|sn| Ok((sn.t, kerr_rw_residual(&run, sn, 2.2 * mass, 20.0 * mass)?)))
        .collect::<Result<_, Error>>()
        .map_err(at("residual"))?;
    #[derive(Serialize)]
    struct Summary {
        l: u32,
        m: i32,
        initial_energy: f64,
        max_energy_drift: f64,
        peak_local_energy: (f64, f64),
        final_local_energy: f64,
        rw_residuals: Vec<(f64, f64)>,
    }
    art.record(&Summary {
        l: run.l,
        m: run.m,
        initial_energy: run.initial_energy(),
        max_energy_drift: run.max_energy_drift(),
        peak_local_energy: run.peak_local_energy(),
        final_local_energy: run.final_local_energy(),
        rw_residuals: residuals,
    });
    Ok(art)
}

pub fn strichartz(cfg: &RunConfig) -> Result<Artifacts, Failure> {
    let mut art = Artifacts::new("strichartz", cfg, &[("rho", "1"), ("p", "1"), ("q", "1"), ("classification", "label")]);
    let mut rows = builtin_pairs();
    rows.extend(cfg.strichartz.extra.iter().map(|t| (t[0], t[1], t[2])));
    for (rho, p, q) in rows {
        let pair = StrichartzPair::new(rho, p, q);
        let class = serde_json::to_value(pair.classification).expect("enum serializes");
        art.row(&[num(rho), num(p), num(q), class.as_str().unwrap_or_default().to_string()]);
        art.record(&pair);
    }
    Ok(art)
}

/// The sweep keeps going past failing rows; the first failure is returned alongside the artifacts.
pub fn sweep(cfg: &RunConfig) -> Result<(Artifacts, Option<Failure>), Failure> {
    let p = params(cfg)?;
    let wp = weight_params(cfg)?;
    let s = &cfg.sweep;
    let grid = RadialGrid::new(s.r_lo, s.r_hi, s.points).map_err(at("sweep grid"))?;
    let g = gaussian_source(grid, s.source_center, s.source_width, 0.1);
    let sc = SweepConfig { weights: wp, box_points: s.box_points, ..SweepConfig::default() };
    let rows = frequency_sweep(s.m, s.k, &s.taus, &p, &g, &sc);
    let mut art = Artifacts::new(
        "sweep",
        cfg,
        &[
            ("tau", "1/M"),
            ("m", "1"),
            ("k", "1"),
            ("lambda", "1/M"),
            ("case", "label"),
            ("solver", "label"),
            ("weighted_ratio", "1"),
            ("unweighted_ratio", "1"),
            ("error", "text"),
        ],
    );
    let mut first = None;
    for (i, r) in rows.iter().enumerate() {
        let opt = |x: Option<f64>| x.map(num).unwrap_or_default();
        let err = r.error.clone().unwrap_or_default().replace(',', ";");
        if first.is_none() {
            if let Some(e) = &r.error {
                first = Some(Failure::Numerical(format!("sweep row {i} (tau={}): {e}", r.tau)));
            }
        }
        art.row(&[
            num(r.tau),
            r.m.to_string(),
            r.k.to_string(),
            num(r.lambda),
            r.case.map(|c| format!("{:?}", c.case)).unwrap_or_default(),
            r.solver.to_string(),
            opt(r.weighted_ratio),
            opt(r.unweighted_ratio),
            err,
        ]);
        art.record(r);
    }
    Ok((art, first))
}
