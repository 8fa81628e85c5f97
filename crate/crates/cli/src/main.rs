//! `kerrlab` command-line driver.
//!
//! Exit status: 0 on success, 1 for invalid configuration or input,
//! 2 for numerical failures (non-convergence, resolution, singular systems).

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::Failure;
use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "kerrlab", version, about = "Numerical experiments for waves on slowly rotating Kerr backgrounds")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = automatic).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Black-hole mass.
    #[arg(long = "M", global = true)]
    mass: Option<f64>,
    /// Black-hole spin parameter.
    #[arg(long = "a", global = true, allow_hyphen_values = true)]
    spin: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Metric identities, signature and horizon-regular slicing report.
    GeometryCheck {
        #[arg(long)]
        points: Option<usize>,
    },
    /// Null geodesic trace.
    Trace {
        #[arg(long)]
        r: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        ratio: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        perturbation: Option<f64>,
        #[arg(long)]
        duration: Option<f64>,
        #[arg(long)]
        step: Option<f64>,
    },
    /// Table of trapped radii over spins and ratios `Phi / tau`.
    TrappedRadius {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        ratios: Option<Vec<f64>>,
    },
    /// Spheroidal eigenvalue table.
    Spheroidal {
        #[arg(long)]
        count: Option<usize>,
    },
    /// Case-tagged radial solves.
    RadialSolve {
        #[arg(long)]
        points: Option<usize>,
    },
    /// Weight symbol samples and derivative probes.
    Weights {
        #[arg(long)]
        points: Option<usize>,
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Almost-inverse defect of the quantized weights.
    QuantizeCheck {
        #[arg(long)]
        points: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        lambdas: Option<Vec<f64>>,
    },
    /// Weighted against unweighted bounds for the model problem.
    LogLoss {
        #[arg(long, value_delimiter = ',')]
        lambdas: Option<Vec<f64>>,
        #[arg(long)]
        box_points: Option<usize>,
    },
    /// Schwarzschild mode evolution.
    Evolve {
        #[arg(long)]
        l: Option<u32>,
        #[arg(long)]
        duration: Option<f64>,
        #[arg(long)]
        spacing: Option<f64>,
    },
    /// Strichartz exponent classification table.
    Strichartz,
    /// Frequency sweep of the separated problem.
    Sweep {
        #[arg(long)]
        points: Option<usize>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        taus: Option<Vec<f64>>,
    },
}

fn load_config(global: &GlobalArgs) -> Result<RunConfig, Failure> {
    let mut cfg = match &global.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Validation(format!("cannot read {}: {e}", path.display())))?;
            config::parse(&text).map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))?
        }
        None => RunConfig::default(),
    };
    if let Some(v) = &global.out {
        cfg.output.dir = v.display().to_string();
    }
    if let Some(v) = global.seed {
        cfg.seed = v;
    }
    if let Some(v) = global.threads {
        cfg.threads = v;
    }
    if let Some(v) = global.mass {
        cfg.black_hole.mass = v;
    }
    if let Some(v) = global.spin {
        cfg.black_hole.spin = v;
        cfg.trapped_radius.spins = vec![v];
    }
    kerrlab::BlackHoleParams::new(cfg.black_hole.mass, cfg.black_hole.spin)
        .map_err(|e| Failure::Validation(e.to_string()))?;
    Ok(cfg)
}

fn apply_overrides(cfg: &mut RunConfig, command: &Command) {
    fn set<T: Clone>(slot: &mut T, v: &Option<T>) {
        if let Some(v) = v {
            *slot = v.clone();
        }
    }
    match command {
        Command::GeometryCheck { points } => set(&mut cfg.geometry.points, points),
        Command::Trace { r, ratio, perturbation, duration, step } => {
            if r.is_some() {
                cfg.trace.r = *r;
            }
            set(&mut cfg.trace.ratio, ratio);
            set(&mut cfg.trace.perturbation, perturbation);
            set(&mut cfg.trace.duration, duration);
            if step.is_some() {
                cfg.trace.step = *step;
            }
        }
        Command::TrappedRadius { ratios } => set(&mut cfg.trapped_radius.ratios, ratios),
        Command::Spheroidal { count } => set(&mut cfg.spheroidal.count, count),
        Command::RadialSolve { points } => set(&mut cfg.radial.points, points),
        Command::Weights { points, lambda } => {
            set(&mut cfg.weights.points, points);
            set(&mut cfg.weights.lambda, lambda);
        }
        Command::QuantizeCheck { points, lambdas } => {
            set(&mut cfg.quantize.points, points);
            set(&mut cfg.quantize.lambdas, lambdas);
        }
        Command::LogLoss { lambdas, box_points } => {
            set(&mut cfg.log_loss.lambdas, lambdas);
            set(&mut cfg.log_loss.box_points, box_points);
        }
        Command::Evolve { l, duration, spacing } => {
            set(&mut cfg.evolve.l, l);
            set(&mut cfg.evolve.duration, duration);
            set(&mut cfg.evolve.spacing, spacing);
        }
        Command::Strichartz => {}
        Command::Sweep { points, taus } => {
            set(&mut cfg.sweep.points, points);
            set(&mut cfg.sweep.taus, taus);
        }
    }
}

fn run(cli: Cli) -> Result<Option<Failure>, Failure> {
    let mut cfg = load_config(&cli.global)?;
    apply_overrides(&mut cfg, &cli.command);
    if cfg.threads > 0 {
        // Fails only if a pool already exists, which cannot happen this early.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build_global();
    }
    let mut deferred = None;
    let art = match &cli.command {
        Command::GeometryCheck { .. } => commands::geometry_check(&cfg)?,
        Command::Trace { .. } => commands::trace(&cfg)?,
        Command::TrappedRadius { .. } => commands::trapped_radius_table(&cfg)?,
        Command::Spheroidal { .. } => commands::spheroidal(&cfg)?,
        Command::RadialSolve { .. } => commands::radial_solve(&cfg)?,
        Command::Weights { .. } => commands::weights(&cfg)?,
        Command::QuantizeCheck { .. } => commands::quantize_check(&cfg)?,
        Command::LogLoss { .. } => commands::log_loss(&cfg)?,
        Command::Evolve { .. } => commands::evolve(&cfg)?,
        Command::Strichartz => commands::strichartz(&cfg)?,
        Command::Sweep { .. } => {
            let (art, failure) = commands::sweep(&cfg)?;
            deferred = failure;
            art
        }
    };
    let dir = PathBuf::from(&cfg.output.dir);
    let (csv, jsonl) = art
        .write(&dir)
        .map_err(|e| Failure::Validation(format!("cannot write to {}: {e}", dir.display())))?;
    println!("{}", csv.display());
    println!("{}", jsonl.display());
    Ok(deferred)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(f)) | Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
