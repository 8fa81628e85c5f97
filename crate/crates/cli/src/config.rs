//! Run configuration. Precedence: built-in defaults, then the `--config` file,
//! then command-line flags.

use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub schema_version: u32,
    pub seed: u64,
    /// Worker threads for row-parallel commands; 0 lets the pool decide.
    pub threads: usize,
    pub black_hole: BlackHole,
    pub output: Output,
    pub symbols: Symbols,
    pub geometry: GeometrySection,
    pub trace: TraceSection,
    pub trapped_radius: TrappedRadiusSection,
    pub spheroidal: SpheroidalSection,
    pub radial: RadialSection,
    pub weights: WeightsSection,
    pub quantize: QuantizeSection,
    pub log_loss: LogLossSection,
    pub evolve: EvolveSection,
    pub strichartz: StrichartzSection,
    pub sweep: SweepSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seed: 0,
            threads: 0,
            black_hole: BlackHole::default(),
            output: Output::default(),
            symbols: Symbols::default(),
            geometry: GeometrySection::default(),
            trace: TraceSection::default(),
            trapped_radius: TrappedRadiusSection::default(),
            spheroidal: SpheroidalSection::default(),
            radial: RadialSection::default(),
            weights: WeightsSection::default(),
            quantize: QuantizeSection::default(),
            log_loss: LogLossSection::default(),
            evolve: EvolveSection::default(),
            strichartz: StrichartzSection::default(),
            sweep: SweepSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BlackHole {
    pub mass: f64,
    pub spin: f64,
}

impl Default for BlackHole {
    fn default() -> Self {
        Self { mass: 1.0, spin: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Output {
    pub dir: String,
}

impl Default for Output {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Symbols {
    /// Desk-scale default `C = 4.5`; weights are the identity while `ln lambda < C`.
    pub c: f64,
    pub gamma0_width: f64,
}

impl Default for Symbols {
    fn default() -> Self {
        let wp = kerrlab::symbols::WeightParams::desk_scale();
        Self { c: wp.c, gamma0_width: wp.gamma0_width }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometrySection {
    pub r_lo: f64,
    pub r_hi: f64,
    pub points: usize,
    pub thetas: usize,
}

impl Default for GeometrySection {
    fn default() -> Self {
        Self { r_lo: 2.3, r_hi: 20.0, points: 64, thetas: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TraceSection {
    /// Launch radius; `None` starts at `r_a(tau, ratio * tau)`.
    pub r: Option<f64>,
    pub tau: f64,
    pub ratio: f64,
    /// Added to the launch radius.
    pub perturbation: f64,
    pub duration: f64,
    pub step: Option<f64>,
    pub r_max: f64,
}

impl Default for TraceSection {
    fn default() -> Self {
        Self { r: None, tau: 1.0, ratio: 0.0, perturbation: 0.0, duration: 100.0, step: None, r_max: 100.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrappedRadiusSection {
    pub spins: Vec<f64>,
    pub ratios: Vec<f64>,
    pub tau: f64,
}

impl Default for TrappedRadiusSection {
    fn default() -> Self {
        Self { spins: vec![0.0, 0.1, 0.2, 0.3], ratios: vec![-4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0], tau: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpheroidalSection {
    pub m: Vec<i64>,
    pub c2: Vec<f64>,
    pub count: usize,
    /// Extra basis functions beyond `count`.
    pub extra_basis: usize,
}

impl Default for SpheroidalSection {
    fn default() -> Self {
        Self { m: vec![0, 1, 2], c2: vec![0.0, 0.01, 0.1, 1.0], count: 8, extra_basis: 30 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadialSection {
    pub r_lo: f64,
    pub r_hi: f64,
    pub points: usize,
    /// Gaussian source `exp(-(r - center)^2 / width^2)`, cut off below `r_lo + cut`.
    pub source_center: f64,
    pub source_width: f64,
    pub source_cut: f64,
    /// Rows `[tau, Phi, lambda]`.
    pub frequencies: Vec<[f64; 3]>,
}

impl Default for RadialSection {
    fn default() -> Self {
        Self {
            r_lo: 2.3,
            r_hi: 12.0,
            points: 8001,
            source_center: 5.0,
            source_width: 1.0,
            source_cut: 0.1,
            frequencies: vec![[0.5, 0.0, 1.5], [12.0, 0.0, 1.0], [1.0, 0.0, 20.0], [15.0, 1.0, 14.0]],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeightsSection {
    pub tau: f64,
    pub azimuthal: f64,
    pub lambda: f64,
    pub xi: f64,
    pub r_lo: f64,
    pub r_hi: f64,
    pub points: usize,
    /// Derivative probes at each sample point.
    pub probes: bool,
}

impl Default for WeightsSection {
    fn default() -> Self {
        Self { tau: 1e9 / 3.0, azimuthal: 0.0, lambda: 1e9, xi: 0.0, r_lo: 2.5, r_hi: 3.5, points: 101, probes: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuantizeSection {
    pub lambdas: Vec<f64>,
    /// `tau = tau_ratio * lambda`.
    pub tau_ratio: f64,
    pub azimuthal: f64,
    pub points: usize,
}

impl Default for QuantizeSection {
    fn default() -> Self {
        Self { lambdas: vec![128.0, 256.0, 512.0, 1024.0, 2048.0, 4096.0], tau_ratio: 1.0 / 3.0, azimuthal: 0.0, points: 2048 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LogLossSection {
    pub lambdas: Vec<f64>,
    pub box_points: usize,
    pub half_width: f64,
    pub refinement: usize,
    pub ode_half_width: f64,
    pub cutoff_inner: f64,
    pub cutoff_outer: f64,
    pub eps: f64,
}

impl Default for LogLossSection {
    fn default() -> Self {
        let d = kerrlab::quantization::LogLossConfig::default();
        Self {
            lambdas: vec![128.0, 256.0, 512.0, 1024.0, 2048.0, 4096.0],
            box_points: d.box_points,
            half_width: d.half_width,
            refinement: d.refinement,
            ode_half_width: d.ode_half_width,
            cutoff_inner: d.cutoff_inner,
            cutoff_outer: d.cutoff_outer,
            eps: d.eps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolveSection {
    pub l: u32,
    pub m: i32,
    pub duration: f64,
    pub spacing: f64,
    pub cfl: f64,
    pub pulse_center: f64,
    pub pulse_width: f64,
    pub window: [f64; 2],
    pub snapshot_every: f64,
}

impl Default for EvolveSection {
    fn default() -> Self {
        Self {
            l: 2,
            m: 0,
            duration: 100.0,
            spacing: 0.02,
            cfl: 0.5,
            pulse_center: 10.0,
            pulse_width: 2.0,
            window: [2.5, 3.5],
            snapshot_every: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StrichartzSection {
    /// Extra `[rho, p, q]` rows after the built-in table; `inf` is accepted.
    pub extra: Vec<[f64; 3]>,
}

impl Default for StrichartzSection {
    fn default() -> Self {
        Self { extra: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub m: i64,
    pub k: u64,
    pub taus: Vec<f64>,
    pub r_lo: f64,
    pub r_hi: f64,
    pub points: usize,
    pub source_center: f64,
    pub source_width: f64,
    pub box_points: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            m: 1,
            k: 2,
            taus: vec![0.5, 1.0, 2.0, 4.0, 8.0, 16.0],
            r_lo: 2.3,
            r_hi: 12.0,
            points: 8001,
            source_center: 5.0,
            source_width: 1.0,
            box_points: 256,
        }
    }
}

/// Parses a config file; errors carry the line and column from the TOML parser.
pub fn parse(text: &str) -> Result<RunConfig, String> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| e.to_string())?;
    if cfg.schema_version != SCHEMA_VERSION {
        return Err(format!("unsupported schema_version {} (expected {SCHEMA_VERSION})", cfg.schema_version));
    }
    Ok(cfg)
}
