//! Null bicharacteristic flow of the wave operator, the trapped-set
//! conditions and the trapped radius `r_a(tau, Phi)`.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, delta, horizon_radii, rho2, BlackHoleParams, BoyerLindquistPoint, PHI, R, T, THETA};

/// A point of the cotangent bundle: position `(t, r, phi, theta)` and the
/// dual Fourier variables `(tau, xi, Phi, Theta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub t: f64,
    pub r: f64,
    pub phi: f64,
    pub theta: f64,
    pub tau: f64,
    pub xi: f64,
    pub azimuthal: f64,
    pub polar: f64,
}

impl PhasePoint {
    pub fn position(&self) -> BoyerLindquistPoint {
        BoyerLindquistPoint::new(self.t, self.r, self.phi, self.theta)
    }

    /// Squared Euclidean size of the covector.
    pub fn covector_norm2(&self) -> f64 {
        self.tau * self.tau + self.xi * self.xi + self.azimuthal * self.azimuthal + self.polar * self.polar
    }

    /// Replaces `Theta` (keeping its sign, or `+` if zero) so that the point is null.
    pub fn with_null_polar(mut self, params: &BlackHoleParams) -> Result<Self> {
        self.polar = 0.0;
        let rest = rho2(self.r, self.theta, params) * principal_symbol(&self, params)?;
        if rest > 0.0 {
            return Err(Error::InvalidInput(format!(
                "no real Theta makes this point null (rho^2 p = {rest} with Theta = 0)"
            )));
        }
        self.polar = (-rest).sqrt();
        Ok(self)
    }

    /// Replaces `xi` by the non-negative root of the null condition.
    pub fn with_null_radial(mut self, params: &BlackHoleParams) -> Result<Self> {
        self.xi = 0.0;
        let rest = rho2(self.r, self.theta, params) * principal_symbol(&self, params)?;
        let d = delta(self.r, params);
        if rest / d > 0.0 {
            return Err(Error::InvalidInput("no real xi makes this point null".into()));
        }
        self.xi = (-rest / d).sqrt();
        Ok(self)
    }
}

/// `p = g^{tt} tau^2 + 2 g^{t phi} tau Phi + g^{phi phi} Phi^2 + g^{rr} xi^2 + g^{theta theta} Theta^2`,
/// assembled from the contravariant Boyer-Lindquist table.
pub fn principal_symbol(phase: &PhasePoint, params: &BlackHoleParams) -> Result<f64> {
    let g = geometry::bl_inverse_metric(&phase.position(), params)?;
    Ok(g.get(T, T) * phase.tau * phase.tau
        + 2.0 * g.get(T, PHI) * phase.tau * phase.azimuthal
        + g.get(PHI, PHI) * phase.azimuthal * phase.azimuthal
        + g.get(R, R) * phase.xi * phase.xi
        + g.get(THETA, THETA) * phase.polar * phase.polar)
}

/// Partial derivatives of `p`; positions first, then covector, in the
/// orders `(t, r, phi, theta)` and `(tau, xi, Phi, Theta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymbolGradient {
    pub d_position: [f64; 4],
    pub d_covector: [f64; 4],
}

/// Closed-form gradient of `p`, written through the separated form
/// `rho^2 p = -Q^2/Delta + A^2 + Delta xi^2 + Theta^2` with
/// `Q = (r^2+a^2) tau + a Phi` and `A = a tau sin(theta) + Phi / sin(theta)`.
pub fn symbol_gradient(phase: &PhasePoint, params: &BlackHoleParams) -> SymbolGradient {
    let (m, a) = (params.mass(), params.spin());
    let (r, th) = (phase.r, phase.theta);
    let (tau, xi, big_phi, big_theta) = (phase.tau, phase.xi, phase.azimuthal, phase.polar);
    let (s, c) = th.sin_cos();
    let d = delta(r, params);
    let rho2 = r * r + a * a * c * c;
    let q = (r * r + a * a) * tau + a * big_phi;
    let ang = a * tau * s + big_phi / s;
    let n = -q * q / d + ang * ang + d * xi * xi + big_theta * big_theta;

    let dn_dr = -(4.0 * r * tau * q * d - 2.0 * (r - m) * q * q) / (d * d) + 2.0 * (r - m) * xi * xi;
    let dp_dr = dn_dr / rho2 - n * 2.0 * r / (rho2 * rho2);
    let dn_dth = 2.0 * ang * (a * tau * c - big_phi * c / (s * s));
    let drho_dth = -2.0 * a * a * s * c;
    let dp_dth = dn_dth / rho2 - n * drho_dth / (rho2 * rho2);

    SymbolGradient {
        d_position: [0.0, dp_dr, 0.0, dp_dth],
        d_covector: [
            (-2.0 * q * (r * r + a * a) / d + 2.0 * ang * a * s) / rho2,
            2.0 * d * xi / rho2,
            (-2.0 * q * a / d + 2.0 * ang / s) / rho2,
            2.0 * big_theta / rho2,
        ],
    }
}

/// Why a trace stopped before the requested duration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BoundaryExit {
    Horizon,
    Outer,
}

/// Conservation diagnostics accumulated along a trace.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct FlowDiagnostics {
    pub max_symbol_drift: f64,
    pub max_tau_drift: f64,
    pub max_phi_drift: f64,
}

#[derive(Debug, Clone)]
pub struct GeodesicTrace {
    pub samples: Vec<(f64, PhasePoint)>,
    pub step: f64,
    pub diagnostics: FlowDiagnostics,
    pub exit: Option<BoundaryExit>,
    initial_symbol: f64,
}

impl GeodesicTrace {
    pub fn last(&self) -> &PhasePoint {
        &self.samples.last().expect("traces are never empty").1
    }

    /// Writes the trace as CSV with columns
    /// `s,t,r,phi,theta,tau,xi,Phi,Theta,p_residual`.
    pub fn write_csv<W: Write>(&self, params: &BlackHoleParams, out: &mut W) -> io::Result<()> {
        writeln!(out, "s,t,r,phi,theta,tau,xi,Phi,Theta,p_residual")?;
        for (s, pt) in &self.samples {
            let p = principal_symbol(pt, params).unwrap_or(f64::NAN);
            writeln!(
                out,
                "{s:.10e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.6e}",
                pt.t,
                pt.r,
                pt.phi,
                pt.theta,
                pt.tau,
                pt.xi,
                pt.azimuthal,
                pt.polar,
                p - self.initial_symbol
            )?;
        }
        Ok(())
    }
}

/// Integration window for [`geodesic_flow`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowWindow {
    /// Traces stop when `r < r+ + horizon_margin`.
    pub horizon_margin: f64,
    /// Traces stop when `r > r_max`.
    pub r_max: f64,
}

impl Default for FlowWindow {
    fn default() -> Self {
        Self { horizon_margin: 0.05, r_max: 100.0 }
    }
}

const NULL_TOL: f64 = 1e-10;

/// Default step `M / 100`.
pub fn default_step(params: &BlackHoleParams) -> f64 {
    params.mass() / 100.0
}

// State: (t, r, phi, theta, xi, Theta); tau and Phi are constants of motion.
type State = [f64; 6];

fn rhs(y: &State, tau: f64, big_phi: f64, params: &BlackHoleParams) -> State {
    let pt = PhasePoint {
        t: y[0],
        r: y[1],
        phi: y[2],
        theta: y[3],
        tau,
        xi: y[4],
        azimuthal: big_phi,
        polar: y[5],
    };
    let g = symbol_gradient(&pt, params);
    [
        g.d_covector[0],
        g.d_covector[1],
        g.d_covector[2],
        g.d_covector[3],
        -g.d_position[1],
        -g.d_position[3],
    ]
}

fn axpy(y: &State, h: f64, k: &State) -> State {
    std::array::from_fn(|i| y[i] + h * k[i])
}

/// Integrates Hamilton's equations for `p` with the classical fixed-step
/// fourth-order Runge-Kutta scheme.
pub fn geodesic_flow(
    start: &PhasePoint,
    params: &BlackHoleParams,
    duration: f64,
    step: f64,
    window: FlowWindow,
) -> Result<GeodesicTrace> {
    if !(step > 0.0) {
        return Err(Error::InvalidInput(format!("step must be positive, got {step}")));
    }
    if !(duration >= 0.0) {
        return Err(Error::InvalidInput(format!("duration must be non-negative, got {duration}")));
    }
    let (_, r_plus) = horizon_radii(params)?;
    let r_min = r_plus + window.horizon_margin;
    if !(start.r > r_min && start.r < window.r_max) {
        return Err(Error::InvalidInput(format!(
            "start radius {} outside the flow window ({r_min}, {})",
            start.r, window.r_max
        )));
    }
    let p0 = principal_symbol(start, params)?;
    let scale = start.covector_norm2();
    if p0.abs() > NULL_TOL * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::InvalidInput(format!("start is not null: p = {p0:e}")));
    }

    let (tau, big_phi) = (start.tau, start.azimuthal);
    let n_steps = (duration / step).round() as usize;
    let mut samples = Vec::with_capacity(n_steps + 1);
    samples.push((0.0, *start));
    let mut y: State = [start.t, start.r, start.phi, start.theta, start.xi, start.polar];
    let mut diagnostics = FlowDiagnostics::default();
    let mut exit = None;

    for k in 1..=n_steps {
        let k1 = rhs(&y, tau, big_phi, params);
        let k2 = rhs(&axpy(&y, 0.5 * step, &k1), tau, big_phi, params);
        let k3 = rhs(&axpy(&y, 0.5 * step, &k2), tau, big_phi, params);
        let k4 = rhs(&axpy(&y, step, &k3), tau, big_phi, params);
        for i in 0..6 {
            y[i] += step / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if y[1] < r_min {
            exit = Some(BoundaryExit::Horizon);
            break;
        }
        if y[1] > window.r_max {
            exit = Some(BoundaryExit::Outer);
            break;
        }
        let pt = PhasePoint {
            t: y[0],
            r: y[1],
            phi: y[2],
            theta: y[3],
            tau,
            xi: y[4],
            azimuthal: big_phi,
            polar: y[5],
        };
        let p = principal_symbol(&pt, params)?;
        diagnostics.max_symbol_drift = diagnostics.max_symbol_drift.max((p - p0).abs());
        diagnostics.max_tau_drift = diagnostics.max_tau_drift.max((pt.tau - tau).abs());
        diagnostics.max_phi_drift = diagnostics.max_phi_drift.max((pt.azimuthal - big_phi).abs());
        samples.push((k as f64 * step, pt));
    }

    Ok(GeodesicTrace { samples, step, diagnostics, exit, initial_symbol: p0 })
}

/// `R_a(r, tau, Phi)`, whose root near `3M` locates the trapped null geodesics.
pub fn r_a_eval(r: f64, tau: f64, big_phi: f64, params: &BlackHoleParams) -> f64 {
    let (m, a) = (params.mass(), params.spin());
    (r * r + a * a) * (r.powi(3) - 3.0 * m * r * r + a * a * r + a * a * m) * tau * tau
        - 2.0 * a * m * (r * r - a * a) * tau * big_phi
        - a * a * (r - m) * big_phi * big_phi
}

// tau^{-2} R_a and its r-derivative as functions of the ratio q = Phi / tau.
fn reduced_r_a(r: f64, q: f64, params: &BlackHoleParams) -> (f64, f64) {
    let (m, a) = (params.mass(), params.spin());
    let cubic = r.powi(3) - 3.0 * m * r * r + a * a * r + a * a * m;
    let dcubic = 3.0 * r * r - 6.0 * m * r + a * a;
    let value = (r * r + a * a) * cubic - 2.0 * a * m * (r * r - a * a) * q - a * a * (r - m) * q * q;
    let deriv = 2.0 * r * cubic + (r * r + a * a) * dcubic - 4.0 * a * m * r * q - a * a * q * q;
    (value, deriv)
}

/// The simple root `r_a(tau, Phi)` of `R_a` near `3M`, by Newton iteration seeded at `3M`.
///
/// Depends on `(tau, Phi)` only through `Phi / tau`.
pub fn trapped_radius(tau: f64, big_phi: f64, params: &BlackHoleParams) -> Result<f64> {
    let m = params.mass();
    if tau == 0.0 || !tau.is_finite() {
        return Err(Error::InvalidInput("trapped radius needs tau != 0".into()));
    }
    if big_phi.abs() > 4.0 * m * tau.abs() {
        return Err(Error::InvalidInput(format!(
            "|Phi| = {} exceeds 4M|tau| = {}",
            big_phi.abs(),
            4.0 * m * tau.abs()
        )));
    }
    let q = big_phi / tau;
    let tol = 1e-12 * m.powi(5);
    let mut r = 3.0 * m;
    for _ in 0..50 {
        let (f, df) = reduced_r_a(r, q, params);
        if f.abs() <= tol {
            if (r - 3.0 * m).abs() > 0.5 * m {
                return Err(Error::NonConvergence(format!("root {r} outside [2.5M, 3.5M]")));
            }
            return Ok(r);
        }
        r -= f / df;
        if !r.is_finite() {
            break;
        }
    }
    Err(Error::NonConvergence(format!("Newton iteration for r_a(q = {q}) did not converge")))
}

/// Thresholds for classifying a numerical trace as trapped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrappingThresholds {
    /// `max |xi| < xi_rel |tau|`.
    pub xi_rel: f64,
    /// `max |r - mean r| < r_variation M`.
    pub r_variation: f64,
    /// `|R_a(mean r)| < ra_rel tau^2 M^5`.
    pub ra_rel: f64,
}

impl Default for TrappingThresholds {
    fn default() -> Self {
        Self { xi_rel: 1e-3, r_variation: 1e-3, ra_rel: 1e-6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrappedSetResiduals {
    pub xi_max: f64,
    pub r_variation: f64,
    pub ra_residual: f64,
    /// `min 4a^2 r^2 Delta sin^2(theta) - (2 r Delta - (r - M) rho^2)^2` along the trace.
    pub rct_margin: f64,
    pub tau: f64,
}

impl TrappedSetResiduals {
    pub fn is_trapped(&self, params: &BlackHoleParams, thresholds: &TrappingThresholds) -> bool {
        let m = params.mass();
        let tau = self.tau.abs();
        self.xi_max < thresholds.xi_rel * tau
            && self.r_variation < thresholds.r_variation * m
            && self.ra_residual < thresholds.ra_rel * tau * tau * m.powi(5)
    }
}

pub fn rct_margin(r: f64, theta: f64, params: &BlackHoleParams) -> f64 {
    let (m, a) = (params.mass(), params.spin());
    let d = delta(r, params);
    let lhs = 2.0 * r * d - (r - m) * rho2(r, theta, params);
    4.0 * a * a * r * r * d * theta.sin().powi(2) - lhs * lhs
}

pub fn trapping_residuals(trace: &GeodesicTrace, params: &BlackHoleParams) -> TrappedSetResiduals {
    let n = trace.samples.len() as f64;
    let mean_r = trace.samples.iter().map(|(_, p)| p.r).sum::<f64>() / n;
    let first = trace.samples[0].1;
    let mut res = TrappedSetResiduals {
        xi_max: 0.0,
        r_variation: 0.0,
        ra_residual: r_a_eval(mean_r, first.tau, first.azimuthal, params).abs(),
        rct_margin: f64::INFINITY,
        tau: first.tau,
    };
    for (_, p) in &trace.samples {
        res.xi_max = res.xi_max.max(p.xi.abs());
        res.r_variation = res.r_variation.max((p.r - mean_r).abs());
        res.rct_margin = res.rct_margin.min(rct_margin(p.r, p.theta, params));
    }
    res
}

/// Null data at radius `r`, equator, `xi = 0`, with `Phi / tau = ratio` and
/// `Theta >= 0` fixed by the null condition.
pub fn equatorial_launch(r: f64, tau: f64, ratio: f64, params: &BlackHoleParams) -> Result<PhasePoint> {
    PhasePoint {
        t: 0.0,
        r,
        phi: 0.0,
        theta: std::f64::consts::FRAC_PI_2,
        tau,
        xi: 0.0,
        azimuthal: ratio * tau,
        polar: 0.0,
    }
    .with_null_polar(params)
}

/// Finds the ratio `Phi / tau` whose launch at `r0` (see [`equatorial_launch`])
/// stays at constant radius, by bisection on the direction in which the
/// orbit leaves the shell `|r - r0| < exit_width`.
///
/// `bracket` must contain ratios that leave on opposite sides.
pub fn shoot_trapped_ratio(
    r0: f64,
    tau: f64,
    bracket: (f64, f64),
    params: &BlackHoleParams,
    duration: f64,
    exit_width: f64,
) -> Result<f64> {
    let step = default_step(params);
    let window = FlowWindow { horizon_margin: 0.01 * params.mass(), r_max: 10.0 * r0 };
    let side = |q: f64| -> Result<f64> {
        let start = equatorial_launch(r0, tau, q, params)?;
        let trace = geodesic_flow(&start, params, duration, step, window)?;
        for (_, p) in &trace.samples {
            let off = p.r - r0;
            if off.abs() > exit_width {
                return Ok(off.signum());
            }
        }
        Ok(0.0)
    };
    let (mut lo, mut hi) = bracket;
    let s_lo = side(lo)?;
    let s_hi = side(hi)?;
    if s_lo == 0.0 {
        return Ok(lo);
    }
    if s_hi == 0.0 {
        return Ok(hi);
    }
    if s_lo == s_hi {
        return Err(Error::InvalidInput("shooting bracket does not straddle the trapped ratio".into()));
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let s = side(mid)?;
        if s == 0.0 || (hi - lo).abs() < 1e-14 * mid.abs().max(1.0) {
            return Ok(mid);
        }
        if s == s_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
